//! Numerical checks of the regression-loss identities on discrete
//! distributions.
//!
//! With `c = 1 - y`, the loss at a regressor table `r` is
//! `sum_i p_i * -ln(c + r_i)`. Two results are checked:
//!
//! * single target: at `r_i = p_i / c' + y - 1` the loss equals
//!   `H(p) + ln c'`;
//! * two targets: at `r = -(p1 c2 + p2 c1) / (p1 + p2)` the two-set loss,
//!   with all logs taken on magnitudes, satisfies
//!   `L + 2 JSD(p1, p2) = ln 4 - 2 ln|c1 - c2|`.
//!
//! The published constant for the second identity is
//! `-ln(c1 - c2) - ln(c2 - c1) - ln 4`; the two c-logs cannot both be real
//! and the `ln 4` carries the opposite sign. Reports carry both constants so
//! the discrepancy is visible rather than silently corrected.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Probability vector over `n` bins.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution(Vec<f64>);

impl DiscreteDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDistribution("no bins".into()));
        }
        if let Some(v) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("bin value {v} is not a probability")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("bins sum to {total}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("no bins".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        let mut p: Vec<f64> = w.iter().map(|v| v / total).collect();
        // Fold the rounding residue into the largest bin so the sum is 1 to ~1 ulp.
        let residue = 1.0 - p.iter().sum::<f64>();
        let (imax, _) = p
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        p[imax] += residue;
        Self::new(p)
    }

    /// Random distribution with Exp(1) weights; `sparsity` is the chance a
    /// bin is forced to zero (at least one bin always stays positive).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, bins: usize, sparsity: f64) -> Result<Self> {
        let keep = rng.random_range(0..bins);
        let w: Vec<f64> = (0..bins)
            .map(|i| {
                if i != keep && rng.random::<f64>() < sparsity {
                    0.0
                } else {
                    -(1.0 - rng.random::<f64>()).ln()
                }
            })
            .collect();
        Self::from_weights(&w)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Regressor values per bin.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressorTable(pub Vec<f64>);

fn same_bins(p1: &DiscreteDistribution, p2: &DiscreteDistribution) -> Result<()> {
    if p1.len() != p2.len() {
        return Err(Error::InvalidDistribution(format!(
            "bin counts differ: {} vs {}",
            p1.len(),
            p2.len()
        )));
    }
    Ok(())
}

/// `-sum p_i ln p_i` in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &DiscreteDistribution) -> f64 {
    -p.probs().iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

fn kl_to_mixture(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (2.0 * a / (a + b)).ln())
        .sum()
}

/// Jensen-Shannon divergence in nats.
pub fn jsd(p1: &DiscreteDistribution, p2: &DiscreteDistribution) -> Result<f64> {
    same_bins(p1, p2)?;
    let (a, b) = (p1.probs(), p2.probs());
    Ok(0.5 * kl_to_mixture(a, b) + 0.5 * kl_to_mixture(b, a))
}

/// `sum p_i * -ln(1 - (y - r_i))`, or with `|.|` inside the log in magnitude
/// mode. Zero-probability bins contribute nothing.
pub fn discrete_regression_loss(
    p: &DiscreteDistribution,
    r: &RegressorTable,
    y: f64,
    use_magnitude_log: bool,
) -> Result<f64> {
    if r.0.len() != p.len() {
        return Err(Error::InvalidDistribution(format!(
            "regressor table has {} bins, distribution {}",
            r.0.len(),
            p.len()
        )));
    }
    let mut total = 0.0;
    for (i, (&pi, &ri)) in p.probs().iter().zip(&r.0).enumerate() {
        if pi == 0.0 {
            continue;
        }
        let mut arg = 1.0 - (y - ri);
        if use_magnitude_log {
            arg = arg.abs();
        }
        if !(arg > 0.0) {
            return Err(Error::Domain(format!("log argument {arg} at bin {i}")));
        }
        total -= pi * arg.ln();
    }
    Ok(total)
}

/// `r_i = p_i / c + y - 1`.
pub fn optimal_regressor_single(p: &DiscreteDistribution, c: f64, y: f64) -> Result<RegressorTable> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("integration constant c = {c} must be positive")));
    }
    Ok(RegressorTable(p.probs().iter().map(|&pi| pi / c + y - 1.0).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingleTargetReport {
    /// Loss evaluated at the closed-form regressor.
    pub lhs: f64,
    /// `H(p) + ln c`.
    pub rhs: f64,
    pub abs_error: f64,
}

pub fn verify_single_target(p: &DiscreteDistribution, c: f64, y: f64) -> Result<SingleTargetReport> {
    let r = optimal_regressor_single(p, c, y)?;
    let lhs = discrete_regression_loss(p, &r, y, false)?;
    let rhs = shannon_entropy(p) + c.ln();
    Ok(SingleTargetReport {
        lhs,
        rhs,
        abs_error: (lhs - rhs).abs(),
    })
}

fn pair_constants(y1: f64, y2: f64) -> Result<(f64, f64)> {
    if y1 == y2 {
        return Err(Error::Domain("targets must differ (y1 = y2)".into()));
    }
    Ok((1.0 - y1, 1.0 - y2))
}

/// `r = -(p1 c2 + p2 c1) / (p1 + p2)` per bin, `c_k = 1 - y_k`.
pub fn optimal_regressor_pair(
    p1: &DiscreteDistribution,
    p2: &DiscreteDistribution,
    y1: f64,
    y2: f64,
) -> Result<RegressorTable> {
    same_bins(p1, p2)?;
    let (c1, c2) = pair_constants(y1, y2)?;
    p1.probs()
        .iter()
        .zip(p2.probs())
        .enumerate()
        .map(|(i, (&a, &b))| {
            if a + b > 0.0 {
                Ok(-(a * c2 + b * c1) / (a + b))
            } else {
                Err(Error::Domain(format!("bin {i} lies outside both supports")))
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(RegressorTable)
}

/// Drops bins outside the union support of both distributions.
fn restrict_to_union(p1: &DiscreteDistribution, p2: &DiscreteDistribution) -> (Vec<f64>, Vec<f64>) {
    p1.probs()
        .iter()
        .zip(p2.probs())
        .filter(|(&a, &b)| a + b > 0.0)
        .map(|(&a, &b)| (a, b))
        .unzip()
}

/// Two-set magnitude-log loss `-sum p1 ln|c1 + r| - sum p2 ln|c2 + r|`.
pub fn pair_loss(p1: &[f64], p2: &[f64], r: &[f64], c1: f64, c2: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, ((&a, &b), &ri)) in p1.iter().zip(p2).zip(r).enumerate() {
        for (w, c) in [(a, c1), (b, c2)] {
            if w == 0.0 {
                continue;
            }
            let arg = (c + ri).abs();
            if arg == 0.0 {
                return Err(Error::Domain(format!("zero log argument at bin {i}")));
            }
            total -= w * arg.ln();
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairReport {
    pub l_r_magnitude: f64,
    pub jsd_value: f64,
    /// `ln 4 - 2 ln|c1 - c2|`.
    pub rederived_constant: f64,
    /// `|L + 2 JSD - rederived_constant|`.
    pub constant_residual: f64,
    /// Published constant with logs on magnitudes: `-ln 4 - 2 ln|c1 - c2|`.
    pub published_constant: f64,
    /// `|L + 2 JSD - published_constant|`; `2 ln 4` whenever the identity holds.
    pub published_residual: f64,
}

pub fn verify_pair(
    p1: &DiscreteDistribution,
    p2: &DiscreteDistribution,
    y1: f64,
    y2: f64,
) -> Result<PairReport> {
    same_bins(p1, p2)?;
    let (c1, c2) = pair_constants(y1, y2)?;
    // Bins outside both supports carry no loss and have no defined optimum.
    let (a, b) = restrict_to_union(p1, p2);
    let r: Vec<f64> = a.iter().zip(&b).map(|(&u, &v)| -(u * c2 + v * c1) / (u + v)).collect();
    let l = pair_loss(&a, &b, &r, c1, c2)?;
    let j = jsd(p1, p2)?;
    let gap = (c1 - c2).abs().ln();
    let rederived = 4f64.ln() - 2.0 * gap;
    let published = -4f64.ln() - 2.0 * gap;
    Ok(PairReport {
        l_r_magnitude: l,
        jsd_value: j,
        rederived_constant: rederived,
        constant_residual: (l + 2.0 * j - rederived).abs(),
        published_constant: published,
        published_residual: (l + 2.0 * j - published).abs(),
    })
}

/// Per-bin argmin of the two-set magnitude-log loss over `r_grid`.
///
/// Each bin's objective `-a ln|c1 + r| - b ln|c2 + r|` has poles at `-c1`
/// and `-c2` and a single stationary minimum between them when both weights
/// are positive; outside that interval it decreases without bound. An argmin
/// on either end of the grid therefore means no finite minimizer was
/// bracketed, and is reported as [`Error::NoInteriorMinimum`].
pub fn brute_force_pair_minimum(
    p1: &DiscreteDistribution,
    p2: &DiscreteDistribution,
    y1: f64,
    y2: f64,
    r_grid: &[f64],
) -> Result<RegressorTable> {
    same_bins(p1, p2)?;
    let (c1, c2) = pair_constants(y1, y2)?;
    if r_grid.len() < 3 {
        return Err(Error::Domain("grid needs at least three points".into()));
    }
    let mut out = Vec::with_capacity(p1.len());
    for (bin, (&a, &b)) in p1.probs().iter().zip(p2.probs()).enumerate() {
        if a + b == 0.0 {
            return Err(Error::Domain(format!("bin {bin} lies outside both supports")));
        }
        let mut best = (usize::MAX, f64::INFINITY);
        for (j, &r) in r_grid.iter().enumerate() {
            // Grid points on a pole are skipped; the objective is +inf there.
            let Ok(v) = pair_loss(&[a], &[b], &[r], c1, c2) else {
                continue;
            };
            if v < best.1 {
                best = (j, v);
            }
        }
        if best.0 == 0 || best.0 + 1 >= r_grid.len() {
            return Err(Error::NoInteriorMinimum { bin });
        }
        out.push(r_grid[best.0]);
    }
    Ok(RegressorTable(out))
}

/// Evenly spaced grid strictly inside the open interval between the two
/// poles `-c1` and `-c2`.
pub fn grid_between_poles(y1: f64, y2: f64, points: usize) -> Result<Vec<f64>> {
    let (c1, c2) = pair_constants(y1, y2)?;
    let (lo, hi) = (-c1.max(c2), -c1.min(c2));
    let step = (hi - lo) / (points + 1) as f64;
    Ok((1..=points).map(|i| lo + step * i as f64).collect())
}

/// One line of the verification table.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub pass: bool,
}

impl fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "name={} lhs={:.15e} rhs={:.15e} residual={:.3e} pass={}",
            self.name, self.lhs, self.rhs, self.residual, self.pass
        )
    }
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub records: Vec<CheckRecord>,
    pub max_single_residual: f64,
    pub max_pair_residual: f64,
    /// Largest brute-force deviation from the closed form, in grid steps.
    pub max_grid_steps_off: f64,
    pub all_pass: bool,
}

/// Seeded sweep over random instances of both identities plus the grid
/// minimization cross-check.
pub fn verify_sweep<R: Rng + ?Sized>(rng: &mut R, trials: usize, tolerance: f64) -> Result<SweepSummary> {
    const GRID_POINTS: usize = 4001;
    let mut records = Vec::new();
    let (mut t1_max, mut t2_max, mut steps_max) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..trials {
        let bins = rng.random_range(2..=12);
        let p = DiscreteDistribution::random(rng, bins, 0.2)?;
        let c = rng.random_range(0.25..3.0);
        let y = rng.random_range(-1.0..1.0);
        let t1 = verify_single_target(&p, c, y)?;
        t1_max = t1_max.max(t1.abs_error);
        records.push(CheckRecord {
            name: format!("single[{trial}]"),
            lhs: t1.lhs,
            rhs: t1.rhs,
            residual: t1.abs_error,
            pass: t1.abs_error < tolerance,
        });

        let p1 = DiscreteDistribution::random(rng, bins, 0.2)?;
        let p2 = DiscreteDistribution::random(rng, bins, 0.2)?;
        let y1: f64 = rng.random_range(-1.0..1.0);
        let mut y2: f64 = rng.random_range(-1.0..1.0);
        while (y1 - y2).abs() < 0.05 {
            y2 = rng.random_range(-1.0..1.0);
        }
        let t2 = verify_pair(&p1, &p2, y1, y2)?;
        t2_max = t2_max.max(t2.constant_residual);
        records.push(CheckRecord {
            name: format!("pair[{trial}]"),
            lhs: t2.l_r_magnitude + 2.0 * t2.jsd_value,
            rhs: t2.rederived_constant,
            residual: t2.constant_residual,
            pass: t2.constant_residual < tolerance,
        });

        // Grid check only on bins where both weights are positive, i.e.
        // where the objective is strictly convex between the poles.
        let (a, b) = restrict_to_union(&p1, &p2);
        let (a, b): (Vec<f64>, Vec<f64>) = a.into_iter().zip(b).filter(|(x, y)| *x > 0.0 && *y > 0.0).unzip();
        if !a.is_empty() {
            let q1 = DiscreteDistribution::from_weights(&a)?;
            let q2 = DiscreteDistribution::from_weights(&b)?;
            let grid = grid_between_poles(y1, y2, GRID_POINTS)?;
            let step = grid[1] - grid[0];
            let closed = optimal_regressor_pair(&q1, &q2, y1, y2)?;
            let brute = brute_force_pair_minimum(&q1, &q2, y1, y2, &grid)?;
            let off = closed
                .0
                .iter()
                .zip(&brute.0)
                .map(|(x, y)| (x - y).abs() / step)
                .fold(0.0, f64::max);
            steps_max = steps_max.max(off);
            records.push(CheckRecord {
                name: format!("grid[{trial}]"),
                lhs: off,
                rhs: 1.0,
                residual: off,
                pass: off <= 1.0,
            });
        }
    }
    let all_pass = records.iter().all(|r| r.pass);
    Ok(SweepSummary {
        records,
        max_single_residual: t1_max,
        max_pair_residual: t2_max,
        max_grid_steps_off: steps_max,
        all_pass,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Domain(format!("need two equal-length series, got {} and {}", a.len(), b.len())));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Domain("constant series has no rank correlation".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Rank correlation between the optimal two-set loss and JSD over random
/// distribution pairs sharing `(y1, y2)`.
pub fn loss_jsd_rank_correlation<R: Rng + ?Sized>(
    rng: &mut R,
    instances: usize,
    bins: usize,
    y1: f64,
    y2: f64,
) -> Result<f64> {
    let mut losses = Vec::with_capacity(instances);
    let mut divs = Vec::with_capacity(instances);
    for _ in 0..instances {
        let p1 = DiscreteDistribution::random(rng, bins, 0.3)?;
        let p2 = DiscreteDistribution::random(rng, bins, 0.3)?;
        let t = verify_pair(&p1, &p2, y1, y2)?;
        losses.push(t.l_r_magnitude);
        divs.push(t.jsd_value);
    }
    spearman(&losses, &divs)
}
