//! Measurements of trained generators: landmark fidelity through an
//! independently trained oracle regressor, sample diversity, a
//! Kozachenko-Leonenko entropy estimate and a histogram JSD between sample
//! sets of two targets.
//!
//! Entropy and JSD are computed in the oracle's penultimate feature space
//! (output of its hidden dense layer after ReLU); pixel space is far too
//! high-dimensional for the sample counts used here.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::arch::ArchConfig;
use crate::data::{pgm_bytes, render_with_landmarks, to_u8, Dataset};
use crate::error::{Error, Result};
use crate::nn::{Net, Tensor};
use crate::train::{generate, train_until, Method, TrainerConfig, TrainingState};

pub const FEATURE_SPACE: &str = "oracle penultimate layer (hidden dense + ReLU)";
pub const JSD_BINS: &str = "projection on the mean-difference direction, ceil(2 n^(1/3)) equal-width bins";
const CHUNK: usize = 64;

/// Mean per-landmark Euclidean distance between predicted and requested
/// coordinates, in normalized units.
pub fn landmark_error(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() || pred.shape().len() != 2 || pred.shape()[1] % 2 != 0 {
        return Err(Error::shape("landmark error", target.shape(), pred.shape()));
    }
    let (p, t) = (pred.data(), target.data());
    let pairs = p.len() / 2;
    let total: f64 = (0..pairs)
        .map(|i| ((p[2 * i] - t[2 * i]).powi(2) + (p[2 * i + 1] - t[2 * i + 1]).powi(2)).sqrt())
        .sum();
    Ok(total / pairs as f64)
}

fn forward_chunked(net: &Net, x: &Tensor, layers: Option<usize>) -> Result<Tensor> {
    let mut parts = Vec::new();
    for start in (0..x.batch()).step_by(CHUNK) {
        let chunk = x.slice_batch(start, (start + CHUNK).min(x.batch()));
        parts.push(match layers {
            Some(n) => net.forward_prefix(&chunk, n)?,
            None => net.forward(&chunk)?,
        });
    }
    Tensor::concat_batch(&parts.iter().collect::<Vec<_>>())
}

/// Oracle error on every record of `ds`.
pub fn dataset_error(oracle: &Net, ds: &Dataset) -> Result<f64> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (x, y) = ds.batch(&idx)?;
    landmark_error(&forward_chunked(oracle, &x, None)?, &y)
}

/// Penultimate-layer features of `images`, one row per sample.
pub fn oracle_features(oracle: &Net, images: &Tensor) -> Result<Vec<Vec<f64>>> {
    let depth = oracle.layers().len().saturating_sub(2);
    let f = forward_chunked(oracle, images, Some(depth))?;
    Ok((0..f.batch()).map(|i| f.sample(i).to_vec()).collect())
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub target_error: f64,
    pub max_steps: u64,
    pub eval_every: u64,
    pub holdout_fraction: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            target_error: 0.05,
            max_steps: 8000,
            eval_every: 250,
            holdout_fraction: 0.2,
            batch: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub state: TrainingState,
    pub holdout_error: f64,
    pub train_error: f64,
    pub steps: u64,
    pub train_records: usize,
    pub holdout_records: usize,
}

impl OracleReport {
    pub fn net(&self) -> &Net {
        &self.state.nets[0]
    }
}

/// Splits `ds` into train and holdout parts (holdout = the tail).
pub fn holdout_split(ds: &Dataset, fraction: f64) -> (Dataset, Dataset) {
    let n_hold = ((ds.len() as f64 * fraction).round() as usize).clamp(1, ds.len() - 1);
    let cut = ds.len() - n_hold;
    (ds.subset(0, cut), ds.subset(cut, ds.len()))
}

/// Trains a regressor on the train part of `ds`, checking the holdout every
/// `opts.eval_every` steps and stopping once it drops below
/// `opts.target_error`. Returns the final fit whether or not it got there.
pub fn fit_oracle(ds: &Dataset, arch: &ArchConfig, opts: &OracleOptions) -> Result<OracleReport> {
    if ds.len() < 1000 {
        return Err(Error::Eval(format!("oracle needs at least 1000 records, got {}", ds.len())));
    }
    let (train, hold) = holdout_split(ds, opts.holdout_fraction);
    let mut cfg = TrainerConfig::desk(Method::Oracle);
    cfg.arch = arch.clone();
    cfg.batch = opts.batch;
    cfg.seed = opts.seed;
    cfg.steps = opts.max_steps;
    let mut state = TrainingState::new(cfg, ds.digest())?;
    let mut holdout_error = f64::INFINITY;
    while state.step < opts.max_steps && holdout_error >= opts.target_error {
        let until = (state.step + opts.eval_every.max(1)).min(opts.max_steps);
        train_until(&mut state, &train, until, |_, _| Ok(()))?;
        holdout_error = dataset_error(&state.nets[0], &hold)?;
        log::info!("oracle step {}: holdout error {holdout_error:.4}", state.step);
    }
    Ok(OracleReport {
        steps: state.step,
        train_error: dataset_error(&state.nets[0], &train)?,
        state,
        holdout_error,
        train_records: train.len(),
        holdout_records: hold.len(),
    })
}

/// [`fit_oracle`], failing when the budget runs out above the target.
pub fn train_oracle(ds: &Dataset, arch: &ArchConfig, opts: &OracleOptions) -> Result<OracleReport> {
    let r = fit_oracle(ds, arch, opts)?;
    if r.holdout_error >= opts.target_error {
        return Err(Error::Eval(format!(
            "oracle holdout error {:.4} did not reach {} within {} steps",
            r.holdout_error, opts.target_error, opts.max_steps
        )));
    }
    Ok(r)
}

fn repeat_rows(t: &Tensor, row: usize, n: usize) -> Result<Tensor> {
    let r = t.sample(row);
    Tensor::new(vec![n, r.len()], r.iter().copied().cycle().take(n * r.len()).collect())
}

/// Mean landmark error of `gen`'s samples as read by `oracle`, over
/// `n_per_target` samples for every row of `targets`.
pub fn landmark_fidelity(
    gen: &Net,
    arch: &ArchConfig,
    oracle: &Net,
    targets: &Tensor,
    n_per_target: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for t in 0..targets.batch() {
        let y = repeat_rows(targets, t, n_per_target)?;
        let x = generate(gen, arch, &y, &mut rng)?;
        total += landmark_error(&forward_chunked(oracle, &x, None)?, &y)?;
    }
    Ok(total / targets.batch() as f64)
}

/// Fidelity of an ideal generator that renders the requested landmarks
/// with freshly sampled appearance.
pub fn renderer_fidelity(ds: &Dataset, oracle: &Net, targets: &Tensor, n_per_target: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let s = ds.image_size;
    for t in 0..targets.batch() {
        let y = repeat_rows(targets, t, n_per_target)?;
        let mut pixels = Vec::with_capacity(n_per_target * s * s);
        for _ in 0..n_per_target {
            pixels.extend(render_with_landmarks(targets.sample(t), &mut rng, &ds.ranges, s)?);
        }
        let x = Tensor::new(vec![n_per_target, 1, s, s], pixels)?;
        total += landmark_error(&forward_chunked(oracle, &x, None)?, &y)?;
    }
    Ok(total / targets.batch() as f64)
}

/// Expected landmark error between `targets` and dataset targets drawn at
/// random: the fidelity of a generator that ignores its condition.
pub fn random_pair_error(ds: &Dataset, targets: &Tensor, draws: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = ds.target_dim();
    let mut pred = Vec::with_capacity(targets.batch() * draws * dim);
    for _ in 0..targets.batch() * draws {
        pred.extend_from_slice(ds.target(rng.random_range(0..ds.len())));
    }
    let mut want = Vec::with_capacity(pred.len());
    for t in 0..targets.batch() {
        for _ in 0..draws {
            want.extend_from_slice(targets.sample(t));
        }
    }
    let shape = vec![targets.batch() * draws, dim];
    landmark_error(&Tensor::new(shape.clone(), pred)?, &Tensor::new(shape, want)?)
}

/// Mean over pairs of `|a - b|^2 / pixels`.
pub fn diversity_score(samples: &Tensor) -> Result<f64> {
    let n = samples.batch();
    if n < 2 {
        return Err(Error::Eval(format!("diversity needs at least 2 samples, got {n}")));
    }
    let pix = samples.sample_len() as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = samples
                .sample(i)
                .iter()
                .zip(samples.sample(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += d / pix;
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// Kozachenko-Leonenko differential entropy estimate in nats:
/// `psi(n) - psi(k) + ln V_d + d/n * sum ln eps_i`, where `eps_i` is the
/// distance to the k-th neighbour and `V_d` the unit-ball volume.
pub fn knn_entropy(points: &[Vec<f64>], k: usize) -> Result<f64> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(Error::Eval(format!("knn entropy needs n > k >= 1, got n = {n}, k = {k}")));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::Eval("points must share a positive dimension".into()));
    }
    let mut sum_log = 0.0;
    let mut jittered = 0usize;
    let mut nearest = vec![f64::INFINITY; k];
    for (i, p) in points.iter().enumerate() {
        nearest.fill(f64::INFINITY);
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let dist2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2 < nearest[k - 1] {
                let mut pos = k - 1;
                while pos > 0 && nearest[pos - 1] > dist2 {
                    nearest[pos] = nearest[pos - 1];
                    pos -= 1;
                }
                nearest[pos] = dist2;
            }
        }
        let mut eps = nearest[k - 1].sqrt();
        if eps == 0.0 {
            jittered += 1;
            eps = 1e-12;
        }
        sum_log += eps.ln();
    }
    if jittered > 0 {
        log::warn!("knn entropy: {jittered} points had a duplicate k-th neighbour; distance floored at 1e-12");
    }
    let df = d as f64;
    let ln_vd = df / 2.0 * std::f64::consts::PI.ln() - ln_gamma(df / 2.0 + 1.0);
    Ok(digamma(n as f64) - digamma(k as f64) + ln_vd + df / n as f64 * sum_log)
}

fn mean_of(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    let mut m = vec![0.0; d];
    for p in points {
        for (a, b) in m.iter_mut().zip(p) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|v| *v /= points.len() as f64);
    m
}

fn histogram(values: &[f64], lo: f64, width: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    h.iter_mut().for_each(|c| *c /= values.len() as f64);
    h
}

fn discrete_jsd(p: &[f64], q: &[f64]) -> f64 {
    let term = |a: f64, b: f64| if a > 0.0 { a * (2.0 * a / (a + b)).ln() } else { 0.0 };
    p.iter().zip(q).map(|(&a, &b)| 0.5 * term(a, b) + 0.5 * term(b, a)).sum()
}

/// Histogram JSD (nats) between two point sets after projecting both onto
/// the direction joining their means (the coordinate of largest pooled
/// variance when the means coincide).
pub fn sample_set_jsd(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Eval("sample set is empty".into()));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != d) {
        return Err(Error::Eval("sample sets differ in feature dimension".into()));
    }
    let (ma, mb) = (mean_of(a), mean_of(b));
    let mut dir: Vec<f64> = ma.iter().zip(&mb).map(|(x, y)| x - y).collect();
    if dir.iter().all(|&v| v == 0.0) {
        let all: Vec<Vec<f64>> = a.iter().chain(b).cloned().collect();
        let m = mean_of(&all);
        let var: Vec<f64> = (0..d).map(|c| all.iter().map(|p| (p[c] - m[c]).powi(2)).sum()).collect();
        let best = (0..d).fold(0, |acc, c| if var[c] > var[acc] { c } else { acc });
        dir = vec![0.0; d];
        dir[best] = 1.0;
    }
    let project = |s: &[Vec<f64>]| -> Vec<f64> { s.iter().map(|p| p.iter().zip(&dir).map(|(x, w)| x * w).sum()).collect() };
    let (pa, pb) = (project(a), project(b));
    let lo = pa.iter().chain(&pb).cloned().fold(f64::INFINITY, f64::min);
    let hi = pa.iter().chain(&pb).cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok(0.0);
    }
    let n = a.len().max(b.len()) as f64;
    let bins = (2.0 * n.cbrt()).ceil() as usize;
    let width = (hi - lo) / bins as f64;
    Ok(discrete_jsd(&histogram(&pa, lo, width, bins), &histogram(&pb, lo, width, bins)))
}

/// Tiles `samples` (`[n, 1, s, s]`, values in `[0, 1]`) row-major into a
/// P5 image with 1-pixel white separators.
pub fn grid_bytes(samples: &Tensor, cols: usize) -> Result<Vec<u8>> {
    let [n, 1, h, w] = *samples.shape() else {
        return Err(Error::shape("grid samples", &[0, 1, 0, 0], samples.shape()));
    };
    if cols == 0 {
        return Err(Error::Eval("grid needs at least one column".into()));
    }
    let cols = cols.min(n);
    let rows = n.div_ceil(cols);
    let (gw, gh) = (cols * w + cols - 1, rows * h + rows - 1);
    let mut px = vec![255u8; gw * gh];
    for i in 0..n {
        let (r, c) = (i / cols, i % cols);
        let (oy, ox) = (r * (h + 1), c * (w + 1));
        for y in 0..h {
            for x in 0..w {
                px[(oy + y) * gw + ox + x] = to_u8(samples.sample(i)[y * w + x]);
            }
        }
    }
    Ok(pgm_bytes(gw, gh, &px))
}

pub fn emit_grid(samples: &Tensor, cols: usize, path: &Path) -> Result<()> {
    fs::write(path, grid_bytes(samples, cols)?).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub label: String,
    pub seed: u64,
    pub fidelity: f64,
    pub diversity: f64,
    pub entropy: f64,
    pub separation: f64,
    pub targets: usize,
    pub samples_per_target: usize,
    pub knn_k: usize,
}

impl EvalReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "label={}", self.label);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "fidelity={:.6}", self.fidelity);
        let _ = writeln!(s, "diversity={:.6}", self.diversity);
        let _ = writeln!(s, "entropy={:.6}", self.entropy);
        let _ = writeln!(s, "separation={:.6}", self.separation);
        let _ = writeln!(s, "targets={}", self.targets);
        let _ = writeln!(s, "samples_per_target={}", self.samples_per_target);
        let _ = writeln!(s, "knn_k={}", self.knn_k);
        let _ = writeln!(s, "feature_space={FEATURE_SPACE}");
        let _ = writeln!(s, "jsd_bins={JSD_BINS}");
        s
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub samples_per_target: usize,
    pub knn_k: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            samples_per_target: 64,
            knn_k: 3,
        }
    }
}

/// All four metrics for one generator and evaluation seed. Diversity and
/// entropy are averaged over targets; separation over consecutive target
/// pairs `(0, 1), (2, 3), ...`.
pub fn evaluate_generator(
    label: &str,
    gen: &Net,
    arch: &ArchConfig,
    oracle: &Net,
    targets: &Tensor,
    opts: &EvalOptions,
    seed: u64,
) -> Result<EvalReport> {
    if targets.batch() < 2 {
        return Err(Error::Eval("evaluation needs at least two targets".into()));
    }
    let n = opts.samples_per_target;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fid, mut div, mut ent) = (0.0, 0.0, 0.0);
    let mut feats = Vec::with_capacity(targets.batch());
    for t in 0..targets.batch() {
        let y = repeat_rows(targets, t, n)?;
        let x = generate(gen, arch, &y, &mut rng)?;
        fid += landmark_error(&forward_chunked(oracle, &x, None)?, &y)?;
        div += diversity_score(&x)?;
        let f = oracle_features(oracle, &x)?;
        ent += knn_entropy(&f, opts.knn_k)?;
        feats.push(f);
    }
    let pairs: Vec<f64> = feats
        .chunks_exact(2)
        .map(|p| sample_set_jsd(&p[0], &p[1]))
        .collect::<Result<_>>()?;
    let t = targets.batch() as f64;
    Ok(EvalReport {
        label: label.to_string(),
        seed,
        fidelity: fid / t,
        diversity: div / t,
        entropy: ent / t,
        separation: pairs.iter().sum::<f64>() / pairs.len() as f64,
        targets: targets.batch(),
        samples_per_target: n,
        knn_k: opts.knn_k,
    })
}

/// Evaluation targets: `count` records spread evenly over the holdout part.
pub fn holdout_targets(ds: &Dataset, fraction: f64, count: usize) -> Result<Tensor> {
    let (_, hold) = holdout_split(ds, fraction);
    let count = count.min(hold.len());
    let idx: Vec<usize> = (0..count).map(|i| i * hold.len() / count).collect();
    Ok(hold.batch(&idx)?.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    A,
    B,
    Tie,
}

impl Winner {
    fn as_str(self) -> &'static str {
        match self {
            Winner::A => "a",
            Winner::B => "b",
            Winner::Tie => "tie",
        }
    }
}

/// Metric names with whether a lower value is the better outcome.
pub const METRICS: [(&str, bool); 4] = [
    ("fidelity", true),
    ("diversity", false),
    ("entropy", true),
    ("separation", false),
];

fn metric(r: &EvalReport, name: &str) -> f64 {
    match name {
        "fidelity" => r.fidelity,
        "diversity" => r.diversity,
        "entropy" => r.entropy,
        _ => r.separation,
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub metric: &'static str,
    pub seed: u64,
    pub a: f64,
    pub b: f64,
    pub winner: Winner,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub reports_a: Vec<EvalReport>,
    pub reports_b: Vec<EvalReport>,
    pub verdicts: Vec<Verdict>,
}

impl Comparison {
    /// Majority outcome for `metric` across seeds.
    pub fn majority(&self, metric: &str) -> Winner {
        let v: Vec<&Verdict> = self.verdicts.iter().filter(|v| v.metric == metric).collect();
        let a = v.iter().filter(|v| v.winner == Winner::A).count();
        let b = v.iter().filter(|v| v.winner == Winner::B).count();
        if 2 * a > v.len() {
            Winner::A
        } else if 2 * b > v.len() {
            Winner::B
        } else {
            Winner::Tie
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("metric,seed,{},{},winner\n", self.label_a, self.label_b);
        for v in &self.verdicts {
            let _ = writeln!(s, "{},{},{:.6},{:.6},{}", v.metric, v.seed, v.a, v.b, v.winner.as_str());
        }
        for (m, _) in METRICS {
            let _ = writeln!(s, "{m},majority,,,{}", self.majority(m).as_str());
        }
        s
    }
}

fn judge(a: f64, b: f64, lower_is_better: bool) -> Winner {
    let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
    if (a - b).abs() <= tol {
        Winner::Tie
    } else if (a < b) == lower_is_better {
        Winner::A
    } else {
        Winner::B
    }
}

/// Evaluates two families of checkpoints over `seeds`. Each side holds one
/// state per seed, or a single state reused for every seed.
pub fn compare_report(
    (label_a, a): (&str, &[&TrainingState]),
    (label_b, b): (&str, &[&TrainingState]),
    oracle: &Net,
    targets: &Tensor,
    seeds: &[u64],
    opts: &EvalOptions,
) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::Eval("no evaluation seeds".into()));
    }
    for (label, side) in [(label_a, a), (label_b, b)] {
        if side.len() != 1 && side.len() != seeds.len() {
            return Err(Error::Eval(format!("{label}: {} checkpoints for {} seeds", side.len(), seeds.len())));
        }
    }
    let digest = &a[0].dataset_digest;
    if a.iter().chain(b).any(|s| &s.dataset_digest != digest) {
        return Err(Error::Eval("checkpoints were trained on different datasets".into()));
    }
    let mut out = Comparison {
        label_a: label_a.into(),
        label_b: label_b.into(),
        reports_a: Vec::new(),
        reports_b: Vec::new(),
        verdicts: Vec::new(),
    };
    for (i, &seed) in seeds.iter().enumerate() {
        let sa = a[if a.len() == 1 { 0 } else { i }];
        let sb = b[if b.len() == 1 { 0 } else { i }];
        let ra = evaluate_generator(label_a, sa.generator()?, &sa.config.arch, oracle, targets, opts, seed)?;
        let rb = evaluate_generator(label_b, sb.generator()?, &sb.config.arch, oracle, targets, opts, seed)?;
        for (m, lower) in METRICS {
            let (va, vb) = (metric(&ra, m), metric(&rb, m));
            out.verdicts.push(Verdict {
                metric: m,
                seed,
                a: va,
                b: vb,
                winner: judge(va, vb, lower),
            });
        }
        out.reports_a.push(ra);
        out.reports_b.push(rb);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diversity_examples() {
        let same = Tensor::full(&[4, 1, 2, 2], 0.3);
        assert_eq!(diversity_score(&same).unwrap(), 0.0);
        let mut two = Tensor::zeros(&[2, 1, 2, 2]);
        two.sample_mut(1).fill(1.0);
        assert_eq!(diversity_score(&two).unwrap(), 1.0);
        assert!(diversity_score(&Tensor::zeros(&[1, 1, 2, 2])).is_err());
    }

    #[test]
    fn landmark_error_example() {
        let p = Tensor::new(vec![1, 4], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let t = Tensor::new(vec![1, 4], vec![0.3, 0.4, 1.0, 1.0]).unwrap();
        assert!((landmark_error(&p, &t).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn jsd_identical_and_disjoint() {
        let a: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0, 1.0]).collect();
        assert_eq!(sample_set_jsd(&a, &a).unwrap(), 0.0);
        let b: Vec<Vec<f64>> = a.iter().map(|p| vec![p[0] + 5.0, 1.0]).collect();
        assert!((sample_set_jsd(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(sample_set_jsd(&a, &[]).is_err());
    }

    #[test]
    fn grid_layout() {
        let one = Tensor::full(&[1, 1, 2, 3], 1.0);
        assert_eq!(grid_bytes(&one, 4).unwrap(), pgm_bytes(3, 2, &[255; 6]));
        let six = Tensor::zeros(&[6, 1, 4, 4]);
        let g = grid_bytes(&six, 3).unwrap();
        assert!(g.starts_with(b"P5\n14 9\n255\n"));
        assert_eq!(grid_bytes(&six, 3).unwrap(), g);
    }

    #[test]
    fn knn_rejects_small_sets() {
        assert!(knn_entropy(&[vec![0.0], vec![1.0]], 3).is_err());
        assert!(knn_entropy(&[vec![0.0], vec![1.0]], 0).is_err());
    }

    #[test]
    fn judge_directions() {
        assert_eq!(judge(1.0, 2.0, true), Winner::A);
        assert_eq!(judge(1.0, 2.0, false), Winner::B);
        assert_eq!(judge(1.0, 1.0, false), Winner::Tie);
    }
}
