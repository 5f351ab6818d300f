//! Loss functionals: the auxiliary regression loss, the modified BEGAN
//! objective with its equilibrium update, and the cBiGAN objectives.
//!
//! Every function returns batch means. Objectives stated as
//! quantities to maximize are exposed both as their value and as the
//! gradient of the negated objective, which is what the optimizers minimize.

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarganHyper {
    /// Equilibrium target `gamma`.
    pub gamma: f64,
    /// Weight of the generator's reconstruction term.
    pub adv_weight: f64,
    /// Weight of the regression term back-propagated into the generator.
    pub reg_weight: f64,
    /// Learning rate of the equilibrium variable `k`.
    pub lambda_k: f64,
    /// Floor for log arguments.
    pub eps_log: f64,
}

impl Default for VarganHyper {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            adv_weight: 0.97,
            reg_weight: 0.03,
            lambda_k: 0.001,
            eps_log: 1e-6,
        }
    }
}

impl VarganHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if !(self.lambda_k > 0.0) || !(self.eps_log > 0.0) {
            return Err(Error::InvalidConfig("lambda_k and eps_log must be positive".into()));
        }
        if !(self.adv_weight >= 0.0) || !(self.reg_weight >= 0.0) {
            return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CbiganHyper {
    /// Weight of the encoder's squared landmark penalty.
    pub theta: f64,
    pub eps_log: f64,
}

impl Default for CbiganHyper {
    fn default() -> Self {
        Self {
            theta: 0.8,
            eps_log: 1e-6,
        }
    }
}

impl CbiganHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0) || !(self.eps_log > 0.0) {
            return Err(Error::InvalidConfig("theta must be >= 0 and eps_log > 0".into()));
        }
        Ok(())
    }
}

fn same_shape(a: &Tensor, b: &Tensor, context: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(context, a.shape(), b.shape()));
    }
    Ok(())
}

/// Mean of `-ln(max(1 - (y - r), eps_log))` and its gradient w.r.t. `r`.
///
/// The gradient is `-1 / (1 - (y - r))` per component (over the element
/// count) and zero wherever the floor is active.
pub fn regression_loss(y: &Tensor, r: &Tensor, eps_log: f64) -> Result<(f64, Tensor)> {
    same_shape(y, r, "regression loss")?;
    let n = y.len() as f64;
    let mut grad = Tensor::zeros(r.shape());
    let mut total = 0.0;
    for ((g, &yv), &rv) in grad.data_mut().iter_mut().zip(y.data()).zip(r.data()) {
        let arg = 1.0 - (yv - rv);
        if arg > eps_log {
            total -= arg.ln();
            *g = -1.0 / (arg * n);
        } else {
            total -= eps_log.ln();
        }
    }
    Ok((total / n, grad))
}

/// Pixel-mean squared reconstruction error `|v - D(v)|^2` and its gradient
/// w.r.t. `v` (the gradient w.r.t. `D(v)` is its negation).
pub fn began_recon_loss(v: &Tensor, dv: &Tensor) -> Result<(f64, Tensor)> {
    same_shape(v, dv, "reconstruction loss")?;
    let n = v.len() as f64;
    let mut diff = v.clone();
    diff.add_scaled(dv, -1.0)?;
    let value = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
    diff.scale(2.0 / n);
    Ok((value, diff))
}

/// Per-sample reconstruction errors, used when real and generated images
/// share one batch.
pub fn recon_loss_per_sample(v: &Tensor, dv: &Tensor) -> Result<Vec<f64>> {
    same_shape(v, dv, "reconstruction loss")?;
    Ok((0..v.batch())
        .map(|i| {
            let (a, b) = (v.sample(i), dv.sample(i));
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
        })
        .collect())
}

/// `(L_d, L_g) = (L_x - k L_Gz, adv_weight * L_Gz + reg_weight * L_R)`.
pub fn began_losses(l_x: f64, l_gz: f64, l_r: f64, k: f64, hyper: &VarganHyper) -> (f64, f64) {
    (l_x - k * l_gz, hyper.adv_weight * l_gz + hyper.reg_weight * l_r)
}

/// `k + lambda_k (gamma L_x - L_Gz)`, clamped to `[0, 1]`.
pub fn k_update(k: f64, l_x: f64, l_gz: f64, hyper: &VarganHyper) -> f64 {
    (k + hyper.lambda_k * (hyper.gamma * l_x - l_gz)).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CbiganLosses {
    /// `log p_r + log(1 - p_I) + log(1 - p_s)`, maximized by the discriminator.
    pub l_d: f64,
    /// `log p_I`, maximized by the generator.
    pub l_g: f64,
    /// `log p_s + theta * mean((s - y)^2)`.
    pub l_e: f64,
    /// The `theta * mean((s - y)^2)` part of `l_e`, minimized by the encoder.
    pub penalty: f64,
}

fn clamped_probs(p: &Tensor, eps: f64, name: &str) -> Result<Vec<f64>> {
    p.data()
        .iter()
        .map(|&v| {
            if (0.0..=1.0).contains(&v) {
                Ok(v.clamp(eps, 1.0 - eps))
            } else {
                Err(Error::Domain(format!("{name} = {v} is not a probability")))
            }
        })
        .collect()
}

fn mean_log(p: &[f64], complement: bool) -> f64 {
    p.iter().map(|&v| if complement { (1.0 - v).ln() } else { v.ln() }).sum::<f64>() / p.len() as f64
}

pub fn cbigan_losses(
    p_r: &Tensor,
    p_i: &Tensor,
    p_s: &Tensor,
    s_minus: &Tensor,
    y: &Tensor,
    hyper: &CbiganHyper,
) -> Result<CbiganLosses> {
    same_shape(s_minus, y, "cbigan encoder penalty")?;
    let eps = hyper.eps_log;
    let (pr, pi, ps) = (
        clamped_probs(p_r, eps, "p_r")?,
        clamped_probs(p_i, eps, "p_I")?,
        clamped_probs(p_s, eps, "p_s")?,
    );
    let l_d = mean_log(&pr, false) + mean_log(&pi, true) + mean_log(&ps, true);
    let l_g = mean_log(&pi, false);
    let sq = s_minus.data().iter().zip(y.data()).map(|(s, t)| (s - t) * (s - t)).sum::<f64>() / y.len() as f64;
    let penalty = hyper.theta * sq;
    Ok(CbiganLosses {
        l_d,
        l_g,
        l_e: mean_log(&ps, false) + penalty,
        penalty,
    })
}

fn log_grad(p: &Tensor, eps: f64, complement: bool, sign: f64) -> Result<Tensor> {
    let n = p.len() as f64;
    let mut g = Tensor::zeros(p.shape());
    for (gv, &v) in g.data_mut().iter_mut().zip(p.data()) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{v} is not a probability")));
        }
        if v <= eps || v >= 1.0 - eps {
            continue;
        }
        *gv = sign * if complement { -1.0 / (1.0 - v) } else { 1.0 / v } / n;
    }
    Ok(g)
}

/// Gradients of `-L_D` w.r.t. `(p_r, p_I, p_s)`.
pub fn cbigan_discriminator_grads(p_r: &Tensor, p_i: &Tensor, p_s: &Tensor, eps: f64) -> Result<(Tensor, Tensor, Tensor)> {
    Ok((
        log_grad(p_r, eps, false, -1.0)?,
        log_grad(p_i, eps, true, -1.0)?,
        log_grad(p_s, eps, true, -1.0)?,
    ))
}

/// Gradient of `-L_G = -mean(log p_I)` w.r.t. `p_I`.
pub fn cbigan_generator_grad(p_i: &Tensor, eps: f64) -> Result<Tensor> {
    log_grad(p_i, eps, false, -1.0)
}

/// Gradients of the encoder objective `-mean(log p_s) + theta mean((s - y)^2)`
/// w.r.t. `p_s` and w.r.t. `s` (penalty part only).
pub fn cbigan_encoder_grads(p_s: &Tensor, s_minus: &Tensor, y: &Tensor, hyper: &CbiganHyper) -> Result<(Tensor, Tensor)> {
    same_shape(s_minus, y, "cbigan encoder penalty")?;
    let gp = log_grad(p_s, hyper.eps_log, false, -1.0)?;
    let mut gs = s_minus.clone();
    gs.add_scaled(y, -1.0)?;
    gs.scale(2.0 * hyper.theta / y.len() as f64);
    Ok((gp, gs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::new(vec![1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn regression_loss_examples() {
        let y = t(&[0.3, -0.2]);
        assert_eq!(regression_loss(&y, &y, 1e-6).unwrap().0, 0.0);
        let (v, _) = regression_loss(&t(&[-0.5]), &t(&[0.5]), 1e-6).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-15);
        assert!((v + 0.69315).abs() < 1e-5);
        let (v, g) = regression_loss(&t(&[1.0]), &t(&[0.0]), 1e-6).unwrap();
        assert!((v - 13.8155).abs() < 1e-4);
        assert_eq!(g.data(), &[0.0]);
    }

    #[test]
    fn regression_loss_shape_mismatch() {
        assert!(regression_loss(&t(&[0.0]), &t(&[0.0, 1.0]), 1e-6).is_err());
    }

    #[test]
    fn recon_examples() {
        let v = Tensor::full(&[2, 1, 2, 2], 1.0);
        assert_eq!(began_recon_loss(&v, &v).unwrap().0, 0.0);
        assert_eq!(began_recon_loss(&v, &Tensor::zeros(v.shape())).unwrap().0, 1.0);
        assert_eq!(began_recon_loss(&t(&[1.0, 0.0]), &t(&[0.0, 0.0])).unwrap().0, 0.5);
    }

    #[test]
    fn began_examples() {
        let h = VarganHyper::default();
        assert_eq!(began_losses(0.7, 0.4, 2.0, 0.0, &h).0, 0.7);
        let (l_d, l_g) = began_losses(1.0, 0.4, 2.0, 0.5, &h);
        assert_eq!(l_d, 0.8);
        assert!((l_g - 0.448).abs() < 1e-15);
        assert_eq!(k_update(0.3, 1.0, 0.5, &h), 0.3);
        assert!((k_update(0.0, 1.0, 0.4, &h) - 1e-4).abs() < 1e-18);
        assert_eq!(k_update(0.0, 0.1, 5.0, &h), 0.0);
        assert_eq!(k_update(1.0, 5.0, 0.0, &h), 1.0);
    }

    #[test]
    fn cbigan_examples() {
        let h = CbiganHyper::default();
        let eps = 1e-6;
        let y = t(&[0.1, 0.2]);
        let l = cbigan_losses(&t(&[1.0 - eps]), &t(&[eps]), &t(&[eps]), &y, &y, &h).unwrap();
        assert!(l.l_d.abs() < 1e-5);
        assert!(l.l_d <= 0.0);
        let l = cbigan_losses(&t(&[0.5]), &t(&[0.5]), &t(&[0.5]), &y, &y, &h).unwrap();
        assert_eq!(l.l_e, 0.5f64.ln());
        assert_eq!(l.l_d, 3.0 * 0.5f64.ln());
        let s = t(&[1.1, 1.2]);
        let l = cbigan_losses(&t(&[0.5]), &t(&[0.5]), &t(&[0.5]), &s, &y, &h).unwrap();
        assert!((l.penalty - 0.8).abs() < 1e-15);
    }

    #[test]
    fn cbigan_rejects_non_probability() {
        let h = CbiganHyper::default();
        let y = t(&[0.0]);
        assert!(cbigan_losses(&t(&[1.5]), &t(&[0.5]), &t(&[0.5]), &y, &y, &h).is_err());
        assert!(cbigan_losses(&t(&[f64::NAN]), &t(&[0.5]), &t(&[0.5]), &y, &y, &h).is_err());
    }
}
