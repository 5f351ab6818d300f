use std::time::Instant;

use rand::Rng;

use super::config::Method;
use super::state::{TelemetryRow, TrainingState};
use crate::arch::{broadcast_condition, split_condition_grad, ArchConfig, Conditioning};
use crate::data::{make_condition_input, sample_latent, Dataset};
use crate::error::{Error, Result};
use crate::losses::{
    began_recon_loss, cbigan_discriminator_grads, cbigan_encoder_grads, cbigan_generator_grad, cbigan_losses,
    k_update, regression_loss, CbiganHyper, VarganHyper,
};
use crate::nn::{Net, Optimizer, Tensor};

#[derive(Clone, Debug)]
pub struct Batch {
    pub x: Tensor,
    pub y: Tensor,
}

/// Draws `batch` record indices uniformly with replacement.
pub fn sample_batch<R: Rng + ?Sized>(rng: &mut R, ds: &Dataset, batch: usize) -> Result<Batch> {
    let idx: Vec<usize> = (0..batch).map(|_| rng.random_range(0..ds.len())).collect();
    let (x, y) = ds.batch(&idx)?;
    Ok(Batch { x, y })
}

/// Generator input for latent `z` and condition `y` under `arch`.
pub fn generator_input(arch: &ArchConfig, z: &Tensor, y: &Tensor) -> Result<Tensor> {
    match arch.conditioning {
        Conditioning::Concat => make_condition_input(z, y),
        Conditioning::None => Ok(z.clone()),
    }
}

/// Inference-mode samples `G(z|y)` with fresh latents from `rng`.
pub fn generate<R: Rng + ?Sized>(gen: &Net, arch: &ArchConfig, y: &Tensor, rng: &mut R) -> Result<Tensor> {
    let z = sample_latent(rng, arch.latent_dim, y.batch())?;
    gen.forward(&generator_input(arch, &z, y)?)
}

/// Splits `[2b, ...]` into its two halves.
fn halves(t: &Tensor) -> (Tensor, Tensor) {
    let b = t.batch() / 2;
    (t.slice_batch(0, b), t.slice_batch(b, 2 * b))
}

/// One discriminator update on `L_d = L(x) - k L(fake)`; returns
/// `(L_x, L_Gz)` measured before the update.
pub fn discriminator_update(d: &mut Net, opt: &mut Optimizer, x: &Tensor, fake: &Tensor, k: f64) -> Result<(f64, f64)> {
    d.zero_grad();
    let input = Tensor::concat_batch(&[x, fake])?;
    let out = d.forward_train(&input)?;
    let (dx, dfake) = halves(&out);
    let (l_x, gx) = began_recon_loss(x, &dx)?;
    let (l_gz, gz) = began_recon_loss(fake, &dfake)?;
    // dL/dD(v) = -dL/dv for the squared reconstruction error.
    let mut g_real = gx;
    g_real.scale(-1.0);
    let mut g_fake = gz;
    g_fake.scale(k);
    d.backward(&Tensor::concat_batch(&[&g_real, &g_fake])?)?;
    opt.step(d)?;
    d.zero_grad();
    Ok((l_x, l_gz))
}

/// One regressor update on `mix L_R(x, y) + (1 - mix) L_R(fake, y)`;
/// returns the mixed loss before the update.
pub fn regressor_update(
    r: &mut Net,
    opt: &mut Optimizer,
    x: &Tensor,
    fake: &Tensor,
    y: &Tensor,
    mix: f64,
    eps_log: f64,
) -> Result<f64> {
    r.zero_grad();
    let out = r.forward_train(&Tensor::concat_batch(&[x, fake])?)?;
    let (rx, rfake) = halves(&out);
    let (l_real, mut g_real) = regression_loss(y, &rx, eps_log)?;
    let (l_fake, mut g_fake) = regression_loss(y, &rfake, eps_log)?;
    g_real.scale(mix);
    g_fake.scale(1.0 - mix);
    r.backward(&Tensor::concat_batch(&[&g_real, &g_fake])?)?;
    opt.step(r)?;
    r.zero_grad();
    Ok(mix * l_real + (1.0 - mix) * l_fake)
}

/// Accumulates `d L_g / d theta_G` into `g`, whose last `forward_train`
/// produced `fake`. The discriminator and regressor are evaluated but left
/// with zero gradients. Returns `(L_Gz, L_R)`.
pub fn generator_grads(
    g: &mut Net,
    d: &mut Net,
    r: Option<&mut Net>,
    fake: &Tensor,
    y: &Tensor,
    hyper: &VarganHyper,
) -> Result<(f64, f64)> {
    g.zero_grad();
    d.zero_grad();
    let dfake = d.forward_train(fake)?;
    let (l_gz, gv) = began_recon_loss(fake, &dfake)?;
    let mut neg = gv.clone();
    neg.scale(-1.0);
    let mut grad = d.backward(&neg)?;
    grad.add_scaled(&gv, 1.0)?;
    grad.scale(hyper.adv_weight);
    d.zero_grad();
    let mut l_r = 0.0;
    if let Some(r) = r {
        r.zero_grad();
        let rfake = r.forward_train(fake)?;
        let (loss, gr) = regression_loss(y, &rfake, hyper.eps_log)?;
        l_r = loss;
        let through = r.backward(&gr)?;
        grad.add_scaled(&through, hyper.reg_weight)?;
        r.zero_grad();
    }
    g.backward(&grad)?;
    Ok((l_gz, l_r))
}

fn split3<T>(v: &mut [T]) -> (&mut T, &mut T, &mut T) {
    let [a, b, c] = v else {
        panic!("expected three entries");
    };
    (a, b, c)
}

/// VAR+GAN (or, without a regressor, unconditional BEGAN) iteration:
/// D, then R, then G, then `k`.
pub fn vargan_step(state: &mut TrainingState, batch: &Batch) -> Result<Vec<f64>> {
    let cfg = state.config.clone();
    let h = cfg.vargan;
    let z = sample_latent(&mut state.rng, cfg.arch.latent_dim, batch.x.batch())?;
    let gin = generator_input(&cfg.arch, &z, &batch.y)?;
    let k = state.k;
    let has_r = cfg.method == Method::Vargan;
    let (nets, opts) = (&mut state.nets, &mut state.optimizers);
    let (g, rest) = nets.split_first_mut().expect("generator");
    let fake = g.forward_train(&gin)?;
    let (l_x, l_gz) = discriminator_update(&mut rest[0], &mut opts[1], &batch.x, &fake, k)?;
    if has_r {
        regressor_update(&mut rest[1], &mut opts[2], &batch.x, &fake, &batch.y, cfg.real_mix, h.eps_log)?;
    }
    let (d, r) = match rest {
        [d] => (d, None),
        [d, r] => (d, Some(r)),
        _ => unreachable!("vargan state holds two or three networks"),
    };
    let (l_gz_g, l_r) = generator_grads(g, d, r, &fake, &batch.y, &h)?;
    opts[0].step(g)?;
    g.zero_grad();
    state.k = k_update(k, l_x, l_gz, &h);
    let l_d = l_x - k * l_gz;
    let l_g = h.adv_weight * l_gz_g + if has_r { h.reg_weight * l_r } else { 0.0 };
    Ok(if has_r {
        vec![l_d, l_g, l_r, l_x, l_gz, state.k]
    } else {
        vec![l_d, l_g, l_x, l_gz, state.k]
    })
}

/// cBiGAN iteration: D, then G, then E.
pub fn cbigan_step(state: &mut TrainingState, batch: &Batch) -> Result<Vec<f64>> {
    let cfg = state.config.clone();
    let h: CbiganHyper = cfg.cbigan;
    let ch = cfg.arch.image_channels;
    let z = sample_latent(&mut state.rng, cfg.arch.latent_dim, batch.x.batch())?;
    let gin = make_condition_input(&z, &batch.y)?;
    let (g, d, e) = split3(&mut state.nets);
    let (og, od, oe) = split3(&mut state.optimizers);
    let (x, y) = (&batch.x, &batch.y);
    let b = x.batch();

    let fake = g.forward_train(&gin)?;
    let s = e.forward_train(x)?;
    d.zero_grad();
    let pairs = Tensor::concat_batch(&[
        &broadcast_condition(x, y)?,
        &broadcast_condition(&fake, y)?,
        &broadcast_condition(x, &s)?,
    ])?;
    let p = d.forward_train(&pairs)?;
    let (p_r, p_i, p_s) = (p.slice_batch(0, b), p.slice_batch(b, 2 * b), p.slice_batch(2 * b, 3 * b));
    let losses = cbigan_losses(&p_r, &p_i, &p_s, &s, y, &h)?;
    let (gr, gi, gs) = cbigan_discriminator_grads(&p_r, &p_i, &p_s, h.eps_log)?;
    d.backward(&Tensor::concat_batch(&[&gr, &gi, &gs])?)?;
    od.step(d)?;
    d.zero_grad();

    g.zero_grad();
    let p_i = d.forward_train(&broadcast_condition(&fake, y)?)?;
    let through = d.backward(&cbigan_generator_grad(&p_i, h.eps_log)?)?;
    let (gx, _) = split_condition_grad(&through, ch)?;
    g.backward(&gx)?;
    og.step(g)?;
    g.zero_grad();
    d.zero_grad();

    e.zero_grad();
    let p_s = d.forward_train(&broadcast_condition(x, &s)?)?;
    let (gp, g_pen) = cbigan_encoder_grads(&p_s, &s, y, &h)?;
    let through = d.backward(&gp)?;
    let (_, mut gs_adv) = split_condition_grad(&through, ch)?;
    gs_adv.add_scaled(&g_pen, 1.0)?;
    e.backward(&gs_adv)?;
    oe.step(e)?;
    e.zero_grad();
    d.zero_grad();

    Ok(vec![losses.l_d, losses.l_g, losses.l_e, losses.penalty])
}

/// Mean squared landmark error and its gradient.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("mse", target.shape(), pred.shape()));
    }
    let n = pred.len() as f64;
    let mut diff = pred.clone();
    diff.add_scaled(target, -1.0)?;
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
    diff.scale(2.0 / n);
    Ok((loss, diff))
}

/// Supervised regression step for the evaluation oracle.
pub fn oracle_step(state: &mut TrainingState, batch: &Batch) -> Result<Vec<f64>> {
    let net = &mut state.nets[0];
    net.zero_grad();
    let out = net.forward_train(&batch.x)?;
    let (loss, grad) = mse(&out, &batch.y)?;
    net.backward(&grad)?;
    state.optimizers[0].step(net)?;
    net.zero_grad();
    Ok(vec![loss])
}

/// Samples a batch, runs the configured stepper and records telemetry.
pub fn step(state: &mut TrainingState, ds: &Dataset) -> Result<TelemetryRow> {
    let start = Instant::now();
    let batch = sample_batch(&mut state.rng, ds, state.config.batch)?;
    let values = match state.config.method {
        Method::Vargan | Method::Began => vargan_step(state, &batch)?,
        Method::Cbigan => cbigan_step(state, &batch)?,
        Method::Oracle => oracle_step(state, &batch)?,
    };
    state.step += 1;
    let row = TelemetryRow {
        step: state.step,
        values,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    state.last = Some(row.clone());
    if row.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss {
            step: state.step,
            detail: format!("{} / {}", TelemetryRow::csv_header(state.config.method), row.csv_line()),
        });
    }
    Ok(row)
}
