//! Central-difference verification of analytic network gradients.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Net, Tensor};
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub tolerance: f64,
    /// Finite-difference half step.
    pub step: f64,
    /// Denominator floor of the relative error, so entries with vanishing
    /// gradient are compared in absolute terms.
    pub scale_floor: f64,
    /// Entries sampled per parameter tensor (and from the input).
    pub samples_per_tensor: usize,
    pub check_input: bool,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            step: 1e-5,
            scale_floor: 1e-4,
            samples_per_tensor: 12,
            check_input: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Entry with the largest error, as `name[index]`.
    pub worst: String,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares back-propagated gradients of `loss_fn(net(x))` with central
/// differences over a seeded subsample of parameter (and input) entries.
///
/// `loss_fn` maps the net output to the scalar loss and its gradient with
/// respect to that output.
pub fn gradient_check<F>(net: &mut Net, loss_fn: F, x: &Tensor, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&Tensor) -> Result<(f64, Tensor)>,
{
    net.zero_grad();
    let out = net.forward_train(x)?;
    let (_, upstream) = loss_fn(&out)?;
    let input_grad = net.backward(&upstream)?;
    let analytic: Vec<Tensor> = net.params().map(|p| p.grad.clone()).collect();
    net.zero_grad();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let h = opts.step;
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    let mut record = |err: f64, label: String| {
        checked += 1;
        if err > worst.0 || worst.1.is_empty() {
            worst = (err, label);
        }
    };

    let eval = |net: &Net, x: &Tensor| -> Result<f64> { Ok(loss_fn(&net.forward(x)?)?.0) };

    let names: Vec<String> = net.params().map(|p| p.name.clone()).collect();
    for (pi, grad) in analytic.iter().enumerate() {
        let n = grad.len();
        let picks = index::sample(&mut rng, n, opts.samples_per_tensor.min(n));
        for i in picks.iter() {
            let original = net.params().nth(pi).expect("param index").value.data()[i];
            let set = |net: &mut Net, v: f64| {
                net.params_mut().nth(pi).expect("param index").value.data_mut()[i] = v;
            };
            set(net, original + h);
            let plus = eval(net, x)?;
            set(net, original - h);
            let minus = eval(net, x)?;
            set(net, original);
            let numeric = (plus - minus) / (2.0 * h);
            record(
                relative_error(grad.data()[i], numeric, opts.scale_floor),
                format!("{}[{i}]", names[pi]),
            );
        }
    }

    if opts.check_input {
        let n = x.len();
        let picks = index::sample(&mut rng, n, opts.samples_per_tensor.min(n));
        let mut probe = x.clone();
        for i in picks.iter() {
            let original = probe.data()[i];
            probe.data_mut()[i] = original + h;
            let plus = eval(net, &probe)?;
            probe.data_mut()[i] = original - h;
            let minus = eval(net, &probe)?;
            probe.data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * h);
            record(
                relative_error(input_grad.data()[i], numeric, opts.scale_floor),
                format!("input[{i}]"),
            );
        }
    }

    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst: worst.1,
        checked,
        tolerance: opts.tolerance,
        passed: worst.0 < opts.tolerance,
    })
}

/// Half the squared L2 norm of the output against a fixed target; a smooth
/// loss for exercising a net in isolation.
pub fn squared_loss(target: &Tensor) -> impl Fn(&Tensor) -> Result<(f64, Tensor)> + '_ {
    move |out: &Tensor| {
        let mut grad = out.clone();
        grad.add_scaled(target, -1.0)?;
        let loss = 0.5 * grad.data().iter().map(|v| v * v).sum::<f64>();
        Ok((loss, grad))
    }
}
