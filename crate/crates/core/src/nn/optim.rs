use super::{Net, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rule {
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
    /// Look-ahead Nesterov momentum: `v <- mu v - lr g`, then
    /// `theta <- theta + mu v - lr g`, where the stored parameters are the
    /// look-ahead point at which the next gradient is taken.
    Nesterov { lr: f64, momentum: f64 },
}

impl Rule {
    /// ADAM with the generator/discriminator settings used throughout.
    pub fn adam_default() -> Self {
        Rule::Adam {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Nesterov momentum with the regressor settings.
    pub fn nesterov_default() -> Self {
        Rule::Nesterov { lr: 0.01, momentum: 0.9 }
    }
}

/// Per-parameter optimizer memory.
///
/// `first` holds the ADAM first moment or the Nesterov velocity; `second` is
/// the ADAM second moment and is empty for Nesterov.
#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub first: Tensor,
    pub second: Option<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    pub rule: Rule,
    pub t: u64,
    pub slots: Vec<Slot>,
}

impl Optimizer {
    pub fn new(rule: Rule, net: &Net) -> Self {
        let slots = net
            .params()
            .map(|p| Slot {
                first: Tensor::zeros(p.value.shape()),
                second: matches!(rule, Rule::Adam { .. }).then(|| Tensor::zeros(p.value.shape())),
            })
            .collect();
        Self { rule, t: 0, slots }
    }

    /// Applies one update using the gradients accumulated in `net`.
    ///
    /// Nothing is modified if any gradient is non-finite or a slot does not
    /// match its parameter.
    pub fn step(&mut self, net: &mut Net) -> Result<()> {
        let count = net.params().count();
        if count != self.slots.len() {
            return Err(Error::InvalidConfig(format!(
                "optimizer has {} slots for {count} parameters of {}",
                self.slots.len(),
                net.name()
            )));
        }
        for (p, slot) in net.params().zip(&self.slots) {
            if slot.first.shape() != p.value.shape() {
                return Err(Error::shape(format!("optimizer slot for {}", p.name), p.value.shape(), slot.first.shape()));
            }
            if let Some((index, value)) = p.grad.first_non_finite() {
                return Err(Error::NonFiniteGradient {
                    param: p.name.clone(),
                    index,
                    value,
                });
            }
        }
        self.t += 1;
        match self.rule {
            Rule::Adam { lr, beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powf(self.t as f64);
                let c2 = 1.0 - beta2.powf(self.t as f64);
                for (p, slot) in net.params_mut().zip(&mut self.slots) {
                    let m = slot.first.data_mut();
                    let v = slot.second.as_mut().expect("adam slot has a second moment").data_mut();
                    for (((theta, &g), m), v) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(m).zip(v) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *theta -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            Rule::Nesterov { lr, momentum } => {
                for (p, slot) in net.params_mut().zip(&mut self.slots) {
                    for ((theta, &g), vel) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(slot.first.data_mut()) {
                        *vel = momentum * *vel - lr * g;
                        *theta += momentum * *vel - lr * g;
                    }
                }
            }
        }
        Ok(())
    }
}
