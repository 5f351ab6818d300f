#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vargan::arch::{
    broadcast_condition, build_began_discriminator, build_cbigan_discriminator, build_cbigan_encoder, build_generator,
    build_regressor, initialized, split_condition_grad, ArchConfig, Conditioning,
};
use vargan::data::{sample_latent, FaceRanges, Dataset};
use vargan::losses::{
    began_recon_loss, cbigan_discriminator_grads, cbigan_encoder_grads, cbigan_generator_grad, cbigan_losses,
    regression_loss, CbiganHyper, VarganHyper,
};
use vargan::nn::{
    gradient_check, relative_error, squared_loss, Activation, GradCheckOptions, Layer, LayerKind, Net, Tensor,
};
use vargan::train::{generator_grads, generator_input};

pub const GRAD_TOL: f64 = 1e-6;
const H: f64 = 1e-5;
const FLOOR: f64 = 1e-4;

#[derive(Debug)]
pub struct Check {
    pub name: String,
    pub max_rel_error: f64,
}

pub fn tiny_arch() -> ArchConfig {
    ArchConfig {
        image_size: 8,
        image_channels: 1,
        latent_dim: 4,
        landmarks: 5,
        seed_size: 4,
        decoder_channels: 3,
        encoder_channels: vec![3, 4],
        hidden_dim: 6,
        regressor_channels: 3,
        regressor_hidden: 8,
        ..ArchConfig::desk()
    }
}

/// 8x8 records: rendered at 32 px and box-downsampled by 4.
pub fn tiny_dataset(n: usize, seed: u64) -> Dataset {
    let ds = Dataset::generate(n, 32, 5, seed, &FaceRanges::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ds.write(dir.path()).unwrap();
    let mut manifest = std::fs::read_to_string(dir.path().join("manifest")).unwrap();
    manifest = manifest.replace("image_size=32", "image_size=8");
    std::fs::write(dir.path().join("manifest"), manifest).unwrap();
    let mut small = Vec::with_capacity(n * 64);
    for i in 0..ds.len() {
        let img = ds.image_u8(i);
        for r in 0..8 {
            for c in 0..8 {
                let mut s = 0u32;
                for dr in 0..4 {
                    for dc in 0..4 {
                        s += img[(4 * r + dr) * 32 + 4 * c + dc] as u32;
                    }
                }
                small.push((s as f64 / 16.0).round() as u8);
            }
        }
    }
    std::fs::write(dir.path().join("images.bin"), small).unwrap();
    Dataset::read(dir.path()).unwrap()
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Largest relative error between `analytic` and central differences of
/// `f` at `x`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + H;
        let plus = f(&probe);
        probe[i] = x[i] - H;
        let minus = f(&probe);
        probe[i] = x[i];
        worst = worst.max(relative_error(analytic[i], (plus - minus) / (2.0 * H), FLOOR));
    }
    worst
}

fn net_check(name: &str, input: &[usize], layers: Vec<Layer>, seed: u64) -> Check {
    let mut net = Net::new(name, input);
    for l in layers {
        net.push(l).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    net.init(&mut rng);
    let mut shape = vec![3];
    shape.extend_from_slice(input);
    let x = random(&mut rng, &shape, -1.5, 1.5);
    let mut out_shape = vec![3];
    out_shape.extend_from_slice(net.output_shape());
    let target = random(&mut rng, &out_shape, -1.0, 1.0);
    let opts = GradCheckOptions {
        samples_per_tensor: 64,
        seed,
        ..Default::default()
    };
    let r = gradient_check(&mut net, squared_loss(&target), &x, opts).unwrap();
    Check {
        name: format!("layer {name}"),
        max_rel_error: r.max_rel_error,
    }
}

/// One small net per layer kind, each checked on parameters and input.
pub fn layer_checks() -> Vec<Check> {
    let act = |a| vec![Layer::conv(2, 2, 1), Layer::act(a)];
    vec![
        net_check("dense", &[5], vec![Layer::dense(5, 4)], 1),
        net_check("conv_stride1", &[2, 6, 6], vec![Layer::conv(2, 3, 1)], 2),
        net_check("conv_stride2", &[2, 6, 6], vec![Layer::conv(2, 3, 2)], 3),
        net_check("maxpool", &[2, 6, 6], vec![Layer::conv(2, 2, 1), Layer::new(LayerKind::MaxPool2x2)], 4),
        net_check("upsample", &[2, 3, 3], vec![Layer::conv(2, 2, 1), Layer::new(LayerKind::Upsample2x2)], 5),
        net_check("elu", &[2, 4, 4], act(Activation::Elu), 6),
        net_check("relu", &[2, 4, 4], act(Activation::Relu), 7),
        net_check("tanh", &[2, 4, 4], act(Activation::Tanh), 8),
        net_check("sigmoid", &[2, 4, 4], act(Activation::Sigmoid), 9),
        net_check(
            "flatten_reshape",
            &[2, 3, 3],
            vec![
                Layer::new(LayerKind::Flatten),
                Layer::dense(18, 8),
                Layer::new(LayerKind::Reshape(vec![2, 2, 2])),
                Layer::conv(2, 1, 1),
            ],
            10,
        ),
    ]
}

fn tensor_like(t: &Tensor, v: &[f64]) -> Tensor {
    Tensor::new(t.shape().to_vec(), v.to_vec()).unwrap()
}

/// Loss functions against finite differences in their direct arguments.
pub fn loss_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut out = Vec::new();
    let y = random(&mut rng, &[4, 10], -0.7, 0.7);
    let r = random(&mut rng, &[4, 10], -0.9, 0.9);
    let (_, g) = regression_loss(&y, &r, 1e-6).unwrap();
    out.push(Check {
        name: "regression loss".into(),
        max_rel_error: finite_difference(|v| regression_loss(&y, &tensor_like(&r, v), 1e-6).unwrap().0, r.data(), g.data()),
    });

    let v = random(&mut rng, &[3, 1, 4, 4], 0.0, 1.0);
    let dv = random(&mut rng, &[3, 1, 4, 4], 0.0, 1.0);
    let (_, g) = began_recon_loss(&v, &dv).unwrap();
    let mut neg = g.clone();
    neg.scale(-1.0);
    let e_v = finite_difference(|p| began_recon_loss(&tensor_like(&v, p), &dv).unwrap().0, v.data(), g.data());
    let e_dv = finite_difference(|p| began_recon_loss(&v, &tensor_like(&dv, p)).unwrap().0, dv.data(), neg.data());
    out.push(Check {
        name: "reconstruction loss".into(),
        max_rel_error: e_v.max(e_dv),
    });

    let h = CbiganHyper { theta: 0.8, eps_log: 1e-8 };
    let p = |rng: &mut ChaCha8Rng| random(rng, &[5, 1], 0.05, 0.95);
    let (pr, pi, ps) = (p(&mut rng), p(&mut rng), p(&mut rng));
    let s = random(&mut rng, &[5, 10], -0.8, 0.8);
    let yy = random(&mut rng, &[5, 10], -0.8, 0.8);
    let losses = |pr: &Tensor, pi: &Tensor, ps: &Tensor, s: &Tensor| cbigan_losses(pr, pi, ps, s, &yy, &h).unwrap();
    let (gr, gi, gs) = cbigan_discriminator_grads(&pr, &pi, &ps, h.eps_log).unwrap();
    let e_d = [
        finite_difference(|v| -losses(&tensor_like(&pr, v), &pi, &ps, &s).l_d, pr.data(), gr.data()),
        finite_difference(|v| -losses(&pr, &tensor_like(&pi, v), &ps, &s).l_d, pi.data(), gi.data()),
        finite_difference(|v| -losses(&pr, &pi, &tensor_like(&ps, v), &s).l_d, ps.data(), gs.data()),
    ];
    let g_gen = cbigan_generator_grad(&pi, h.eps_log).unwrap();
    let e_g = finite_difference(|v| -losses(&pr, &tensor_like(&pi, v), &ps, &s).l_g, pi.data(), g_gen.data());
    let (gp, gpen) = cbigan_encoder_grads(&ps, &s, &yy, &h).unwrap();
    let enc = |ps: &Tensor, s: &Tensor| {
        let l = losses(&pr, &pi, ps, s);
        -(l.l_e - l.penalty) + l.penalty
    };
    let e_e = finite_difference(|v| enc(&tensor_like(&ps, v), &s), ps.data(), gp.data())
        .max(finite_difference(|v| enc(&ps, &tensor_like(&s, v)), s.data(), gpen.data()));
    out.push(Check {
        name: "cbigan discriminator loss".into(),
        max_rel_error: e_d.into_iter().fold(0.0, f64::max),
    });
    out.push(Check {
        name: "cbigan generator loss".into(),
        max_rel_error: e_g,
    });
    out.push(Check {
        name: "cbigan encoder loss".into(),
        max_rel_error: e_e,
    });
    out
}

/// Relative error of `analytic` parameter gradients of `net` against
/// central differences of `loss(net)` over sampled entries.
fn param_check(net: &mut Net, analytic: &[Tensor], loss: impl Fn(&Net) -> f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let count = net.params().count();
    for pi in 0..count {
        let n = analytic[pi].len();
        for _ in 0..12.min(n) {
            let i = rng.random_range(0..n);
            let orig = net.params().nth(pi).unwrap().value.data()[i];
            let set = |net: &mut Net, v: f64| net.params_mut().nth(pi).unwrap().value.data_mut()[i] = v;
            set(net, orig + H);
            let plus = loss(net);
            set(net, orig - H);
            let minus = loss(net);
            set(net, orig);
            worst = worst.max(relative_error(analytic[pi].data()[i], (plus - minus) / (2.0 * H), FLOOR));
        }
    }
    worst
}

fn grads(net: &Net) -> Vec<Tensor> {
    net.params().map(|p| p.grad.clone()).collect()
}

pub struct Tiny {
    pub arch: ArchConfig,
    pub g: Net,
    pub d: Net,
    pub r: Net,
    pub x: Tensor,
    pub y: Tensor,
    pub z: Tensor,
}

pub fn tiny_vargan(seed: u64) -> Tiny {
    let arch = tiny_arch();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = tiny_dataset(4, seed);
    let (x, y) = ds.batch(&[0, 1, 2, 3]).unwrap();
    Tiny {
        g: initialized(build_generator(&arch), &mut rng).unwrap(),
        d: initialized(build_began_discriminator(&arch), &mut rng).unwrap(),
        r: initialized(build_regressor(&arch, "reg"), &mut rng).unwrap(),
        z: sample_latent(&mut rng, arch.latent_dim, 4).unwrap(),
        arch,
        x,
        y,
    }
}

/// Generator gradient through the discriminator and the regressor, the
/// discriminator objective `L(x) - k L(G(z))` and the mixed regressor
/// objective, each against finite differences in network parameters.
pub fn vargan_network_checks() -> Vec<Check> {
    let mut t = tiny_vargan(31);
    let hyper = VarganHyper {
        reg_weight: 0.7,
        ..VarganHyper::default()
    };
    let gin = generator_input(&t.arch, &t.z, &t.y).unwrap();
    let fake = t.g.forward_train(&gin).unwrap();
    generator_grads(&mut t.g, &mut t.d, Some(&mut t.r), &fake, &t.y, &hyper).unwrap();
    let analytic = grads(&t.g);
    let (d, r, y) = (t.d.clone(), t.r.clone(), t.y.clone());
    let loss = |g: &Net| {
        let f = g.forward(&gin).unwrap();
        let (l_gz, _) = began_recon_loss(&f, &d.forward(&f).unwrap()).unwrap();
        let (l_r, _) = regression_loss(&y, &r.forward(&f).unwrap(), hyper.eps_log).unwrap();
        hyper.adv_weight * l_gz + hyper.reg_weight * l_r
    };
    let e_g = param_check(&mut t.g, &analytic, loss, 1);

    let k = 0.37;
    let b = t.x.batch();
    let input = Tensor::concat_batch(&[&t.x, &fake]).unwrap();
    let (x, f) = (t.x.clone(), fake.clone());
    let d_loss = move |out: &Tensor| {
        let (lx, gx) = began_recon_loss(&x, &out.slice_batch(0, b))?;
        let (lz, gz) = began_recon_loss(&f, &out.slice_batch(b, 2 * b))?;
        let mut a = gx;
        a.scale(-1.0);
        let mut c = gz;
        c.scale(k);
        Ok((lx - k * lz, Tensor::concat_batch(&[&a, &c])?))
    };
    let opts = GradCheckOptions {
        check_input: false,
        ..Default::default()
    };
    let e_d = gradient_check(&mut t.d, d_loss, &input, opts).unwrap().max_rel_error;

    let mix = 0.5;
    let y = t.y.clone();
    let r_loss = move |out: &Tensor| {
        let (l1, mut g1) = regression_loss(&y, &out.slice_batch(0, b), 1e-6)?;
        let (l2, mut g2) = regression_loss(&y, &out.slice_batch(b, 2 * b), 1e-6)?;
        g1.scale(mix);
        g2.scale(1.0 - mix);
        Ok((mix * l1 + (1.0 - mix) * l2, Tensor::concat_batch(&[&g1, &g2])?))
    };
    let e_r = gradient_check(&mut t.r, r_loss, &input, opts).unwrap().max_rel_error;
    vec![
        Check {
            name: "vargan generator through D and R".into(),
            max_rel_error: e_g,
        },
        Check {
            name: "began discriminator objective".into(),
            max_rel_error: e_d,
        },
        Check {
            name: "regressor objective".into(),
            max_rel_error: e_r,
        },
    ]
}

/// cBiGAN generator and encoder gradients through the joint discriminator.
pub fn cbigan_network_checks() -> Vec<Check> {
    let arch = ArchConfig {
        conditioning: Conditioning::Concat,
        ..tiny_arch()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut g = initialized(build_generator(&arch), &mut rng).unwrap();
    let d = initialized(build_cbigan_discriminator(&arch), &mut rng).unwrap();
    let mut e = initialized(build_cbigan_encoder(&arch), &mut rng).unwrap();
    let ds = tiny_dataset(3, 41);
    let (x, y) = ds.batch(&[0, 1, 2]).unwrap();
    let z = sample_latent(&mut rng, arch.latent_dim, 3).unwrap();
    let h = CbiganHyper { theta: 0.8, eps_log: 1e-8 };
    let ch = arch.image_channels;
    let gin = generator_input(&arch, &z, &y).unwrap();

    let mut dg = d.clone();
    let fake = g.forward_train(&gin).unwrap();
    let p_i = dg.forward_train(&broadcast_condition(&fake, &y).unwrap()).unwrap();
    let through = dg.backward(&cbigan_generator_grad(&p_i, h.eps_log).unwrap()).unwrap();
    let (gx, _) = split_condition_grad(&through, ch).unwrap();
    g.backward(&gx).unwrap();
    let analytic = grads(&g);
    let g_loss = |g: &Net| {
        let p = d.forward(&broadcast_condition(&g.forward(&gin).unwrap(), &y).unwrap()).unwrap();
        p.data().iter().map(|v| -v.ln()).sum::<f64>() / p.len() as f64
    };
    let e_g = param_check(&mut g, &analytic, g_loss, 2);

    let mut de = d.clone();
    let s = e.forward_train(&x).unwrap();
    let p_s = de.forward_train(&broadcast_condition(&x, &s).unwrap()).unwrap();
    let (gp, gpen) = cbigan_encoder_grads(&p_s, &s, &y, &h).unwrap();
    let through = de.backward(&gp).unwrap();
    let (_, mut gs) = split_condition_grad(&through, ch).unwrap();
    gs.add_scaled(&gpen, 1.0).unwrap();
    e.backward(&gs).unwrap();
    let analytic = grads(&e);
    let e_loss = |e: &Net| {
        let s = e.forward(&x).unwrap();
        let p = d.forward(&broadcast_condition(&x, &s).unwrap()).unwrap();
        let pen = s.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
        -p.data().iter().map(|v| v.ln()).sum::<f64>() / p.len() as f64 + h.theta * pen
    };
    let e_e = param_check(&mut e, &analytic, e_loss, 3);
    vec![
        Check {
            name: "cbigan generator through D".into(),
            max_rel_error: e_g,
        },
        Check {
            name: "cbigan encoder through D".into(),
            max_rel_error: e_e,
        },
    ]
}

pub fn all_gradient_checks() -> Vec<Check> {
    let mut v = layer_checks();
    v.extend(loss_checks());
    v.extend(vargan_network_checks());
    v.extend(cbigan_network_checks());
    v
}
