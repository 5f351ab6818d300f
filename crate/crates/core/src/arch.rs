//! Builders for the four network roles: decoder/generator, conv encoder
//! (BEGAN encoder, cBiGAN discriminator and encoder), the autoencoder
//! discriminator, and the landmark regressor.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, Layer, LayerKind, Net, Tensor};

/// How the landmark vector reaches the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conditioning {
    /// `[z ; y]` fed to the generator's input dense layer.
    Concat,
    /// Generator sees only `z`.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    None,
    Tanh,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub image_size: usize,
    pub image_channels: usize,
    /// Noise dimension `k` of the generator input (excludes the condition).
    pub latent_dim: usize,
    pub landmarks: usize,
    /// Spatial side of the 3D tensor produced by the decoder's dense layer.
    pub seed_size: usize,
    pub decoder_channels: usize,
    /// Channels per encoder stage; stride-2 convs sit between stages.
    pub encoder_channels: Vec<usize>,
    /// Autoencoder bottleneck width.
    pub hidden_dim: usize,
    pub regressor_channels: usize,
    pub regressor_hidden: usize,
    pub conditioning: Conditioning,
    /// Append a sigmoid to the generator so samples live in `[0, 1]`.
    pub generator_sigmoid: bool,
}

impl ArchConfig {
    /// 48x48 faces with 49 landmarks.
    pub fn full_scale() -> Self {
        Self {
            image_size: 48,
            image_channels: 1,
            latent_dim: 128,
            landmarks: 49,
            seed_size: 6,
            decoder_channels: 64,
            encoder_channels: vec![64, 128, 192, 256],
            hidden_dim: 128,
            regressor_channels: 64,
            regressor_hidden: 1024,
            conditioning: Conditioning::Concat,
            generator_sigmoid: false,
        }
    }

    /// Single-core desk scale: 32x32 grayscale, five landmarks.
    pub fn desk() -> Self {
        Self {
            image_size: 32,
            image_channels: 1,
            latent_dim: 64,
            landmarks: 5,
            seed_size: 8,
            decoder_channels: 8,
            encoder_channels: vec![8, 16, 24, 32],
            hidden_dim: 32,
            regressor_channels: 16,
            regressor_hidden: 128,
            conditioning: Conditioning::Concat,
            generator_sigmoid: true,
        }
    }

    pub fn target_dim(&self) -> usize {
        2 * self.landmarks
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [self.image_channels, self.image_size, self.image_size]
    }

    pub fn generator_input_dim(&self) -> usize {
        match self.conditioning {
            Conditioning::Concat => self.latent_dim + self.target_dim(),
            Conditioning::None => self.latent_dim,
        }
    }

    /// Number of 2x upsampling stages in the decoder.
    pub fn upsample_stages(&self) -> Result<usize> {
        let mut size = self.seed_size;
        let mut stages = 0;
        while size < self.image_size {
            size *= 2;
            stages += 1;
        }
        if size != self.image_size || self.seed_size == 0 {
            return Err(Error::InvalidConfig(format!(
                "image_size {} is not reachable by doubling seed_size {}",
                self.image_size, self.seed_size
            )));
        }
        Ok(stages)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("image_size", self.image_size),
            ("image_channels", self.image_channels),
            ("latent_dim", self.latent_dim),
            ("landmarks", self.landmarks),
            ("seed_size", self.seed_size),
            ("decoder_channels", self.decoder_channels),
            ("hidden_dim", self.hidden_dim),
            ("regressor_channels", self.regressor_channels),
            ("regressor_hidden", self.regressor_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if self.image_size % 4 != 0 {
            return Err(Error::InvalidConfig(format!(
                "image_size {} must be divisible by 4 for the regressor's two pooling stages",
                self.image_size
            )));
        }
        self.upsample_stages()?;
        if self.encoder_channels.is_empty() || self.encoder_channels.contains(&0) {
            return Err(Error::InvalidConfig("encoder_channels must be non-empty and positive".into()));
        }
        let downsample = 1usize << (self.encoder_channels.len() - 1);
        if self.image_size % downsample != 0 {
            return Err(Error::InvalidConfig(format!(
                "encoder with {} stages underflows image_size {}",
                self.encoder_channels.len(),
                self.image_size
            )));
        }
        Ok(())
    }
}

fn push_all(net: &mut Net, layers: impl IntoIterator<Item = Layer>) -> Result<()> {
    layers.into_iter().try_for_each(|l| net.push(l))
}

/// Dense to a `(channels, seed, seed)` tensor, ELU conv pairs with a 2x
/// upsample after every second conv, and a final linear conv to the image
/// channels.
pub fn build_decoder(cfg: &ArchConfig, input_dim: usize, name: &str) -> Result<Net> {
    cfg.validate()?;
    let c = cfg.decoder_channels;
    let s = cfg.seed_size;
    let stages = cfg.upsample_stages()?;
    let mut net = Net::new(name, &[input_dim]);
    push_all(
        &mut net,
        [
            Layer::dense(input_dim, c * s * s),
            Layer::new(LayerKind::Reshape(vec![c, s, s])),
        ],
    )?;
    for stage in 0..=stages {
        push_all(
            &mut net,
            [
                Layer::conv(c, c, 1),
                Layer::act(Activation::Elu),
                Layer::conv(c, c, 1),
                Layer::act(Activation::Elu),
            ],
        )?;
        if stage < stages {
            net.push(Layer::new(LayerKind::Upsample2x2))?;
        }
    }
    net.push(Layer::conv(c, cfg.image_channels, 1))?;
    Ok(net)
}

/// ELU conv stack with stride-2 downscaling on every second conv and the
/// channel schedule stepping up at each downscale, then a dense head.
pub fn build_encoder(
    cfg: &ArchConfig,
    in_channels: usize,
    out_dim: usize,
    out_activation: OutputActivation,
    name: &str,
) -> Result<Net> {
    cfg.validate()?;
    let sched = &cfg.encoder_channels;
    let mut net = Net::new(name, &[in_channels, cfg.image_size, cfg.image_size]);
    push_all(&mut net, [Layer::conv(in_channels, sched[0], 1), Layer::act(Activation::Elu)])?;
    for (i, &ch) in sched.iter().enumerate() {
        push_all(&mut net, [Layer::conv(ch, ch, 1), Layer::act(Activation::Elu)])?;
        if let Some(&next) = sched.get(i + 1) {
            push_all(&mut net, [Layer::conv(ch, next, 2), Layer::act(Activation::Elu)])?;
        }
    }
    let flat: usize = net.output_shape().iter().product();
    push_all(&mut net, [Layer::new(LayerKind::Flatten), Layer::dense(flat, out_dim)])?;
    match out_activation {
        OutputActivation::None => {}
        OutputActivation::Tanh => net.push(Layer::act(Activation::Tanh))?,
        OutputActivation::Sigmoid => net.push(Layer::act(Activation::Sigmoid))?,
    }
    Ok(net)
}

pub fn build_generator(cfg: &ArchConfig) -> Result<Net> {
    let mut net = build_decoder(cfg, cfg.generator_input_dim(), "gen")?;
    if cfg.generator_sigmoid {
        net.push(Layer::act(Activation::Sigmoid))?;
    }
    Ok(net)
}

/// Autoencoder: encoder to `hidden_dim`, then a decoder without conditioning.
pub fn build_began_discriminator(cfg: &ArchConfig) -> Result<Net> {
    let mut net = build_encoder(cfg, cfg.image_channels, cfg.hidden_dim, OutputActivation::None, "disc")?;
    net.append(build_decoder(cfg, cfg.hidden_dim, "disc")?)?;
    Ok(net)
}

/// conv-ReLU, maxpool, conv-ReLU, maxpool, dense-ReLU, dense-tanh.
pub fn build_regressor(cfg: &ArchConfig, name: &str) -> Result<Net> {
    cfg.validate()?;
    let c = cfg.regressor_channels;
    let side = cfg.image_size / 4;
    let mut net = Net::new(name, &cfg.image_shape());
    push_all(
        &mut net,
        [
            Layer::conv(cfg.image_channels, c, 1),
            Layer::act(Activation::Relu),
            Layer::new(LayerKind::MaxPool2x2),
            Layer::conv(c, c, 1),
            Layer::act(Activation::Relu),
            Layer::new(LayerKind::MaxPool2x2),
            Layer::new(LayerKind::Flatten),
            Layer::dense(c * side * side, cfg.regressor_hidden),
            Layer::act(Activation::Relu),
            Layer::dense(cfg.regressor_hidden, cfg.target_dim()),
            Layer::act(Activation::Tanh),
        ],
    )?;
    Ok(net)
}

/// cBiGAN pairing discriminator `D(y, x)` with a sigmoid probability output.
pub fn build_cbigan_discriminator(cfg: &ArchConfig) -> Result<Net> {
    build_encoder(
        cfg,
        cfg.image_channels + cfg.target_dim(),
        1,
        OutputActivation::Sigmoid,
        "cdisc",
    )
}

/// cBiGAN encoder `x -> s` with tanh-bounded landmark estimates.
pub fn build_cbigan_encoder(cfg: &ArchConfig) -> Result<Net> {
    build_encoder(cfg, cfg.image_channels, cfg.target_dim(), OutputActivation::Tanh, "enc")
}

/// Builds and initializes a net with fan-in scaled uniform weights.
pub fn initialized<R: Rng + ?Sized>(net: Result<Net>, rng: &mut R) -> Result<Net> {
    let mut net = net?;
    net.init(rng);
    Ok(net)
}

/// Appends each condition coordinate as a constant image plane:
/// `(B, C, H, W)` and `(B, T)` become `(B, C + T, H, W)`.
pub fn broadcast_condition(x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = *x.shape() else {
        return Err(Error::shape("broadcast image", &[0, 0, 0, 0], x.shape()));
    };
    if y.shape().len() != 2 || y.batch() != b {
        return Err(Error::shape("broadcast condition", &[b, 0], y.shape()));
    }
    let t = y.shape()[1];
    let plane = h * w;
    let mut out = Vec::with_capacity(b * (c + t) * plane);
    for i in 0..b {
        out.extend_from_slice(x.sample(i));
        for &v in y.sample(i) {
            out.extend(std::iter::repeat_n(v, plane));
        }
    }
    Tensor::new(vec![b, c + t, h, w], out)
}

/// Splits a gradient w.r.t. a [`broadcast_condition`] input into the image
/// part and the condition part (each plane summed to its coordinate).
pub fn split_condition_grad(grad: &Tensor, image_channels: usize) -> Result<(Tensor, Tensor)> {
    let [b, ct, h, w] = *grad.shape() else {
        return Err(Error::shape("conditioned gradient", &[0, 0, 0, 0], grad.shape()));
    };
    if ct <= image_channels {
        return Err(Error::shape("conditioned gradient channels", &[image_channels + 1], &[ct]));
    }
    let t = ct - image_channels;
    let plane = h * w;
    let mut gx = Vec::with_capacity(b * image_channels * plane);
    let mut gy = Vec::with_capacity(b * t);
    for i in 0..b {
        let s = grad.sample(i);
        gx.extend_from_slice(&s[..image_channels * plane]);
        gy.extend(s[image_channels * plane..].chunks(plane).map(|p| p.iter().sum::<f64>()));
    }
    Ok((
        Tensor::new(vec![b, image_channels, h, w], gx)?,
        Tensor::new(vec![b, t], gy)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ArchConfig {
        ArchConfig {
            image_size: 8,
            image_channels: 1,
            latent_dim: 3,
            landmarks: 2,
            seed_size: 4,
            decoder_channels: 2,
            encoder_channels: vec![2, 3],
            hidden_dim: 4,
            regressor_channels: 2,
            regressor_hidden: 5,
            conditioning: Conditioning::Concat,
            generator_sigmoid: true,
        }
    }

    #[test]
    fn decoder_upsampling_stages() {
        let cfg = ArchConfig {
            seed_size: 4,
            ..ArchConfig::desk()
        };
        let net = build_decoder(&cfg, 10, "d").unwrap();
        let ups = net.layers().iter().filter(|l| *l.kind() == LayerKind::Upsample2x2).count();
        assert_eq!(ups, 3);
        assert_eq!(net.output_shape(), &[1, 32, 32]);
    }

    #[test]
    fn decoder_ends_linear() {
        let net = build_decoder(&ArchConfig::desk(), 7, "d").unwrap();
        assert!(matches!(net.layers().last().unwrap().kind(), LayerKind::Conv2d { .. }));
    }

    #[test]
    fn unreachable_image_size() {
        let cfg = ArchConfig {
            image_size: 36,
            seed_size: 8,
            ..ArchConfig::desk()
        };
        assert!(build_decoder(&cfg, 4, "d").is_err());
        let cfg = ArchConfig {
            image_size: 30,
            seed_size: 15,
            ..ArchConfig::desk()
        };
        assert!(build_regressor(&cfg, "r").is_err());
    }

    #[test]
    fn generator_batch_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = ArchConfig::desk();
        let g = initialized(build_generator(&cfg), &mut rng).unwrap();
        let z = Tensor::zeros(&[7, cfg.generator_input_dim()]);
        assert_eq!(g.forward(&z).unwrap().shape(), &[7, 1, 32, 32]);
    }

    #[test]
    fn full_scale_builds() {
        let cfg = ArchConfig::full_scale();
        assert_eq!(cfg.latent_dim, 128);
        assert_eq!(cfg.target_dim(), 98);
        let r = build_regressor(&cfg, "r").unwrap();
        assert_eq!(r.output_shape(), &[98]);
        build_generator(&cfg).unwrap();
        build_began_discriminator(&cfg).unwrap();
    }

    #[test]
    fn regressor_layer_order() {
        let r = build_regressor(&ArchConfig::full_scale(), "r").unwrap();
        let tags: Vec<_> = r.layers().iter().map(|l| l.kind().tag()).collect();
        assert_eq!(
            tags,
            ["conv", "relu", "maxpool", "conv", "relu", "maxpool", "flatten", "dense", "relu", "dense", "tanh"]
        );
        assert!(matches!(r.layers()[0].kind(), LayerKind::Conv2d { out_channels: 64, .. }));
        assert!(matches!(r.layers()[3].kind(), LayerKind::Conv2d { out_channels: 64, .. }));
        assert!(matches!(r.layers()[7].kind(), LayerKind::Dense { outputs: 1024, .. }));
        assert_eq!(r.input_shape(), &[1, 48, 48]);
    }

    #[test]
    fn encoder_channel_schedule() {
        let cfg = ArchConfig::full_scale();
        let e = build_encoder(&cfg, 1, 128, OutputActivation::None, "e").unwrap();
        let convs: Vec<(usize, usize)> = e
            .layers()
            .iter()
            .filter_map(|l| match *l.kind() {
                LayerKind::Conv2d {
                    out_channels, stride, ..
                } => Some((out_channels, stride)),
                _ => None,
            })
            .collect();
        assert_eq!(
            convs,
            [(64, 1), (64, 1), (128, 2), (128, 1), (192, 2), (192, 1), (256, 2), (256, 1)]
        );
        // every second conv downsamples
        assert!(convs.iter().skip(2).step_by(2).all(|&(_, s)| s == 2));
    }

    #[test]
    fn began_discriminator_is_autoencoder() {
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = initialized(build_began_discriminator(&cfg), &mut rng).unwrap();
        let enc = build_encoder(&cfg, 1, cfg.hidden_dim, OutputActivation::None, "x").unwrap();
        let dec = build_decoder(&cfg, cfg.hidden_dim, "y").unwrap();
        assert_eq!(d.param_count(), enc.param_count() + dec.param_count());
        let x = Tensor::from_fn(&[2, 1, 8, 8], |i| (i as f64 * 0.1).sin());
        let out = d.forward(&x).unwrap();
        assert_eq!(out.shape(), x.shape());
        assert!(out.first_non_finite().is_none());
        let names: std::collections::HashSet<_> = d.params().map(|p| p.name.clone()).collect();
        assert_eq!(names.len(), d.params().count());
    }

    #[test]
    fn broadcast_roundtrip_gradient() {
        let x = Tensor::from_fn(&[2, 1, 2, 2], |i| i as f64);
        let y = Tensor::new(vec![2, 2], vec![0.5, -0.5, 1.0, 0.0]).unwrap();
        let xy = broadcast_condition(&x, &y).unwrap();
        assert_eq!(xy.shape(), &[2, 3, 2, 2]);
        assert_eq!(&xy.sample(1)[4..8], &[1.0; 4]);
        let g = Tensor::full(&[2, 3, 2, 2], 1.0);
        let (gx, gy) = split_condition_grad(&g, 1).unwrap();
        assert_eq!(gx.shape(), &[2, 1, 2, 2]);
        assert_eq!(gy.data(), &[4.0; 4]);
    }
}
