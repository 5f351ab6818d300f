use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::{Method, TrainerConfig};
use crate::arch::{
    build_began_discriminator, build_cbigan_discriminator, build_cbigan_encoder, build_generator, build_regressor,
    initialized,
};
use crate::error::{Error, Result};
use crate::nn::{Net, Optimizer, Rule, Slot, Tensor};

pub const MAGIC: &[u8; 4] = b"VGCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const END: &[u8; 4] = b"END!";

/// Loss columns of the telemetry log, per method.
pub fn telemetry_columns(method: Method) -> &'static [&'static str] {
    match method {
        Method::Vargan => &["l_d", "l_g", "l_r", "l_x", "l_gz", "k_t"],
        Method::Began => &["l_d", "l_g", "l_x", "l_gz", "k_t"],
        Method::Cbigan => &["l_d", "l_g", "l_e", "penalty"],
        Method::Oracle => &["mse"],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TelemetryRow {
    /// Step count after the update (1-based).
    pub step: u64,
    /// Values in [`telemetry_columns`] order.
    pub values: Vec<f64>,
    pub wall_ms: f64,
}

impl TelemetryRow {
    pub fn csv_header(method: Method) -> String {
        format!("step,{},wall_ms", telemetry_columns(method).join(","))
    }

    pub fn csv_line(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| format!("{v:?}")).collect();
        format!("{},{},{:.3}", self.step, vals.join(","), self.wall_ms)
    }
}

/// Everything needed to continue training bit-identically.
#[derive(Clone, Debug)]
pub struct TrainingState {
    pub config: TrainerConfig,
    pub dataset_digest: String,
    pub step: u64,
    pub k: f64,
    pub rng: ChaCha8Rng,
    pub nets: Vec<Net>,
    pub optimizers: Vec<Optimizer>,
    pub last: Option<TelemetryRow>,
}

impl TrainingState {
    /// Fresh networks initialized from the config seed.
    pub fn new(config: TrainerConfig, dataset_digest: impl Into<String>) -> Result<Self> {
        config.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(config.seed);
        init.set_stream(1);
        let a = &config.arch;
        let nets = match config.method {
            Method::Vargan => vec![
                initialized(build_generator(a), &mut init)?,
                initialized(build_began_discriminator(a), &mut init)?,
                initialized(build_regressor(a, "reg"), &mut init)?,
            ],
            Method::Began => vec![
                initialized(build_generator(a), &mut init)?,
                initialized(build_began_discriminator(a), &mut init)?,
            ],
            Method::Cbigan => vec![
                initialized(build_generator(a), &mut init)?,
                initialized(build_cbigan_discriminator(a), &mut init)?,
                initialized(build_cbigan_encoder(a), &mut init)?,
            ],
            Method::Oracle => vec![initialized(build_regressor(a, "oracle"), &mut init)?],
        };
        let rules = match config.method {
            Method::Oracle => vec![config.opt_r],
            _ => vec![config.opt_g, config.opt_d, config.opt_r],
        };
        let optimizers = nets.iter().zip(rules).map(|(n, r)| Optimizer::new(r, n)).collect();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            dataset_digest: dataset_digest.into(),
            step: 0,
            k: 0.0,
            nets,
            optimizers,
            last: None,
        })
    }

    pub fn net(&self, name: &str) -> Option<&Net> {
        self.nets.iter().find(|n| n.name() == name)
    }

    pub fn generator(&self) -> Result<&Net> {
        self.net("gen")
            .ok_or_else(|| Error::InvalidConfig(format!("{} state has no generator", self.config.method)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.serialize(true)
    }

    fn serialize(&self, with_wall_time: bool) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.str(&self.config.digest());
        w.str(&self.config.to_kv());
        w.str(&self.dataset_digest);
        w.u64(self.step);
        w.f64(self.k);
        w.bytes(&self.rng.get_seed());
        w.u64(self.rng.get_stream());
        w.bytes(&self.rng.get_word_pos().to_le_bytes());
        w.u32(self.nets.len() as u32);
        for net in &self.nets {
            w.str(net.name());
            w.u32(net.params().count() as u32);
            for p in net.params() {
                w.str(&p.name);
                w.tensor(&p.value);
            }
        }
        w.u32(self.optimizers.len() as u32);
        for opt in &self.optimizers {
            match opt.rule {
                Rule::Adam { lr, beta1, beta2, eps } => {
                    w.u32(0);
                    for v in [lr, beta1, beta2, eps] {
                        w.f64(v);
                    }
                }
                Rule::Nesterov { lr, momentum } => {
                    w.u32(1);
                    w.f64(lr);
                    w.f64(momentum);
                }
            }
            w.u64(opt.t);
            w.u32(opt.slots.len() as u32);
            for slot in &opt.slots {
                w.tensor(&slot.first);
                match &slot.second {
                    Some(t) => {
                        w.u32(1);
                        w.tensor(t);
                    }
                    None => w.u32(0),
                }
            }
        }
        match &self.last {
            Some(row) => {
                w.u32(1);
                w.u64(row.step);
                w.u32(row.values.len() as u32);
                for &v in &row.values {
                    w.f64(v);
                }
                w.f64(if with_wall_time { row.wall_ms } else { 0.0 });
            }
            None => w.u32(0),
        }
        w.bytes(END);
        let sum = Sha256::digest(&w.0);
        w.bytes(&sum);
        w.0
    }

    /// Parses a checkpoint; with `expected`, also requires its model digest.
    pub fn from_bytes(bytes: &[u8], expected: Option<&TrainerConfig>) -> std::result::Result<Self, String> {
        if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
            return Err("bad magic bytes; not a checkpoint".into());
        }
        if bytes.len() < 8 + 32 {
            return Err("truncated checkpoint".into());
        }
        let mut r = Reader { buf: bytes, pos: 4 };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err("checksum mismatch; file is truncated or corrupted".into());
        }
        let digest = r.str()?;
        let text = r.str()?;
        let config = TrainerConfig::from_kv(&text, Method::Vargan).map_err(|e| format!("embedded config: {e}"))?;
        if config.digest() != digest {
            return Err("embedded config does not match its digest".into());
        }
        if let Some(exp) = expected {
            if exp.digest() != digest {
                return Err(format!(
                    "config digest mismatch: checkpoint has {digest}, expected {}",
                    exp.digest()
                ));
            }
        }
        let dataset_digest = r.str()?;
        let mut state = TrainingState::new(config, dataset_digest).map_err(|e| e.to_string())?;
        state.step = r.u64()?;
        state.k = r.f64()?;
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        state.rng = ChaCha8Rng::from_seed(seed);
        state.rng.set_stream(stream);
        state.rng.set_word_pos(word_pos);

        let n_nets = r.u32()? as usize;
        if n_nets != state.nets.len() {
            return Err(format!("{n_nets} networks stored, method needs {}", state.nets.len()));
        }
        for net in &mut state.nets {
            let name = r.str()?;
            if name != net.name() {
                return Err(format!("network `{name}` stored where `{}` was expected", net.name()));
            }
            let count = r.u32()? as usize;
            if count != net.params().count() {
                return Err(format!("network `{name}`: {count} parameters stored"));
            }
            for p in net.params_mut() {
                let pname = r.str()?;
                let t = r.tensor()?;
                if pname != p.name || t.shape() != p.value.shape() {
                    return Err(format!(
                        "parameter `{pname}` {:?} does not match `{}` {:?}",
                        t.shape(),
                        p.name,
                        p.value.shape()
                    ));
                }
                p.value = t;
            }
        }
        let n_opts = r.u32()? as usize;
        if n_opts != state.optimizers.len() {
            return Err(format!("{n_opts} optimizers stored"));
        }
        for opt in &mut state.optimizers {
            opt.rule = match r.u32()? {
                0 => Rule::Adam {
                    lr: r.f64()?,
                    beta1: r.f64()?,
                    beta2: r.f64()?,
                    eps: r.f64()?,
                },
                1 => Rule::Nesterov {
                    lr: r.f64()?,
                    momentum: r.f64()?,
                },
                tag => return Err(format!("unknown optimizer tag {tag}")),
            };
            opt.t = r.u64()?;
            let n = r.u32()? as usize;
            if n != opt.slots.len() {
                return Err(format!("optimizer has {n} slots stored, expected {}", opt.slots.len()));
            }
            let mut slots = Vec::with_capacity(n);
            for old in &opt.slots {
                let first = r.tensor()?;
                let second = match r.u32()? {
                    0 => None,
                    _ => Some(r.tensor()?),
                };
                if first.shape() != old.first.shape() {
                    return Err("optimizer slot shape mismatch".into());
                }
                slots.push(Slot { first, second });
            }
            opt.slots = slots;
        }
        state.last = match r.u32()? {
            0 => None,
            _ => {
                let step = r.u64()?;
                let n = r.u32()? as usize;
                let values = (0..n).map(|_| r.f64()).collect::<std::result::Result<_, _>>()?;
                Some(TelemetryRow {
                    step,
                    values,
                    wall_ms: r.f64()?,
                })
            }
        };
        if r.take(4)? != END {
            return Err("missing end marker".into());
        }
        if r.pos != body.len() {
            return Err("trailing bytes after end marker".into());
        }
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, expected: Option<&TrainerConfig>) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, expected).map_err(|reason| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        })
    }

    /// Hex SHA-256 of the serialized state with the wall-clock time of the
    /// last telemetry row zeroed.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.serialize(false)))
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    fn tensor(&mut self, t: &Tensor) {
        self.u32(t.shape().len() as u32);
        for &d in t.shape() {
            self.u64(d as u64);
        }
        for &v in t.data() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(format!("truncated at byte {}", self.pos));
        };
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> std::result::Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "string is not UTF-8".to_string())
    }

    fn tensor(&mut self) -> std::result::Result<Tensor, String> {
        let ndim = self.u32()? as usize;
        if ndim > 8 {
            return Err(format!("implausible tensor rank {ndim}"));
        }
        let shape = (0..ndim).map(|_| self.u64().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
        let len = shape.iter().product::<usize>();
        let raw = self.take(len.checked_mul(8).ok_or("tensor too large")?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(shape, data).map_err(|e| e.to_string())
    }
}
