//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 for invalid input (flags, configs, missing or mismatched
//! files), 2 when a computation fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{parse_key_values, read_targets_csv, Dataset, FaceRanges, LANDMARK_NAMES};
use crate::error::{Error, Result};
use crate::eval::{
    compare_report, evaluate_generator, grid_bytes, holdout_targets, train_oracle, Comparison, EvalOptions,
    OracleOptions,
};
use crate::nn::Tensor;
use crate::theory::verify_sweep;
use crate::train::{self, generate, Method, TrainerConfig, TrainingState};

const EVAL_TARGETS: usize = 16;

#[derive(Parser, Debug)]
#[command(name = "vargan", version, about = "Landmark-conditioned face GANs on synthetic data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic landmark-annotated face dataset.
    SynthData {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 5)]
        landmarks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disable per-pixel noise.
        #[arg(long)]
        noise_free: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a generator (vargan, began or cbigan) or an oracle regressor.
    Train {
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// `key=value` file; command-line flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint_every: Option<u64>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a trained generator for every row of a targets file.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, default_value_t = 8)]
        per_target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write `grid.pgm` with this many columns.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fidelity, diversity, entropy and separation of one checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Oracle checkpoint; trained on `--data` and saved to the output
        /// directory when absent.
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-seed verdicts between VAR+GAN and the baselines.
    Compare {
        /// Comma-separated checkpoints, one per seed or one for all.
        #[arg(long, value_delimiter = ',')]
        vargan: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        cbigan: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        began: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the optimal-regressor identities on random distributions.
    VerifyTheory {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Tile a dataset or `generate` output into one PGM image.
    Grid {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        cols: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn is_validation(e: &Error) -> bool {
    match e {
        Error::InvalidConfig(_) | Error::Checkpoint { .. } | Error::Dataset { .. } | Error::Domain(_) => true,
        Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
        _ => false,
    }
}

fn init_logging() {
    let level = match std::env::var("VARGAN_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Error,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_validation(&e) {
                1
            } else {
                2
            }
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_state(path: &Path) -> Result<TrainingState> {
    if !path.is_file() {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: "no such file".into(),
        });
    }
    TrainingState::load(path, None)
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::SynthData {
            n,
            size,
            landmarks,
            seed,
            noise_free,
            out,
        } => {
            let ranges = if noise_free {
                FaceRanges::noise_free()
            } else {
                FaceRanges::default()
            };
            let ds = Dataset::generate(n, size, landmarks, seed, &ranges)?;
            ds.write(&out)?;
            println!("records={n} digest={}", ds.digest());
            Ok(0)
        }
        Command::Train {
            method,
            data,
            steps,
            batch,
            seed,
            config,
            checkpoint_every,
            resume,
            out,
        } => {
            let file = match &config {
                Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
                None => String::new(),
            };
            let kv = parse_key_values(&file).map_err(Error::InvalidConfig)?;
            let file_method = kv.iter().rev().find(|(k, _)| k == "method").map(|(_, v)| v.parse()).transpose()?;
            let method = method.or(file_method).unwrap_or(Method::Vargan);
            let mut cfg = TrainerConfig::desk(method);
            for (k, v) in kv.iter().filter(|(k, _)| k != "method") {
                cfg.set(k, v)?;
            }
            cfg.data = data.clone();
            if let Some(s) = steps {
                cfg.steps = s;
            }
            if let Some(b) = batch {
                cfg.batch = b;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(c) = checkpoint_every {
                cfg.checkpoint_every = c;
            }
            cfg.validate()?;
            let ds = Dataset::read(&data)?;
            let resume = resume.as_deref().map(load_state).transpose()?;
            let state = train::run(cfg, &ds, &out, resume)?;
            println!("steps={} checkpoint_digest={}", state.step, state.digest());
            Ok(0)
        }
        Command::Generate {
            checkpoint,
            targets,
            per_target,
            seed,
            grid,
            out,
        } => {
            let state = load_state(&checkpoint)?;
            let targets = read_targets_csv(&targets)?;
            if per_target == 0 {
                return Err(Error::InvalidConfig("--per-target must be positive".into()));
            }
            let arch = &state.config.arch;
            if targets.shape()[1] != 2 * arch.landmarks {
                return Err(Error::InvalidConfig(format!(
                    "targets have {} columns, the checkpoint expects {}",
                    targets.shape()[1],
                    2 * arch.landmarks
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ys = Vec::new();
            for t in 0..targets.batch() {
                for _ in 0..per_target {
                    ys.extend_from_slice(targets.sample(t));
                }
            }
            let y = Tensor::new(vec![targets.batch() * per_target, 2 * arch.landmarks], ys)?;
            let x = generate(state.generator()?, arch, &y, &mut rng)?;
            create_dir(&out)?;
            write_samples(&out, &x, &y, &state, seed, per_target)?;
            if let Some(cols) = grid {
                let p = out.join("grid.pgm");
                fs::write(&p, grid_bytes(&x, cols)?).map_err(|e| Error::io(p, e))?;
            }
            println!("samples={}", x.batch());
            Ok(0)
        }
        Command::Evaluate {
            checkpoint,
            data,
            oracle,
            seed,
            out,
        } => {
            let state = load_state(&checkpoint)?;
            let ds = Dataset::read(&data)?;
            check_dataset(&state, &ds, &checkpoint)?;
            create_dir(&out)?;
            let (oracle_state, oracle_note) = obtain_oracle(oracle.as_deref(), &ds, &out)?;
            let targets = holdout_targets(&ds, OracleOptions::default().holdout_fraction, EVAL_TARGETS)?;
            let report = evaluate_generator(
                &state.config.method.to_string(),
                state.generator()?,
                &state.config.arch,
                &oracle_state.nets[0],
                &targets,
                &EvalOptions::default(),
                seed,
            )?;
            let mut text = report.to_kv();
            let _ = writeln!(text, "checkpoint={}", checkpoint.display());
            let _ = writeln!(text, "checkpoint_step={}", state.step);
            let _ = writeln!(text, "dataset_digest={}", ds.digest());
            text.push_str(&oracle_note);
            for line in state.config.to_kv().lines() {
                let _ = writeln!(text, "config.{line}");
            }
            write(&out.join("report.txt"), &text)?;
            print!("{text}");
            Ok(0)
        }
        Command::Compare {
            vargan,
            cbigan,
            began,
            data,
            oracle,
            seeds,
            out,
        } => {
            if vargan.is_empty() || cbigan.is_empty() {
                return Err(Error::InvalidConfig("--vargan and --cbigan are required".into()));
            }
            let ds = Dataset::read(&data)?;
            let load_all = |paths: &[PathBuf]| -> Result<Vec<TrainingState>> {
                paths
                    .iter()
                    .map(|p| {
                        let s = load_state(p)?;
                        check_dataset(&s, &ds, p)?;
                        Ok(s)
                    })
                    .collect()
            };
            let (v, c, b) = (load_all(&vargan)?, load_all(&cbigan)?, load_all(&began)?);
            create_dir(&out)?;
            let (oracle_state, oracle_note) = obtain_oracle(oracle.as_deref(), &ds, &out)?;
            let targets = holdout_targets(&ds, OracleOptions::default().holdout_fraction, EVAL_TARGETS)?;
            let opts = EvalOptions::default();
            let on = &oracle_state.nets[0];
            let (v, c, b): (Vec<_>, Vec<_>, Vec<_>) = (v.iter().collect(), c.iter().collect(), b.iter().collect());
            let vc = compare_report(("vargan", &v), ("cbigan", &c), on, &targets, &seeds, &opts)?;
            let mut summary = String::new();
            emit_comparison(&out, "verdicts.csv", &vc, &mut summary)?;
            if !b.is_empty() {
                let vb = compare_report(("vargan", &v), ("began", &b), on, &targets, &seeds, &opts)?;
                emit_comparison(&out, "verdicts_began.csv", &vb, &mut summary)?;
            }
            let _ = writeln!(summary, "dataset_digest={}", ds.digest());
            summary.push_str(&oracle_note);
            write(&out.join("reports.txt"), &summary)?;
            print!("{}", vc.to_csv());
            Ok(0)
        }
        Command::VerifyTheory { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = verify_sweep(&mut rng, trials, 1e-9)?;
            for r in &s.records {
                println!("{r}");
            }
            println!(
                "max_single_residual={:.3e} max_pair_residual={:.3e} max_grid_steps_off={:.3} all_pass={}",
                s.max_single_residual, s.max_pair_residual, s.max_grid_steps_off, s.all_pass
            );
            Ok(if s.all_pass { 0 } else { 2 })
        }
        Command::Grid { input, cols, out } => {
            let (size, pixels) = read_images(&input)?;
            let n = pixels.len() / (size * size);
            let x = Tensor::new(vec![n, 1, size, size], pixels.iter().map(|&p| p as f64 / 255.0).collect())?;
            fs::write(&out, grid_bytes(&x, cols)?).map_err(|e| Error::io(&out, e))?;
            Ok(0)
        }
    }
}

fn check_dataset(state: &TrainingState, ds: &Dataset, path: &Path) -> Result<()> {
    if state.dataset_digest != ds.digest() {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: format!("trained on dataset {}, not {}", state.dataset_digest, ds.digest()),
        });
    }
    Ok(())
}

/// Loads the given oracle or trains one and saves it to `out/oracle.vgck`.
fn obtain_oracle(path: Option<&Path>, ds: &Dataset, out: &Path) -> Result<(TrainingState, String)> {
    if let Some(p) = path {
        let s = load_state(p)?;
        if s.config.method != Method::Oracle {
            return Err(Error::Checkpoint {
                path: p.to_path_buf(),
                reason: format!("expected an oracle checkpoint, found {}", s.config.method),
            });
        }
        check_dataset(&s, ds, p)?;
        return Ok((s, format!("oracle={}\n", p.display())));
    }
    let mut arch = crate::arch::ArchConfig::desk();
    arch.image_size = ds.image_size;
    let report = train_oracle(ds, &arch, &OracleOptions::default())?;
    let p = out.join("oracle.vgck");
    report.state.save(&p)?;
    let note = format!(
        "oracle={}\noracle_holdout_error={:.6}\noracle_train_error={:.6}\noracle_steps={}\n",
        p.display(),
        report.holdout_error,
        report.train_error,
        report.steps
    );
    Ok((report.state, note))
}

fn emit_comparison(out: &Path, name: &str, c: &Comparison, summary: &mut String) -> Result<()> {
    write(&out.join(name), &c.to_csv())?;
    for r in c.reports_a.iter().chain(&c.reports_b) {
        summary.push_str(&r.to_kv());
        summary.push('\n');
    }
    Ok(())
}

fn write_samples(out: &Path, x: &Tensor, y: &Tensor, state: &TrainingState, seed: u64, per_target: usize) -> Result<()> {
    let size = state.config.arch.image_size;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "kind=samples");
    let _ = writeln!(manifest, "n={}", x.batch());
    let _ = writeln!(manifest, "image_size={size}");
    let _ = writeln!(manifest, "per_target={per_target}");
    let _ = writeln!(manifest, "seed={seed}");
    let _ = writeln!(manifest, "checkpoint_digest={}", state.digest());
    let _ = writeln!(manifest, "checkpoint_step={}", state.step);
    for line in state.config.to_kv().lines() {
        let _ = writeln!(manifest, "config.{line}");
    }
    write(&out.join("manifest"), &manifest)?;
    let bytes: Vec<u8> = x.data().iter().map(|&v| crate::data::to_u8(v)).collect();
    let p = out.join("images.bin");
    fs::write(&p, bytes).map_err(|e| Error::io(p, e))?;
    let mut csv = LANDMARK_NAMES.join(",");
    csv.push('\n');
    for i in 0..y.batch() {
        let row: Vec<String> = y.sample(i).iter().map(|v| format!("{v:.6}")).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write(&out.join("targets.csv"), &csv)
}

/// Image size and raw pixels of a dataset or `generate` output directory.
fn read_images(dir: &Path) -> Result<(usize, Vec<u8>)> {
    let fail = |reason: String| Error::Dataset {
        path: dir.to_path_buf(),
        reason,
    };
    let mp = dir.join("manifest");
    let manifest = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let kv = parse_key_values(&manifest).map_err(fail)?;
    let num = |k: &str| -> Result<usize> {
        kv.iter()
            .find(|(key, _)| key == k)
            .ok_or_else(|| fail(format!("manifest lacks `{k}`")))?
            .1
            .parse()
            .map_err(|_| fail(format!("manifest `{k}` is not an integer")))
    };
    let (n, size) = (num("n")?, num("image_size")?);
    let ip = dir.join("images.bin");
    let pixels = fs::read(&ip).map_err(|e| Error::io(&ip, e))?;
    if n == 0 || pixels.len() != n * size * size {
        return Err(fail(format!("images.bin holds {} bytes for {n} images of {size}x{size}", pixels.len())));
    }
    Ok((size, pixels))
}
