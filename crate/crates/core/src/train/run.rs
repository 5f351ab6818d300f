use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use super::config::TrainerConfig;
use super::state::{TelemetryRow, TrainingState};
use super::step::step;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Steps `state` until `until`, handing each telemetry row to `on_row`.
pub fn train_until(
    state: &mut TrainingState,
    ds: &Dataset,
    until: u64,
    mut on_row: impl FnMut(&TrainingState, &TelemetryRow) -> Result<()>,
) -> Result<()> {
    while state.step < until {
        let row = step(state, ds)?;
        on_row(state, &row)?;
    }
    Ok(())
}

/// Trains to `config.steps` inside `out`, writing `config.txt`,
/// `telemetry.csv`, periodic `checkpoint-<step>.vgck` files and
/// `final.vgck`. A resumed state appends to the existing telemetry.
pub fn run(config: TrainerConfig, ds: &Dataset, out: &Path, resume: Option<TrainingState>) -> Result<TrainingState> {
    config.validate()?;
    let digest = ds.digest();
    let mut state = match resume {
        Some(mut s) => {
            if s.config.digest() != config.digest() {
                return Err(Error::InvalidConfig("resumed checkpoint was trained with a different config".into()));
            }
            if s.dataset_digest != digest {
                return Err(Error::InvalidConfig(format!(
                    "resumed checkpoint was trained on dataset {}, not {digest}",
                    s.dataset_digest
                )));
            }
            s.config = config.clone();
            s
        }
        None => TrainingState::new(config.clone(), digest.clone())?,
    };
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cfg_path = out.join("config.txt");
    fs::write(&cfg_path, format!("{}dataset_digest={digest}\n", config.to_kv())).map_err(|e| Error::io(&cfg_path, e))?;

    let tel_path = out.join("telemetry.csv");
    let fresh = state.step == 0 || !tel_path.exists();
    let mut tel = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(&tel_path)
        .map_err(|e| Error::io(&tel_path, e))?;
    if fresh {
        writeln!(tel, "{}", TelemetryRow::csv_header(config.method)).map_err(|e| Error::io(&tel_path, e))?;
    }
    let every = config.checkpoint_every;
    let total = config.steps;
    let result = train_until(&mut state, ds, total, |s, row| {
        writeln!(tel, "{}", row.csv_line()).map_err(|e| Error::io(&tel_path, e))?;
        if every > 0 && row.step % every == 0 && row.step < total {
            s.save(&out.join(format!("checkpoint-{:06}.vgck", row.step)))?;
        }
        if row.step % 100 == 0 {
            log::info!("{} step {}/{}: {}", config.method, row.step, total, row.csv_line());
        }
        Ok(())
    });
    if let Err(e) = result {
        if let Some(last) = &state.last {
            let _ = writeln!(tel, "{}", last.csv_line());
        }
        return Err(e);
    }
    state.save(&out.join("final.vgck"))?;
    Ok(state)
}
