//! Parameter sweeps: one closed-loop run per value, in parallel.

use std::fmt::Write;
use std::path::Path;

use heatctl_core::simulate::ZeroInput;
use heatctl_core::Dynamics;

use crate::config::{RawConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::pipeline::{summarize, Problem};

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: String,
    pub outcome: Result<SweepPoint, String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub n_trunc: usize,
    pub ratio: f64,
    pub rate: Option<f64>,
    pub abscissa: f64,
}

fn point(raw: &RawConfig, key: &str, value: &str) -> CliResult<SweepPoint> {
    let mut raw = raw.clone();
    raw.set(key, value);
    let cfg = RunConfig::from_raw(&raw)?;
    let p = Problem::new(cfg)?;
    let ctrl = p.controller()?;
    let tr = p.simulate(Dynamics::ClosedLoop(&ctrl), p.initial_state()?, &mut ZeroInput)?;
    let s = summarize("closed loop", &tr.times(), &tr.norm_w(), p.cfg.decay_from, p.cfg.steps(), Path::new(""));
    Ok(SweepPoint { n_trunc: p.n_trunc(), ratio: s.ratio, rate: s.rate, abscissa: ctrl.certificate().abscissa })
}

pub fn sweep(raw: &RawConfig, cfg: &RunConfig) -> CliResult<Vec<SweepRow>> {
    let key = cfg.sweep_key.as_deref().ok_or_else(|| CliError::Config("sweep needs `sweep_key`".into()))?;
    if cfg.sweep_values.is_empty() {
        return Err(CliError::Config("sweep needs `sweep_values`".into()));
    }
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .sweep_values
            .iter()
            .map(|v| s.spawn(move || SweepRow { value: v.clone(), outcome: point(raw, key, v).map_err(|e| e.to_string()) }))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    Ok(rows)
}

pub fn write_csv(path: &Path, key: &str, rows: &[SweepRow]) -> CliResult<()> {
    let mut s = format!("{key},n_trunc,ratio,decay_rate,truncated_abscissa,status\n");
    for r in rows {
        match &r.outcome {
            Ok(p) => {
                let rate = p.rate.map_or_else(String::new, |r| format!("{r:.10e}"));
                writeln!(s, "{},{},{:.10e},{rate},{:.10e},ok", r.value, p.n_trunc, p.ratio, p.abscissa).unwrap();
            }
            Err(e) => writeln!(s, "{},,,,,\"{}\"", r.value, e.replace('"', "'")).unwrap(),
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, s).map_err(CliError::io(path))
}
