//! Parameter sweeps: one pipeline run per value, in parallel, with an
//! aggregate CSV for plotting.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::Artifacts;
use crate::pipeline::{run, Pipeline, RunOutcome};

pub const AGGREGATE_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub dir: String,
    /// `ok` or the error message of a failed run.
    pub status: String,
    pub exit_code: i32,
    pub cost: Option<f64>,
    pub res_u: Option<f64>,
    pub res_r: Option<f64>,
    pub design: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: Value,
}

impl SweepOutcome {
    /// Row with the smallest cost among successful runs.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.cost.is_some())
            .min_by(|a, b| a.cost.partial_cmp(&b.cost).expect("finite costs"))
    }
}

/// Parse `0.1,0.2,0.3` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let bad = |m: String| CliError::Config(format!("--values: {m}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let b: f64 = parts[1].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let n: usize = parts[2].trim().parse().map_err(|e| bad(format!("{e}")))?;
        if n < 2 {
            return Err(bad("a range needs at least two points".into()));
        }
        return Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect());
    }
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("'{s}': {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(bad("no values".into()));
    }
    Ok(values)
}

fn field(summary: &Value, key: &str) -> Option<f64> {
    summary["results"][key].as_f64()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| format!("{x:.16e}"))
}

/// Run `pipeline` once per value of `param` under `out/run_<i>`. Failed
/// runs are kept in the aggregate; the first failure is returned after
/// everything has been written.
pub fn sweep(pipeline: Pipeline, config: &ExperimentConfig, param: &str, values: &[f64], out: &Path) -> Result<SweepOutcome> {
    let start = Instant::now();
    let configs = values
        .iter()
        .map(|v| config.with_param(param, *v))
        .collect::<Result<Vec<_>>>()?;
    for c in &configs {
        c.build()?;
    }
    let mut art = Artifacts::create(out)?;
    let width = values.len().saturating_sub(1).to_string().len();
    let results: Vec<(String, Result<RunOutcome>)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let dir = format!("run_{i:0width$}");
            let r = run(pipeline, c, &out.join(&dir));
            (dir, r)
        })
        .collect();

    let mut rows = Vec::with_capacity(values.len());
    let mut first_error = None;
    for ((dir, result), value) in results.into_iter().zip(values) {
        let row = match result {
            Ok(o) => {
                art.adopt(&dir, &o.files);
                SweepRow {
                    value: *value,
                    dir,
                    status: "ok".into(),
                    exit_code: 0,
                    cost: field(&o.summary, "cost"),
                    res_u: field(&o.summary, "res_u"),
                    res_r: field(&o.summary, "res_r"),
                    design: serde_json::from_value(o.summary["results"]["design"].clone()).ok(),
                }
            }
            Err(e) => {
                warn!("sweep {param} = {value}: {e}");
                let row = SweepRow {
                    value: *value,
                    dir,
                    status: e.to_string(),
                    exit_code: e.exit_code(),
                    cost: None,
                    res_u: None,
                    res_r: None,
                    design: None,
                };
                first_error.get_or_insert(e);
                row
            }
        };
        rows.push(row);
    }

    art.write_with(AGGREGATE_FILE, |w| {
        writeln!(w, "value,status,cost,res_u,res_r,design")?;
        for r in &rows {
            let design = r
                .design
                .as_ref()
                .map_or_else(String::new, |d| d.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(";"));
            let status = if r.exit_code == 0 { "ok".to_string() } else { format!("error{}", r.exit_code) };
            writeln!(w, "{:.16e},{status},{},{},{},{design}", r.value, opt(r.cost), opt(r.res_u), opt(r.res_r))?;
        }
        Ok(())
    })?;
    let mut outcome = SweepOutcome { rows, summary: Value::Null };
    outcome.summary = json!({
        "command": "sweep",
        "pipeline": pipeline.name(),
        "param": param,
        "best_value": outcome.best().map(|r| r.value),
        "rows": outcome.rows,
    });
    art.finish("sweep", config, &outcome.summary, start.elapsed().as_secs_f64())?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}
