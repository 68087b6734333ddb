//! Config loading and command implementations behind the `spikecert` binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use spikecert::certificates::{
    compute_eta_signed_with, compute_eta_v_with, compute_eta_w_with, CertificateVerdict, Precision, ScanPolicy,
    TracePoint,
};
use spikecert::determinants::{determinant_report, Anchors};
use spikecert::solver::{noise_vector, solve_pblasso, support_stability_experiment, ExperimentOptions, SolverOptions};
use spikecert::{Framework, SpikeConfiguration};

pub mod figures;

/// Exit code for a completed run whose verdict is negative.
pub const EXIT_INVALID: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub x0: f64,
    pub m: usize,
}

/// Everything a command may need; unused sections are ignored by each command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub framework: Framework,
    #[serde(default)]
    pub spikes: Option<SpikeConfiguration>,
    /// Also compute the clustered certificate at `x0` with multiplicity `m`.
    #[serde(default)]
    pub eta_w: Option<ClusterSpec>,
    #[serde(default)]
    pub policy: ScanPolicy,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Regularization weight for `solve`.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Observed samples for `solve`; simulated from `spikes` when absent.
    #[serde(default)]
    pub observations: Option<Vec<f64>>,
    /// Noise norm added to simulated observations in `solve`.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub experiment: ExperimentOptions,
}

impl RunConfig {
    pub fn spikes(&self) -> Result<SpikeConfiguration> {
        let mut s = self.spikes.clone().ok_or_else(|| anyhow!("config has no \"spikes\" section"))?;
        if s.amplitudes.is_empty() {
            s.amplitudes = vec![1.0; s.positions.len()];
        }
        s.validate()?;
        Ok(s)
    }
}

/// Command-line adjustments applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    /// `dot.path=value` pairs; values parse as JSON, falling back to strings.
    pub set: Vec<String>,
}

/// Writes `value` at a dot path such as `policy.margin_tol` or `spikes.positions.1`.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("malformed override path {path:?}");
    }
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .with_context(|| format!("{path:?}: {part:?} is not an array index"))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| anyhow!("{path:?}: index {idx} out of range ({len} items)"))?
            }
            Value::Object(map) => map.entry(part.to_string()).or_insert(if last {
                Value::Null
            } else {
                Value::Object(Default::default())
            }),
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut()
                    .expect("just created")
                    .entry(part.to_string())
                    .or_insert(Value::Null)
            }
            _ => bail!("{path:?}: cannot descend into a scalar at {part:?}"),
        };
    }
    *node = value;
    Ok(())
}

fn parse_assignment(raw: &str) -> Result<(&str, Value)> {
    let (key, val) = raw
        .split_once('=')
        .ok_or_else(|| anyhow!("override {raw:?} is not key=value"))?;
    let value = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
    Ok((key.trim(), value))
}

/// Applies overrides to raw JSON, then deserializes.
pub fn config_from_value(mut raw: Value, ov: &Overrides) -> Result<RunConfig> {
    for s in &ov.set {
        let (key, value) = parse_assignment(s)?;
        set_path(&mut raw, key, value)?;
    }
    if let Some(g) = ov.grid {
        set_path(&mut raw, "policy.grid_points", Value::from(g))?;
    }
    if let Some(seed) = ov.seed {
        set_path(&mut raw, "seed", Value::from(seed))?;
        set_path(&mut raw, "experiment.seed", Value::from(seed))?;
    }
    let cfg: RunConfig = serde_json::from_value(raw).context("invalid config")?;
    cfg.policy.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, ov: &Overrides) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    config_from_value(raw, ov)
}

/// Result of a command: machine-readable summary plus exit code.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Value,
    pub code: i32,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn out_file(out: Option<&Path>, name: &str) -> Result<Option<PathBuf>> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Ok(Some(dir.join(name)))
        }
        None => Ok(None),
    }
}

fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "eta", "eta_dd_flags"])?;
    for p in trace {
        w.write_record([fmt(p.t), fmt(p.eta), p.flags.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip representation, stable across runs.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Serialize)]
struct CertifyReport {
    eta_v: CertificateVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_w: Option<CertificateVerdict>,
}

/// Certifies `eta_V` (signed variant for mixed amplitudes) and optionally `eta_W`.
pub fn cmd_certify(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let spikes = cfg.spikes()?;
    let cert = if spikes.is_positive() {
        compute_eta_v_with(&cfg.framework, &spikes, cfg.precision)
    } else {
        compute_eta_signed_with(&cfg.framework, &spikes, cfg.precision)
    };
    let (eta_v, trace) = match cert {
        Ok(c) => c.certify_with_trace(&cfg.policy),
        Err(spikecert::SpikeError::RankDeficient { .. }) => (
            CertificateVerdict::rank_deficient(spikecert::certificates::CertificateKind::V),
            Vec::new(),
        ),
        Err(e) => return Err(e.into()),
    };
    if let Some(p) = out_file(out, "eta.csv")? {
        write_trace(&p, &trace)?;
    }
    let eta_w = match cfg.eta_w {
        Some(ClusterSpec { x0, m }) => {
            let (v, trace) = compute_eta_w_with(&cfg.framework, x0, m, cfg.precision)?.certify_with_trace(&cfg.policy);
            if let Some(p) = out_file(out, "eta_w.csv")? {
                write_trace(&p, &trace)?;
            }
            Some(v)
        }
        None => None,
    };
    let valid = eta_v.valid && eta_w.as_ref().is_none_or(|v| v.valid);
    let report = CertifyReport { eta_v, eta_w };
    if let Some(p) = out_file(out, "verdict.json")? {
        write_json(&p, &report)?;
    }
    Ok(Outcome {
        summary: serde_json::to_value(&report)?,
        code: if valid { 0 } else { EXIT_INVALID },
    })
}

/// Evaluates `D_V` (or `D_W` when `eta_w` is set) on the certification grid.
pub fn cmd_criteria(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let policy = &cfg.policy;
    let (anchors_v, cert) = match cfg.eta_w {
        Some(ClusterSpec { x0, m }) => (None, compute_eta_w_with(&cfg.framework, x0, m, cfg.precision)?),
        None => {
            let spikes = cfg.spikes()?;
            (Some(spikes.positions.clone()), compute_eta_v_with(&cfg.framework, &spikes, cfg.precision)?)
        }
    };
    let verdict = cert.certify(policy);
    let grid: Vec<f64> = (0..policy.grid_points)
        .map(|i| verdict.grid.lo + (verdict.grid.hi - verdict.grid.lo) * i as f64 / (policy.grid_points - 1) as f64)
        .collect();
    let anchors = match (&anchors_v, cfg.eta_w) {
        (Some(xs), _) => Anchors::Spikes(xs),
        (None, Some(ClusterSpec { x0, m })) => Anchors::Clustered { x0, m },
        (None, None) => unreachable!(),
    };
    let report = determinant_report(&cfg.framework, anchors, &grid)?;
    if let Some(p) = out_file(out, "criteria.csv")? {
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["t", "D_V", "eta_V", "one_minus_eta"])?;
        for (&t, &d) in report.t.iter().zip(&report.values) {
            let eta = cert.eval(0, t)?;
            w.write_record([fmt(t), fmt(d), fmt(eta), fmt(1.0 - eta)])?;
        }
        w.flush()?;
    }
    let positive = report.min_value > 0.0 && report.extension_points.iter().all(|&(_, v)| v > 0.0);
    let summary = serde_json::json!({
        "kind": report.kind,
        "determinant_positive": positive,
        "min_value": report.min_value,
        "argmin": report.argmin,
        "extension_points": report.extension_points,
        "cramer_residuals": report.cramer_residuals,
        "cauchy_binet": report.cauchy_binet,
        "precision": report.precision,
        "certificate_valid": verdict.valid,
    });
    if let Some(p) = out_file(out, "criteria.json")? {
        write_json(&p, &summary)?;
    }
    Ok(Outcome {
        summary,
        code: if positive { 0 } else { EXIT_INVALID },
    })
}

/// Solves the positive BLASSO on given or simulated observations.
pub fn cmd_solve(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let lambda = cfg.lambda.ok_or_else(|| anyhow!("config has no \"lambda\""))?;
    let y = match &cfg.observations {
        Some(y) => y.clone(),
        None => {
            let spikes = cfg.spikes()?;
            let clean = cfg
                .framework
                .forward(&spikes)?
                .samples()
                .ok_or_else(|| anyhow!("solve needs discrete observations"))?
                .to_vec();
            let w = noise_vector(&cfg.framework, cfg.noise, cfg.seed, 0, 0);
            clean.iter().zip(&w).map(|(a, b)| a + b).collect()
        }
    };
    let result = solve_pblasso(&cfg.framework, &y, lambda, &cfg.solver)?;
    if let Some(p) = out_file(out, "solution.json")? {
        write_json(&p, &result)?;
    }
    Ok(Outcome {
        summary: serde_json::to_value(&result)?,
        code: if result.converged { 0 } else { EXIT_INVALID },
    })
}

/// Runs the noise ladder and writes one CSV row per trial.
pub fn cmd_experiment(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let spikes = cfg.spikes()?;
    let report = support_stability_experiment(&cfg.framework, &spikes, &cfg.experiment)?;
    if let Some(p) = out_file(out, "experiment.csv")? {
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["noise", "trial", "n_spikes", "pos_err", "amp_err", "dual_gap"])?;
        for r in &report.records {
            w.write_record([
                fmt(r.noise),
                r.trial.to_string(),
                r.n_spikes.to_string(),
                fmt(r.pos_err),
                fmt(r.amp_err),
                fmt(r.dual_gap),
            ])?;
        }
        w.flush()?;
    }
    let summary = serde_json::json!({ "levels": report.levels, "slope": report.slope });
    if let Some(p) = out_file(out, "experiment.json")? {
        write_json(&p, &summary)?;
    }
    Ok(Outcome { summary, code: 0 })
}
