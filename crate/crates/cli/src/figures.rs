//! Figure bundles: one CSV per panel plus a README with expected vs actual verdicts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use spikecert::certificates::{compute_eta_v, FailureReason, ScanPolicy};
use spikecert::{Framework, Kernel, SamplingMeasure, SpikeConfiguration, SpikeError};

use crate::{fmt, Outcome, EXIT_INVALID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    #[value(name = "laplace-fig1")]
    LaplaceFig1,
    #[value(name = "gauss-fig2")]
    GaussFig2,
    #[value(name = "gauss-confined-fig3")]
    GaussConfinedFig3,
}

impl Figure {
    pub fn fixture(self) -> &'static str {
        match self {
            Figure::LaplaceFig1 => include_str!("../fixtures/laplace-fig1.json"),
            Figure::GaussFig2 => include_str!("../fixtures/gauss-fig2.json"),
            Figure::GaussConfinedFig3 => include_str!("../fixtures/gauss-confined-fig3.json"),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSpec {
    pub figure: String,
    pub title: String,
    pub kernel: Kernel,
    pub spikes: SpikeConfiguration,
    pub grid: GridSpec,
    pub panels: Vec<PanelSpec>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    fn points(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Sampling {
    /// Unit weights at the listed locations.
    Points { samples: Vec<f64> },
    /// `n` equispaced locations with Riemann weights.
    Grid { lo: f64, hi: f64, n: usize },
    Lebesgue,
}

impl Sampling {
    fn measure(&self) -> Result<SamplingMeasure> {
        Ok(match self {
            Sampling::Points { samples } => SamplingMeasure::uniform_weights(samples)?,
            Sampling::Grid { lo, hi, n } => {
                let g = GridSpec { lo: *lo, hi: *hi, n: *n };
                let w = (hi - lo) / (*n - 1) as f64;
                SamplingMeasure::discrete(g.points().into_iter().map(|s| (s, w)).collect())?
            }
            Sampling::Lebesgue => SamplingMeasure::Lebesgue,
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSpec {
    pub name: String,
    pub sampling: Sampling,
    pub expected_valid: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PanelResult {
    pub name: String,
    pub file: String,
    pub expected_valid: bool,
    pub valid: bool,
    pub failure_reason: Option<FailureReason>,
    pub global_margin: f64,
    pub curvature: Vec<f64>,
}

pub fn load(figure: Figure) -> Result<FigureSpec> {
    let mut spec: FigureSpec = serde_json::from_str(figure.fixture()).context("bundled fixture")?;
    if spec.grid.n < 2 {
        return Err(anyhow!("fixture grid needs at least 2 points"));
    }
    if spec.spikes.amplitudes.is_empty() {
        spec.spikes.amplitudes = vec![1.0; spec.spikes.positions.len()];
    }
    spec.spikes.validate()?;
    Ok(spec)
}

fn run_panel(spec: &FigureSpec, panel: &PanelSpec, policy: &ScanPolicy, out: &Path) -> Result<PanelResult> {
    let measure = panel.sampling.measure()?;
    let fw = Framework::new(spec.kernel, measure.clone())?;
    let file = format!("{}.csv", panel.name);
    let mut w = csv::Writer::from_path(out.join(&file))?;
    w.write_record(["series", "x", "value"])?;
    if let SamplingMeasure::Discrete { atoms } = &measure {
        for &(s, wt) in atoms {
            w.write_record(["sample", &fmt(s), &fmt(wt)])?;
        }
    }
    for (&x, &a) in spec.spikes.positions.iter().zip(&spec.spikes.amplitudes) {
        w.write_record(["spike", &fmt(x), &fmt(a)])?;
    }
    let result = match compute_eta_v(&fw, &spec.spikes) {
        Ok(cert) => {
            for t in spec.grid.points() {
                w.write_record(["eta", &fmt(t), &fmt(cert.eval(0, t)?)])?;
            }
            let v = cert.certify(policy);
            PanelResult {
                name: panel.name.clone(),
                file,
                expected_valid: panel.expected_valid,
                valid: v.valid,
                failure_reason: v.failure_reason,
                global_margin: v.global_margin,
                curvature: v.curvature,
            }
        }
        Err(SpikeError::RankDeficient { .. }) => PanelResult {
            name: panel.name.clone(),
            file,
            expected_valid: panel.expected_valid,
            valid: false,
            failure_reason: Some(FailureReason::RankDeficient),
            global_margin: f64::NAN,
            curvature: Vec::new(),
        },
        Err(e) => return Err(e.into()),
    };
    w.flush()?;
    Ok(result)
}

fn describe(s: &Sampling) -> String {
    match s {
        Sampling::Points { samples } => format!("{} samples {:?}", samples.len(), samples),
        Sampling::Grid { lo, hi, n } => format!("{n} equispaced samples on [{lo}, {hi}], Riemann weights"),
        Sampling::Lebesgue => "Lebesgue measure on the line".into(),
    }
}

fn readme(spec: &FigureSpec, results: &[PanelResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}\n\n{}\n", spec.figure, spec.title);
    let _ = writeln!(
        s,
        "Each CSV has columns `series,x,value`. Rows with series `sample` give sampling locations and weights, \
         `spike` gives spike positions and amplitudes, and `eta` gives the vanishing-derivatives precertificate \
         on {} points of [{}, {}].\n",
        spec.grid.n, spec.grid.lo, spec.grid.hi
    );
    let _ = writeln!(s, "| panel | sampling | expected | actual | reason |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for (p, r) in spec.panels.iter().zip(results) {
        let verdict = |v: bool| if v { "valid" } else { "invalid" };
        let reason = r.failure_reason.map(|f| format!("{f:?}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            p.name,
            describe(&p.sampling),
            verdict(r.expected_valid),
            verdict(r.valid),
            reason
        );
    }
    s
}

/// Writes the bundle for `figure` into `out`; exit code 2 if any panel disagrees with its expectation.
pub fn reproduce(figure: Figure, policy: &ScanPolicy, out: &Path) -> Result<Outcome> {
    let spec = load(figure)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let results = spec
        .panels
        .iter()
        .map(|p| run_panel(&spec, p, policy, out))
        .collect::<Result<Vec<_>>>()?;
    fs::write(out.join("README.md"), readme(&spec, &results))?;
    let matches = results.iter().all(|r| r.valid == r.expected_valid);
    let summary = serde_json::json!({
        "figure": spec.figure,
        "panels": results,
        "all_as_expected": matches,
    });
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(Outcome {
        summary,
        code: if matches { 0 } else { EXIT_INVALID },
    })
}
