//! Vanishing-derivatives precertificates and their certification by grid scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dd::DoubleDouble;
use crate::determinants::BorderedDeterminant;
use crate::error::{Result, SpikeError};
use crate::framework::{clustered_columns, vanishing_columns, AnchorColumns, Framework, SpikeConfiguration};
use crate::kernel::{hermite_majorant, Kernel};
use crate::linalg::SpdFactor;
use crate::scalar::{CompensatedSum, Scalar};

pub const RANK_TOL: f64 = 1e-12;
/// Gram condition above which the automatic path switches to double-double.
pub const EXTENDED_SWITCH_CONDITION: f64 = 1e10;
/// Constraint residual that triggers an a-posteriori switch to double-double.
pub const RESIDUAL_SWITCH: f64 = 1e-8;

/// Rank threshold on the scaled Gram eigenvalue ratio, relative to `f64` roundoff.
pub fn rank_threshold<T: Scalar>() -> f64 {
    RANK_TOL * T::epsilon() / f64::epsilon()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    Extended,
    #[default]
    Auto,
}

/// Decides whether a Gram system over `specs` needs extended precision.
pub(crate) fn select_precision(fw: &Framework, specs: &[(f64, usize)], precision: Precision) -> Result<bool> {
    match precision {
        Precision::Double => Ok(false),
        Precision::Extended => Ok(true),
        Precision::Auto => {
            let cols = AnchorColumns::<f64>::new(fw, specs)?;
            let g = cols.gram(fw);
            match SpdFactor::new(&g, rank_threshold::<f64>()) {
                Ok(f) => Ok(f.condition > EXTENDED_SWITCH_CONDITION),
                Err(_) => Ok(true),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    V,
    W,
    Signed,
}

/// A precertificate `eta(t) = sum_j c_j d2^{o_j} C(t, x_j)` in precision `T`.
#[derive(Clone)]
pub struct Certificate<T> {
    kind: CertificateKind,
    positions: Vec<f64>,
    targets: Vec<f64>,
    m: usize,
    cols: AnchorColumns<T>,
    coeffs: Vec<T>,
    /// `w_k * sum_j c_j d^{o_j} phi(x_j)(s_k)`, discrete measures only.
    dual: Option<Vec<T>>,
    gram_condition: f64,
    fw: Framework,
}

impl<T: Scalar> Certificate<T> {
    fn solve(
        fw: &Framework,
        kind: CertificateKind,
        positions: Vec<f64>,
        targets: Vec<f64>,
        m: usize,
        specs: Vec<(f64, usize)>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        if fw.is_discrete() && fw.measure().len() < specs.len() {
            return Err(SpikeError::RankDeficient {
                ratio: 0.0,
                threshold: rank_threshold::<T>(),
            });
        }
        let cols = AnchorColumns::<T>::new(fw, &specs)?;
        let gram = cols.gram(fw);
        let factor = SpdFactor::new(&gram, rank_threshold::<T>())?;
        let rhs: Vec<T> = rhs.into_iter().map(T::from_f64).collect();
        let coeffs = factor.solve(&rhs);
        let dual = cols.vectors().map(|vecs| {
            let w = fw.weights_as::<T>();
            (0..w.len())
                .map(|k| {
                    let mut acc = CompensatedSum::default();
                    for (c, v) in coeffs.iter().zip(vecs) {
                        acc.add(*c * v[k]);
                    }
                    w[k] * acc.value()
                })
                .collect()
        });
        Ok(Self {
            kind,
            positions,
            targets,
            m,
            cols,
            coeffs,
            dual,
            gram_condition: factor.condition,
            fw: fw.clone(),
        })
    }

    pub fn vanishing(fw: &Framework, spikes: &SpikeConfiguration) -> Result<Self> {
        spikes.validate()?;
        fw.check_positions(&spikes.positions)?;
        if !spikes.is_positive() {
            return Err(SpikeError::InvalidConfig(
                "vanishing-derivatives certificate needs positive amplitudes".into(),
            ));
        }
        let m = spikes.len();
        let rhs = (0..m).flat_map(|_| [1.0, 0.0]).collect();
        Self::solve(
            fw,
            CertificateKind::V,
            spikes.positions.clone(),
            vec![1.0; m],
            m,
            vanishing_columns(&spikes.positions),
            rhs,
        )
    }

    pub fn clustered(fw: &Framework, x0: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(SpikeError::InvalidConfig("cluster multiplicity must be >= 1".into()));
        }
        fw.check_positions(&[x0])?;
        fw.kernel().check_order(2 * m)?;
        let mut rhs = vec![0.0; 2 * m];
        rhs[0] = 1.0;
        Self::solve(fw, CertificateKind::W, vec![x0], vec![1.0], m, clustered_columns(x0, 2 * m), rhs)
    }

    pub fn signed(fw: &Framework, spikes: &SpikeConfiguration) -> Result<Self> {
        spikes.validate()?;
        fw.check_positions(&spikes.positions)?;
        if spikes.amplitudes.contains(&0.0) {
            return Err(SpikeError::InvalidConfig("signed certificate needs nonzero amplitudes".into()));
        }
        let signs = spikes.signs();
        let rhs = signs.iter().flat_map(|&s| [s, 0.0]).collect();
        Self::solve(
            fw,
            CertificateKind::Signed,
            spikes.positions.clone(),
            signs,
            spikes.len(),
            vanishing_columns(&spikes.positions),
            rhs,
        )
    }

    /// The same certificate solved in another precision.
    pub fn rebuild<U: Scalar>(&self) -> Result<Certificate<U>> {
        match self.kind {
            CertificateKind::V => Certificate::vanishing(&self.fw, &SpikeConfiguration::at(&self.positions)?),
            CertificateKind::W => Certificate::clustered(&self.fw, self.positions[0], self.m),
            CertificateKind::Signed => Certificate::signed(
                &self.fw,
                &SpikeConfiguration::new(self.positions.clone(), self.targets.clone())?,
            ),
        }
    }

    pub fn kind(&self) -> CertificateKind {
        self.kind
    }

    /// Anchor positions (`[x0]` for kind W).
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Target values at anchors: `1`, or `sign(a_i)` for kind Signed.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn spike_count(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    pub fn framework(&self) -> &Framework {
        &self.fw
    }

    /// Sample-space dual vector (discrete measures).
    pub fn dual_vector(&self) -> Option<&[T]> {
        self.dual.as_deref()
    }

    /// `eta^(deriv)(t)` together with `sum |terms|` for rounding-error bounds.
    pub fn eval_with_magnitude(&self, deriv: usize, t: T) -> Result<(T, T)> {
        let mut acc = CompensatedSum::default();
        let mut mag = T::zero();
        match &self.dual {
            Some(dual) => {
                let jet = self.fw.atom_jet(t, deriv)?;
                for (&p, &v) in dual.iter().zip(jet.row(deriv)) {
                    let term = p * v;
                    acc.add(term);
                    mag += term.abs();
                }
            }
            None => {
                let cross = self.cols.cross(&self.fw, t, deriv)?;
                for (&c, &v) in self.coeffs.iter().zip(&cross[deriv]) {
                    let term = c * v;
                    acc.add(term);
                    mag += term.abs();
                }
            }
        }
        Ok((acc.value(), mag))
    }

    pub fn eval(&self, deriv: usize, t: T) -> Result<T> {
        self.eval_with_magnitude(deriv, t).map(|p| p.0)
    }

    /// `eta^(deriv)(t)` via the coefficient expansion against correlation partials.
    pub fn eval_expansion(&self, deriv: usize, t: T) -> Result<T> {
        let cross = self.cols.cross(&self.fw, t, deriv)?;
        Ok(self.coeffs.iter().zip(&cross[deriv]).map(|(&c, &v)| c * v).sum())
    }

    /// Largest deviations from the interpolation constraints.
    pub fn constraint_residuals(&self) -> Result<(f64, f64)> {
        let mut worst = (0.0f64, 0.0f64);
        let k = match self.kind {
            CertificateKind::W => 2 * self.m - 1,
            _ => 1,
        };
        for (&x, &target) in self.positions.iter().zip(&self.targets) {
            let x = T::from_f64(x);
            let r0 = (self.eval(0, x)? - T::from_f64(target)).abs().to_f64();
            worst.0 = worst.0.max(r0);
            for d in 1..=k {
                worst.1 = worst.1.max(self.eval_expansion(d, x)?.abs().to_f64());
            }
        }
        Ok(worst)
    }

    /// Curvature of order `p` at each anchor: `eta''(x_i)`, or `eta_W^(2M)(x0)`
    /// from the bordered-determinant identity for kind W.
    pub fn curvatures(&self) -> Result<Vec<f64>> {
        match self.kind {
            CertificateKind::W => {
                let bd = BorderedDeterminant::<T>::clustered(&self.fw, self.positions[0], self.m)?;
                let top = -(bd.extension_bordered(0)? / bd.gram_determinant());
                Ok(vec![top.to_f64()])
            }
            _ => self
                .positions
                .iter()
                .map(|&x| self.eval(2, T::from_f64(x)).map(Scalar::to_f64))
                .collect(),
        }
    }

    fn curvature_order(&self) -> usize {
        match self.kind {
            CertificateKind::W => 2 * self.m,
            _ => 2,
        }
    }

    /// Certifies the precertificate under `policy`.
    pub fn certify(&self, policy: &ScanPolicy) -> CertificateVerdict {
        certify_impl(self, policy).0
    }

    /// Like [`Certificate::certify`], also returning every evaluated point.
    pub fn certify_with_trace(&self, policy: &ScanPolicy) -> (CertificateVerdict, Vec<TracePoint>) {
        certify_impl(self, policy)
    }
}

/// Either `"auto"` or an explicit number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl AutoOr {
    pub const AUTO: AutoOr = AutoOr::Auto(AutoTag::Auto);

    pub fn value(&self) -> Option<f64> {
        match *self {
            AutoOr::Value(v) => Some(v),
            AutoOr::Auto(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanPolicy {
    pub grid_points: usize,
    pub pad: AutoOr,
    pub margin_tol: f64,
    pub curvature_tol_rel: f64,
    pub excl_radius: AutoOr,
    pub local_points: usize,
    pub identically_one_tol: f64,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        Self {
            grid_points: 4001,
            pad: AutoOr::AUTO,
            margin_tol: 1e-7,
            curvature_tol_rel: 1e-9,
            excl_radius: AutoOr::AUTO,
            local_points: 41,
            identically_one_tol: 1e-10,
        }
    }
}

impl ScanPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(SpikeError::InvalidConfig("grid_points must be at least 2".into()));
        }
        if !(self.margin_tol > 0.0 && self.margin_tol < 1.0) {
            return Err(SpikeError::InvalidConfig("margin_tol must lie in (0, 1)".into()));
        }
        if let Some(p) = self.pad.value() {
            if !(p > 0.0) {
                return Err(SpikeError::InvalidConfig("pad must be positive".into()));
            }
        }
        if let Some(r) = self.excl_radius.value() {
            if !(r > 0.0) {
                return Err(SpikeError::InvalidConfig("excl_radius must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    RankDeficient,
    CurvatureNonNegative,
    ExceedsOne,
    IdenticallyOne,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub lo: f64,
    pub hi: f64,
    pub uniform_points: usize,
    pub local_points: usize,
    pub tail_points: usize,
    /// Scan end points after tail extension.
    pub scanned_lo: f64,
    pub scanned_hi: f64,
    pub exclusion_radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateVerdict {
    pub valid: bool,
    pub kind: CertificateKind,
    /// `eta''(x_i)` per anchor, or `eta_W^(2M)(x0)`.
    pub curvature: Vec<f64>,
    /// `min (1 - eta)` outside the exclusion balls, tail bounds included
    /// (`1 - |eta|` for signed certificates).
    pub global_margin: f64,
    /// Smallest slack of the near-field bound at ball edges.
    pub near_field_margin: f64,
    /// Margin actually required: `margin_tol * min(1, max |eta - 1|)`.
    pub effective_margin: f64,
    /// The verdict failed only because a margin sat within the roundoff bound.
    pub noise_limited: bool,
    pub max_deviation_from_one: f64,
    pub grid: GridSummary,
    pub failure_reason: Option<FailureReason>,
    pub precision: String,
    pub gram_condition: f64,
}

impl CertificateVerdict {
    /// Verdict for a certificate that could not be computed.
    pub fn rank_deficient(kind: CertificateKind) -> Self {
        Self {
            valid: false,
            kind,
            curvature: Vec::new(),
            global_margin: f64::NAN,
            near_field_margin: f64::NAN,
            effective_margin: f64::NAN,
            noise_limited: false,
            max_deviation_from_one: f64::NAN,
            grid: GridSummary {
                lo: f64::NAN,
                hi: f64::NAN,
                uniform_points: 0,
                local_points: 0,
                tail_points: 0,
                scanned_lo: f64::NAN,
                scanned_hi: f64::NAN,
                exclusion_radii: Vec::new(),
            },
            failure_reason: Some(FailureReason::RankDeficient),
            precision: String::new(),
            gram_condition: f64::INFINITY,
        }
    }
}

pub const FLAG_EXTENDED: u8 = 1;
pub const FLAG_EXCLUDED: u8 = 2;
pub const FLAG_LOCAL: u8 = 4;
pub const FLAG_TAIL: u8 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub eta: f64,
    pub flags: u8,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PointRole {
    Uniform,
    Local,
    Edge(usize),
    Tail,
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Bound on the certificate beyond a scan edge: `(limit, deviation)` with
/// `|eta(t) - limit| <= deviation` for every `t` further out, or `None`
/// when the monotonicity argument does not apply yet.
fn tail_bound<T: Scalar>(cert: &Certificate<T>, edge: f64, right: bool) -> Option<(f64, f64)> {
    let fw = &cert.fw;
    let kernel = *fw.kernel();
    match &cert.dual {
        Some(dual) => {
            let samples = fw.measure().locations();
            let weights = fw.measure().weights();
            let dual: Vec<f64> = dual.iter().map(|v| v.to_f64()).collect();
            // log psi(edge, s_k), monotone beyond the edge
            let logs: Vec<f64> = samples
                .iter()
                .map(|&s| match kernel {
                    Kernel::Gaussian { sigma } => -((edge - s) / sigma).powi(2),
                    Kernel::Laplace { .. } => -edge * s,
                })
                .collect();
            if let Kernel::Gaussian { .. } = kernel {
                let beyond = if right {
                    samples.iter().all(|&s| edge >= s)
                } else {
                    samples.iter().all(|&s| edge <= s)
                };
                if !beyond {
                    return None;
                }
            }
            if fw.is_normalized() {
                // convex combination of q_k = dual_k / w_k; weights concentrate on the
                // extreme sample and the others decay monotonically relative to it
                let ext = match (kernel, right) {
                    (Kernel::Laplace { .. }, _) => 0,
                    (Kernel::Gaussian { .. }, true) => samples.len() - 1,
                    (Kernel::Gaussian { .. }, false) => 0,
                };
                let q: Vec<f64> = dual.iter().zip(&weights).map(|(d, w)| d / w).collect();
                let mut dev = 0.0;
                for k in 0..samples.len() {
                    if k != ext {
                        let ratio = (weights[k] / weights[ext]) * (logs[k] - logs[ext]).exp();
                        dev += ratio * (q[k] - q[ext]).abs();
                    }
                }
                Some((q[ext], dev))
            } else {
                let dev = dual.iter().zip(&logs).map(|(d, l)| d.abs() * l.exp()).sum();
                Some((0.0, dev))
            }
        }
        None => {
            let sigma = match kernel {
                Kernel::Gaussian { sigma } => sigma,
                Kernel::Laplace { .. } => return None,
            };
            let scale = sigma * std::f64::consts::SQRT_2;
            let amp = sigma * (std::f64::consts::PI / 2.0).sqrt();
            let mut dev = 0.0;
            for (&(x, o), c) in cert.cols.specs.iter().zip(&cert.coeffs) {
                let v = (edge - x.to_f64()) / scale;
                let outward = if right { v > 0.0 } else { v < 0.0 };
                if !outward || v * v <= o as f64 / 2.0 + 1.0 {
                    return None;
                }
                dev += c.to_f64().abs() * amp * hermite_majorant(o, v) * (-(v * v)).exp() / scale.powi(o as i32);
            }
            Some((0.0, dev))
        }
    }
}

fn certify_impl<T: Scalar>(cert: &Certificate<T>, policy: &ScanPolicy) -> (CertificateVerdict, Vec<TracePoint>) {
    let fw = &cert.fw;
    let kernel = *fw.kernel();
    let signed = cert.kind == CertificateKind::Signed;
    let p = cert.curvature_order();
    let p_fact: f64 = (1..=p).map(|k| k as f64).product();

    let curvature = cert.curvatures().unwrap_or_else(|_| vec![f64::NAN; cert.positions.len()]);
    let kappa_scale = curvature.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let curvature_ok = kappa_scale.is_finite()
        && kappa_scale > 0.0
        && curvature
            .iter()
            .zip(&cert.targets)
            .all(|(&k, &tau)| tau * k < -policy.curvature_tol_rel * kappa_scale);

    // scan window
    let xs = &cert.positions;
    let samples = fw.measure().locations();
    let (lo, hi) = match kernel {
        Kernel::Gaussian { sigma } => {
            let pad = policy.pad.value().unwrap_or(6.0 * sigma);
            let mut lo = xs[0];
            let mut hi = *xs.last().unwrap();
            for &s in &samples {
                lo = lo.min(s);
                hi = hi.max(s);
            }
            (lo - pad, hi + pad)
        }
        Kernel::Laplace { c } => {
            let top = *xs.last().unwrap();
            let pad = policy.pad.value().unwrap_or((top - c).max(1.0));
            (c, top + pad)
        }
    };
    let span = hi - lo;

    let eval_all = |pts: &[(f64, PointRole)]| -> Vec<Option<(f64, f64)>> {
        pts.par_iter()
            .map(|&(t, _)| {
                cert.eval_with_magnitude(0, T::from_f64(t))
                    .ok()
                    .map(|(v, m)| (v.to_f64(), m.to_f64()))
            })
            .collect()
    };
    let mut points: Vec<(f64, PointRole)> = uniform(lo, hi, policy.grid_points)
        .into_iter()
        .map(|t| (t, PointRole::Uniform))
        .collect();
    let mut values = eval_all(&points);

    // margins are relative to the excursion of eta away from one, capped at margin_tol
    let excursion = values
        .iter()
        .flatten()
        .fold(0.0f64, |m, &(v, _)| m.max((v - 1.0).abs()));
    let margin = policy.margin_tol * excursion.min(1.0);

    let radii: Vec<f64> = curvature
        .iter()
        .map(|&k| match policy.excl_radius.value() {
            Some(r) => r,
            None if k.is_finite() && k != 0.0 && margin > 0.0 => (2.0 * margin * p_fact / k.abs()).powf(1.0 / p as f64),
            None => 1e-3 * span,
        })
        .collect();
    let in_ball = |t: f64| xs.iter().zip(&radii).any(|(&x, &r)| (t - x).abs() <= r);

    let mut near: Vec<(f64, PointRole)> = Vec::new();
    let n_local = policy.local_points;
    for (j, (&x, &r)) in xs.iter().zip(&radii).enumerate() {
        for i in 0..n_local {
            let t = x - r + 2.0 * r * (i as f64 + 0.5) / n_local as f64;
            if t != x && t >= lo && t <= hi {
                near.push((t, PointRole::Local));
            }
        }
        for t in [x - r, x + r] {
            let inside_other = xs
                .iter()
                .zip(&radii)
                .enumerate()
                .any(|(k, (&y, &ry))| k != j && (t - y).abs() < ry);
            if !inside_other && t >= lo && t <= hi {
                near.push((t, PointRole::Edge(j)));
            }
        }
    }
    values.extend(eval_all(&near));
    points.extend(near);

    // tail extension until the monotone bound closes the gap
    let mut tail_margin = f64::INFINITY;
    let mut scanned = (lo, hi);
    let sides: &[bool] = match kernel {
        Kernel::Gaussian { .. } => &[false, true],
        Kernel::Laplace { .. } => &[true],
    };
    let seg_points = (policy.grid_points / 8).max(16);
    for &right in sides {
        let mut edge = if right { hi } else { lo };
        let mut len = span.max(1.0);
        let mut closed = false;
        for _ in 0..64 {
            if let Some((limit, dev)) = tail_bound(cert, edge, right) {
                let worst = if signed { limit.abs() + dev } else { limit + dev };
                // past the point where the bound is tight, more scanning cannot help
                if worst <= 1.0 - margin || dev <= 0.25 * margin {
                    tail_margin = tail_margin.min(1.0 - worst);
                    closed = true;
                    break;
                }
            }
            let next = if right { edge + len } else { edge - len };
            let seg: Vec<(f64, PointRole)> = uniform(edge, next, seg_points + 1)
                .into_iter()
                .skip(1)
                .map(|t| (t, PointRole::Tail))
                .collect();
            values.extend(eval_all(&seg));
            points.extend(seg);
            edge = next;
            len *= 2.0;
        }
        if !closed {
            tail_margin = f64::NEG_INFINITY;
        }
        if right {
            scanned.1 = edge;
        } else {
            scanned.0 = edge;
        }
    }

    let eps = T::epsilon();
    // the interpolation residual bounds the solve error carried into eta
    let solve_err = cert.constraint_residuals().map(|r| r.0).unwrap_or(0.0);
    let roundoff = |mag: f64| 64.0 * eps * mag + 2.0 * solve_err;
    let stat = |v: f64| if signed { v.abs() } else { v };
    let mut global_margin = tail_margin;
    let mut near_field_margin = f64::INFINITY;
    let mut exceeds = false;
    let mut noise_limited = false;
    let mut max_dev = 0.0f64;
    let mut eval_failed = false;
    let mut trace = Vec::with_capacity(points.len());
    let ext_flag = if T::epsilon() < f64::epsilon() { FLAG_EXTENDED } else { 0 };
    for (&(t, role), val) in points.iter().zip(&values) {
        let Some((v, mag)) = *val else {
            eval_failed = true;
            continue;
        };
        let excluded = in_ball(t);
        let mut flags = ext_flag;
        if excluded {
            flags |= FLAG_EXCLUDED;
        }
        match role {
            PointRole::Local | PointRole::Edge(_) => flags |= FLAG_LOCAL,
            PointRole::Tail => flags |= FLAG_TAIL,
            PointRole::Uniform => {}
        }
        trace.push(TracePoint { t, eta: v, flags });
        if role != PointRole::Tail {
            max_dev = max_dev.max((v - 1.0).abs());
        }
        let guard = 8.0 * roundoff(mag);
        match role {
            PointRole::Edge(j) => {
                let cq = curvature[j].abs() / (2.0 * p_fact);
                let slack = 1.0 - cq * radii[j].powi(p as i32) - stat(v);
                near_field_margin = near_field_margin.min(slack);
                if slack < 0.0 {
                    exceeds = true;
                } else if slack <= guard {
                    noise_limited = true;
                }
            }
            _ if excluded => {
                let excess = stat(v) - 1.0;
                if excess > guard {
                    exceeds = true;
                } else if excess > roundoff(mag) {
                    noise_limited = true;
                }
            }
            _ => {
                let slack = 1.0 - stat(v);
                global_margin = global_margin.min(slack);
                if !(slack > margin) {
                    exceeds = true;
                } else if slack <= guard {
                    noise_limited = true;
                }
            }
        }
    }
    trace.sort_by(|a, b| a.t.total_cmp(&b.t));
    if !(global_margin > margin) {
        exceeds = true;
    }

    let failure = if cert.kind != CertificateKind::Signed && max_dev <= policy.identically_one_tol {
        Some(FailureReason::IdenticallyOne)
    } else if !curvature_ok {
        Some(FailureReason::CurvatureNonNegative)
    } else if eval_failed || exceeds || noise_limited {
        Some(FailureReason::ExceedsOne)
    } else {
        None
    };
    let n_uniform = policy.grid_points;
    let n_tail = points.iter().filter(|p| p.1 == PointRole::Tail).count();
    let verdict = CertificateVerdict {
        valid: failure.is_none(),
        kind: cert.kind,
        curvature,
        global_margin,
        near_field_margin,
        effective_margin: margin,
        noise_limited: noise_limited && !exceeds && !eval_failed && failure == Some(FailureReason::ExceedsOne),
        max_deviation_from_one: max_dev,
        grid: GridSummary {
            lo,
            hi,
            uniform_points: n_uniform,
            local_points: points.len() - n_uniform - n_tail,
            tail_points: n_tail,
            scanned_lo: scanned.0,
            scanned_hi: scanned.1,
            exclusion_radii: radii,
        },
        failure_reason: failure,
        precision: T::LABEL.to_string(),
        gram_condition: cert.gram_condition,
    };
    (verdict, trace)
}

/// A certificate in whichever precision its Gram system required.
#[derive(Clone)]
pub enum AutoCertificate {
    Double(Certificate<f64>),
    Extended(Certificate<DoubleDouble>),
}

macro_rules! dispatch {
    ($self:expr, $c:ident => $body:expr) => {
        match $self {
            AutoCertificate::Double($c) => $body,
            AutoCertificate::Extended($c) => $body,
        }
    };
}

impl AutoCertificate {
    fn build(
        precision: Precision,
        double: impl Fn() -> Result<Certificate<f64>>,
        extended: impl Fn() -> Result<Certificate<DoubleDouble>>,
    ) -> Result<Self> {
        match precision {
            Precision::Double => double().map(AutoCertificate::Double),
            Precision::Extended => extended().map(AutoCertificate::Extended),
            Precision::Auto => match double() {
                Ok(c) if c.gram_condition <= EXTENDED_SWITCH_CONDITION => {
                    let (r0, r1) = c.constraint_residuals()?;
                    if r0.max(r1) <= RESIDUAL_SWITCH {
                        Ok(AutoCertificate::Double(c))
                    } else {
                        extended().map(AutoCertificate::Extended)
                    }
                }
                Ok(_) | Err(SpikeError::RankDeficient { .. }) => extended().map(AutoCertificate::Extended),
                Err(e) => Err(e),
            },
        }
    }

    pub fn kind(&self) -> CertificateKind {
        dispatch!(self, c => c.kind())
    }

    pub fn positions(&self) -> &[f64] {
        dispatch!(self, c => c.positions())
    }

    pub fn gram_condition(&self) -> f64 {
        dispatch!(self, c => c.gram_condition())
    }

    pub fn coeffs(&self) -> Vec<f64> {
        dispatch!(self, c => c.coeffs().iter().map(|v| v.to_f64()).collect())
    }

    pub fn is_extended(&self) -> bool {
        matches!(self, AutoCertificate::Extended(_))
    }

    pub fn precision_label(&self) -> &'static str {
        match self {
            AutoCertificate::Double(_) => f64::LABEL,
            AutoCertificate::Extended(_) => DoubleDouble::LABEL,
        }
    }

    pub fn eval(&self, deriv: usize, t: f64) -> Result<f64> {
        dispatch!(self, c => c.eval(deriv, Scalar::from_f64(t)).map(Scalar::to_f64))
    }

    pub fn constraint_residuals(&self) -> Result<(f64, f64)> {
        dispatch!(self, c => c.constraint_residuals())
    }

    pub fn curvatures(&self) -> Result<Vec<f64>> {
        dispatch!(self, c => c.curvatures())
    }

    /// Certifies, repeating in double-double when f64 roundoff alone decided the verdict.
    pub fn certify(&self, policy: &ScanPolicy) -> CertificateVerdict {
        self.certify_with_trace(policy).0
    }

    pub fn certify_with_trace(&self, policy: &ScanPolicy) -> (CertificateVerdict, Vec<TracePoint>) {
        match self {
            AutoCertificate::Double(c) => {
                let out = c.certify_with_trace(policy);
                if out.0.noise_limited {
                    if let Ok(e) = c.rebuild::<DoubleDouble>() {
                        return e.certify_with_trace(policy);
                    }
                }
                out
            }
            AutoCertificate::Extended(c) => c.certify_with_trace(policy),
        }
    }
}

pub fn compute_eta_v_with(fw: &Framework, spikes: &SpikeConfiguration, precision: Precision) -> Result<AutoCertificate> {
    AutoCertificate::build(
        precision,
        || Certificate::vanishing(fw, spikes),
        || Certificate::vanishing(fw, spikes),
    )
}

pub fn compute_eta_w_with(fw: &Framework, x0: f64, m: usize, precision: Precision) -> Result<AutoCertificate> {
    AutoCertificate::build(
        precision,
        || Certificate::clustered(fw, x0, m),
        || Certificate::clustered(fw, x0, m),
    )
}

pub fn compute_eta_signed_with(
    fw: &Framework,
    spikes: &SpikeConfiguration,
    precision: Precision,
) -> Result<AutoCertificate> {
    AutoCertificate::build(
        precision,
        || Certificate::signed(fw, spikes),
        || Certificate::signed(fw, spikes),
    )
}

/// `eta_V` for positive spikes, precision chosen automatically.
pub fn compute_eta_v(fw: &Framework, spikes: &SpikeConfiguration) -> Result<AutoCertificate> {
    compute_eta_v_with(fw, spikes, Precision::Auto)
}

/// `eta_W` for `m` spikes clustered at `x0`.
pub fn compute_eta_w(fw: &Framework, x0: f64, m: usize) -> Result<AutoCertificate> {
    compute_eta_w_with(fw, x0, m, Precision::Auto)
}

/// Precertificate interpolating `sign(a_i)` with vanishing derivatives.
pub fn compute_eta_signed(fw: &Framework, spikes: &SpikeConfiguration) -> Result<AutoCertificate> {
    compute_eta_signed_with(fw, spikes, Precision::Auto)
}

pub fn eval_certificate(cert: &AutoCertificate, deriv: usize, t: f64) -> Result<f64> {
    if deriv > 2 {
        return Err(SpikeError::DerivOrderUnsupported { requested: deriv, max: 2 });
    }
    cert.eval(deriv, t)
}

pub fn certify(cert: &AutoCertificate, policy: &ScanPolicy) -> CertificateVerdict {
    cert.certify(policy)
}

/// Computes and certifies `eta_V`, mapping a singular Gram system to a verdict.
pub fn certify_spikes(fw: &Framework, spikes: &SpikeConfiguration, policy: &ScanPolicy) -> Result<CertificateVerdict> {
    match compute_eta_v(fw, spikes) {
        Ok(c) => Ok(c.certify(policy)),
        Err(SpikeError::RankDeficient { .. }) => Ok(CertificateVerdict::rank_deficient(CertificateKind::V)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::SamplingMeasure;

    fn laplace_ref() -> Framework {
        Framework::new(
            Kernel::laplace(0.0).unwrap(),
            SamplingMeasure::uniform_weights(&[0.5, 1.0, 1.5, 2.5]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn interpolation_constraints() {
        let fw = laplace_ref();
        let spikes = SpikeConfiguration::at(&[1.0, 2.0]).unwrap();
        let c = compute_eta_v(&fw, &spikes).unwrap();
        for &x in &[1.0, 2.0] {
            assert!((c.eval(0, x).unwrap() - 1.0).abs() < 1e-8);
            assert!(c.eval(1, x).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn laplace_reference_valid() {
        let fw = laplace_ref();
        let spikes = SpikeConfiguration::at(&[1.0, 2.0]).unwrap();
        let v = compute_eta_v(&fw, &spikes).unwrap().certify(&ScanPolicy::default());
        assert!(v.valid, "{v:?}");
        assert!(v.curvature.iter().all(|&k| k < 0.0));
    }

    #[test]
    fn lebesgue_eta_w_closed_form() {
        let fw = Framework::new(Kernel::gaussian(1.0).unwrap(), SamplingMeasure::Lebesgue).unwrap();
        let c = compute_eta_w(&fw, 0.0, 1).unwrap();
        for &t in &[-2.0, -0.5, 0.3, 1.7] {
            assert!((c.eval(0, t).unwrap() - (-t * t / 2.0f64).exp()).abs() < 1e-14);
        }
        let k = c.curvatures().unwrap();
        assert!((k[0] + 1.0).abs() < 1e-12);
        assert!(c.certify(&ScanPolicy::default()).valid);
    }

    #[test]
    fn signed_negation() {
        let fw = Framework::new(
            Kernel::gaussian(1.0).unwrap(),
            SamplingMeasure::uniform_weights(&[-1.0, -0.3, 0.2, 0.8, 1.5]).unwrap(),
        )
        .unwrap();
        let a = SpikeConfiguration::new(vec![-0.2, 0.6], vec![1.0, -2.0]).unwrap();
        let b = SpikeConfiguration::new(vec![-0.2, 0.6], vec![-1.0, 2.0]).unwrap();
        let ca = compute_eta_signed(&fw, &a).unwrap();
        let cb = compute_eta_signed(&fw, &b).unwrap();
        for i in 0..20 {
            let t = -2.0 + 0.2 * i as f64;
            assert!((ca.eval(0, t).unwrap() + cb.eval(0, t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_json() {
        let p: ScanPolicy = serde_json::from_str(
            r#"{"grid_points":4001,"pad":"auto","margin_tol":1e-7,"curvature_tol_rel":1e-9,"excl_radius":"auto"}"#,
        )
        .unwrap();
        assert_eq!(p, ScanPolicy::default());
        let q: ScanPolicy = serde_json::from_str(r#"{"pad":3.0}"#).unwrap();
        assert_eq!(q.pad, AutoOr::Value(3.0));
        assert!(serde_json::from_str::<ScanPolicy>(r#"{"pad":"sometimes"}"#).is_err());
        assert_eq!(serde_json::to_value(AutoOr::AUTO).unwrap(), serde_json::json!("auto"));
    }

    #[test]
    fn rank_deficient_when_too_few_samples() {
        let fw = Framework::new(
            Kernel::laplace(0.0).unwrap(),
            SamplingMeasure::uniform_weights(&[0.5, 1.0, 1.5]).unwrap(),
        )
        .unwrap();
        let spikes = SpikeConfiguration::at(&[1.0, 2.0]).unwrap();
        assert!(matches!(compute_eta_v(&fw, &spikes), Err(SpikeError::RankDeficient { .. })));
        let v = certify_spikes(&fw, &spikes, &ScanPolicy::default()).unwrap();
        assert_eq!(v.failure_reason, Some(FailureReason::RankDeficient));
    }
}
