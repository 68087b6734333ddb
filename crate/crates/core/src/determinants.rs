//! Rescaled bordered determinants and their Cauchy-Binet building blocks.
//!
//! For spikes `x_1 < ... < x_M` the bordered matrix is
//!
//! ```text
//! [ lead   C(t,x_1)  d2C(t,x_1)  ...  ]
//! [ b_1    Gram row for phi(x_1)      ]
//! [ 0      Gram row for phi'(x_1)     ]
//! [ ...                               ]
//! ```
//!
//! whose determinant equals `det G * (lead - eta(t))` when `b` is the
//! interpolation target. Dividing by the vanishing factor gives `D_V`, `D_W`
//! and the signed pair, each extended continuously at the anchors.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{select_precision, Precision};
use crate::dd::DoubleDouble;
use crate::error::{Result, SpikeError};
use crate::framework::{clustered_columns, vanishing_columns, AnchorColumns, Framework, SpikeConfiguration};
use crate::kernel::Kernel;
use crate::linalg::{determinant, Matrix, SpdFactor};
use crate::scalar::Scalar;

/// Relative radius (in units of the anchor span) inside which the continuous
/// extension replaces the raw quotient.
pub const DEFAULT_SWITCH_REL: f64 = 1e-4;

/// Default cap on the number of sample tuples in Cauchy-Binet sums.
pub const TUPLE_BUDGET: u128 = 2_000_000;
pub const MAX_TUPLE_SAMPLES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeterminantKind {
    V,
    W,
    SignedPlus,
    SignedMinus,
}

/// Spike positions (`V`) or a cluster point with multiplicity (`W`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Anchors<'a> {
    Spikes(&'a [f64]),
    Clustered { x0: f64, m: usize },
}

impl Anchors<'_> {
    fn columns(&self) -> Vec<(f64, usize)> {
        match *self {
            Anchors::Spikes(xs) => vanishing_columns(xs),
            Anchors::Clustered { x0, m } => clustered_columns(x0, 2 * m),
        }
    }

    fn positions(&self) -> Vec<f64> {
        match *self {
            Anchors::Spikes(xs) => xs.to_vec(),
            Anchors::Clustered { x0, .. } => vec![x0],
        }
    }

    fn order(&self) -> usize {
        match *self {
            Anchors::Spikes(_) => 2,
            Anchors::Clustered { m, .. } => 2 * m,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Anchors::Spikes(xs) => {
                crate::framework::check_increasing(xs)?;
                if xs.is_empty() {
                    return Err(SpikeError::InvalidConfig("at least one spike is required".into()));
                }
            }
            Anchors::Clustered { m: 0, .. } => {
                return Err(SpikeError::InvalidConfig("cluster multiplicity must be >= 1".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

fn factorial<T: Scalar>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_usize(k))
}

/// Bordered determinant for one configuration, evaluated in `T`.
#[derive(Clone)]
pub struct BorderedDeterminant<T> {
    fw: Framework,
    kind: DeterminantKind,
    positions: Vec<f64>,
    /// Anchors whose squared distance divides the determinant.
    singular: Vec<usize>,
    order: usize,
    cols: AnchorColumns<T>,
    gram: Matrix<T>,
    border: Vec<T>,
    lead: T,
    switch: f64,
}

impl<T: Scalar> BorderedDeterminant<T> {
    fn build(
        fw: &Framework,
        kind: DeterminantKind,
        anchors: Anchors,
        border: Vec<T>,
        lead: T,
        singular: Vec<usize>,
    ) -> Result<Self> {
        anchors.validate()?;
        fw.check_positions(&anchors.positions())?;
        let order = anchors.order();
        fw.kernel().check_order(order)?;
        let cols = AnchorColumns::new(fw, &anchors.columns())?;
        let gram = cols.gram(fw);
        let positions = anchors.positions();
        let span = positions.last().unwrap() - positions[0];
        Ok(Self {
            fw: fw.clone(),
            kind,
            positions,
            singular,
            order,
            cols,
            gram,
            border,
            lead,
            switch: DEFAULT_SWITCH_REL * span.max(1.0),
        })
    }

    /// `D_V` for spikes at `positions`.
    pub fn vanishing(fw: &Framework, positions: &[f64]) -> Result<Self> {
        let border = positions.iter().flat_map(|_| [T::one(), T::zero()]).collect();
        Self::build(
            fw,
            DeterminantKind::V,
            Anchors::Spikes(positions),
            border,
            T::one(),
            (0..positions.len()).collect(),
        )
    }

    /// `D_W` for a cluster of `m` spikes at `x0`.
    pub fn clustered(fw: &Framework, x0: f64, m: usize) -> Result<Self> {
        let mut border = vec![T::zero(); 2 * m];
        if let Some(b) = border.first_mut() {
            *b = T::one();
        }
        Self::build(fw, DeterminantKind::W, Anchors::Clustered { x0, m }, border, T::one(), vec![0])
    }

    /// `D_V+` (`plus = true`) or `D_V-` for signed amplitudes.
    pub fn signed(fw: &Framework, spikes: &SpikeConfiguration, plus: bool) -> Result<Self> {
        spikes.validate()?;
        if spikes.amplitudes.contains(&0.0) {
            return Err(SpikeError::InvalidConfig("signed determinants need nonzero amplitudes".into()));
        }
        let signs = spikes.signs();
        let border = signs.iter().flat_map(|&s| [T::from_f64(s), T::zero()]).collect();
        let want = if plus { 1.0 } else { -1.0 };
        let singular = (0..signs.len()).filter(|&i| signs[i] == want).collect();
        Self::build(
            fw,
            if plus { DeterminantKind::SignedPlus } else { DeterminantKind::SignedMinus },
            Anchors::Spikes(&spikes.positions),
            border,
            T::from_f64(want),
            singular,
        )
    }

    /// Overrides the absolute extension radius.
    pub fn with_switch(mut self, delta: f64) -> Self {
        self.switch = delta;
        self
    }

    pub fn switch_radius(&self) -> f64 {
        self.switch
    }

    pub fn kind(&self) -> DeterminantKind {
        self.kind
    }

    pub fn gram(&self) -> &Matrix<T> {
        &self.gram
    }

    pub fn gram_determinant(&self) -> T {
        determinant(&self.gram).value
    }

    fn bordered(&self, lead: T, row: &[T]) -> T {
        let n = self.gram.rows();
        let m = Matrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => lead,
            (0, j) => row[j - 1],
            (i, 0) => self.border[i - 1],
            (i, j) => self.gram[(i - 1, j - 1)],
        });
        determinant(&m).value
    }

    /// Unscaled bordered determinant at `t`.
    pub fn bordered_at(&self, t: T) -> Result<T> {
        let cross = self.cols.cross(&self.fw, t, 0)?;
        Ok(self.bordered(self.lead, &cross[0]))
    }

    /// The rescaled quotient, no extension.
    pub fn raw(&self, t: T) -> Result<T> {
        let det = self.bordered_at(t)?;
        Ok(det * self.prefactor(t))
    }

    fn prefactor(&self, t: T) -> T {
        match self.kind {
            DeterminantKind::W => {
                let d = t - T::from_f64(self.positions[0]);
                factorial::<T>(self.order) / d.powi(self.order as i32)
            }
            _ => {
                let mut p = T::from_f64(2.0);
                for &i in &self.singular {
                    let d = t - T::from_f64(self.positions[i]);
                    p /= d * d;
                }
                p
            }
        }
    }

    /// Value of the continuous extension at the anchor `idx`.
    pub fn extension(&self, idx: usize) -> Result<T> {
        if !self.singular.contains(&idx) {
            return self.raw(T::from_f64(self.positions[idx]));
        }
        let det = self.extension_bordered(idx)?;
        Ok(match self.kind {
            DeterminantKind::W => det,
            _ => {
                let xi = T::from_f64(self.positions[idx]);
                let mut p = T::one();
                for &j in &self.singular {
                    if j != idx {
                        let d = xi - T::from_f64(self.positions[j]);
                        p *= d * d;
                    }
                }
                det / p
            }
        })
    }

    /// `det [[0, d1^p d2^o C(x_idx, .)], [border, G]]`.
    pub fn extension_bordered(&self, idx: usize) -> Result<T> {
        let xi = T::from_f64(self.positions[idx]);
        let cross = self.cols.cross(&self.fw, xi, self.order)?;
        Ok(self.bordered(T::zero(), &cross[self.order]))
    }

    /// Value at `t`, switching to the extension within the switch radius.
    pub fn eval(&self, t: f64) -> Result<T> {
        if let Some(&idx) = self
            .singular
            .iter()
            .find(|&&i| (t - self.positions[i]).abs() < self.switch)
        {
            return self.extension(idx);
        }
        self.raw(T::from_f64(t))
    }
}

/// A bordered determinant in whichever precision the Gram system needs.
#[derive(Clone)]
pub enum AutoBordered {
    Double(BorderedDeterminant<f64>),
    Extended(BorderedDeterminant<DoubleDouble>),
}

macro_rules! dispatch {
    ($self:expr, $d:ident => $body:expr) => {
        match $self {
            AutoBordered::Double($d) => $body,
            AutoBordered::Extended($d) => $body,
        }
    };
}

impl AutoBordered {
    fn pick(fw: &Framework, anchors: Anchors, precision: Precision) -> Result<bool> {
        anchors.validate()?;
        select_precision(fw, &anchors.columns(), precision)
    }

    pub fn vanishing(fw: &Framework, positions: &[f64], precision: Precision) -> Result<Self> {
        Ok(if Self::pick(fw, Anchors::Spikes(positions), precision)? {
            AutoBordered::Extended(BorderedDeterminant::vanishing(fw, positions)?)
        } else {
            AutoBordered::Double(BorderedDeterminant::vanishing(fw, positions)?)
        })
    }

    pub fn clustered(fw: &Framework, x0: f64, m: usize, precision: Precision) -> Result<Self> {
        Ok(if Self::pick(fw, Anchors::Clustered { x0, m }, precision)? {
            AutoBordered::Extended(BorderedDeterminant::clustered(fw, x0, m)?)
        } else {
            AutoBordered::Double(BorderedDeterminant::clustered(fw, x0, m)?)
        })
    }

    pub fn signed(fw: &Framework, spikes: &SpikeConfiguration, plus: bool, precision: Precision) -> Result<Self> {
        Ok(if Self::pick(fw, Anchors::Spikes(&spikes.positions), precision)? {
            AutoBordered::Extended(BorderedDeterminant::signed(fw, spikes, plus)?)
        } else {
            AutoBordered::Double(BorderedDeterminant::signed(fw, spikes, plus)?)
        })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        dispatch!(self, d => d.eval(t).map(Scalar::to_f64))
    }

    pub fn raw(&self, t: f64) -> Result<f64> {
        dispatch!(self, d => d.raw(Scalar::from_f64(t)).map(Scalar::to_f64))
    }

    pub fn extension(&self, idx: usize) -> Result<f64> {
        dispatch!(self, d => d.extension(idx).map(Scalar::to_f64))
    }

    pub fn with_switch(self, delta: f64) -> Self {
        match self {
            AutoBordered::Double(d) => AutoBordered::Double(d.with_switch(delta)),
            AutoBordered::Extended(d) => AutoBordered::Extended(d.with_switch(delta)),
        }
    }

    pub fn switch_radius(&self) -> f64 {
        dispatch!(self, d => d.switch_radius())
    }

    pub fn positions(&self) -> &[f64] {
        dispatch!(self, d => &d.positions)
    }

    pub fn singular(&self) -> &[usize] {
        dispatch!(self, d => &d.singular)
    }

    pub fn precision_label(&self) -> &'static str {
        match self {
            AutoBordered::Double(_) => f64::LABEL,
            AutoBordered::Extended(_) => DoubleDouble::LABEL,
        }
    }
}

/// `D_V(t)` with automatic precision.
pub fn det_v(fw: &Framework, positions: &[f64], t: f64) -> Result<f64> {
    AutoBordered::vanishing(fw, positions, Precision::Auto)?.eval(t)
}

/// `D_W(t)` with automatic precision.
pub fn det_w(fw: &Framework, x0: f64, m: usize, t: f64) -> Result<f64> {
    AutoBordered::clustered(fw, x0, m, Precision::Auto)?.eval(t)
}

/// `(D_V+(t), D_V-(t))` with automatic precision.
pub fn det_v_signed(fw: &Framework, spikes: &SpikeConfiguration, t: f64) -> Result<(f64, f64)> {
    let plus = AutoBordered::signed(fw, spikes, true, Precision::Auto)?.eval(t)?;
    let minus = AutoBordered::signed(fw, spikes, false, Precision::Auto)?.eval(t)?;
    Ok((plus, minus))
}

fn cramer_in<T: Scalar>(fw: &Framework, anchors: Anchors, idx: usize) -> Result<f64> {
    let bd = match anchors {
        Anchors::Spikes(xs) => BorderedDeterminant::<T>::vanishing(fw, xs)?,
        Anchors::Clustered { x0, m } => BorderedDeterminant::<T>::clustered(fw, x0, m)?,
    };
    if idx >= bd.positions.len() {
        return Err(SpikeError::InvalidConfig(format!("anchor index {idx} out of range")));
    }
    // independent route: eigen-solve for the coefficients, then differentiate
    let factor = SpdFactor::new(&bd.gram, crate::certificates::rank_threshold::<T>())?;
    let coeffs = factor.solve(&bd.border);
    let xi = T::from_f64(bd.positions[idx]);
    let cross = bd.cols.cross(fw, xi, bd.order)?;
    let top: T = coeffs.iter().zip(&cross[bd.order]).map(|(&c, &v)| c * v).sum();
    let rhs = -(top * bd.gram_determinant());
    let lhs = bd.extension_bordered(idx)?;
    let (l, r) = (lhs.to_f64(), rhs.to_f64());
    let denom = l.abs().max(r.abs()).max(f64::MIN_POSITIVE);
    Ok((l - r).abs() / denom)
}

/// Relative residual of `det [[0, h], [u, G]] = -eta^(p)(x_i) det G`, in double-double.
///
/// The derivative at an anchor is a cancelling sum, so f64 would lose
/// `cond(G) * eps` relative accuracy even where the Gram solve itself is fine.
pub fn cramer_residual(fw: &Framework, anchors: Anchors, idx: usize) -> Result<f64> {
    anchors.validate()?;
    cramer_in::<DoubleDouble>(fw, anchors, idx)
}

fn kernel_jet<T: Scalar>(kernel: &Kernel, x: f64, s: f64, order: usize) -> Vec<T> {
    let mut buf = vec![T::zero(); order + 1];
    kernel.jet(T::from_f64(x), T::from_f64(s), T::zero(), &mut buf);
    buf
}

/// Sample-indexed kernel columns: `(x_i, 0), (x_i, 1)` or `(x0, j)`.
fn sample_matrix<T: Scalar>(kernel: &Kernel, cols: &[(f64, usize)], samples: &[f64]) -> Matrix<T> {
    let mut m = Matrix::zeros(samples.len(), cols.len());
    for (r, &s) in samples.iter().enumerate() {
        for (c, &(x, o)) in cols.iter().enumerate() {
            m[(r, c)] = kernel_jet::<T>(kernel, x, s, o)[o];
        }
    }
    m
}

/// `D_A`: determinant of the kernel columns restricted to `2M` samples.
pub fn det_a_in<T: Scalar>(kernel: &Kernel, anchors: Anchors, samples: &[f64]) -> Result<T> {
    anchors.validate()?;
    let cols = anchors.columns();
    if samples.len() != cols.len() {
        return Err(SpikeError::InvalidConfig(format!(
            "D_A needs {} samples, got {}",
            cols.len(),
            samples.len()
        )));
    }
    Ok(determinant(&sample_matrix::<T>(kernel, &cols, samples)).value)
}

pub fn det_a(kernel: &Kernel, anchors: Anchors, samples: &[f64]) -> Result<f64> {
    det_a_in::<DoubleDouble>(kernel, anchors, samples).map(|v| v.to_f64())
}

/// `D_B`: bordered sample determinant over rows `(t, x_1, x_1', ...)`.
///
/// The first column is `(1, 1, 0, ..., 1, 0)` or, with `s0_augment`, the
/// kernel column at `s0`. Rescaled by the vanishing factor and extended by
/// continuity within `switch` of an anchor.
pub fn det_b_in<T: Scalar>(
    kernel: &Kernel,
    anchors: Anchors,
    t: f64,
    samples: &[f64],
    s0_augment: Option<f64>,
    switch: f64,
) -> Result<T> {
    anchors.validate()?;
    let cols = anchors.columns();
    if samples.len() != cols.len() {
        return Err(SpikeError::InvalidConfig(format!(
            "D_B needs {} samples, got {}",
            cols.len(),
            samples.len()
        )));
    }
    if let Some(s0) = s0_augment {
        if samples.iter().any(|&s| s <= s0) {
            return Err(SpikeError::InvalidConfig("s0 must lie strictly below the samples".into()));
        }
    }
    let positions = anchors.positions();
    let order = anchors.order();
    let n = cols.len() + 1;
    let first = |x: f64, o: usize| -> T {
        match s0_augment {
            Some(s0) => kernel_jet::<T>(kernel, x, s0, o)[o],
            None => {
                if o == 0 {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    };
    let fill = |m: &mut Matrix<T>| {
        for (r, &(x, o)) in cols.iter().enumerate() {
            m[(r + 1, 0)] = first(x, o);
            for (c, &s) in samples.iter().enumerate() {
                m[(r + 1, c + 1)] = kernel_jet::<T>(kernel, x, s, o)[o];
            }
        }
    };
    let near = positions.iter().position(|&x| (t - x).abs() < switch);
    let mut m = Matrix::zeros(n, n);
    fill(&mut m);
    match near {
        Some(idx) => {
            let xi = positions[idx];
            m[(0, 0)] = first(xi, order);
            for (c, &s) in samples.iter().enumerate() {
                m[(0, c + 1)] = kernel_jet::<T>(kernel, xi, s, order)[order];
            }
            let det = determinant(&m).value;
            Ok(match anchors {
                Anchors::Clustered { .. } => det / factorial::<T>(order),
                Anchors::Spikes(_) => {
                    let mut p = T::from_f64(2.0);
                    for (j, &x) in positions.iter().enumerate() {
                        if j != idx {
                            let d = T::from_f64(xi - x);
                            p *= d * d;
                        }
                    }
                    det / p
                }
            })
        }
        None => {
            m[(0, 0)] = first(t, 0);
            for (c, &s) in samples.iter().enumerate() {
                m[(0, c + 1)] = kernel_jet::<T>(kernel, t, s, 0)[0];
            }
            let det = determinant(&m).value;
            let tt = T::from_f64(t);
            let mut p = T::one();
            match anchors {
                Anchors::Clustered { x0, .. } => p = (tt - T::from_f64(x0)).powi(order as i32),
                Anchors::Spikes(_) => {
                    for &x in &positions {
                        let d = tt - T::from_f64(x);
                        p *= d * d;
                    }
                }
            }
            Ok(det / p)
        }
    }
}

pub fn det_b(kernel: &Kernel, anchors: Anchors, t: f64, samples: &[f64], s0_augment: Option<f64>) -> Result<f64> {
    let span = anchors.positions().last().copied().unwrap_or(0.0) - anchors.positions().first().copied().unwrap_or(0.0);
    det_b_in::<DoubleDouble>(kernel, anchors, t, samples, s0_augment, DEFAULT_SWITCH_REL * span.max(1.0))
        .map(|v| v.to_f64())
}

/// Increasing index tuples of length `r` from `0..n`, lexicographic.
pub fn increasing_tuples(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub(crate) fn tuple_count(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

pub(crate) fn check_tuple_budget(n: usize, r: usize) -> Result<()> {
    let count = tuple_count(n, r);
    if n > MAX_TUPLE_SAMPLES || count > TUPLE_BUDGET {
        return Err(SpikeError::TooManySamples {
            tuples: count,
            budget: TUPLE_BUDGET,
        });
    }
    Ok(())
}

/// Pairwise (tree) summation; fixed shape so results do not depend on threads.
pub fn pairwise_sum<T: Scalar>(v: &[T]) -> T {
    match v.len() {
        0 => T::zero(),
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyBinetResiduals {
    pub gram_residual: f64,
    pub d_residual: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    let d = a.abs().max(b.abs());
    if d == 0.0 {
        0.0
    } else {
        (a - b).abs() / d
    }
}

/// Compares `det G` and `D(t)` against their tuple-sum expansions.
pub fn cauchy_binet_check(fw: &Framework, anchors: Anchors, t: Option<f64>) -> Result<CauchyBinetResiduals> {
    anchors.validate()?;
    if !fw.is_discrete() {
        return Err(SpikeError::InvalidConfig("Cauchy-Binet expansion needs discrete sampling".into()));
    }
    if fw.is_normalized() {
        return Err(SpikeError::InvalidConfig(
            "use the normalized expansion for normalized frameworks".into(),
        ));
    }
    type E = DoubleDouble;
    let cols = anchors.columns();
    let r = cols.len();
    let atoms = fw.measure().atoms();
    check_tuple_budget(atoms.len(), r)?;
    let tuples = increasing_tuples(atoms.len(), r);
    let kernel = *fw.kernel();
    let bd = match anchors {
        Anchors::Spikes(xs) => BorderedDeterminant::<E>::vanishing(fw, xs)?,
        Anchors::Clustered { x0, m } => BorderedDeterminant::<E>::clustered(fw, x0, m)?,
    };
    let switch = bd.switch;
    let terms: Vec<(E, E)> = tuples
        .par_iter()
        .map(|tuple| {
            let s: Vec<f64> = tuple.iter().map(|&i| atoms[i].0).collect();
            let w = tuple.iter().fold(E::one(), |acc, &i| acc * E::from_f64(atoms[i].1));
            let da = det_a_in::<E>(&kernel, anchors, &s).expect("validated");
            let g = w * da * da;
            let d = match t {
                Some(t) => {
                    let db = det_b_in::<E>(&kernel, anchors, t, &s, None, switch).expect("validated");
                    w * da * db
                }
                None => E::zero(),
            };
            (g, d)
        })
        .collect();
    let g_terms: Vec<E> = terms.iter().map(|p| p.0).collect();
    let d_terms: Vec<E> = terms.iter().map(|p| p.1).collect();
    let gram_sum = pairwise_sum(&g_terms);
    let gram_residual = rel(bd.gram_determinant().to_f64(), gram_sum.to_f64());
    let d_residual = match t {
        Some(t) => {
            let factor = match anchors {
                Anchors::Spikes(_) => E::from_f64(2.0),
                Anchors::Clustered { m, .. } => factorial::<E>(2 * m),
            };
            let expanded = factor * pairwise_sum(&d_terms);
            rel(bd.eval(t)?.to_f64(), expanded.to_f64())
        }
        None => 0.0,
    };
    Ok(CauchyBinetResiduals {
        gram_residual,
        d_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminantReport {
    pub kind: DeterminantKind,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub min_value: f64,
    pub argmin: f64,
    /// `(x_i, D(x_i))` from the continuous extension.
    pub extension_points: Vec<(f64, f64)>,
    pub cramer_residuals: Vec<f64>,
    pub cauchy_binet: Option<CauchyBinetResiduals>,
    pub precision: String,
}

/// Evaluates `D_V` or `D_W` on a grid together with the cross-identities.
pub fn determinant_report(fw: &Framework, anchors: Anchors, grid: &[f64]) -> Result<DeterminantReport> {
    let bd = match anchors {
        Anchors::Spikes(xs) => AutoBordered::vanishing(fw, xs, Precision::Auto)?,
        Anchors::Clustered { x0, m } => AutoBordered::clustered(fw, x0, m, Precision::Auto)?,
    };
    let values = grid
        .par_iter()
        .map(|&t| bd.eval(t))
        .collect::<Result<Vec<f64>>>()?;
    let (mut min_value, mut argmin) = (f64::INFINITY, f64::NAN);
    for (&t, &v) in grid.iter().zip(&values) {
        if v < min_value {
            min_value = v;
            argmin = t;
        }
    }
    let positions = bd.positions().to_vec();
    let mut extension_points = Vec::new();
    let mut cramer_residuals = Vec::new();
    for (i, &x) in positions.iter().enumerate() {
        extension_points.push((x, bd.extension(i)?));
        cramer_residuals.push(cramer_residual(fw, anchors, i)?);
    }
    let cauchy_binet = if fw.is_discrete() && !fw.is_normalized() {
        let t = grid.get(grid.len() / 3).copied();
        match cauchy_binet_check(fw, anchors, t) {
            Ok(r) => Some(r),
            Err(SpikeError::TooManySamples { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(DeterminantReport {
        kind: match anchors {
            Anchors::Spikes(_) => DeterminantKind::V,
            Anchors::Clustered { .. } => DeterminantKind::W,
        },
        t: grid.to_vec(),
        values,
        min_value,
        argmin,
        extension_points,
        cramer_residuals,
        cauchy_binet,
        precision: bd.precision_label().to_string(),
    })
}
