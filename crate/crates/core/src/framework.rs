//! Kernel plus sampling measure: forward operator, autocorrelation and Gram matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};
use crate::kernel::{hermite_aux, Kernel, KernelFamily};
use crate::linalg::Matrix;
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    DiscreteAtoms,
    LebesgueLine,
}

/// Sampling measure weighting the data-fidelity norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SamplingMeasure {
    /// Atoms `(s_k, w_k)`, strictly increasing in `s_k`, positive weights.
    Discrete { atoms: Vec<(f64, f64)> },
    Lebesgue,
}

impl SamplingMeasure {
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let m = SamplingMeasure::Discrete { atoms };
        m.validate()?;
        Ok(m)
    }

    /// Unit weights at the given locations.
    pub fn uniform_weights(locations: &[f64]) -> Result<Self> {
        Self::discrete(locations.iter().map(|&s| (s, 1.0)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if let SamplingMeasure::Discrete { atoms } = self {
            if atoms.is_empty() {
                return Err(SpikeError::InvalidConfig("sampling measure has no atoms".into()));
            }
            for (i, &(s, w)) in atoms.iter().enumerate() {
                if !s.is_finite() || !(w > 0.0 && w.is_finite()) {
                    return Err(SpikeError::InvalidConfig(format!(
                        "atom {i} = ({s}, {w}) needs a finite location and positive weight"
                    )));
                }
                if i > 0 && atoms[i - 1].0 >= s {
                    return Err(SpikeError::InvalidConfig(
                        "atom locations must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> MeasureKind {
        match self {
            SamplingMeasure::Discrete { .. } => MeasureKind::DiscreteAtoms,
            SamplingMeasure::Lebesgue => MeasureKind::LebesgueLine,
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        match self {
            SamplingMeasure::Discrete { atoms } => atoms,
            SamplingMeasure::Lebesgue => &[],
        }
    }

    pub fn locations(&self) -> Vec<f64> {
        self.atoms().iter().map(|a| a.0).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms().iter().map(|a| a.1).collect()
    }

    pub fn len(&self) -> usize {
        self.atoms().len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms().is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            SamplingMeasure::Discrete { atoms } => atoms.iter().map(|a| a.1).sum(),
            SamplingMeasure::Lebesgue => f64::INFINITY,
        }
    }

    pub fn scaled(&self, gamma: f64) -> Self {
        match self {
            SamplingMeasure::Discrete { atoms } => SamplingMeasure::Discrete {
                atoms: atoms.iter().map(|&(s, w)| (s, w * gamma)).collect(),
            },
            SamplingMeasure::Lebesgue => SamplingMeasure::Lebesgue,
        }
    }

    pub fn translated(&self, shift: f64) -> Self {
        match self {
            SamplingMeasure::Discrete { atoms } => SamplingMeasure::Discrete {
                atoms: atoms.iter().map(|&(s, w)| (s + shift, w)).collect(),
            },
            SamplingMeasure::Lebesgue => SamplingMeasure::Lebesgue,
        }
    }
}

/// Spikes `m0 = sum a_i delta_{x_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeConfiguration {
    pub positions: Vec<f64>,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
}

impl SpikeConfiguration {
    pub fn new(positions: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        let s = Self { positions, amplitudes };
        s.validate()?;
        Ok(s)
    }

    /// Unit amplitudes.
    pub fn at(positions: &[f64]) -> Result<Self> {
        Self::new(positions.to_vec(), vec![1.0; positions.len()])
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(SpikeError::InvalidConfig("at least one spike is required".into()));
        }
        if self.positions.len() != self.amplitudes.len() {
            return Err(SpikeError::InvalidConfig(format!(
                "{} positions but {} amplitudes",
                self.positions.len(),
                self.amplitudes.len()
            )));
        }
        check_increasing(&self.positions)?;
        if self.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(SpikeError::InvalidConfig("amplitudes must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.amplitudes.iter().all(|&a| a > 0.0)
    }

    pub fn signs(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|&a| a.signum()).collect()
    }
}

pub(crate) fn check_increasing(xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(SpikeError::InvalidConfig("positions must be finite".into()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpikeError::InvalidConfig("positions must be strictly increasing".into()));
    }
    Ok(())
}

/// What `forward` returns.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    /// Values `(Phi m)_k` at each sample location.
    Samples(Vec<f64>),
    /// Continuous profile `s -> sum a_i psi(x_i, s)` for Lebesgue sampling.
    Profile(ForwardProfile),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardProfile {
    kernel: Kernel,
    spikes: SpikeConfiguration,
}

impl ForwardProfile {
    pub fn eval(&self, s: f64) -> f64 {
        let mut out = [0.0];
        let mut acc = CompensatedSum::default();
        for (&x, &a) in self.spikes.positions.iter().zip(&self.spikes.amplitudes) {
            self.kernel.jet(x, s, 0.0, &mut out);
            acc.add(a * out[0]);
        }
        acc.value()
    }
}

impl Observation {
    pub fn samples(&self) -> Option<&[f64]> {
        match self {
            Observation::Samples(v) => Some(v),
            Observation::Profile(_) => None,
        }
    }
}

/// Derivatives `d^d/dx^d phi(x)` as sample vectors, `d = 0..=order`.
#[derive(Clone, Debug)]
pub(crate) struct AtomJet<T> {
    k: usize,
    data: Vec<T>,
}

impl<T: Scalar> AtomJet<T> {
    #[inline]
    pub fn row(&self, d: usize) -> &[T] {
        &self.data[d * self.k..(d + 1) * self.k]
    }
}

/// A reconstruction framework.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Framework {
    kernel: Kernel,
    measure: SamplingMeasure,
    normalized: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameworkSpec {
    kernel: Kernel,
    measure: SamplingMeasure,
    #[serde(default)]
    normalized: bool,
}

impl<'de> Deserialize<'de> for Framework {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = FrameworkSpec::deserialize(d)?;
        Framework::with_normalization(spec.kernel, spec.measure, spec.normalized)
            .map_err(serde::de::Error::custom)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

impl Framework {
    pub fn new(kernel: Kernel, measure: SamplingMeasure) -> Result<Self> {
        Self::with_normalization(kernel, measure, false)
    }

    /// Builds a framework, normalized atoms included when `normalized` is set.
    pub fn with_normalization(kernel: Kernel, measure: SamplingMeasure, normalized: bool) -> Result<Self> {
        kernel.validate()?;
        measure.validate()?;
        if measure.kind() == MeasureKind::LebesgueLine {
            if kernel.family() != KernelFamily::Gaussian {
                return Err(SpikeError::UnsupportedClosedForm);
            }
            if normalized {
                return Err(SpikeError::InfiniteMass);
            }
        }
        if kernel.family() == KernelFamily::Laplace {
            for &(s, _) in measure.atoms() {
                // s = 0 is a constant atom: useless alone, harmless after normalization
                let ok = if normalized { s >= 0.0 } else { s > 0.0 };
                if !ok {
                    return Err(SpikeError::DomainViolation {
                        what: "s",
                        value: s,
                        domain: if normalized { "[0, inf)".into() } else { kernel.s_domain().to_string() },
                    });
                }
            }
        }
        Ok(Self {
            kernel,
            measure,
            normalized,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn measure(&self) -> &SamplingMeasure {
        &self.measure
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_discrete(&self) -> bool {
        self.measure.kind() == MeasureKind::DiscreteAtoms
    }

    pub(crate) fn set_normalized(&mut self, on: bool) {
        self.normalized = on;
    }

    /// Same kernel, weights multiplied by `gamma`.
    pub fn with_scaled_weights(&self, gamma: f64) -> Self {
        Self {
            measure: self.measure.scaled(gamma),
            ..self.clone()
        }
    }

    pub fn max_deriv_order(&self) -> usize {
        self.kernel.max_deriv_order()
    }

    /// Checks that every position is an interior point of the x-domain.
    pub fn check_positions(&self, xs: &[f64]) -> Result<()> {
        check_increasing(xs)?;
        let dom = self.kernel.x_domain();
        for &x in xs {
            if !dom.interior_contains(x) {
                return Err(SpikeError::DomainViolation {
                    what: "spike position",
                    value: x,
                    domain: dom.to_string(),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn samples_as<T: Scalar>(&self) -> Vec<T> {
        self.measure.atoms().iter().map(|a| T::from_f64(a.0)).collect()
    }

    pub(crate) fn weights_as<T: Scalar>(&self) -> Vec<T> {
        self.measure.atoms().iter().map(|a| T::from_f64(a.1)).collect()
    }

    /// Atom derivatives at `x` over the discrete samples, normalized if flagged.
    pub(crate) fn atom_jet<T: Scalar>(&self, x: T, order: usize) -> Result<AtomJet<T>> {
        let samples = self.samples_as::<T>();
        let k = samples.len();
        let mut data = vec![T::zero(); k * (order + 1)];
        let mut buf = vec![T::zero(); order + 1];
        let shift = if self.normalized {
            self.kernel.rescale_shift(x, &samples)
        } else {
            T::zero()
        };
        for (j, &s) in samples.iter().enumerate() {
            self.kernel.jet(x, s, shift, &mut buf);
            for d in 0..=order {
                data[d * k + j] = buf[d];
            }
        }
        if self.normalized {
            self.normalize_jet(x, &mut data, k, order)?;
        }
        Ok(AtomJet { k, data })
    }

    /// Replaces raw kernel derivatives by those of `psi / N` (Leibniz rule).
    fn normalize_jet<T: Scalar>(&self, x: T, data: &mut [T], k: usize, order: usize) -> Result<()> {
        let w = self.weights_as::<T>();
        let big_n: Vec<T> = (0..=order)
            .map(|d| {
                let mut acc = CompensatedSum::default();
                for j in 0..k {
                    acc.add(w[j] * data[d * k + j]);
                }
                acc.value()
            })
            .collect();
        if !(big_n[0] > T::zero()) || !big_n[0].is_finite() {
            return Err(SpikeError::NonPositiveNormalizer { x: x.to_f64() });
        }
        let inv = T::one() / big_n[0];
        let mut recip = vec![inv];
        for d in 1..=order {
            let mut acc = CompensatedSum::default();
            for i in 1..=d {
                acc.add(T::from_i64(binomial(d, i)) * big_n[i] * recip[d - i]);
            }
            recip.push(-inv * acc.value());
        }
        let raw = data.to_vec();
        for d in 0..=order {
            for j in 0..k {
                let mut acc = CompensatedSum::default();
                for i in 0..=d {
                    acc.add(T::from_i64(binomial(d, i)) * raw[i * k + j] * recip[d - i]);
                }
                data[d * k + j] = acc.value();
            }
        }
        Ok(())
    }

    /// `N(x)` and its derivatives up to `order` (discrete measures).
    pub fn normalizer<T: Scalar>(&self, x: T, order: usize) -> Result<Vec<T>> {
        if !self.is_discrete() {
            return Err(SpikeError::InfiniteMass);
        }
        let samples = self.samples_as::<T>();
        let w = self.weights_as::<T>();
        let mut sums = vec![CompensatedSum::default(); order + 1];
        let mut buf = vec![T::zero(); order + 1];
        for (j, &s) in samples.iter().enumerate() {
            self.kernel.jet(x, s, T::zero(), &mut buf);
            for d in 0..=order {
                sums[d].add(w[j] * buf[d]);
            }
        }
        Ok(sums.iter().map(CompensatedSum::value).collect())
    }

    /// Weighted inner product over samples, ascending order, compensated.
    pub(crate) fn inner<T: Scalar>(&self, a: &[T], b: &[T]) -> T {
        let mut acc = CompensatedSum::default();
        for ((&(_, w), &x), &y) in self.measure.atoms().iter().zip(a).zip(b) {
            acc.add(T::from_f64(w) * x * y);
        }
        acc.value()
    }

    /// Closed-form Gaussian/Lebesgue partial `d1^k d2^l C(x, y)`.
    fn lebesgue_partial<T: Scalar>(&self, k: usize, l: usize, x: T, y: T) -> T {
        let sigma = match self.kernel {
            Kernel::Gaussian { sigma } => T::from_f64(sigma),
            Kernel::Laplace { .. } => unreachable!("validated at construction"),
        };
        let two = T::from_f64(2.0);
        let amp = sigma * (T::pi() / two).sqrt();
        let scale = sigma * two.sqrt();
        let v = (x - y) / scale;
        let mut val = amp * hermite_aux(k + l, v) * (-(v * v)).exp() / scale.powi((k + l) as i32);
        if l % 2 == 1 {
            val = -val;
        }
        val
    }

    /// `d1^k d2^l C(x, x')`.
    pub fn correlation<T: Scalar>(&self, k: usize, l: usize, x: T, xp: T) -> Result<T> {
        self.kernel.check_order(k)?;
        self.kernel.check_order(l)?;
        self.kernel.check_x(x.to_f64())?;
        self.kernel.check_x(xp.to_f64())?;
        match self.measure {
            SamplingMeasure::Lebesgue => {
                self.kernel.check_order(k + l)?;
                Ok(self.lebesgue_partial(k, l, x, xp))
            }
            SamplingMeasure::Discrete { .. } => {
                let a = self.atom_jet(x, k)?;
                let b = self.atom_jet(xp, l)?;
                Ok(self.inner(a.row(k), b.row(l)))
            }
        }
    }

    /// `Phi m`; unweighted sample values for discrete measures.
    pub fn forward(&self, spikes: &SpikeConfiguration) -> Result<Observation> {
        spikes.validate()?;
        for &x in &spikes.positions {
            self.kernel.check_x(x)?;
        }
        match self.measure {
            SamplingMeasure::Lebesgue => Ok(Observation::Profile(ForwardProfile {
                kernel: self.kernel,
                spikes: spikes.clone(),
            })),
            SamplingMeasure::Discrete { ref atoms } => {
                let mut acc = vec![CompensatedSum::<f64>::default(); atoms.len()];
                for (&x, &a) in spikes.positions.iter().zip(&spikes.amplitudes) {
                    let jet = self.atom_jet(x, 0)?;
                    for (c, &v) in acc.iter_mut().zip(jet.row(0)) {
                        c.add(a * v);
                    }
                }
                Ok(Observation::Samples(acc.iter().map(CompensatedSum::value).collect()))
            }
        }
    }

    /// Gram matrix of `(phi(x_1), phi'(x_1), ..., phi(x_M), phi'(x_M))`.
    pub fn gram_gamma<T: Scalar>(&self, positions: &[f64]) -> Result<Matrix<T>> {
        self.check_positions(positions)?;
        let cols = AnchorColumns::<T>::new(self, &vanishing_columns(positions))?;
        Ok(cols.gram(self))
    }

    /// Gram matrix of `(phi(x0), phi'(x0), ..., phi^(k)(x0))`.
    pub fn gram_f<T: Scalar>(&self, x0: f64, k: usize) -> Result<Matrix<T>> {
        self.kernel.check_order(k)?;
        self.check_positions(&[x0])?;
        let cols = AnchorColumns::<T>::new(self, &clustered_columns(x0, k + 1))?;
        Ok(cols.gram(self))
    }
}

/// Column layout `(x_1, 0), (x_1, 1), ..., (x_M, 0), (x_M, 1)`.
pub(crate) fn vanishing_columns(positions: &[f64]) -> Vec<(f64, usize)> {
    positions.iter().flat_map(|&x| [(x, 0), (x, 1)]).collect()
}

/// Column layout `(x0, 0), ..., (x0, n - 1)`.
pub(crate) fn clustered_columns(x0: f64, n: usize) -> Vec<(f64, usize)> {
    (0..n).map(|j| (x0, j)).collect()
}

/// The functions `t -> d2^o C(t, x)` for a fixed list of `(x, o)`, cached.
#[derive(Clone, Debug)]
pub(crate) struct AnchorColumns<T> {
    pub specs: Vec<(T, usize)>,
    /// Sample vectors `d^o phi(x)` for discrete measures.
    vectors: Option<Vec<Vec<T>>>,
}

impl<T: Scalar> AnchorColumns<T> {
    pub fn new(fw: &Framework, specs: &[(f64, usize)]) -> Result<Self> {
        let max_o = specs.iter().map(|s| s.1).max().unwrap_or(0);
        fw.kernel.check_order(max_o)?;
        let specs: Vec<(T, usize)> = specs.iter().map(|&(x, o)| (T::from_f64(x), o)).collect();
        let vectors = if fw.is_discrete() {
            let mut v = Vec::with_capacity(specs.len());
            for &(x, o) in &specs {
                v.push(fw.atom_jet(x, o)?.row(o).to_vec());
            }
            Some(v)
        } else {
            None
        };
        Ok(Self { specs, vectors })
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn vectors(&self) -> Option<&[Vec<T>]> {
        self.vectors.as_deref()
    }

    pub fn gram(&self, fw: &Framework) -> Matrix<T> {
        let n = self.len();
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = match &self.vectors {
                    Some(vecs) => fw.inner(&vecs[i], &vecs[j]),
                    None => fw.lebesgue_partial(self.specs[i].1, self.specs[j].1, self.specs[i].0, self.specs[j].0),
                };
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// `out[d][j] = d1^d d2^{o_j} C(t, x_j)` for `d = 0..=order`.
    pub fn cross(&self, fw: &Framework, t: T, order: usize) -> Result<Vec<Vec<T>>> {
        match &self.vectors {
            Some(vecs) => {
                let jet = fw.atom_jet(t, order)?;
                Ok((0..=order)
                    .map(|d| vecs.iter().map(|v| fw.inner(jet.row(d), v)).collect())
                    .collect())
            }
            None => Ok((0..=order)
                .map(|d| {
                    self.specs
                        .iter()
                        .map(|&(x, o)| fw.lebesgue_partial(d, o, t, x))
                        .collect()
                })
                .collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;

    fn laplace_two() -> Framework {
        Framework::new(
            Kernel::laplace(0.0).unwrap(),
            SamplingMeasure::discrete(vec![(1.0, 1.0), (2.0, 1.0)]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn lebesgue_diagonal_value() {
        let fw = Framework::new(Kernel::gaussian(1.0).unwrap(), SamplingMeasure::Lebesgue).unwrap();
        let v: f64 = fw.correlation(0, 0, 0.3, 0.3).unwrap();
        assert!((v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
        assert!((v - 1.2533141).abs() < 1e-7);
    }

    #[test]
    fn single_atom_value() {
        let fw = Framework::new(
            Kernel::gaussian(1.0).unwrap(),
            SamplingMeasure::discrete(vec![(2.0, 3.0)]).unwrap(),
        )
        .unwrap();
        let v: f64 = fw.correlation(0, 0, 0.0, 1.0).unwrap();
        assert!((v - 3.0 * (-5.0f64).exp()).abs() < 1e-16);
        assert!((v - 0.0202138).abs() < 1e-7);
    }

    #[test]
    fn forward_values() {
        let fw = laplace_two();
        let y = fw.forward(&SpikeConfiguration::at(&[1.0]).unwrap()).unwrap();
        let y = y.samples().unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-16);
        assert!((y[1] - (-2.0f64).exp()).abs() < 1e-16);
        let z = fw.forward(&SpikeConfiguration::new(vec![1.0], vec![0.0]).unwrap()).unwrap();
        assert_eq!(z.samples().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn gram_gamma_hand_value() {
        let fw = laplace_two();
        let g: Matrix<f64> = fw.gram_gamma(&[1.0]).unwrap();
        let e2 = (-2.0f64).exp();
        let e4 = (-4.0f64).exp();
        let expect = [[e2 + e4, -e2 - 2.0 * e4], [-e2 - 2.0 * e4, e2 + 4.0 * e4]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - expect[i][j]).abs() < 1e-16);
            }
        }
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        assert!((det / (-6.0f64).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_f_lebesgue() {
        let fw = Framework::new(Kernel::gaussian(1.0).unwrap(), SamplingMeasure::Lebesgue).unwrap();
        let f: Matrix<f64> = fw.gram_f(0.4, 1).unwrap();
        let r = (std::f64::consts::PI / 2.0).sqrt();
        assert!((f[(0, 0)] - r).abs() < 1e-15);
        assert!(f[(0, 1)].abs() < 1e-15);
        assert!((f[(1, 1)] - r).abs() < 1e-15);
    }

    #[test]
    fn invalid_frameworks() {
        assert_eq!(
            Framework::new(Kernel::laplace(0.0).unwrap(), SamplingMeasure::Lebesgue),
            Err(SpikeError::UnsupportedClosedForm)
        );
        assert_eq!(
            Framework::with_normalization(Kernel::gaussian(1.0).unwrap(), SamplingMeasure::Lebesgue, true),
            Err(SpikeError::InfiniteMass)
        );
        assert!(SamplingMeasure::discrete(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(SamplingMeasure::discrete(vec![(1.0, 0.0)]).is_err());
        let zero = SamplingMeasure::discrete(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap();
        assert!(Framework::new(Kernel::laplace(0.0).unwrap(), zero.clone()).is_err());
        assert!(Framework::with_normalization(Kernel::laplace(0.0).unwrap(), zero, true).is_ok());
    }

    #[test]
    fn order_errors() {
        let fw = laplace_two();
        assert!(matches!(
            fw.correlation::<f64>(41, 0, 1.0, 1.0),
            Err(SpikeError::DerivOrderUnsupported { .. })
        ));
        let g = Framework::new(Kernel::gaussian(1.0).unwrap(), SamplingMeasure::Lebesgue).unwrap();
        assert!(g.gram_f::<f64>(0.0, 25).is_err());
    }

    #[test]
    fn extended_correlation_matches() {
        let fw = laplace_two();
        let a: f64 = fw.correlation(2, 1, 0.7, 1.9).unwrap();
        let b: DoubleDouble = fw
            .correlation(2, 1, DoubleDouble::from_f64(0.7), DoubleDouble::from_f64(1.9))
            .unwrap();
        assert!((a - b.to_f64()).abs() < 1e-15 * a.abs());
    }

    #[test]
    fn serde_roundtrip() {
        let json = r#"{"kernel":{"family":"laplace","c":0.0},"measure":{"kind":"discrete","atoms":[[1.0,1.0],[2.0,0.5]]},"normalized":false}"#;
        let fw: Framework = serde_json::from_str(json).unwrap();
        assert_eq!(fw.measure().weights(), vec![1.0, 0.5]);
        let back: Framework = serde_json::from_str(&serde_json::to_string(&fw).unwrap()).unwrap();
        assert_eq!(back, fw);
        let bad = r#"{"kernel":{"family":"laplace"},"measure":{"kind":"lebesgue"}}"#;
        assert!(serde_json::from_str::<Framework>(bad).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }
}
