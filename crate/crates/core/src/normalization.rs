//! Atoms normalized by their mass against the sampling measure, `phi / N`.

use std::ops::Deref;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::certificates::{compute_eta_v, CertificateKind, CertificateVerdict, ScanPolicy};
use crate::dd::DoubleDouble;
use crate::determinants::{
    check_tuple_budget, det_b_in, increasing_tuples, pairwise_sum, Anchors, BorderedDeterminant,
    CauchyBinetResiduals,
};
use crate::error::{Result, SpikeError};
use crate::framework::{vanishing_columns, AnchorColumns, Framework, SpikeConfiguration};
use crate::linalg::{determinant, Matrix};
use crate::scalar::Scalar;

/// A framework whose atoms are `phi(x) / N(x)` with `N(x) = int psi(x, s) drho(s)`.
///
/// Dereferences to the underlying [`Framework`], so every certificate and
/// determinant routine accepts it directly.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedFramework {
    fw: Framework,
}

impl Deref for NormalizedFramework {
    type Target = Framework;
    fn deref(&self) -> &Framework {
        &self.fw
    }
}

impl AsRef<Framework> for NormalizedFramework {
    fn as_ref(&self) -> &Framework {
        &self.fw
    }
}

/// Wraps `fw` with normalized atoms.
pub fn normalize(fw: &Framework) -> Result<NormalizedFramework> {
    let fw = Framework::with_normalization(*fw.kernel(), fw.measure().clone(), true)?;
    Ok(NormalizedFramework { fw })
}

impl NormalizedFramework {
    /// The same kernel and measure without normalization.
    pub fn base(&self) -> Framework {
        let mut b = self.fw.clone();
        b.set_normalized(false);
        b
    }

    pub fn framework(&self) -> &Framework {
        &self.fw
    }

    /// `N(x)`, `N'(x)`, `N''(x)`.
    pub fn normalizer_derivs(&self, x: f64) -> Result<[f64; 3]> {
        let n = self.fw.normalizer::<f64>(x, 2)?;
        Ok([n[0], n[1], n[2]])
    }

    /// Confirms `N > 0` at each grid point.
    pub fn check_positive_on(&self, grid: &[f64]) -> Result<()> {
        for &x in grid {
            let n = self.fw.normalizer::<DoubleDouble>(DoubleDouble::from_f64(x), 0)?[0];
            if !(n > DoubleDouble::ZERO) {
                return Err(SpikeError::NonPositiveNormalizer { x });
            }
        }
        Ok(())
    }

    /// `C_bar(x, y)`.
    pub fn correlation(&self, k: usize, l: usize, x: f64, y: f64) -> Result<f64> {
        self.fw.correlation(k, l, x, y)
    }
}

/// Computes and certifies the normalized `eta_V`.
///
/// With exactly `2M` samples the expected outcome is `IdenticallyOne`; with
/// `2M + 1` or more, a valid verdict for the Gaussian and Laplace kernels.
pub fn normalized_degeneracy_check(
    nfw: &NormalizedFramework,
    positions: &[f64],
    policy: &ScanPolicy,
) -> Result<CertificateVerdict> {
    let spikes = SpikeConfiguration::at(positions)?;
    match compute_eta_v(nfw, &spikes) {
        Ok(c) => Ok(c.certify(policy)),
        Err(SpikeError::RankDeficient { .. }) => Ok(CertificateVerdict::rank_deficient(CertificateKind::V)),
        Err(e) => Err(e),
    }
}

/// Two ends of the normalized bordered-determinant chain at one `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BorderedChain {
    /// Bordered determinant built from `C_bar` with leading column `(1, 1, 0, ...)`.
    pub normalized: f64,
    /// Bordered determinant built from `C` with leading column `(N(t), N(x_i), N'(x_i), ...)`.
    pub weighted: f64,
    pub normalizer_t: f64,
}

impl BorderedChain {
    /// `normalized * N(t) / weighted`; independent of `t`, equal to `prod N(x_i)^-4`.
    pub fn ratio(&self) -> f64 {
        self.normalized * self.normalizer_t / self.weighted
    }
}

pub fn bordered_chain(nfw: &NormalizedFramework, positions: &[f64], t: f64) -> Result<BorderedChain> {
    type E = DoubleDouble;
    let tt = E::from_f64(t);
    let normalized = BorderedDeterminant::<E>::vanishing(nfw, positions)?.bordered_at(tt)?;

    let base = nfw.base();
    let cols = AnchorColumns::<E>::new(&base, &vanishing_columns(positions))?;
    let gram = cols.gram(&base);
    let cross = cols.cross(&base, tt, 0)?;
    let n_t = base.normalizer::<E>(tt, 0)?[0];
    let mut first = Vec::with_capacity(gram.rows());
    for &x in positions {
        let n = base.normalizer::<E>(E::from_f64(x), 1)?;
        first.push(n[0]);
        first.push(n[1]);
    }
    let size = gram.rows() + 1;
    let m = Matrix::from_fn(size, size, |i, j| match (i, j) {
        (0, 0) => n_t,
        (0, j) => cross[0][j - 1],
        (i, 0) => first[i - 1],
        (i, j) => gram[(i - 1, j - 1)],
    });
    let weighted = determinant(&m).value;
    Ok(BorderedChain {
        normalized: normalized.to_f64(),
        weighted: weighted.to_f64(),
        normalizer_t: n_t.to_f64(),
    })
}

/// `D_bar_A(S)`: sample determinant with a leading column of ones over `2M + 1` samples.
pub fn det_a_normalized_in<T: Scalar>(nfw: &NormalizedFramework, positions: &[f64], samples: &[f64]) -> Result<T> {
    let cols = vanishing_columns(positions);
    if samples.len() != cols.len() + 1 {
        return Err(SpikeError::InvalidConfig(format!(
            "normalized D_A needs {} samples, got {}",
            cols.len() + 1,
            samples.len()
        )));
    }
    let kernel = *nfw.kernel();
    let n = samples.len();
    let mut m = Matrix::zeros(n, n);
    let mut buf = vec![T::zero(); 2];
    for (r, &s) in samples.iter().enumerate() {
        m[(r, 0)] = T::one();
        for (c, &(x, o)) in cols.iter().enumerate() {
            kernel.jet(T::from_f64(x), T::from_f64(s), T::zero(), &mut buf);
            m[(r, c + 1)] = buf[o];
        }
    }
    Ok(determinant(&m).value)
}

/// Checks the normalized Gram determinant and `D_bar_V(t)` against their
/// tuple expansions.
///
/// `det G_bar * prod N(x_i)^4 = sum_{2M-tuples} w D_A^2` and
/// `D_bar_V(t) N(t) prod N(x_i)^4 = sum_{(2M+1)-tuples} w D_bar_A D_bar_B`,
/// where `D_bar_B = 2 D_B` with the smallest tuple sample as the augmented column.
pub fn normalized_cauchy_binet_check(
    nfw: &NormalizedFramework,
    positions: &[f64],
    t: f64,
) -> Result<CauchyBinetResiduals> {
    type E = DoubleDouble;
    let atoms = nfw.measure().atoms().to_vec();
    let r = 2 * positions.len();
    check_tuple_budget(atoms.len(), r + 1)?;
    let kernel = *nfw.kernel();
    let anchors = Anchors::Spikes(positions);
    let bd = BorderedDeterminant::<E>::vanishing(nfw, positions)?;
    let switch = bd.switch_radius();
    let t_eff = positions
        .iter()
        .copied()
        .find(|&x| (t - x).abs() < switch)
        .unwrap_or(t);

    let base = nfw.base();
    let mut n4 = E::one();
    for &x in positions {
        let n = base.normalizer::<E>(E::from_f64(x), 0)?[0];
        n4 *= n * n * n * n;
    }
    let n_t = base.normalizer::<E>(E::from_f64(t_eff), 0)?[0];

    let gram_terms: Vec<E> = increasing_tuples(atoms.len(), r)
        .par_iter()
        .map(|tuple| {
            let s: Vec<f64> = tuple.iter().map(|&i| atoms[i].0).collect();
            let w = tuple.iter().fold(E::one(), |acc, &i| acc * E::from_f64(atoms[i].1));
            let da = crate::determinants::det_a_in::<E>(&kernel, anchors, &s).expect("validated");
            w * da * da
        })
        .collect();
    let gram_lhs = bd.gram_determinant() * n4;
    let gram_rhs = pairwise_sum(&gram_terms);

    let d_terms: Vec<E> = increasing_tuples(atoms.len(), r + 1)
        .par_iter()
        .map(|tuple| {
            let s: Vec<f64> = tuple.iter().map(|&i| atoms[i].0).collect();
            let w = tuple.iter().fold(E::one(), |acc, &i| acc * E::from_f64(atoms[i].1));
            let da = det_a_normalized_in::<E>(nfw, positions, &s).expect("validated");
            let db = det_b_in::<E>(&kernel, anchors, t, &s[1..], Some(s[0]), switch).expect("validated");
            w * da * E::from_f64(2.0) * db
        })
        .collect();
    let d_lhs = bd.eval(t)? * n_t * n4;
    let d_rhs = if d_terms.is_empty() { E::zero() } else { pairwise_sum(&d_terms) };

    let rel = |a: E, b: E| {
        let (a, b) = (a.to_f64(), b.to_f64());
        let d = a.abs().max(b.abs());
        if d == 0.0 {
            0.0
        } else {
            (a - b).abs() / d
        }
    };
    Ok(CauchyBinetResiduals {
        gram_residual: rel(gram_lhs, gram_rhs),
        d_residual: rel(d_lhs, d_rhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::FailureReason;
    use crate::framework::SamplingMeasure;
    use crate::kernel::Kernel;

    fn gaussian(samples: &[f64]) -> NormalizedFramework {
        let fw = Framework::new(Kernel::gaussian(1.0).unwrap(), SamplingMeasure::uniform_weights(samples).unwrap()).unwrap();
        normalize(&fw).unwrap()
    }

    #[test]
    fn unit_mass_for_constant_slice() {
        // every atom sees the same kernel value: phi_bar integrates to one
        let nfw = gaussian(&[-0.5, 0.5]);
        let jet = nfw.atom_jet(0.0, 0).unwrap();
        let total: f64 = jet.row(0).iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_rescaling() {
        let nfw = gaussian(&[-1.0, 0.2, 1.3]);
        let base = nfw.base();
        for &x in &[-2.0, 0.0, 0.7, 3.1] {
            let cbar = nfw.correlation(0, 0, x, x).unwrap();
            let c: f64 = base.correlation(0, 0, x, x).unwrap();
            let n = nfw.normalizer_derivs(x).unwrap()[0];
            assert!((cbar * n * n - c).abs() < 1e-14 * c);
        }
    }

    #[test]
    fn far_tail_survives_underflow() {
        // raw kernel values underflow at x = 60, the normalized ones do not
        let nfw = gaussian(&[-1.0, 0.0, 1.0]);
        let v = nfw.correlation(0, 0, 60.0, 60.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn identically_one_with_2m_samples() {
        let nfw = gaussian(&[-0.4, 0.9]);
        let v = normalized_degeneracy_check(&nfw, &[0.3], &ScanPolicy::default()).unwrap();
        assert_eq!(v.failure_reason, Some(FailureReason::IdenticallyOne));
        assert!(v.max_deviation_from_one <= 1e-9);
    }

    #[test]
    fn valid_with_2m_plus_one_samples() {
        let nfw = gaussian(&[-0.4, 0.5, 0.9]);
        let v = normalized_degeneracy_check(&nfw, &[0.3], &ScanPolicy::default()).unwrap();
        assert!(v.valid, "{v:?}");
    }

    #[test]
    fn bordered_chain_ratio_is_constant() {
        let nfw = gaussian(&[-1.1, -0.3, 0.4, 1.2, 2.0]);
        let xs = [-0.5, 0.8];
        let expected: f64 = xs
            .iter()
            .map(|&x| nfw.normalizer_derivs(x).unwrap()[0].powi(-4))
            .product();
        for &t in &[-2.0, 0.1, 1.7, 3.0] {
            let c = bordered_chain(&nfw, &xs, t).unwrap();
            assert!((c.ratio() / expected - 1.0).abs() < 1e-10, "{t}: {c:?}");
        }
    }

    #[test]
    fn lebesgue_has_infinite_mass() {
        let fw = Framework::new(Kernel::gaussian(1.0).unwrap(), SamplingMeasure::Lebesgue).unwrap();
        assert_eq!(normalize(&fw), Err(SpikeError::InfiniteMass));
    }

    #[test]
    fn single_tuple_expansion() {
        let nfw = gaussian(&[-0.7, 0.1, 0.8]);
        let r = normalized_cauchy_binet_check(&nfw, &[0.2], 1.4).unwrap();
        assert!(r.gram_residual < 1e-12, "{r:?}");
        assert!(r.d_residual < 1e-12, "{r:?}");
    }
}
