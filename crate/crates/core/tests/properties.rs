use proptest::prelude::*;
use spikecert::certificates::{compute_eta_signed, compute_eta_v, compute_eta_v_with, Precision, ScanPolicy};
use spikecert::determinants::{det_a, det_b, det_v, det_v_signed, Anchors};
use spikecert::linalg::{determinant, symmetric_eigen};
use spikecert::normalization::normalize;
use spikecert::{DoubleDouble, Framework, Kernel, SamplingMeasure, SpikeConfiguration};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 32,
        ..ProptestConfig::default()
    }
}

/// Sorted points in `(lo, hi)` with pairwise gap at least `gap`.
fn spread(n: usize, lo: f64, hi: f64, gap: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n).prop_filter_map("points too close", move |mut v| {
        v.sort_by(f64::total_cmp);
        v.windows(2).all(|w| w[1] - w[0] >= gap).then_some(v)
    })
}

fn discrete(kernel: Kernel, samples: &[f64], weights: &[f64]) -> Framework {
    let atoms = samples.iter().copied().zip(weights.iter().copied()).collect();
    Framework::new(kernel, SamplingMeasure::discrete(atoms).unwrap()).unwrap()
}

fn unit(kernel: Kernel, samples: &[f64]) -> Framework {
    discrete(kernel, samples, &vec![1.0; samples.len()])
}

fn spikes(xs: &[f64]) -> SpikeConfiguration {
    SpikeConfiguration::new(xs.to_vec(), vec![1.0; xs.len()]).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Laplace setup: `M` spikes in (0.3, 3) and `2M` samples in (0.2, 4).
fn laplace_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=2).prop_flat_map(|m| (spread(m, 0.3, 3.0, 0.2), spread(2 * m, 0.2, 4.0, 0.1)))
}

/// Gaussian setup: `M` spikes in (-1.5, 1.5) and `2M + extra` samples in (-2.5, 2.5).
fn gaussian_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=2, 0usize..=2).prop_flat_map(|(m, extra)| (spread(m, -1.5, 1.5, 0.4), spread(2 * m + extra, -2.5, 2.5, 0.1)))
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn kernel_derivatives_match_finite_differences(k in 1usize..4, x in 0.3f64..3.0, s in 0.2f64..3.0, sigma in 0.5f64..2.0) {
        let h = 1e-5;
        for kernel in [Kernel::gaussian(sigma).unwrap(), Kernel::laplace(0.0).unwrap()] {
            let d = kernel.eval_kernel_deriv::<f64>(k, x, s).unwrap();
            let up = kernel.eval_kernel_deriv::<f64>(k - 1, x + h, s).unwrap();
            let dn = kernel.eval_kernel_deriv::<f64>(k - 1, x - h, s).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let scale = kernel.eval_kernel_deriv::<f64>(k - 1, x, s).unwrap().abs().max(d.abs()).max(1e-3);
            prop_assert!((d - fd).abs() <= 1e-6 * scale, "{kernel:?} k={k}: {d} vs {fd}");
        }
    }

    #[test]
    fn gaussian_reflection(k in 0usize..6, x in -3.0f64..3.0, s in -3.0f64..3.0, sigma in 0.5f64..2.0) {
        let kernel = Kernel::gaussian(sigma).unwrap();
        let a = kernel.eval_kernel_deriv::<f64>(k, x, s).unwrap();
        let b = kernel.eval_kernel_deriv::<f64>(k, -x, -s).unwrap();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((a - sign * b).abs() <= 1e-13 * a.abs().max(1e-300) + 1e-300);
    }

    #[test]
    fn correlation_partials_are_symmetric(
        k in 0usize..3, l in 0usize..3, x in -1.5f64..1.5, y in -1.5f64..1.5,
        samples in spread(5, -2.5, 2.5, 0.1),
    ) {
        let g = Kernel::gaussian(1.0).unwrap();
        for fw in [unit(g, &samples), Framework::new(g, SamplingMeasure::Lebesgue).unwrap()] {
            let a = fw.correlation::<f64>(k, l, x, y).unwrap();
            let b = fw.correlation::<f64>(l, k, y, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn gram_is_positive_semidefinite((pos, samples) in gaussian_case()) {
        let fw = unit(Kernel::gaussian(1.0).unwrap(), &samples);
        let g = fw.gram_gamma::<DoubleDouble>(&pos).unwrap();
        let (eig, _) = symmetric_eigen(&g);
        let top = eig.iter().map(|e| e.to_f64()).fold(0.0, f64::max);
        prop_assert!(eig.iter().all(|e| e.to_f64() >= -1e-20 * top), "{eig:?}");
    }

    #[test]
    fn certificate_invariant_under_weight_scaling(
        (pos, samples) in laplace_case(), gamma in -3.0f64..3.0, t in 0.0f64..6.0, normalized in any::<bool>(),
    ) {
        let gamma = 10f64.powf(gamma);
        let kernel = Kernel::laplace(0.0).unwrap();
        let weights = vec![1.0; samples.len()];
        let mut base = discrete(kernel, &samples, &weights);
        if normalized {
            base = normalize(&base).unwrap().framework().clone();
        }
        let scaled = base.with_scaled_weights(gamma);
        let sp = spikes(&pos);
        // extended precision so the comparison is not limited by the Gram condition
        let ext = Precision::Extended;
        let (a, b) = match (compute_eta_v_with(&base, &sp, ext), compute_eta_v_with(&scaled, &sp, ext)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(_), Err(_)) => return Ok(()),
            _ => return Err(TestCaseError::fail("rank decision changed under weight scaling")),
        };
        let (ea, eb) = (a.eval(0, t).unwrap(), b.eval(0, t).unwrap());
        prop_assert!((ea - eb).abs() <= 1e-10 * ea.abs().max(1.0), "{ea} vs {eb}");
    }

    #[test]
    fn gaussian_translation_equivariance((pos, samples) in gaussian_case(), shift in -5.0f64..5.0, t in -3.0f64..3.0) {
        let g = Kernel::gaussian(1.0).unwrap();
        let fw = unit(g, &samples);
        let moved: Vec<f64> = samples.iter().map(|s| s + shift).collect();
        let fw2 = unit(g, &moved);
        let pos2: Vec<f64> = pos.iter().map(|x| x + shift).collect();
        let (Ok(a), Ok(b)) = (compute_eta_v(&fw, &spikes(&pos)), compute_eta_v(&fw2, &spikes(&pos2))) else {
            return Ok(());
        };
        let (ea, eb) = (a.eval(0, t).unwrap(), b.eval(0, t + shift).unwrap());
        prop_assert!((ea - eb).abs() <= 1e-8 * ea.abs().max(1.0), "{ea} vs {eb}");
    }

    #[test]
    fn laplace_tuple_product_is_positive((pos, samples) in laplace_case(), t in 0.05f64..6.0) {
        prop_assume!(pos.iter().all(|x| (t - x).abs() > 1e-3));
        let kernel = Kernel::laplace(0.0).unwrap();
        let a = det_a(&kernel, Anchors::Spikes(&pos), &samples).unwrap();
        let b = det_b(&kernel, Anchors::Spikes(&pos), t, &samples, None).unwrap();
        prop_assert!(a * b > 0.0, "det_A={a} det_B={b}");
    }

    #[test]
    fn det_a_is_antisymmetric_in_samples((pos, samples) in laplace_case()) {
        let kernel = Kernel::laplace(0.0).unwrap();
        let a = det_a(&kernel, Anchors::Spikes(&pos), &samples).unwrap();
        let mut swapped = samples.clone();
        swapped.swap(0, 1);
        let b = det_a(&kernel, Anchors::Spikes(&pos), &swapped).unwrap();
        prop_assert!(rel(a, -b) <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn laplace_bordered_determinant_is_positive((pos, samples) in laplace_case(), t in 0.0f64..8.0) {
        let fw = unit(Kernel::laplace(0.0).unwrap(), &samples);
        let d = det_v(&fw, &pos, t).unwrap();
        prop_assert!(d > 0.0, "D_V({t}) = {d}");
    }

    #[test]
    fn normalization_preserves_rank_decisions((pos, samples) in gaussian_case()) {
        let fw = unit(Kernel::gaussian(1.0).unwrap(), &samples);
        let nfw = normalize(&fw).unwrap();
        let g = determinant(&fw.gram_gamma::<DoubleDouble>(&pos).unwrap()).value.to_f64();
        let gn = determinant(&nfw.gram_gamma::<DoubleDouble>(&pos).unwrap()).value.to_f64();
        // positive factor between the two: same sign, vanishing together
        prop_assert_eq!(g > 0.0, gn > 0.0);
        prop_assert_eq!(g == 0.0, gn == 0.0);
    }
}

fn signed_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..=3).prop_flat_map(|m| {
        (
            spread(m, -1.5, 1.5, 0.5),
            spread(2 * m + 1, -2.5, 2.5, 0.15),
            prop::collection::vec(prop_oneof![Just(1.0), Just(-1.0)], m),
        )
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn signed_amplitude_flip_swaps_the_determinants((pos, samples, signs) in signed_case(), t in -3.0f64..3.0) {
        prop_assume!(pos.iter().all(|x| (t - x).abs() > 1e-2));
        let fw = unit(Kernel::gaussian(1.0).unwrap(), &samples);
        let sp = SpikeConfiguration::new(pos.clone(), signs.clone()).unwrap();
        let flipped = SpikeConfiguration::new(pos, signs.iter().map(|s| -s).collect()).unwrap();
        let Ok((p, m)) = det_v_signed(&fw, &sp, t) else { return Ok(()) };
        let (fp, fm) = det_v_signed(&fw, &flipped, t).unwrap();
        prop_assert!(rel(p, -fm) <= 1e-8 || (p - -fm).abs() <= 1e-12 * p.abs().max(m.abs()), "{p} {m} / {fp} {fm}");
        prop_assert!(rel(m, -fp) <= 1e-8 || (m - -fp).abs() <= 1e-12 * p.abs().max(m.abs()), "{p} {m} / {fp} {fm}");
    }
}

/// Away from anchors and noise, the signed determinant pair has the sign pattern
/// `D+ > 0, D- < 0` exactly where `-1 < eta < 1`.
#[test]
fn signed_determinants_agree_with_certificate() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let g = Kernel::gaussian(1.0).unwrap();
    let (mut checked, mut valid) = (0usize, 0usize);
    while checked < 20 {
        let m = rng.random_range(2..=3);
        let mut pos: Vec<f64> = (0..m).map(|_| rng.random_range(-1.5..1.5)).collect();
        pos.sort_by(f64::total_cmp);
        let mut samples: Vec<f64> = (0..2 * m + rng.random_range(0..3)).map(|_| rng.random_range(-2.5..2.5)).collect();
        samples.sort_by(f64::total_cmp);
        if pos.windows(2).any(|w| w[1] - w[0] < 0.5) || samples.windows(2).any(|w| w[1] - w[0] < 0.15) {
            continue;
        }
        let signs: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let fw = unit(g, &samples);
        let sp = SpikeConfiguration::new(pos.clone(), signs).unwrap();
        let Ok(cert) = compute_eta_signed(&fw, &sp) else { continue };
        checked += 1;
        let verdict = cert.certify(&ScanPolicy::default());
        valid += verdict.valid as usize;
        let mut all_signs_ok = true;
        for i in 0..=600 {
            let t = -4.0 + 8.0 * i as f64 / 600.0;
            if pos.iter().any(|x| (t - x).abs() < 0.05) {
                continue;
            }
            let eta = cert.eval(0, t).unwrap();
            let (p, n) = det_v_signed(&fw, &sp, t).unwrap();
            if (1.0 - eta.abs()).abs() < 1e-6 || p.abs() < 1e-12 || n.abs() < 1e-12 {
                continue;
            }
            let inside = eta.abs() < 1.0;
            assert_eq!(p > 0.0 && n < 0.0, inside, "t={t} eta={eta} D+={p} D-={n}");
            all_signs_ok &= inside;
        }
        if verdict.valid {
            assert!(all_signs_ok, "valid verdict but a determinant changed sign");
        }
    }
    assert!(valid > 0 && valid < checked, "want a mix of verdicts, got {valid}/{checked}");
}
