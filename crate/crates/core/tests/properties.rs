//! Property tests: algebraic identities and round trips that must hold for
//! arbitrary well-formed inputs, driven by random generation rather than
//! frozen cases.

use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;

use circulant_sim::arith::{apply_adder, apply_qft, Backend};
use circulant_sim::circulant::{apply_circulant, CirculantSpec};
use circulant_sim::dense::{
    cyclic_convolution, dft_eigenvalues, dft_matrix, l2_distance, normalized, SignMode,
};
use circulant_sim::oracle::AmplitudeOracle;
use circulant_sim::product::ProductOracle;
use circulant_sim::state::{state_distance, Register, StateVector};

/// Random weight vector with mass bounded away from zero in every slot.
fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.05f64..1.0, n)
}

/// Random normalized state on `width` qubits, built from raw parts.
fn state(width: usize) -> impl Strategy<Value = StateVector> {
    vec((-1.0f64..1.0, -1.0f64..1.0), 1usize << width).prop_filter_map(
        "state must have usable norm",
        |parts| {
            let amps: Vec<Complex64> = parts
                .into_iter()
                .map(|(re, im)| Complex64::new(re, im))
                .collect();
            let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if n < 1e-3 {
                return None;
            }
            Some(StateVector::from_amplitudes(normalized(&amps).unwrap()).unwrap())
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The adder and its subtracting inverse cancel on any state, and both
    /// backends preserve the norm.
    #[test]
    fn adder_round_trips_and_preserves_norm(
        psi in state(4),
        backend_gate in any::<bool>(),
    ) {
        let addend = Register { offset: 0, width: 2 };
        let target = Register { offset: 2, width: 2 };
        let backend = if backend_gate { Backend::GateLevel } else { Backend::Fast };
        let mut s = psi.clone();
        apply_adder(&mut s, addend, target, false, backend, None).unwrap();
        prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
        apply_adder(&mut s, addend, target, true, backend, None).unwrap();
        let d = state_distance(&s, &psi, false).unwrap();
        prop_assert!(d <= 1e-12, "round trip distance {d}");
    }

    /// Fourier transform followed by its inverse is the identity.
    #[test]
    fn qft_round_trips(psi in state(3), backend_gate in any::<bool>()) {
        let reg = Register { offset: 0, width: 3 };
        let backend = if backend_gate { Backend::GateLevel } else { Backend::Fast };
        let mut s = psi.clone();
        apply_qft(&mut s, reg, false, backend, None).unwrap();
        prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
        apply_qft(&mut s, reg, true, backend, None).unwrap();
        let d = state_distance(&s, &psi, false).unwrap();
        prop_assert!(d <= 1e-12, "round trip distance {d}");
    }

    /// Weight loading round trip: the prepared state's probabilities are
    /// the normalized weights, and unpreparing returns to |0...0>.
    #[test]
    fn weight_oracle_probabilities_match(c in weights(8)) {
        let oracle = AmplitudeOracle::for_weights(&c).unwrap();
        let mut s = StateVector::zero_state(3).unwrap();
        let reg = Register { offset: 0, width: 3 };
        oracle.apply(&mut s, reg, false, &[]).unwrap();
        let total: f64 = c.iter().sum();
        for (a, w) in s.amplitudes().iter().zip(c.iter()) {
            prop_assert!((a.norm_sqr() - w / total).abs() <= 1e-12);
        }
        oracle.apply(&mut s, reg, true, &[]).unwrap();
        let zero = StateVector::zero_state(3).unwrap();
        prop_assert!(state_distance(&s, &zero, false).unwrap() <= 1e-12);
    }

    /// Cyclic convolution is commutative and associative.
    #[test]
    fn convolution_commutes_and_associates(
        a in weights(8),
        b in weights(8),
        c in weights(8),
    ) {
        let ab = cyclic_convolution(&a, &b).unwrap();
        let ba = cyclic_convolution(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(ba.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let ab_c = cyclic_convolution(&ab, &c).unwrap();
        let bc = cyclic_convolution(&b, &c).unwrap();
        let a_bc = cyclic_convolution(&a, &bc).unwrap();
        for (x, y) in ab_c.iter().zip(a_bc.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    /// Fourier diagonalization: C = F diag(Lambda) F† entrywise, and the
    /// largest eigenvalue magnitude of a normalized spec is Lambda_0 = 1.
    #[test]
    fn circulants_diagonalize_in_the_fourier_basis(
        c in weights(8),
        negate in any::<bool>(),
    ) {
        let sign = if negate { SignMode::NegateV0 } else { SignMode::Plain };
        let spec = CirculantSpec::new(&c, sign).unwrap();
        let f = dft_matrix(8);
        let eigs = spec.eigenvalues();
        let mut diag = circulant_sim::dense::DenseOperator::zeros(8, 8);
        for (k, lam) in eigs.iter().enumerate() {
            diag.set(k, k, *lam);
        }
        let rebuilt = f.matmul(&diag).unwrap().matmul(&f.dagger()).unwrap();
        prop_assert!(spec.dense().max_abs_diff(&rebuilt) <= 1e-10);
        if !negate {
            let top = eigs.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
            prop_assert!((top - 1.0).abs() <= 1e-10);
            prop_assert!((eigs[0].norm() - top).abs() <= 1e-10);
        }
    }

    /// Success probability identity: p equals the squared norm of the
    /// eigenvalue-weighted Fourier coefficients of the input.
    #[test]
    fn application_probability_is_the_weighted_spectrum(
        c in weights(4),
        psi in state(2),
    ) {
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let out = apply_circulant(&spec, &psi, None, None, Backend::Fast).unwrap();
        let phi = dft_matrix(4).dagger().matvec(psi.amplitudes()).unwrap();
        let p: f64 = spec
            .eigenvalues()
            .iter()
            .zip(phi.iter())
            .map(|(lam, f)| (lam * f).norm_sqr())
            .sum();
        prop_assert!((out.success_probability - p).abs() <= 1e-10);
    }

    /// Distance is invariant under a global phase in phase-invariant mode
    /// and detects it in exact mode.
    #[test]
    fn distance_modes_treat_global_phase_correctly(
        psi in state(2),
        angle in 0.3f64..3.0,
    ) {
        let rotated = StateVector::from_amplitudes(
            psi.amplitudes()
                .iter()
                .map(|a| a * Complex64::from_polar(1.0, angle))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        // The invariant-mode formula takes a square root of an inner
        // product, so unit roundoff surfaces at the 1e-8 scale.
        prop_assert!(state_distance(&psi, &rotated, true).unwrap() <= 1e-7);
        prop_assert!(state_distance(&psi, &rotated, false).unwrap() > 1e-3);
    }

    /// Product marginals do not depend on factor order.
    #[test]
    fn product_marginals_commute(a in weights(4), b in weights(4)) {
        let s1 = CirculantSpec::new(&a, SignMode::Plain).unwrap();
        let s2 = CirculantSpec::new(&b, SignMode::Plain).unwrap();
        let fwd = ProductOracle::from_specs(&[s1.clone(), s2.clone()])
            .unwrap()
            .marginals(Backend::Fast)
            .unwrap();
        let rev = ProductOracle::from_specs(&[s2, s1])
            .unwrap()
            .marginals(Backend::Fast)
            .unwrap();
        for (x, y) in fwd.iter().zip(rev.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    /// The eigenvalue sum rule: Lambda values are the Fourier transform of
    /// the weights, so inverse-transforming them returns the weights.
    #[test]
    fn eigenvalues_invert_back_to_weights(c in weights(8)) {
        let total: f64 = c.iter().sum();
        let norm_c: Vec<f64> = c.iter().map(|x| x / total).collect();
        let eigs = dft_eigenvalues(&norm_c, SignMode::Plain);
        let back = dft_matrix(8)
            .dagger()
            .matvec(&eigs)
            .unwrap()
            .iter()
            .map(|x| x / (8.0f64).sqrt())
            .collect::<Vec<_>>();
        let target: Vec<Complex64> = norm_c.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        prop_assert!(l2_distance(&back, &target) <= 1e-10);
    }
}
