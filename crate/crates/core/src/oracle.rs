//! Amplitude-loading oracles.
//!
//! `AmplitudeOracle` loads an arbitrary normalized vector onto a register by
//! recursive rotation: each level rotates one qubit by the conditional
//! probability mass of its subtree, then a diagonal restores the phases. The
//! whole construction is cached as one dense unitary and applied through the
//! register-wide path; an oracle call is a single unit in every cost account,
//! so it never contributes to gate tallies.
//!
//! `prepare_unary_weights` is the other loader: a chain of K controlled
//! rotations that fills a register with the unary-encoded, factorially
//! damped weights used by the truncated-Taylor evolution.

use std::cell::Cell;

use num_complex::Complex64;

use crate::dense::DenseOperator;
use crate::error::{Result, SimError};
use crate::gates::ry_matrix;
use crate::state::{Register, StateVector};

/// Squared-mass threshold below which a subtree is treated as empty.
const MASS_CUTOFF: f64 = 1e-28;

/// A unitary that maps `|0^L>` to a stored amplitude vector.
#[derive(Clone, Debug)]
pub struct AmplitudeOracle {
    width: usize,
    forward: DenseOperator,
    target: Vec<Complex64>,
    calls: Cell<u64>,
}

impl AmplitudeOracle {
    /// Build the loader for a normalized complex vector of power-of-two
    /// length. Norm must be 1 within 1e-10.
    pub fn for_amplitudes(amps: &[Complex64]) -> Result<Self> {
        let n = amps.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(SimError::InvalidInput(format!(
                "oracle needs a power-of-two vector, got length {n}"
            )));
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-10 {
            return Err(SimError::InvalidInput(format!(
                "oracle amplitudes must be normalized, got squared norm {norm2}"
            )));
        }
        let width = n.trailing_zeros() as usize;

        // mass[d][s]: probability mass of indices whose top d bits read s.
        let mut mass: Vec<Vec<f64>> = Vec::with_capacity(width + 1);
        mass.push(vec![norm2]);
        for d in 1..=width {
            let shift = width - d;
            let mut level = vec![0.0; 1 << d];
            for (v, a) in amps.iter().enumerate() {
                level[v >> shift] += a.norm_sqr();
            }
            mass.push(level);
        }

        let mut forward = DenseOperator::identity(n);
        for d in 0..width {
            // Rotate qubit width-1-d inside each prefix block of size 2^(width-d).
            let block = 1usize << (width - d);
            let half = block >> 1;
            let mut level = DenseOperator::zeros(n, n);
            for s in 0..1usize << d {
                let m = mass[d][s];
                let base = s * block;
                if m < MASS_CUTOFF {
                    for v in 0..block {
                        level.set(base + v, base + v, Complex64::new(1.0, 0.0));
                    }
                    continue;
                }
                let cos = (mass[d + 1][2 * s] / m).sqrt().min(1.0);
                let theta = 2.0 * cos.acos();
                let rot = ry_matrix(theta);
                // Ry acts on the block's top bit; lower bits ride along.
                for hi_out in 0..2 {
                    for hi_in in 0..2 {
                        let e = rot.get(hi_out, hi_in);
                        if e.norm_sqr() == 0.0 {
                            continue;
                        }
                        for lo in 0..half {
                            level.set(base + hi_out * half + lo, base + hi_in * half + lo, e);
                        }
                    }
                }
            }
            forward = level.matmul(&forward)?;
        }

        // Phase diagonal recovers arguments lost in the magnitude tree.
        let mut diag = DenseOperator::zeros(n, n);
        for (v, a) in amps.iter().enumerate() {
            let phase = if a.norm_sqr() < MASS_CUTOFF {
                Complex64::new(1.0, 0.0)
            } else {
                a / a.norm()
            };
            diag.set(v, v, phase);
        }
        let forward = diag.matmul(&forward)?;

        let dev = forward.unitarity_deviation();
        if dev > 1e-10 {
            return Err(SimError::NonUnitary { deviation: dev });
        }
        for (v, a) in amps.iter().enumerate() {
            if (forward.get(v, 0) - a).norm() > 1e-12 {
                return Err(SimError::OutOfTolerance {
                    what: "oracle column reconstruction".into(),
                    value: (forward.get(v, 0) - a).norm(),
                    bound: 1e-12,
                });
            }
        }

        Ok(AmplitudeOracle {
            width,
            forward,
            target: amps.to_vec(),
            calls: Cell::new(0),
        })
    }

    /// Build from nonnegative weights: normalizes to a probability vector and
    /// loads its square roots. Rejects negative entries.
    pub fn for_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| *w < 0.0) {
            return Err(SimError::InvalidInput(
                "coefficient oracle weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(SimError::InvalidInput(
                "coefficient oracle weights must not all vanish".into(),
            ));
        }
        let amps: Vec<Complex64> = weights
            .iter()
            .map(|w| Complex64::new((w / total).sqrt(), 0.0))
            .collect();
        Self::for_amplitudes(&amps)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The vector this oracle produces from `|0^L>`.
    pub fn target(&self) -> &[Complex64] {
        &self.target
    }

    pub fn unitary(&self) -> &DenseOperator {
        &self.forward
    }

    /// Apply the oracle (or its inverse) on one register, optionally under
    /// plain qubit controls. Each invocation counts as one oracle call.
    pub fn apply(
        &self,
        state: &mut StateVector,
        reg: Register,
        inverse: bool,
        controls: &[usize],
    ) -> Result<()> {
        if reg.width != self.width {
            return Err(SimError::DimensionMismatch {
                expected: self.width,
                got: reg.width,
            });
        }
        let u = if inverse {
            self.forward.dagger()
        } else {
            self.forward.clone()
        };
        self.calls.set(self.calls.get() + 1);
        state.apply_register_unitary(reg, &u, controls, None)
    }

    /// Oracle invocations since construction or the last reset.
    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn reset_calls(&self) {
        self.calls.set(0);
    }
}

/// Load `sqrt(ratio^k / k!)`-weighted unary states: the register ends in
/// `sum_k a_k |1^k 0^(K-k)>` with `a_k` proportional to `sqrt(ratio^k/k!)`,
/// `k = 0..=K`. Built as K single-qubit rotations, each conditioned on its
/// predecessor, so invalid unary patterns are never populated.
pub fn prepare_unary_weights(
    state: &mut StateVector,
    reg: Register,
    ratio: f64,
    inverse: bool,
    controls: &[usize],
) -> Result<()> {
    let k_order = reg.width;
    if ratio <= 0.0 || ratio > std::f64::consts::LN_2 + 1e-9 {
        return Err(SimError::InvalidInput(format!(
            "unary weight ratio {ratio} outside (0, ln 2]"
        )));
    }
    // tail[k] = sum_{m=k}^{K} ratio^m/m!; the k-th rotation moves the
    // remaining tail mass one qubit further.
    let mut terms = vec![0.0f64; k_order + 1];
    let mut t = 1.0;
    for (k, slot) in terms.iter_mut().enumerate() {
        if k > 0 {
            t *= ratio / k as f64;
        }
        *slot = t;
    }
    let mut tail = vec![0.0f64; k_order + 2];
    for k in (0..=k_order).rev() {
        tail[k] = tail[k + 1] + terms[k];
    }

    let q = reg.qubits();
    let mut ops: Vec<(usize, Vec<usize>, DenseOperator)> = Vec::with_capacity(k_order);
    for k in 1..=k_order {
        // P(qubit k-1 flips | predecessors set) = tail_{k} / tail_{k-1}.
        let sin = (tail[k] / tail[k - 1]).sqrt().min(1.0);
        let theta = 2.0 * sin.asin();
        let mut ctrl: Vec<usize> = controls.to_vec();
        if k > 1 {
            ctrl.push(q[k - 2]);
        }
        ops.push((q[k - 1], ctrl, ry_matrix(theta)));
    }
    if inverse {
        for (target, ctrl, rot) in ops.into_iter().rev() {
            state.apply_gate(&[target], &ctrl, &rot.dagger(), None)?;
        }
    } else {
        for (target, ctrl, rot) in ops {
            state.apply_gate(&[target], &ctrl, &rot, None)?;
        }
    }
    Ok(())
}

/// The exact unary weight vector `sqrt(ratio^k/k!)/sqrt(tail)` for checks.
pub fn unary_weight_amplitudes(k_order: usize, ratio: f64) -> Vec<f64> {
    let mut terms = vec![0.0f64; k_order + 1];
    let mut t = 1.0;
    for (k, slot) in terms.iter_mut().enumerate() {
        if k > 0 {
            t *= ratio / k as f64;
        }
        *slot = t;
    }
    let total: f64 = terms.iter().sum();
    terms.iter().map(|t| (t / total).sqrt()).collect()
}

/// Index of the unary pattern `|1^k 0^(K-k)>` inside a K-qubit register.
pub fn unary_pattern(k: usize) -> usize {
    (1usize << k) - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_normalized(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let norm: f64 = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        raw.into_iter().map(|a| a / norm).collect()
    }

    #[test]
    fn basis_vector_oracle_is_identity_on_zero() {
        let amps = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let oracle = AmplitudeOracle::for_amplitudes(&amps).unwrap();
        let mut s = StateVector::zero_state(2).unwrap();
        let reg = Register { offset: 0, width: 2 };
        oracle.apply(&mut s, reg, false, &[]).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_superposition_loads_exactly() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = vec![
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let oracle = AmplitudeOracle::for_amplitudes(&amps).unwrap();
        let mut s = StateVector::zero_state(2).unwrap();
        let reg = Register { offset: 0, width: 2 };
        oracle.apply(&mut s, reg, false, &[]).unwrap();
        for (a, e) in s.amplitudes().iter().zip(amps.iter()) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn random_sixteen_vector_round_trips() {
        let amps = random_normalized(16, 9);
        let oracle = AmplitudeOracle::for_amplitudes(&amps).unwrap();
        let mut s = StateVector::zero_state(4).unwrap();
        let reg = Register { offset: 0, width: 4 };
        oracle.apply(&mut s, reg, false, &[]).unwrap();
        for (a, e) in s.amplitudes().iter().zip(amps.iter()) {
            assert!((a - e).norm() < 1e-12, "loading mismatch");
        }
        oracle.apply(&mut s, reg, true, &[]).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-10);
        assert_eq!(oracle.calls(), 2);
    }

    #[test]
    fn oracle_inverse_is_identity_on_random_states() {
        let oracle = AmplitudeOracle::for_amplitudes(&random_normalized(8, 21)).unwrap();
        let reg = Register { offset: 0, width: 3 };
        let start = random_normalized(8, 22);
        let mut s = StateVector::from_amplitudes(start.clone()).unwrap();
        oracle.apply(&mut s, reg, false, &[]).unwrap();
        oracle.apply(&mut s, reg, true, &[]).unwrap();
        for (a, e) in s.amplitudes().iter().zip(start.iter()) {
            assert!((a - e).norm() < 1e-11);
        }
    }

    #[test]
    fn weight_oracle_round_trips_probabilities() {
        let weights = [0.625, 0.125, 0.125, 0.125];
        let oracle = AmplitudeOracle::for_weights(&weights).unwrap();
        for (v, w) in weights.iter().enumerate() {
            let a = oracle.target()[v];
            assert!((a.norm_sqr() - w).abs() < 1e-12);
            assert!(a.im.abs() < 1e-15);
        }
    }

    #[test]
    fn negative_weights_are_rejected() {
        assert!(AmplitudeOracle::for_weights(&[0.5, -0.1, 0.6]).is_err());
    }

    #[test]
    fn unnormalized_amplitudes_are_rejected() {
        let amps = vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)];
        assert!(AmplitudeOracle::for_amplitudes(&amps).is_err());
    }

    #[test]
    fn controlled_oracle_only_loads_on_control_one() {
        let oracle = AmplitudeOracle::for_weights(&[0.5, 0.5]).unwrap();
        let reg = Register { offset: 0, width: 1 };
        // Control qubit 1 in (|0>+|1>)/sqrt(2).
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut s = StateVector::from_amplitudes(vec![
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        oracle.apply(&mut s, reg, false, &[1]).unwrap();
        let a = s.amplitudes();
        assert!((a[0].re - h).abs() < 1e-12);
        assert!((a[2].re - 0.5).abs() < 1e-12);
        assert!((a[3].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unary_weights_match_direct_formula_at_ln2() {
        let ratio = std::f64::consts::LN_2;
        let reg = Register { offset: 0, width: 3 };
        let mut s = StateVector::zero_state(3).unwrap();
        prepare_unary_weights(&mut s, reg, ratio, false, &[]).unwrap();
        let expected = unary_weight_amplitudes(3, ratio);
        for k in 0..=3 {
            let amp = s.amplitudes()[unary_pattern(k)];
            assert!((amp.re - expected[k]).abs() < 1e-12, "k={k}");
            assert!(amp.im.abs() < 1e-15);
        }
        // Direct evaluation of the k-th weight: ratio^k / k!.
        let raw: Vec<f64> = (0..=3u32)
            .map(|k| ratio.powi(k as i32) / (1..=k).map(f64::from).product::<f64>())
            .collect();
        let total: f64 = raw.iter().sum();
        for k in 0..=3usize {
            assert!((expected[k] - (raw[k] / total).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn unary_register_stays_in_unary_span() {
        let reg = Register { offset: 0, width: 4 };
        for ratio in [0.05, 0.3, std::f64::consts::LN_2] {
            let mut s = StateVector::zero_state(4).unwrap();
            prepare_unary_weights(&mut s, reg, ratio, false, &[]).unwrap();
            let valid: Vec<usize> = (0..=4).map(unary_pattern).collect();
            let stray: f64 = s
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(v, _)| !valid.contains(v))
                .map(|(_, a)| a.norm_sqr())
                .sum();
            assert!(stray < 1e-12, "ratio {ratio} leaks {stray}");
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unary_inverse_restores_zero() {
        let reg = Register { offset: 1, width: 3 };
        let mut s = StateVector::zero_state(5).unwrap();
        prepare_unary_weights(&mut s, reg, 0.4, false, &[]).unwrap();
        prepare_unary_weights(&mut s, reg, 0.4, true, &[]).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unary_ratio_bounds_are_enforced() {
        let reg = Register { offset: 0, width: 2 };
        let mut s = StateVector::zero_state(2).unwrap();
        assert!(prepare_unary_weights(&mut s, reg, 0.0, false, &[]).is_err());
        assert!(prepare_unary_weights(&mut s, reg, 0.8, false, &[]).is_err());
    }
}
