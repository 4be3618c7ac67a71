//! Quantum Fourier transform and modular adders on registers.
//!
//! The adder works in Fourier space: rotate the target register with the
//! swap-free QFT cascade, imprint the addend through controlled phases, rotate
//! back. Skipping the swap layer halves nothing asymptotically but removes a
//! whole class of two-qubit gates; the phase schedule is simply written in
//! bit-reversed coordinates to compensate. The cascade uses
//! `l(l-1)/2` controlled phases plus `l` Hadamards, the phase block
//! `l(l+1)/2` controlled phases, so one adder costs `2l + l(l-1) + l(l+1)/2`
//! elementary gates.

use std::f64::consts::PI;

use crate::dense::dft_matrix;
use crate::error::{Result, SimError};
use crate::gates::{h_matrix, phase_matrix, swap_matrix, x_matrix, GateCircuit, GateOp, GateTally};
use crate::state::{Register, StateVector};

/// Execution strategy for register arithmetic.
///
/// `GateLevel` decomposes into one- and two-qubit gates and can be tallied;
/// `Fast` applies the equivalent permutation or dense unitary in one step.
/// Both must produce identical states up to numerical noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    GateLevel,
    Fast,
}

fn controlled_phase(a: usize, b: usize, angle: f64) -> GateOp {
    GateOp::controlled(a, b, phase_matrix(angle))
}

/// QFT cascade without the final swap layer. The full transform `F` with
/// convention `F[k][j] = exp(2 pi i j k / 2^l) / sqrt(2^l)` is this cascade
/// followed by bit reversal: cascade output qubit `i` is Fourier qubit
/// `l-1-i`.
pub fn qft_cascade_circuit(reg: Register) -> GateCircuit {
    let l = reg.width;
    let q = reg.qubits();
    let mut c = GateCircuit::new();
    for i in (0..l).rev() {
        c.push(GateOp::single(q[i], h_matrix()));
        for j in (0..i).rev() {
            c.push(controlled_phase(q[j], q[i], PI / (1u64 << (i - j)) as f64));
        }
    }
    c
}

/// Full QFT circuit: cascade plus the swap layer that undoes bit reversal.
pub fn qft_circuit(reg: Register) -> GateCircuit {
    let q = reg.qubits();
    let l = reg.width;
    let mut c = qft_cascade_circuit(reg);
    for i in 0..l / 2 {
        c.push(GateOp {
            targets: vec![q[i], q[l - 1 - i]],
            controls: vec![],
            matrix: swap_matrix(),
        });
    }
    c
}

/// Apply the QFT (`inverse = false`) or its adjoint to one register.
pub fn apply_qft(
    state: &mut StateVector,
    reg: Register,
    inverse: bool,
    backend: Backend,
    tally: Option<&mut GateTally>,
) -> Result<()> {
    match backend {
        Backend::GateLevel => {
            let c = qft_circuit(reg);
            let c = if inverse { c.inverse() } else { c };
            c.apply(state, tally)
        }
        Backend::Fast => {
            if reg.width <= 8 {
                let f = dft_matrix(reg.dim());
                let f = if inverse { f.dagger() } else { f };
                state.apply_register_unitary(reg, &f, &[], None)
            } else {
                // The dense transform costs 4^width per application; past a
                // few hundred dimensions the untallied gate cascade is the
                // faster equivalent.
                let c = qft_circuit(reg);
                let c = if inverse { c.inverse() } else { c };
                c.apply(state, None)
            }
        }
    }
}

fn check_adder_registers(addend: Register, target: Register) -> Result<()> {
    if addend.width != target.width {
        return Err(SimError::DimensionMismatch {
            expected: addend.width,
            got: target.width,
        });
    }
    if addend.overlaps(&target) {
        return Err(SimError::OverlappingQubits);
    }
    Ok(())
}

/// Circuit for `|j>|k> -> |j>|k + j mod 2^l>` (or `k - j` when `subtract`).
pub fn adder_circuit(addend: Register, target: Register, subtract: bool) -> Result<GateCircuit> {
    check_adder_registers(addend, target)?;
    let l = target.width;
    let aq = addend.qubits();
    let tq = target.qubits();
    let sign = if subtract { -1.0 } else { 1.0 };
    let mut c = qft_cascade_circuit(target);
    // Cascade output qubit b is Fourier qubit l-1-b, so addend bit a shifts
    // it by 2^a / 2^(b+1) of a turn; pairs with a > b contribute full turns.
    for a in 0..l {
        for b in a..l {
            let angle = sign * 2.0 * PI * (1u64 << a) as f64 / (1u64 << (b + 1)) as f64;
            c.push(controlled_phase(aq[a], tq[b], angle));
        }
    }
    c.extend(qft_cascade_circuit(target).inverse());
    Ok(c)
}

/// Apply `|j>|k> -> |j>|k +- j mod 2^l>` with the chosen backend.
pub fn apply_adder(
    state: &mut StateVector,
    addend: Register,
    target: Register,
    subtract: bool,
    backend: Backend,
    tally: Option<&mut GateTally>,
) -> Result<()> {
    match backend {
        Backend::GateLevel => adder_circuit(addend, target, subtract)?.apply(state, tally),
        Backend::Fast => {
            check_adder_registers(addend, target)?;
            let n = target.dim();
            state.permute_pair(addend, target, |j, k| {
                if subtract {
                    (k + n - j) % n
                } else {
                    (k + j) % n
                }
            });
            Ok(())
        }
    }
}

/// Adder against a compile-time constant: the controlled phases collapse to
/// plain phase gates on the bits where the constant is 1.
pub fn constant_adder_circuit(target: Register, constant: usize, subtract: bool) -> GateCircuit {
    let l = target.width;
    let tq = target.qubits();
    let sign = if subtract { -1.0 } else { 1.0 };
    let mut c = qft_cascade_circuit(target);
    for a in 0..l {
        if constant >> a & 1 == 0 {
            continue;
        }
        for b in a..l {
            let angle = sign * 2.0 * PI * (1u64 << a) as f64 / (1u64 << (b + 1)) as f64;
            c.push(GateOp::single(tq[b], phase_matrix(angle)));
        }
    }
    c.extend(qft_cascade_circuit(target).inverse());
    c
}

/// Apply `|k> -> |k +- constant mod 2^l>` with the chosen backend.
pub fn apply_constant_add(
    state: &mut StateVector,
    target: Register,
    constant: usize,
    subtract: bool,
    backend: Backend,
    tally: Option<&mut GateTally>,
) -> Result<()> {
    let n = target.dim();
    let constant = constant % n;
    match backend {
        Backend::GateLevel => {
            constant_adder_circuit(target, constant, subtract).apply(state, tally)
        }
        Backend::Fast => {
            state.permute_register(target, |k| {
                if subtract {
                    (k + n - constant) % n
                } else {
                    (k + constant) % n
                }
            });
            Ok(())
        }
    }
}

/// Flip every qubit of a register: `|k> -> |2^l - 1 - k>`.
pub fn apply_bitflip_all(
    state: &mut StateVector,
    reg: Register,
    backend: Backend,
    tally: Option<&mut GateTally>,
) -> Result<()> {
    match backend {
        Backend::GateLevel => {
            let mut c = GateCircuit::new();
            for q in reg.qubits() {
                c.push(GateOp::single(q, x_matrix()));
            }
            c.apply(state, tally)
        }
        Backend::Fast => {
            let top = reg.dim() - 1;
            state.permute_register(reg, |v| top ^ v);
            Ok(())
        }
    }
}

/// Elementary-gate totals of the adder for each register width in `widths`.
pub fn adder_gate_counts(widths: impl IntoIterator<Item = usize>) -> Result<Vec<(usize, u64)>> {
    let mut out = Vec::new();
    for l in widths {
        let addend = Register { offset: 0, width: l };
        let target = Register { offset: l, width: l };
        let tally = adder_circuit(addend, target, false)?.tally()?;
        out.push((l, tally.total()));
    }
    Ok(out)
}

/// Least-squares slope of `log(count)` against `log(width)`.
pub fn fitted_exponent(points: &[(usize, u64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(l, c) in points {
        let x = (l as f64).ln();
        let y = (c as f64).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::state_distance;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(num_qubits: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<Complex64> = (0..1usize << num_qubits)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    #[test]
    fn qft_of_basis_state_matches_dft_column() {
        let reg = Register { offset: 0, width: 2 };
        let mut s = StateVector::basis_state(2, 1).unwrap();
        apply_qft(&mut s, reg, false, Backend::GateLevel, None).unwrap();
        let expected = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, -0.5),
        ];
        for (a, e) in s.amplitudes().iter().zip(expected.iter()) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn gate_level_qft_matches_dense_dft_on_random_states() {
        for l in 1..=4 {
            let reg = Register { offset: 0, width: l };
            let mut a = random_state(l, 100 + l as u64);
            let mut b = a.clone();
            apply_qft(&mut a, reg, false, Backend::GateLevel, None).unwrap();
            apply_qft(&mut b, reg, false, Backend::Fast, None).unwrap();
            assert!(state_distance(&a, &b, false).unwrap() < 1e-12);
        }
    }

    #[test]
    fn qft_inverse_roundtrips() {
        let reg = Register { offset: 1, width: 3 };
        let mut s = random_state(5, 7);
        let reference = s.clone();
        apply_qft(&mut s, reg, false, Backend::GateLevel, None).unwrap();
        apply_qft(&mut s, reg, true, Backend::GateLevel, None).unwrap();
        assert!(state_distance(&s, &reference, false).unwrap() < 1e-12);
    }

    #[test]
    fn adder_adds_basis_values() {
        let addend = Register { offset: 0, width: 3 };
        let target = Register { offset: 3, width: 3 };
        for j in 0..8usize {
            for k in 0..8usize {
                let mut s = StateVector::basis_state(6, j | (k << 3)).unwrap();
                apply_adder(&mut s, addend, target, false, Backend::GateLevel, None).unwrap();
                let expect = j | (((k + j) % 8) << 3);
                assert!(
                    s.amplitudes()[expect].norm() > 1.0 - 1e-10,
                    "j={j} k={k}"
                );
            }
        }
    }

    #[test]
    fn subtractor_inverts_adder() {
        let addend = Register { offset: 0, width: 2 };
        let target = Register { offset: 2, width: 2 };
        let mut s = random_state(4, 42);
        let reference = s.clone();
        apply_adder(&mut s, addend, target, false, Backend::GateLevel, None).unwrap();
        apply_adder(&mut s, addend, target, true, Backend::GateLevel, None).unwrap();
        assert!(state_distance(&s, &reference, false).unwrap() < 1e-12);
    }

    #[test]
    fn adder_backends_agree_on_superpositions() {
        let addend = Register { offset: 0, width: 3 };
        let target = Register { offset: 3, width: 3 };
        for seed in 0..5 {
            let mut a = random_state(6, 1000 + seed);
            let mut b = a.clone();
            apply_adder(&mut a, addend, target, true, Backend::GateLevel, None).unwrap();
            apply_adder(&mut b, addend, target, true, Backend::Fast, None).unwrap();
            assert!(state_distance(&a, &b, false).unwrap() < 1e-12);
        }
    }

    #[test]
    fn constant_adder_matches_register_adder() {
        let target = Register { offset: 0, width: 3 };
        for k in 0..8usize {
            for c in 0..8usize {
                let mut s = StateVector::basis_state(3, k).unwrap();
                apply_constant_add(&mut s, target, c, true, Backend::GateLevel, None).unwrap();
                let expect = (k + 8 - c) % 8;
                assert!(s.amplitudes()[expect].norm() > 1.0 - 1e-10, "k={k} c={c}");
            }
        }
        let mut a = random_state(3, 77);
        let mut b = a.clone();
        apply_constant_add(&mut a, target, 5, false, Backend::GateLevel, None).unwrap();
        apply_constant_add(&mut b, target, 5, false, Backend::Fast, None).unwrap();
        assert!(state_distance(&a, &b, false).unwrap() < 1e-12);
    }

    #[test]
    fn bitflip_reverses_register_order() {
        let reg = Register { offset: 0, width: 2 };
        let mut a = random_state(2, 3);
        let mut b = a.clone();
        apply_bitflip_all(&mut a, reg, Backend::GateLevel, None).unwrap();
        apply_bitflip_all(&mut b, reg, Backend::Fast, None).unwrap();
        assert!(state_distance(&a, &b, false).unwrap() < 1e-14);
        let amps = a.amplitudes();
        let orig = random_state(2, 3);
        for v in 0..4 {
            assert!((amps[v] - orig.amplitudes()[3 - v]).norm() < 1e-15);
        }
    }

    #[test]
    fn adder_cost_follows_the_closed_form() {
        let counts = adder_gate_counts(2..=10).unwrap();
        for &(l, total) in &counts {
            let expected = 2 * l as u64 + (l * (l - 1)) as u64 + (l * (l + 1) / 2) as u64;
            assert_eq!(total, expected);
        }
        assert_eq!(counts[0], (2, 9));
        assert_eq!(counts[1], (3, 18));
    }

    #[test]
    fn adder_tally_is_all_hadamards_and_controlled_phases() {
        let addend = Register { offset: 0, width: 4 };
        let target = Register { offset: 4, width: 4 };
        let tally = adder_circuit(addend, target, false)
            .unwrap()
            .tally()
            .unwrap();
        assert_eq!(tally.single_qubit, 8);
        assert_eq!(tally.two_qubit_other, 0);
        assert_eq!(tally.controlled_phase, tally.total() - 8);
    }

    #[test]
    fn fitted_exponent_recovers_a_power_law() {
        let pts: Vec<(usize, u64)> = (2..=9).map(|l| (l, (l * l * l) as u64)).collect();
        assert!((fitted_exponent(&pts) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn adder_exponent_sits_in_the_quadratic_band() {
        let counts = adder_gate_counts(2..=10).unwrap();
        let e = fitted_exponent(&counts);
        assert!(e > 1.8 && e < 2.2, "exponent {e}");
    }
}
