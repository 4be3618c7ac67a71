//! Dense statevector, named registers, projection, and sampling.
//!
//! Qubit 0 is the least significant bit of the basis index, and a register's
//! value is read the same way relative to its own offset. Registers occupy
//! contiguous qubit ranges and never overlap.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};

/// Hard cap on dense simulation size.
pub const QUBIT_CAP: usize = 26;

/// Tolerance on the norm of externally supplied amplitude lists.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Below this probability, post-selection on an outcome is an error.
pub const POST_SELECTION_CUTOFF: f64 = 1e-14;

/// Contiguous block of qubits: `width` qubits starting at `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Register {
    pub offset: usize,
    pub width: usize,
}

impl Register {
    pub fn mask(&self) -> usize {
        ((1usize << self.width) - 1) << self.offset
    }

    pub fn dim(&self) -> usize {
        1 << self.width
    }

    #[inline]
    pub fn value_of(&self, index: usize) -> usize {
        (index >> self.offset) & ((1 << self.width) - 1)
    }

    #[inline]
    pub fn with_value(&self, index: usize, value: usize) -> usize {
        (index & !self.mask()) | (value << self.offset)
    }

    pub fn qubits(&self) -> Vec<usize> {
        (self.offset..self.offset + self.width).collect()
    }

    pub fn overlaps(&self, other: &Register) -> bool {
        self.mask() & other.mask() != 0
    }
}

/// Ordered collection of named, non-overlapping registers.
#[derive(Clone, Debug, Default)]
pub struct RegisterLayout {
    regs: Vec<(String, Register)>,
    next_offset: usize,
}

impl RegisterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a register of `width` qubits above the existing ones.
    pub fn add(mut self, name: &str, width: usize) -> Self {
        assert!(width > 0, "register width must be positive");
        assert!(
            self.regs.iter().all(|(n, _)| n != name),
            "duplicate register name {name}"
        );
        let reg = Register {
            offset: self.next_offset,
            width,
        };
        self.next_offset += width;
        self.regs.push((name.to_string(), reg));
        self
    }

    pub fn get(&self, name: &str) -> Result<Register> {
        self.regs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| *r)
            .ok_or_else(|| SimError::UnknownRegister(name.to_string()))
    }

    pub fn num_qubits(&self) -> usize {
        self.next_offset
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.regs.iter().map(|(n, _)| n.as_str())
    }
}

/// Dense complex amplitude vector over `2^n` basis states.
#[derive(Clone, Debug)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
    norm_tracked: f64,
}

fn check_cap(num_qubits: usize) -> Result<()> {
    if num_qubits > QUBIT_CAP {
        return Err(SimError::ResourceLimit {
            qubits: num_qubits,
            cap: QUBIT_CAP,
        });
    }
    Ok(())
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        Self::basis_state(num_qubits, 0)
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        check_cap(num_qubits)?;
        let size = 1usize << num_qubits;
        if index >= size {
            return Err(SimError::InvalidInput(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); size];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            num_qubits,
            amps,
            norm_tracked: 1.0,
        })
    }

    /// Build from an explicit amplitude list of power-of-two length; the
    /// norm must already be 1 within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let size = amps.len();
        if size == 0 || !size.is_power_of_two() {
            return Err(SimError::InvalidInput(format!(
                "amplitude list length {size} is not a power of two"
            )));
        }
        let num_qubits = size.trailing_zeros() as usize;
        check_cap(num_qubits)?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(SimError::OutOfTolerance {
                what: "input state norm".into(),
                value: norm,
                bound: NORM_TOLERANCE,
            });
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(StateVector {
            num_qubits,
            amps,
            norm_tracked: 1.0,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Cumulative survival probability through every projection applied so
    /// far.
    pub fn norm_tracked(&self) -> f64 {
        self.norm_tracked
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(SimError::DimensionMismatch {
                expected: self.num_qubits,
                got: other.num_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Multiply every amplitude by a scalar (used by unnormalized pipeline
    /// algebra; tracked norm is left alone).
    pub fn scale(&mut self, s: Complex64) {
        for a in self.amps.iter_mut() {
            *a *= s;
        }
    }

    /// Add `s * other` into this state elementwise.
    pub fn accumulate(&mut self, other: &StateVector, s: Complex64) -> Result<()> {
        if self.num_qubits != other.num_qubits {
            return Err(SimError::DimensionMismatch {
                expected: self.num_qubits,
                got: other.num_qubits,
            });
        }
        for (a, b) in self.amps.iter_mut().zip(other.amps.iter()) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn renormalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            for a in self.amps.iter_mut() {
                *a /= n;
            }
        }
        n
    }

    /// Marginal probability distribution over a register's values.
    pub fn register_distribution(&self, reg: Register) -> Vec<f64> {
        let mut out = vec![0.0; reg.dim()];
        for (i, a) in self.amps.iter().enumerate() {
            out[reg.value_of(i)] += a.norm_sqr();
        }
        out
    }

    /// Probability of reading `outcome` on a register.
    pub fn outcome_probability(&self, reg: Register, outcome: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| reg.value_of(*i) == outcome)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Post-select a register on `outcome`; returns the renormalized state
    /// (full dimension, register collapsed) and the outcome probability.
    pub fn project_register(&self, reg: Register, outcome: usize) -> Result<(StateVector, f64)> {
        if outcome >= reg.dim() {
            return Err(SimError::InvalidInput(format!(
                "outcome {outcome} out of range for register width {}",
                reg.width
            )));
        }
        let p = self.outcome_probability(reg, outcome);
        if p < POST_SELECTION_CUTOFF {
            return Err(SimError::PostSelectionImpossible { probability: p });
        }
        let scale = 1.0 / p.sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if reg.value_of(i) == outcome {
                    a * scale
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let mut out = StateVector {
            num_qubits: self.num_qubits,
            amps,
            norm_tracked: self.norm_tracked * p,
        };
        out.amps.shrink_to_fit();
        Ok((out, p))
    }

    /// Zero out every amplitude where the register is not at `outcome`,
    /// without renormalizing. Returns the weight kept.
    pub fn project_register_unnormalized(&mut self, reg: Register, outcome: usize) -> f64 {
        let mut kept = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if reg.value_of(i) == outcome {
                kept += a.norm_sqr();
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        kept
    }

    /// Sample a measurement outcome for a register under a fixed seed, and
    /// collapse onto it. Identical state and seed give identical outcomes.
    pub fn measure_sample(&self, reg: Register, seed: u64) -> Result<(usize, StateVector)> {
        let dist = self.register_distribution(reg);
        let total: f64 = dist.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut outcome = dist.len() - 1;
        for (v, &p) in dist.iter().enumerate() {
            acc += p;
            if u < acc {
                outcome = v;
                break;
            }
        }
        let (collapsed, _) = self.project_register(reg, outcome)?;
        Ok((outcome, collapsed))
    }

    /// Pull out one register as a standalone state. Every other qubit must
    /// be in a fixed basis state (as after projections); otherwise errors.
    pub fn extract_register(&self, reg: Register) -> Result<StateVector> {
        let rest_mask = !reg.mask() & ((1usize << self.num_qubits).wrapping_sub(1));
        let mut best_rest = 0usize;
        let mut best_weight = -1.0;
        let mut weights: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
        for (i, a) in self.amps.iter().enumerate() {
            let w = a.norm_sqr();
            if w == 0.0 {
                continue;
            }
            let rest = i & rest_mask;
            let e = weights.entry(rest).or_insert(0.0);
            *e += w;
            if *e > best_weight {
                best_weight = *e;
                best_rest = rest;
            }
        }
        let total: f64 = weights.values().sum();
        if total <= 0.0 {
            return Err(SimError::PostSelectionImpossible { probability: 0.0 });
        }
        let off_weight = total - weights.get(&best_rest).copied().unwrap_or(0.0);
        if off_weight / total > 1e-9 {
            return Err(SimError::InvalidInput(
                "register is entangled with the rest of the state".into(),
            ));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); reg.dim()];
        for v in 0..reg.dim() {
            amps[v] = self.amps[reg.with_value(best_rest, v)];
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Ok(StateVector {
            num_qubits: reg.width,
            amps,
            norm_tracked: self.norm_tracked,
        })
    }

    /// Append `extra` qubits initialized to `|0>` above the current ones.
    pub fn extended(&self, extra: usize) -> Result<StateVector> {
        check_cap(self.num_qubits + extra)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len() << extra];
        amps[..self.amps.len()].copy_from_slice(&self.amps);
        Ok(StateVector {
            num_qubits: self.num_qubits + extra,
            amps,
            norm_tracked: self.norm_tracked,
        })
    }

    /// Drop the top `extra` qubits, which must hold no weight outside
    /// `|0>`.
    pub fn shrunk(&self, extra: usize) -> Result<StateVector> {
        assert!(extra <= self.num_qubits);
        let keep = self.amps.len() >> extra;
        let stray: f64 = self.amps[keep..].iter().map(|a| a.norm_sqr()).sum();
        if stray > 1e-18 {
            return Err(SimError::InvalidInput(
                "upper qubits are not in |0> when shrinking".into(),
            ));
        }
        Ok(StateVector {
            num_qubits: self.num_qubits - extra,
            amps: self.amps[..keep].to_vec(),
            norm_tracked: self.norm_tracked,
        })
    }

    /// Replace the value of a register by a bijection of its value.
    pub fn permute_register(&mut self, reg: Register, f: impl Fn(usize) -> usize) {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 && *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let v = reg.value_of(i);
            out[reg.with_value(i, f(v))] += *a;
        }
        self.amps = out;
    }

    /// Rewrite register `b` as a function of registers `a` and `b`; for each
    /// fixed `a` the map on `b` must be a bijection.
    pub fn permute_pair(
        &mut self,
        reg_a: Register,
        reg_b: Register,
        f: impl Fn(usize, usize) -> usize,
    ) {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let va = reg_a.value_of(i);
            let vb = reg_b.value_of(i);
            out[reg_b.with_value(i, f(va, vb))] += *a;
        }
        self.amps = out;
    }

    /// Multiply each amplitude by a phase depending on a register's value;
    /// applied only where all `controls` are 1.
    pub fn phase_by_register(
        &mut self,
        reg: Register,
        controls: &[usize],
        f: impl Fn(usize) -> Complex64,
    ) {
        let cmask: usize = controls.iter().map(|q| 1usize << q).sum();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & cmask == cmask {
                *a *= f(reg.value_of(i));
            }
        }
    }
}

/// Euclidean or phase-invariant distance between two states of equal size.
pub fn state_distance(a: &StateVector, b: &StateVector, phase_invariant: bool) -> Result<f64> {
    if a.num_qubits != b.num_qubits {
        return Err(SimError::DimensionMismatch {
            expected: a.num_qubits,
            got: b.num_qubits,
        });
    }
    if phase_invariant {
        Ok(crate::dense::phase_aligned_distance(
            a.amplitudes(),
            b.amplitudes(),
        ))
    } else {
        Ok(crate::dense::l2_distance(a.amplitudes(), b.amplitudes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_zero_is_least_significant() {
        let layout = RegisterLayout::new().add("lo", 1).add("hi", 1);
        let lo = layout.get("lo").unwrap();
        let hi = layout.get("hi").unwrap();
        assert_eq!(lo.offset, 0);
        assert_eq!(hi.offset, 1);
        // Index 2 = binary 10: hi = 1, lo = 0.
        assert_eq!(lo.value_of(2), 0);
        assert_eq!(hi.value_of(2), 1);
    }

    #[test]
    fn resource_cap_is_enforced() {
        assert!(StateVector::zero_state(QUBIT_CAP.min(20)).is_ok());
        match StateVector::zero_state(QUBIT_CAP + 1) {
            Err(SimError::ResourceLimit { qubits, cap }) => {
                assert_eq!(qubits, QUBIT_CAP + 1);
                assert_eq!(cap, QUBIT_CAP);
            }
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn from_amplitudes_rejects_bad_norm() {
        let amps = vec![Complex64::new(0.9, 0.0), Complex64::new(0.0, 0.0)];
        assert!(StateVector::from_amplitudes(amps).is_err());
    }

    #[test]
    fn projection_on_equal_superposition() {
        let s = StateVector::from_amplitudes(vec![
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let reg = Register {
            offset: 0,
            width: 1,
        };
        let (out, p) = s.project_register(reg, 0).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((out.amplitudes()[0].re - 1.0).abs() < 1e-12);
        assert!((out.norm_tracked() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projection_on_impossible_outcome_errors() {
        let s = StateVector::basis_state(1, 1).unwrap();
        let reg = Register {
            offset: 0,
            width: 1,
        };
        match s.project_register(reg, 0) {
            Err(SimError::PostSelectionImpossible { .. }) => {}
            other => panic!("expected post-selection error, got {other:?}"),
        }
    }

    #[test]
    fn measurement_is_deterministic_under_a_seed() {
        let s = StateVector::from_amplitudes(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
        ])
        .unwrap();
        let reg = Register {
            offset: 0,
            width: 1,
        };
        let (o1, _) = s.measure_sample(reg, 42).unwrap();
        let (o2, _) = s.measure_sample(reg, 42).unwrap();
        assert_eq!(o1, o2);
        // A deterministic register always reads its value.
        let d = StateVector::basis_state(1, 1).unwrap();
        let (o, _) = d.measure_sample(reg, 7).unwrap();
        assert_eq!(o, 1);
    }

    #[test]
    fn measurement_frequency_tracks_probability() {
        let s = StateVector::from_amplitudes(vec![
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let reg = Register {
            offset: 0,
            width: 1,
        };
        let mut ones = 0usize;
        for seed in 0..10_000u64 {
            let (o, _) = s.measure_sample(reg, seed).unwrap();
            ones += o;
        }
        let freq = ones as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&freq), "frequency {freq}");
    }

    #[test]
    fn distance_modes_agree_on_identical_states() {
        let s = StateVector::basis_state(2, 3).unwrap();
        assert_eq!(state_distance(&s, &s, false).unwrap(), 0.0);
        assert!(state_distance(&s, &s, true).unwrap() < 1e-12);
        let mut t = s.clone();
        t.scale(Complex64::from_polar(1.0, 0.7));
        assert!(state_distance(&s, &t, false).unwrap() > 0.1);
        assert!(state_distance(&s, &t, true).unwrap() < 1e-12);
    }

    #[test]
    fn extract_register_after_projection() {
        // Build |anc=1> (x) |psi> on 1+2 qubits, psi on the low register.
        let psi = [0.5, 0.5, std::f64::consts::FRAC_1_SQRT_2, 0.0];
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        for (k, &v) in psi.iter().enumerate() {
            amps[4 + k] = Complex64::new(v, 0.0);
        }
        let s = StateVector::from_amplitudes(amps).unwrap();
        let sys = Register {
            offset: 0,
            width: 2,
        };
        let got = s.extract_register(sys).unwrap();
        for (a, &e) in got.amplitudes().iter().zip(psi.iter()) {
            assert!((a.re - e).abs() < 1e-12);
        }
    }

    #[test]
    fn extract_register_rejects_entanglement() {
        // Bell pair between qubit 0 and qubit 1.
        let amps = vec![
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ];
        let s = StateVector::from_amplitudes(amps).unwrap();
        let reg = Register {
            offset: 0,
            width: 1,
        };
        assert!(s.extract_register(reg).is_err());
    }

    #[test]
    fn permute_register_is_a_relabeling() {
        let s = StateVector::from_amplitudes(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.8, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let reg = Register {
            offset: 0,
            width: 2,
        };
        let mut t = s.clone();
        t.permute_register(reg, |v| (v + 1) % 4);
        assert!((t.amplitudes()[1].re - 0.6).abs() < 1e-15);
        assert!((t.amplitudes()[3].re - 0.8).abs() < 1e-15);
        assert!((t.norm() - 1.0).abs() < 1e-12);
    }
}
