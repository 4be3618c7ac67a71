//! Gate application and gate accounting.
//!
//! Two execution styles coexist. Gate-level application decomposes everything
//! into one- and two-qubit gates and feeds a [`GateTally`]; register-level
//! application (dense unitaries, permutations, diagonals on whole registers)
//! is the fast path and is never tallied. Cost claims are always made against
//! the gate-level form.

use num_complex::Complex64;
use serde::Serialize;

use crate::dense::DenseOperator;
use crate::error::{Result, SimError};
use crate::state::{Register, StateVector};

/// Unitarity tolerance for gate and register matrices.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// Counts of elementary gates by kind. Two-qubit diagonal gates (controlled
/// phases) are tracked separately because the arithmetic circuits are built
/// almost entirely from them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GateTally {
    pub single_qubit: u64,
    pub controlled_phase: u64,
    pub two_qubit_other: u64,
}

impl GateTally {
    pub fn total(&self) -> u64 {
        self.single_qubit + self.controlled_phase + self.two_qubit_other
    }

    pub fn add(&mut self, other: &GateTally) {
        self.single_qubit += other.single_qubit;
        self.controlled_phase += other.controlled_phase;
        self.two_qubit_other += other.two_qubit_other;
    }

    pub fn scaled(&self, k: u64) -> GateTally {
        GateTally {
            single_qubit: self.single_qubit * k,
            controlled_phase: self.controlled_phase * k,
            two_qubit_other: self.two_qubit_other * k,
        }
    }
}

/// One gate: a unitary on `targets`, applied where all `controls` are 1.
#[derive(Clone, Debug)]
pub struct GateOp {
    pub targets: Vec<usize>,
    pub controls: Vec<usize>,
    pub matrix: DenseOperator,
}

impl GateOp {
    pub fn single(target: usize, matrix: DenseOperator) -> Self {
        GateOp {
            targets: vec![target],
            controls: vec![],
            matrix,
        }
    }

    pub fn controlled(control: usize, target: usize, matrix: DenseOperator) -> Self {
        GateOp {
            targets: vec![target],
            controls: vec![control],
            matrix,
        }
    }

    fn qubit_count(&self) -> usize {
        self.targets.len() + self.controls.len()
    }

    fn is_diagonal(&self) -> bool {
        let d = self.matrix.rows();
        for i in 0..d {
            for j in 0..d {
                if i != j && self.matrix.get(i, j).norm() > 1e-15 {
                    return false;
                }
            }
        }
        true
    }

    /// Tally contribution of this gate.
    fn count_into(&self, tally: &mut GateTally) -> Result<()> {
        match self.qubit_count() {
            1 => tally.single_qubit += 1,
            2 => {
                if self.is_diagonal() {
                    tally.controlled_phase += 1;
                } else {
                    tally.two_qubit_other += 1;
                }
            }
            n => {
                return Err(SimError::InvalidInput(format!(
                    "tallied gates must touch at most 2 qubits, got {n}"
                )))
            }
        }
        Ok(())
    }

    pub fn inverse(&self) -> GateOp {
        GateOp {
            targets: self.targets.clone(),
            controls: self.controls.clone(),
            matrix: self.matrix.dagger(),
        }
    }
}

/// Ordered gate list over a fixed qubit count, with a formal inverse.
#[derive(Clone, Debug, Default)]
pub struct GateCircuit {
    pub ops: Vec<GateOp>,
}

impl GateCircuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, op: GateOp) {
        self.ops.push(op);
    }

    pub fn extend(&mut self, other: GateCircuit) {
        self.ops.extend(other.ops);
    }

    pub fn inverse(&self) -> GateCircuit {
        GateCircuit {
            ops: self.ops.iter().rev().map(|op| op.inverse()).collect(),
        }
    }

    /// Count gates without executing them.
    pub fn tally(&self) -> Result<GateTally> {
        let mut t = GateTally::default();
        for op in &self.ops {
            op.count_into(&mut t)?;
        }
        Ok(t)
    }

    pub fn apply(&self, state: &mut StateVector, mut tally: Option<&mut GateTally>) -> Result<()> {
        for op in &self.ops {
            state.apply_gate(
                &op.targets,
                &op.controls,
                &op.matrix,
                tally.as_deref_mut(),
            )?;
        }
        Ok(())
    }
}

fn disjoint_masks(targets: &[usize], controls: &[usize], num_qubits: usize) -> Result<(usize, usize)> {
    let mut tmask = 0usize;
    for &q in targets {
        if q >= num_qubits {
            return Err(SimError::InvalidInput(format!("qubit {q} out of range")));
        }
        let bit = 1usize << q;
        if tmask & bit != 0 {
            return Err(SimError::OverlappingQubits);
        }
        tmask |= bit;
    }
    let mut cmask = 0usize;
    for &q in controls {
        if q >= num_qubits {
            return Err(SimError::InvalidInput(format!("qubit {q} out of range")));
        }
        let bit = 1usize << q;
        if (tmask | cmask) & bit != 0 {
            return Err(SimError::OverlappingQubits);
        }
        cmask |= bit;
    }
    Ok((tmask, cmask))
}

impl StateVector {
    /// Apply a `2^k x 2^k` unitary on `targets` (bit `b` of the local index
    /// is `targets[b]`), restricted to branches where all `controls` read 1.
    /// When a tally is supplied the gate must touch at most two qubits.
    pub fn apply_gate(
        &mut self,
        targets: &[usize],
        controls: &[usize],
        matrix: &DenseOperator,
        tally: Option<&mut GateTally>,
    ) -> Result<()> {
        let k = targets.len();
        let dim = 1usize << k;
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(SimError::DimensionMismatch {
                expected: dim,
                got: matrix.rows(),
            });
        }
        let dev = matrix.unitarity_deviation();
        if dev > UNITARITY_TOLERANCE {
            return Err(SimError::NonUnitary { deviation: dev });
        }
        let (tmask, cmask) = disjoint_masks(targets, controls, self.num_qubits())?;
        if let Some(t) = tally {
            let op = GateOp {
                targets: targets.to_vec(),
                controls: controls.to_vec(),
                matrix: matrix.clone(),
            };
            op.count_into(t)?;
        }

        // Local index m maps to the global offset spread over target bits.
        let mut spread = vec![0usize; dim];
        for (m, s) in spread.iter_mut().enumerate() {
            let mut acc = 0usize;
            for (b, &q) in targets.iter().enumerate() {
                if m >> b & 1 == 1 {
                    acc |= 1 << q;
                }
            }
            *s = acc;
        }

        let size = self.len();
        let mut gathered = vec![Complex64::new(0.0, 0.0); dim];
        let amps = self.amplitudes_mut();
        for base in 0..size {
            if base & tmask != 0 || base & cmask != cmask {
                continue;
            }
            for (m, &s) in spread.iter().enumerate() {
                gathered[m] = amps[base | s];
            }
            for (m, &s) in spread.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &g) in gathered.iter().enumerate() {
                    acc += matrix.get(m, j) * g;
                }
                amps[base | s] = acc;
            }
        }
        Ok(())
    }

    /// Apply a dense unitary across one whole register (fast path, not
    /// tallied), optionally controlled on qubits and on another register
    /// holding a specific value.
    pub fn apply_register_unitary(
        &mut self,
        reg: Register,
        matrix: &DenseOperator,
        controls: &[usize],
        condition: Option<(Register, usize)>,
    ) -> Result<()> {
        let dim = reg.dim();
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(SimError::DimensionMismatch {
                expected: dim,
                got: matrix.rows(),
            });
        }
        let dev = matrix.unitarity_deviation();
        if dev > UNITARITY_TOLERANCE {
            return Err(SimError::NonUnitary { deviation: dev });
        }
        let cmask: usize = controls.iter().map(|q| 1usize << q).sum();
        if cmask & reg.mask() != 0 {
            return Err(SimError::OverlappingQubits);
        }
        if let Some((creg, _)) = condition {
            if creg.overlaps(&reg) {
                return Err(SimError::OverlappingQubits);
            }
        }
        let size = self.len();
        let mut gathered = vec![Complex64::new(0.0, 0.0); dim];
        let amps = self.amplitudes_mut();
        for base in 0..size {
            if base & reg.mask() != 0 || base & cmask != cmask {
                continue;
            }
            if let Some((creg, cval)) = condition {
                if creg.value_of(base) != cval {
                    continue;
                }
            }
            for (v, g) in gathered.iter_mut().enumerate() {
                *g = amps[base | (v << reg.offset)];
            }
            for v in 0..dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &g) in gathered.iter().enumerate() {
                    acc += matrix.get(v, j) * g;
                }
                amps[base | (v << reg.offset)] = acc;
            }
        }
        Ok(())
    }
}

pub fn h_matrix() -> DenseOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DenseOperator::from_fn(2, 2, |i, j| {
        let v = if i == 1 && j == 1 { -s } else { s };
        Complex64::new(v, 0.0)
    })
}

pub fn x_matrix() -> DenseOperator {
    DenseOperator::from_fn(2, 2, |i, j| {
        if i != j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `diag(1, e^{i phi})`.
pub fn phase_matrix(phi: f64) -> DenseOperator {
    DenseOperator::from_fn(2, 2, |i, j| {
        if i != j {
            Complex64::new(0.0, 0.0)
        } else if i == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, phi)
        }
    })
}

/// Real rotation `Ry(theta)`: `|0> -> cos(theta/2)|0> + sin(theta/2)|1>`.
pub fn ry_matrix(theta: f64) -> DenseOperator {
    let (s, c) = (theta / 2.0).sin_cos();
    DenseOperator::from_fn(2, 2, |i, j| {
        let v = match (i, j) {
            (0, 0) => c,
            (0, 1) => -s,
            (1, 0) => s,
            (1, 1) => c,
            _ => unreachable!(),
        };
        Complex64::new(v, 0.0)
    })
}

pub fn swap_matrix() -> DenseOperator {
    DenseOperator::from_fn(4, 4, |i, j| {
        let swapped = match i {
            0 => 0,
            1 => 2,
            2 => 1,
            3 => 3,
            _ => unreachable!(),
        };
        if j == swapped {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}
