//! Linear combinations of unitaries.
//!
//! The core object is the sandwich `O† . select(W) . O` acting on an ancilla
//! block and a system: preparing weights on the ancilla, branching the
//! indexed unitaries, unpreparing and projecting the whole ancilla block to
//! zero leaves `sum_j alpha_j W_j` applied to the system. Everything else
//! here is amplification of that projection: standard amplitude
//! amplification when the combination is far from unitary, the one-step
//! oblivious variant when it is close.
//!
//! Oracle invocations and explicit block unitaries are unit-cost resources;
//! only the arithmetic inside `select` feeds the gate tally.

use num_complex::Complex64;

use crate::arith::{apply_adder, Backend};
use crate::dense::DenseOperator;
use crate::error::{Result, SimError};
use crate::gates::{phase_matrix, GateTally};
use crate::oracle::AmplitudeOracle;
use crate::state::{Register, StateVector};

/// Weight below which an index value is considered unpopulated when checking
/// that every branch has a defined action.
const BRANCH_CUTOFF: f64 = 1e-20;

/// One indexed action inside `select(W)`.
#[derive(Clone)]
pub enum SelectAction {
    /// `|j>|k> -> |j>|k - j mod 2^L>`: the cyclic-shift family `V_j`.
    SubtractInto { index: Register, target: Register },
    /// Adjoint shift family: `|j>|k> -> |j>|k + j mod 2^L>`.
    AddInto { index: Register, target: Register },
    /// Diagonal phase `exp(i j theta)` on the index, one gate per qubit.
    PhasePerIndex { index: Register, theta: f64 },
    /// Branch `|j>` applies `blocks[j]` to `target`. Blocks are unit-cost.
    BlockUnitary {
        index: Register,
        target: Register,
        blocks: Vec<DenseOperator>,
    },
}

impl SelectAction {
    pub(crate) fn inverse(&self) -> SelectAction {
        match self {
            SelectAction::SubtractInto { index, target } => SelectAction::AddInto {
                index: *index,
                target: *target,
            },
            SelectAction::AddInto { index, target } => SelectAction::SubtractInto {
                index: *index,
                target: *target,
            },
            SelectAction::PhasePerIndex { index, theta } => SelectAction::PhasePerIndex {
                index: *index,
                theta: -theta,
            },
            SelectAction::BlockUnitary {
                index,
                target,
                blocks,
            } => SelectAction::BlockUnitary {
                index: *index,
                target: *target,
                blocks: blocks.iter().map(|b| b.dagger()).collect(),
            },
        }
    }
}

/// The indexed unitary family `W`, as a sequence of commuting-register
/// actions. Garbage registers (prepared and unprepared by the oracle, ignored
/// by `select`) need no entry here: they simply ride inside the ancilla
/// block.
#[derive(Clone, Default)]
pub struct UnitaryFamily {
    pub actions: Vec<SelectAction>,
}

/// Apply `select(W)`: every populated index branch gets its action.
pub fn select_apply(
    state: &mut StateVector,
    family: &UnitaryFamily,
    backend: Backend,
    mut tally: Option<&mut GateTally>,
) -> Result<()> {
    for action in &family.actions {
        apply_action(state, action, backend, tally.as_deref_mut())?;
    }
    Ok(())
}

fn apply_action(
    state: &mut StateVector,
    action: &SelectAction,
    backend: Backend,
    mut tally: Option<&mut GateTally>,
) -> Result<()> {
    match action {
        SelectAction::SubtractInto { index, target } => {
            apply_adder(state, *index, *target, true, backend, tally)
        }
        SelectAction::AddInto { index, target } => {
            apply_adder(state, *index, *target, false, backend, tally)
        }
        SelectAction::PhasePerIndex { index, theta } => {
            match backend {
                Backend::GateLevel => {
                    // exp(i j theta) factors over the bits of j.
                    for (a, q) in index.qubits().into_iter().enumerate() {
                        state.apply_gate(
                            &[q],
                            &[],
                            &phase_matrix(theta * (1u64 << a) as f64),
                            tally.as_deref_mut(),
                        )?;
                    }
                    Ok(())
                }
                Backend::Fast => {
                    state.phase_by_register(*index, &[], |j| {
                        Complex64::from_polar(1.0, theta * j as f64)
                    });
                    Ok(())
                }
            }
        }
        SelectAction::BlockUnitary {
            index,
            target,
            blocks,
        } => {
            let dist = state.register_distribution(*index);
            for (j, w) in dist.iter().enumerate() {
                if *w > BRANCH_CUTOFF && j >= blocks.len() {
                    return Err(SimError::InvalidInput(format!(
                        "index value {j} is populated but has no block unitary"
                    )));
                }
            }
            for (j, block) in blocks.iter().enumerate() {
                if dist.get(j).copied().unwrap_or(0.0) <= BRANCH_CUTOFF {
                    continue;
                }
                state.apply_register_unitary(*target, block, &[], Some((*index, j)))?;
            }
            Ok(())
        }
    }
}

/// Full description of one LCU sandwich.
pub struct SandwichSpec<'a> {
    /// Prepares the weight amplitudes on `oracle_reg` (may include garbage).
    pub oracle: &'a AmplitudeOracle,
    pub oracle_reg: Register,
    pub family: &'a UnitaryFamily,
    /// When set, insert `I - 2|0><0|` on this register between `select` and
    /// the unprepare: the j=0 term enters the combination with a minus sign.
    pub negate_zero_index: Option<Register>,
}

/// Apply the sandwich as a unitary (no projection): `O† S select(W) O`, or
/// its adjoint.
pub fn apply_sandwich(
    state: &mut StateVector,
    spec: &SandwichSpec,
    adjoint: bool,
    backend: Backend,
    mut tally: Option<&mut GateTally>,
) -> Result<()> {
    let reflect = |state: &mut StateVector| {
        if let Some(reg) = spec.negate_zero_index {
            state.phase_by_register(reg, &[], |j| {
                if j == 0 {
                    Complex64::new(-1.0, 0.0)
                } else {
                    Complex64::new(1.0, 0.0)
                }
            });
        }
    };
    if !adjoint {
        spec.oracle.apply(state, spec.oracle_reg, false, &[])?;
        select_apply(state, spec.family, backend, tally.as_deref_mut())?;
        reflect(state);
        spec.oracle.apply(state, spec.oracle_reg, true, &[])?;
    } else {
        spec.oracle.apply(state, spec.oracle_reg, false, &[])?;
        reflect(state);
        let inverse = UnitaryFamily {
            actions: spec
                .family
                .actions
                .iter()
                .rev()
                .map(|a| a.inverse())
                .collect(),
        };
        select_apply(state, &inverse, backend, tally.as_deref_mut())?;
        spec.oracle.apply(state, spec.oracle_reg, true, &[])?;
    }
    Ok(())
}

/// Outcome of a post-selected pipeline run.
#[derive(Clone, Debug)]
pub struct LcuResult {
    /// Projected, renormalized state over the full qubit layout.
    pub output: StateVector,
    pub success_probability: f64,
    pub tally: GateTally,
}

/// Run the sandwich on a prepared full state (ancilla block must read zero)
/// and project the whole ancilla block back to zero.
pub fn lcu_sandwich(
    state: &StateVector,
    spec: &SandwichSpec,
    ancilla_block: Register,
    backend: Backend,
) -> Result<LcuResult> {
    if state.outcome_probability(ancilla_block, 0) < 1.0 - 1e-10 {
        return Err(SimError::InvalidInput(
            "ancilla block must start in the zero state".into(),
        ));
    }
    let mut work = state.clone();
    let mut tally = GateTally::default();
    apply_sandwich(&mut work, spec, false, backend, Some(&mut tally))?;
    let (output, p) = work.project_register(ancilla_block, 0)?;
    Ok(LcuResult {
        output,
        success_probability: p,
        tally,
    })
}

/// Amplitude amplification of a zero-ancilla "good" outcome.
///
/// `apply_pipeline(state, adjoint)` must implement the full preparation
/// (input loading plus the sandwich) as a unitary on `num_qubits` qubits.
/// After `n` Grover iterations the good-subspace weight is exactly
/// `sin^2((2n+1) theta)` where `sin theta` is the initial good amplitude.
pub fn amplitude_amplify(
    num_qubits: usize,
    ancilla_block: Register,
    good_value: usize,
    iterations: usize,
    apply_pipeline: &mut dyn FnMut(&mut StateVector, bool) -> Result<()>,
) -> Result<LcuResult> {
    let mut state = StateVector::zero_state(num_qubits)?;
    apply_pipeline(&mut state, false)?;
    if state.outcome_probability(ancilla_block, good_value) < 1e-18 {
        return Err(SimError::PostSelectionImpossible { probability: 0.0 });
    }
    for _ in 0..iterations {
        // Reflect about the good subspace.
        state.phase_by_register(ancilla_block, &[], |v| {
            if v == good_value {
                Complex64::new(-1.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        apply_pipeline(&mut state, true)?;
        // Reflect about the all-zero basis state.
        let amps = state.amplitudes_mut();
        amps[0] = -amps[0];
        apply_pipeline(&mut state, false)?;
    }
    let (output, p) = state.project_register(ancilla_block, good_value)?;
    Ok(LcuResult {
        output,
        success_probability: p,
        tally: GateTally::default(),
    })
}

/// One step of oblivious amplitude amplification: apply `-A R A† R A` to the
/// prepared initial state, then project the ancilla block to zero. With
/// `<0|A|0> = U/2` for unitary `U` the projection succeeds with probability
/// one; small deviations of the block from `U/2` degrade it quadratically.
pub fn oaa_step(
    initial: &StateVector,
    ancilla_block: Register,
    apply_a: &mut dyn FnMut(&mut StateVector, bool) -> Result<()>,
) -> Result<LcuResult> {
    let reflect = |state: &mut StateVector| {
        state.phase_by_register(ancilla_block, &[], |v| {
            if v == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(-1.0, 0.0)
            }
        });
    };
    let mut state = initial.clone();
    apply_a(&mut state, false)?;
    reflect(&mut state);
    apply_a(&mut state, true)?;
    reflect(&mut state);
    apply_a(&mut state, false)?;
    state.scale(Complex64::new(-1.0, 0.0));
    let (output, p) = state.project_register(ancilla_block, 0)?;
    Ok(LcuResult {
        output,
        success_probability: p,
        tally: GateTally::default(),
    })
}
