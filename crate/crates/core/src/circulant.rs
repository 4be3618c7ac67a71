//! Circulant application pipelines and their Toeplitz, Hankel and
//! block-structured relatives.
//!
//! Every operator family here is a linear combination of cyclic shifts, so
//! each `apply_*` routine assembles the matching weight oracle and shift
//! family, runs the LCU sandwich and post-selects. Parameter vectors are
//! auto-normalized to total weight one; the factor is reported so callers
//! can undo it.

use num_complex::Complex64;

use crate::arith::Backend;
use crate::dense::{
    condition_number, dense_block_circulant, dense_block_phase, dense_block_unitary,
    dense_circulant, dense_hankel, dense_toeplitz, dft_eigenvalues, DenseOperator, SignMode,
};
use crate::error::{Result, SimError};
use crate::gates::GateTally;
use crate::lcu::{
    amplitude_amplify, apply_sandwich, LcuResult, SandwichSpec, SelectAction,
    UnitaryFamily,
};
use crate::oracle::AmplitudeOracle;
use crate::state::{Register, StateVector};

fn validate_weights(raw: &[f64]) -> Result<f64> {
    if raw.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(SimError::InvalidInput(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(SimError::InvalidInput("weights must not all vanish".into()));
    }
    Ok(total)
}

/// A circulant operator `sum_j c_j V_j` over `N = 2^L` points, stored
/// normalized to `sum c_j = 1` with the original total kept as `scale`.
#[derive(Clone, Debug)]
pub struct CirculantSpec {
    c: Vec<f64>,
    width: usize,
    pub sign_mode: SignMode,
    scale: f64,
}

impl CirculantSpec {
    pub fn new(raw: &[f64], sign_mode: SignMode) -> Result<Self> {
        let n = raw.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(SimError::InvalidInput(format!(
                "circulant parameter vector must have power-of-two length >= 2, got {n}"
            )));
        }
        let scale = validate_weights(raw)?;
        Ok(CirculantSpec {
            c: raw.iter().map(|x| x / scale).collect(),
            width: n.trailing_zeros() as usize,
            sign_mode,
            scale,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.c
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Total weight of the raw input; `raw operator = scale * normalized`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Eigenvalues of the normalized signed operator, DFT order.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        dft_eigenvalues(&self.c, self.sign_mode)
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.eigenvalues())
    }

    pub fn dense(&self) -> DenseOperator {
        dense_circulant(&self.c, self.sign_mode)
    }

    /// Whether the normalized operator is Hermitian (`c_j = c_{N-j}`).
    pub fn is_hermitian(&self) -> bool {
        let n = self.c.len();
        (1..n).all(|j| (self.c[j] - self.c[(n - j) % n]).abs() < 1e-12)
    }
}

/// Banded parameters indexed `-(N-1) ..= N-1`, stored with `t_j` at
/// `j + N - 1`; shared by the Toeplitz and Hankel specs.
#[derive(Clone, Debug)]
pub struct BandedSpec {
    t: Vec<f64>,
    width: usize,
    scale: f64,
}

pub type ToeplitzSpec = BandedSpec;
pub type HankelSpec = BandedSpec;

impl BandedSpec {
    pub fn new(raw: &[f64]) -> Result<Self> {
        let len = raw.len();
        if len % 2 == 0 {
            return Err(SimError::InvalidInput(format!(
                "banded parameters need odd length 2N-1, got {len}"
            )));
        }
        let n = (len + 1) / 2;
        if n < 2 || !n.is_power_of_two() {
            return Err(SimError::InvalidInput(format!(
                "banded dimension must be a power of two >= 2, got {n}"
            )));
        }
        let scale = validate_weights(raw)?;
        Ok(BandedSpec {
            t: raw.iter().map(|x| x / scale).collect(),
            width: n.trailing_zeros() as usize,
            scale,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        1 << self.width
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Normalized parameters, `t_j` at index `j + N - 1`.
    pub fn params(&self) -> &[f64] {
        &self.t
    }

    /// Entry `t_j` for `j` in `-(N-1) ..= N-1`.
    pub fn at(&self, j: isize) -> f64 {
        self.t[(j + self.dim() as isize - 1) as usize]
    }

    /// The spec with parameters reversed (`t_j -> t_{-j}`): how a Hankel
    /// vector turns into the Toeplitz vector of `H = T P`.
    pub fn reversed(&self) -> BandedSpec {
        let mut t = self.t.clone();
        t.reverse();
        BandedSpec {
            t,
            width: self.width,
            scale: self.scale,
        }
    }

    pub fn dense_toeplitz(&self) -> DenseOperator {
        dense_toeplitz(&self.t).expect("validated length")
    }

    pub fn dense_hankel(&self) -> DenseOperator {
        dense_hankel(&self.t).expect("validated length")
    }
}

/// Twice-size circulant that carries a Toeplitz operator in its upper-left
/// block: `c = (t_0, t_{-1}, .., t_{-(N-1)}, 0, t_{N-1}, .., t_1)`.
pub fn embed_toeplitz(spec: &ToeplitzSpec) -> CirculantSpec {
    let n = spec.dim();
    let mut c = vec![0.0; 2 * n];
    c[0] = spec.at(0);
    for m in 1..n {
        c[m] = spec.at(-(m as isize));
        c[n + m] = spec.at((n - m) as isize);
    }
    let mut out = CirculantSpec::new(&c, SignMode::Plain).expect("embedding keeps total weight");
    // The embedding must not renormalize twice: the banded spec already is.
    out.scale = spec.scale;
    out
}

/// Unitary blocks attached to each shift: explicit matrices or the phase
/// rule `U_j = e^{i j theta}`.
#[derive(Clone, Debug)]
pub enum BlockKind {
    Explicit(Vec<DenseOperator>),
    PhaseRule(f64),
}

/// Block circulant with unitary blocks: `sum_j c_j V_j (x) U_j`.
#[derive(Clone, Debug)]
pub struct UbSpec {
    c: Vec<f64>,
    scale: f64,
    width: usize,
    inner_width: usize,
    kind: BlockKind,
}

impl UbSpec {
    pub fn new(raw_c: &[f64], kind: BlockKind) -> Result<Self> {
        let n = raw_c.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(SimError::InvalidInput(format!(
                "block-circulant weight vector must have power-of-two length, got {n}"
            )));
        }
        let scale = validate_weights(raw_c)?;
        let inner_width = match &kind {
            BlockKind::PhaseRule(_) => 0,
            BlockKind::Explicit(blocks) => {
                if blocks.len() != n {
                    return Err(SimError::DimensionMismatch {
                        expected: n,
                        got: blocks.len(),
                    });
                }
                let d = blocks[0].rows();
                if d == 0 || !d.is_power_of_two() {
                    return Err(SimError::InvalidInput(format!(
                        "block dimension must be a power of two, got {d}"
                    )));
                }
                for b in blocks {
                    if b.rows() != d || b.cols() != d {
                        return Err(SimError::DimensionMismatch {
                            expected: d,
                            got: b.rows(),
                        });
                    }
                    let dev = b.unitarity_deviation();
                    if dev > 1e-10 {
                        return Err(SimError::NonUnitary { deviation: dev });
                    }
                }
                d.trailing_zeros() as usize
            }
        };
        Ok(UbSpec {
            c: raw_c.iter().map(|x| x / scale).collect(),
            scale,
            width: n.trailing_zeros() as usize,
            inner_width,
            kind,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn inner_width(&self) -> usize {
        self.inner_width
    }

    pub fn system_width(&self) -> usize {
        self.width + self.inner_width
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn weights(&self) -> &[f64] {
        &self.c
    }

    pub fn dense(&self) -> Result<DenseOperator> {
        match &self.kind {
            BlockKind::PhaseRule(theta) => Ok(dense_block_phase(&self.c, *theta)),
            BlockKind::Explicit(blocks) => dense_block_unitary(&self.c, blocks),
        }
    }
}

/// Block circulant with circulant blocks: `sum_{j j'} c_{j j'} V_j (x) V_{j'}`.
#[derive(Clone, Debug)]
pub struct CbSpec {
    weights: Vec<Vec<f64>>,
    scale: f64,
    width: usize,
    inner_width: usize,
}

impl CbSpec {
    pub fn new(raw: &[Vec<f64>]) -> Result<Self> {
        let n = raw.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(SimError::InvalidInput(format!(
                "weight table needs a power-of-two row count, got {n}"
            )));
        }
        let np = raw.first().map(|r| r.len()).unwrap_or(0);
        if np == 0 || !np.is_power_of_two() {
            return Err(SimError::InvalidInput(format!(
                "weight table needs a power-of-two column count, got {np}"
            )));
        }
        let mut flat = Vec::with_capacity(n * np);
        for row in raw {
            if row.len() != np {
                return Err(SimError::DimensionMismatch {
                    expected: np,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let scale = validate_weights(&flat)?;
        Ok(CbSpec {
            weights: raw
                .iter()
                .map(|row| row.iter().map(|x| x / scale).collect())
                .collect(),
            scale,
            width: n.trailing_zeros() as usize,
            inner_width: np.trailing_zeros() as usize,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn inner_width(&self) -> usize {
        self.inner_width
    }

    pub fn system_width(&self) -> usize {
        self.width + self.inner_width
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn dense(&self) -> Result<DenseOperator> {
        dense_block_circulant(&self.weights)
    }
}

/// Outcome of an operator-application pipeline.
#[derive(Clone, Debug)]
pub struct ApplyOutcome {
    /// System register after post-selection, renormalized.
    pub output: StateVector,
    pub success_probability: f64,
    /// Input normalization factor: the raw operator is `scale` times the
    /// normalized one the pipeline applied.
    pub scale: f64,
    pub tally: GateTally,
    /// Weight-oracle invocations (forward plus inverse).
    pub oracle_calls: u64,
    /// Input-state-oracle invocations (0 when no amplification requested).
    pub psi_oracle_calls: u64,
}

fn check_state_width(psi: &StateVector, width: usize) -> Result<()> {
    if psi.num_qubits() != width {
        return Err(SimError::DimensionMismatch {
            expected: width,
            got: psi.num_qubits(),
        });
    }
    Ok(())
}

/// Paste a narrow state into the low qubits of a wider zero-extended state.
fn embedded(psi: &StateVector, total_qubits: usize) -> Result<StateVector> {
    psi.extended(total_qubits - psi.num_qubits())
}

/// Run a sandwich pipeline either once (post-selected) or under `n` rounds
/// of amplitude amplification. `prelude` is applied to the system right
/// after input preparation (the Hankel permutation hook).
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    psi: &StateVector,
    spec: &SandwichSpec,
    total_qubits: usize,
    good_block: Register,
    amplify: Option<usize>,
    psi_oracle: Option<&AmplitudeOracle>,
    prelude: Option<&UnitaryFamily>,
    backend: Backend,
) -> Result<(LcuResult, u64)> {
    match amplify {
        None => {
            let mut state = embedded(psi, total_qubits)?;
            if let Some(p) = prelude {
                crate::lcu::select_apply(&mut state, p, backend, None)?;
            }
            let mut tally = GateTally::default();
            apply_sandwich(&mut state, spec, false, backend, Some(&mut tally))?;
            let (output, p) = state.project_register(good_block, 0)?;
            Ok((
                LcuResult {
                    output,
                    success_probability: p,
                    tally,
                },
                0,
            ))
        }
        Some(rounds) => {
            let oracle = psi_oracle.ok_or_else(|| {
                SimError::InvalidInput(
                    "amplitude amplification needs the input-state oracle".into(),
                )
            })?;
            let sys = Register {
                offset: 0,
                width: oracle.width(),
            };
            let before = oracle.calls();
            let mut pipeline = |state: &mut StateVector, adjoint: bool| -> Result<()> {
                if !adjoint {
                    oracle.apply(state, sys, false, &[])?;
                    if let Some(p) = prelude {
                        crate::lcu::select_apply(state, p, backend, None)?;
                    }
                    apply_sandwich(state, spec, false, backend, None)
                } else {
                    apply_sandwich(state, spec, true, backend, None)?;
                    if let Some(p) = prelude {
                        let inv = UnitaryFamily {
                            actions: p.actions.iter().rev().map(|a| a.inverse()).collect(),
                        };
                        crate::lcu::select_apply(state, &inv, backend, None)?;
                    }
                    oracle.apply(state, sys, true, &[])
                }
            };
            let res = amplitude_amplify(total_qubits, good_block, 0, rounds, &mut pipeline)?;
            Ok((res, oracle.calls() - before))
        }
    }
}

/// Apply `C = sum_j c_j V_j` (optionally with the negated-`V_0` variant) to
/// a width-L state via the shift-family sandwich.
pub fn apply_circulant(
    spec: &CirculantSpec,
    psi: &StateVector,
    amplify: Option<usize>,
    psi_oracle: Option<&AmplitudeOracle>,
    backend: Backend,
) -> Result<ApplyOutcome> {
    let l = spec.width();
    check_state_width(psi, l)?;
    let sys = Register { offset: 0, width: l };
    let idx = Register { offset: l, width: l };
    let oracle = AmplitudeOracle::for_weights(spec.weights())?;
    let family = UnitaryFamily {
        actions: vec![SelectAction::SubtractInto {
            index: idx,
            target: sys,
        }],
    };
    let sandwich = SandwichSpec {
        oracle: &oracle,
        oracle_reg: idx,
        family: &family,
        negate_zero_index: match spec.sign_mode {
            SignMode::Plain => None,
            SignMode::NegateV0 => Some(idx),
        },
    };
    let (res, psi_calls) = run_pipeline(
        psi,
        &sandwich,
        2 * l,
        idx,
        amplify,
        psi_oracle,
        None,
        backend,
    )?;
    Ok(ApplyOutcome {
        output: res.output.extract_register(sys)?,
        success_probability: res.success_probability,
        scale: spec.scale(),
        tally: res.tally,
        oracle_calls: oracle.calls(),
        psi_oracle_calls: psi_calls,
    })
}

fn banded_pipeline(
    circulant: &CirculantSpec,
    psi: &StateVector,
    flip_first: bool,
    amplify: Option<usize>,
    psi_oracle: Option<&AmplitudeOracle>,
    backend: Backend,
) -> Result<ApplyOutcome> {
    let l = psi.num_qubits();
    let wide = l + 1;
    let sys = Register { offset: 0, width: l };
    let carrier = Register {
        offset: 0,
        width: wide,
    };
    let idx = Register {
        offset: wide,
        width: wide,
    };
    // Success means the index block and the data qubit both read zero; they
    // are adjacent, so one register covers the whole good condition.
    let good = Register {
        offset: l,
        width: wide + 1,
    };
    let oracle = AmplitudeOracle::for_weights(circulant.weights())?;
    let family = UnitaryFamily {
        actions: vec![SelectAction::SubtractInto {
            index: idx,
            target: carrier,
        }],
    };
    let sandwich = SandwichSpec {
        oracle: &oracle,
        oracle_reg: idx,
        family: &family,
        negate_zero_index: None,
    };
    let prelude = flip_first.then(|| UnitaryFamily {
        actions: vec![SelectAction::BlockUnitary {
            index: Register { offset: 0, width: 0 },
            target: sys,
            blocks: vec![bitflip_unitary(l)],
        }],
    });
    let (res, psi_calls) = run_pipeline(
        psi,
        &sandwich,
        2 * wide,
        good,
        amplify,
        psi_oracle,
        prelude.as_ref(),
        backend,
    )?;
    Ok(ApplyOutcome {
        output: res.output.extract_register(sys)?,
        success_probability: res.success_probability,
        scale: circulant.scale(),
        tally: res.tally,
        oracle_calls: oracle.calls(),
        psi_oracle_calls: psi_calls,
    })
}

/// Dense unitary of the all-qubits bit flip, used as a prelude block.
fn bitflip_unitary(l: usize) -> DenseOperator {
    let n = 1usize << l;
    DenseOperator::from_fn(n, n, |i, j| {
        if i == (n - 1) ^ j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Apply a Toeplitz operator through its twice-size circulant embedding:
/// run the circulant on `|0>|psi>`, then require the extra data qubit to
/// stay zero.
pub fn apply_toeplitz(
    spec: &ToeplitzSpec,
    psi: &StateVector,
    amplify: Option<usize>,
    psi_oracle: Option<&AmplitudeOracle>,
    backend: Backend,
) -> Result<ApplyOutcome> {
    check_state_width(psi, spec.width())?;
    banded_pipeline(
        &embed_toeplitz(spec),
        psi,
        false,
        amplify,
        psi_oracle,
        backend,
    )
}

/// Apply a Hankel operator as `H = T P`: flip the input register, then run
/// the Toeplitz pipeline built from the reversed parameter vector.
pub fn apply_hankel(
    spec: &HankelSpec,
    psi: &StateVector,
    amplify: Option<usize>,
    psi_oracle: Option<&AmplitudeOracle>,
    backend: Backend,
) -> Result<ApplyOutcome> {
    check_state_width(psi, spec.width())?;
    banded_pipeline(
        &embed_toeplitz(&spec.reversed()),
        psi,
        true,
        amplify,
        psi_oracle,
        backend,
    )
}

/// Apply `sum_j c_j V_j (x) U_j`: shifts on the block register, unitary
/// blocks (or the phase rule) on the inner register.
pub fn apply_block_ub(spec: &UbSpec, psi: &StateVector, backend: Backend) -> Result<ApplyOutcome> {
    check_state_width(psi, spec.system_width())?;
    let lp = spec.inner_width();
    let l = spec.width();
    let inner = Register { offset: 0, width: lp };
    let block = Register { offset: lp, width: l };
    let idx = Register {
        offset: lp + l,
        width: l,
    };
    let oracle = AmplitudeOracle::for_weights(spec.weights())?;
    let mut actions = vec![SelectAction::SubtractInto {
        index: idx,
        target: block,
    }];
    match &spec.kind {
        BlockKind::PhaseRule(theta) => actions.push(SelectAction::PhasePerIndex {
            index: idx,
            theta: *theta,
        }),
        BlockKind::Explicit(blocks) => actions.push(SelectAction::BlockUnitary {
            index: idx,
            target: inner,
            blocks: blocks.clone(),
        }),
    }
    let family = UnitaryFamily { actions };
    let sandwich = SandwichSpec {
        oracle: &oracle,
        oracle_reg: idx,
        family: &family,
        negate_zero_index: None,
    };
    let (res, _) = run_pipeline(
        psi,
        &sandwich,
        spec.system_width() + l,
        idx,
        None,
        None,
        None,
        backend,
    )?;
    Ok(ApplyOutcome {
        output: res.output.extract_register(Register {
            offset: 0,
            width: spec.system_width(),
        })?,
        success_probability: res.success_probability,
        scale: spec.scale(),
        tally: res.tally,
        oracle_calls: oracle.calls(),
        psi_oracle_calls: 0,
    })
}

/// Apply `sum_{j j'} c_{j j'} V_j (x) V_{j'}`: one joint weight oracle over
/// both ancilla registers, one subtractor per tensor factor.
pub fn apply_block_cb(spec: &CbSpec, psi: &StateVector, backend: Backend) -> Result<ApplyOutcome> {
    check_state_width(psi, spec.system_width())?;
    let lp = spec.inner_width();
    let l = spec.width();
    let sysw = spec.system_width();
    let inner = Register { offset: 0, width: lp };
    let block = Register { offset: lp, width: l };
    let anc_inner = Register {
        offset: sysw,
        width: lp,
    };
    let anc_block = Register {
        offset: sysw + lp,
        width: l,
    };
    let joint = Register {
        offset: sysw,
        width: sysw,
    };
    // Joint amplitudes sqrt(c_{j j'}) at ancilla value j' + j * N'.
    let np = 1usize << lp;
    let mut flat = vec![0.0; 1 << sysw];
    for (j, row) in spec.weights().iter().enumerate() {
        for (jp, &w) in row.iter().enumerate() {
            flat[j * np + jp] = w;
        }
    }
    let oracle = AmplitudeOracle::for_weights(&flat)?;
    let family = UnitaryFamily {
        actions: vec![
            SelectAction::SubtractInto {
                index: anc_block,
                target: block,
            },
            SelectAction::SubtractInto {
                index: anc_inner,
                target: inner,
            },
        ],
    };
    let sandwich = SandwichSpec {
        oracle: &oracle,
        oracle_reg: joint,
        family: &family,
        negate_zero_index: None,
    };
    let (res, _) = run_pipeline(psi, &sandwich, 2 * sysw, joint, None, None, None, backend)?;
    Ok(ApplyOutcome {
        output: res.output.extract_register(Register {
            offset: 0,
            width: sysw,
        })?,
        success_probability: res.success_probability,
        scale: spec.scale(),
        tally: res.tally,
        oracle_calls: oracle.calls(),
        psi_oracle_calls: 0,
    })
}
