//! Linear-system solving for Hermitian positive circulants: phase
//! estimation of the half-scaled propagator, an eigenvalue-conditioned
//! ancilla rotation, uncomputation and post-selection on the success
//! branch.
//!
//! Phases are half-scaled: estimation runs on `e^{i pi C}`, so eigenvalues
//! in `(0, 1]` land on phases in `(0, 1/2]` and the value 1 never wraps
//! onto the zero phase. The rotation reads `lambda = 2 v / 2^T` back from
//! the register.

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::{apply_qft, Backend};
use crate::circulant::CirculantSpec;
use crate::error::{Result, SimError};
use crate::gates::h_matrix;
use crate::hamsim::{plan_evolution, HamSimPlan, TaylorPipeline};
use crate::lcu::amplitude_amplify;
use crate::oracle::AmplitudeOracle;
use crate::state::{Register, StateVector, QUBIT_CAP};

/// How controlled propagator powers are realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InversionBackend {
    /// Diagonalize through the Fourier transform and apply the eigenphases
    /// directly; exact up to register resolution.
    ExactDiagonal,
    /// Run the series-segment evolution pipeline for each controlled
    /// power.
    Taylor,
}

#[derive(Clone, Debug, Serialize)]
pub struct InversionPlan {
    pub phase_bits: usize,
    pub kappa: f64,
    pub backend: InversionBackend,
    pub epsilon: f64,
}

impl InversionPlan {
    /// Plan from the spec's own spectrum: `T = ceil(log2(kappa/eps)) + 2`.
    ///
    /// The planned `kappa` is `1 / min|Lambda|`, not the bare eigenvalue
    /// ratio: the rotation amplitude `1/(kappa lambda)` must stay below one
    /// on every populated branch, and spectra that do not reach magnitude
    /// one leave `max|Lambda|/min|Lambda|` short of that. The two agree
    /// whenever the largest eigenvalue is exactly one.
    pub fn for_spec(
        spec: &CirculantSpec,
        epsilon: f64,
        backend: InversionBackend,
    ) -> Result<InversionPlan> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(SimError::InvalidInput(format!(
                "target accuracy must lie in (0, 1), got {epsilon}"
            )));
        }
        let (eigs, _) = sign_normalized_eigenvalues(spec)?;
        let floor = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let kappa = 1.0 / floor;
        if !kappa.is_finite() {
            return Err(SimError::InvalidInput(
                "spectrum is singular; no finite condition number".into(),
            ));
        }
        let phase_bits = (kappa / epsilon).log2().ceil().max(0.0) as usize + 2;
        let plan = InversionPlan {
            phase_bits,
            kappa,
            backend,
            epsilon,
        };
        plan.validate(spec)?;
        Ok(plan)
    }

    /// Raise the register width; narrowing below the planned floor is
    /// rejected by `validate`.
    pub fn with_phase_bits(mut self, phase_bits: usize) -> InversionPlan {
        self.phase_bits = phase_bits;
        self
    }

    pub fn validate(&self, spec: &CirculantSpec) -> Result<()> {
        let floor = (self.kappa / self.epsilon).log2().ceil().max(0.0) as usize + 2;
        if self.phase_bits < floor {
            return Err(SimError::InvalidInput(format!(
                "{} phase bits cannot resolve kappa {} at accuracy {}; need {}",
                self.phase_bits, self.kappa, self.epsilon, floor
            )));
        }
        let true_kappa = spec.condition_number();
        if !true_kappa.is_finite() {
            return Err(SimError::InvalidInput(
                "spectrum is singular; no finite condition number".into(),
            ));
        }
        if self.kappa < 0.9 * true_kappa {
            return Err(SimError::InvalidInput(format!(
                "planned condition number {} understates the spectrum's {}",
                self.kappa, true_kappa
            )));
        }
        sign_normalized_eigenvalues(spec)?;
        Ok(())
    }
}

/// Real eigenvalues of the spec with their common sign factored out.
///
/// A spectrum entirely in `(0, 1]` passes as is. One entirely in `[-1, 0)`
/// (the sign-flipped assemblies of shifted stiffness circulants) is negated
/// and flagged: `C = -|C|`, and `C^{-1} psi` differs from `|C|^{-1} psi`
/// only by a global sign, so inversion runs on `|C|` and reports the flag.
/// Mixed-sign spectra are rejected; the rotation formula has no meaning
/// there.
fn sign_normalized_eigenvalues(spec: &CirculantSpec) -> Result<(Vec<f64>, bool)> {
    let eigs = spec.eigenvalues();
    let mut reals = Vec::with_capacity(eigs.len());
    for (k, lam) in eigs.iter().enumerate() {
        if lam.im.abs() > 1e-10 {
            return Err(SimError::InvalidInput(format!(
                "eigenvalue {k} is not real ({lam}); inversion needs a Hermitian spec"
            )));
        }
        reals.push(lam.re);
    }
    let negated = if reals.iter().all(|&x| x > 0.0) {
        false
    } else if reals.iter().all(|&x| x < 0.0) {
        for x in reals.iter_mut() {
            *x = -*x;
        }
        true
    } else {
        return Err(SimError::InvalidInput(
            "spectrum mixes signs (or touches zero); inversion needs definite \
             eigenvalues, see the condition-number requirements"
                .into(),
        ));
    };
    for (k, x) in reals.iter().enumerate() {
        if *x > 1.0 + 1e-12 {
            return Err(SimError::InvalidInput(format!(
                "eigenvalue {k} has magnitude {x} above 1; rescale the spec"
            )));
        }
    }
    Ok((reals, negated))
}

/// Register layout and backend machinery for one inversion run.
struct Estimator {
    system: Register,
    phase: Register,
    index: Register,
    unary_offset: usize,
    eigs: Vec<f64>,
    negated: bool,
    oracle: Option<AmplitudeOracle>,
    power_plans: Vec<HamSimPlan>,
    backend: InversionBackend,
}

impl Estimator {
    fn new(spec: &CirculantSpec, plan: &InversionPlan) -> Result<Estimator> {
        let l = spec.width();
        let t = plan.phase_bits;
        let system = Register { offset: 0, width: l };
        let phase = Register { offset: l, width: t };
        let index = Register {
            offset: l + t,
            width: l,
        };
        let (eigs, negated) = sign_normalized_eigenvalues(spec)?;
        if negated && plan.backend == InversionBackend::Taylor {
            return Err(SimError::InvalidInput(
                "a negated spectrum needs the diagonal backend; the series \
                 pipeline realizes only the plain weight combination"
                    .into(),
            ));
        }
        let (oracle, power_plans, top) = match plan.backend {
            InversionBackend::ExactDiagonal => (None, Vec::new(), l + t),
            InversionBackend::Taylor => {
                let mut plans = Vec::with_capacity(t);
                let mut max_order = 0;
                for p in 0..t {
                    // Spread the budget so each power's share is
                    // proportional to its evolution time.
                    let time = std::f64::consts::PI * (1u64 << p) as f64;
                    let eps_p = plan.epsilon * (1u64 << p) as f64 / (1u64 << (t + 1)) as f64;
                    let power_plan = plan_evolution(time, eps_p, l)?;
                    max_order = max_order.max(power_plan.order);
                    plans.push(power_plan);
                }
                (
                    Some(AmplitudeOracle::for_weights(spec.weights())?),
                    plans,
                    2 * l + t + max_order,
                )
            }
        };
        if top + 1 > QUBIT_CAP {
            return Err(SimError::ResourceLimit {
                qubits: top + 1,
                cap: QUBIT_CAP,
            });
        }
        Ok(Estimator {
            system,
            phase,
            index,
            unary_offset: 2 * l + t,
            eigs,
            negated,
            oracle,
            power_plans,
            backend: plan.backend,
        })
    }

    /// Qubits below the rotation ancilla.
    fn width_below_rot(&self) -> usize {
        match self.backend {
            InversionBackend::ExactDiagonal => self.phase.offset + self.phase.width,
            InversionBackend::Taylor => {
                self.unary_offset
                    + self
                        .power_plans
                        .iter()
                        .map(|p| p.order)
                        .max()
                        .unwrap_or(0)
            }
        }
    }

    /// Controlled `U^{2^p}` with `U = e^{i pi C}`; `inverse` applies the
    /// conjugate power during uncomputation.
    fn controlled_power(&self, state: &mut StateVector, p: usize, inverse: bool) -> Result<()> {
        let control = self.phase.offset + p;
        match self.backend {
            InversionBackend::ExactDiagonal => {
                let sign = if inverse { -1.0 } else { 1.0 };
                let factor = std::f64::consts::PI * (1u64 << p) as f64 * sign;
                apply_qft(state, self.system, true, Backend::Fast, None)?;
                let eigs = &self.eigs;
                state.phase_by_register(self.system, &[control], |k| {
                    Complex64::from_polar(1.0, factor * eigs[k])
                });
                apply_qft(state, self.system, false, Backend::Fast, None)?;
                Ok(())
            }
            InversionBackend::Taylor => {
                let plan = &self.power_plans[p];
                let oracle = self.oracle.as_ref().expect("taylor backend has an oracle");
                let unary = Register {
                    offset: self.unary_offset,
                    width: plan.order,
                };
                let pipeline = TaylorPipeline::new(
                    oracle,
                    self.system,
                    self.index,
                    unary,
                    plan.ratio,
                    plan.order,
                )?;
                // Forward power is e^{+i pi 2^p C}: time runs backward
                // relative to the segment pipeline's e^{-iCt}.
                pipeline.apply_controlled_segments(state, control, plan.segments, !inverse)
            }
        }
    }

    fn phase_estimate_into(&self, state: &mut StateVector, inverse: bool) -> Result<()> {
        let h = h_matrix();
        if !inverse {
            for q in self.phase.qubits() {
                state.apply_gate(&[q], &[], &h, None)?;
            }
            for p in 0..self.phase.width {
                self.controlled_power(state, p, false)?;
            }
            apply_qft(state, self.phase, true, Backend::Fast, None)?;
        } else {
            apply_qft(state, self.phase, false, Backend::Fast, None)?;
            for p in (0..self.phase.width).rev() {
                self.controlled_power(state, p, true)?;
            }
            for q in self.phase.qubits() {
                state.apply_gate(&[q], &[], &h, None)?;
            }
        }
        Ok(())
    }
}

/// Run phase estimation and hand back the system-plus-phase state
/// `sum_j b_j |u_j>|Lambda_j / 2 * 2^T>` (ancilla registers stripped).
pub fn phase_estimate(
    spec: &CirculantSpec,
    psi: &StateVector,
    plan: &InversionPlan,
) -> Result<StateVector> {
    plan.validate(spec)?;
    if psi.num_qubits() != spec.width() {
        return Err(SimError::DimensionMismatch {
            expected: spec.width(),
            got: psi.num_qubits(),
        });
    }
    let est = Estimator::new(spec, plan)?;
    let total = est.width_below_rot();
    let mut state = psi.extended(total - spec.width())?;
    est.phase_estimate_into(&mut state, false)?;
    state.shrunk(total - est.phase.offset - est.phase.width)
}

/// Outcome of a full inversion run.
#[derive(Clone, Debug)]
pub struct InversionOutcome {
    /// System register on the success branch, renormalized.
    pub output: StateVector,
    /// Weight of (phase = 0, ancilla = 1): `sum |b_j / (kappa Lambda_j)|^2`
    /// up to register resolution.
    pub success_probability: f64,
    /// Input normalization factor inherited from the spec; the raw
    /// system's solution is `scale^{-1}` times the normalized one's.
    pub scale: f64,
    pub plan: InversionPlan,
    /// Weight left outside phase = 0 after uncomputation.
    pub phase_residual: f64,
    /// Weight on the rotation-undefined zero branch of the phase register.
    pub zero_branch_weight: f64,
    /// Register values whose eigenvalue estimate undershot `1/kappa`.
    pub clamped_branches: u64,
    /// Total weight carried by those clamped values.
    pub clamped_weight: f64,
    /// The spec's spectrum was uniformly negative and inversion ran on its
    /// negation; the true solution is the output times a global -1.
    pub spectrum_negated: bool,
    /// Weight-oracle calls (Taylor backend only).
    pub oracle_calls: u64,
}

/// Ancilla rotation `|0> -> 1/(kappa lambda)|1> + sqrt(1 - ...)|0>`,
/// multiplexed over the phase-register value; identity on value zero.
/// Returns (clamped branch count, clamped weight).
fn rotate_success_ancilla(
    state: &mut StateVector,
    phase: Register,
    rot_qubit: usize,
    kappa: f64,
    inverse: bool,
) -> (u64, f64) {
    let rot_mask = 1usize << rot_qubit;
    let t_dim = phase.dim() as f64;
    let mut clamped_branches = 0u64;
    let mut clamped_weight = 0.0;
    let mut seen_clamped = vec![false; phase.dim()];
    let dim = state.amplitudes().len();
    let amps = state.amplitudes_mut();
    for i in 0..dim {
        if i & rot_mask != 0 {
            continue;
        }
        let v = phase.value_of(i);
        if v == 0 {
            continue;
        }
        let lambda = 2.0 * v as f64 / t_dim;
        let mut f = 1.0 / (kappa * lambda);
        if f > 1.0 {
            f = 1.0;
            let w = amps[i].norm_sqr() + amps[i | rot_mask].norm_sqr();
            // Roundoff dust on an exactly-unpopulated phase value is not a
            // clamp event.
            if w > 1e-24 {
                if !seen_clamped[v] {
                    seen_clamped[v] = true;
                    clamped_branches += 1;
                }
                clamped_weight += w;
            }
        }
        let s = f;
        let c = (1.0 - f * f).max(0.0).sqrt();
        let (a0, a1) = (amps[i], amps[i | rot_mask]);
        if inverse {
            amps[i] = c * a0 + s * a1;
            amps[i | rot_mask] = -s * a0 + c * a1;
        } else {
            amps[i] = c * a0 - s * a1;
            amps[i | rot_mask] = s * a0 + c * a1;
        }
    }
    (clamped_branches, clamped_weight)
}

/// Solve `C x = psi` on the success branch: phase estimation, conditioned
/// rotation, uncomputation, projection onto phase 0 and ancilla 1.
pub fn invert_circulant(
    spec: &CirculantSpec,
    psi: &StateVector,
    plan: &InversionPlan,
) -> Result<InversionOutcome> {
    plan.validate(spec)?;
    if psi.num_qubits() != spec.width() {
        return Err(SimError::DimensionMismatch {
            expected: spec.width(),
            got: psi.num_qubits(),
        });
    }
    let est = Estimator::new(spec, plan)?;
    let rot_qubit = est.width_below_rot();
    let rot = Register {
        offset: rot_qubit,
        width: 1,
    };
    let mut state = psi.extended(rot_qubit + 1 - spec.width())?;
    est.phase_estimate_into(&mut state, false)?;
    let norm_after_pe = state.norm() * state.norm();
    let zero_branch_weight = state.outcome_probability(est.phase, 0) / norm_after_pe.max(1e-300);
    let (clamped_branches, clamped_weight) =
        rotate_success_ancilla(&mut state, est.phase, rot_qubit, plan.kappa, false);
    est.phase_estimate_into(&mut state, true)?;

    let total_weight = state.norm() * state.norm();
    let phase_zero_weight = state.outcome_probability(est.phase, 0);
    let phase_residual = (total_weight - phase_zero_weight) / total_weight.max(1e-300);
    let good_weight: f64 = {
        let mut w = 0.0;
        for (i, a) in state.amplitudes().iter().enumerate() {
            if est.phase.value_of(i) == 0 && i & (1usize << rot_qubit) != 0 {
                w += a.norm_sqr();
            }
        }
        w
    };
    let (state, _) = state.project_register(est.phase, 0)?;
    let (state, _) = state.project_register(
        Register {
            offset: rot.offset,
            width: 1,
        },
        1,
    )?;
    let output = state.extract_register(est.system)?;
    Ok(InversionOutcome {
        output,
        success_probability: good_weight,
        scale: spec.scale(),
        plan: plan.clone(),
        phase_residual,
        zero_branch_weight,
        clamped_branches,
        clamped_weight,
        spectrum_negated: est.negated,
        oracle_calls: est.oracle.as_ref().map(|o| o.calls()).unwrap_or(0),
    })
}

/// Grover iteration count that drives success probability `p` toward one.
pub fn suggested_iterations(p: f64) -> usize {
    if !(0.0..=1.0).contains(&p) || p <= 0.0 {
        return 0;
    }
    let theta = p.sqrt().min(1.0).asin();
    ((std::f64::consts::FRAC_PI_4 / theta) - 0.5).floor().max(0.0) as usize
}

/// Inversion with amplitude amplification over the success branch.
/// The pipeline must be unitary end to end, so only the exact backend
/// qualifies; iteration count defaults to the measured-probability rule.
pub fn amplified_inversion(
    spec: &CirculantSpec,
    psi_oracle: &AmplitudeOracle,
    plan: &InversionPlan,
    iterations: Option<usize>,
) -> Result<InversionOutcome> {
    if plan.backend != InversionBackend::ExactDiagonal {
        return Err(SimError::InvalidInput(
            "amplification needs the unitary exact backend".into(),
        ));
    }
    plan.validate(spec)?;
    if psi_oracle.width() != spec.width() {
        return Err(SimError::DimensionMismatch {
            expected: spec.width(),
            got: psi_oracle.width(),
        });
    }
    let est = Estimator::new(spec, plan)?;
    let rot_qubit = est.width_below_rot();
    let total = rot_qubit + 1;
    // Good subspace: phase register zero, rotation ancilla one.
    let good_block = Register {
        offset: est.phase.offset,
        width: est.phase.width + 1,
    };
    let good_value = 1usize << est.phase.width;
    let kappa = plan.kappa;
    let mut pipeline = |state: &mut StateVector, adjoint: bool| -> Result<()> {
        if !adjoint {
            psi_oracle.apply(state, est.system, false, &[])?;
            est.phase_estimate_into(state, false)?;
            rotate_success_ancilla(state, est.phase, rot_qubit, kappa, false);
            est.phase_estimate_into(state, true)?;
        } else {
            est.phase_estimate_into(state, false)?;
            rotate_success_ancilla(state, est.phase, rot_qubit, kappa, true);
            est.phase_estimate_into(state, true)?;
            psi_oracle.apply(state, est.system, true, &[])?;
        }
        Ok(())
    };
    let rounds = match iterations {
        Some(n) => n,
        None => {
            let mut probe = StateVector::zero_state(total)?;
            pipeline(&mut probe, false)?;
            suggested_iterations(probe.outcome_probability(good_block, good_value))
        }
    };
    let res = amplitude_amplify(total, good_block, good_value, rounds, &mut pipeline)?;
    let output = res.output.extract_register(est.system)?;
    Ok(InversionOutcome {
        output,
        success_probability: res.success_probability,
        scale: spec.scale(),
        plan: plan.clone(),
        phase_residual: 0.0,
        zero_branch_weight: 0.0,
        clamped_branches: 0,
        clamped_weight: 0.0,
        spectrum_negated: est.negated,
        oracle_calls: 0,
    })
}
