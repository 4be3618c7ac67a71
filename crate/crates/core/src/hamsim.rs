//! Hamiltonian evolution `e^{-iCt}` for Hermitian circulants via a
//! truncated power series applied as a linear combination of shift
//! products.
//!
//! Time is cut into `r` segments of `ratio = t/r <= ln 2` each. One
//! segment applies `sum_{k<=K} (-i ratio)^k / k! C^k`, realized with a
//! unary order register driving `K` shift-select blocks that reuse a
//! single index register: the blocks for distinct factors commute with
//! each other's post-selection, so projecting the index register back to
//! zero after each factor is exactly the separate-register circuit. The
//! total prepared weight `s_raw = sum ratio^k / k!` sits strictly below 2;
//! one padding rotation (a scalar `s_raw / 2` on the post-selected branch)
//! lifts it to exactly 2, where a single round of oblivious amplitude
//! amplification restores the state deterministically up to the series
//! truncation error.

use num_complex::Complex64;
use serde::Serialize;

use crate::circulant::CirculantSpec;
use crate::dense::{DenseOperator, SignMode};
use crate::error::{Result, SimError};
use crate::gates::GateTally;
use crate::oracle::{prepare_unary_weights, AmplitudeOracle};
use crate::state::{Register, StateVector, QUBIT_CAP};

const LN2: f64 = std::f64::consts::LN_2;

/// Segment count, series order and weight bookkeeping for one evolution.
#[derive(Clone, Debug, Serialize)]
pub struct HamSimPlan {
    pub time: f64,
    pub epsilon: f64,
    /// Number of segments `r = ceil(t / ln 2)`.
    pub segments: usize,
    /// Series truncation order `K`.
    pub order: usize,
    /// Per-segment time `t / r`, in `(0, ln 2]`.
    pub ratio: f64,
    /// Prepared weight `sum_{k<=K} ratio^k / k!`, strictly below 2.
    pub weight_sum: f64,
    /// Series remainder bound `2 ratio^{K+1} / (K+1)!`.
    pub tail_bound: f64,
}

fn series_tail(ratio: f64, order: usize) -> f64 {
    let mut term = 1.0;
    for k in 1..=order + 1 {
        term *= ratio / k as f64;
    }
    2.0 * term
}

/// Choose segment count and order so each segment's truncation error stays
/// within `epsilon / r`, and check the register budget `K + 2L`.
pub fn plan_evolution(time: f64, epsilon: f64, system_width: usize) -> Result<HamSimPlan> {
    if !time.is_finite() || time < 0.0 {
        return Err(SimError::InvalidInput(format!(
            "evolution time must be nonnegative, got {time}"
        )));
    }
    if !(0.0..1.0).contains(&epsilon) || epsilon <= 0.0 {
        return Err(SimError::InvalidInput(format!(
            "target accuracy must lie in (0, 1), got {epsilon}"
        )));
    }
    if time == 0.0 {
        // Zero time is the identity; no segments, no ancillas.
        return Ok(HamSimPlan {
            time,
            epsilon,
            segments: 0,
            order: 0,
            ratio: 0.0,
            weight_sum: 1.0,
            tail_bound: 0.0,
        });
    }
    let segments = (time / LN2).ceil().max(1.0) as usize;
    let ratio = time / segments as f64;
    let budget = epsilon / segments as f64;
    let mut order = 1;
    while series_tail(LN2, order) > budget {
        order += 1;
        if order > 64 {
            return Err(SimError::InvalidInput(format!(
                "no practical series order reaches accuracy {epsilon}"
            )));
        }
    }
    let needed = order + 2 * system_width;
    if needed > QUBIT_CAP {
        return Err(SimError::ResourceLimit {
            qubits: needed,
            cap: QUBIT_CAP,
        });
    }
    let weight_sum: f64 = {
        let mut s = 0.0;
        let mut term = 1.0;
        for k in 0..=order {
            if k > 0 {
                term *= ratio / k as f64;
            }
            s += term;
        }
        s
    };
    Ok(HamSimPlan {
        time,
        epsilon,
        segments,
        order,
        ratio,
        weight_sum,
        tail_bound: series_tail(ratio, order),
    })
}

/// Register assignment and oracle for the segment pipeline.
pub struct TaylorPipeline<'a> {
    oracle: &'a AmplitudeOracle,
    pub system: Register,
    pub index: Register,
    pub unary: Register,
    pub ratio: f64,
    pub order: usize,
    weight_sum: f64,
}

impl<'a> TaylorPipeline<'a> {
    /// Standard layout: system at the bottom, index directly above it,
    /// unary on top; callers embed these into wider states as needed.
    pub fn new(
        oracle: &'a AmplitudeOracle,
        system: Register,
        index: Register,
        unary: Register,
        ratio: f64,
        order: usize,
    ) -> Result<Self> {
        if oracle.width() != system.width || index.width != system.width {
            return Err(SimError::DimensionMismatch {
                expected: system.width,
                got: oracle.width().max(index.width),
            });
        }
        if unary.width != order || order == 0 {
            return Err(SimError::DimensionMismatch {
                expected: order,
                got: unary.width,
            });
        }
        if system.overlaps(&index) || system.overlaps(&unary) || index.overlaps(&unary) {
            return Err(SimError::OverlappingQubits);
        }
        if ratio <= 0.0 || ratio > LN2 + 1e-9 {
            return Err(SimError::InvalidInput(format!(
                "segment time {ratio} outside (0, ln 2]"
            )));
        }
        let mut weight_sum = 0.0;
        let mut term = 1.0;
        for k in 0..=order {
            if k > 0 {
                term *= ratio / k as f64;
            }
            weight_sum += term;
        }
        Ok(TaylorPipeline {
            oracle,
            system,
            index,
            unary,
            ratio,
            order,
            weight_sum,
        })
    }

    pub fn from_plan(
        oracle: &'a AmplitudeOracle,
        plan: &HamSimPlan,
        system_width: usize,
    ) -> Result<Self> {
        let system = Register {
            offset: 0,
            width: system_width,
        };
        let index = Register {
            offset: system_width,
            width: system_width,
        };
        let unary = Register {
            offset: 2 * system_width,
            width: plan.order,
        };
        TaylorPipeline::new(oracle, system, index, unary, plan.ratio, plan.order)
    }

    pub fn required_qubits(&self) -> usize {
        self.unary.offset + self.unary.width
    }

    /// Oracle invocations per direction in one bare segment circuit.
    pub fn calls_per_direction(&self) -> u64 {
        self.order as u64
    }

    /// Permutation over index (x) system that shifts the system by the
    /// index value; `add` selects the inverse shift direction.
    fn shift_matrix(&self, add: bool) -> DenseOperator {
        let n = self.system.dim();
        let dim = n * n;
        DenseOperator::from_fn(dim, dim, |row, col| {
            let s = col % n;
            let j = col / n;
            let mapped = if add { (s + j) % n } else { (s + n - j) % n };
            if row == mapped + n * j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// The post-selected segment map `G` (or its adjoint): prepared weight
    /// block on the unary register, `K` index-reused factor blocks with
    /// projection after each, unprepare, then the padding scalar.
    ///
    /// Leaves the state unnormalized; index and unary read zero afterward.
    pub fn apply_g(&self, state: &mut StateVector, adjoint: bool) -> Result<()> {
        prepare_unary_weights(state, self.unary, self.ratio, false, &[])?;
        // (-i)^k on the order-k branch; +i for the adjoint series.
        let unit = if adjoint {
            Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(0.0, -1.0)
        };
        state.phase_by_register(self.unary, &[], |v| unit.powu(v.count_ones()));
        let targets: Vec<usize> = self
            .system
            .qubits()
            .into_iter()
            .chain(self.index.qubits())
            .collect();
        let shift = self.shift_matrix(adjoint);
        for m in 0..self.order {
            let ctrl = self.unary.offset + m;
            self.oracle.apply(state, self.index, false, &[ctrl])?;
            state.apply_gate(&targets, &[ctrl], &shift, None)?;
            self.oracle.apply(state, self.index, true, &[ctrl])?;
            state.project_register_unnormalized(self.index, 0);
        }
        prepare_unary_weights(state, self.unary, self.ratio, true, &[])?;
        state.project_register_unnormalized(self.unary, 0);
        state.scale(Complex64::new(self.weight_sum / 2.0, 0.0));
        Ok(())
    }

    /// One amplified segment: `3 G - 4 G G' G` (primes swap under
    /// `adjoint`), which is the ancilla-zero block of one round of
    /// oblivious amplitude amplification at effective weight 2.
    pub fn apply_segment(&self, state: &mut StateVector, adjoint: bool) -> Result<()> {
        let mut first = state.clone();
        self.apply_g(&mut first, adjoint)?;
        let mut third = first.clone();
        self.apply_g(&mut third, !adjoint)?;
        self.apply_g(&mut third, adjoint)?;
        first.scale(Complex64::new(3.0, 0.0));
        first.accumulate(&third, Complex64::new(-4.0, 0.0))?;
        *state = first;
        Ok(())
    }

    /// Apply `count` segments to the component where `control` is set,
    /// leaving the rest of the state untouched. Matches the controlled
    /// circuit up to a global phase.
    pub fn apply_controlled_segments(
        &self,
        state: &mut StateVector,
        control: usize,
        count: usize,
        adjoint: bool,
    ) -> Result<()> {
        let creg = Register {
            offset: control,
            width: 1,
        };
        if creg.overlaps(&self.system) || creg.overlaps(&self.index) || creg.overlaps(&self.unary) {
            return Err(SimError::OverlappingQubits);
        }
        let mut active = state.clone();
        active.project_register_unnormalized(creg, 1);
        state.project_register_unnormalized(creg, 0);
        for _ in 0..count {
            self.apply_segment(&mut active, adjoint)?;
        }
        state.accumulate(&active, Complex64::new(1.0, 0.0))?;
        Ok(())
    }
}

/// Gate footprint of one bare segment circuit under the standard
/// decompositions: Draper shifts whose doubly controlled phases cost three
/// controlled phases and two entangling gates, and controlled rotations
/// costing two rotations and two entangling gates. Oracle calls are unit
/// cost and excluded.
pub fn segment_gate_tally(system_width: usize, order: usize) -> GateTally {
    let l = system_width as u64;
    let k = order as u64;
    let mut t = GateTally::default();
    // Order preparation and unpreparation: one bare rotation plus K-1
    // controlled rotations each.
    t.single_qubit += 2 * (1 + 2 * (k - 1));
    t.two_qubit_other += 2 * (2 * (k - 1));
    // Order phases.
    t.single_qubit += k;
    // K factor blocks: two uncontrolled cascades and l(l+1)/2 doubly
    // controlled phases each.
    t.single_qubit += k * 2 * l;
    t.controlled_phase += k * (2 * (l * (l - 1) / 2) + 3 * (l * (l + 1) / 2));
    t.two_qubit_other += k * (2 * (l * (l + 1) / 2));
    t
}

/// Result of a full evolution run.
#[derive(Clone, Debug)]
pub struct EvolutionOutcome {
    /// System register after all segments, renormalized.
    pub output: StateVector,
    /// Squared norm of the raw chained output; near 1 up to truncation.
    pub survival_weight: f64,
    /// Raw squared norm after each segment (cumulative).
    pub segment_weights: Vec<f64>,
    pub plan: HamSimPlan,
    /// Oracle calls per direction across the bare circuit: `r K`.
    pub calls_per_direction: u64,
    /// Oracle counter total including the amplification round's repeats.
    pub calls_total: u64,
    /// Analytic footprint of the `r` bare segment circuits; the
    /// amplification round triples the executed count.
    pub tally: GateTally,
}

/// Evolve `psi` under `e^{-iCt}` for a Hermitian nonnegative-weight
/// circulant, chaining amplified segments.
pub fn simulate_evolution(
    spec: &CirculantSpec,
    psi: &StateVector,
    time: f64,
    epsilon: f64,
) -> Result<EvolutionOutcome> {
    if spec.sign_mode != SignMode::Plain {
        return Err(SimError::InvalidInput(
            "evolution expects plain-signed weights".into(),
        ));
    }
    if !spec.is_hermitian() {
        return Err(SimError::InvalidInput(
            "evolution needs a Hermitian circulant (c_j = c_{N-j})".into(),
        ));
    }
    let l = spec.width();
    if psi.num_qubits() != l {
        return Err(SimError::DimensionMismatch {
            expected: l,
            got: psi.num_qubits(),
        });
    }
    let plan = plan_evolution(time, epsilon, l)?;
    if plan.segments == 0 {
        return Ok(EvolutionOutcome {
            output: psi.clone(),
            survival_weight: 1.0,
            segment_weights: Vec::new(),
            plan,
            calls_per_direction: 0,
            calls_total: 0,
            tally: GateTally::default(),
        });
    }
    let oracle = AmplitudeOracle::for_weights(spec.weights())?;
    let pipeline = TaylorPipeline::from_plan(&oracle, &plan, l)?;
    let mut state = psi.extended(pipeline.required_qubits() - l)?;
    let mut segment_weights = Vec::with_capacity(plan.segments);
    for _ in 0..plan.segments {
        pipeline.apply_segment(&mut state, false)?;
        segment_weights.push(state.norm() * state.norm());
    }
    let survival_weight = *segment_weights.last().expect("at least one segment");
    let output = state.extract_register(pipeline.system)?;
    Ok(EvolutionOutcome {
        output,
        survival_weight,
        segment_weights,
        calls_per_direction: plan.segments as u64 * pipeline.calls_per_direction(),
        calls_total: oracle.calls(),
        tally: segment_gate_tally(l, plan.order).scaled(plan.segments as u64),
        plan,
    })
}

/// Dense truncated series `sum_{k<=K} (-i ratio)^k / k! C^k` (or its
/// adjoint), for checking the pipeline against plain matrix algebra.
pub fn dense_truncated_series(
    c: &DenseOperator,
    ratio: f64,
    order: usize,
    adjoint: bool,
) -> Result<DenseOperator> {
    let n = c.rows();
    let unit = if adjoint {
        Complex64::new(0.0, 1.0)
    } else {
        Complex64::new(0.0, -1.0)
    };
    let base = if adjoint { c.dagger() } else { c.clone() };
    let mut sum = DenseOperator::identity(n);
    let mut power = DenseOperator::identity(n);
    let mut coeff = Complex64::new(1.0, 0.0);
    for k in 1..=order {
        power = power.matmul(&base)?;
        coeff *= unit * ratio / k as f64;
        sum = sum.add(&power.scaled(coeff))?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{l2_norm, normalized, oracle_matfun};
    use crate::state::state_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(width: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<Complex64> = (0..1usize << width)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        StateVector::from_amplitudes(normalized(&amps).unwrap()).unwrap()
    }

    fn hermitian_weights(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = vec![0.0; n];
        for j in 0..=n / 2 {
            let w = rng.gen::<f64>() + 0.05;
            c[j] = w;
            c[(n - j) % n] = w;
        }
        c
    }

    #[test]
    fn plan_matches_frozen_examples() {
        let p = plan_evolution(4.0, 1e-3, 2).unwrap();
        assert_eq!((p.segments, p.order), (6, 6));
        let p = plan_evolution(0.5, 1e-5, 2).unwrap();
        assert_eq!((p.segments, p.order), (1, 7));
        let p = plan_evolution(4.0, 1e-5, 2).unwrap();
        assert_eq!((p.segments, p.order), (6, 8));
    }

    #[test]
    fn plan_respects_the_register_budget() {
        match plan_evolution(4.0, 1e-5, 10) {
            Err(SimError::ResourceLimit { qubits, cap }) => {
                assert_eq!(qubits, 28);
                assert_eq!(cap, QUBIT_CAP);
            }
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn prepared_weight_sits_below_two_within_the_tail() {
        for (t, eps) in [(0.5, 1e-3), (1.0, 1e-3), (4.0, 1e-5)] {
            let p = plan_evolution(t, eps, 2).unwrap();
            assert!(p.weight_sum < 2.0);
            // The gap to e^{ratio} is the raw series remainder.
            assert!((p.ratio.exp() - p.weight_sum).abs() <= p.tail_bound);
        }
    }

    #[test]
    fn g_map_is_the_scaled_truncated_series() {
        let c = hermitian_weights(4, 7);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let oracle = AmplitudeOracle::for_weights(spec.weights()).unwrap();
        let plan = plan_evolution(0.6, 1e-3, 2).unwrap();
        let pipeline = TaylorPipeline::from_plan(&oracle, &plan, 2).unwrap();
        let psi = random_state(2, 11);
        for adjoint in [false, true] {
            let mut state = psi.extended(pipeline.required_qubits() - 2).unwrap();
            pipeline.apply_g(&mut state, adjoint).unwrap();
            let series =
                dense_truncated_series(&spec.dense(), plan.ratio, plan.order, adjoint).unwrap();
            let expect = series.scaled(Complex64::new(0.5, 0.0));
            let want = expect.matvec(psi.amplitudes()).unwrap();
            for (v, w) in state.amplitudes().iter().take(4).zip(want.iter()) {
                assert!((v - w).norm() < 1e-12, "G map drifted from the series");
            }
        }
    }

    #[test]
    fn segment_matches_the_dense_amplification_formula() {
        let c = hermitian_weights(4, 19);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let oracle = AmplitudeOracle::for_weights(spec.weights()).unwrap();
        let plan = plan_evolution(0.5, 1e-3, 2).unwrap();
        let pipeline = TaylorPipeline::from_plan(&oracle, &plan, 2).unwrap();
        let psi = random_state(2, 23);
        let mut state = psi.extended(pipeline.required_qubits() - 2).unwrap();
        pipeline.apply_segment(&mut state, false).unwrap();
        // 3 G - 4 G G† G with G = series / 2.
        let series = dense_truncated_series(&spec.dense(), plan.ratio, plan.order, false).unwrap();
        let g = series.scaled(Complex64::new(0.5, 0.0));
        let ggg = g.matmul(&g.dagger()).unwrap().matmul(&g).unwrap();
        let seg = g
            .scaled(Complex64::new(3.0, 0.0))
            .add(&ggg.scaled(Complex64::new(-4.0, 0.0)))
            .unwrap();
        let want = seg.matvec(psi.amplitudes()).unwrap();
        for (v, w) in state.amplitudes().iter().take(4).zip(want.iter()) {
            assert!((v - w).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_phase_hamiltonian_evolves_exactly() {
        let spec = CirculantSpec::new(&[1.0, 0.0, 0.0, 0.0], SignMode::Plain).unwrap();
        let psi = random_state(2, 3);
        let out = simulate_evolution(&spec, &psi, 2.0, 1e-5).unwrap();
        // C = I, so the target is a global phase e^{-2i}.
        let d = state_distance(&out.output, &psi, true).unwrap();
        assert!(d < 1e-5, "distance {d}");
        assert!((out.survival_weight - 1.0).abs() < 1e-4);
    }

    #[test]
    fn random_hermitian_evolution_tracks_the_exponential() {
        let c = hermitian_weights(4, 31);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let psi = random_state(2, 37);
        let t = 1.3;
        let eps = 1e-3;
        let out = simulate_evolution(&spec, &psi, t, eps).unwrap();
        let target = oracle_matfun(spec.weights(), SignMode::Plain, |lam| {
            (Complex64::new(0.0, -t) * lam).exp()
        })
        .unwrap()
        .matvec(psi.amplitudes())
        .unwrap();
        // Compare the raw (weighted) output against the exact evolution.
        let raw: Vec<Complex64> = out
            .output
            .amplitudes()
            .iter()
            .map(|a| a * out.survival_weight.sqrt())
            .collect();
        let resid: f64 = raw
            .iter()
            .zip(target.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(resid <= 10.0 * eps, "residual {resid}");
        assert!(l2_norm(&target) > 0.9);
    }

    #[test]
    fn single_segment_error_is_within_the_per_segment_budget() {
        let c = hermitian_weights(4, 41);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let eps = 1e-4;
        let plan = plan_evolution(0.6, eps, 2).unwrap();
        assert_eq!(plan.segments, 1);
        let oracle = AmplitudeOracle::for_weights(spec.weights()).unwrap();
        let pipeline = TaylorPipeline::from_plan(&oracle, &plan, 2).unwrap();
        let psi = random_state(2, 43);
        let mut state = psi.extended(pipeline.required_qubits() - 2).unwrap();
        pipeline.apply_segment(&mut state, false).unwrap();
        let target = oracle_matfun(spec.weights(), SignMode::Plain, |lam| {
            (Complex64::new(0.0, -plan.ratio) * lam).exp()
        })
        .unwrap()
        .matvec(psi.amplitudes())
        .unwrap();
        let resid: f64 = state
            .amplitudes()
            .iter()
            .take(4)
            .zip(target.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(resid <= 10.0 * eps, "residual {resid}");
    }

    #[test]
    fn adjoint_segments_run_time_backward() {
        let c = hermitian_weights(4, 47);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let oracle = AmplitudeOracle::for_weights(spec.weights()).unwrap();
        let plan = plan_evolution(0.5, 1e-4, 2).unwrap();
        let pipeline = TaylorPipeline::from_plan(&oracle, &plan, 2).unwrap();
        let psi = random_state(2, 53);
        let mut state = psi.extended(pipeline.required_qubits() - 2).unwrap();
        pipeline.apply_segment(&mut state, false).unwrap();
        pipeline.apply_segment(&mut state, true).unwrap();
        let back = state.extract_register(pipeline.system).unwrap();
        let d = state_distance(&back, &psi, false).unwrap();
        assert!(d < 1e-3, "distance {d}");
    }

    #[test]
    fn oracle_counters_track_the_call_budget() {
        let c = hermitian_weights(4, 59);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let psi = random_state(2, 61);
        let out = simulate_evolution(&spec, &psi, 1.0, 1e-3).unwrap();
        let r = out.plan.segments as u64;
        let k = out.plan.order as u64;
        assert_eq!(out.calls_per_direction, r * k);
        // The amplification round runs the pipeline three times, each with
        // K forward and K inverse calls.
        assert_eq!(out.calls_total, 6 * r * k);
    }

    #[test]
    fn controlled_segments_leave_the_off_branch_alone() {
        let c = hermitian_weights(4, 67);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let oracle = AmplitudeOracle::for_weights(spec.weights()).unwrap();
        let plan = plan_evolution(0.6, 1e-4, 2).unwrap();
        let pipeline = TaylorPipeline::from_plan(&oracle, &plan, 2).unwrap();
        let base = pipeline.required_qubits();
        let control = base;
        let psi = random_state(2, 71);
        // (alpha |0> + beta |1>) on the control, psi on the system.
        let alpha = Complex64::new(0.8, 0.0);
        let beta = Complex64::new(0.0, 0.6);
        let mut state = psi.extended(base + 1 - 2).unwrap();
        {
            let dim = 1 << base;
            let amps = state.amplitudes().to_vec();
            let mut full = vec![Complex64::new(0.0, 0.0); 2 * dim];
            for i in 0..dim {
                full[i] = alpha * amps[i];
                full[dim + i] = beta * amps[i];
            }
            state = StateVector::from_amplitudes(full).unwrap();
        }
        pipeline
            .apply_controlled_segments(&mut state, control, 1, false)
            .unwrap();
        let series = dense_truncated_series(&spec.dense(), plan.ratio, plan.order, false).unwrap();
        let g = series.scaled(Complex64::new(0.5, 0.0));
        let ggg = g.matmul(&g.dagger()).unwrap().matmul(&g).unwrap();
        let seg = g
            .scaled(Complex64::new(3.0, 0.0))
            .add(&ggg.scaled(Complex64::new(-4.0, 0.0)))
            .unwrap();
        let evolved = seg.matvec(psi.amplitudes()).unwrap();
        let dim = 1 << base;
        for i in 0..4 {
            let want0 = alpha * psi.amplitudes()[i];
            let want1 = beta * evolved[i];
            assert!((state.amplitudes()[i] - want0).norm() < 1e-12);
            assert!((state.amplitudes()[dim + i] - want1).norm() < 1e-12);
        }
    }

    /// The linchpin equivalence: the index-reused, formula-amplified
    /// segment equals one literal amplification round over the full bank
    /// of per-factor index registers plus the padding qubit.
    #[test]
    fn segment_agrees_with_the_literal_full_bank_round() {
        let l = 2usize;
        let k = 3usize;
        let ratio = 0.6;
        let c = hermitian_weights(4, 73);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let oracle = AmplitudeOracle::for_weights(spec.weights()).unwrap();

        // Compact pipeline answer.
        let pipeline = TaylorPipeline::new(
            &oracle,
            Register { offset: 0, width: l },
            Register { offset: l, width: l },
            Register {
                offset: 2 * l,
                width: k,
            },
            ratio,
            k,
        )
        .unwrap();
        let psi = random_state(l, 79);
        let mut compact = psi.extended(pipeline.required_qubits() - l).unwrap();
        pipeline.apply_segment(&mut compact, false).unwrap();

        // Literal layout: system, k index registers, unary, padding qubit.
        let system = Register { offset: 0, width: l };
        let banks: Vec<Register> = (0..k)
            .map(|m| Register {
                offset: l + m * l,
                width: l,
            })
            .collect();
        let unary = Register {
            offset: l + k * l,
            width: k,
        };
        let pad = Register {
            offset: unary.offset + k,
            width: 1,
        };
        let total = pad.offset + 1;
        let s_raw: f64 = (0..=k)
            .map(|j| ratio.powi(j as i32) / (1..=j).product::<usize>().max(1) as f64)
            .sum();
        let phi = 2.0 * (s_raw / 2.0).acos();
        let pad_ry = crate::gates::ry_matrix(phi);
        let shift_sub = pipeline.shift_matrix(false);
        let shift_add = pipeline.shift_matrix(true);

        let apply_a = |state: &mut StateVector, adjoint: bool| -> Result<()> {
            let unit = if adjoint {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, -1.0)
            };
            if !adjoint {
                state.apply_gate(&[pad.offset], &[], &pad_ry, None)?;
                prepare_unary_weights(state, unary, ratio, false, &[])?;
                for bank in &banks {
                    oracle.apply(state, *bank, false, &[])?;
                }
                state.phase_by_register(unary, &[], |v| unit.powu(v.count_ones()));
                for (m, bank) in banks.iter().enumerate() {
                    // Address the bank and system jointly by explicit gate
                    // targets: system bits first, then bank bits.
                    let targets: Vec<usize> = system
                        .qubits()
                        .into_iter()
                        .chain(bank.qubits())
                        .collect();
                    state.apply_gate(&targets, &[unary.offset + m], &shift_sub, None)?;
                }
                for bank in &banks {
                    oracle.apply(state, *bank, true, &[])?;
                }
                prepare_unary_weights(state, unary, ratio, true, &[])?;
            } else {
                prepare_unary_weights(state, unary, ratio, false, &[])?;
                for bank in &banks {
                    oracle.apply(state, *bank, false, &[])?;
                }
                state.phase_by_register(unary, &[], |v| unit.powu(v.count_ones()));
                for (m, bank) in banks.iter().enumerate() {
                    let targets: Vec<usize> = system
                        .qubits()
                        .into_iter()
                        .chain(bank.qubits())
                        .collect();
                    state.apply_gate(&targets, &[unary.offset + m], &shift_add, None)?;
                }
                for bank in &banks {
                    oracle.apply(state, *bank, true, &[])?;
                }
                prepare_unary_weights(state, unary, ratio, true, &[])?;
                state.apply_gate(&[pad.offset], &[], &pad_ry.dagger(), None)?;
            }
            Ok(())
        };

        let init = psi.extended(total - l).unwrap();
        let ancilla = Register {
            offset: l,
            width: total - l,
        };
        let mut apply_a = apply_a;
        let literal = crate::lcu::oaa_step(&init, ancilla, &mut apply_a).unwrap();

        // Both give the same system block; the literal round carries the
        // global minus sign of the amplification operator.
        let raw_norm = compact.norm();
        let lit_sys = literal.output.extract_register(system).unwrap();
        let comp_sys = compact.extract_register(system).unwrap();
        let d = state_distance(&comp_sys, &lit_sys, true).unwrap();
        assert!(d < 1e-10, "system mismatch {d}");
        assert!(
            (literal.success_probability - raw_norm * raw_norm).abs() < 1e-10,
            "weight mismatch: literal {} compact {}",
            literal.success_probability,
            raw_norm * raw_norm
        );
    }

    #[test]
    fn zero_time_is_the_identity() {
        let spec = CirculantSpec::new(&[0.5, 0.25, 0.0, 0.25], SignMode::Plain).unwrap();
        let psi = random_state(2, 83);
        let out = simulate_evolution(&spec, &psi, 0.0, 1e-3).unwrap();
        assert_eq!(out.plan.segments, 0);
        assert_eq!(out.calls_total, 0);
        for (a, b) in out.output.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() == 0.0);
        }
    }

    #[test]
    fn error_is_monotone_in_the_series_order() {
        let c = hermitian_weights(4, 89);
        let spec = CirculantSpec::new(&c, SignMode::Plain).unwrap();
        let oracle = AmplitudeOracle::for_weights(spec.weights()).unwrap();
        let psi = random_state(2, 97);
        let ratio = 0.65;
        let target = oracle_matfun(spec.weights(), SignMode::Plain, |lam| {
            (Complex64::new(0.0, -ratio) * lam).exp()
        })
        .unwrap()
        .matvec(psi.amplitudes())
        .unwrap();
        let mut last = f64::INFINITY;
        for order in [4usize, 5, 6] {
            let pipeline = TaylorPipeline::new(
                &oracle,
                Register { offset: 0, width: 2 },
                Register { offset: 2, width: 2 },
                Register {
                    offset: 4,
                    width: order,
                },
                ratio,
                order,
            )
            .unwrap();
            let mut state = psi.extended(pipeline.required_qubits() - 2).unwrap();
            pipeline.apply_segment(&mut state, false).unwrap();
            let d: f64 = state
                .amplitudes()
                .iter()
                .take(4)
                .zip(target.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(d <= last + 1e-12, "order {order}: {d} vs {last}");
            last = d;
        }
    }

    #[test]
    fn tally_formula_counts_one_segment() {
        let t = segment_gate_tally(2, 3);
        // Preparation pair: 2 (1 + 2*2) singles, 2 * 4 entanglers; phases 3;
        // factors: 3 * (2*2) singles, 3 * (2*1 + 3*3) controlled phases,
        // 3 * (2*3) entanglers.
        assert_eq!(t.single_qubit, 10 + 3 + 12);
        assert_eq!(t.controlled_phase, 33);
        assert_eq!(t.two_qubit_other, 8 + 18);
    }
}
