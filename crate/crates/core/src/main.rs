//! Command-line front end: load operator and state files, run the quantum
//! pipelines, cross-check every output against dense linear algebra, and
//! emit a machine-readable report.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 when an
//! input cannot be read or parsed. Reports are reproducible bit for bit
//! under fixed inputs and seed: input files enter as content digests and
//! nothing time- or host-dependent is recorded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use circulant_sim::arith::{adder_gate_counts, apply_adder, fitted_exponent, Backend};
use circulant_sim::circulant::{
    apply_block_cb, apply_block_ub, apply_circulant, apply_hankel, apply_toeplitz, BandedSpec,
    BlockKind, CbSpec, CirculantSpec, UbSpec,
};
use circulant_sim::cyclic::{
    assemble_system, solve_cyclic, travelling_wave_force, CyclicSystemSpec,
};
use circulant_sim::dense::{
    cyclic_convolution, l2_distance, oracle_matfun, DenseOperator, SignMode,
};
use circulant_sim::gates::GateTally;
use circulant_sim::hamsim::simulate_evolution;
use circulant_sim::hhl::{invert_circulant, InversionBackend, InversionPlan};
use circulant_sim::product::{apply_product_circulant, ProductOracle};
use circulant_sim::state::{state_distance, Register, StateVector};

#[derive(Parser)]
#[command(name = "circsim", version, about = "Circulant operator pipelines with built-in verification")]
struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    /// Seed for randomized verification cases.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    /// Decompose into elementary gates and tally them.
    Gate,
    /// Apply equivalent permutations and register unitaries in one step.
    Perm,
}

impl BackendArg {
    fn backend(self) -> Backend {
        match self {
            BackendArg::Gate => Backend::GateLevel,
            BackendArg::Perm => Backend::Fast,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Eigenphase propagation through the diagonalizing transform.
    Exact,
    /// Series-segment evolution for every controlled power.
    Taylor,
}

#[derive(Subcommand)]
enum Cmd {
    /// Apply a circulant operator to a state and post-select.
    Apply {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value = "perm")]
        backend: BackendArg,
    },
    /// Apply a banded Toeplitz operator through its circulant embedding.
    Toeplitz {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value = "perm")]
        backend: BackendArg,
    },
    /// Apply a banded Hankel operator (reversed Toeplitz after a flip).
    Hankel {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value = "perm")]
        backend: BackendArg,
    },
    /// Apply a block circulant: unitary blocks or circulant blocks.
    Block {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value = "perm")]
        backend: BackendArg,
    },
    /// Evolve a state under the circulant Hamiltonian for a given time.
    Hamsim {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
    },
    /// Solve the circulant linear system for a state.
    Invert {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Override the planned rotation constant.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
    },
    /// Apply a product of circulants through the shared-index oracle.
    Product {
        /// Factor spec files, repeated once per factor.
        #[arg(long, required = true)]
        spec: Vec<PathBuf>,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value = "perm")]
        backend: BackendArg,
    },
    /// Solve a cyclic steady-state vibration system end to end.
    Cyclic {
        #[arg(long)]
        spec: PathBuf,
        /// Override the accuracy stored in the system file.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run a randomized verification suite against the dense oracles.
    Verify {
        /// One of: lcu, banded, blocks, hamsim, invert, product, cyclic,
        /// adder, all.
        #[arg(long)]
        suite: String,
        /// Register width for the randomized cases.
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "perm")]
        backend: BackendArg,
    },
    /// Tabulate elementary-gate counts and fit the scaling exponent.
    Gatecount {
        #[arg(long, default_value = "adder")]
        op: String,
        /// Width or inclusive width range, e.g. `3` or `2..10`.
        #[arg(long = "L", default_value = "2..10")]
        l: String,
    },
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

#[derive(Serialize)]
struct RunReport {
    command: String,
    seed: u64,
    /// SHA-256 digest per input file.
    inputs: BTreeMap<String, String>,
    outputs: Value,
    checks: Vec<Check>,
}

type CliResult<T> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let report = match run(&cli, argv.join(" ")) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let all_passed = report.checks.iter().all(|c| c.passed);
    let text = match serde_json::to_string_pretty(&report) {
        Ok(t) => t + "\n",
        Err(e) => {
            eprintln!("error: serializing report: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(path) = &cli.report {
        if let Err(e) = fs::write(path, &text) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    } else {
        print!("{text}");
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        for c in report.checks.iter().filter(|c| !c.passed) {
            eprintln!("check failed: {}: {}", c.name, c.detail);
        }
        ExitCode::from(1)
    }
}

fn run(cli: &Cli, command: String) -> CliResult<RunReport> {
    let mut inputs = BTreeMap::new();
    let (outputs, checks) = match &cli.command {
        Cmd::Apply {
            spec,
            state,
            backend,
        } => run_apply(spec, state, backend.backend(), &mut inputs)?,
        Cmd::Toeplitz {
            spec,
            state,
            backend,
        } => run_banded(spec, state, false, backend.backend(), &mut inputs)?,
        Cmd::Hankel {
            spec,
            state,
            backend,
        } => run_banded(spec, state, true, backend.backend(), &mut inputs)?,
        Cmd::Block {
            spec,
            state,
            backend,
        } => run_block(spec, state, backend.backend(), &mut inputs)?,
        Cmd::Hamsim {
            spec,
            state,
            time,
            epsilon,
        } => run_hamsim(spec, state, *time, *epsilon, &mut inputs)?,
        Cmd::Invert {
            spec,
            state,
            epsilon,
            kappa,
            method,
        } => run_invert(spec, state, *epsilon, *kappa, *method, &mut inputs)?,
        Cmd::Product {
            spec,
            state,
            backend,
        } => run_product(spec, state, backend.backend(), &mut inputs)?,
        Cmd::Cyclic { spec, epsilon } => run_cyclic(spec, *epsilon, &mut inputs)?,
        Cmd::Verify {
            suite,
            l,
            epsilon,
            backend,
        } => run_verify(suite, *l, *epsilon, backend.backend(), cli.seed)?,
        Cmd::Gatecount { op, l } => run_gatecount(op, l)?,
    };
    Ok(RunReport {
        command,
        seed: cli.seed,
        inputs,
        outputs,
        checks,
    })
}

// ---------------------------------------------------------------- loaders

fn digest_into(inputs: &mut BTreeMap<String, String>, path: &Path) -> CliResult<()> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    inputs.insert(path.display().to_string(), format!("{:x}", h.finalize()));
    Ok(())
}

fn parse_file(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn field<'a>(v: &'a Value, name: &str, path: &Path) -> CliResult<&'a Value> {
    v.get(name)
        .ok_or_else(|| format!("{}: missing field `{name}`", path.display()))
}

fn f64_value(v: &Value, name: &str, path: &Path) -> CliResult<f64> {
    v.as_f64()
        .ok_or_else(|| format!("{}: field `{name}`: expected a number", path.display()))
}

fn f64_array(v: &Value, name: &str, path: &Path) -> CliResult<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| format!("{}: field `{name}`: expected an array", path.display()))?;
    arr.iter().map(|x| f64_value(x, name, path)).collect()
}

fn complex_value(v: &Value, name: &str, path: &Path) -> CliResult<Complex64> {
    let pair = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
        format!(
            "{}: field `{name}`: expected a [re, im] pair",
            path.display()
        )
    })?;
    Ok(Complex64::new(
        f64_value(&pair[0], name, path)?,
        f64_value(&pair[1], name, path)?,
    ))
}

fn complex_array(v: &Value, name: &str, path: &Path) -> CliResult<Vec<Complex64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| format!("{}: field `{name}`: expected an array", path.display()))?;
    arr.iter().map(|x| complex_value(x, name, path)).collect()
}

fn load_state(path: &Path) -> CliResult<StateVector> {
    let v = parse_file(path)?;
    let amps = complex_array(field(&v, "amplitudes", path)?, "amplitudes", path)?;
    StateVector::from_amplitudes(amps).map_err(|e| format!("{}: {e}", path.display()))
}

enum OperatorSpec {
    Circulant(CirculantSpec),
    Toeplitz(BandedSpec),
    Hankel(BandedSpec),
    BlockUb(UbSpec),
    BlockCb(CbSpec),
}

fn load_operator(path: &Path) -> CliResult<OperatorSpec> {
    let v = parse_file(path)?;
    let kind = field(&v, "kind", path)?
        .as_str()
        .ok_or_else(|| format!("{}: field `kind`: expected a string", path.display()))?;
    let wrap = |e: circulant_sim::SimError| format!("{}: {e}", path.display());
    match kind {
        "circulant" => {
            let weights = f64_array(field(&v, "weights", path)?, "weights", path)?;
            let mode = match v.get("sign_mode").and_then(|m| m.as_str()) {
                None | Some("plain") => SignMode::Plain,
                Some("negate_v0") => SignMode::NegateV0,
                Some(other) => {
                    return Err(format!(
                        "{}: field `sign_mode`: expected `plain` or `negate_v0`, got `{other}`",
                        path.display()
                    ))
                }
            };
            Ok(OperatorSpec::Circulant(
                CirculantSpec::new(&weights, mode).map_err(wrap)?,
            ))
        }
        "toeplitz" | "hankel" => {
            let band = f64_array(field(&v, "band", path)?, "band", path)?;
            let spec = BandedSpec::new(&band).map_err(wrap)?;
            Ok(if kind == "toeplitz" {
                OperatorSpec::Toeplitz(spec)
            } else {
                OperatorSpec::Hankel(spec)
            })
        }
        "block_ub" => {
            let weights = f64_array(field(&v, "weights", path)?, "weights", path)?;
            let kind = if let Some(theta) = v.get("phase_rule") {
                BlockKind::PhaseRule(f64_value(theta, "phase_rule", path)?)
            } else {
                let raw = field(&v, "blocks", path)?
                    .as_array()
                    .ok_or_else(|| {
                        format!("{}: field `blocks`: expected an array", path.display())
                    })?;
                let mut blocks = Vec::with_capacity(raw.len());
                for b in raw {
                    blocks.push(load_matrix(b, "blocks", path)?);
                }
                BlockKind::Explicit(blocks)
            };
            Ok(OperatorSpec::BlockUb(
                UbSpec::new(&weights, kind).map_err(wrap)?,
            ))
        }
        "block_cb" => {
            let rows = field(&v, "weights", path)?
                .as_array()
                .ok_or_else(|| format!("{}: field `weights`: expected an array", path.display()))?;
            let mut weights = Vec::with_capacity(rows.len());
            for r in rows {
                weights.push(f64_array(r, "weights", path)?);
            }
            Ok(OperatorSpec::BlockCb(CbSpec::new(&weights).map_err(wrap)?))
        }
        other => Err(format!(
            "{}: field `kind`: unknown operator kind `{other}`",
            path.display()
        )),
    }
}

fn load_matrix(v: &Value, name: &str, path: &Path) -> CliResult<DenseOperator> {
    let rows = v
        .as_array()
        .ok_or_else(|| format!("{}: field `{name}`: expected a matrix", path.display()))?;
    let n = rows.len();
    let mut m = DenseOperator::identity(n);
    for (i, r) in rows.iter().enumerate() {
        let entries = complex_array(r, name, path)?;
        if entries.len() != n {
            return Err(format!(
                "{}: field `{name}`: row {i} has {} entries, expected {n}",
                path.display(),
                entries.len()
            ));
        }
        for (j, x) in entries.into_iter().enumerate() {
            m.set(i, j, x);
        }
    }
    Ok(m)
}

fn expect_circulant(op: OperatorSpec, path: &Path) -> CliResult<CirculantSpec> {
    match op {
        OperatorSpec::Circulant(c) => Ok(c),
        _ => Err(format!(
            "{}: field `kind`: this command needs a `circulant` spec",
            path.display()
        )),
    }
}

// ----------------------------------------------------------- serialization

fn complex_json(amps: &[Complex64]) -> Value {
    Value::Array(amps.iter().map(|a| json!([a.re, a.im])).collect())
}

fn tally_json(t: &GateTally) -> Value {
    json!({
        "single_qubit": t.single_qubit,
        "controlled_phase": t.controlled_phase,
        "two_qubit_other": t.two_qubit_other,
        "total": t.total(),
    })
}

/// The pipeline's unnormalized success-branch state `sqrt(p) . output`.
fn unnormalized(output: &StateVector, p: f64) -> Vec<Complex64> {
    output
        .amplitudes()
        .iter()
        .map(|a| a * p.sqrt())
        .collect()
}

// ------------------------------------------------------------- subcommands

fn agreement_checks(
    output: &StateVector,
    p: f64,
    dense: &DenseOperator,
    psi: &StateVector,
) -> CliResult<Vec<Check>> {
    let expect = dense
        .matvec(psi.amplitudes())
        .map_err(|e| e.to_string())?;
    let got = unnormalized(output, p);
    let dev = l2_distance(&got, &expect);
    let p_expect: f64 = expect.iter().map(|x| x.norm_sqr()).sum();
    Ok(vec![
        check(
            "dense_agreement",
            dev <= 1e-10,
            format!("deviation {dev:.3e} (bound 1.0e-10)"),
        ),
        check(
            "probability_match",
            (p - p_expect).abs() <= 1e-10,
            format!("pipeline {p:.12} vs dense {p_expect:.12}"),
        ),
    ])
}

fn run_apply(
    spec_path: &Path,
    state_path: &Path,
    backend: Backend,
    inputs: &mut BTreeMap<String, String>,
) -> CliResult<(Value, Vec<Check>)> {
    digest_into(inputs, spec_path)?;
    digest_into(inputs, state_path)?;
    let spec = expect_circulant(load_operator(spec_path)?, spec_path)?;
    let psi = load_state(state_path)?;
    let out = apply_circulant(&spec, &psi, None, None, backend).map_err(|e| e.to_string())?;
    let checks = agreement_checks(&out.output, out.success_probability, &spec.dense(), &psi)?;
    let outputs = json!({
        "success_probability": out.success_probability,
        "scale": out.scale,
        "output": complex_json(out.output.amplitudes()),
        "gate_tally": tally_json(&out.tally),
        "oracle_calls": out.oracle_calls,
    });
    Ok((outputs, checks))
}

fn run_banded(
    spec_path: &Path,
    state_path: &Path,
    hankel: bool,
    backend: Backend,
    inputs: &mut BTreeMap<String, String>,
) -> CliResult<(Value, Vec<Check>)> {
    digest_into(inputs, spec_path)?;
    digest_into(inputs, state_path)?;
    let psi = load_state(state_path)?;
    let (out, dense) = match (load_operator(spec_path)?, hankel) {
        (OperatorSpec::Toeplitz(s), false) => {
            let d = s.dense_toeplitz();
            (
                apply_toeplitz(&s, &psi, None, None, backend).map_err(|e| e.to_string())?,
                d,
            )
        }
        (OperatorSpec::Hankel(s), true) => {
            let d = s.dense_hankel();
            (
                apply_hankel(&s, &psi, None, None, backend).map_err(|e| e.to_string())?,
                d,
            )
        }
        _ => {
            let want = if hankel { "hankel" } else { "toeplitz" };
            return Err(format!(
                "{}: field `kind`: this command needs a `{want}` spec",
                spec_path.display()
            ));
        }
    };
    let checks = agreement_checks(&out.output, out.success_probability, &dense, &psi)?;
    let outputs = json!({
        "success_probability": out.success_probability,
        "scale": out.scale,
        "output": complex_json(out.output.amplitudes()),
        "gate_tally": tally_json(&out.tally),
        "oracle_calls": out.oracle_calls,
    });
    Ok((outputs, checks))
}

fn run_block(
    spec_path: &Path,
    state_path: &Path,
    backend: Backend,
    inputs: &mut BTreeMap<String, String>,
) -> CliResult<(Value, Vec<Check>)> {
    digest_into(inputs, spec_path)?;
    digest_into(inputs, state_path)?;
    let psi = load_state(state_path)?;
    let (out, dense) = match load_operator(spec_path)? {
        OperatorSpec::BlockUb(s) => {
            let d = s.dense().map_err(|e| e.to_string())?;
            (
                apply_block_ub(&s, &psi, backend).map_err(|e| e.to_string())?,
                d,
            )
        }
        OperatorSpec::BlockCb(s) => {
            let d = s.dense().map_err(|e| e.to_string())?;
            (
                apply_block_cb(&s, &psi, backend).map_err(|e| e.to_string())?,
                d,
            )
        }
        _ => {
            return Err(format!(
                "{}: field `kind`: this command needs a `block_ub` or `block_cb` spec",
                spec_path.display()
            ))
        }
    };
    let checks = agreement_checks(&out.output, out.success_probability, &dense, &psi)?;
    let outputs = json!({
        "success_probability": out.success_probability,
        "scale": out.scale,
        "output": complex_json(out.output.amplitudes()),
        "gate_tally": tally_json(&out.tally),
        "oracle_calls": out.oracle_calls,
    });
    Ok((outputs, checks))
}

fn run_hamsim(
    spec_path: &Path,
    state_path: &Path,
    time: f64,
    epsilon: f64,
    inputs: &mut BTreeMap<String, String>,
) -> CliResult<(Value, Vec<Check>)> {
    digest_into(inputs, spec_path)?;
    digest_into(inputs, state_path)?;
    let spec = expect_circulant(load_operator(spec_path)?, spec_path)?;
    let psi = load_state(state_path)?;
    let out = simulate_evolution(&spec, &psi, time, epsilon).map_err(|e| e.to_string())?;
    let unit = Complex64::new(0.0, -time);
    let evolved = oracle_matfun(spec.weights(), SignMode::Plain, |lam| (unit * lam).exp())
        .map_err(|e| e.to_string())?;
    let expect = evolved
        .matvec(psi.amplitudes())
        .map_err(|e| e.to_string())?;
    let dist = l2_distance(out.output.amplitudes(), &expect);
    let wanted_calls = (out.plan.segments * out.plan.order) as u64;
    let checks = vec![
        check(
            "distance_within_epsilon",
            dist <= epsilon,
            format!("distance {dist:.3e} (bound {epsilon:.1e})"),
        ),
        check(
            "calls_per_direction",
            out.calls_per_direction == wanted_calls,
            format!(
                "counted {} vs r.K = {wanted_calls}",
                out.calls_per_direction
            ),
        ),
    ];
    let outputs = json!({
        "plan": {
            "time": out.plan.time,
            "epsilon": out.plan.epsilon,
            "segments": out.plan.segments,
            "order": out.plan.order,
            "ratio": out.plan.ratio,
            "weight_sum": out.plan.weight_sum,
            "tail_bound": out.plan.tail_bound,
        },
        "survival_weight": out.survival_weight,
        "segment_weights": out.segment_weights,
        "calls_per_direction": out.calls_per_direction,
        "calls_total": out.calls_total,
        "gate_tally": tally_json(&out.tally),
        "output": complex_json(out.output.amplitudes()),
    });
    Ok((outputs, checks))
}

fn run_invert(
    spec_path: &Path,
    state_path: &Path,
    epsilon: f64,
    kappa: Option<f64>,
    method: MethodArg,
    inputs: &mut BTreeMap<String, String>,
) -> CliResult<(Value, Vec<Check>)> {
    digest_into(inputs, spec_path)?;
    digest_into(inputs, state_path)?;
    let spec = expect_circulant(load_operator(spec_path)?, spec_path)?;
    let psi = load_state(state_path)?;
    let backend = match method {
        MethodArg::Exact => InversionBackend::ExactDiagonal,
        MethodArg::Taylor => InversionBackend::Taylor,
    };
    let mut plan =
        InversionPlan::for_spec(&spec, epsilon, backend).map_err(|e| e.to_string())?;
    if let Some(k) = kappa {
        // An override re-derives the register size; validation still holds
        // it to the spectrum.
        plan.kappa = k;
        plan.phase_bits = ((k / epsilon).log2().ceil().max(0.0) as usize) + 2;
        plan.validate(&spec).map_err(|e| e.to_string())?;
    }
    let out = invert_circulant(&spec, &psi, &plan).map_err(|e| e.to_string())?;
    let inverse = oracle_matfun(spec.weights(), spec.sign_mode, |lam| 1.0 / lam)
        .map_err(|e| e.to_string())?;
    let mut expect = inverse
        .matvec(psi.amplitudes())
        .map_err(|e| e.to_string())?;
    let norm: f64 = expect.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for x in &mut expect {
        *x /= norm;
    }
    let reference = StateVector::from_amplitudes(expect).map_err(|e| e.to_string())?;
    let dist = state_distance(&out.output, &reference, true).map_err(|e| e.to_string())?;
    let floor = 1.0 / (plan.kappa * plan.kappa) - 2f64.powi(2 - plan.phase_bits as i32);
    let checks = vec![
        check(
            "direction_within_epsilon",
            dist <= 5.0 * epsilon,
            format!("distance {dist:.3e} (bound {:.1e})", 5.0 * epsilon),
        ),
        check(
            "probability_floor",
            out.success_probability >= floor - 1e-12,
            format!(
                "p = {:.6e} vs 1/kappa^2 - 2^(2-T) = {floor:.6e}",
                out.success_probability
            ),
        ),
    ];
    let outputs = json!({
        "plan": serde_json::to_value(&out.plan).map_err(|e| e.to_string())?,
        "success_probability": out.success_probability,
        "scale": out.scale,
        "phase_residual": out.phase_residual,
        "zero_branch_weight": out.zero_branch_weight,
        "clamped_branches": out.clamped_branches,
        "clamped_weight": out.clamped_weight,
        "spectrum_negated": out.spectrum_negated,
        "oracle_calls": out.oracle_calls,
        "output": complex_json(out.output.amplitudes()),
    });
    Ok((outputs, checks))
}

fn run_product(
    spec_paths: &[PathBuf],
    state_path: &Path,
    backend: Backend,
    inputs: &mut BTreeMap<String, String>,
) -> CliResult<(Value, Vec<Check>)> {
    if spec_paths.len() < 2 {
        return Err(format!(
            "product needs at least two --spec files, got {}",
            spec_paths.len()
        ));
    }
    let mut specs = Vec::with_capacity(spec_paths.len());
    for p in spec_paths {
        digest_into(inputs, p)?;
        specs.push(expect_circulant(load_operator(p)?, p)?);
    }
    digest_into(inputs, state_path)?;
    let psi = load_state(state_path)?;
    let out = apply_product_circulant(&specs, &psi, backend).map_err(|e| e.to_string())?;

    // Dense cross-checks: the applied operator is the matrix product, and
    // the joint coefficient oracle's output marginal is the convolution.
    let dim = specs[0].dim();
    let mut dense = DenseOperator::identity(dim);
    let mut conv = vec![0.0; dim];
    conv[0] = 1.0;
    for s in &specs {
        dense = dense.matmul(&s.dense()).map_err(|e| e.to_string())?;
        conv = cyclic_convolution(&conv, s.weights()).map_err(|e| e.to_string())?;
    }
    let mut checks = agreement_checks(&out.output, out.success_probability, &dense, &psi)?;
    let oracle = ProductOracle::from_specs(&specs).map_err(|e| e.to_string())?;
    let marginals = oracle.marginals(backend).map_err(|e| e.to_string())?;
    let conv_dev = marginals
        .iter()
        .zip(&conv)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    checks.push(check(
        "marginals_match_convolution",
        conv_dev <= 1e-12,
        format!("max deviation {conv_dev:.3e} (bound 1.0e-12)"),
    ));
    let outputs = json!({
        "success_probability": out.success_probability,
        "scale": out.scale,
        "marginals": marginals,
        "output": complex_json(out.output.amplitudes()),
        "oracle_calls": out.oracle_calls,
    });
    Ok((outputs, checks))
}

fn run_cyclic(
    spec_path: &Path,
    epsilon_override: Option<f64>,
    inputs: &mut BTreeMap<String, String>,
) -> CliResult<(Value, Vec<Check>)> {
    digest_into(inputs, spec_path)?;
    let v = parse_file(spec_path)?;
    let stiffness_row = f64_array(
        field(&v, "stiffness_row", spec_path)?,
        "stiffness_row",
        spec_path,
    )?;
    if let Some(n) = v.get("N") {
        let n = n
            .as_u64()
            .ok_or_else(|| format!("{}: field `N`: expected an integer", spec_path.display()))?;
        if n as usize != stiffness_row.len() {
            return Err(format!(
                "{}: field `N`: {} does not match stiffness_row length {}",
                spec_path.display(),
                n,
                stiffness_row.len()
            ));
        }
    }
    let order = field(&v, "n", spec_path)?
        .as_i64()
        .ok_or_else(|| format!("{}: field `n`: expected an integer", spec_path.display()))?;
    let omega = f64_value(field(&v, "Omega", spec_path)?, "Omega", spec_path)?;
    let f_amp = complex_value(
        field(&v, "force_amplitude", spec_path)?,
        "force_amplitude",
        spec_path,
    )?;
    let epsilon = match epsilon_override {
        Some(e) => e,
        None => f64_value(field(&v, "epsilon", spec_path)?, "epsilon", spec_path)?,
    };
    let observable = match v.get("observable") {
        None => None,
        Some(Value::String(rel)) => {
            let obs_path = spec_path.parent().unwrap_or(Path::new(".")).join(rel);
            digest_into(inputs, &obs_path)?;
            let ov = parse_file(&obs_path)?;
            Some(load_matrix(
                field(&ov, "matrix", &obs_path)?,
                "matrix",
                &obs_path,
            )?)
        }
        Some(_) => {
            return Err(format!(
                "{}: field `observable`: expected a file path string",
                spec_path.display()
            ))
        }
    };
    let sys = CyclicSystemSpec {
        stiffness_row,
        excitation_order: order,
        omega,
        force_amplitude: [f_amp.re, f_amp.im],
    };
    let sol =
        solve_cyclic(&sys, epsilon, observable.as_ref(), None).map_err(|e| e.to_string())?;

    // Assembly must reproduce the shifted matrix exactly up to the sign.
    let assembled = assemble_system(&sys).map_err(|e| e.to_string())?;
    let realized = assembled.spec.dense().scaled(Complex64::new(assembled.scale, 0.0));
    let a = assembled.dense_shifted();
    let mut asm_dev = 0.0f64;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            asm_dev = asm_dev.max((realized.get(i, j) + a.get(i, j)).norm());
        }
    }
    let checks = vec![
        check(
            "residual_within_epsilon",
            sol.residual <= epsilon,
            format!("residual {:.3e} (bound {epsilon:.1e})", sol.residual),
        ),
        check(
            "assembly_exact",
            asm_dev <= 1e-12,
            format!("max |scale.realized + A| = {asm_dev:.3e} (bound 1.0e-12)"),
        ),
    ];
    let outputs = json!({
        "case": serde_json::to_value(sol.case).map_err(|e| e.to_string())?,
        "magnitude": sol.magnitude,
        "phase": sol.phase,
        "residual": sol.residual,
        "success_probability": sol.success_probability,
        "condition_number": sol.condition_number,
        "weak_coupling": sol.weak_coupling,
        "plan": serde_json::to_value(&sol.plan).map_err(|e| e.to_string())?,
        "expectation": sol.expectation.map(|e| json!([e.re, e.im])),
        "output": complex_json(sol.state.amplitudes()),
    });
    Ok((outputs, checks))
}

// ------------------------------------------------------------ verification

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * 0.95 + 0.05).collect()
}

fn random_state(rng: &mut ChaCha8Rng, width: usize) -> StateVector {
    let amps: Vec<Complex64> = (0..1usize << width)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect())
        .expect("normalized by construction")
}

fn suite_lcu(l: usize, backend: Backend, rng: &mut ChaCha8Rng) -> CliResult<(Value, Vec<Check>)> {
    let n = 1usize << l;
    let mut max_dev = 0.0f64;
    for trial in 0..40 {
        let mode = if trial % 2 == 0 {
            SignMode::Plain
        } else {
            SignMode::NegateV0
        };
        let spec =
            CirculantSpec::new(&random_weights(rng, n), mode).map_err(|e| e.to_string())?;
        let psi = random_state(rng, l);
        let out = apply_circulant(&spec, &psi, None, None, backend).map_err(|e| e.to_string())?;
        let expect = spec.dense().matvec(psi.amplitudes()).map_err(|e| e.to_string())?;
        let dev = l2_distance(&unnormalized(&out.output, out.success_probability), &expect);
        max_dev = max_dev.max(dev);
    }
    let checks = vec![check(
        "lcu_dense_agreement",
        max_dev <= 1e-10,
        format!("max deviation {max_dev:.3e} over 40 cases (bound 1.0e-10)"),
    )];
    Ok((json!({ "cases": 40, "max_deviation": max_dev }), checks))
}

fn suite_banded(l: usize, backend: Backend, rng: &mut ChaCha8Rng) -> CliResult<(Value, Vec<Check>)> {
    let n = 1usize << l;
    let mut max_dev = 0.0f64;
    for trial in 0..30 {
        let band = random_weights(rng, 2 * n - 1);
        let spec = BandedSpec::new(&band).map_err(|e| e.to_string())?;
        let psi = random_state(rng, l);
        let (out, dense) = if trial % 2 == 0 {
            (
                apply_toeplitz(&spec, &psi, None, None, backend).map_err(|e| e.to_string())?,
                spec.dense_toeplitz(),
            )
        } else {
            (
                apply_hankel(&spec, &psi, None, None, backend).map_err(|e| e.to_string())?,
                spec.dense_hankel(),
            )
        };
        let expect = dense.matvec(psi.amplitudes()).map_err(|e| e.to_string())?;
        let dev = l2_distance(&unnormalized(&out.output, out.success_probability), &expect);
        max_dev = max_dev.max(dev);
    }
    let checks = vec![check(
        "banded_dense_agreement",
        max_dev <= 1e-10,
        format!("max deviation {max_dev:.3e} over 30 cases (bound 1.0e-10)"),
    )];
    Ok((json!({ "cases": 30, "max_deviation": max_dev }), checks))
}

fn suite_blocks(l: usize, backend: Backend, rng: &mut ChaCha8Rng) -> CliResult<(Value, Vec<Check>)> {
    let n = 1usize << l;
    let mut max_dev = 0.0f64;
    // Phase-rule blocks on the shift index.
    for _ in 0..10 {
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        let spec = UbSpec::new(&random_weights(rng, n), BlockKind::PhaseRule(theta))
            .map_err(|e| e.to_string())?;
        let psi = random_state(rng, spec.system_width());
        let out = apply_block_ub(&spec, &psi, backend).map_err(|e| e.to_string())?;
        let expect = spec
            .dense()
            .map_err(|e| e.to_string())?
            .matvec(psi.amplitudes())
            .map_err(|e| e.to_string())?;
        max_dev = max_dev.max(l2_distance(
            &unnormalized(&out.output, out.success_probability),
            &expect,
        ));
    }
    // Circulant blocks: random nonnegative inner rows.
    for _ in 0..10 {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| random_weights(rng, n)).collect();
        let spec = CbSpec::new(&rows).map_err(|e| e.to_string())?;
        let psi = random_state(rng, spec.system_width());
        let out = apply_block_cb(&spec, &psi, backend).map_err(|e| e.to_string())?;
        let expect = spec
            .dense()
            .map_err(|e| e.to_string())?
            .matvec(psi.amplitudes())
            .map_err(|e| e.to_string())?;
        max_dev = max_dev.max(l2_distance(
            &unnormalized(&out.output, out.success_probability),
            &expect,
        ));
    }
    let checks = vec![check(
        "block_dense_agreement",
        max_dev <= 1e-10,
        format!("max deviation {max_dev:.3e} over 20 cases (bound 1.0e-10)"),
    )];
    Ok((json!({ "cases": 20, "max_deviation": max_dev }), checks))
}

fn suite_hamsim(l: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> CliResult<(Value, Vec<Check>)> {
    let n = 1usize << l;
    let mut max_dist = 0.0f64;
    let mut cases = 0;
    for _ in 0..3 {
        // Hermitian circulant: mirror-symmetric weights.
        let mut c = random_weights(rng, n);
        for j in 1..n {
            c[n - j] = c[j];
        }
        let spec = CirculantSpec::new(&c, SignMode::Plain).map_err(|e| e.to_string())?;
        let psi = random_state(rng, l);
        for time in [0.5, 2.0] {
            let out = simulate_evolution(&spec, &psi, time, epsilon).map_err(|e| e.to_string())?;
            let unit = Complex64::new(0.0, -time);
            let evolved = oracle_matfun(spec.weights(), SignMode::Plain, |lam| (unit * lam).exp())
                .map_err(|e| e.to_string())?;
            let expect = evolved.matvec(psi.amplitudes()).map_err(|e| e.to_string())?;
            max_dist = max_dist.max(l2_distance(out.output.amplitudes(), &expect));
            cases += 1;
        }
    }
    let checks = vec![check(
        "evolution_within_epsilon",
        max_dist <= epsilon,
        format!("max distance {max_dist:.3e} over {cases} cases (bound {epsilon:.1e})"),
    )];
    Ok((json!({ "cases": cases, "max_distance": max_dist }), checks))
}

fn suite_invert(rng: &mut ChaCha8Rng) -> CliResult<(Value, Vec<Check>)> {
    let epsilon = 0.05;
    // Exactly representable spectrum first: eigenvalues (1, 1/2, 1/2, 1/2).
    let spec = CirculantSpec::new(&[5.0, 1.0, 1.0, 1.0], SignMode::Plain)
        .map_err(|e| e.to_string())?;
    let psi = StateVector::basis_state(2, 0).map_err(|e| e.to_string())?;
    let plan = InversionPlan::for_spec(&spec, epsilon, InversionBackend::ExactDiagonal)
        .map_err(|e| e.to_string())?;
    let out = invert_circulant(&spec, &psi, &plan).map_err(|e| e.to_string())?;
    let inverse = oracle_matfun(spec.weights(), spec.sign_mode, |lam| 1.0 / lam)
        .map_err(|e| e.to_string())?;
    let mut expect = inverse.matvec(psi.amplitudes()).map_err(|e| e.to_string())?;
    let norm: f64 = expect.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for x in &mut expect {
        *x /= norm;
    }
    let reference = StateVector::from_amplitudes(expect).map_err(|e| e.to_string())?;
    let exact_dist = state_distance(&out.output, &reference, true).map_err(|e| e.to_string())?;
    let p_dev = (out.success_probability - 13.0 / 16.0).abs();

    // Random positive-definite spectra must clear the probability floor.
    // Mirror symmetry keeps the eigenvalues real, diagonal dominance keeps
    // them positive.
    let mut floor_margin = f64::INFINITY;
    for _ in 0..10 {
        let mut c = random_weights(rng, 4);
        c[3] = c[1];
        c[0] += c.iter().skip(1).sum::<f64>();
        let spec = CirculantSpec::new(&c, SignMode::Plain).map_err(|e| e.to_string())?;
        let psi = random_state(rng, 2);
        let plan = InversionPlan::for_spec(&spec, 0.1, InversionBackend::ExactDiagonal)
            .map_err(|e| e.to_string())?;
        let out = invert_circulant(&spec, &psi, &plan).map_err(|e| e.to_string())?;
        let floor =
            1.0 / (plan.kappa * plan.kappa) - 2f64.powi(2 - plan.phase_bits as i32);
        floor_margin = floor_margin.min(out.success_probability - floor);
    }
    let checks = vec![
        check(
            "representable_spectrum_exact",
            exact_dist <= 1e-10,
            format!("distance {exact_dist:.3e} (bound 1.0e-10)"),
        ),
        check(
            "success_probability_value",
            p_dev <= 1e-10,
            format!("|p - 13/16| = {p_dev:.3e} (bound 1.0e-10)"),
        ),
        check(
            "probability_floor",
            floor_margin >= -1e-12,
            format!("min margin over floor {floor_margin:.3e} across 10 cases"),
        ),
    ];
    Ok((
        json!({
            "representable_distance": exact_dist,
            "success_probability": out.success_probability,
            "floor_margin": floor_margin,
        }),
        checks,
    ))
}

fn suite_product(l: usize, backend: Backend, rng: &mut ChaCha8Rng) -> CliResult<(Value, Vec<Check>)> {
    let n = 1usize << l;
    let mut max_conv = 0.0f64;
    let mut max_dense = 0.0f64;
    for _ in 0..10 {
        let a = CirculantSpec::new(&random_weights(rng, n), SignMode::Plain)
            .map_err(|e| e.to_string())?;
        let b = CirculantSpec::new(&random_weights(rng, n), SignMode::Plain)
            .map_err(|e| e.to_string())?;
        let specs = [a, b];
        let oracle = ProductOracle::from_specs(&specs).map_err(|e| e.to_string())?;
        let marginals = oracle.marginals(backend).map_err(|e| e.to_string())?;
        let conv = cyclic_convolution(specs[0].weights(), specs[1].weights())
            .map_err(|e| e.to_string())?;
        for (m, c) in marginals.iter().zip(&conv) {
            max_conv = max_conv.max((m - c).abs());
        }
        let psi = random_state(rng, l);
        let out = apply_product_circulant(&specs, &psi, backend).map_err(|e| e.to_string())?;
        let dense = specs[0]
            .dense()
            .matmul(&specs[1].dense())
            .map_err(|e| e.to_string())?;
        let expect = dense.matvec(psi.amplitudes()).map_err(|e| e.to_string())?;
        max_dense = max_dense.max(l2_distance(
            &unnormalized(&out.output, out.success_probability),
            &expect,
        ));
    }
    let checks = vec![
        check(
            "marginals_match_convolution",
            max_conv <= 1e-12,
            format!("max deviation {max_conv:.3e} over 10 cases (bound 1.0e-12)"),
        ),
        check(
            "product_dense_agreement",
            max_dense <= 1e-10,
            format!("max deviation {max_dense:.3e} over 10 cases (bound 1.0e-10)"),
        ),
    ];
    Ok((
        json!({ "cases": 10, "max_convolution_deviation": max_conv, "max_dense_deviation": max_dense }),
        checks,
    ))
}

fn suite_cyclic() -> CliResult<(Value, Vec<Check>)> {
    let sys = CyclicSystemSpec {
        stiffness_row: vec![5.0, -1.0, 0.0, -1.0],
        excitation_order: 1,
        omega: 1.0,
        force_amplitude: [1.0, 0.0],
    };
    let epsilon = 1e-2;
    let sol = solve_cyclic(&sys, epsilon, None, None).map_err(|e| e.to_string())?;
    let f = travelling_wave_force(2, 1, Complex64::new(1.0, 0.0)).map_err(|e| e.to_string())?;
    let overlap: Complex64 = f
        .amplitudes()
        .iter()
        .zip(sol.state.amplitudes())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let checks = vec![
        check(
            "residual_within_epsilon",
            sol.residual <= epsilon,
            format!("residual {:.3e} (bound {epsilon:.1e})", sol.residual),
        ),
        check(
            "force_direction_recovered",
            overlap.norm() >= 1.0 - epsilon,
            format!("overlap {:.6} (bound {:.6})", overlap.norm(), 1.0 - epsilon),
        ),
    ];
    Ok((
        json!({
            "residual": sol.residual,
            "overlap": overlap.norm(),
            "magnitude": sol.magnitude,
            "condition_number": sol.condition_number,
        }),
        checks,
    ))
}

fn suite_adder(rng: &mut ChaCha8Rng) -> CliResult<(Value, Vec<Check>)> {
    // Backend agreement on random two-register additions.
    let mut max_dev = 0.0f64;
    for _ in 0..20 {
        let l = rng.gen_range(1..=3usize);
        let addend = Register { offset: 0, width: l };
        let target = Register {
            offset: l,
            width: l,
        };
        let psi = random_state(rng, 2 * l);
        let subtract = rng.gen::<bool>();
        let mut a = psi.clone();
        let mut b = psi;
        apply_adder(&mut a, addend, target, subtract, Backend::GateLevel, None)
            .map_err(|e| e.to_string())?;
        apply_adder(&mut b, addend, target, subtract, Backend::Fast, None)
            .map_err(|e| e.to_string())?;
        max_dev = max_dev.max(state_distance(&a, &b, false).map_err(|e| e.to_string())?);
    }
    let widths: Vec<usize> = (2..=10).collect();
    let counts = adder_gate_counts(widths.iter().copied()).map_err(|e| e.to_string())?;
    let exponent = fitted_exponent(&counts);
    let checks = vec![
        check(
            "backend_agreement",
            max_dev <= 1e-10,
            format!("max distance {max_dev:.3e} over 20 cases (bound 1.0e-10)"),
        ),
        check(
            "quadratic_gate_scaling",
            (1.8..=2.2).contains(&exponent),
            format!("fitted exponent {exponent:.4} (range 1.8..2.2)"),
        ),
    ];
    Ok((
        json!({ "max_backend_distance": max_dev, "fitted_exponent": exponent }),
        checks,
    ))
}

fn run_verify(
    suite: &str,
    l: Option<usize>,
    epsilon: f64,
    backend: Backend,
    seed: u64,
) -> CliResult<(Value, Vec<Check>)> {
    let names: Vec<&str> = match suite {
        "all" => vec![
            "lcu", "banded", "blocks", "hamsim", "invert", "product", "cyclic", "adder",
        ],
        "lcu" | "banded" | "blocks" | "hamsim" | "invert" | "product" | "cyclic" | "adder" => {
            vec![suite]
        }
        other => {
            return Err(format!(
                "unknown suite `{other}`; expected lcu, banded, blocks, hamsim, invert, \
                 product, cyclic, adder, or all"
            ))
        }
    };
    let l = l.unwrap_or(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outputs = serde_json::Map::new();
    let mut checks = Vec::new();
    for name in names {
        let (v, mut cs) = match name {
            "lcu" => suite_lcu(l, backend, &mut rng)?,
            "banded" => suite_banded(l.min(3), backend, &mut rng)?,
            "blocks" => suite_blocks(l.min(2), backend, &mut rng)?,
            "hamsim" => suite_hamsim(l.min(2), epsilon, &mut rng)?,
            "invert" => suite_invert(&mut rng)?,
            "product" => suite_product(l.min(2), backend, &mut rng)?,
            "cyclic" => suite_cyclic()?,
            "adder" => suite_adder(&mut rng)?,
            _ => unreachable!(),
        };
        for c in &mut cs {
            c.name = format!("{name}.{}", c.name);
        }
        outputs.insert(name.to_string(), v);
        checks.append(&mut cs);
    }
    Ok((Value::Object(outputs), checks))
}

fn parse_width_range(s: &str) -> CliResult<Vec<usize>> {
    let parse_one = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad width `{t}` in `--L {s}`"))
    };
    if let Some((a, b)) = s.split_once("..") {
        let lo = parse_one(a)?;
        let hi = parse_one(b.trim().strip_prefix('=').unwrap_or(b))?;
        if hi < lo {
            return Err(format!("empty width range `{s}`"));
        }
        Ok((lo..=hi).collect())
    } else {
        Ok(vec![parse_one(s)?])
    }
}

fn run_gatecount(op: &str, l: &str) -> CliResult<(Value, Vec<Check>)> {
    if op != "adder" {
        return Err(format!("unknown op `{op}`; expected `adder`"));
    }
    let widths = parse_width_range(l)?;
    let counts = adder_gate_counts(widths.iter().copied()).map_err(|e| e.to_string())?;
    let table: Vec<Value> = counts.iter().map(|(l, g)| json!([l, g])).collect();
    let mut checks = Vec::new();
    let mut outputs = serde_json::Map::new();
    outputs.insert("op".into(), json!(op));
    outputs.insert("table".into(), Value::Array(table));
    if counts.len() >= 3 {
        let exponent = fitted_exponent(&counts);
        outputs.insert("exponent".into(), json!(exponent));
        checks.push(check(
            "quadratic_gate_scaling",
            (1.8..=2.2).contains(&exponent),
            format!("fitted exponent {exponent:.4} (range 1.8..2.2)"),
        ));
    }
    Ok((Value::Object(outputs), checks))
}
