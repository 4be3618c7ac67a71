//! Weight oracles for products of circulants.
//!
//! A product `C^(1) C^(2) ... C^(d)` is itself circulant, with weights the
//! d-fold cyclic convolution of the factors. Instead of computing that
//! convolution classically and synthesizing a fresh oracle, the factor
//! oracles are run side by side and an adder folds their index registers
//! into one output register: `|0>|j_1>...|j_d> -> |j_1+...+j_d>|j_1>...`.
//! The factor registers stay behind as garbage, which the zero-projection
//! of the whole ancilla block absorbs.

use crate::arith::{apply_adder, Backend};
use crate::circulant::{ApplyOutcome, CirculantSpec};
use crate::dense::SignMode;
use crate::error::{Result, SimError};
use crate::gates::GateTally;
use crate::lcu::{select_apply, SelectAction, UnitaryFamily};
use crate::oracle::AmplitudeOracle;
use crate::state::{Register, StateVector, QUBIT_CAP};

/// Joint weight oracle for a product of equal-width circulants.
pub struct ProductOracle {
    factors: Vec<AmplitudeOracle>,
    width: usize,
}

impl ProductOracle {
    /// At least two factor oracles, all of the same register width.
    pub fn new(factors: Vec<AmplitudeOracle>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(SimError::InvalidInput(format!(
                "a product needs at least two factors, got {}",
                factors.len()
            )));
        }
        let width = factors[0].width();
        for (m, f) in factors.iter().enumerate() {
            if f.width() != width {
                return Err(SimError::InvalidInput(format!(
                    "factor {m} has width {}, expected {width}",
                    f.width()
                )));
            }
        }
        Ok(ProductOracle { factors, width })
    }

    /// One weight oracle per circulant spec.
    pub fn from_specs(specs: &[CirculantSpec]) -> Result<Self> {
        let factors = specs
            .iter()
            .map(|s| AmplitudeOracle::for_weights(s.weights()))
            .collect::<Result<Vec<_>>>()?;
        ProductOracle::new(factors)
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Qubits the oracle occupies: the output register plus one register
    /// per factor.
    pub fn block_width(&self) -> usize {
        (self.factors.len() + 1) * self.width
    }

    /// Output (convolved-index) register of a block based at `base`.
    pub fn output_register(&self, base: usize) -> Register {
        Register {
            offset: base,
            width: self.width,
        }
    }

    /// Garbage register of factor `m` in a block based at `base`.
    pub fn factor_register(&self, base: usize, m: usize) -> Register {
        Register {
            offset: base + (m + 1) * self.width,
            width: self.width,
        }
    }

    /// Run every factor oracle on its own register, then fold the factor
    /// values into the output register. One call per factor oracle; the
    /// adders carry the only tallied gates.
    pub fn apply(
        &self,
        state: &mut StateVector,
        base: usize,
        inverse: bool,
        backend: Backend,
        mut tally: Option<&mut GateTally>,
    ) -> Result<()> {
        let out = self.output_register(base);
        if !inverse {
            for (m, f) in self.factors.iter().enumerate() {
                f.apply(state, self.factor_register(base, m), false, &[])?;
            }
            for m in (0..self.factors.len()).rev() {
                apply_adder(
                    state,
                    self.factor_register(base, m),
                    out,
                    false,
                    backend,
                    tally.as_deref_mut(),
                )?;
            }
        } else {
            for m in 0..self.factors.len() {
                apply_adder(
                    state,
                    self.factor_register(base, m),
                    out,
                    true,
                    backend,
                    tally.as_deref_mut(),
                )?;
            }
            for (m, f) in self.factors.iter().enumerate() {
                f.apply(state, self.factor_register(base, m), true, &[])?;
            }
        }
        Ok(())
    }

    /// Output-register probabilities on `|0...0>`: the d-fold cyclic
    /// convolution of the factor weights, read off a fresh simulation.
    pub fn marginals(&self, backend: Backend) -> Result<Vec<f64>> {
        let mut state = StateVector::zero_state(self.block_width())?;
        self.apply(&mut state, 0, false, backend, None)?;
        Ok(state.register_distribution(self.output_register(0)))
    }

    /// Factor-oracle invocations so far, summed.
    pub fn calls(&self) -> u64 {
        self.factors.iter().map(|f| f.calls()).sum()
    }
}

/// Apply `C^(1) C^(2) ... C^(d)` to `psi` through one sandwich: the product
/// oracle prepares, the shift family branches on the output register, and
/// the projection of the whole ancilla block (garbage included) leaves the
/// product.
pub fn apply_product_circulant(
    specs: &[CirculantSpec],
    psi: &StateVector,
    backend: Backend,
) -> Result<ApplyOutcome> {
    if specs.len() < 2 {
        return Err(SimError::InvalidInput(format!(
            "a product needs at least two factors, got {}",
            specs.len()
        )));
    }
    let l = specs[0].width();
    for s in specs {
        if s.width() != l {
            return Err(SimError::InvalidInput(format!(
                "factor widths differ: {} vs {l}",
                s.width()
            )));
        }
        if s.sign_mode != SignMode::Plain {
            return Err(SimError::InvalidInput(
                "sign-flipped factors are not defined for products".into(),
            ));
        }
    }
    if psi.num_qubits() != l {
        return Err(SimError::DimensionMismatch {
            expected: l,
            got: psi.num_qubits(),
        });
    }
    let oracle = ProductOracle::from_specs(specs)?;
    let total = l + oracle.block_width();
    if total > QUBIT_CAP {
        return Err(SimError::ResourceLimit {
            qubits: total,
            cap: QUBIT_CAP,
        });
    }
    let sys = Register { offset: 0, width: l };
    let block = Register {
        offset: l,
        width: oracle.block_width(),
    };
    let family = UnitaryFamily {
        actions: vec![SelectAction::SubtractInto {
            index: oracle.output_register(l),
            target: sys,
        }],
    };
    let calls_before = oracle.calls();
    let mut state = psi.extended(oracle.block_width())?;
    let mut tally = GateTally::default();
    oracle.apply(&mut state, l, false, backend, Some(&mut tally))?;
    select_apply(&mut state, &family, backend, Some(&mut tally))?;
    oracle.apply(&mut state, l, true, backend, Some(&mut tally))?;
    let (projected, p) = state.project_register(block, 0)?;
    Ok(ApplyOutcome {
        output: projected.extract_register(sys)?,
        success_probability: p,
        scale: specs.iter().map(|s| s.scale()).product(),
        tally,
        oracle_calls: oracle.calls() - calls_before,
        psi_oracle_calls: 0,
    })
}
