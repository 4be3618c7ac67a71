#!/usr/bin/env python3
"""Smoke test for the circsim extension module.

Loads the cdylib straight out of the cargo target directory (no install
step), then cross-checks every exposed pipeline against plain numpy
linear algebra. Exits nonzero on the first failing check.

Build the module first:

    cargo build -p circsim-py --release
"""

import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np


def load_module():
    root = Path(__file__).resolve().parents[1]
    candidates = [
        root / "target" / "release" / "libcircsim.so",
        root / "target" / "debug" / "libcircsim.so",
        root / "target" / "release" / "libcircsim.dylib",
        root / "target" / "debug" / "libcircsim.dylib",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit("libcircsim not found; run `cargo build -p circsim-py --release` first")
    stage = Path(tempfile.mkdtemp(prefix="circsim-"))
    shutil.copy2(lib, stage / "circsim.so")
    sys.path.insert(0, str(stage))
    import circsim

    return circsim


def dense_circulant(weights, theta=0.0, negate_v0=False):
    """Entry (r, c) carries the shift (c - r) mod N: shifts map |k> to |k - j>."""
    n = len(weights)
    m = np.empty((n, n), dtype=complex)
    for r in range(n):
        for c in range(n):
            j = (c - r) % n
            m[r, c] = weights[j] * np.exp(1j * theta * j)
            if negate_v0 and j == 0:
                m[r, c] = -m[r, c]
    return m


def random_state(rng, n):
    psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return psi / np.linalg.norm(psi)


def check_apply(circsim, rng):
    for sign in ("plain", "negate_v0"):
        w = rng.uniform(0.05, 1.0, 8)
        spec = circsim.CirculantSpec(list(w), sign_mode=sign)
        psi = random_state(rng, 8)
        out = circsim.apply_circulant(spec, list(psi))
        target = dense_circulant(spec.weights, negate_v0=(sign == "negate_v0")) @ psi
        raw = np.array(out.output) * np.sqrt(out.success_probability)
        assert np.max(np.abs(raw - target)) <= 1e-10, f"apply mismatch ({sign})"
        assert abs(out.success_probability - np.linalg.norm(target) ** 2) <= 1e-10
        # Undoing the weight normalization recovers the raw-weight operator.
        full = dense_circulant(w, negate_v0=(sign == "negate_v0")) @ psi
        assert np.max(np.abs(raw * out.scale - full)) <= 1e-10
    # Uniform weights on |0> succeed with probability 1/4; one round of
    # amplification lifts that to certainty.
    spec = circsim.CirculantSpec([0.25] * 4)
    plain = circsim.apply_circulant(spec, [1, 0, 0, 0])
    boosted = circsim.apply_circulant(spec, [1, 0, 0, 0], amplify=1)
    assert abs(plain.success_probability - 0.25) <= 1e-10
    assert abs(boosted.success_probability - 1.0) <= 1e-9
    print("PASS apply: matches the dense circulant; amplification reaches p=1")


def check_banded(circsim):
    spec = circsim.BandedSpec([0.3, 0.5, 0.2])
    toe = circsim.apply_toeplitz(spec, [1, 0])
    han = circsim.apply_hankel(spec, [1, 0])
    for out, column in ((toe, [0.5, 0.2]), (han, [0.2, 0.5])):
        raw = np.array(out.output) * np.sqrt(out.success_probability)
        assert np.max(np.abs(raw - np.array(column))) <= 1e-12, "banded column mismatch"
        assert abs(out.success_probability - 0.29) <= 1e-12
    print("PASS banded: Toeplitz and Hankel reproduce the worked 2x2 columns")


def check_phase_blocks(circsim, rng):
    w = rng.uniform(0.05, 1.0, 4)
    theta = 0.9
    psi = random_state(rng, 4)
    spec = circsim.CirculantSpec(list(w))
    out = circsim.apply_phase_blocks(list(w), theta, list(psi))
    target = dense_circulant(spec.weights, theta=theta) @ psi
    raw = np.array(out.output) * np.sqrt(out.success_probability)
    assert np.max(np.abs(raw - target)) <= 1e-10, "phase-block mismatch"
    print("PASS blocks: phased sum of shifts matches the dense operator")


def check_evolution(circsim):
    w = [0.4, 0.15, 0.3, 0.15]
    t, eps = 1.0, 1e-4
    spec = circsim.CirculantSpec(w)
    rng = np.random.default_rng(11)
    psi = random_state(rng, 4)
    out = circsim.simulate_evolution(spec, list(psi), t, eps)
    lam = np.conj(np.fft.fft(np.array(spec.weights)))
    f = np.exp(2j * np.pi * np.outer(np.arange(4), np.arange(4)) / 4) / 2.0
    u = f @ np.diag(np.exp(-1j * lam * t)) @ f.conj().T
    raw = np.array(out.output) * np.sqrt(out.survival_weight)
    resid = np.linalg.norm(raw - u @ psi)
    assert resid <= 10 * eps, f"evolution residual {resid:.3e}"
    assert abs(out.survival_weight - 1.0) <= 10 * eps
    print(f"PASS evolution: within {10 * eps:.0e} of the exact exponential "
          f"(residual {resid:.1e}, {out.segments} segments, order {out.order})")


def check_inversion(circsim):
    # Eigenvalues (1, 1/2, 1/2, 1/2) land exactly on 2-bit phases.
    spec = circsim.CirculantSpec([0.625, 0.125, 0.125, 0.125])
    out = circsim.invert_circulant(spec, [1, 0, 0, 0], epsilon=0.05, method="exact")
    direction = np.array([7, -1, -1, -1]) / np.sqrt(52)
    got = np.array(out.output)
    colinearity = abs(np.vdot(direction, got))
    assert colinearity >= 1 - 1e-9, f"inverse direction colinearity {colinearity}"
    assert abs(out.success_probability - 13 / 16) <= 1e-3
    # Independent check against a straight dense solve.
    solved = np.linalg.solve(dense_circulant(spec.weights), np.array([1, 0, 0, 0.0]))
    solved /= np.linalg.norm(solved)
    assert abs(np.vdot(solved, got)) >= 1 - 1e-9
    print(f"PASS inversion: direction matches the dense solve "
          f"(p={out.success_probability:.4f}, kappa={out.kappa:.1f})")


def check_product(circsim, rng):
    wa = rng.uniform(0.05, 1.0, 4)
    wb = rng.uniform(0.05, 1.0, 4)
    sa = circsim.CirculantSpec(list(wa))
    sb = circsim.CirculantSpec(list(wb))
    marginals = np.array(circsim.product_marginals([sa, sb]))
    conv = np.fft.ifft(np.fft.fft(np.array(sa.weights)) * np.fft.fft(np.array(sb.weights))).real
    assert np.max(np.abs(marginals - conv)) <= 1e-12, "marginals are not the convolution"
    psi = random_state(rng, 4)
    out = circsim.apply_product([sa, sb], list(psi))
    target = dense_circulant(sa.weights) @ dense_circulant(sb.weights) @ psi
    raw = np.array(out.output) * np.sqrt(out.success_probability)
    assert np.max(np.abs(raw - target)) <= 1e-10, "product pipeline mismatch"
    print("PASS product: marginals equal the convolution; pipeline matches the matrix product")


def check_cyclic(circsim):
    eps = 0.01
    sol = circsim.solve_cyclic([5.0, -1.0, 0.0, -1.0], 1, 1.0, 1 + 0j, epsilon=eps)
    # The order-1 travelling wave is an eigenvector of the shifted stiffness
    # matrix with eigenvalue 4, so the true response is f / 4.
    f = np.exp(2j * np.pi * np.arange(4) / 4)
    a = dense_circulant([5.0, -1.0, 0.0, -1.0]) - np.eye(4)
    q = np.linalg.solve(a, f)
    direction = abs(np.vdot(q / np.linalg.norm(q), np.array(sol.state)))
    assert direction >= 1 - eps, f"response direction overlap {direction}"
    assert abs(sol.magnitude - np.linalg.norm(q)) <= 0.02
    assert sol.residual <= eps
    print(f"PASS cyclic: worked system solved (|q|={sol.magnitude:.4f}, "
          f"residual {sol.residual:.1e}, case {sol.sign_case})")


def check_gate_counts(circsim):
    points = circsim.adder_gate_counts(list(range(2, 11)))
    exponent = circsim.fitted_exponent(points)
    assert 1.8 <= exponent <= 2.2, f"adder cost exponent {exponent}"
    print(f"PASS gate counts: adder cost fits n^{exponent:.2f}")


def check_errors(circsim):
    try:
        circsim.CirculantSpec([0.5, 0.5, 0.5])
    except ValueError:
        pass
    else:
        raise AssertionError("non-power-of-two weight vector should be rejected")
    print("PASS errors: invalid specs raise ValueError")


def main():
    circsim = load_module()
    rng = np.random.default_rng(7)
    check_apply(circsim, rng)
    check_banded(circsim)
    check_phase_blocks(circsim, rng)
    check_evolution(circsim)
    check_inversion(circsim)
    check_product(circsim, rng)
    check_cyclic(circsim)
    check_gate_counts(circsim)
    check_errors(circsim)
    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
