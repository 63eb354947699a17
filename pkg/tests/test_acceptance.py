"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines.
"""
from __future__ import annotations

import functools
import math
import time

import numpy as np

from twistkac import field as fld
from twistkac import fock, nongaussian, oscillator, paths
from twistkac.normal_order import (ordered_diagonal_two_point_multicomponent, ordered_modulus_power)
from twistkac.paths import MomentRequest
from twistkac.twist import PolyPotential, TwistSpec


SUMMARY: dict = {}


def report(number: int, ok: bool, detail: str, elapsed: float, budget: float):
    ok_time = elapsed < budget
    status = "PASS" if ok and ok_time else "FAIL"
    line = f"[criterion {number:2d}] {status}  {detail}  ({elapsed:.1f}s, budget {budget:.0f}s)"
    SUMMARY[number] = line
    print("\n" + line)
    return ok and ok_time


# ---- shared computations (cached so criterion 7 can inspect them) ----------

@functools.lru_cache(maxsize=None)
def free_trace_grid():
    t0 = time.perf_counter()
    rows = []
    for m in (0.5, 1.0, 2.0):
        for beta in (0.5, 1.0):
            for theta in (0.3, 1.7):
                spec = TwistSpec(m, beta, theta)
                rep = fock.build_fock(spec, 40)
                tr = fock.twisted_trace(rep, None, theta, beta)
                exact = oscillator.partition_function(spec)
                rows.append(dict(m=m, beta=beta, theta=theta, trace=tr, exact=exact,
                                 rel=abs(tr - exact) / exact))
    return rows, time.perf_counter() - t0


def _oracle_cut(spec: TwistSpec) -> int:
    return int(min(120, math.ceil(30 / (spec.m * spec.beta))))


@functools.lru_cache(maxsize=None)
def two_point_three_way():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    rows = []
    for _ in range(20):
        spec = TwistSpec(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)),
                         float(rng.uniform(-math.pi, math.pi)))
        t, s = rng.uniform(0, spec.beta, 2)
        xi = t - s
        k = complex(oscillator.pair_correlation(spec, xi, 0))
        f = complex(oscillator.fourier_sum(spec, xi, 4096))
        rep = fock.build_fock(spec, _oracle_cut(spec))
        o = fock.twisted_expectation(rep, None, fock.TimeOrderedRequest((("zbar", t), ("z", s))),
                                     spec.theta, spec.beta)
        rows.append(dict(spec=spec, xi=xi, kernel=k, fourier=f, oracle=o,
                         worst=max(abs(k - f), abs(k - o), abs(f - o))))
    return rows, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def gaussianity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    spec = TwistSpec(1.0, 1.0, 0.9)
    rep = fock.build_fock(spec, 40)
    rows = []
    for r in (1, 1, 2, 2, 3, 3):
        req = MomentRequest(tuple(rng.uniform(0, 1, r)), tuple(rng.uniform(0, 1, r)))
        wick = paths.wick_moment(req, spec)
        oracle = fock.twisted_expectation(rep, None, req, spec.theta, spec.beta)
        est = paths.estimate_moment_mc(req, spec, 100_000, seed=11 + len(rows), T=256)
        rows.append(dict(req=req, wick=wick, oracle=oracle, mc=est.estimate, stderr=est.stderr))
    norm = fock.twisted_trace(rep, None, spec.theta, spec.beta)
    return rows, norm, time.perf_counter() - t0


HOLONOMY_LETTERS = ("a-", "a+", "a-*", "a+*")


@functools.lru_cache(maxsize=None)
def holonomy():
    t0 = time.perf_counter()
    spec = TwistSpec(1.0, 1.0, 0.9)
    rep = fock.build_fock(spec, 40)
    rng = np.random.default_rng(3)
    words = [[HOLONOMY_LETTERS[i] for i in rng.integers(0, 4, rng.integers(1, 4))] for _ in range(10)]
    rows = []
    for S in fock.HOLONOMY_S:
        for w in words:
            out = fock.holonomy_residual(rep, S, w)
            rows.append(dict(S=S, word=w, residual=abs(out["residual"]), scale=out["scale"]))
    return rows, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def mass_renormalization():
    t0 = time.perf_counter()
    spec = TwistSpec(1.0, 1.0, 1.0)
    rows = []
    for eps2 in (0.5, 3.0):
        V = PolyPotential.modulus_power(1, 1, eps2)
        est = nongaussian.relative_partition_mc(spec, V, T=1024, samples=100_000, seed=5)
        exact = oscillator.mass_renormalized_Z(spec, math.sqrt(eps2))
        rows.append(dict(eps2=eps2, value=est.value, stderr=est.stderr, exact=exact))
    return rows, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def quartic_oracle():
    t0 = time.perf_counter()
    spec = TwistSpec(1.0, 1.0, 1.0)
    rep = fock.build_fock(spec, 40)
    free = fock.twisted_trace(rep, None, spec.theta, spec.beta)
    req = MomentRequest((1 / 3,), (2 / 3,))
    rows = []
    for lam in (0.1, 0.3):
        V = PolyPotential.modulus_power(1, 2, lam)
        H = fock.assemble_hamiltonian(rep, V)
        trace = fock.twisted_trace(rep, H, spec.theta, spec.beta)
        ratio = trace / free
        two_point = fock.twisted_expectation(rep, H, req, spec.theta, spec.beta)
        z = nongaussian.relative_partition_mc(spec, V, T=256, samples=200_000, seed=17)
        g = nongaussian.gibbs_expectation_mc(spec, V, req, T=256, samples=200_000, seed=19)
        rows.append(dict(lam=lam, trace=trace, ratio=ratio, z=z, two_point=two_point, g=g))
    return rows, free, time.perf_counter() - t0


# ---- criteria ----------------------------------------------------------------

def test_criterion_01_free_trace_vs_closed_form():
    rows, elapsed = free_trace_grid()
    worst = max(rows, key=lambda r: r["rel"])
    bad = [(r["m"], r["beta"], r["theta"]) for r in rows if not r["rel"] < 1e-8]
    ok = report(1, not bad, f"max rel err {worst['rel']:.2e}; failing points (m, beta, theta): {bad}",
                elapsed, 10)
    assert ok


def test_criterion_02_two_point_three_way():
    rows, elapsed = two_point_three_way()
    worst = max(r["worst"] for r in rows)
    ok = report(2, worst < 1e-6, f"max pairwise difference {worst:.2e} over {len(rows)} points", elapsed, 30)
    assert ok


def test_criterion_03_gaussianity_fk_identity():
    rows, _, elapsed = gaussianity()
    z_scores = [abs(r["mc"] - r["wick"]) / r["stderr"] for r in rows]
    oracle_gap = max(abs(r["wick"] - r["oracle"]) for r in rows)
    ok = max(z_scores) <= 3 and oracle_gap < 1e-8
    ok = report(3, ok, f"max |MC-Wick|/stderr {max(z_scores):.2f}; max |Wick-oracle| {oracle_gap:.1e}", elapsed, 120)
    assert ok


def test_criterion_04_holonomy():
    rows, elapsed = holonomy()
    worst = max(r["residual"] / r["scale"] for r in rows)
    ok = report(4, worst < 1e-8, f"max scaled residual {worst:.1e} over {len(rows)} (S, T) pairs", elapsed, 10)
    assert ok


def test_criterion_05_mass_renormalization():
    rows, elapsed = mass_renormalization()
    z = [abs(r["value"] - r["exact"]) / r["stderr"] for r in rows]
    rel = [r["stderr"] / abs(r["value"]) for r in rows]
    ok = max(z) <= 3 and max(rel) < 0.01
    ok = report(5, ok, f"z-scores {[round(x, 2) for x in z]}; stderr/value {[f'{x:.1e}' for x in rel]}", elapsed, 60)
    assert ok


def test_criterion_06_quartic_oracle_agreement():
    rows, _, elapsed = quartic_oracle()
    zs = []
    for r in rows:
        zs.append(abs(r["z"].value - r["ratio"]) / r["z"].stderr)
        zs.append(abs(r["g"].value - r["two_point"]) / r["g"].stderr)
    ok = max(zs) <= 3
    ok = report(6, ok, f"z-scores (Z, two-point) per lambda {[round(x, 2) for x in zs]}", elapsed, 300)
    assert ok


def test_criterion_07_twist_positivity():
    t0 = time.perf_counter()
    checks = []
    for r in free_trace_grid()[0]:
        checks.append((r["trace"], 0.0))
    _, norm, _ = gaussianity()
    checks.append((norm, 0.0))
    for r in mass_renormalization()[0]:
        checks.append((r["value"], r["stderr"]))
    rows, free, _ = quartic_oracle()
    checks.append((free, 0.0))
    for r in rows:
        checks.append((r["trace"], 0.0))
        checks.append((r["z"].value, r["z"].stderr))
    spec = fld.FieldSpec(1.0, 1.0, 1.7, (2 * math.pi,), (0.3,), k_cut=4.0)
    checks.append((complex(fld.field_partition_function(spec)), 0.0))
    bad = [c for c, err in checks
           if not (np.real(c) > 0 and abs(np.imag(c)) < max(1e-9 * np.real(c), 3 * err))]
    ok = report(7, not bad, f"{len(checks)} traces/estimates checked, {len(bad)} violations",
                time.perf_counter() - t0, 600)
    assert ok


def test_criterion_08_trotter_order():
    t0 = time.perf_counter()
    spec = TwistSpec(1.0, 1.0, 1.0)
    rep = fock.build_fock(spec, 20)
    V = PolyPotential.modulus_power(1, 2, 1.0)
    exact = fock.twisted_trace(rep, fock.assemble_hamiltonian(rep, V), spec.theta, spec.beta)
    errs = [abs(fock.trotter_trace(rep, V, spec.theta, spec.beta, N) - exact) for N in (4, 8, 16, 32)]
    ratios = [float(errs[i] / errs[i + 1]) for i in range(3)]
    ok = all(3.4 <= x <= 4.6 for x in ratios)
    ok = report(8, ok, f"Richardson ratios {[round(x, 3) for x in ratios]}", time.perf_counter() - t0, 30)
    assert ok


def test_criterion_09_zero_mass_limits():
    t0 = time.perf_counter()
    spec = TwistSpec(1.0, 1.0, 1.7)
    masses = (1e-1, 1e-2, 1e-3)
    E = oscillator.allowed_energies(spec, 50)
    coeff_gap = [float(np.max(np.abs(E ** 2 * np.array([oscillator.fourier_coefficient(spec.replace(m=m), e)
                                                        for e in E]) - 1))) for m in masses]
    coeff_ok = all(b < a for a, b in zip(coeff_gap, coeff_gap[1:])) and coeff_gap[-1] < 1e-5
    xis = np.linspace(-spec.beta, spec.beta, 41)
    vals = [oscillator.pair_correlation(spec.replace(m=m), xis, 0) for m in masses]
    d1 = float(np.max(np.abs(vals[0] - vals[1])))
    d2 = float(np.max(np.abs(vals[1] - vals[2])))
    limit_gap = float(np.max(np.abs(vals[2] - oscillator.zero_mass_kernel(spec, xis))))
    cauchy_ok = d1 / d2 >= 5
    singular = TwistSpec(1.0, 1.0, 0.0)
    zs = [oscillator.partition_function(singular.replace(m=m)) for m in masses]
    slope = -np.polyfit(np.log(singular.beta * np.array(masses)), np.log(zs), 1)[0]
    exp_ok = abs(slope - 2.0) <= 0.1
    ok = coeff_ok and cauchy_ok and exp_ok
    ok = report(9, ok, f"E^2/(E^2+m^2)-1 max {coeff_gap[-1]:.1e}; Cauchy ratio {d1 / d2:.1f} "
                       f"(limit gap {limit_gap:.1e}); growth exponent {slope:.3f}", time.perf_counter() - t0, 10)
    assert ok


def test_criterion_10_field_factorization():
    t0 = time.perf_counter()
    spec = fld.FieldSpec(0.5, 1.0, 1.7, (2 * math.pi,), (0.3,), weights=(1.0,), k_cut=4.0)
    z = fld.field_partition_function(spec)
    z_modes = fld.mode_product_partition_function(spec)
    rel = abs(z - z_modes) / z_modes
    top = fld.covariance_spectrum(spec, E_max=200.0)[-1]
    bound = 1.0 / (1.0 / fld.cbound(spec) + spec.m ** 2)
    spec_gap = abs(top - bound) / bound
    wrap = max(fld.sample_random_field(spec, seed=s).wrap_residual() for s in range(3))
    wrap_real = fld.sample_random_field(spec.replace(real_field=True), seed=1).wrap_residual()
    ok = rel < 1e-12 and spec_gap < 1e-12 and wrap < 1e-10 and wrap_real < 1e-10
    ok = report(10, ok, f"Z rel gap {rel:.1e}; spectrum max vs bound {spec_gap:.1e}; wrap residual "
                        f"{max(wrap, wrap_real):.1e}", time.perf_counter() - t0, 30)
    assert ok


def test_criterion_11_normal_ordering_orthogonality():
    t0 = time.perf_counter()
    spec = TwistSpec(1.0, 1.0, 1.2)
    T = 1024
    t, s = 0.7, 0.25
    c0 = oscillator.equal_time_constant(spec)
    C = complex(oscillator.pair_correlation(spec, t - s, 0))
    polys = {k: ordered_modulus_power(1, k, [c0]) for k in (0, 1, 2)}

    def fn(rng, count):
        modes = paths.draw_modes(spec, T, count, rng)
        vals = paths.evaluate_modes(spec, modes, [t, s])[:, 0, :]
        out = []
        for k in (1, 2):
            for kp in (1, 2):
                out.append(polys[k](vals[None, :, 0]) * polys[kp](vals[None, :, 1]))
        return np.stack(out, axis=1)

    from twistkac.parallel import mean_and_stderr, run_blocks
    X = run_blocks(fn, 100_000, 23, 4096)
    mean, err = mean_and_stderr(X)
    zs = []
    labels = []
    i = 0
    for k in (1, 2):
        for kp in (1, 2):
            expected = ordered_diagonal_two_point_multicomponent(k, kp, [C])
            zs.append(abs(mean[i] - expected) / err[i])
            labels.append(f"({k},{kp})")
            i += 1
    ok = max(zs) <= 3
    ok = report(11, ok, "z-scores " + ", ".join(f"{l}:{z:.2f}" for l, z in zip(labels, zs)),
                time.perf_counter() - t0, 120)
    assert ok


def test_criterion_12_reflection_positivity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    mins = []
    for trial in range(10):
        spec = TwistSpec(float(rng.uniform(0.5, 2)), float(rng.uniform(0.5, 2)), 0.0)
        family = paths.random_monomial_family(rng, 5, spec.beta, n=1, max_degree=2)
        mins.append(paths.reflection_positivity_check(spec, family))
    ok = min(mins) >= -1e-10
    ok = report(12, ok, f"min Gram eigenvalue over 10 families {min(mins):.2e}", time.perf_counter() - t0, 10)
    assert ok
