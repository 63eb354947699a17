"""Reweighted Monte Carlo for the interacting twisted measure.

The relative partition function is the Gaussian average of ``exp(-Q)`` with
``Q = (beta/T) sum_l V(omega(t_l))`` on the midpoint nodes
``t_l = (l + 1/2) beta / T``; Gibbs expectations are ratio estimates.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import oscillator
from .parallel import block_size_for, run_blocks
from .paths import (MomentRequest, draw_modes, evaluate_modes, synthesize_grid,
                    truncated_covariance, _check_grid)
from .twist import DivergenceError, PolyPotential, TwistSpec, check_twist_invariance, phase_is_singular

ESS_FLOOR = 100


def potential_id(V: PolyPotential | None) -> str:
    if V is None:
        return "zero"
    return hashlib.sha1(V.to_json().encode()).hexdigest()[:12]


@dataclass
class ReweightedEstimate:
    value: complex
    stderr: float
    n_samples: int
    T: int
    spec: TwistSpec
    potential: str
    seed: int
    rule: str = "midpoint"
    ess: float | None = None
    flagged: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"value_re": float(np.real(self.value)), "value_im": float(np.imag(self.value)),
               "stderr": float(self.stderr), "n_samples": self.n_samples,
               "quadrature": {"T": self.T, "rule": self.rule},
               "spec": self.spec.to_dict(), "potential": self.potential, "seed": self.seed,
               "ess": self.ess, "flagged": self.flagged}
        out.update(self.extra)
        return out


def require_allowed(spec: TwistSpec, V: PolyPotential):
    if V.n != spec.n:
        raise ValueError("potential and spec disagree on the component count")
    if not check_twist_invariance(V, spec.weights):
        raise ValueError("potential is not twist invariant")
    if not V.asserted_bounded_below:
        raise ValueError("potential is not flagged as bounded below")
    if spec.m == 0 and np.any(phase_is_singular(spec.phases)):
        raise DivergenceError("massless spec at a singular twist")


def action(spec: TwistSpec, V: PolyPotential, grid_values: np.ndarray) -> np.ndarray:
    """Midpoint quadrature of ``int_0^beta V ds`` for values shaped ``(count, n, T)``."""
    T = grid_values.shape[-1]
    vals = V(np.moveaxis(grid_values, 1, 0))  # (count, T)
    return vals.sum(axis=-1) * (spec.beta / T)


def _sampler(spec: TwistSpec, V: PolyPotential | None, T: int, reqs: Sequence[MomentRequest] = ()):
    times = sorted(set(t for q in reqs for t in q.conj_times + q.plain_times))
    index = {t: i for i, t in enumerate(times)}

    def fn(rng, count):
        modes = draw_modes(spec, T, count, rng)
        out = np.zeros((count, 1 + len(reqs)), dtype=complex)
        if V is not None:
            out[:, 0] = action(spec, V, synthesize_grid(spec, modes, 0.5))
        if reqs:
            vals = evaluate_modes(spec, modes, times)
            for q_i, q in enumerate(reqs):
                prod = np.ones(count, dtype=complex)
                for t, c in zip(q.conj_times, q.conj_comps):
                    prod *= np.conj(vals[:, c, index[t]])
                for s, c in zip(q.plain_times, q.plain_comps):
                    prod *= vals[:, c, index[s]]
                out[:, 1 + q_i] = prod
        return out

    return fn


def sample_actions(spec: TwistSpec, V: PolyPotential | None, T: int, samples: int, seed: int,
                   reqs: Sequence[MomentRequest] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample actions ``Q`` and requested path products."""
    _check_grid(T)
    for q in reqs:
        q.check_times(spec.beta)
    data = run_blocks(_sampler(spec, V, T, reqs), samples, seed, block_size_for(spec.n * T))
    return data[:, 0].real, data[:, 1:]


def _weights(Q: np.ndarray) -> tuple[np.ndarray, float]:
    qmin = float(Q.min())
    return np.exp(-(Q - qmin)), qmin


def relative_partition_mc(spec: TwistSpec, V: PolyPotential | None, T: int = 256,
                          samples: int = 100_000, seed: int = 0) -> ReweightedEstimate:
    """Monte Carlo estimate of ``Z^V = E[exp(-Q)]`` under the Gaussian path measure."""
    if V is None:
        return ReweightedEstimate(1.0 + 0j, 0.0, samples, T, spec, potential_id(None), seed)
    require_allowed(spec, V)
    Q, _ = sample_actions(spec, V, T, samples, seed)
    return _z_from_actions(spec, V, T, seed, Q)


def _z_from_actions(spec, V, T, seed, Q) -> ReweightedEstimate:
    w, qmin = _weights(Q)
    n = len(w)
    scale = math.exp(-qmin)
    mean = w.mean()
    err = w.std(ddof=1) / math.sqrt(n) if n > 1 else float("inf")
    ess = float(w.sum() ** 2 / (w ** 2).sum())
    return ReweightedEstimate(complex(mean * scale), float(err * scale), n, T, spec, potential_id(V),
                              seed, ess=ess, extra={"jensen_floor": jensen_floor(spec, V, T)})


def ratio_estimate(w: np.ndarray, X: np.ndarray) -> tuple[complex, float, float]:
    """Self-normalized estimate with delta-method error and effective sample size."""
    sw = w.sum()
    R = complex(np.dot(w, X) / sw)
    err = float(math.sqrt(np.sum(w ** 2 * np.abs(X - R) ** 2)) / sw)
    ess = float(sw ** 2 / np.sum(w ** 2))
    return R, err, ess


def gibbs_expectation_mc(spec: TwistSpec, V: PolyPotential | None, req: MomentRequest, T: int = 256,
                         samples: int = 100_000, seed: int = 0) -> ReweightedEstimate:
    """``<X e^{-Q}> / <e^{-Q}>`` for the path product ``X`` described by ``req``."""
    if V is not None:
        require_allowed(spec, V)
    Q, X = sample_actions(spec, V, T, samples, seed, [req])
    w, _ = _weights(Q) if V is not None else (np.ones(samples), 0.0)
    R, err, ess = ratio_estimate(w, X[:, 0])
    return ReweightedEstimate(R, err, samples, T, spec, potential_id(V), seed, ess=ess,
                              flagged=ess < ESS_FLOOR)


def gaussian_moment(spec: TwistSpec, a: Sequence[int], b: Sequence[int], c0: Sequence[float]) -> float:
    """``E[z^a zbar^b]`` at one time for independent circular components."""
    if tuple(a) != tuple(b):
        return 0.0
    return float(np.prod([math.factorial(k) * c ** k for k, c in zip(a, c0)]))


def jensen_floor(spec: TwistSpec, V: PolyPotential, T: int | None = None) -> float:
    """``exp(-<Q>)``, a lower bound for ``Z^V`` by convexity."""
    if T is None:
        c0 = [oscillator.equal_time_constant(spec, j) for j in range(spec.n)]
    else:
        c0 = [float(truncated_covariance(spec, 0.0, T, j).real) for j in range(spec.n)]
    mean_v = sum((c * gaussian_moment(spec, a, b, c0)).real for (a, b), c in V.monomials.items())
    return math.exp(-spec.beta * mean_v)


@dataclass
class SweepTable:
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(row.get(c)) for c in self.columns))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"columns": self.columns, "rows": self.rows, "summary": self.summary}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


SWEEP_COLUMNS = ["m", "lambda", "beta", "theta", "value_re", "value_im", "stderr", "T", "samples", "seed"]


def canonical_bound_sweep(spec: TwistSpec, V: PolyPotential, lambdas: Sequence[float], T: int = 256,
                          samples: int = 20_000, seed: int = 0, constant: float | None = None) -> SweepTable:
    """Tabulate ``Z^{lambda^2 V} Z_free`` against ``(beta (m + lambda))^{-2n}``.

    All rows share one set of Gaussian draws.  A single constant ``C`` is
    fitted as the largest scaled value plus three standard errors; when
    ``constant`` is supplied, rows exceeding ``C (beta(m+lambda))^{-2n}`` beyond
    three standard errors are reported as violations.
    """
    if V.elliptic_constants is None:
        raise ValueError("canonical bound sweep needs an elliptic potential with (M1, M2)")
    lambdas = [float(x) for x in lambdas]
    if any(not 0 <= x <= 1 for x in lambdas):
        raise ValueError("lambda grid must lie in [0, 1]")
    require_allowed(spec, V)
    zfree = oscillator.partition_function(spec)
    Q1, _ = sample_actions(spec, V, T, samples, seed)
    pure_mass = _pure_mass_coefficient(V)
    rows = []
    for lam in lambdas:
        est = _z_from_actions(spec, V.scaled(lam ** 2), T, seed, lam ** 2 * Q1) if lam > 0 else \
            ReweightedEstimate(1.0 + 0j, 0.0, samples, T, spec, potential_id(None), seed)
        product = est.value.real * zfree
        perr = est.stderr * zfree
        scale = (spec.beta * (spec.m + lam)) ** (2 * spec.n)
        row = dict(m=spec.m, beta=spec.beta, theta=spec.theta, T=T, samples=samples, seed=seed,
                   value_re=est.value.real, value_im=est.value.imag, stderr=est.stderr)
        row["lambda"] = lam
        row.update(product=product, product_stderr=perr, scaled=product * scale, scaled_stderr=perr * scale)
        if pure_mass is not None:
            row["exact"] = oscillator.mass_renormalized_Z(spec, lam * math.sqrt(pure_mass))
        rows.append(row)
    fitted = max(r["scaled"] + 3 * r["scaled_stderr"] for r in rows)
    products = [r["product"] for r in rows]
    monotone = all(b <= a + 3 * (ra["product_stderr"] + rb["product_stderr"])
                   for a, b, ra, rb in zip(products, products[1:], rows, rows[1:]))
    violations = []
    if constant is not None:
        for r in rows:
            bound = constant / (spec.beta * (spec.m + r["lambda"])) ** (2 * spec.n)
            if r["product"] - 3 * r["product_stderr"] > bound:
                violations.append(r["lambda"])
    cols = SWEEP_COLUMNS + ["product", "product_stderr", "scaled", "scaled_stderr"] + \
        (["exact"] if pure_mass is not None else [])
    return SweepTable(cols, rows, {"fitted_constant": fitted, "monotone_decreasing": monotone,
                                   "violations": violations, "free_z": zfree})


def _pure_mass_coefficient(V: PolyPotential) -> float | None:
    """``c`` when ``V = c |z|^2`` (all components), otherwise None."""
    n = V.n
    expected = {tuple(1 if i == j else 0 for i in range(n)) for j in range(n)}
    keys = set()
    coeffs = set()
    for (a, b), c in V.monomials.items():
        if a != b or a not in expected:
            return None
        keys.add(a)
        coeffs.add(c)
    if keys != expected or len(coeffs) != 1:
        return None
    c = coeffs.pop()
    return float(c.real) if c.imag == 0 and c.real > 0 else None


def zero_mass_sweep(spec: TwistSpec, V: PolyPotential | None, masses: Sequence[float], T: int = 256,
                    samples: int = 20_000, seed: int = 0) -> SweepTable:
    """Estimates at decreasing mass with common random numbers.

    Every mass uses the same standard normals, rescaled to its own mode
    variances, so successive differences are estimated pairwise.
    """
    if np.any(phase_is_singular(spec.phases)):
        raise DivergenceError("singular twist: Z^V grows like m^(-2n) as m -> 0")
    if V is not None:
        require_allowed(spec.replace(m=max(masses)), V)
    req = MomentRequest((0.0,), (0.0,))
    rows = []
    prev = None
    for m in masses:
        local = spec.replace(m=float(m))
        Q, X = sample_actions(local, V, T, samples, seed, [req])
        w, qmin = _weights(Q) if V is not None else (np.ones(samples), 0.0)
        z_samples = w * math.exp(-qmin)
        z = float(z_samples.mean())
        zerr = float(z_samples.std(ddof=1) / math.sqrt(samples))
        mom, merr, ess = ratio_estimate(w, X[:, 0])
        row = dict(m=float(m), beta=spec.beta, theta=spec.theta, T=T, samples=samples, seed=seed,
                   value_re=z, value_im=0.0, stderr=zerr, moment=mom.real, moment_stderr=merr,
                   free_z=oscillator.partition_function(local),
                   c0=oscillator.equal_time_constant(local) if m > 0 else oscillator.zero_mass_covariance(local))
        row["lambda"] = 1.0 if V is not None else 0.0
        if prev is not None:
            d = z_samples - prev
            row["diff"] = float(d.mean())
            row["diff_stderr"] = float(d.std(ddof=1) / math.sqrt(samples))
        prev = z_samples
        rows.append(row)
    diffs = [abs(r["diff"]) for r in rows if "diff" in r]
    shrinking = all(b <= a + 3 * r["diff_stderr"] for a, b, r in zip(diffs, diffs[1:], rows[2:]))
    cols = SWEEP_COLUMNS + ["moment", "moment_stderr", "free_z", "c0", "diff", "diff_stderr"]
    limit = float(np.prod(np.abs(1 - np.exp(1j * spec.phases)) ** -2))
    return SweepTable(cols, rows, {"differences_shrink": shrinking, "free_z_limit": limit})
