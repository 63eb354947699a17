"""Gaussian measure on twisted-periodic paths.

A path is synthesized from independent circular complex Gaussian mode
amplitudes,

    omega_j(t) = sum_k zeta_jk exp(i E_jk t),   E_jk = (2 pi k + p_j) / beta,

with ``p_j`` the twist phase reduced to (-pi, pi], ``k`` in ``[-T/2, T/2)``
and ``E|zeta_jk|^2 = 1/(beta (E_jk^2 + m^2))``.  Every mode picks up the
factor ``exp(i p_j)`` over one period, so ``omega(t+beta) = e^{i w theta} omega(t)``
and ``E[conj(omega(t)) omega(s)] = C(t - s)`` up to mode truncation.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import oscillator
from .oscillator import TWO_PI, reduced_phase
from .parallel import block_size_for, mean_and_stderr, run_blocks
from .twist import DivergenceError, TwistSpec, phase_is_singular


def covariance(spec: TwistSpec, xi, j: int = 0):
    """Pair correlation for component ``j``; the massless kernel when m = 0."""
    if spec.m == 0:
        return oscillator.zero_mass_kernel(spec, xi, j)
    return oscillator.pair_correlation(spec, xi, j)


def _check_sampleable(spec: TwistSpec):
    if spec.m == 0 and np.any(phase_is_singular(spec.phases)):
        raise DivergenceError("zero-mode variance divergent: massless spec at a singular twist")


def mode_indices(T: int) -> np.ndarray:
    """Integers ``k`` in FFT storage order covering ``[-T/2, T/2)``."""
    return np.fft.fftfreq(T, d=1.0 / T).astype(int)


def mode_energies(spec: TwistSpec, T: int) -> np.ndarray:
    """``(n, T)`` array of path frequencies, FFT order."""
    k = mode_indices(T)
    p = reduced_phase(spec.phases)
    return (TWO_PI * k[None, :] + p[:, None]) / spec.beta


def mode_variances(spec: TwistSpec, T: int, E_max: float | None = None) -> np.ndarray:
    E = mode_energies(spec, T)
    v = 1.0 / (spec.beta * (E ** 2 + spec.m ** 2))
    if E_max is not None:
        v = np.where(np.abs(E) <= E_max, v, 0.0)
    return v


def truncated_covariance(spec: TwistSpec, xi, T: int, j: int = 0, E_max: float | None = None):
    """``E[conj(omega_j(t)) omega_j(s)]`` at ``xi = t - s`` for the truncated sampler."""
    E = mode_energies(spec, T)[j]
    v = mode_variances(spec, T, E_max)[j]
    xi = np.asarray(xi, dtype=float)
    out = np.exp(-1j * np.multiply.outer(xi, E)) @ v
    return out[()] if out.ndim == 0 else out


def truncation_bias(spec: TwistSpec, T: int, j: int = 0) -> float:
    """Missing equal-time variance ``C(0) - C_T(0)`` of the truncated sampler."""
    full = oscillator.equal_time_constant(spec, j)
    return float(full - truncated_covariance(spec, 0.0, T, j).real)


def truncated_mass_renormalized_Z(spec: TwistSpec, eps: float, T: int) -> float:
    """``E[exp(-eps^2 int |omega|^2)]`` for the sampler with ``T`` modes, ``prod 1/(1 + eps^2 beta v)``."""
    v = mode_variances(spec, T)
    return float(np.prod(1.0 / (1.0 + eps ** 2 * spec.beta * v)))


def standard_normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex normals with ``E|x|^2 = 1``."""
    x = rng.standard_normal(tuple(shape) + (2,))
    return (x[..., 0] + 1j * x[..., 1]) * math.sqrt(0.5)


def draw_modes(spec: TwistSpec, T: int, count: int, rng: np.random.Generator,
               E_max: float | None = None) -> np.ndarray:
    """Mode amplitudes of shape ``(count, n, T)``."""
    _check_sampleable(spec)
    scale = np.sqrt(mode_variances(spec, T, E_max))
    return standard_normals(rng, (count, spec.n, T)) * scale


def synthesize_grid(spec: TwistSpec, modes: np.ndarray, offset: float = 0.0) -> np.ndarray:
    """Path values at ``t_l = (l + offset) beta / T`` by inverse FFT.

    ``modes`` has trailing axes ``(n, T)``; the result has the same shape.
    """
    T = modes.shape[-1]
    p = reduced_phase(spec.phases)[:, None]
    k = mode_indices(T)
    shifted = modes * np.exp(2j * math.pi * k * offset / T) if offset else modes
    vals = T * np.fft.ifft(shifted, axis=-1)
    l = np.arange(T) + offset
    return vals * np.exp(1j * p * l[None, :] / T)


def evaluate_modes(spec: TwistSpec, modes: np.ndarray, times, j: int | None = None) -> np.ndarray:
    """Path values at arbitrary times by direct mode sums.

    Returns shape ``(..., n, len(times))``, or ``(..., len(times))`` for a single ``j``.
    """
    T = modes.shape[-1]
    E = mode_energies(spec, T)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if j is not None:
        return modes[..., j, :] @ np.exp(1j * np.multiply.outer(E[j], times))
    phase = np.exp(1j * E[:, :, None] * times[None, None, :])  # (n, T, len)
    return np.einsum("...jk,jkt->...jt", modes, phase)


@dataclass
class PathSample:
    """One path on the grid ``t_l = l beta / T`` together with its modes."""

    spec: TwistSpec
    T: int
    values: np.ndarray
    modes: np.ndarray
    energies: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.T) * self.spec.beta / self.T

    def at(self, times, j: int = 0) -> np.ndarray:
        return evaluate_modes(self.spec, self.modes, times, j)

    def wrap_residual(self, t: float = 0.0) -> float:
        """``max_j |omega_j(t + beta) - e^{i w_j theta} omega_j(t)|`` from the modes."""
        res = 0.0
        for j in range(self.spec.n):
            after = self.at([t + self.spec.beta], j)[0]
            before = self.at([t], j)[0]
            res = max(res, abs(after - np.exp(1j * self.spec.phases[j]) * before))
        return res

    def to_csv(self) -> str:
        cols = ["t"] + [f"{part}_{j}" for j in range(self.spec.n) for part in ("re", "im")]
        lines = [",".join(cols)]
        for l, t in enumerate(self.grid):
            row = [f"{t:.17g}"]
            for j in range(self.spec.n):
                v = self.values[j, l]
                row += [f"{v.real:.17g}", f"{v.imag:.17g}"]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _check_grid(T: int):
    if T < 2 or T & (T - 1):
        raise ValueError(f"grid size must be a power of two, got {T}")


def sample_path(spec: TwistSpec, T: int = 256, E_max: float | None = None, seed: int = 0) -> PathSample:
    _check_grid(T)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    modes = draw_modes(spec, T, 1, rng, E_max)[0]
    return PathSample(spec, T, synthesize_grid(spec, modes), modes, mode_energies(spec, T))


@dataclass(frozen=True)
class MomentRequest:
    """Product ``prod_i conj(omega_{c_i}(t_i)) prod_l omega_{d_l}(s_l)``."""

    conj_times: tuple = ()
    plain_times: tuple = ()
    conj_comps: tuple | None = None
    plain_comps: tuple | None = None

    def __post_init__(self):
        ct = tuple(float(t) for t in self.conj_times)
        pt = tuple(float(t) for t in self.plain_times)
        cc = tuple(self.conj_comps) if self.conj_comps is not None else (0,) * len(ct)
        pc = tuple(self.plain_comps) if self.plain_comps is not None else (0,) * len(pt)
        if len(cc) != len(ct) or len(pc) != len(pt):
            raise ValueError("component list length must match the time list")
        object.__setattr__(self, "conj_times", ct)
        object.__setattr__(self, "plain_times", pt)
        object.__setattr__(self, "conj_comps", tuple(int(c) for c in cc))
        object.__setattr__(self, "plain_comps", tuple(int(c) for c in pc))

    @property
    def r(self) -> int:
        return len(self.conj_times)

    @property
    def rp(self) -> int:
        return len(self.plain_times)

    def check_times(self, beta: float):
        for t in self.conj_times + self.plain_times:
            if t < -1e-12 or t > beta * (1 + 1e-12):
                raise ValueError(f"time {t} outside [0, beta]")

    def times_by_component(self, n: int):
        out = []
        for j in range(n):
            out.append(sorted(set(t for t, c in zip(self.conj_times + self.plain_times,
                                                    self.conj_comps + self.plain_comps) if c == j)))
        return out

    def to_dict(self) -> dict:
        return {"conj_times": list(self.conj_times), "conj_comps": list(self.conj_comps),
                "plain_times": list(self.plain_times), "plain_comps": list(self.plain_comps)}

    @classmethod
    def from_dict(cls, data) -> "MomentRequest":
        return cls(tuple(data.get("conj_times", ())), tuple(data.get("plain_times", ())),
                   data.get("conj_comps"), data.get("plain_comps"))


def permanent(A: np.ndarray) -> complex:
    """Permanent by Ryser's inclusion-exclusion formula with Gray-code updates."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if n == 0:
        return 1.0 + 0j
    if A.shape != (n, n):
        raise ValueError("permanent needs a square matrix")
    if n > 16:
        raise ValueError("permanent limited to 16x16")
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    prev = 0
    for i in range(1, 1 << n):
        gray = i ^ (i >> 1)
        changed = gray ^ prev
        col = changed.bit_length() - 1
        if gray & changed:
            row_sums += A[:, col]
        else:
            row_sums -= A[:, col]
        prev = gray
        sign = -1 if bin(gray).count("1") % 2 else 1
        total += sign * np.prod(row_sums)
    return (-1) ** n * total


def pairing_matrix(req: MomentRequest, spec: TwistSpec) -> np.ndarray:
    A = np.zeros((req.r, req.rp), dtype=complex)
    for i, (t, ci) in enumerate(zip(req.conj_times, req.conj_comps)):
        for l, (s, cl) in enumerate(zip(req.plain_times, req.plain_comps)):
            if ci == cl:
                A[i, l] = covariance(spec, t - s, ci)
    return A


def wick_moment(req: MomentRequest, spec: TwistSpec) -> complex:
    """Exact Gaussian moment: sum over pairings of conjugate with plain factors."""
    req.check_times(spec.beta)
    if req.r != req.rp:
        return 0j
    return complex(permanent(pairing_matrix(req, spec)))


@dataclass
class MCEstimate:
    estimate: complex
    stderr: float
    n_samples: int
    seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"estimate_re": float(np.real(self.estimate)), "estimate_im": float(np.imag(self.estimate)),
               "stderr": float(self.stderr), "n_samples": self.n_samples, "seed": self.seed}
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _product_sampler(spec: TwistSpec, T: int, reqs: Sequence[MomentRequest], E_max=None):
    """Per-block function returning ``(count, len(reqs))`` products of path values."""
    times = sorted(set(t for q in reqs for t in q.conj_times + q.plain_times))
    index = {t: i for i, t in enumerate(times)}

    def fn(rng, count):
        modes = draw_modes(spec, T, count, rng, E_max)
        vals = evaluate_modes(spec, modes, times)  # (count, n, len(times))
        out = np.ones((count, len(reqs)), dtype=complex)
        for q_i, q in enumerate(reqs):
            for t, c in zip(q.conj_times, q.conj_comps):
                out[:, q_i] *= np.conj(vals[:, c, index[t]])
            for s, c in zip(q.plain_times, q.plain_comps):
                out[:, q_i] *= vals[:, c, index[s]]
        return out

    return fn


def sample_products(spec: TwistSpec, reqs: Sequence[MomentRequest], samples: int, seed: int,
                    T: int = 256, E_max: float | None = None) -> np.ndarray:
    _check_grid(T)
    for q in reqs:
        q.check_times(spec.beta)
    fn = _product_sampler(spec, T, reqs, E_max)
    return run_blocks(fn, samples, seed, block_size_for(spec.n * T))


def estimate_moment_mc(req: MomentRequest, spec: TwistSpec, samples: int = 100_000, seed: int = 0,
                       T: int = 256, E_max: float | None = None) -> MCEstimate:
    """Sample mean and standard error of the requested path product."""
    X = sample_products(spec, [req], samples, seed, T, E_max)[:, 0]
    mean, err = mean_and_stderr(X)
    return MCEstimate(complex(mean), float(err), samples, seed,
                      {"T": T, "truncation_bias_c0": truncation_bias(spec, T) if spec.m > 0 else None})


def _drop(seq: tuple, i: int) -> tuple:
    return seq[:i] + seq[i + 1:]


def integration_by_parts_terms(spec: TwistSpec, F: MomentRequest, s: float, j: int = 0):
    """Left request ``omega_j(s) F`` and right-hand list ``[(C(t_i - s), F without conj(omega(t_i)))]``."""
    lhs = MomentRequest(F.conj_times, (s,) + F.plain_times, F.conj_comps, (j,) + F.plain_comps)
    rhs = []
    for i, (t, c) in enumerate(zip(F.conj_times, F.conj_comps)):
        if c != j:
            continue
        reduced = MomentRequest(_drop(F.conj_times, i), F.plain_times,
                                _drop(F.conj_comps, i), F.plain_comps)
        rhs.append((complex(covariance(spec, t - s, j)), reduced))
    return lhs, rhs


def check_integration_by_parts(spec: TwistSpec, F: MomentRequest, s: float, j: int = 0,
                               samples: int = 100_000, seed: int = 0, T: int = 256,
                               mode: str = "mc") -> dict:
    """Residual of ``<omega(s) F> - sum_i C(t_i - s) <F / conj(omega(t_i))>``.

    In ``"wick"`` mode both sides are exact pairing sums; in ``"mc"`` mode the
    difference is estimated sample by sample, with a standard error.
    """
    if F.r + F.rp > 6:
        raise ValueError("F is limited to total degree 6")
    lhs, rhs = integration_by_parts_terms(spec, F, s, j)
    if mode == "wick":
        value = wick_moment(lhs, spec) - sum(c * wick_moment(q, spec) for c, q in rhs)
        return {"residual": float(abs(value)), "value": value, "stderr": 0.0}
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    reqs = [lhs] + [q for _, q in rhs]
    X = sample_products(spec, reqs, samples, seed, T)
    coeffs = np.array([1.0] + [-c for c, _ in rhs], dtype=complex)
    mean, err = mean_and_stderr(X @ coeffs)
    return {"residual": float(abs(mean)), "value": complex(mean), "stderr": float(err)}


def reflect(req: MomentRequest, beta: float) -> MomentRequest:
    """``conj(Theta A)``: reflect times ``t -> beta - t`` and swap conjugation."""
    return MomentRequest(tuple(beta - t for t in req.plain_times),
                         tuple(beta - t for t in req.conj_times),
                         req.plain_comps, req.conj_comps)


def combine(a: MomentRequest, b: MomentRequest) -> MomentRequest:
    return MomentRequest(a.conj_times + b.conj_times, a.plain_times + b.plain_times,
                         a.conj_comps + b.conj_comps, a.plain_comps + b.plain_comps)


def reflection_gram(spec: TwistSpec, family: Sequence[MomentRequest]) -> np.ndarray:
    size = len(family)
    G = np.zeros((size, size), dtype=complex)
    for i, A in enumerate(family):
        left = reflect(A, spec.beta)
        for k, B in enumerate(family):
            G[i, k] = wick_moment(combine(left, B), spec)
    return G


def reflection_positivity_check(spec: TwistSpec, family: Sequence[MomentRequest]) -> float:
    """Smallest eigenvalue of the reflection Gram matrix for monomials on ``[beta/2, beta]``."""
    if not np.all(phase_is_singular(spec.phases)):
        raise ValueError("reflection positivity is only asserted for theta = 0")
    for A in family:
        for t in A.conj_times + A.plain_times:
            if t < spec.beta / 2 - 1e-12 or t > spec.beta + 1e-12:
                raise ValueError("test monomials must be supported in [beta/2, beta]")
    G = reflection_gram(spec, family)
    return float(np.linalg.eigvalsh(0.5 * (G + G.conj().T)).min())


def random_monomial_family(rng: np.random.Generator, size: int, beta: float, n: int = 1,
                           max_degree: int = 3) -> list[MomentRequest]:
    """Random monomials in ``omega, conj(omega)`` at times in ``[beta/2, beta]``."""
    family = []
    for _ in range(size):
        r = int(rng.integers(0, max_degree + 1))
        rp = int(rng.integers(0, max_degree + 1))
        family.append(MomentRequest(tuple(rng.uniform(beta / 2, beta, r)),
                                    tuple(rng.uniform(beta / 2, beta, rp)),
                                    tuple(int(x) for x in rng.integers(0, n, r)),
                                    tuple(int(x) for x in rng.integers(0, n, rp))))
    return family


def all_pairings(r: int):
    """Permutations pairing conjugate slot ``i`` with plain slot ``p[i]``."""
    return itertools.permutations(range(r))
