"""Closed forms for the free twisted oscillator.

The pair correlation ``C(xi) = <zbar(t) z(s)>`` with ``xi = t - s`` is
evaluated from its exponential form on ``[-beta, beta]``; the Fourier
representation runs over ``K = {E : beta*E in 2*pi*Z - omega*theta}``.
"""
from __future__ import annotations

import math

import numpy as np

from .twist import DivergenceError, TwistSpec, phase_is_singular

TWO_PI = 2.0 * math.pi


def reduced_phase(phase):
    """Representative of ``phase`` modulo 2*pi in (-pi, pi]."""
    r = np.mod(np.asarray(phase, dtype=float) + math.pi, TWO_PI) - math.pi
    return np.where(r == -math.pi, math.pi, r)


def phase_distance(phase):
    """Distance from ``phase`` to the lattice 2*pi*Z."""
    return np.abs(reduced_phase(phase))


def _components(spec: TwistSpec, j):
    return range(spec.n) if j is None else [j]


def partition_function(spec: TwistSpec) -> float:
    """``prod_j |1 - gamma_j|^-2``."""
    if spec.m == 0 and np.any(phase_is_singular(spec.phases)):
        raise DivergenceError("divergent partition function: massless spec at a singular twist")
    return float(np.prod(np.abs(1.0 - spec.gammas) ** -2))


def log_partition_function(spec: TwistSpec) -> float:
    if spec.m == 0 and np.any(phase_is_singular(spec.phases)):
        raise DivergenceError("divergent partition function: massless spec at a singular twist")
    return float(-2.0 * np.sum(np.log(np.abs(1.0 - spec.gammas))))


def kernel(m: float, beta: float, phase: float, xi):
    """Pair correlation for a single mode with mass ``m`` and twist phase.

    ``C(xi) = (1/2m) [g/(1-g) e^{-m xi} + gb/(1-gb) e^{m xi} + e^{-m|xi|}]``
    with ``g = exp(-m beta + i phase)``, valid for ``xi`` in ``[-beta, beta]``.
    """
    xi = np.asarray(xi, dtype=float)
    g = np.exp(-m * beta + 1j * phase)
    # g/(1-g) e^{-m xi} is written as e^{-m(beta+xi)} e^{i phase}/(1-g) to avoid
    # overflow when m*beta is large
    a = np.exp(-m * (beta + xi) + 1j * phase) / (1.0 - g)
    b = np.exp(-m * (beta - xi) - 1j * phase) / (1.0 - np.conj(g))
    out = (a + b + np.exp(-m * np.abs(xi))) / (2.0 * m)
    return out[()] if out.ndim == 0 else out


def pair_correlation(spec: TwistSpec, xi, j: int | None = None):
    """Twisted two-point function ``<zbar_j(t) z_j(s)>`` at ``xi = t - s``.

    Returns one value per component when ``j`` is None (shape ``(n, *xi.shape)``),
    otherwise the value for component ``j``.
    """
    if spec.m <= 0:
        raise ValueError("pair_correlation needs m > 0; use zero_mass_kernel for m = 0")
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi_arr) > spec.beta * (1 + 1e-12)):
        raise ValueError("xi must lie in [-beta, beta]")
    phases = spec.phases
    vals = [kernel(spec.m, spec.beta, phases[c], xi_arr) for c in _components(spec, j)]
    return vals[0] if j is not None else np.array(vals)


def equal_time_constant(spec: TwistSpec, j: int = 0) -> float:
    """``c_j = C_j(0) = (1/2m)(1 - |gamma|^2)/|1 - gamma|^2``."""
    if spec.m == 0:
        return float(zero_mass_covariance(spec, j))
    g = spec.gammas[j]
    return float((-math.expm1(-2 * spec.m * spec.beta)) / abs(1 - g) ** 2 / (2 * spec.m))


def pair_correlation_extended(spec: TwistSpec, xi, j: int = 0):
    """Continuation of the kernel to complex ``xi``.

    On the strip ``n*beta <= Re xi < (n+1)*beta`` with ``xi = n*beta + x1``
    the value is ``e^{-i n phase}/(2m) [e^{-m conj(x1)}/(1-g) + e^{m x1} gb/(1-gb)]``,
    which is periodic under ``xi -> xi + beta + i*phase/m``.
    """
    if spec.m <= 0:
        raise ValueError("extended kernel needs m > 0")
    xi = np.asarray(xi, dtype=complex)
    m, beta = spec.m, spec.beta
    phase = spec.phases[j]
    g = spec.gammas[j]
    n = np.floor(xi.real / beta)
    x1 = xi - n * beta
    out = np.exp(-1j * n * phase) / (2 * m) * (
        np.exp(-m * np.conj(x1)) / (1 - g) + np.exp(m * x1 - m * beta - 1j * phase) / (1 - np.conj(g)))
    return out[()] if out.ndim == 0 else out


def complex_period(spec: TwistSpec, j: int = 0) -> complex:
    return complex(spec.beta, spec.phases[j] / spec.m)


def allowed_energies(spec: TwistSpec, n_modes: int, j: int = 0) -> np.ndarray:
    """Elements of ``K_j`` closest to zero: ``(2*pi*k - phase)/beta`` for ``|k| <= n_modes``."""
    k = np.arange(-n_modes, n_modes + 1)
    return (TWO_PI * k - reduced_phase(spec.phases[j])) / spec.beta


def in_allowed_set(spec: TwistSpec, E: float, j: int = 0, tol: float = 1e-9) -> bool:
    x = (spec.beta * E + spec.phases[j]) / TWO_PI
    return abs(x - round(x)) < tol


def fourier_coefficient(spec: TwistSpec, E: float, j: int = 0) -> float:
    """``beta * C_hat(E) = 1/(E^2 + m^2)`` for ``E`` in the allowed set."""
    if not in_allowed_set(spec, E, j):
        raise ValueError(f"E={E} is not an allowed frequency for this twist")
    if E == 0 and spec.m == 0:
        raise DivergenceError("zero frequency at zero mass")
    return 1.0 / (E * E + spec.m * spec.m)


def fourier_sum(spec: TwistSpec, xi, n_modes: int = 4096, j: int = 0):
    """Partial sum ``(1/beta) sum_{E in K, |k|<=n_modes} e^{i E xi}/(E^2+m^2)``."""
    E = allowed_energies(spec, n_modes, j)
    xi = np.asarray(xi, dtype=float)
    w = 1.0 / (E ** 2 + spec.m ** 2)
    out = (np.exp(1j * np.multiply.outer(xi, E)) @ w) / spec.beta
    return out[()] if out.ndim == 0 else out


def spectrum_bound(spec: TwistSpec, j: int = 0) -> float:
    """Largest Fourier coefficient ``max_{E in K} 1/(E^2+m^2)``."""
    d = float(phase_distance(spec.phases[j])) / spec.beta
    denom = d * d + spec.m ** 2
    if denom == 0:
        raise DivergenceError("spectrum unbounded: massless spec at a singular twist")
    return 1.0 / denom


def mass_renormalized_Z(spec: TwistSpec, eps: float) -> float:
    """Relative partition function for ``V = eps^2 |z|^2``.

    ``prod_j |1-gamma_j|^2/|1-gamma'_j|^2 * exp(beta (m - m'))`` with
    ``m' = sqrt(m^2 + eps^2)``.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return 1.0
    shifted = spec.replace(m=math.hypot(spec.m, eps))
    if spec.m == 0:
        if np.any(phase_is_singular(spec.phases)):
            raise DivergenceError("free partition function diverges at this twist")
    ratio = np.prod(np.abs(1 - spec.gammas) ** 2 / np.abs(1 - shifted.gammas) ** 2)
    return float(ratio * math.exp(spec.n * spec.beta * (spec.m - shifted.m)))


def zero_mass_covariance(spec: TwistSpec, j: int = 0) -> float:
    """Equal-time value of the massless kernel, ``beta / (4 sin^2(phase/2))``."""
    phase = spec.phases[j]
    if phase_is_singular(phase):
        raise DivergenceError("zero-mass covariance diverges at a singular twist")
    return spec.beta / (4.0 * math.sin(phase / 2) ** 2)


def zero_mass_kernel(spec: TwistSpec, xi, j: int = 0):
    """Massless limit of the pair correlation on ``[-beta, beta]``.

    ``beta/(4 sin^2(p/2)) - (i/2) xi cot(p/2) - |xi|/2``; its Fourier
    coefficients are ``1/E^2`` on the allowed set.
    """
    phase = spec.phases[j]
    if phase_is_singular(phase):
        raise DivergenceError("zero-mass kernel diverges at a singular twist")
    xi = np.asarray(xi, dtype=float)
    half = phase / 2
    out = spec.beta / (4 * math.sin(half) ** 2) - 0.5j * xi * (math.cos(half) / math.sin(half)) \
        - 0.5 * np.abs(xi)
    return out[()] if out.ndim == 0 else out


def vacuum_kernel(m: float, xi):
    """Zero-temperature limit ``(1/2m) e^{-m|xi|}``."""
    return np.exp(-m * np.abs(np.asarray(xi, dtype=float))) / (2 * m)


def bare_covariance(spec: TwistSpec, xi, j: int = 0):
    """``m * C(xi)``; at infinite beta this is ``exp(-m|xi|)/2``."""
    if math.isinf(spec.beta):
        return 0.5 * np.exp(-spec.m * np.abs(np.asarray(xi, dtype=float)))
    return spec.m * pair_correlation(spec, xi, j)


def kernel_table(spec: TwistSpec, xis, j: int = 0) -> str:
    """CSV rows ``xi,re,im``."""
    vals = pair_correlation(spec, xis, j)
    lines = ["xi,re,im"]
    for x, v in zip(np.atleast_1d(xis), np.atleast_1d(vals)):
        lines.append(f"{x:.17g},{v.real:.17g},{v.imag:.17g}")
    return "\n".join(lines) + "\n"
