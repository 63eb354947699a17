"""Free scalar fields on the torus T^s times [0, beta] with a space-time twist.

Every lattice momentum ``k`` carries an oscillator with frequency
``mu(k) = sqrt(k^2 + m^2)`` and twist phase ``w_j theta + k.tau``, so the
partition function, kernel and sampler all factor over modes.  The random
field is

    Phi_j(x, t) = Vol^{-1/2} sum_k e^{-i k.x} psi_jk(t)

with independent twisted processes ``psi_jk``, which gives
``Phi_j(x, t + beta) = e^{i w_j theta} Phi_j(x - tau, t)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import oscillator
from .nongaussian import ReweightedEstimate, SweepTable, _weights, potential_id, require_allowed
from .oscillator import TWO_PI, phase_distance, reduced_phase
from .parallel import block_size_for, run_blocks
from .paths import mode_indices, standard_normals
from .twist import DivergenceError, PolyPotential, TwistSpec, phase_is_singular


@dataclass(frozen=True)
class FieldSpec:
    m: float
    beta: float
    theta: float
    periods: tuple = (2 * math.pi,)
    tau: tuple = (0.0,)
    weights: tuple = (1.0,)
    k_cut: float = 4.0
    chi: object = "gaussian"
    real_field: bool = False

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        object.__setattr__(self, "weights", tuple(self.weights))
        if len(self.periods) < 1 or any(p <= 0 for p in self.periods):
            raise ValueError("periods must be positive")
        if len(self.tau) != len(self.periods):
            raise ValueError("tau needs one entry per spatial direction")
        if not self.beta > 0 or self.m < 0 or self.k_cut <= 0:
            raise ValueError("need beta > 0, m >= 0, k_cut > 0")
        if any(not float(w) > 0 for w in self.weights):
            raise ValueError("weights must be positive")

    @property
    def s(self) -> int:
        return len(self.periods)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    def oscillator_spec(self) -> TwistSpec:
        return TwistSpec(self.m, self.beta, self.theta, self.weights)

    def replace(self, **changes) -> "FieldSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        chi = self.chi if isinstance(self.chi, str) else getattr(self.chi, "__name__", "custom")
        return {"m": self.m, "beta": self.beta, "theta": self.theta, "periods": list(self.periods),
                "tau": list(self.tau), "weights": [float(w) for w in self.weights],
                "k_cut": self.k_cut, "chi": chi, "real_field": self.real_field}


def _lattice_ball(periods: Sequence[float], radius: float) -> np.ndarray:
    ranges = []
    for ell in periods:
        step = TWO_PI / ell
        top = int(math.floor(radius / step + 1e-12))
        ranges.append(np.arange(-top, top + 1) * step)
    pts = np.array(list(itertools.product(*ranges)), dtype=float).reshape(-1, len(periods))
    keep = np.sum(pts ** 2, axis=1) <= radius ** 2 * (1 + 1e-12)
    return pts[keep]


def momentum_lattice(spec: FieldSpec) -> np.ndarray:
    """Lattice momenta ``k_i in (2 pi / l_i) Z`` with ``|k| <= k_cut``, lexicographic."""
    return _lattice_ball(spec.periods, spec.k_cut)


def mode_masses(spec: FieldSpec, ks: np.ndarray | None = None) -> np.ndarray:
    ks = momentum_lattice(spec) if ks is None else ks
    return np.sqrt(np.sum(ks ** 2, axis=1) + spec.m ** 2)


def mode_phases(spec: FieldSpec, ks: np.ndarray | None = None) -> np.ndarray:
    """``(n, K)`` phases ``w_j theta + k.tau``; the real field has no internal twist."""
    ks = momentum_lattice(spec) if ks is None else ks
    ktau = ks @ np.asarray(spec.tau)
    if spec.real_field:
        return np.tile(ktau, (spec.n, 1))
    w = np.array([float(x) for x in spec.weights])
    return w[:, None] * spec.theta + ktau[None, :]


def _check_modes(spec: FieldSpec, ks: np.ndarray):
    mu = mode_masses(spec, ks)
    ph = mode_phases(spec, ks)
    bad = (mu[None, :] == 0) & phase_is_singular(ph)
    if np.any(bad):
        raise DivergenceError("singular zero mode: massless field at a singular twist")


def mode_gammas(spec: FieldSpec, ks: np.ndarray | None = None) -> np.ndarray:
    ks = momentum_lattice(spec) if ks is None else ks
    return np.exp(-mode_masses(spec, ks)[None, :] * spec.beta + 1j * mode_phases(spec, ks))


def log_field_partition_function(spec: FieldSpec) -> float:
    """Log of ``prod_{j,k} |1 - gamma_j(k)|^-2`` (complex) or ``prod_k |1 - gamma(k)|^-n`` (real)."""
    ks = momentum_lattice(spec)
    _check_modes(spec, ks)
    g = mode_gammas(spec, ks)
    if spec.real_field:
        return float(-np.sum(np.log(np.abs(1 - g))))
    return float(-2.0 * np.sum(np.log(np.abs(1 - g))))


def field_partition_function(spec: FieldSpec) -> float:
    return math.exp(log_field_partition_function(spec))


def mode_product_partition_function(spec: FieldSpec) -> float:
    """Same product assembled from oscillator partition functions, one mode at a time."""
    ks = momentum_lattice(spec)
    mu = mode_masses(spec, ks)
    ph = mode_phases(spec, ks)
    total = 0.0
    for i in range(len(ks)):
        for j in range(spec.n):
            osc = TwistSpec(float(mu[i]), spec.beta, float(ph[j, i]), (1.0,))
            lz = oscillator.log_partition_function(osc)
            total += 0.5 * lz if spec.real_field else lz
    return math.exp(total)


def shell_tail_bound(spec: FieldSpec, extra: float | None = None) -> float:
    """Bound on ``log Z`` contributions from modes beyond ``k_cut``."""
    extra = 40.0 / spec.beta if extra is None else extra
    ks = _lattice_ball(spec.periods, spec.k_cut + extra)
    norms = np.linalg.norm(ks, axis=1)
    outside = norms[norms > spec.k_cut * (1 + 1e-12)]
    q = np.exp(-spec.beta * outside)
    per = 2.0 if not spec.real_field else 1.0
    return float(per * spec.n * np.sum(q / (1 - q)))


def _k_vector(spec: FieldSpec, k) -> np.ndarray:
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.shape != (spec.s,):
        raise ValueError(f"momentum must have {spec.s} components")
    return k


def field_covariance_coefficient(spec: FieldSpec, j: int, k, xi):
    """Mode kernel ``C_hat(k; xi)``: the oscillator kernel with mass ``mu(k)`` and phase ``w_j theta + k.tau``."""
    k = _k_vector(spec, k)[None, :]
    mu = float(mode_masses(spec, k)[0])
    ph = float(mode_phases(spec, k)[j, 0])
    if mu == 0:
        return oscillator.zero_mass_kernel(TwistSpec(0.0, spec.beta, ph), xi)
    return oscillator.kernel(mu, spec.beta, ph, xi)


def field_fourier_coefficient_sum(spec: FieldSpec, j: int, k, xi, n_modes: int = 4096):
    """``(1/beta) sum_E e^{iE xi}/(E^2 + k^2 + m^2)`` over ``beta E in 2 pi Z - phase``."""
    k = _k_vector(spec, k)[None, :]
    mu = float(mode_masses(spec, k)[0])
    ph = float(mode_phases(spec, k)[j, 0])
    E = (TWO_PI * np.arange(-n_modes, n_modes + 1) - reduced_phase(ph)) / spec.beta
    xi = np.asarray(xi, dtype=float)
    out = np.exp(1j * np.multiply.outer(xi, E)) @ (1.0 / (E ** 2 + mu ** 2)) / spec.beta
    return out[()] if out.ndim == 0 else out


def chi_values(spec: FieldSpec, ks: np.ndarray, chi=None) -> np.ndarray:
    """Cutoff profile on the lattice; the zero mode is always 1."""
    chi = spec.chi if chi is None else chi
    norms = np.linalg.norm(ks, axis=1)
    if chi is None or chi == "none":
        vals = np.ones(len(ks))
    elif chi == "gaussian":
        lam = spec.k_cut / 2
        vals = np.exp(-(norms / lam) ** 2)
    elif isinstance(chi, str) and chi.startswith("indicator:"):
        k0 = float(chi.split(":", 1)[1])
        vals = (norms <= k0 * (1 + 1e-12)).astype(float)
    elif callable(chi):
        vals = np.asarray([float(chi(k)) for k in ks])
    else:
        raise ValueError(f"unknown cutoff profile {chi!r}")
    vals = np.where(norms == 0, 1.0, vals)
    if np.any(vals < 0) or np.any(vals > 1):
        raise ValueError("cutoff profile must lie in [0, 1]")
    return vals


def field_covariance(spec: FieldSpec, j: int, dx, xi, chi=None, weighted: bool = False):
    """Position kernel ``(1/Vol) sum_k C_hat(k; xi) e^{i k.dx}``, optionally ``chi^2`` weighted."""
    ks = momentum_lattice(spec)
    dx = np.atleast_1d(np.asarray(dx, dtype=float))
    w = chi_values(spec, ks, chi) ** 2 if weighted else np.ones(len(ks))
    total = 0j
    for i, k in enumerate(ks):
        total += w[i] * field_covariance_coefficient(spec, j, k, xi) * np.exp(1j * np.dot(k, dx))
    return total / spec.volume


def covariance_spectrum(spec: FieldSpec, E_max: float) -> np.ndarray:
    """Sorted values ``1/(E^2 + k^2 + m^2)`` over allowed energies ``|E| <= E_max`` and lattice ``k``."""
    ks = momentum_lattice(spec)
    _check_modes(spec, ks)
    k2 = np.sum(ks ** 2, axis=1)
    ph = mode_phases(spec, ks)
    vals = []
    top = int(math.ceil(E_max * spec.beta / TWO_PI)) + 1
    lattice = np.arange(-top, top + 1)
    for j in range(spec.n):
        for i in range(len(ks)):
            E = (TWO_PI * lattice + ph[j, i]) / spec.beta
            E = E[np.abs(E) <= E_max]
            vals.append(1.0 / (E ** 2 + k2[i] + spec.m ** 2))
    return np.sort(np.concatenate(vals))


def cbound(spec: FieldSpec, full_lattice: bool = True) -> float:
    """``sup 1/(E^2 + k^2)`` over allowed energies and momenta, from phase distances.

    With ``full_lattice`` the supremum runs over the whole dual lattice; the
    search radius only needs to reach the best value already found.
    """
    ks = momentum_lattice(spec)

    def best(kset):
        d = phase_distance(mode_phases(spec, kset)) / spec.beta
        return float(np.min(d ** 2 + np.sum(kset ** 2, axis=1)[None, :]))

    low = best(ks)
    if full_lattice and low > spec.k_cut ** 2:
        low = min(low, best(_lattice_ball(spec.periods, math.sqrt(low))))
    if low == 0:
        raise DivergenceError("singular twist: the covariance is unbounded at zero mass")
    return 1.0 / low


def spectrum_max_closed_form(spec: FieldSpec) -> float:
    """Largest spectral value ``1/(1/M + m^2)`` on the truncated lattice.

    At a singular twist ``1/M = 0`` and the value is ``1/m^2``.
    """
    try:
        inv_M = 1.0 / cbound(spec, full_lattice=False)
    except DivergenceError:
        if spec.m == 0:
            raise
        inv_M = 0.0
    return 1.0 / (inv_M + spec.m ** 2)


# ---- random fields ---------------------------------------------------------

def _half_lattice(ks: np.ndarray) -> np.ndarray:
    """Indices of a set containing exactly one of each pair ``{k, -k}`` with ``k != 0``."""
    idx = []
    for i, k in enumerate(ks):
        nz = np.nonzero(k)[0]
        if len(nz) and k[nz[0]] > 0:
            idx.append(i)
    return np.array(idx, dtype=int)


@dataclass
class RandomFieldSample:
    """Mode amplitudes of a random field and its values on an (x, t) grid.

    ``modes`` has shape ``(n, K, M)``: for every component and lattice
    momentum, ``M`` time modes in FFT order.  For the real field the lattice
    axis holds only the zero mode followed by one of each ``{k, -k}`` pair.
    """

    spec: FieldSpec
    ks: np.ndarray
    modes: np.ndarray
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray | None = None
    chi: np.ndarray | None = None

    @property
    def M(self) -> int:
        return self.modes.shape[-1]

    def energies(self) -> np.ndarray:
        """``(n, K, M)`` time frequencies ``(2 pi l + p)/beta``."""
        ph = reduced_phase(mode_phases(self.spec, self.ks))
        l = mode_indices(self.M)
        return (TWO_PI * l[None, None, :] + ph[:, :, None]) / self.spec.beta

    def mode_processes(self, t) -> np.ndarray:
        """``psi_jk(t)`` with shape ``(n, K, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        E = self.energies()
        return np.einsum("jkl,jklt->jkt", self.modes, np.exp(1j * E[..., None] * t))

    def evaluate(self, x, t) -> np.ndarray:
        """Field values with shape ``(n, P, len(t))`` at points ``x`` of shape ``(P, s)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        psi = self.mode_processes(t)
        phase = np.exp(-1j * x @ self.ks.T)  # (P, K)
        if self.spec.real_field:
            out = np.real(psi[:, :1, :]) + 2 * np.real(np.einsum("pk,jkt->jpt", phase[:, 1:], psi[:, 1:, :]))
            return out / math.sqrt(self.spec.volume)
        return np.einsum("pk,jkt->jpt", phase, psi) / math.sqrt(self.spec.volume)

    def wrap_residual(self, x=None, t=None) -> float:
        """``max |Phi(x, t + beta) - e^{i w theta} Phi(x - tau, t)|`` over the given points."""
        x = self.x if x is None else np.atleast_2d(x)
        t = self.t if t is None else np.atleast_1d(t)
        tau = np.asarray(self.spec.tau)
        after = self.evaluate(x, t + self.spec.beta)
        before = self.evaluate(x - tau, t)
        if self.spec.real_field:
            factor = np.ones(self.spec.n)
        else:
            factor = np.exp(1j * self.spec.theta * np.array([float(w) for w in self.spec.weights]))
        return float(np.max(np.abs(after - factor[:, None, None] * before)))

    def to_csv(self, j: int = 0) -> str:
        vals = self.evaluate(self.x, self.t)[j]
        cols = [f"x{i}" for i in range(self.spec.s)] + ["t", "re", "im"]
        lines = [",".join(cols)]
        for p, xp in enumerate(self.x):
            for l, tl in enumerate(self.t):
                v = complex(vals[p, l])
                lines.append(",".join([f"{c:.17g}" for c in xp] + [f"{tl:.17g}", f"{v.real:.17g}",
                                                                   f"{v.imag:.17g}"]))
        return "\n".join(lines) + "\n"


def sampling_lattice(spec: FieldSpec) -> np.ndarray:
    ks = momentum_lattice(spec)
    if not spec.real_field:
        return ks
    zero = np.where(np.all(ks == 0, axis=1))[0]
    return np.vstack([ks[zero], ks[_half_lattice(ks)]])


def field_mode_variances(spec: FieldSpec, ks: np.ndarray, M: int) -> np.ndarray:
    """``(n, K, M)`` variances ``1/(beta (E^2 + mu^2))``."""
    _check_modes(spec, ks)
    mu = mode_masses(spec, ks)
    ph = reduced_phase(mode_phases(spec, ks))
    l = mode_indices(M)
    E = (TWO_PI * l[None, None, :] + ph[:, :, None]) / spec.beta
    return 1.0 / (spec.beta * (E ** 2 + mu[None, :, None] ** 2))


def _draw_field_modes(spec: FieldSpec, ks: np.ndarray, M: int, count: int, rng) -> np.ndarray:
    """Amplitudes ``(count, n, K, M)``; for the real field the zero mode is a real process."""
    var = field_mode_variances(spec, ks, M)
    z = standard_normals(rng, (count,) + var.shape) * np.sqrt(var)
    if spec.real_field:
        l = mode_indices(M)
        # the zero-momentum process is real: zeta_{-l} = conj(zeta_l), zeta_0 real,
        # and the unpaired -M/2 frequency is dropped
        zero = z[:, :, 0, :]
        pos = l > 0
        mirror = np.array([np.where(l == -x)[0][0] for x in l[pos]])
        zero[..., mirror] = np.conj(zero[..., pos])
        zero[..., l == 0] = rng.standard_normal(zero[..., l == 0].shape) * np.sqrt(var[:, 0, l == 0])
        zero[..., l == -(M // 2)] = 0
        z[:, :, 0, :] = zero
    return z


def _default_grid(spec: FieldSpec, points: int = 8, times: int = 8):
    axes = [np.arange(points) * ell / points for ell in spec.periods]
    x = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, spec.s)
    t = np.arange(times) * spec.beta / times
    return x, t


def sample_random_field(spec: FieldSpec, grids=None, seed: int = 0, M: int = 64) -> RandomFieldSample:
    """One random field draw with ``M`` time modes per momentum.

    ``grids`` is ``(x_points, t_points)``; a small uniform grid is used when omitted.
    """
    if M < 2 or M & (M - 1):
        raise ValueError("M must be a power of two")
    x, t = _default_grid(spec) if grids is None else (np.atleast_2d(np.asarray(grids[0], dtype=float)),
                                                       np.atleast_1d(np.asarray(grids[1], dtype=float)))
    if x.shape[1] != spec.s:
        raise ValueError("grid points must have s coordinates")
    ks = sampling_lattice(spec)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    modes = _draw_field_modes(spec, ks, M, 1, rng)[0]
    sample = RandomFieldSample(spec, ks, modes, x, t)
    sample.values = sample.evaluate(x, t)
    return sample


def cutoff_field(sample: RandomFieldSample, chi=None) -> RandomFieldSample:
    """Multiply every nonzero-momentum mode by ``chi(k)``; the zero mode is untouched."""
    vals = chi_values(sample.spec, sample.ks, chi)
    modes = sample.modes * vals[None, :, None]
    out = RandomFieldSample(sample.spec, sample.ks, modes, sample.x, sample.t, chi=vals)
    out.values = out.evaluate(out.x, out.t)
    return out


def real_field_process_covariance(spec: FieldSpec, xi, M: int) -> np.ndarray:
    """Covariance of the truncated real zero-mode process at lag ``xi``."""
    ks = np.zeros((1, spec.s))
    var = field_mode_variances(spec, ks, M)[0, 0]
    l = mode_indices(M)
    E = TWO_PI * l / spec.beta
    keep = l != -(M // 2)
    return float(np.sum(var[keep] * np.cos(E[keep] * xi)))


# ---- reweighting -----------------------------------------------------------

def _quadrature_grid(spec: FieldSpec, points: int, T: int):
    axes = [(np.arange(points) + 0.5) * ell / points for ell in spec.periods]
    x = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, spec.s)
    return x, T


def _field_action_sampler(spec: FieldSpec, V: PolyPotential, chi_vals: np.ndarray, points: int, T: int,
                          ks: np.ndarray):
    x, _ = _quadrature_grid(spec, points, T)
    ph = reduced_phase(mode_phases(spec, ks))  # (n, K)
    phase_x = np.exp(-1j * x @ ks.T) * chi_vals[None, :]  # (P, K)
    l_grid = np.arange(T) + 0.5
    k_idx = mode_indices(T)
    shift = np.exp(2j * math.pi * k_idx * 0.5 / T)
    cell = spec.volume / len(x) * spec.beta / T
    norm = 1.0 / math.sqrt(spec.volume)

    def fn(rng, count):
        z = _draw_field_modes(spec, ks, T, count, rng)  # (count, n, K, T)
        psi = T * np.fft.ifft(z * shift, axis=-1) * np.exp(1j * ph[None, :, :, None] * l_grid / T)
        if spec.real_field:
            field_vals = np.real(psi[:, :, :1, :]) + 2 * np.real(
                np.einsum("pk,cjkt->cjpt", phase_x[:, 1:], psi[:, :, 1:, :]))
            field_vals = field_vals * norm
            zb = field_vals
        else:
            field_vals = np.einsum("pk,cjkt->cjpt", phase_x, psi) * norm
            zb = np.conj(field_vals)
        vals = V(np.moveaxis(field_vals, 1, 0), np.moveaxis(zb, 1, 0)).real
        return (vals.sum(axis=(-2, -1)) * cell)[:, None]

    return fn


def field_relative_partition_mc(spec: FieldSpec, V: PolyPotential, chi=None, points: int = 16, T: int = 64,
                                samples: int = 20_000, seed: int = 0) -> ReweightedEstimate:
    """``E[exp(-int V(Phi_chi) dy ds)]`` with midpoint space-time quadrature.

    The spatial grid has ``points`` nodes per direction and the time grid ``T``
    nodes, which also sets the number of time modes per momentum.
    """
    ks = sampling_lattice(spec)
    osc = spec.oscillator_spec()
    if V is None:
        return ReweightedEstimate(1.0 + 0j, 0.0, samples, T, osc, potential_id(None), seed)
    require_allowed(osc.replace(m=max(spec.m, 1e-300)), V)
    if T < 2 or T & (T - 1):
        raise ValueError("T must be a power of two")
    chi_vals = chi_values(spec, ks, chi)
    fn = _field_action_sampler(spec, V, chi_vals, points, T, ks)
    Q = run_blocks(fn, samples, seed, block_size_for(spec.n * len(ks) * T * max(points ** spec.s, 1)))[:, 0]
    w, qmin = _weights(Q)
    scale = math.exp(-qmin)
    est = ReweightedEstimate(complex(w.mean() * scale), float(w.std(ddof=1) / math.sqrt(samples) * scale),
                             samples, T, osc, potential_id(V), seed,
                             ess=float(w.sum() ** 2 / (w ** 2).sum()))
    est.extra = {"field_spec": spec.to_dict(), "points": points, "k_modes": int(len(ks))}
    return est


def field_mass_renormalized_Z(spec: FieldSpec, eps: float, chi=None) -> float:
    """Closed form for ``V = eps^2 |phi|^2``: product over modes of the oscillator result with ``eps chi(k)``."""
    if spec.real_field:
        raise ValueError("closed form implemented for complex fields")
    ks = momentum_lattice(spec)
    chis = chi_values(spec, ks, chi)
    mu = mode_masses(spec, ks)
    ph = mode_phases(spec, ks)
    total = 1.0
    for i in range(len(ks)):
        for j in range(spec.n):
            osc = TwistSpec(float(mu[i]), spec.beta, float(ph[j, i]))
            total *= oscillator.mass_renormalized_Z(osc, eps * chis[i])
    return total


def truncated_field_mass_renormalized_Z(spec: FieldSpec, eps: float, T: int, chi=None) -> float:
    """Exact ``V = eps^2 |phi|^2`` value for the sampler with ``T`` time modes per momentum."""
    ks = sampling_lattice(spec)
    var = field_mode_variances(spec, ks, T)
    chis = chi_values(spec, ks, chi)
    if spec.real_field:
        raise ValueError("closed form implemented for complex fields")
    return float(np.prod(1.0 / (1.0 + eps ** 2 * chis[None, :, None] ** 2 * spec.beta * var)))


def zero_mass_field_sweep(spec: FieldSpec, masses: Sequence[float], E_max: float = 200.0) -> SweepTable:
    """Spectrum maximum and the kernel at the origin as ``m`` decreases."""
    osc_phases = mode_phases(spec.replace(m=0.0))
    ks = momentum_lattice(spec)
    k2 = np.sum(ks ** 2, axis=1)
    if np.any((k2[None, :] == 0) & phase_is_singular(osc_phases)):
        raise DivergenceError("singular (tau, theta): zero mode diverges at zero mass")
    rows = []
    prev = None
    for m in masses:
        local = spec.replace(m=float(m))
        row = {"m": float(m), "spectrum_max": float(covariance_spectrum(local, E_max)[-1]),
               "cbound_shifted": spectrum_max_closed_form(local),
               "kernel_origin": complex(field_covariance(local, 0, np.zeros(spec.s), 0.0)).real}
        if prev is not None:
            row["diff"] = abs(row["kernel_origin"] - prev)
        prev = row["kernel_origin"]
        rows.append(row)
    diffs = [r["diff"] for r in rows if "diff" in r]
    summary = {"cbound": cbound(spec.replace(m=0.0)),
               "differences_shrink": all(b <= a for a, b in zip(diffs, diffs[1:]))}
    return SweepTable(["m", "spectrum_max", "cbound_shifted", "kernel_origin", "diff"], rows, summary)
