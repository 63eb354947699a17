"""Twist parameters and polynomial potentials.

A twist is specified by a mass ``m``, inverse temperature ``beta``, twist
angle ``theta`` and per-component weights ``omega_j``.  Each component
carries the complex parameter ``gamma_j = exp(-m*beta + 1j*omega_j*theta)``.

Potentials are real polynomials in ``(z, zbar)`` stored as maps from
exponent pairs ``(a, b)`` to coefficients, ``V = sum c_ab z^a zbar^b``.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np

SINGULAR_TOL = 1e-9

Exponent = tuple[int, ...]


class DivergenceError(ValueError):
    """Raised when a quantity diverges at a singular, massless twist."""


@dataclass(frozen=True)
class TwistSpec:
    m: float
    beta: float
    theta: float
    weights: tuple = (1.0,)
    tau: tuple | None = None

    def __post_init__(self):
        weights = tuple(self.weights)
        object.__setattr__(self, "weights", weights)
        if self.tau is not None:
            object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        if len(weights) < 1:
            raise ValueError("at least one component is required")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.m < 0:
            raise ValueError(f"mass must be nonnegative, got {self.m}")
        if any(not float(w) > 0 for w in weights):
            raise ValueError(f"weights must be positive, got {weights}")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def phases(self) -> np.ndarray:
        """Twist phases ``omega_j * theta``."""
        return np.array([float(w) * self.theta for w in self.weights])

    @property
    def gammas(self) -> np.ndarray:
        return np.exp(-self.m * self.beta + 1j * self.phases)

    def replace(self, **changes) -> "TwistSpec":
        data = dict(m=self.m, beta=self.beta, theta=self.theta,
                    weights=self.weights, tau=self.tau)
        data.update(changes)
        return TwistSpec(**data)

    def to_dict(self) -> dict:
        return {"m": self.m, "beta": self.beta, "theta": self.theta,
                "weights": [float(w) for w in self.weights],
                "tau": None if self.tau is None else list(self.tau)}


def gamma(spec: TwistSpec, j: int = 0) -> complex:
    """Return ``exp(-m beta + i omega_j theta)``."""
    return cmath.exp(-spec.m * spec.beta + 1j * float(spec.weights[j]) * spec.theta)


def phase_is_singular(phase, tol: float = SINGULAR_TOL):
    """True where ``exp(i*phase)`` is within ``tol`` of 1."""
    return np.abs(np.exp(1j * np.asarray(phase)) - 1.0) < tol


def is_singular(spec: TwistSpec, lattice: Sequence[Sequence[float]] | None = None,
                tol: float = SINGULAR_TOL) -> bool:
    """Whether ``theta`` lies in the singular set.

    Without ``lattice`` this is the oscillator test ``exp(i w_j theta) == 1``
    for some j.  With a momentum lattice (and ``spec.tau``) every phase
    ``w_j theta + k.tau`` is tested.
    """
    phases = spec.phases
    if lattice is None:
        return bool(np.any(phase_is_singular(phases, tol)))
    if spec.tau is None:
        raise ValueError("field singularity test requires spec.tau")
    ks = np.atleast_2d(np.asarray(lattice, dtype=float))
    ktau = ks @ np.asarray(spec.tau, dtype=float)
    total = phases[:, None] + ktau[None, :]
    return bool(np.any(phase_is_singular(total, tol)))


def _as_exponent(values: Iterable[int], n: int) -> Exponent:
    exps = tuple(int(v) for v in values)
    if len(exps) != n or any(e < 0 for e in exps):
        raise ValueError(f"bad exponent {exps} for n={n}")
    return exps


def _exact_weight(w):
    if isinstance(w, (Fraction, int)):
        return Fraction(w)
    return None


def _weighted_charge(weights, exps: Sequence[int]):
    """``sum_j w_j * e_j`` exactly when all weights are rational."""
    exact = [_exact_weight(w) for w in weights]
    if all(x is not None for x in exact):
        return sum((x * e for x, e in zip(exact, exps)), Fraction(0))
    return math.fsum(float(w) * e for w, e in zip(weights, exps))


def _is_zero_charge(value, tol: float = 1e-12) -> bool:
    if isinstance(value, Fraction):
        return value == 0
    return abs(value) < tol


@dataclass(frozen=True)
class PolyPotential:
    """Real polynomial ``V(z, zbar) = sum_{a,b} c_ab z^a zbar^b`` on C^n.

    Coefficients may be complex provided ``c_ba == conj(c_ab)``, which is the
    condition for ``V`` to be real valued.
    """

    n: int
    monomials: Mapping[tuple[Exponent, Exponent], complex]
    asserted_bounded_below: bool = False
    elliptic_constants: tuple | None = None
    ir_constants: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("potential needs n >= 1")
        clean = {}
        for (a, b), c in dict(self.monomials).items():
            key = (_as_exponent(a, self.n), _as_exponent(b, self.n))
            c = complex(c)
            if c != 0:
                clean[key] = clean.get(key, 0) + c
        if not clean:
            raise ValueError("empty polynomial")
        for (a, b), c in clean.items():
            partner = clean.get((b, a), 0)
            if abs(partner - c.conjugate()) > 1e-12 * max(1.0, abs(c)):
                raise ValueError(f"potential is not real: c{a, b}={c}, c{b, a}={partner}")
        object.__setattr__(self, "monomials", clean)

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[Sequence[int], Sequence[int], complex]],
                   **flags) -> "PolyPotential":
        monos: dict = {}
        for a, b, c in terms:
            key = (tuple(a), tuple(b))
            monos[key] = monos.get(key, 0) + c
        return cls(n, monos, **flags)

    @classmethod
    def modulus_power(cls, n: int, power: int, coupling: float = 1.0) -> "PolyPotential":
        """``coupling * |z|^(2*power)`` with ``|z|^2 = sum_j |z_j|^2``."""
        monos: dict = {}
        for combo in _compositions(power, n):
            coeff = math.factorial(power)
            for k in combo:
                coeff //= math.factorial(k)
            monos[(combo, combo)] = coupling * coeff
        return cls(n, monos, asserted_bounded_below=coupling >= 0)

    @property
    def degree(self) -> int:
        return max(sum(a) + sum(b) for a, b in self.monomials)

    @property
    def is_real_coefficient(self) -> bool:
        return all(abs(c.imag) == 0 for c in self.monomials.values())

    def scaled(self, factor: float) -> "PolyPotential":
        return PolyPotential(self.n, {k: factor * c for k, c in self.monomials.items()},
                             asserted_bounded_below=self.asserted_bounded_below and factor >= 0,
                             elliptic_constants=self.elliptic_constants,
                             ir_constants=self.ir_constants)

    def __call__(self, z, zbar=None):
        """Evaluate on an array whose leading axis indexes components.

        ``zbar`` defaults to ``conj(z)``; pass it explicitly to treat ``z``
        and ``zbar`` as independent variables.  Returns the real part when
        ``zbar`` is omitted.
        """
        z = np.asarray(z)
        real_valued = zbar is None
        zb = np.conj(z) if zbar is None else np.asarray(zbar)
        if z.shape[0] != self.n:
            raise ValueError(f"expected leading axis of length {self.n}")
        maxdeg = max(max(max(a), max(b)) for a, b in self.monomials)
        zp = [_powers(z[j], maxdeg) for j in range(self.n)]
        zbp = [_powers(zb[j], maxdeg) for j in range(self.n)]
        total = np.zeros(z.shape[1:], dtype=complex)
        for (a, b), c in self.monomials.items():
            term = c
            for j in range(self.n):
                if a[j]:
                    term = term * zp[j][a[j]]
                if b[j]:
                    term = term * zbp[j][b[j]]
            total = total + term
        return total.real if real_valued else total

    def laplacian(self) -> dict:
        """Monomials of ``sum_j d^2 V / dz_j dzbar_j``."""
        out: dict = {}
        for (a, b), c in self.monomials.items():
            for j in range(self.n):
                if a[j] and b[j]:
                    na = a[:j] + (a[j] - 1,) + a[j + 1:]
                    nb = b[:j] + (b[j] - 1,) + b[j + 1:]
                    out[(na, nb)] = out.get((na, nb), 0) + c * a[j] * b[j]
        return {k: v for k, v in out.items() if v != 0}

    def to_dict(self) -> dict:
        def enc(c: complex):
            return c.real if c.imag == 0 else [c.real, c.imag]
        out = {"n": self.n,
               "monomials": [{"a": list(a), "b": list(b), "c": enc(c)}
                             for (a, b), c in sorted(self.monomials.items())],
               "asserted_bounded_below": self.asserted_bounded_below}
        if self.elliptic_constants is not None:
            out["elliptic_constants"] = list(self.elliptic_constants)
        if self.ir_constants is not None:
            out["ir_constants"] = list(self.ir_constants)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "PolyPotential":
        terms = [(t["a"], t["b"], _decode_coeff(t["c"])) for t in data["monomials"]]
        flags = {"asserted_bounded_below": bool(data.get("asserted_bounded_below", False))}
        if data.get("elliptic_constants") is not None:
            flags["elliptic_constants"] = tuple(data["elliptic_constants"])
        if data.get("ir_constants") is not None:
            flags["ir_constants"] = tuple(data["ir_constants"])
        return cls.from_terms(int(data["n"]), terms, **flags)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PolyPotential":
        return cls.from_dict(json.loads(text))


def _decode_coeff(c) -> complex:
    if isinstance(c, Number):
        return complex(c)
    re, im = c
    return complex(re, im)


def _powers(x: np.ndarray, maxdeg: int) -> list:
    out = [np.ones_like(x)]
    for _ in range(maxdeg):
        out.append(out[-1] * x)
    return out


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative ints summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class Superpotential:
    """Holomorphic polynomial ``W(z) = sum_a c_a z^a`` with twist weights."""

    n: int
    monomials: Mapping[Exponent, complex]
    weights: tuple = field(default=(1.0,))

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("superpotential needs n >= 1")
        if len(self.weights) != self.n:
            raise ValueError("one weight per component is required")
        clean = {}
        for a, c in dict(self.monomials).items():
            key = _as_exponent(a, self.n)
            if complex(c) != 0:
                clean[key] = clean.get(key, 0) + complex(c)
        if not clean:
            raise ValueError("empty polynomial")
        object.__setattr__(self, "monomials", clean)
        object.__setattr__(self, "weights", tuple(self.weights))

    def is_quasihomogeneous(self) -> bool:
        for a in self.monomials:
            charge = _weighted_charge(self.weights, a)
            one = Fraction(1) if isinstance(charge, Fraction) else 1.0
            if not _is_zero_charge(charge - one):
                return False
        return True

    def __call__(self, z):
        z = np.asarray(z)
        total = np.zeros(z.shape[1:], dtype=complex)
        for a, c in self.monomials.items():
            term = c
            for j, e in enumerate(a):
                if e:
                    term = term * z[j] ** e
            total = total + term
        return total

    def gradient(self) -> list[dict]:
        """Monomial maps of ``dW/dz_j`` for each j."""
        grads = []
        for j in range(self.n):
            g: dict = {}
            for a, c in self.monomials.items():
                if a[j]:
                    na = a[:j] + (a[j] - 1,) + a[j + 1:]
                    g[na] = g.get(na, 0) + c * a[j]
            grads.append(g)
        return grads

    def to_dict(self) -> dict:
        return {"n": self.n,
                "weights": [str(w) if isinstance(w, Fraction) else float(w) for w in self.weights],
                "monomials": [{"a": list(a), "c": c.real if c.imag == 0 else [c.real, c.imag]}
                              for a, c in sorted(self.monomials.items())]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Superpotential":
        weights = tuple(Fraction(w) if isinstance(w, str) else float(w) for w in data["weights"])
        monos = {tuple(t["a"]): _decode_coeff(t["c"]) for t in data["monomials"]}
        return cls(int(data["n"]), monos, weights)


def check_twist_invariance(V: PolyPotential, weights: Sequence) -> bool:
    """True iff every monomial has zero weighted charge ``sum_j w_j (a_j - b_j)``."""
    if len(weights) != V.n:
        raise ValueError("one weight per component is required")
    for a, b in V.monomials:
        diff = [x - y for x, y in zip(a, b)]
        if not _is_zero_charge(_weighted_charge(weights, diff)):
            return False
    return True


def grad_squared(W: Superpotential) -> PolyPotential:
    """Expand ``V = sum_j |dW/dz_j|^2`` into monomials."""
    monos: dict = {}
    for g in W.gradient():
        for a, ca in g.items():
            for b, cb in g.items():
                key = (a, b)
                monos[key] = monos.get(key, 0) + ca * cb.conjugate()
    return PolyPotential(W.n, monos, asserted_bounded_below=True)


@dataclass
class PotentialReport:
    twist_invariant: bool
    bounded_below_scan: bool
    allowed: bool
    elliptic: bool | None
    ir_regular: bool | None
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"twist_invariant": self.twist_invariant,
                "bounded_below_scan": self.bounded_below_scan,
                "allowed": self.allowed, "elliptic": self.elliptic,
                "ir_regular": self.ir_regular, "failures": self.failures}


def _scan_directions(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors in C^n: coordinate axes, a few diagonals, random draws."""
    dirs = [np.eye(n, dtype=complex)[j] for j in range(n)]
    dirs.append(np.ones(n, dtype=complex) / math.sqrt(n))
    raw = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    return np.vstack([np.array(dirs), raw])


def _top_degree_part(V: PolyPotential) -> PolyPotential | None:
    d = V.degree
    top = {k: c for k, c in V.monomials.items() if sum(k[0]) + sum(k[1]) == d}
    return PolyPotential(V.n, top) if top else None


def validate_potential(V: PolyPotential, weights: Sequence | None = None,
                       radii: Sequence[float] | None = None, n_directions: int = 256,
                       seed: int = 0) -> PotentialReport:
    """Check the allowed / elliptic / infrared-regular predicates numerically.

    Twist invariance is exact.  Boundedness below is accepted only when the
    user flag is set and the top-degree homogeneous part is nonnegative on
    every scanned direction.  Ellipticity and infrared regularity are
    sampled on rays when the corresponding constants are supplied.
    """
    weights = tuple(weights) if weights is not None else (1.0,) * V.n
    rng = np.random.default_rng(seed)
    dirs = _scan_directions(V.n, n_directions, rng)
    if radii is None:
        radii = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 141)])
    radii = np.asarray(radii, dtype=float)
    failures = []

    invariant = check_twist_invariance(V, weights)
    if not invariant:
        failures.append({"predicate": "twist_invariant", "witness": None})

    top = _top_degree_part(V)
    top_vals = top(dirs.T) if top is not None else np.zeros(len(dirs))
    scan_ok = bool(np.min(top_vals) >= -1e-12)
    if not scan_ok:
        i = int(np.argmin(top_vals))
        failures.append({"predicate": "bounded_below",
                         "witness": _encode_point(dirs[i] * radii[-1])})
    elif not V.asserted_bounded_below:
        failures.append({"predicate": "bounded_below", "witness": None,
                         "reason": "asserted_bounded_below flag not set"})
    allowed = invariant and scan_ok and V.asserted_bounded_below

    points = (dirs[:, None, :] * radii[None, :, None]).reshape(-1, V.n).T
    values = V(points)
    modsq = np.sum(np.abs(points) ** 2, axis=0)

    elliptic = None
    if V.elliptic_constants is not None:
        m1, m2 = V.elliptic_constants
        bad = modsq > m1 * (values + m2) * (1 + 1e-12)
        elliptic = not bool(np.any(bad))
        if not elliptic:
            i = int(np.argmax(bad))
            failures.append({"predicate": "elliptic", "witness": _encode_point(points[:, i])})

    ir_regular = None
    if V.ir_constants is not None:
        m1, m2 = V.ir_constants
        lap = V.laplacian()
        lap_vals = (np.abs(PolyPotential(V.n, _hermitize(lap))(points)) if lap
                    else np.zeros_like(values))
        bad = lap_vals > m1 * (values + m2) * (1 + 1e-12)
        ir_regular = not bool(np.any(bad))
        if not ir_regular:
            i = int(np.argmax(bad))
            failures.append({"predicate": "ir_regular", "witness": _encode_point(points[:, i])})

    return PotentialReport(invariant, scan_ok, allowed, elliptic, ir_regular, failures)


def _hermitize(monos: Mapping) -> dict:
    """Laplacians of real potentials are real; symmetrize rounding noise."""
    out = {}
    for (a, b), c in monos.items():
        partner = monos.get((b, a), 0)
        out[(a, b)] = 0.5 * (c + complex(partner).conjugate())
    return out


def _encode_point(z) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in np.ravel(z)]
