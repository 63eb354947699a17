"""Normal ordering relative to a Gaussian functional with equal-time constants c_j.

The ordering map is ``exp(-Delta_c)`` with ``Delta_c = sum_j c_j d_j dbar_j``.
On a single component

    :zbar^r z^s: = sum_k (-1)^k C(r,k) C(s,k) k! c^k zbar^(r-k) z^(s-k).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .twist import PolyPotential, _compositions

MAX_DEGREE = 20


def _check_degree(a, b):
    if sum(a) + sum(b) > MAX_DEGREE:
        raise ValueError(f"degree {sum(a) + sum(b)} exceeds the supported maximum {MAX_DEGREE}")


def ordering_coefficient(r: int, s: int, k: int) -> int:
    """Exact integer ``(-1)^k C(r,k) C(s,k) k!``."""
    return (-1) ** k * math.comb(r, k) * math.comb(s, k) * math.factorial(k)


@dataclass(frozen=True)
class OrderedPolynomial:
    """Polynomial ``sum c_ab z^a zbar^b`` produced by the ordering map.

    The ordering constants that were used are kept alongside the
    coefficients so the map can be inverted.
    """

    n: int
    monomials: Mapping
    ordering_constants: tuple

    def __call__(self, z, zbar=None):
        z = np.asarray(z)
        zb = np.conj(z) if zbar is None else np.asarray(zbar)
        total = np.zeros(z.shape[1:], dtype=complex)
        for (a, b), c in self.monomials.items():
            term = c * np.ones(z.shape[1:], dtype=complex)
            for j in range(self.n):
                if a[j]:
                    term = term * z[j] ** a[j]
                if b[j]:
                    term = term * zb[j] ** b[j]
            total = total + term
        return total

    def coefficient(self, a, b) -> complex:
        return self.monomials.get((tuple(a), tuple(b)), 0)

    def as_potential(self) -> PolyPotential:
        return PolyPotential(self.n, dict(self.monomials))


def _order_monomials(n: int, monomials: Mapping, c: Sequence) -> dict:
    out: dict = {}
    for (a, b), coeff in monomials.items():
        _check_degree(a, b)
        # tensor product of the single-component expansions
        terms = [((), (), complex(coeff))]
        for j in range(n):
            new = []
            top = min(a[j], b[j])
            for pa, pb, val in terms:
                for k in range(top + 1):
                    factor = ordering_coefficient(a[j], b[j], k)
                    new.append((pa + (a[j] - k,), pb + (b[j] - k,), val * factor * c[j] ** k))
            terms = new
        for pa, pb, val in terms:
            out[(pa, pb)] = out.get((pa, pb), 0) + val
    return {k: v for k, v in out.items() if v != 0}


def normal_order(P, c: Sequence) -> OrderedPolynomial:
    """Apply ``exp(-Delta_c)`` coefficientwise.

    ``P`` may be a :class:`PolyPotential`, an :class:`OrderedPolynomial`, or a
    single monomial given as ``(a, b)`` exponent tuples (coefficient 1).
    For ``n = 1`` the exponents may be plain integers ``(r, s)`` meaning
    ``z^r zbar^s``.
    """
    c = tuple(complex(x) if isinstance(x, complex) else float(x) for x in np.atleast_1d(c))
    if isinstance(P, (PolyPotential, OrderedPolynomial)):
        n, monos = P.n, P.monomials
    else:
        a, b = P
        a = (a,) if isinstance(a, (int, np.integer)) else tuple(a)
        b = (b,) if isinstance(b, (int, np.integer)) else tuple(b)
        n, monos = len(a), {(a, b): 1.0}
    if len(c) != n:
        raise ValueError("one ordering constant per component is required")
    if not all(np.isfinite(x) for x in c):
        raise ValueError("ordering constants must be finite")
    return OrderedPolynomial(n, _order_monomials(n, monos, c), c)


def unorder(P: OrderedPolynomial) -> OrderedPolynomial:
    """Inverse map ``exp(+Delta_c)`` using the stored constants."""
    back = _order_monomials(P.n, P.monomials, [-x for x in P.ordering_constants])
    return OrderedPolynomial(P.n, back, tuple(-x for x in P.ordering_constants))


def ordered_modulus_power(n: int, k: int, c: Sequence) -> OrderedPolynomial:
    """``:|z|^{2k}:`` with ``|z|^2 = sum_j |z_j|^2``."""
    if k == 0:
        return OrderedPolynomial(n, {((0,) * n, (0,) * n): 1.0}, tuple(c))
    return normal_order(PolyPotential.modulus_power(n, k), c)


def ordered_two_point(r: int, s: int, rp: int, sp: int, Cts: complex, Cst: complex) -> complex:
    """``< :zbar^r z^s:(t) :zbar^r' z^s':(t') >`` for one component.

    ``Cts = C(t - t')`` and ``Cst = C(t' - t)``.  Nonzero only when
    ``r = s'`` and ``s = r'``, where it equals ``r! s! Cts^r Cst^s``.
    """
    if r != sp or s != rp:
        return 0j
    return complex(math.factorial(r) * math.factorial(s) * Cts ** r * Cst ** s)


def ordered_diagonal_two_point_multicomponent(k: int, kp: int, C: Sequence[complex]) -> complex:
    """``< :|z(t)|^{2k}: :|z(s)|^{2k'}: >`` for independent components.

    Equals ``delta_{kk'} (k!)^2 sum_{|kappa|=k} prod_j |C_j(t-s)|^{2 kappa_j}``.
    """
    if k != kp:
        return 0.0
    mod2 = [abs(x) ** 2 for x in C]
    total = 0.0
    for kappa in _compositions(k, len(mod2)):
        total += math.prod(m ** e for m, e in zip(mod2, kappa))
    return float(math.factorial(k) ** 2 * total)
