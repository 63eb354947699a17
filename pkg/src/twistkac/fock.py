"""Truncated Fock-space oracle for twisted traces.

Each component j carries two registers ``(j,+)`` and ``(j,-)`` with at most
``n_cut`` quanta.  With ``z_j = (a_{j+}^* + a_{j-})/sqrt(2m)`` the free
Hamiltonian is ``H0 = m sum (N_+ + N_-)`` and the twist generator is
``J = sum_j w_j (N_{j+} - N_{j-})``.

Truncated ``z_j`` raises ``J`` by exactly ``w_j``, so any twist-invariant
potential commutes with ``J`` as a matrix.  Hamiltonians are therefore
diagonalized one ``J`` sector at a time, and ``U(theta)^* = exp(-i theta J)``
is a scalar on each sector.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .twist import PolyPotential, TwistSpec, check_twist_invariance

DIM_BUDGET = 20000
SECTOR_DECIMALS = 9


def _ladder(n_cut: int) -> sp.csr_matrix:
    """Annihilation operator on ``n_cut + 1`` levels."""
    return sp.diags(np.sqrt(np.arange(1, n_cut + 1, dtype=float)), 1, format="csr")


def _embed(op, slot: int, n_slots: int, size: int):
    eye = sp.identity(size, format="csr")
    mats = [op if k == slot else eye for k in range(n_slots)]
    return reduce(lambda x, y: sp.kron(x, y, format="csr"), mats)


@dataclass
class FockRep:
    """Ladder operators and free quantities on the truncated occupation basis.

    Registers are ordered ``(0,+), (0,-), (1,+), (1,-), ...``.
    """

    spec: TwistSpec
    n_cut: int
    a_plus: list
    a_minus: list
    z: list
    zbar: list
    h0: np.ndarray
    J: np.ndarray
    occupations: np.ndarray
    _ops: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    def ladder(self, name: str, j: int = 0):
        """Operator by name: ``a-``, ``a+``, ``a+*``, ``a-*``, ``z``, ``zbar``."""
        key = (name, j)
        if key not in self._ops:
            table = {"a-": lambda: self.a_minus[j], "a+": lambda: self.a_plus[j],
                     "a-*": lambda: self.a_minus[j].T.tocsr(), "a+*": lambda: self.a_plus[j].T.tocsr(),
                     "z": lambda: self.z[j], "zbar": lambda: self.zbar[j]}
            self._ops[key] = table[name]()
        return self._ops[key]

    def charge_shift(self, name: str, j: int = 0) -> float:
        """Change of ``J`` produced by the named operator."""
        w = float(self.spec.weights[j])
        return {"a-": w, "a+*": w, "z": w, "a+": -w, "a-*": -w, "zbar": -w}[name]

    def twist_operator(self, theta: float) -> np.ndarray:
        """Diagonal of ``U(theta) = exp(i theta J)``."""
        return np.exp(1j * theta * self.J)

    def interior_mask(self, margin: int) -> np.ndarray:
        """States with every occupation at most ``n_cut - margin``."""
        return np.all(self.occupations <= self.n_cut - margin, axis=1)


def build_fock(spec: TwistSpec, n_cut: int, budget: int = DIM_BUDGET) -> FockRep:
    if spec.m <= 0:
        raise ValueError("the Fock oracle needs m > 0")
    if n_cut < 1:
        raise ValueError("n_cut must be at least 1")
    size = n_cut + 1
    slots = 2 * spec.n
    dim = size ** slots
    if dim > budget:
        raise ValueError(f"dimension {dim} exceeds budget {budget}")
    a = _ladder(n_cut)
    a_plus = [_embed(a, 2 * j, slots, size) for j in range(spec.n)]
    a_minus = [_embed(a, 2 * j + 1, slots, size) for j in range(spec.n)]
    norm = 1.0 / math.sqrt(2 * spec.m)
    z = [((ap.T + am) * norm).tocsr() for ap, am in zip(a_plus, a_minus)]
    zbar = [zz.conj().T.tocsr() for zz in z]
    occ = np.array(np.unravel_index(np.arange(dim), (size,) * slots)).T
    h0 = spec.m * occ.sum(axis=1).astype(float)
    w = np.array([float(x) for x in spec.weights])
    J = (occ[:, 0::2] - occ[:, 1::2]) @ w
    return FockRep(spec, n_cut, a_plus, a_minus, z, zbar, h0, J, occ)


def _weyl_power(z, zbar, a: int, b: int, cache: dict):
    """Sum over all orderings of ``a`` factors ``z`` and ``b`` factors ``zbar``."""
    key = (a, b)
    if key in cache:
        return cache[key]
    if a == 0 and b == 0:
        out = sp.identity(z.shape[0], format="csr", dtype=complex)
    else:
        out = sp.csr_matrix(z.shape, dtype=complex)
        if a:
            out = out + z @ _weyl_power(z, zbar, a - 1, b, cache)
        if b:
            out = out + zbar @ _weyl_power(z, zbar, a, b - 1, cache)
    cache[key] = out.tocsr()
    return cache[key]


def potential_matrix(rep: FockRep, V: PolyPotential) -> sp.csr_matrix:
    """Matrix of ``V`` with each component's monomial Weyl symmetrized."""
    if V.n != rep.n:
        raise ValueError("potential and Fock space disagree on the component count")
    caches = [dict() for _ in range(rep.n)]
    total = sp.csr_matrix((rep.dim, rep.dim), dtype=complex)
    for (a, b), c in V.monomials.items():
        term = None
        for j in range(rep.n):
            if a[j] == 0 and b[j] == 0:
                continue
            sym = _weyl_power(rep.z[j], rep.zbar[j], a[j], b[j], caches[j]) / math.comb(a[j] + b[j], a[j])
            term = sym if term is None else term @ sym
        if term is None:
            term = sp.identity(rep.dim, format="csr", dtype=complex)
        total = total + c * term
    total = total.tocsr()
    total.eliminate_zeros()
    return total


@dataclass
class Sector:
    key: float
    index: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray | None  # None means the occupation basis is already diagonal


@dataclass
class Hamiltonian:
    """``H = H0 + V`` with a per-sector eigendecomposition."""

    rep: FockRep
    matrix: sp.csr_matrix
    potential: PolyPotential | None
    invariant: bool = True
    sectors: dict = field(default_factory=dict)
    _blocks: dict = field(default_factory=dict, repr=False)

    @property
    def e_min(self) -> float:
        return min(float(s.energies.min()) for s in self.sectors.values())

    def operator_block(self, op_key, op, src: float, dst: float) -> np.ndarray:
        """``op`` from sector ``src`` to ``dst`` in the eigenbases."""
        key = (op_key, src, dst)
        if key not in self._blocks:
            a, b = self.sectors[src], self.sectors[dst]
            blk = op[b.index][:, a.index]
            blk = blk.toarray() if sp.issparse(blk) else np.asarray(blk)
            if a.vectors is not None:
                blk = blk @ a.vectors
            if b.vectors is not None:
                blk = b.vectors.conj().T @ blk
            self._blocks[key] = blk
        return self._blocks[key]


def _sector_key(x: float) -> float:
    return round(float(x), SECTOR_DECIMALS) + 0.0


def _split_sectors(J: np.ndarray) -> dict:
    keys = np.round(J, SECTOR_DECIMALS) + 0.0
    order = np.argsort(keys, kind="stable")
    out = {}
    for k in np.unique(keys):
        out[float(k)] = order[keys[order] == k]
    return out


def assemble_hamiltonian(rep: FockRep, V: PolyPotential | None = None) -> Hamiltonian:
    """Build ``H0 + V`` and diagonalize it sector by sector.

    A potential that is not twist invariant triggers a warning with the norm
    of ``[V, J]`` and is diagonalized as a single block.
    """
    h0 = sp.diags(rep.h0.astype(complex), format="csr")
    if V is None:
        H = Hamiltonian(rep, h0, None)
        for key, idx in _split_sectors(rep.J).items():
            H.sectors[key] = Sector(key, idx, rep.h0[idx], None)
        return H
    vmat = potential_matrix(rep, V)
    matrix = (h0 + vmat).tocsr()
    invariant = check_twist_invariance(V, rep.spec.weights)
    if not invariant:
        Jd = sp.diags(rep.J, format="csr")
        comm = vmat @ Jd - Jd @ vmat
        norm = float(np.sqrt((abs(comm.data) ** 2).sum())) if comm.nnz else 0.0
        warnings.warn(f"potential is not twist invariant; ||[V, J]||_F = {norm:.3e}",
                      RuntimeWarning, stacklevel=2)
    H = Hamiltonian(rep, matrix, V, invariant)
    groups = _split_sectors(rep.J) if invariant else {0.0: np.arange(rep.dim)}
    for key, idx in groups.items():
        block = matrix[idx][:, idx].toarray()
        block = 0.5 * (block + block.conj().T)
        evals, evecs = la.eigh(block)
        H.sectors[key] = Sector(key, idx, evals, evecs)
    return H


def _as_hamiltonian(rep: FockRep, H) -> Hamiltonian:
    if isinstance(H, Hamiltonian):
        return H
    if H is None:
        return assemble_hamiltonian(rep)
    raise TypeError("expected a Hamiltonian built by assemble_hamiltonian")


def _sector_twist(H: Hamiltonian, sec: Sector, theta: float):
    """``U(theta)^*`` on a sector: a scalar, or a matrix for the fallback block."""
    if H.invariant:
        return np.exp(-1j * theta * sec.key)
    u = np.exp(-1j * theta * H.rep.J[sec.index])
    return sec.vectors.conj().T @ (u[:, None] * sec.vectors)


def _log_trace_scale(H: Hamiltonian, beta: float) -> float:
    return -beta * H.e_min


def twisted_trace(rep: FockRep, H, theta: float, beta: float, log_scale: bool = False):
    """``Tr(U(theta)^* e^{-beta H})``.

    With ``log_scale=True`` returns ``(value * e^{beta E_min}, -beta E_min)``.
    """
    H = _as_hamiltonian(rep, H)
    e0 = H.e_min
    total = 0j
    for sec in H.sectors.values():
        w = np.exp(-beta * (sec.energies - e0))
        u = _sector_twist(H, sec, theta)
        total += complex(u * w.sum()) if np.isscalar(u) else complex(np.sum(np.diag(u) * w))
    if log_scale:
        return total, -beta * e0
    return total * math.exp(-beta * e0)


@dataclass(frozen=True)
class TimeOrderedRequest:
    """Operators ``(tag, time, component)`` with tag ``"z"`` or ``"zbar"``."""

    ops: tuple

    def __post_init__(self):
        clean = []
        for item in self.ops:
            tag, t = item[0], float(item[1])
            j = int(item[2]) if len(item) > 2 else 0
            if tag not in ("z", "zbar"):
                raise ValueError(f"unknown operator tag {tag!r}")
            clean.append((tag, t, j))
        object.__setattr__(self, "ops", tuple(clean))

    @classmethod
    def from_moment(cls, req) -> "TimeOrderedRequest":
        ops = [("zbar", t, c) for t, c in zip(req.conj_times, req.conj_comps)]
        ops += [("z", s, c) for s, c in zip(req.plain_times, req.plain_comps)]
        return cls(tuple(ops))


def _ordered(ops) -> list:
    """Earliest time first; ties keep the listed order."""
    return [op for _, op in sorted(enumerate(ops), key=lambda p: (p[1][1], p[0]))]


def _named_product_trace(H: Hamiltonian, ops: Sequence[tuple], theta: float, beta: float) -> complex:
    """``Tr(e^{-(beta-t_1)H} A_1 e^{-(t_1-t_2)H} A_2 ... A_k e^{-t_k H} U^*)`` times ``e^{beta E_min}``.

    ``ops`` lists ``(name, time, component)`` with non-increasing times.
    """
    rep = H.rep
    e0 = H.e_min
    total = 0j
    for key, sec in H.sectors.items():
        M = None
        cur = key
        prev_t = 0.0
        for name, t, j in reversed(ops):
            scale = np.exp(-(t - prev_t) * (H.sectors[cur].energies - e0))
            M = np.diag(scale) if M is None else scale[:, None] * M
            nxt = _sector_key(cur + rep.charge_shift(name, j)) if H.invariant else cur
            if nxt not in H.sectors:
                M = None
                break
            M = H.operator_block((name, j), rep.ladder(name, j), cur, nxt) @ M
            cur = nxt
            prev_t = t
        else:
            if cur != key:
                continue
            scale = np.exp(-(beta - prev_t) * (sec.energies - e0))
            M = np.diag(scale) if M is None else scale[:, None] * M
            u = _sector_twist(H, sec, theta)
            total += complex(u * np.trace(M)) if np.isscalar(u) else complex(np.trace(M @ u))
    return total


def twisted_expectation(rep: FockRep, H, req, theta: float, beta: float) -> complex:
    """Normalized twisted trace of the time-ordered product in ``req``.

    With ``A(t) = e^{-tH} A e^{tH}`` the product is ordered with earlier
    times to the left, giving
    ``Tr(U^* e^{-t_1 H} A_1 e^{-(t_2-t_1)H} A_2 ... A_k e^{-(beta-t_k)H}) / Z``.
    Operators at equal times keep the order in which they are listed.
    """
    H = _as_hamiltonian(rep, H)
    if not isinstance(req, TimeOrderedRequest):
        req = TimeOrderedRequest.from_moment(req)
    for _, t, _ in req.ops:
        if t < -1e-12 or t > beta * (1 + 1e-12):
            raise ValueError(f"time {t} outside [0, beta]")
    # the trace walker takes times measured from the right end of the product
    ops = [(name, beta - t, j) for name, t, j in _ordered(req.ops)]
    num = _named_product_trace(H, ops, theta, beta)
    den = _named_product_trace(H, [], theta, beta)
    return num / den


HOLONOMY_S = ("a-", "a+", "a+*", "a-*")


def holonomy_factor(spec: TwistSpec, name: str, j: int = 0) -> complex:
    g = complex(spec.gammas[j])
    return {"a-": g, "a+": g.conjugate(), "a+*": 1 / g.conjugate(), "a-*": 1 / g}[name]


def _word_matrix(rep: FockRep, word: Sequence) -> sp.csr_matrix:
    out = sp.identity(rep.dim, format="csr", dtype=complex)
    for item in word:
        name, j = (item, 0) if isinstance(item, str) else item
        out = out @ rep.ladder(name, j)
    return out.tocsr()


def _free_gibbs(rep: FockRep, theta: float, beta: float) -> np.ndarray:
    """Diagonal of ``e^{-beta H0} U^*`` normalized to unit trace."""
    rho = np.exp(-beta * rep.h0) * np.exp(-1j * theta * rep.J)
    return rho / rho.sum()


def free_expectation(rep: FockRep, X, theta: float, beta: float) -> complex:
    rho = _free_gibbs(rep, theta, beta)
    return complex(np.dot(rho, X.diagonal()))


def holonomy_residual(rep: FockRep, S: str, word: Sequence, theta: float | None = None,
                      beta: float | None = None, j: int = 0) -> dict:
    """``<S T> - <[S, T]>/(1 - s)`` for the free twisted state.

    ``S`` is one of ``a-, a+, a+*, a-*`` on component ``j`` with holonomy
    factor ``s`` in ``{gamma, conj(gamma), 1/conj(gamma), 1/gamma}``.
    The adjoint factors follow from ``S e^{-beta H} U^* = s e^{-beta H} U^* S``
    applied to ``a+*`` and ``a-*``: moving a creator for the ``+`` mode picks
    up the inverse of the ``a+`` factor.
    Returns the residual together with the scale of the terms it compares.
    """
    spec = rep.spec
    theta = spec.theta if theta is None else theta
    beta = spec.beta if beta is None else beta
    local = spec.replace(theta=theta, beta=beta)
    s = holonomy_factor(local, S, j)
    if abs(1 - s) < 1e-12:
        raise ValueError("holonomy factor s = 1: singular twist")
    Smat = rep.ladder(S, j)
    T = _word_matrix(rep, word)
    st = free_expectation(rep, Smat @ T, theta, beta)
    comm = free_expectation(rep, Smat @ T - T @ Smat, theta, beta)
    res = st - comm / (1 - s)
    scale = max(1.0, abs(st), abs(comm / (1 - s)))
    return {"residual": res, "scale": scale, "s": s, "st": st}


def trotter_trace(rep: FockRep, V: PolyPotential | None, theta: float, beta: float, N: int) -> complex:
    """``Tr(U^* T_N^N)`` with ``T_N = e^{-beta H0/2N} e^{-beta V/N} e^{-beta H0/2N}``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if V is None:
        return twisted_trace(rep, None, theta, beta)
    vmat = potential_matrix(rep, V)
    groups = _split_sectors(rep.J) if check_twist_invariance(V, rep.spec.weights) \
        else {0.0: np.arange(rep.dim)}
    total = 0j
    logs = []
    parts = []
    for key, idx in groups.items():
        vb = vmat[idx][:, idx].toarray()
        vb = 0.5 * (vb + vb.conj().T)
        ev, evec = la.eigh(vb)
        half = np.exp(-beta * rep.h0[idx] / (2 * N))
        ev_v = (evec * np.exp(-beta * ev / N)) @ evec.conj().T
        step = half[:, None] * ev_v * half[None, :]
        lam, vec = la.eigh(0.5 * (step + step.conj().T))
        lam = np.clip(lam, 1e-300, None)
        if len(groups) == 1 and not check_twist_invariance(V, rep.spec.weights):
            u = np.exp(-1j * theta * rep.J[idx])
            loglam = N * np.log(lam)
            shift = loglam.max()
            powered = (vec * np.exp(loglam - shift)) @ vec.conj().T
            return complex(np.sum(u * np.diag(powered))) * math.exp(shift)
        loglam = N * np.log(lam)
        logs.append(loglam.max())
        parts.append((np.exp(-1j * theta * key), loglam))
    shift = max(logs)
    for u, loglam in parts:
        total += u * np.exp(loglam - shift).sum()
    return total * math.exp(shift)


def commutator_interior_norm(rep: FockRep, H: Hamiltonian, theta: float, margin: int) -> float:
    """Norm of ``[H, U(theta)]`` restricted to states away from the cutoff edge."""
    u = rep.twist_operator(theta)
    M = H.matrix
    comm = M.multiply(u[None, :]) - M.multiply(u[:, None])
    mask = rep.interior_mask(margin)
    sub = sp.csr_matrix(comm)[mask][:, mask]
    return float(np.sqrt((abs(sub.data) ** 2).sum())) if sub.nnz else 0.0


def oracle_trace_report(spec: TwistSpec, V: PolyPotential | None, n_cut: int,
                        tol: float = 1e-8, budget: int = DIM_BUDGET) -> dict:
    """Twisted trace at ``n_cut`` with the doubling acceptance test."""
    def value(nc):
        rep = build_fock(spec, nc, budget)
        return twisted_trace(rep, assemble_hamiltonian(rep, V), spec.theta, spec.beta)

    base = value(n_cut)
    try:
        doubled = value(2 * n_cut)
        converged = abs(doubled - base) < tol * abs(doubled)
    except ValueError:
        converged = False
    return {"trace_re": base.real, "trace_im": base.imag, "n_cut": n_cut, "converged": bool(converged)}
