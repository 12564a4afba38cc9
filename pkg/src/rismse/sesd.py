"""Schnorr-Euchner sphere decoding over a finite complex alphabet.

Solves the mixed-integer least-squares problem

    minimize ||c - R x||^2  over  x in alphabet^n

for upper-triangular ``R`` by depth-first search from the last layer to
the first. At each layer the candidate symbols are visited in order of
increasing distance to the layer's unconstrained center, so the first
symbol that violates the radius ends the layer. Symbols are complex and
enumerated as-is, which covers both the fronthaul product alphabet and
the RIS phase alphabet (not a Cartesian product of real sets).

Ties between equal-objective points are broken deterministically: the
point whose alphabet-index vector is lexicographically smallest, compared
from the last layer down, wins. ``brute_force_mils`` uses the same rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "MilsProblem",
    "MilsSolution",
    "sesd_solve",
    "brute_force_mils",
    "babai_point",
    "residual_norm",
]

# relative slack used both for pruning and for tie detection
TIE_RTOL = 1e-12
BRUTE_FORCE_LIMIT = 10**7


@dataclass(frozen=True)
class MilsProblem:
    R: np.ndarray
    c: np.ndarray
    alphabet: np.ndarray
    incumbent: np.ndarray | None = None

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=complex))
        c = np.atleast_1d(np.asarray(self.c, dtype=complex))
        alphabet = np.atleast_1d(np.asarray(self.alphabet, dtype=complex))
        n = c.size
        if R.shape != (n, n):
            raise ValueError(f"R must be {n}x{n}, got {R.shape}")
        if np.any(np.tril(R, -1) != 0):
            raise ValueError("R must be upper triangular")
        if np.any(np.abs(np.diag(R)) == 0):
            raise ValueError("R has a zero diagonal entry")
        if alphabet.size == 0:
            raise ValueError("empty alphabet")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "alphabet", alphabet)
        if self.incumbent is not None:
            inc = np.asarray(self.incumbent, dtype=complex).ravel()
            if inc.size != n:
                raise ValueError("incumbent has the wrong length")
            _alphabet_indices(inc, alphabet)
            object.__setattr__(self, "incumbent", inc)

    @classmethod
    def trusted(cls, R, c, alphabet, incumbent=None) -> "MilsProblem":
        """Build without validation; for inner loops whose inputs are known good."""
        obj = object.__new__(cls)
        for name, val in (("R", R), ("c", c), ("alphabet", alphabet), ("incumbent", incumbent)):
            object.__setattr__(obj, name, val)
        return obj

    @property
    def n(self) -> int:
        return self.c.size


@dataclass(frozen=True)
class MilsSolution:
    argmin: np.ndarray
    objective: float
    nodes_visited: int
    exhausted: bool
    indices: np.ndarray


def _alphabet_indices(x, alphabet):
    hits = x[:, None] == alphabet[None, :]
    if not np.all(hits.any(axis=1)):
        raise ValueError("vector has entries outside the alphabet")
    return hits.argmax(axis=1)


def residual_norm(R, c, x) -> float:
    r = np.asarray(c) - np.asarray(R) @ np.asarray(x)
    return float(np.vdot(r, r).real)


@numba.njit(cache=True)
def _key_less(a, b):
    # lexicographic, last layer most significant
    for i in range(a.size - 1, -1, -1):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


@numba.njit(cache=True)
def _order_layer(alphabet, s, se_order, out):
    q = alphabet.size
    if not se_order:
        for a in range(q):
            out[a] = a
        return
    dist = np.empty(q)
    for a in range(q):
        d = alphabet[a] - s
        dist[a] = d.real * d.real + d.imag * d.imag
    # stable insertion sort; alphabets are small
    for a in range(q):
        out[a] = a
    for a in range(1, q):
        v = out[a]
        dv = dist[v]
        b = a - 1
        while b >= 0 and dist[out[b]] > dv:
            out[b + 1] = out[b]
            b -= 1
        out[b + 1] = v


@numba.njit(cache=True)
def _sesd_kernel(R, c, alphabet, inc_idx, inc_obj, budget, se_order, rtol):
    n = c.size
    q = alphabet.size
    best_idx = inc_idx.copy()
    best = inc_obj
    order = np.zeros((n, q), dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    partial = np.zeros(n + 1)  # partial[i]: cost of layers i..n-1
    center = np.zeros(n, dtype=np.complex128)
    # res[i, r] = c_r - sum_{j > i} R_rj x_j for r <= i
    res = np.zeros((n, n), dtype=np.complex128)
    cur = np.zeros(n, dtype=np.int64)
    rr = np.empty(n)
    for i in range(n):
        rr[i] = R[i, i].real ** 2 + R[i, i].imag ** 2
    nodes = 0
    exhausted = True

    i = n - 1
    for r in range(n):
        res[i, r] = c[r]
    center[i] = c[i] / R[i, i]
    _order_layer(alphabet, center[i], se_order, order[i])
    pos[i] = 0

    while True:
        if pos[i] >= q:
            # layer exhausted, climb
            i += 1
            if i >= n:
                break
            continue
        if nodes >= budget:
            exhausted = False
            break
        a = order[i, pos[i]]
        pos[i] += 1
        xa = alphabet[a]
        d = xa - center[i]
        p = partial[i + 1] + rr[i] * (d.real * d.real + d.imag * d.imag)
        nodes += 1
        if p > best + rtol * best:
            if se_order:
                # every later candidate at this layer is farther away
                pos[i] = q
            continue
        cur[i] = a
        partial[i] = p
        if i == 0:
            if p < best - rtol * best:
                best = p
                best_idx[:] = cur
            elif _key_less(cur, best_idx):
                if p < best:
                    best = p
                best_idx[:] = cur
            continue
        # descend
        for r in range(i):
            res[i - 1, r] = res[i, r] - R[r, i] * xa
        i -= 1
        center[i] = res[i, i] / R[i, i]
        _order_layer(alphabet, center[i], se_order, order[i])
        pos[i] = 0

    return best_idx, best, nodes, exhausted


def sesd_solve(problem: MilsProblem, node_budget: int | None = None, ordering: str = "se") -> MilsSolution:
    """Exact finite-alphabet least squares by Schnorr-Euchner enumeration.

    Parameters
    ----------
    problem : MilsProblem
        Triangular factor, target and alphabet. If ``problem.incumbent`` is
        given, its objective seeds the search radius.
    node_budget : int, optional
        Maximum number of tree nodes to visit. When hit, the best point found
        so far is returned with ``exhausted=False``.
    ordering : {"se", "natural"}
        Symbol order per layer. ``"natural"`` visits symbols in alphabet
        order and is only useful for complexity comparisons.

    Returns
    -------
    MilsSolution
    """
    if node_budget is not None and node_budget <= 0:
        raise ValueError("node budget must be positive")
    if ordering not in ("se", "natural"):
        raise ValueError(f"unknown ordering {ordering!r}")
    R, c, alphabet = problem.R, problem.c, problem.alphabet
    n = problem.n
    if problem.incumbent is not None:
        inc_idx = _alphabet_indices(problem.incumbent, alphabet).astype(np.int64)
        inc_obj = residual_norm(R, c, problem.incumbent)
    else:
        # every real index vector beats this sentinel on the key
        inc_idx = np.full(n, alphabet.size, dtype=np.int64)
        inc_obj = np.inf
    budget = np.iinfo(np.int64).max if node_budget is None else int(node_budget)
    idx, _, nodes, exhausted = _sesd_kernel(
        R, c, alphabet, inc_idx, inc_obj, budget, ordering == "se", TIE_RTOL
    )
    if np.any(idx >= alphabet.size):
        # budget ran out before any leaf and no incumbent: fall back to Babai
        x = babai_point(problem)
        idx = _alphabet_indices(x, alphabet)
    x = alphabet[idx]
    return MilsSolution(x, residual_norm(R, c, x), int(nodes), bool(exhausted), idx)


def babai_point(problem: MilsProblem) -> np.ndarray:
    """Greedy successive-interference-cancellation point (nearest symbol per layer)."""
    R, c, alphabet = problem.R, problem.c, problem.alphabet
    n = problem.n
    x = np.zeros(n, dtype=complex)
    for i in range(n - 1, -1, -1):
        s = (c[i] - R[i, i + 1:] @ x[i + 1:]) / R[i, i]
        x[i] = alphabet[np.argmin(np.abs(alphabet - s))]
    return x


def brute_force_mils(problem: MilsProblem, chunk: int = 1 << 16) -> MilsSolution:
    """Exhaustive search over ``alphabet**n``; verification oracle for ``sesd_solve``."""
    R, c, alphabet = problem.R, problem.c, problem.alphabet
    n, q = problem.n, alphabet.size
    total = q**n
    if total > BRUTE_FORCE_LIMIT:
        raise ValueError(f"search space {q}^{n} exceeds the brute-force limit")
    # enumeration order == tie-break order: last layer is the most significant digit
    best_obj = np.inf
    best_idx = None
    nodes = 0
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.stack(np.unravel_index(flat, (q,) * n), axis=1)[:, ::-1]
        X = alphabet[idx]
        res = c[None, :] - X @ R.T
        obj = np.einsum("ij,ij->i", res.conj(), res).real
        nodes += len(obj)
        m = obj.min()
        if best_idx is None or m < best_obj - TIE_RTOL * best_obj:
            best_obj = m
            first = np.flatnonzero(obj <= m + TIE_RTOL * m)[0]
            best_idx = idx[first]
    x = alphabet[best_idx]
    return MilsSolution(x, residual_norm(R, c, x), nodes, True, best_idx)
