"""Discrete precoding under a total power budget.

For a fixed multiplier ``mu`` the power-penalized sum-MSE splits into one
problem per user,

    minimize  w^H (D^H D + mu I) w - 2 Re(d_k^T w)   over w in P^M,

which after a Cholesky factorization ``D^H D + mu I = R^H R`` is a
finite-alphabet least-squares problem in ``R``. ``mu`` is then bisected
until the precoders fit the power budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .alphabets import QuantizationAlphabet, quantize
from .sesd import MilsProblem, sesd_solve

__all__ = [
    "PrecodingInstance",
    "PrecodingResult",
    "build_D",
    "solve_subproblem_continuous",
    "solve_subproblem_discrete",
    "optimize_precoding",
    "precoding_objective",
]

MU_CAP = 2.0**60


def build_D(beta, theta, G, H) -> np.ndarray:
    """Effective channel ``(diag(beta) kron theta^T) G H``, shape ``(K, M)``.

    Row ``k`` equals ``beta_k theta^T diag(g_k) H``.
    """
    beta = np.asarray(beta, dtype=complex).ravel()
    theta = np.asarray(theta, dtype=complex).ravel()
    G = np.asarray(G)
    H = np.asarray(H)
    K, N = beta.size, theta.size
    if G.shape != (K * N, N) or H.shape[0] != N:
        raise ValueError(f"dimension mismatch: beta {K}, theta {N}, G {G.shape}, H {H.shape}")
    return np.kron(np.diag(beta), theta[None, :]) @ G @ H


def precoding_objective(D, W) -> float:
    """Sum over users of ``w_k^H D^H D w_k - 2 Re(d_k^T w_k)`` (sum-MSE up to constants)."""
    DW = D @ W
    return float(np.sum(np.abs(DW) ** 2) - 2.0 * np.real(np.trace(DW)))


def _ridge_floor(D) -> float:
    # smallest multiplier treated as "mu = 0": keeps the Gram matrix factorable
    return 1e-12 * max(np.real(np.trace(D.conj().T @ D)) / D.shape[1], np.finfo(float).tiny)


def solve_subproblem_continuous(D, d_k, mu: float) -> np.ndarray:
    """Unquantized minimizer ``(D^H D + mu I)^{-1} d_k^*``.

    At ``mu = 0`` with a rank-deficient ``D`` a tiny ridge is added instead.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    D = np.asarray(D)
    V = D.conj().T @ D + max(mu, _ridge_floor(D) if mu == 0 else 0.0) * np.eye(D.shape[1])
    try:
        return cho_solve(cho_factor(V), np.conj(d_k))
    except np.linalg.LinAlgError:
        V += _ridge_floor(D) * np.eye(D.shape[1])
        return cho_solve(cho_factor(V), np.conj(d_k))


def solve_subproblem_discrete(D, d_k, mu: float, alphabet: QuantizationAlphabet,
                              node_budget: int | None = None):
    """Exact minimizer of the per-user Lagrangian over the fronthaul alphabet.

    Returns
    -------
    w : ndarray
        Precoder with every entry in the complex alphabet.
    objective : float
        ``w^H V w - 2 Re(d_k^T w)`` at the returned point.
    exhausted : bool
        False only if the node budget stopped the search early.
    """
    D = np.asarray(D)
    M = D.shape[1]
    V = D.conj().T @ D + mu * np.eye(M)
    try:
        R = np.linalg.cholesky(V).conj().T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("D^H D + mu I is not positive definite; increase mu") from exc
    c = solve_triangular(R, np.conj(d_k), trans="C", lower=False)
    w_hat = solve_subproblem_continuous(D, d_k, mu)
    problem = MilsProblem(R, c, alphabet.points, incumbent=quantize(w_hat, alphabet))
    sol = sesd_solve(problem, node_budget)
    w = sol.argmin
    obj = sol.objective - float(np.vdot(c, c).real)
    return w, obj, sol.exhausted


@dataclass(frozen=True)
class PrecodingInstance:
    D: np.ndarray
    P: float
    alphabet: QuantizationAlphabet
    power_tol: float | None = None  # absolute; default 1e-3 P
    mu_max: float = 1.0
    discrete: bool = True  # False: quantize the continuous solution instead
    node_budget: int | None = None

    @property
    def d_rows(self) -> np.ndarray:
        return self.D

    @property
    def eps(self) -> float:
        return 1e-3 * self.P if self.power_tol is None else self.power_tol


@dataclass
class PrecodingResult:
    W: np.ndarray
    mu: float
    power: float
    per_user_objectives: np.ndarray  # per-user Lagrangian terms at ``mu``
    exhausted_flags: np.ndarray
    objective: float  # sum-MSE part, see ``precoding_objective``
    iterates: list = field(default_factory=list, repr=False)
    near_equality: bool = False


def _solve_at(inst: PrecodingInstance, mu: float):
    # one factorization serves every user at this multiplier
    D = inst.D
    K, M = D.shape
    V = D.conj().T @ D + mu * np.eye(M)
    R = np.linalg.cholesky(V).conj().T
    Cmat = solve_triangular(R, D.conj().T, trans="C", lower=False)  # column k: c_k
    W_hat = solve_triangular(R, Cmat, lower=False)
    W0 = quantize(W_hat, inst.alphabet)
    objs = np.empty(K)
    flags = np.ones(K, dtype=bool)
    if inst.discrete:
        W = np.empty((M, K), dtype=complex)
        pts = inst.alphabet.points
        for k in range(K):
            c = np.ascontiguousarray(Cmat[:, k])
            sol = sesd_solve(MilsProblem.trusted(R, c, pts, W0[:, k]), inst.node_budget)
            W[:, k] = sol.argmin
            objs[k] = sol.objective - float(np.vdot(c, c).real)
            flags[k] = sol.exhausted
    else:
        W = W0
        VW = V @ W
        for k in range(K):
            objs[k] = float(np.real(np.vdot(W[:, k], VW[:, k])) - 2 * np.real(D[k] @ W[:, k]))
    return W, objs, flags


def optimize_precoding(instance: PrecodingInstance, max_steps: int = 200) -> PrecodingResult:
    """Bisect the power multiplier until the precoders meet the budget.

    The search brackets ``mu`` between an infeasible (too much power) and a
    feasible value, doubling the upper end until it is feasible. It stops
    once the feasible power is within ``eps`` of ``P`` or the bracket has
    collapsed. Because the alphabet is discrete, power is a step function of
    ``mu`` and near-equality may be out of reach; the returned precoder is the
    feasible iterate with the lowest sum-MSE objective (ties: larger power).
    """
    inst = instance
    P, eps = inst.P, inst.eps
    iterates = []

    def evaluate(mu):
        W, objs, flags = _solve_at(inst, mu)
        power = float(np.sum(np.abs(W) ** 2))
        rec = {
            "mu": mu, "power": power, "W": W, "objs": objs, "flags": flags,
            "feasible": power <= P,
            "objective": precoding_objective(inst.D, W),
        }
        iterates.append(rec)
        return rec

    mu0 = _ridge_floor(inst.D)
    first = evaluate(mu0)
    if not first["feasible"]:
        lo = mu0
        hi = max(inst.mu_max, mu0)
        rec = evaluate(hi)
        while not rec["feasible"]:
            lo = hi
            hi *= 2.0
            if hi > MU_CAP:
                raise RuntimeError("no feasible multiplier found; alphabet scale too large for the power budget")
            rec = evaluate(hi)
        best_feasible = rec
        for _ in range(max_steps):
            if P - best_feasible["power"] <= eps or hi - lo <= 1e-9 * hi:
                break
            mid = 0.5 * (lo + hi)
            rec = evaluate(mid)
            if rec["feasible"]:
                hi = mid
                if rec["power"] > best_feasible["power"]:
                    best_feasible = rec
            else:
                lo = mid

    feasible = [r for r in iterates if r["feasible"]]
    chosen = min(feasible, key=lambda r: (r["objective"], -r["power"]))
    return PrecodingResult(
        W=chosen["W"],
        mu=chosen["mu"],
        power=chosen["power"],
        per_user_objectives=chosen["objs"],
        exhausted_flags=chosen["flags"],
        objective=chosen["objective"],
        iterates=iterates,
        near_equality=abs(chosen["power"] - P) <= eps,
    )
