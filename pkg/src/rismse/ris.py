"""RIS configuration for fixed precoders and receiver gains.

With ``W`` and ``beta`` fixed the sum-MSE is, up to a constant, the
quadratic form

    f(theta) = theta^H A theta - 2 Re(a^H theta)

over unit-modulus ``theta``. Three solvers are provided: element-wise
alternating optimization on the continuous torus, rounding that solution
to the phase alphabet, and exact enumeration over the alphabet with the
regularized Cholesky factor of ``A + alpha I``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import solve_triangular

from .alphabets import PhaseAlphabet
from .sesd import MilsProblem, sesd_solve

__all__ = [
    "RisInstance",
    "build_ris_instance",
    "ris_objective",
    "ao_continuous",
    "nearest_phase",
    "optimize_ris_sesd",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RisInstance:
    A: np.ndarray
    a: np.ndarray
    alphabet: PhaseAlphabet
    alpha: float = 1.0

    @property
    def N(self) -> int:
        return self.a.size

    def objective(self, theta) -> float:
        return ris_objective(self.A, self.a, theta)


def ris_objective(A, a, theta) -> float:
    theta = np.asarray(theta)
    return float(np.real(np.vdot(theta, A @ theta)) - 2.0 * np.real(np.vdot(a, theta)))


def build_ris_instance(W, F_list, alphabet: PhaseAlphabet, beta=None, alpha: float = 1.0) -> RisInstance:
    """Assemble ``A`` and ``a`` from the precoders and cascaded channels.

    ``A = sum_k |beta_k|^2 F_k^* W^* W^T F_k^T`` and
    ``a = sum_k beta_k^* F_k^* w_k^*``. With ``beta=None`` all gains are one,
    which is the gain-free form of the RIS problem.
    """
    W = np.asarray(W, dtype=complex)
    F = np.asarray(F_list, dtype=complex)
    K, N, M = F.shape
    if W.shape != (M, K):
        raise ValueError(f"W must be {M}x{K}, got {W.shape}")
    beta = np.ones(K, dtype=complex) if beta is None else np.asarray(beta, dtype=complex)
    if beta.shape != (K,):
        raise ValueError("beta must have one entry per user")
    # T[k] = F_k W, columns are the per-stream cascades seen by user k
    T = F @ W
    A = np.einsum("k,kni,kmi->nm", np.abs(beta) ** 2, T.conj(), T)
    a = np.einsum("k,kn->n", beta.conj(), T[np.arange(K), :, np.arange(K)].conj())
    A = 0.5 * (A + A.conj().T)
    return RisInstance(A, a, alphabet, alpha)


@numba.njit(cache=True)
def _ao_kernel(A, a, theta, tol, max_sweeps):
    N = theta.size
    # s[n] = sum_m conj(theta_m) A_mn, kept current across single-element updates
    s = np.zeros(N, dtype=np.complex128)
    for m in range(N):
        tm = np.conj(theta[m])
        for n in range(N):
            s[n] += tm * A[m, n]
    prev = _objective_nb(A, a, theta)
    degenerate = 0
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        for n in range(N):
            z = s[n] - np.conj(theta[n]) * A[n, n] - np.conj(a[n])
            if z.real == 0.0 and z.imag == 0.0:
                degenerate += 1
                continue
            new = -np.exp(-1j * math.atan2(z.imag, z.real))
            step = np.conj(new) - np.conj(theta[n])
            for m in range(N):
                s[m] += step * A[n, m]
            theta[n] = new
        cur = _objective_nb(A, a, theta)
        done = prev - cur < tol
        prev = cur
        if done:
            break
    return theta, sweeps, degenerate


@numba.njit(cache=True)
def _objective_nb(A, a, theta):
    acc = 0.0
    N = theta.size
    for n in range(N):
        row = 0j
        for m in range(N):
            row += A[n, m] * theta[m]
        acc += (np.conj(theta[n]) * row).real - 2.0 * (np.conj(a[n]) * theta[n]).real
    return acc


def ao_continuous(instance: RisInstance, theta_init, tol: float = 1e-6, max_sweeps: int = 1000):
    """Cyclic per-element minimization over continuous phases.

    Each element is set to ``-exp(-j arg(sum_{m != n} theta_m^* A_mn - a_n^*))``,
    the exact minimizer with the others held fixed. Sweeps run in ascending
    element order until one sweep lowers the objective by less than ``tol``.
    Elements whose argument vanishes keep their current value.
    """
    theta = np.array(theta_init, dtype=complex)
    if not np.allclose(np.abs(theta), 1.0, atol=1e-12):
        raise ValueError("initial configuration must be unit modulus")
    A = np.ascontiguousarray(instance.A, dtype=complex)
    a = np.ascontiguousarray(instance.a, dtype=complex)
    theta, sweeps, degenerate = _ao_kernel(A, a, theta, float(tol), int(max_sweeps))
    if degenerate:
        log.debug("ao_continuous: %d degenerate element updates skipped", degenerate)
    return theta


def nearest_phase(theta_cont, alphabet: PhaseAlphabet) -> np.ndarray:
    """Round each coefficient to the closest alphabet point (ties: lowest index)."""
    theta_cont = np.asarray(theta_cont, dtype=complex)
    d = np.abs(theta_cont[..., None] - alphabet.coefficients)
    return alphabet.coefficients[np.argmin(d, axis=-1)]


def _regularized_factor(instance: RisInstance):
    N = instance.N
    try:
        B = np.linalg.cholesky(instance.A + instance.alpha * np.eye(N)).conj().T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("A + alpha I is not positive definite; A is corrupted") from exc
    b = solve_triangular(B, instance.a, trans="C", lower=False)
    return B, b


def optimize_ris_sesd(instance: RisInstance, theta_init=None, node_budget: int | None = None,
                      tol: float = 1e-6, incumbent=None):
    """Exact discrete RIS configuration via sphere decoding.

    Minimizes ``||b - B theta||^2`` over the phase alphabet, where
    ``A + alpha I = B^H B``; adding ``alpha ||theta||^2 = alpha N`` does not
    move the minimizer on unit-modulus vectors. The search radius starts at
    the rounded continuous solution (alternating optimization warm-started
    from ``theta_init``) unless ``incumbent`` is given.

    Returns
    -------
    theta : ndarray
        Configuration drawn from the phase alphabet.
    objective : float
        ``theta^H A theta - 2 Re(a^H theta)`` at ``theta``.
    exhausted : bool
        Whether the search finished within ``node_budget``.
    """
    if instance.alpha <= 0:
        raise ValueError("alpha must be positive")
    B, b = _regularized_factor(instance)
    if incumbent is None:
        if theta_init is None:
            theta_init = np.ones(instance.N, dtype=complex)
        incumbent = nearest_phase(ao_continuous(instance, theta_init, tol), instance.alphabet)
    sol = sesd_solve(MilsProblem(B, b, instance.alphabet.coefficients, incumbent=incumbent), node_budget)
    theta = sol.argmin
    return theta, ris_objective(instance.A, instance.a, theta), sol.exhausted
