"""Exhaustive reference solvers and random test instances.

Used by the ``selftest`` command and the test suite to check the sphere
decoders against plain enumeration on problems small enough to enumerate.
"""
from __future__ import annotations

import itertools

import numpy as np

from .alphabets import PhaseAlphabet, QuantizationAlphabet
from .ris import RisInstance, build_ris_instance, ris_objective
from .sesd import MilsProblem

__all__ = [
    "random_mils",
    "random_precoding_case",
    "random_ris_instance",
    "brute_force_precoding_user",
    "brute_force_ris",
]


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_mils(rng: np.random.Generator, n: int, alphabet, unit_diagonal: bool = False) -> MilsProblem:
    """Well-conditioned upper-triangular instance with a random target."""
    R = np.triu(_crandn(rng, n, n)) * 0.5
    d = rng.uniform(0.5, 1.5, n) * np.exp(2j * np.pi * rng.uniform(size=n))
    if unit_diagonal:
        d = d / np.abs(d)
    R[np.diag_indices(n)] = d
    alphabet = np.asarray(alphabet, dtype=complex)
    c = R @ alphabet[rng.integers(0, alphabet.size, n)] + 0.7 * _crandn(rng, n)
    return MilsProblem(R, c, alphabet)


def random_precoding_case(rng: np.random.Generator, K: int = 3, M: int = 4):
    """Effective channel ``D`` (K x M) and a positive multiplier."""
    D = _crandn(rng, K, M)
    mu = float(rng.uniform(0.05, 2.0))
    return D, mu


def random_ris_instance(rng: np.random.Generator, alphabet: PhaseAlphabet, N: int = 10, K: int = 3,
                        M: int = 4, alpha: float = 1.0) -> RisInstance:
    F = _crandn(rng, K, N, M) / np.sqrt(N)
    W = _crandn(rng, M, K)
    beta = _crandn(rng, K)
    return build_ris_instance(W, F, alphabet, beta=beta, alpha=alpha)


def brute_force_precoding_user(D, k: int, mu: float, alphabet: QuantizationAlphabet):
    """Minimize ``w^H (D^H D + mu I) w - 2 Re(d_k^T w)`` over every ``w`` in the alphabet."""
    D = np.asarray(D)
    M = D.shape[1]
    pts = alphabet.points
    V = D.conj().T @ D + mu * np.eye(M)
    # product order puts the last entry in the most significant digit
    idx = np.array(list(itertools.product(range(pts.size), repeat=M)))[:, ::-1]
    X = pts[idx]
    obj = np.einsum("ij,jk,ik->i", X.conj(), V, X).real - 2 * np.real(X @ D[k])
    best = int(np.argmin(obj))
    return X[best], float(obj[best])


def brute_force_ris(instance: RisInstance):
    """Minimize ``theta^H A theta - 2 Re(a^H theta)`` over all of ``F^N``."""
    coeffs = instance.alphabet.coefficients
    N = instance.N
    if coeffs.size**N > 1 << 22:
        raise ValueError("search space too large to enumerate")
    idx = np.array(list(itertools.product(range(coeffs.size), repeat=N)))[:, ::-1]
    X = coeffs[idx]
    obj = np.einsum("ij,jk,ik->i", X.conj(), instance.A, X).real - 2 * np.real(X @ instance.a.conj())
    best = int(np.argmin(obj))
    return X[best], ris_objective(instance.A, instance.a, X[best])
