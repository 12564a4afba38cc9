"""Block coordinate descent over precoders, RIS phases and receiver gains."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .alphabets import PhaseAlphabet, QuantizationAlphabet, design_uniform_labels, phase_alphabet, quantize
from .channel import ChannelRealization
from .config import BenchmarkScheme, SystemConfig
from .precoding import PrecodingInstance, build_D, optimize_precoding
from .ris import ao_continuous, build_ris_instance, nearest_phase, optimize_ris_sesd

__all__ = [
    "SolverState",
    "effective_gains",
    "receiver_gain",
    "receiver_gains",
    "mse_user",
    "mse_all",
    "sinr_user",
    "sinr_all",
    "sum_rate",
    "rzf_init",
    "alphabets_for",
    "run_bcd",
]

log = logging.getLogger(__name__)


def effective_gains(theta, F, W) -> np.ndarray:
    """``E[k, i] = theta^T F_k w_i``, the gain from stream ``i`` to user ``k``."""
    F = np.asarray(F)
    if F.ndim == 2:
        F = F[None]
    return np.einsum("n,knm,mi->ki", np.asarray(theta), F, np.asarray(W))


def receiver_gain(theta, F_k, W, N0: float, k: int) -> complex:
    """MMSE receiver gain of user ``k``: conj(desired) / (received power + N0)."""
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    h = np.asarray(theta) @ np.asarray(F_k) @ np.asarray(W)
    return complex(np.conj(h[k]) / (np.sum(np.abs(h) ** 2) + N0))


def receiver_gains(theta, F, W, N0: float) -> np.ndarray:
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    E = effective_gains(theta, F, W)
    return np.conj(np.diag(E)) / (np.sum(np.abs(E) ** 2, axis=1) + N0)


def mse_user(theta, F_k, W, beta_k, N0: float, k: int) -> float:
    h = np.asarray(theta) @ np.asarray(F_k) @ np.asarray(W)
    e = abs(beta_k) ** 2 * (np.sum(np.abs(h) ** 2) + N0) - 2.0 * np.real(beta_k * h[k]) + 1.0
    return float(e)


def mse_all(theta, F, W, beta, N0: float) -> np.ndarray:
    E = effective_gains(theta, F, W)
    beta = np.asarray(beta)
    return np.abs(beta) ** 2 * (np.sum(np.abs(E) ** 2, axis=1) + N0) - 2.0 * np.real(beta * np.diag(E)) + 1.0


def sinr_user(theta, F_k, W, N0: float, k: int) -> float:
    h = np.asarray(theta) @ np.asarray(F_k) @ np.asarray(W)
    p = np.abs(h) ** 2
    return float(p[k] / (np.sum(p) - p[k] + N0))


def sinr_all(theta, F, W, N0: float) -> np.ndarray:
    p = np.abs(effective_gains(theta, F, W)) ** 2
    desired = np.diag(p)
    return desired / (np.sum(p, axis=1) - desired + N0)


def sum_rate(theta, F, W, N0: float) -> float:
    """Sum of ``log2(1 + SINR_k)`` in bit/s/Hz."""
    return float(np.sum(np.log2(1.0 + sinr_all(theta, F, W, N0))))


def rzf_init(G, H, theta0, P: float, N0: float, K: int) -> np.ndarray:
    """Regularized zero-forcing precoder scaled to total power ``P``."""
    theta0 = np.asarray(theta0)
    Ht = np.kron(np.eye(K), theta0[None, :]) @ G @ H
    gram = Ht @ Ht.conj().T + (K * N0 / P) * np.eye(K)
    W = Ht.conj().T @ np.linalg.solve(gram, np.eye(K))
    return W * np.sqrt(P / np.sum(np.abs(W) ** 2))


def alphabets_for(config: SystemConfig) -> tuple[QuantizationAlphabet, PhaseAlphabet]:
    return design_uniform_labels(config.L, config.label_sigma), phase_alphabet(config.b)


def _quantize_within_budget(W, qa: QuantizationAlphabet, P: float) -> np.ndarray:
    # rounding can push the power above P; shrink the input until it fits
    scale = 1.0
    for _ in range(200):
        Wq = quantize(scale * W, qa)
        if np.sum(np.abs(Wq) ** 2) <= P:
            return Wq
        scale *= 0.9
    raise RuntimeError("quantized precoder cannot meet the power budget with this alphabet")


@dataclass
class SolverState:
    W: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    iteration: int = 0
    converged: bool = False
    trace: list = field(default_factory=list)
    scheme: str = ""
    anomalies: list = field(default_factory=list)

    @property
    def sum_mse(self) -> float:
        return self.trace[-1]["sum_mse"]

    @property
    def sum_rate(self) -> float:
        return self.trace[-1]["sum_rate"]

    def to_dict(self) -> dict:
        def cplx(x):
            x = np.asarray(x)
            return {"re": x.real.tolist(), "im": x.imag.tolist()}

        return {
            "scheme": self.scheme,
            "iterations": self.iteration,
            "converged": self.converged,
            "W": cplx(self.W),
            "theta": cplx(self.theta),
            "beta": cplx(self.beta),
            "trace": self.trace,
            "anomalies": self.anomalies,
        }


def _record(l, theta, F, W, beta, N0, **extra):
    e = mse_all(theta, F, W, beta, N0)
    rec = {
        "iteration": l,
        "sum_mse": float(e.sum()),
        "sum_rate": sum_rate(theta, F, W, N0),
        "per_user_mse": e.tolist(),
        "per_user_sinr": sinr_all(theta, F, W, N0).tolist(),
    }
    rec.update(extra)
    return rec


def run_bcd(config: SystemConfig, channels: ChannelRealization, scheme: BenchmarkScheme | str,
            rng: np.random.Generator | None = None, theta0=None, alphabets=None,
            max_iters: int | None = None) -> SolverState:
    """Alternate precoding, RIS and receiver-gain updates until the sum MSE settles.

    Parameters
    ----------
    config : SystemConfig
    channels : ChannelRealization
    scheme : BenchmarkScheme
        Selects exact (SESD) or quantize-the-continuous-solution updates for
        the precoding and RIS blocks.
    rng : numpy.random.Generator, optional
        Source of the random initial RIS configuration. Ignored if
        ``theta0`` is given.
    theta0 : array_like, optional
        Initial configuration, entries must lie in the phase alphabet.
    alphabets : (QuantizationAlphabet, PhaseAlphabet), optional
        Precomputed alphabets; designed from ``config`` otherwise.

    Returns
    -------
    SolverState
        Final iterate plus a per-iteration trace. Each trace entry also
        stores the sum MSE after the precoding and RIS sub-steps.
    """
    scheme = BenchmarkScheme.parse(scheme) if isinstance(scheme, str) else scheme
    qa, pa = alphabets if alphabets is not None else alphabets_for(config)
    P, N0, K = config.P, config.N0, config.K
    F, H = channels.F, channels.H
    G = channels.G
    max_iters = config.max_iters if max_iters is None else max_iters

    if theta0 is None:
        if rng is None:
            raise ValueError("need rng or theta0 for the initial RIS configuration")
        theta0 = pa.coefficients[rng.integers(0, pa.size, size=channels.N)]
    theta = np.asarray(theta0, dtype=complex).copy()

    W = _quantize_within_budget(rzf_init(G, H, theta, P, N0, K), qa, P)
    beta = receiver_gains(theta, F, W, N0)
    state = SolverState(W, theta, beta, scheme=scheme.value)
    state.trace.append(_record(0, theta, F, W, beta, N0))
    prev = state.trace[0]["sum_mse"]

    for l in range(1, max_iters + 1):
        D = build_D(beta, theta, G, H)
        prec = optimize_precoding(PrecodingInstance(
            D, P, qa, power_tol=config.eps_power * P, discrete=scheme.sesd_precoding,
        ))
        W = prec.W
        mse_prec = float(mse_all(theta, F, W, beta, N0).sum())

        inst = build_ris_instance(W, F, pa, beta=beta, alpha=config.alpha)
        if scheme.sesd_ris:
            theta, _, ris_exhausted = optimize_ris_sesd(
                inst, theta_init=theta, node_budget=config.sesd_node_budget, tol=config.ao_tol,
            )
        else:
            theta = nearest_phase(ao_continuous(inst, theta, config.ao_tol), pa)
            ris_exhausted = None
        mse_ris = float(mse_all(theta, F, W, beta, N0).sum())

        beta = receiver_gains(theta, F, W, N0)
        rec = _record(
            l, theta, F, W, beta, N0,
            mse_after_precoding=mse_prec,
            mse_after_ris=mse_ris,
            mu=prec.mu,
            power=prec.power,
            precoding_exhausted=bool(np.all(prec.exhausted_flags)),
            ris_exhausted=ris_exhausted,
        )
        state.trace.append(rec)
        state.W, state.theta, state.beta, state.iteration = W, theta, beta, l
        e = rec["sum_mse"]
        if e > prev + 1e-6:
            # blame the sub-step that went up; an RIS search cut short by its
            # node budget is not exact, and neither is the Lagrangian precoder
            causes = []
            if mse_prec > prev + 1e-9:
                causes.append("precoding")
            if mse_ris > mse_prec + 1e-9:
                causes.append("ris_budget" if ris_exhausted is False else "ris")
            state.anomalies.append({"iteration": l, "increase": e - prev, "causes": causes})
            log.info("sum MSE rose by %.3e at iteration %d (%s, %s)", e - prev, l, scheme.value, causes)
        delta = abs(e - prev)
        prev = e
        if delta <= config.eps_outer:
            state.converged = True
            break
    return state
