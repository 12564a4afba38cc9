"""Rician channels for the BS -> RIS -> UE links.

LOS parts are far-field array responses; NLOS parts are correlated
Rayleigh fading across the RIS elements, with the correlation given by the
local scattering model (Gaussian angular spread around the nominal
angles). Large-scale fading follows a 3 GHz distance-based path loss.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import GeometryConfig, SystemConfig

__all__ = [
    "ChannelRealization",
    "ula_response",
    "upa_response",
    "upa_indices",
    "spatial_correlation",
    "correlation_sqrt",
    "pathloss_db",
    "draw_channels",
    "draw_bs_ris",
    "draw_ue_link",
    "trial_rng",
    "export_channels",
    "load_channels",
]


@dataclass(frozen=True)
class ChannelRealization:
    """One channel drop.

    Attributes
    ----------
    H : (N, M) complex
        BS to RIS.
    g : (K, N) complex
        RIS to each UE, one row per user.
    F : (K, N, M) complex
        Cascades ``diag(g_k) H``.
    """

    H: np.ndarray
    g: np.ndarray
    F: np.ndarray

    @classmethod
    def from_links(cls, H, g) -> "ChannelRealization":
        H = np.asarray(H, dtype=complex)
        g = np.atleast_2d(np.asarray(g, dtype=complex))
        if g.shape[1] != H.shape[0]:
            raise ValueError("g and H disagree on the number of RIS elements")
        F = g[:, :, None] * H[None, :, :]
        return cls(H, g, F)

    @property
    def K(self) -> int:
        return self.g.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[0]

    @property
    def M(self) -> int:
        return self.H.shape[1]

    @property
    def G(self) -> np.ndarray:
        """Stacked ``[diag(g_1), ..., diag(g_K)]^T``, shape ``(K N, N)``."""
        return np.concatenate([np.diag(gk) for gk in self.g], axis=0)


def ula_response(M: int, spacing: float, angle: float) -> np.ndarray:
    m = np.arange(M)
    return np.exp(2j * np.pi * spacing * m * np.sin(angle))


def upa_indices(N_H: int, N_V: int):
    """Zero-based (horizontal, vertical) grid position of each element.

    Element ``n`` (1-based) sits at ``n_H = mod(n-1, N_H) + 1`` and
    ``n_V = ceil(n / N_H)``; the returned values are ``n_H - 1, n_V - 1``.
    """
    n = np.arange(N_H * N_V)
    return n % N_H, n // N_H


def upa_response(N_H: int, N_V: int, spacing_h: float, spacing_v: float, az: float, el: float) -> np.ndarray:
    nh, nv = upa_indices(N_H, N_V)
    phase = spacing_h * nh * np.sin(az) * np.cos(el) + spacing_v * nv * np.sin(el)
    return np.exp(2j * np.pi * phase)


@lru_cache(maxsize=64)
def _correlation_cached(N_H, N_V, dh_spacing, dv_spacing, az, el, std, order):
    if std == 0:
        u = upa_response(N_H, N_V, dh_spacing, dv_spacing, az, el)
        C = np.outer(u, u.conj())
    else:
        x, w = np.polynomial.hermite_e.hermegauss(order)
        w = w / w.sum()
        a = az + std * x  # azimuth nodes
        e = el + std * x  # elevation nodes
        # C only depends on index differences, so tabulate those
        dh = np.arange(-(N_H - 1), N_H)
        dv = np.arange(-(N_V - 1), N_V)
        sa_ce = np.sin(a)[:, None] * np.cos(e)[None, :]  # (az node, el node)
        se = np.sin(e)
        phase = (
            dh_spacing * dh[:, None, None, None] * sa_ce[None, None, :, :]
            + dv_spacing * dv[None, :, None, None] * se[None, None, None, :]
        )
        table = np.einsum("hvij,i,j->hv", np.exp(2j * np.pi * phase), w, w)
        nh, nv = upa_indices(N_H, N_V)
        C = table[(nh[:, None] - nh[None, :]) + N_H - 1, (nv[:, None] - nv[None, :]) + N_V - 1]
    C = 0.5 * (C + C.conj().T)
    C.setflags(write=False)
    return C


def spatial_correlation(geom: GeometryConfig, N_H: int, N_V: int, az: float, el: float,
                        order: int | None = None) -> np.ndarray:
    """Local-scattering correlation matrix across the RIS elements.

    Entry ``(n, n')`` is the expectation of the relative phase between the two
    elements when the azimuth and elevation of arrival deviate from
    ``(az, el)`` by independent Gaussian errors with standard deviation
    ``geom.angle_std``. The double expectation is evaluated with a tensor
    Gauss-Hermite rule of ``order`` nodes per angle.
    """
    order = geom.quadrature_order if order is None else order
    if order < 2:
        raise ValueError("quadrature order must be >= 2")
    if geom.angle_std < 0:
        raise ValueError("angle_std must be nonnegative")
    return _correlation_cached(
        int(N_H), int(N_V), float(geom.ris_spacing_h), float(geom.ris_spacing_v),
        float(az), float(el), float(geom.angle_std), int(order),
    )


def correlation_sqrt(C: np.ndarray, neg_tol: float = 1e-8) -> np.ndarray:
    """Hermitian square root ``C^{1/2}`` through an eigendecomposition.

    Eigenvalues in ``[-neg_tol, 0)`` are clamped to zero; anything more
    negative means ``C`` is not a covariance and raises.
    """
    lam, U = np.linalg.eigh(C)
    if lam.min() < -neg_tol:
        raise np.linalg.LinAlgError(f"correlation matrix has eigenvalue {lam.min():.3e}")
    lam = np.clip(lam, 0.0, None)
    return (U * np.sqrt(lam)) @ U.conj().T


def pathloss_db(d: float) -> float:
    """Channel gain in dB at distance ``d`` meters (3 GHz carrier)."""
    if not d > 0:
        raise ValueError("distance must be positive")
    return -37.5 - 22.0 * np.log10(d)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, trial)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial),))
    return np.random.Generator(np.random.Philox(ss))


def _crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician(los, C_sqrt, rho, kappa, los_only, rng):
    shape = los.shape
    if los_only:
        # still consume the draws so LOS-only runs keep the same UE drops
        _crandn(rng, shape)
        return np.sqrt(rho) * los
    z = _crandn(rng, shape)
    nlos = C_sqrt @ z
    return np.sqrt(rho) * (np.sqrt(kappa / (kappa + 1)) * los + np.sqrt(1 / (kappa + 1)) * nlos)


def draw_bs_ris(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """BS to RIS matrix ``H`` (N x M): Rician, NLOS columns correlated across the RIS."""
    geom = config.geometry
    r_bs = ula_response(config.M, geom.bs_spacing, geom.bs_aod)
    r_ris = upa_response(config.N_H, config.N_V, geom.ris_spacing_h, geom.ris_spacing_v,
                         geom.ris_aoa_az, geom.ris_aoa_el)
    C = spatial_correlation(geom, config.N_H, config.N_V, geom.ris_aoa_az, geom.ris_aoa_el)
    rho = 10.0 ** (pathloss_db(geom.bs_ris_distance) / 10.0)
    return _rician(np.outer(r_ris, r_bs), correlation_sqrt(C), rho, geom.rician_kappa, geom.los_only, rng)


def draw_ue_link(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """RIS to UE vector for one user at a random distance and direction."""
    geom = config.geometry
    N_H, N_V = config.N_H, config.N_V
    d = rng.uniform(*geom.ue_distance_range)
    az = rng.uniform(*geom.ue_az_range)
    el = rng.uniform(*geom.ue_el_range)
    los = upa_response(N_H, N_V, geom.ris_spacing_h, geom.ris_spacing_v, az, el)
    Ck = spatial_correlation(geom, N_H, N_V, az, el)
    rho = 10.0 ** (pathloss_db(d) / 10.0)
    return _rician(los, correlation_sqrt(Ck), rho, geom.rician_kappa, geom.los_only, rng)


def draw_channels(config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw ``H`` and every ``g_k`` for one trial.

    Draw order on ``rng``: BS-RIS NLOS matrix, then for each user its
    distance, azimuth, elevation and NLOS vector.
    """
    H = draw_bs_ris(config, rng)
    g = np.stack([draw_ue_link(config, rng) for _ in range(config.K)])
    return ChannelRealization.from_links(H, g)


def export_channels(ch: ChannelRealization, path: str | Path, fmt: str = "csv") -> None:
    """Dump ``H`` then ``g`` row-major with interleaved real/imaginary parts.

    ``fmt="bin"`` writes a 16-byte header (uint32 N, M, K, pad, little-endian)
    followed by float64 little-endian values; ``fmt="csv"`` writes one matrix
    row per line after a ``# <name> <rows> <cols>`` marker.
    """
    path = Path(path)
    if fmt == "bin":
        header = np.array([ch.N, ch.M, ch.K, 0], dtype="<u4").tobytes()
        body = np.concatenate([ch.H.ravel(), ch.g.ravel()]).astype("<c16").tobytes()
        path.write_bytes(header + body)
    elif fmt == "csv":
        lines = []
        for name, mat in (("H", ch.H), ("g", ch.g)):
            lines.append(f"# {name} {mat.shape[0]} {mat.shape[1]}")
            for row in mat:
                inter = np.column_stack([row.real, row.imag]).ravel()
                lines.append(",".join(repr(float(v)) for v in inter))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_channels(path: str | Path, fmt: str = "csv") -> ChannelRealization:
    path = Path(path)
    if fmt == "bin":
        raw = path.read_bytes()
        N, M, K, _ = np.frombuffer(raw[:16], dtype="<u4")
        vals = np.frombuffer(raw[16:], dtype="<c16")
        H = vals[: N * M].reshape(N, M)
        g = vals[N * M:].reshape(K, N)
        return ChannelRealization.from_links(H.copy(), g.copy())
    blocks = {}
    name = None
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            name = line.split()[1]
            blocks[name] = []
        elif line:
            v = np.array([float(t) for t in line.split(",")])
            blocks[name].append(v[0::2] + 1j * v[1::2])
    return ChannelRealization.from_links(np.array(blocks["H"]), np.array(blocks["g"]))
