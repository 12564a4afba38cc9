"""Fronthaul quantization labels and discrete RIS phase sets.

The fronthaul quantizer is a symmetric, zero-free uniform scalar quantizer
applied separately to the real and imaginary parts of every precoder
entry. Its step is chosen to minimize the mean squared error for a
zero-mean Gaussian input.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import roots_legendre

__all__ = [
    "QuantizationAlphabet",
    "PhaseAlphabet",
    "gaussian_distortion",
    "design_uniform_labels",
    "quantize",
    "phase_alphabet",
]

_GL_NODES, _GL_WEIGHTS = roots_legendre(64)
# the outermost cell is integrated out to this many standard deviations
_TAIL_SPAN = 12.0


@dataclass(frozen=True)
class QuantizationAlphabet:
    """Real label set and the complex product alphabet built from it.

    Parameters
    ----------
    labels : array_like
        ``L`` strictly increasing, zero-symmetric, uniformly spaced reals.
    scale : float
        Per-real-dimension standard deviation the labels were designed for.
    """

    labels: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=float)
        if labels.ndim != 1 or labels.size < 2 or labels.size % 2:
            raise ValueError("need an even number (>= 2) of labels")
        diffs = np.diff(labels)
        if np.any(diffs <= 0):
            raise ValueError("labels must be strictly increasing")
        if not np.allclose(labels, -labels[::-1], rtol=0, atol=1e-12 * np.abs(labels).max()):
            raise ValueError("labels must be symmetric about zero")
        if not np.allclose(diffs, diffs[0], rtol=1e-9, atol=0):
            raise ValueError("labels must be uniformly spaced")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def L(self) -> int:
        return self.labels.size

    @property
    def step(self) -> float:
        return float(self.labels[1] - self.labels[0])

    @cached_property
    def points(self) -> np.ndarray:
        """Complex alphabet ``{l_R + j l_I}``; the real part varies fastest."""
        re, im = np.meshgrid(self.labels, self.labels, indexing="xy")
        pts = (re + 1j * im).ravel()
        pts.setflags(write=False)
        return pts

    @cached_property
    def _boundaries(self) -> np.ndarray:
        return 0.5 * (self.labels[:-1] + self.labels[1:])

    def scaled(self, factor: float) -> "QuantizationAlphabet":
        return QuantizationAlphabet(self.labels * factor, self.scale * factor)

    def to_dict(self) -> dict:
        return {"labels": self.labels.tolist(), "scale": float(self.scale)}


@dataclass(frozen=True)
class PhaseAlphabet:
    """The ``2**bits`` unit-modulus reflection coefficients of a b-bit RIS element."""

    bits: int
    coefficients: np.ndarray

    @property
    def size(self) -> int:
        return self.coefficients.size

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
        }


def _cell_distortion(lo, hi, label, sigma):
    # sum_i int_{lo_i}^{hi_i} (x - label_i)^2 N(x; 0, sigma^2) dx, Gauss-Legendre per cell
    lo = np.asarray(lo, dtype=float)[:, None]
    hi = np.asarray(hi, dtype=float)[:, None]
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo) + half * _GL_NODES[None, :]
    pdf = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
    vals = (x - np.asarray(label, dtype=float)[:, None]) ** 2 * pdf
    return float(np.sum(half[:, 0] * (vals @ _GL_WEIGHTS)))


def gaussian_distortion(step: float, L: int, sigma: float = 1.0) -> float:
    """Mean squared error of the ``L``-level uniform quantizer with the given step.

    The input is Gaussian with zero mean and standard deviation ``sigma``.
    Reconstruction levels sit at ``+-(2i+1) step/2`` and decision thresholds
    at integer multiples of ``step``.
    """
    half = L // 2
    k = np.arange(half)
    lo = k * step
    hi = np.append(k[1:] * step, (half - 1) * step + _TAIL_SPAN * sigma)
    label = (2 * k + 1) * step / 2
    # both halves of the real line contribute equally
    return 2.0 * _cell_distortion(lo, hi, label, sigma)


def design_uniform_labels(L: int, sigma: float = 1.0, xtol: float = 1e-8) -> QuantizationAlphabet:
    """Distortion-optimal symmetric uniform quantizer for a Gaussian source.

    Parameters
    ----------
    L : int
        Number of levels, even and at least 2.
    sigma : float
        Standard deviation of the source (per real dimension).
    xtol : float
        Absolute tolerance on the optimal step, relative to ``sigma``.

    Returns
    -------
    QuantizationAlphabet
        Labels ``{+-(2i+1) step/2 : i = 0 .. L/2-1}``.
    """
    if int(L) != L or L < 2 or L % 2:
        raise ValueError(f"L must be an even integer >= 2, got {L!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    L = int(L)
    # solve on the unit-variance source; the optimum scales linearly with sigma
    res = minimize_scalar(
        lambda s: gaussian_distortion(s, L, 1.0),
        bounds=(1e-6, 4.0),
        method="bounded",
        options={"xatol": xtol},
    )
    step = float(res.x) * sigma
    half = np.arange(L // 2)
    pos = (2 * half + 1) * step / 2
    labels = np.concatenate([-pos[::-1], pos])
    return QuantizationAlphabet(labels, float(sigma))


def _nearest_label(x: np.ndarray, alphabet: QuantizationAlphabet) -> np.ndarray:
    b = alphabet._boundaries
    # exact ties go to the smaller-magnitude label, and to the negative one at zero
    idx = np.where(
        x >= 0,
        np.searchsorted(b, x, side="left"),
        np.searchsorted(b, x, side="right"),
    )
    return alphabet.labels[idx]


def quantize(x, alphabet: QuantizationAlphabet):
    """Map each complex entry to the nearest point of the complex alphabet.

    Real and imaginary parts are rounded independently to the nearest label.
    Works elementwise on scalars and arrays; output entries are bit-exact
    copies of alphabet labels.
    """
    arr = np.asarray(x, dtype=complex)
    out = _nearest_label(arr.real, alphabet) + 1j * _nearest_label(arr.imag, alphabet)
    if np.ndim(x) == 0:
        return complex(out)
    return out


def phase_alphabet(b: int) -> PhaseAlphabet:
    """Reflection coefficients ``exp(j m pi / 2**(b-1))`` for ``m = 0 .. 2**b - 1``."""
    if int(b) != b or not 1 <= b <= 8:
        raise ValueError(f"RIS resolution must be an integer in [1, 8], got {b!r}")
    b = int(b)
    m = np.arange(2**b)
    ang = m * np.pi / 2 ** (b - 1)
    re, im = np.cos(ang), np.sin(ang)
    # snap the quarter-turn points so 1, j, -1, -j are exact
    quarter = (4 * m) % (2**b) == 0
    re = np.where(quarter, np.round(re), re)
    im = np.where(quarter, np.round(im), im)
    coeffs = re + 1j * im
    coeffs.setflags(write=False)
    return PhaseAlphabet(b, coeffs)
