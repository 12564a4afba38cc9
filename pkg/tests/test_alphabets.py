import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from rismse.alphabets import (
    QuantizationAlphabet,
    design_uniform_labels,
    gaussian_distortion,
    phase_alphabet,
    quantize,
)


def closed_form_distortion(step, L):
    # E[(x - Q(x))^2] for x ~ N(0, 1) from the normal cdf/pdf, no quadrature
    half = L // 2
    total = 0.0
    for i in range(half):
        a = i * step
        b = np.inf if i == half - 1 else (i + 1) * step
        lab = (2 * i + 1) * step / 2
        pa, pb = norm.pdf(a), (0.0 if np.isinf(b) else norm.pdf(b))
        bpb = 0.0 if np.isinf(b) else b * pb
        m0 = norm.cdf(b) - norm.cdf(a)
        m1 = pa - pb
        m2 = m0 + a * pa - bpb
        total += m2 - 2 * lab * m1 + lab**2 * m0
    return 2 * total


def grid_step(L, lo, hi, n=20001):
    grid = np.linspace(lo, hi, n)
    return grid[np.argmin([closed_form_distortion(s, L) for s in grid])]


@pytest.mark.parametrize("step", [0.3, 0.9957, 1.7])
@pytest.mark.parametrize("L", [2, 4, 8])
def test_distortion_matches_closed_form(step, L):
    assert gaussian_distortion(step, L) == pytest.approx(closed_form_distortion(step, L), rel=1e-10)


def test_two_level_labels_against_grid():
    qa = design_uniform_labels(2, 1.0)
    ref = grid_step(2, 1.4, 1.8) / 2
    assert qa.labels[1] == pytest.approx(0.7979, abs=1e-3)
    assert qa.labels[1] == pytest.approx(ref, abs=2e-5)
    assert qa.labels[1] == pytest.approx(np.sqrt(2 / np.pi), abs=1e-7)


def test_four_level_step_against_grid():
    qa = design_uniform_labels(4, 1.0)
    assert qa.step == pytest.approx(0.9957, abs=1e-3)
    assert qa.step == pytest.approx(grid_step(4, 0.9, 1.1), abs=2e-5)
    np.testing.assert_allclose(qa.labels, [-1.4936, -0.4979, 0.4979, 1.4936], atol=1e-3)


def test_scale_equivariance():
    a, b = design_uniform_labels(4, 1.0), design_uniform_labels(4, 2.0)
    np.testing.assert_allclose(b.labels, 2 * a.labels, rtol=1e-7)
    assert b.scale == 2.0


@pytest.mark.parametrize("L", [2, 4, 6, 8])
def test_designed_step_is_local_minimum(L):
    s = design_uniform_labels(L, 1.0).step
    d = gaussian_distortion(s, L)
    assert d <= gaussian_distortion(0.9 * s, L)
    assert d <= gaussian_distortion(1.1 * s, L)


@pytest.mark.parametrize("L, sigma", [(3, 1.0), (0, 1.0), (-2, 1.0), (4, 0.0), (4, -1.0)])
def test_design_rejects_bad_arguments(L, sigma):
    with pytest.raises(ValueError):
        design_uniform_labels(L, sigma)


@pytest.mark.parametrize("labels", [[1.0], [-1, 0, 1], [1, -1], [-2, 1], [-3, -1, 0.5, 3]])
def test_alphabet_rejects_invalid_labels(labels):
    with pytest.raises(ValueError):
        QuantizationAlphabet(np.array(labels, dtype=float))


def test_points_cover_product_set():
    qa = design_uniform_labels(4, 1.0)
    pts = qa.points
    assert pts.size == 16
    assert set(pts.real) == set(qa.labels) and set(pts.imag) == set(qa.labels)


STEP = 0.9958
QA4 = QuantizationAlphabet(np.array([-1.5, -0.5, 0.5, 1.5]) * STEP)
LO, HI = QA4.labels[2], QA4.labels[3]


def test_quantize_examples():
    assert quantize(0.45 + 1.60j, QA4) == complex(LO, HI)
    assert quantize(complex(-HI, LO), QA4) == complex(-HI, LO)
    # zero is equidistant from +-LO; the negative label wins
    assert quantize(0j, QA4) == complex(-LO, -LO)


def test_quantize_ties_prefer_smaller_magnitude():
    mid = QA4._boundaries[2]
    assert quantize(complex(mid, -mid), QA4) == complex(LO, -LO)


finite = st.floats(-10, 10, allow_nan=False)


@given(finite, finite)
def test_quantize_idempotent(re, im):
    q = quantize(complex(re, im), QA4)
    assert quantize(q, QA4) == q


@given(finite, finite)
def test_quantize_error_bound(re, im):
    q = quantize(complex(re, im), QA4)
    half = QA4.step / 2
    for x, y in ((re, q.real), (im, q.imag)):
        overload = max(abs(x) - QA4.labels[-1], 0.0)
        assert abs(x - y) <= half + overload + 1e-12


@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
def test_quantize_array_matches_scalar(xs):
    arr = quantize(np.array(xs), QA4)
    assert all(arr[i] == quantize(x, QA4) for i, x in enumerate(xs))
    assert np.all(np.isin(arr, QA4.points))


def test_phase_alphabet_small_cases():
    np.testing.assert_array_equal(phase_alphabet(1).coefficients, [1, -1])
    np.testing.assert_array_equal(phase_alphabet(2).coefficients, [1, 1j, -1, -1j])


@pytest.mark.parametrize("b", range(1, 9))
def test_phase_alphabet_unit_modulus_and_group(b):
    c = phase_alphabet(b).coefficients
    assert c.size == 2**b
    np.testing.assert_allclose(np.abs(c), 1.0, atol=1e-15)
    m = np.arange(2**b)
    np.testing.assert_allclose(c, np.exp(1j * m * np.pi / 2 ** (b - 1)), atol=1e-15)
    # closed under multiplication: c_i c_j = c_{(i+j) mod 2^b}
    prod = c[:, None] * c[None, :]
    expect = c[(m[:, None] + m[None, :]) % 2**b]
    np.testing.assert_allclose(prod, expect, atol=1e-12)


@pytest.mark.parametrize("b", [0, 9, 1.5])
def test_phase_alphabet_range(b):
    with pytest.raises(ValueError):
        phase_alphabet(b)


def test_serialization():
    qa = design_uniform_labels(4, 0.5)
    d = qa.to_dict()
    back = QuantizationAlphabet(np.array(d["labels"]), d["scale"])
    np.testing.assert_array_equal(back.labels, qa.labels)
    assert phase_alphabet(2).to_dict()["bits"] == 2
