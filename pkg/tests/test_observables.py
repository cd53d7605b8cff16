import math

import numpy as np
import pytest

from paultrap.observables import (
    Distribution, MomentsSeries, cycle_average, histogram, linear_slope, peak_contrast, rebin,
    uniform_edges,
)


def series(t, y):
    return MomentsSeries(t, y, -y, np.abs(y), 2 * np.abs(y))


def test_moments_series_validation():
    with pytest.raises(ValueError):
        MomentsSeries([0, 1], [0], [0, 1], [0, 1], [0, 1])
    with pytest.raises(ValueError):
        MomentsSeries([0, 1, 1], [0] * 3, [0] * 3, [0] * 3, [0] * 3)


def test_cycle_average_constant_and_cosine():
    t = math.pi / 16 * np.arange(1, 16 * 10 + 1)
    const = cycle_average(series(t, np.full_like(t, 3.5)))
    assert len(const) == 10
    assert np.allclose(const.mean_x, 3.5, atol=1e-14)
    osc = cycle_average(series(t, np.cos(2 * t)))
    assert np.abs(osc.mean_x).max() < 1e-13


def test_cycle_average_linear_ramp_gives_midpoints():
    t = math.pi / 8 * np.arange(0, 8 * 6)
    out = cycle_average(series(t, 2.0 * t + 1.0))
    mids = t.reshape(6, 8).mean(axis=1)
    assert np.allclose(out.times, mids)
    assert np.allclose(out.mean_x, 2.0 * mids + 1.0, atol=1e-12)


def test_cycle_average_rejects_bad_spacing():
    t = np.arange(1, 50) * 0.3
    with pytest.raises(ValueError):
        cycle_average(series(t, t))


def test_linear_slope_window():
    t = np.linspace(0, 10, 101)
    y = np.where(t < 5, 0.0, 3.0 * t)
    assert linear_slope(t, y, 5, 10) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        linear_slope(t, y, 20, 30)


def test_histogram_delta_and_uniform():
    d = histogram(np.full(1000, 0.05), 10, (-1, 1))
    assert d.density.max() == pytest.approx(1 / 0.2)
    assert d.total() == pytest.approx(1.0)
    u = histogram(np.random.default_rng(0).uniform(-1, 1, 200000), 20, (-1, 1))
    assert np.allclose(u.density, 0.5, rtol=0.03)
    with pytest.raises(ValueError):
        histogram([], 10, (0, 1))


def test_rebin_conserves_mass():
    x = np.linspace(-10, 10, 2001)
    d = Distribution(x, np.exp(-x**2 / 2) / math.sqrt(2 * math.pi))
    r = rebin(d, uniform_edges(40, (-10, 10)))
    assert r.total() == pytest.approx(1.0, abs=1e-6)
    assert r.mean() == pytest.approx(0.0, abs=1e-9)


def test_peak_contrast():
    x = np.linspace(-6, 6, 601)
    d = Distribution(x, 1 + 0.5 * np.exp(-(x - math.pi)**2 / 0.1))
    c, xp, interior = peak_contrast(d, math.pi, 1.0)
    assert interior and xp == pytest.approx(math.pi, abs=0.02)
    assert c == pytest.approx(0.5, abs=0.01)
    flat = Distribution(x, np.ones_like(x))
    assert peak_contrast(flat, 0.0, 0.5)[0] == pytest.approx(0.0)
