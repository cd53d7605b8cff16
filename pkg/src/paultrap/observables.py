"""Sampled observables shared by the classical and quantum propagators."""
from dataclasses import dataclass

import numpy as np

from .model import DRIVE_PERIOD


@dataclass
class MomentsSeries:
    """First and second moments sampled along a run."""

    times: np.ndarray
    mean_x: np.ndarray
    mean_p: np.ndarray
    dx: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        for name in ("times", "mean_x", "mean_p", "dx", "dp"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.times.shape
        if any(getattr(self, f).shape != n for f in ("mean_x", "mean_p", "dx", "dp")):
            raise ValueError("all series must have the same length")
        if n[0] > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def window(self, t_lo, t_hi):
        m = (self.times >= t_lo) & (self.times <= t_hi)
        return MomentsSeries(self.times[m], self.mean_x[m], self.mean_p[m],
                             self.dx[m], self.dp[m])

    @classmethod
    def from_rows(cls, rows):
        rows = np.asarray(rows, dtype=float).reshape(-1, 5)
        return cls(*rows.T)


@dataclass
class Distribution:
    """Probability density sampled on uniformly spaced bin centers.

    The convention is ``density.sum() * spacing == 1``.
    """

    centers: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        if self.centers.shape != self.density.shape:
            raise ValueError("centers and density must have the same shape")

    @property
    def spacing(self):
        return float(self.centers[1] - self.centers[0])

    @property
    def edges(self):
        h = self.spacing
        return np.append(self.centers - h / 2, self.centers[-1] + h / 2)

    def total(self):
        return float(self.density.sum() * self.spacing)

    def normalized(self):
        return Distribution(self.centers, self.density / self.total())

    def mean(self):
        return float(np.sum(self.centers * self.density) * self.spacing)

    def std(self):
        m = self.mean()
        return float(np.sqrt(np.sum((self.centers - m)**2 * self.density) * self.spacing))


def cycle_average(series, period=DRIVE_PERIOD):
    """Average a uniformly sampled series over consecutive drive periods.

    Windows are ``[t0 + n period, t0 + (n+1) period)`` with ``t0`` the first
    sample time; each output sample sits at the mean sample time of its
    window.  A trailing incomplete window is dropped.
    """
    t = series.times
    if len(t) < 2:
        raise ValueError("need at least two samples to cycle-average")
    dt = t[1] - t[0]
    per = period / dt
    n_per = int(round(per))
    if abs(per - n_per) > 1e-6 * per or n_per < 1:
        raise ValueError("sample spacing must divide the drive period")
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("cycle_average needs uniformly spaced samples")
    n_win = len(t) // n_per
    if n_win == 0:
        raise ValueError("series shorter than one drive period")
    cut = n_win * n_per

    def avg(v):
        return v[:cut].reshape(n_win, n_per).mean(axis=1)

    return MomentsSeries(avg(t), avg(series.mean_x), avg(series.mean_p),
                         avg(series.dx), avg(series.dp))


def linear_slope(t, y, t_lo=None, t_hi=None):
    """Least-squares slope of ``y(t)`` restricted to ``[t_lo, t_hi]``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    m = np.ones(t.shape, bool)
    if t_lo is not None:
        m &= t >= t_lo
    if t_hi is not None:
        m &= t <= t_hi
    if m.sum() < 2:
        raise ValueError("fewer than two samples in the fit window")
    return float(np.polyfit(t[m], y[m], 1)[0])


def histogram(samples, bins, value_range):
    """Normalized histogram of ``samples`` as a :class:`Distribution`.

    Samples outside ``value_range`` still count toward the normalization,
    so the returned density integrates to the in-range fraction.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("empty sample set")
    counts, edges = np.histogram(samples, bins=bins, range=value_range)
    return distribution_from_counts(counts, edges, samples.size)


def distribution_from_counts(counts, edges, total):
    edges = np.asarray(edges, dtype=float)
    width = edges[1] - edges[0]
    centers = 0.5 * (edges[1:] + edges[:-1])
    return Distribution(centers, np.asarray(counts, dtype=float) / (total * width))


def rebin(dist, edges):
    """Integrate a fine distribution into coarser bins given by ``edges``.

    The fine density is treated as piecewise constant over its cells; the
    result is a density on the new bins (mass outside ``edges`` is dropped).
    """
    fine_edges = dist.edges
    cdf = np.concatenate([[0.0], np.cumsum(dist.density * dist.spacing)])
    edges = np.asarray(edges, dtype=float)
    mass = np.diff(np.interp(edges, fine_edges, cdf))
    width = edges[1] - edges[0]
    return Distribution(0.5 * (edges[1:] + edges[:-1]), mass / width)


def uniform_edges(bins, value_range):
    return np.linspace(value_range[0], value_range[1], bins + 1)


def peak_contrast(dist, center, half_width, ring=(1.0, 2.0)):
    """Relative height of the maximum near ``center`` over its surroundings.

    The peak is the largest density with ``|x - center| < half_width``; the
    background is the mean density on the ring
    ``ring[0] <= |x - center| <= ring[1]``.  Returns ``(contrast, x_peak,
    is_interior)`` where ``contrast = peak / background - 1`` and
    ``is_interior`` tells whether the maximum is a genuine local maximum
    rather than the edge of the search region.
    """
    x = dist.centers
    d = dist.density
    region = np.abs(x - center) < half_width
    r = np.abs(x - center)
    annulus = (r >= ring[0]) & (r <= ring[1])
    if not region.any() or not annulus.any():
        raise ValueError("search region or background ring is empty")
    idx = np.flatnonzero(region)
    i = idx[np.argmax(d[idx])]
    background = d[annulus].mean()
    interior = 0 < i < len(d) - 1 and d[i] >= d[i - 1] and d[i] >= d[i + 1]
    contrast = d[i] / background - 1 if background > 0 else np.inf
    return float(contrast), float(x[i]), bool(interior)
