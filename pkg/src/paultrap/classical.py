"""Newtonian dynamics of the scaled ion: trajectories, Poincare sections and
Gaussian ensembles.

The integrator is the kick-drift-kick (velocity Verlet) step with the
time-dependent force evaluated at the kick times.  ``order=4`` composes three
such steps with Yoshida's triple-jump weights; both variants are symplectic
and time-reversible.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import observables
from ._pool import ordered_map
from .errors import DivergenceError
from .model import DRIVE_PERIOD, force, mathieu_exponent
from .observables import MomentsSeries, cycle_average  # noqa: F401

DEFAULT_DT = DRIVE_PERIOD / 512
ESCAPE_RADIUS = 200.0
CHUNK_SIZE = 1024

_CBRT2 = 2.0 ** (1.0 / 3.0)
_YOSHIDA = (1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2))


class PhasePoint(NamedTuple):
    x: float
    p: float


@dataclass(frozen=True)
class EnsembleSpec:
    count: int
    sigma_x: float
    sigma_p: float
    center: PhasePoint = PhasePoint(0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("ensemble needs at least one member")
        if self.sigma_x < 0 or self.sigma_p < 0:
            raise ValueError("ensemble widths must be non-negative")

    @classmethod
    def matching_packet(cls, hbar, count=4096, sigma_x2=None, seed=0,
                        center=PhasePoint(0.0, 0.0)):
        """Widths of the minimum-uncertainty packet with variance ``sigma_x2``
        (default ``hbar``)."""
        s2 = hbar if sigma_x2 is None else sigma_x2
        sx = float(np.sqrt(s2))
        return cls(count, sx, hbar / (2 * sx), PhasePoint(*center), seed)


@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    p: np.ndarray


@dataclass
class PoincareSection:
    seed: PhasePoint
    n: np.ndarray
    x: np.ndarray
    p: np.ndarray
    diverged_at: int = None


@dataclass
class EnsembleRun:
    series: MomentsSeries
    position: observables.Distribution = None
    momentum: observables.Distribution = None
    window_samples: int = 0


def _weights(order):
    if order == 2:
        return (1.0,)
    if order == 4:
        return _YOSHIDA
    raise ValueError(f"order must be 2 or 4, got {order!r}")


def _advance(cfg, x, p, t0, dt, n_steps, f=None, weights=_YOSHIDA, start=0):
    """Advance arrays in place by ``n_steps``; returns the force at the end.

    Step ``j`` starts at ``t0 + (start + j) dt`` so long runs do not
    accumulate round-off in the time variable.
    """
    if f is None:
        f = force(cfg, x, t0 + start * dt)
    for j in range(start, start + n_steps):
        tau = t0 + j * dt
        for w in weights:
            h = w * dt
            p += 0.5 * h * f
            x += h * p
            tau += h
            f = force(cfg, x, tau)
            p += 0.5 * h * f
    return f


def _check_escape(x, p, radius, t):
    bad = ~((np.abs(x) <= radius) & (np.abs(p) <= radius))
    if np.any(bad):
        raise DivergenceError(
            f"{int(bad.sum())} trajectories left the escape radius {radius:g}", t)


def step(point, cfg, t, dt, order=4, escape_radius=ESCAPE_RADIUS):
    """One integrator step from ``t`` to ``t + dt``.

    ``point`` may hold scalars or arrays; a :class:`PhasePoint` is returned.
    """
    if dt == 0:
        raise ValueError("dt must be nonzero")
    x = np.array(point[0], dtype=float, copy=True)
    p = np.array(point[1], dtype=float, copy=True)
    _advance(cfg, x, p, t, dt, 1, weights=_weights(order))
    _check_escape(x, p, escape_radius, t + dt)
    if x.ndim == 0:
        return PhasePoint(float(x), float(p))
    return PhasePoint(x, p)


def propagate(point, cfg, t0, t1, dt=DEFAULT_DT, strobe=None, order=4,
              escape_radius=ESCAPE_RADIUS):
    """Integrate from ``t0`` to ``t1`` (backwards when ``t1 < t0``).

    The step is shrunk so that an integer number of steps spans the
    interval.  Without ``strobe`` every step is recorded; otherwise samples
    are taken at the steps nearest to the requested times.
    """
    span = t1 - t0
    if span == 0:
        raise ValueError("t1 must differ from t0")
    n_steps = max(1, int(round(abs(span) / abs(dt))))
    h = span / n_steps
    if strobe is None:
        marks = np.arange(n_steps + 1)
    else:
        marks = np.clip(np.rint((np.asarray(strobe, float) - t0) / h), 0, n_steps).astype(int)
    x = np.array(point[0], dtype=float, copy=True)
    p = np.array(point[1], dtype=float, copy=True)
    xs, ps = [], []
    weights = _weights(order)
    f = None
    done = 0
    for m in marks:
        if m < done:
            raise ValueError("strobe times must be non-decreasing")
        if m > done:
            f = _advance(cfg, x, p, t0, h, m - done, f, weights, start=done)
            _check_escape(x, p, escape_radius, t0 + m * h)
            done = m
        xs.append(x.copy())
        ps.append(p.copy())
    return Trajectory(t0 + marks * h, np.array(xs), np.array(ps))


def poincare_section(cfg, seeds, n_periods, dt=DEFAULT_DT, phase=0.0, order=4,
                     escape_radius=ESCAPE_RADIUS):
    """Stroboscopic section at ``t = phase + n pi`` for ``n = 0..n_periods``.

    All seeds are integrated together.  A seed that leaves the escape radius
    keeps the points recorded up to its last period and is flagged with
    ``diverged_at``.
    """
    seeds = [PhasePoint(float(s[0]), float(s[1])) for s in seeds]
    steps = int(round(DRIVE_PERIOD / dt))
    h = DRIVE_PERIOD / steps
    x = np.array([s.x for s in seeds])
    p = np.array([s.p for s in seeds])
    alive = np.ones(len(seeds), bool)
    diverged = [None] * len(seeds)
    out_x = np.full((n_periods + 1, len(seeds)), np.nan)
    out_p = np.full_like(out_x, np.nan)
    out_x[0], out_p[0] = x, p
    weights = _weights(order)
    with np.errstate(invalid="ignore", over="ignore"):
        f = None
        for n in range(1, n_periods + 1):
            f = _advance(cfg, x, p, phase, h, steps, f, weights, start=(n - 1) * steps)
            bad = alive & ~((np.abs(x) <= escape_radius) & (np.abs(p) <= escape_radius))
            for i in np.flatnonzero(bad):
                diverged[i] = n
            alive &= ~bad
            x[~alive] = np.nan
            p[~alive] = np.nan
            out_x[n] = x
            out_p[n] = p
    sections = []
    for i, s in enumerate(seeds):
        keep = n_periods + 1 if diverged[i] is None else diverged[i]
        sections.append(PoincareSection(s, np.arange(keep), out_x[:keep, i].copy(),
                                        out_p[:keep, i].copy(), diverged[i]))
    return sections


def stability_warning(cfg):
    """Message when (a, q) lies outside the stable Mathieu region, else None."""
    res = mathieu_exponent(cfg.a, cfg.q)
    if res.stable:
        return None
    return (f"(a, q) = ({cfg.a}, {cfg.q}) is Mathieu-unstable "
            f"(growth rate {res.growth_rate:.3g}); trajectories will diverge")


def sample_gaussian_ensemble(spec):
    """Independent normal draws in x and p; deterministic in ``spec.seed``.

    All members come from one generator seeded with ``spec.seed`` before any
    work is distributed, so the ensemble never depends on scheduling.
    """
    rng = np.random.default_rng(spec.seed)
    x = rng.normal(spec.center[0], spec.sigma_x, spec.count)
    p = rng.normal(spec.center[1], spec.sigma_p, spec.count)
    return x, p


def ensemble_moments(x, p):
    """``(mean x, mean p, dx, dp)`` with unbiased standard deviations."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.size < 2:
        return float(x.mean()), float(p.mean()), 0.0, 0.0
    return float(x.mean()), float(p.mean()), float(x.std(ddof=1)), float(p.std(ddof=1))


def time_averaged_histogram(samples, bins=200, value_range=(-30.0, 30.0)):
    """Normalized histogram of all samples pooled over a time window."""
    return observables.histogram(samples, bins, value_range)


def _chunk_run(args):
    (cfg, x, p, dt, n_samples, steps_per_sample, win, xh, ph, weights,
     escape_radius) = args
    x = x.copy()
    p = p.copy()
    n = len(x)
    stats = np.empty((n_samples, 4))
    xcounts = np.zeros(xh[0], dtype=np.int64)
    pcounts = np.zeros(ph[0], dtype=np.int64)
    n_win = 0
    f = None
    for s in range(n_samples):
        f = _advance(cfg, x, p, 0.0, dt, steps_per_sample, f, weights,
                     start=s * steps_per_sample)
        t = (s + 1) * steps_per_sample * dt
        _check_escape(x, p, escape_radius, t)
        mx, mp = x.mean(), p.mean()
        stats[s] = mx, ((x - mx)**2).sum(), mp, ((p - mp)**2).sum()
        if win is not None and win[0] <= t <= win[1]:
            xcounts += np.histogram(x, bins=xh[0], range=xh[1])[0]
            pcounts += np.histogram(p, bins=ph[0], range=ph[1])[0]
            n_win += n
    return n, stats, xcounts, pcounts, n_win


def _combine(parts):
    """Chan's pairwise merge of per-chunk means and squared deviations."""
    n, stats = parts[0][0], parts[0][1].copy()
    for nb, sb, *_ in parts[1:]:
        tot = n + nb
        for col in (0, 2):
            delta = sb[:, col] - stats[:, col]
            stats[:, col + 1] += sb[:, col + 1] + delta**2 * n * nb / tot
            stats[:, col] += delta * nb / tot
        n = tot
    return n, stats


def evolve_ensemble(x, p, cfg, t_final, dt=DEFAULT_DT, samples_per_period=8,
                    window=None, position_bins=(200, (-30.0, 30.0)),
                    momentum_bins=(200, (-25.0, 25.0)), order=4, workers=1,
                    chunk_size=CHUNK_SIZE, escape_radius=ESCAPE_RADIUS):
    """Propagate an ensemble from ``t = 0`` and record moments and histograms.

    Moments are sampled ``samples_per_period`` times per drive period.  When
    ``window = (t_lo, t_hi)`` is given, position and momentum histograms
    are pooled over all samples inside it.  The ensemble is split into
    fixed-size chunks, so results are bit-identical for any ``workers``.
    """
    steps_per_period = int(round(DRIVE_PERIOD / dt))
    if steps_per_period % samples_per_period:
        raise ValueError("samples_per_period must divide the steps per period")
    h = DRIVE_PERIOD / steps_per_period
    sps = steps_per_period // samples_per_period
    n_samples = int(np.floor(t_final / (sps * h) + 1e-9))
    if n_samples < 1:
        raise ValueError("t_final shorter than one sampling interval")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    weights = _weights(order)
    jobs = [(cfg, x[i:i + chunk_size], p[i:i + chunk_size], h, n_samples, sps,
             window, position_bins, momentum_bins, weights, escape_radius)
            for i in range(0, len(x), chunk_size)]
    parts = ordered_map(_chunk_run, jobs, workers)
    n, stats = _combine(parts)
    denom = max(n - 1, 1)
    times = (np.arange(n_samples) + 1) * sps * h
    series = MomentsSeries(times, stats[:, 0], stats[:, 2],
                           np.sqrt(stats[:, 1] / denom), np.sqrt(stats[:, 3] / denom))
    run = EnsembleRun(series)
    if window is not None:
        n_win = sum(part[4] for part in parts)
        if n_win == 0:
            raise ValueError("no samples fell inside the averaging window")
        xc = sum(part[2] for part in parts)
        pc = sum(part[3] for part in parts)
        run.position = observables.distribution_from_counts(
            xc, observables.uniform_edges(*position_bins), n_win)
        run.momentum = observables.distribution_from_counts(
            pc, observables.uniform_edges(*momentum_bins), n_win)
        run.window_samples = n_win
    return run


def evolve_gaussian_ensemble(spec, cfg, t_final, **kwargs):
    x, p = sample_gaussian_ensemble(spec)
    return evolve_ensemble(x, p, cfg, t_final, **kwargs)

