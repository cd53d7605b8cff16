"""Split-operator propagation of the scaled Schroedinger equation

    i hbar d psi / dt = [p**2 / 2 + V(x, t)] psi,    p = -i hbar d/dx,

on a periodic grid.  One step is the Strang composition
``exp(-i T dt / 2hbar) exp(-i V(t + dt/2) dt / hbar) exp(-i T dt / 2hbar)``.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AliasingError, BoundaryMassError
from .model import DRIVE_PERIOD, potential
from .observables import Distribution, MomentsSeries, cycle_average  # noqa: F401

DEFAULT_DT = DRIVE_PERIOD / 512
GUARD_MASS = 1e-6
EDGE_FRACTION = 0.05
_MAX_CACHED_STEPS = 4096


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid ``x_j = x_min + j dx`` with ``n_points`` nodes."""

    x_min: float = -80.0
    x_max: float = 80.0
    n_points: int = 4096

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two, got {n}")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be smaller than x_max")

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dx(self):
        return self.length / self.n_points

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n_points)

    def momenta(self, hbar):
        """Momentum of each FFT bin, in numpy's FFT ordering."""
        return hbar * 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    def max_momentum(self, hbar):
        """Largest resolvable |p| (the Nyquist momentum)."""
        return hbar * np.pi * self.n_points / self.length

    def momentum_spacing(self, hbar):
        return hbar * 2 * np.pi / self.length


@dataclass
class WaveState:
    grid: Grid
    psi: np.ndarray
    hbar: float
    t: float = 0.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.shape != (self.grid.n_points,):
            raise ValueError("psi must have one amplitude per grid point")

    def norm(self):
        return float(np.sum(np.abs(self.psi)**2) * self.grid.dx)

    def copy(self):
        return replace(self, psi=self.psi.copy())


@dataclass
class GuardReport:
    max_boundary_mass: float = 0.0
    max_momentum_tail: float = 0.0
    checks: int = 0

    def update(self, boundary, tail):
        self.max_boundary_mass = max(self.max_boundary_mass, boundary)
        self.max_momentum_tail = max(self.max_momentum_tail, tail)
        self.checks += 1


@dataclass
class QuantumRun:
    series: MomentsSeries
    final: WaveState
    snapshot_times: list = field(default_factory=list)
    position_snapshots: list = field(default_factory=list)
    momentum_snapshots: list = field(default_factory=list)
    guards: GuardReport = field(default_factory=GuardReport)


def _edge_mask(n, fraction=EDGE_FRACTION):
    k = max(1, int(round(fraction * n)))
    mask = np.zeros(n, bool)
    mask[:k] = True
    mask[-k:] = True
    return mask


def boundary_mass(state, fraction=EDGE_FRACTION):
    """Probability in the outer ``fraction`` of the grid at each end."""
    rho = np.abs(state.psi)**2 * state.grid.dx
    return float(rho[_edge_mask(len(rho), fraction)].sum() / rho.sum())


def _tail_from_spectrum(phi, fraction=EDGE_FRACTION):
    w = np.abs(np.fft.fftshift(phi, axes=-1))**2
    return float(w[..., _edge_mask(w.shape[-1], fraction)].sum() / w.sum())


def momentum_tail_mass(state, fraction=EDGE_FRACTION):
    """Probability in the outer ``fraction`` of the momentum range at each end."""
    return _tail_from_spectrum(np.fft.fft(state.psi), fraction)


def check_guards(state, tol=GUARD_MASS, report=None, phi=None):
    b = boundary_mass(state)
    tail = _tail_from_spectrum(np.fft.fft(state.psi) if phi is None else phi)
    if report is not None:
        report.update(b, tail)
    if tol is None:
        return b, tail
    if b > tol:
        raise BoundaryMassError(f"boundary mass {b:.3g} exceeds {tol:g}", state.t)
    if tail > tol:
        raise AliasingError(f"momentum-tail mass {tail:.3g} exceeds {tol:g}", state.t)
    return b, tail


def gaussian_packet(grid, x0=0.0, p0=0.0, sigma_x2=None, hbar=0.29, t=0.0):
    """Minimum-uncertainty packet ``exp(-(x-x0)^2 / (4 s2) + i p0 x / hbar)``.

    ``sigma_x2`` (default ``hbar``) is the position variance; the momentum
    variance is ``hbar^2 / (4 sigma_x2)``.
    """
    s2 = hbar if sigma_x2 is None else sigma_x2
    if not s2 > 0:
        raise ValueError("sigma_x2 must be positive")
    if np.sqrt(s2) > grid.length / 8:
        raise ValueError("packet wider than an eighth of the grid")
    x = grid.x
    psi = np.exp(-(x - x0)**2 / (4 * s2) + 1j * p0 * x / hbar)
    psi /= np.sqrt(np.sum(np.abs(psi)**2) * grid.dx)
    return WaveState(grid, psi, hbar, t)


def moments(state):
    """``(<x>, <p>, dx, dp)`` by quadrature in the position and momentum grids."""
    x = state.grid.x
    rho = np.abs(state.psi)**2
    rho = rho / rho.sum()
    mx = float(np.sum(rho * x))
    vx = float(np.sum(rho * (x - mx)**2))
    p = state.grid.momenta(state.hbar)
    w = np.abs(np.fft.fft(state.psi))**2
    w = w / w.sum()
    mp = float(np.sum(w * p))
    vp = float(np.sum(w * (p - mp)**2))
    return mx, mp, np.sqrt(vx), np.sqrt(vp)


def position_distribution(state):
    rho = np.abs(state.psi)**2
    return Distribution(state.grid.x, rho / (rho.sum() * state.grid.dx))


def momentum_distribution(state):
    """``|psi(p)|^2`` on the sorted momentum grid, normalized over ``dp``."""
    grid = state.grid
    p = np.fft.fftshift(grid.momenta(state.hbar))
    w = np.abs(np.fft.fftshift(np.fft.fft(state.psi)))**2
    return Distribution(p, w / (w.sum() * grid.momentum_spacing(state.hbar)))


def window_average(distributions):
    """Mean of distributions sampled on a common set of centers."""
    distributions = list(distributions)
    if not distributions:
        raise ValueError("no snapshots to average")
    centers = distributions[0].centers
    for d in distributions[1:]:
        if d.centers.shape != centers.shape or not np.allclose(d.centers, centers):
            raise ValueError("snapshots must share their sampling points")
    mean = np.mean([d.density for d in distributions], axis=0)
    return Distribution(centers, mean).normalized()


def split_step(state, cfg, dt, guard=GUARD_MASS):
    """One Strang step of length ``dt``; returns a new state at ``t + dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    hbar = state.hbar
    p = grid.momenta(hbar)
    half = np.exp(-1j * p**2 * dt / (4 * hbar))
    phi = half * np.fft.fft(state.psi)
    psi = np.fft.ifft(phi)
    psi *= np.exp(-1j * potential(cfg, grid.x, state.t + dt / 2) * dt / hbar)
    phi = half * np.fft.fft(psi)
    new = WaveState(grid, np.fft.ifft(phi), hbar, state.t + dt)
    if guard is not None:
        check_guards(new, guard, phi=phi)
    return new


class SplitOperator:
    """Repeated Strang steps with merged kinetic half-steps.

    Works on arrays whose last axis is the grid, so a batch of states can be
    propagated together.  Step ``j`` covers ``[t0 + j dt, t0 + (j+1) dt]``.
    When the drive period is a whole number of steps the potential phases
    of one period are computed once and reused.
    """

    def __init__(self, grid, cfg, dt, t0=0.0, hbar=None):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.cfg = cfg
        self.hbar = cfg.hbar if hbar is None else hbar
        self.dt = dt
        self.t0 = t0
        p = grid.momenta(self.hbar)
        self.half = np.exp(-1j * p**2 * dt / (4 * self.hbar))
        self.full = self.half * self.half
        self._x = grid.x
        per = DRIVE_PERIOD / dt
        self._period_steps = int(round(per))
        self._cache = None
        if abs(per - self._period_steps) < 1e-9 * per and self._period_steps <= _MAX_CACHED_STEPS:
            offset = t0 / dt
            if abs(offset - round(offset)) < 1e-9 * max(1.0, abs(offset)):
                self._offset = int(round(offset))
                self._cache = {}

    def time(self, j):
        return self.t0 + j * self.dt

    def potential_phase(self, j):
        if self._cache is not None:
            k = (self._offset + j) % self._period_steps
            ph = self._cache.get(k)
            if ph is None:
                tm = (k + 0.5) * self.dt
                ph = np.exp(-1j * potential(self.cfg, self._x, tm) * self.dt / self.hbar)
                self._cache[k] = ph
            return ph
        tm = self.time(j) + 0.5 * self.dt
        return np.exp(-1j * potential(self.cfg, self._x, tm) * self.dt / self.hbar)

    def advance(self, psi, start, n_steps):
        """Apply steps ``start .. start + n_steps - 1`` to position-space ``psi``.

        Returns ``(psi, phi)``: the new state and its (unnormalized) FFT.
        """
        phi = np.fft.fft(psi, axis=-1)
        if n_steps == 0:
            return np.array(psi, dtype=complex, copy=True), phi
        phi *= self.half
        for j in range(start, start + n_steps):
            psi = np.fft.ifft(phi, axis=-1)
            psi *= self.potential_phase(j)
            phi = np.fft.fft(psi, axis=-1)
            phi *= self.full if j < start + n_steps - 1 else self.half
        return np.fft.ifft(phi, axis=-1), phi


def evolve(state, cfg, t_final, dt=DEFAULT_DT, samples_per_period=8, window=None,
           snapshots_per_period=8, guard=GUARD_MASS):
    """Propagate ``state`` to ``t_final`` recording moments and window snapshots.

    Moments are recorded ``samples_per_period`` times per drive period and
    guards are checked at the same cadence.  When ``window = (t_lo, t_hi)``
    position and momentum distributions are stored
    ``snapshots_per_period`` times per period inside it.
    """
    if not t_final > state.t:
        raise ValueError("t_final must be later than the current time")
    per = DRIVE_PERIOD / dt
    steps_per_period = int(round(per))
    if abs(per - steps_per_period) > 1e-9 * per:
        raise ValueError("dt must divide the drive period")
    h = DRIVE_PERIOD / steps_per_period
    if steps_per_period % samples_per_period or steps_per_period % snapshots_per_period:
        raise ValueError("sampling cadences must divide the steps per period")
    sample_every = steps_per_period // samples_per_period
    snap_every = steps_per_period // snapshots_per_period
    n_steps = int(np.floor((t_final - state.t) / h + 1e-9))
    prop = SplitOperator(state.grid, cfg, h, t0=state.t, hbar=state.hbar)
    run = QuantumRun(None, state)
    rows = []
    psi = state.psi.copy()
    j = 0
    marks = sorted(set(range(sample_every, n_steps + 1, sample_every))
                   | set(range(snap_every, n_steps + 1, snap_every)) | {n_steps})
    for m in marks:
        psi, phi = prop.advance(psi, j, m - j)
        j = m
        t = prop.time(j)
        current = WaveState(state.grid, psi, state.hbar, t)
        if m % sample_every == 0:
            check_guards(current, guard, run.guards, phi=phi)
            rows.append((t, *moments(current)))
        if window is not None and m % snap_every == 0 and window[0] <= t <= window[1]:
            run.snapshot_times.append(t)
            run.position_snapshots.append(position_distribution(current))
            run.momentum_snapshots.append(momentum_distribution(current))
    run.series = MomentsSeries.from_rows(rows)
    run.final = WaveState(state.grid, psi, state.hbar, prop.time(j))
    return run
