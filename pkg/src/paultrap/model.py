"""Dimensionless ion-trap Hamiltonian, physical parameter reduction and
Mathieu stability.

In scaled units (position ``x = 2 k x_phys``, time ``t = omega t_phys / 2``)
the ion moves in

    H = p**2 / 2 + (a + 2 q cos 2t) x**2 / 2 + coupling * cos(x + 2 phase)

with an effective Planck constant ``hbar``.  The drive period is ``pi``.
"""
from dataclasses import dataclass, replace
import math

import numpy as np
from scipy import constants

DRIVE_PERIOD = np.pi

#: |epsilon| above which the far-detuning assumption is flagged.
FAR_DETUNING_THRESHOLD = 0.2

HBAR = constants.hbar
ATOMIC_MASS_UNIT = constants.atomic_mass


@dataclass(frozen=True)
class TrapConfig:
    """Dimensionless parameters of the trap + standing wave system.

    Attributes
    ----------
    a, q : float
        Mathieu DC and AC trap parameters.
    coupling : float
        Standing-wave coupling (the cos-potential amplitude).
    phase : float
        Standing-wave phase; the potential is ``coupling * cos(x + 2 phase)``.
    hbar : float
        Effective Planck constant.
    """

    a: float = 0.0
    q: float = 0.4
    coupling: float = 0.65
    phase: float = 0.0
    hbar: float = 0.29

    def __post_init__(self):
        for name in ("a", "q", "coupling", "phase", "hbar"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.hbar <= 0:
            raise ValueError(f"hbar must be positive, got {self.hbar!r}")

    def with_coupling(self, coupling):
        return replace(self, coupling=float(coupling))

    @property
    def is_parity_symmetric(self):
        """True when the potential is even in x (phase a multiple of pi/2)."""
        k = 2 * self.phase / np.pi
        return abs(k - round(k)) < 1e-12

    def stability(self):
        return mathieu_exponent(self.a, self.q)


def potential(cfg, x, t):
    """Dimensionless potential ``V(x, t)``."""
    x = np.asarray(x)
    return (0.5 * (cfg.a + 2 * cfg.q * np.cos(2 * t)) * x**2
            + cfg.coupling * np.cos(x + 2 * cfg.phase))


def force(cfg, x, t):
    """Dimensionless force ``-dV/dx``."""
    x = np.asarray(x)
    return (-(cfg.a + 2 * cfg.q * np.cos(2 * t)) * x
            + cfg.coupling * np.sin(x + 2 * cfg.phase))


def period_averaged_potential(cfg, x):
    """Potential averaged over one drive period (the ``cos 2t`` term drops)."""
    x = np.asarray(x)
    return 0.5 * cfg.a * x**2 + cfg.coupling * np.cos(x + 2 * cfg.phase)


# --------------------------------------------------------------------------
# Mathieu equation


@dataclass(frozen=True)
class MathieuResult:
    """Floquet data of ``x'' + (a + 2q cos 2t) x = 0`` over one period.

    ``mu`` is the characteristic exponent in [0, 1] for stable parameters
    and ``nan`` otherwise; ``growth_rate`` is the per-unit-time Lyapunov
    growth rate of unstable solutions (0 when stable).
    """

    a: float
    q: float
    mu: float
    stable: bool
    trace: float
    monodromy: np.ndarray
    growth_rate: float

    @property
    def determinant(self):
        return float(np.linalg.det(self.monodromy))


def mathieu_monodromy(a, q, n_steps=2048):
    """One-period fundamental matrix of the Mathieu equation.

    Columns are the (x, p) images of the canonical initial conditions
    (1, 0) and (0, 1), integrated with classical fourth-order Runge-Kutta.
    """
    h = DRIVE_PERIOD / n_steps
    Y = np.eye(2)

    def rhs(t, Y):
        return np.array([Y[1], -(a + 2 * q * math.cos(2 * t)) * Y[0]])

    for i in range(n_steps):
        t = i * h
        k1 = rhs(t, Y)
        k2 = rhs(t + h / 2, Y + h / 2 * k1)
        k3 = rhs(t + h / 2, Y + h / 2 * k2)
        k4 = rhs(t + h, Y + h * k3)
        Y = Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return Y


def mathieu_exponent(a, q, n_steps=2048):
    """Characteristic exponent and stability flag of the Mathieu equation.

    Stable iff ``|tr M| < 2`` for the one-period monodromy ``M``; then
    ``mu = arccos(tr M / 2) / pi``.

    >>> round(mathieu_exponent(0.0, 0.4).mu, 4)
    0.2926
    """
    M = mathieu_monodromy(a, q, n_steps)
    tr = float(np.trace(M))
    half = tr / 2
    if abs(half) < 1:
        return MathieuResult(a, q, float(np.arccos(half) / np.pi), True,
                             tr, M, 0.0)
    # marginal (|tr M| = 2 to round-off) stays on the stable side
    if abs(half) - 1 < 1e-9:
        mu = 0.0 if half > 0 else 1.0
        return MathieuResult(a, q, mu, True, tr, M, 0.0)
    growth = float(np.arccosh(abs(half)) / DRIVE_PERIOD)
    return MathieuResult(a, q, float("nan"), False, tr, M, growth)


# --------------------------------------------------------------------------
# physical units


@dataclass(frozen=True)
class PhysicalSetup:
    """Laboratory parameters of a single ion in a Paul trap + standing wave.

    Frequencies are angular (rad/s).  ``mass`` is interpreted according to
    ``mass_unit`` ("kg" or "amu").
    """

    mass: float
    wavenumber: float
    rf_frequency: float
    a: float
    q: float
    rabi_frequency: float
    detuning: float
    phase: float = 0.0
    mass_unit: str = "kg"

    def __post_init__(self):
        if self.mass_unit not in ("kg", "amu"):
            raise ValueError(f"mass_unit must be 'kg' or 'amu', got {self.mass_unit!r}")
        if not self.mass > 0:
            raise ValueError("ion mass must be positive")
        if not self.wavenumber > 0:
            raise ValueError("laser wavenumber must be positive")
        if not self.rf_frequency > 0:
            raise ValueError("rf frequency must be positive")
        if self.detuning == 0:
            raise ValueError("detuning must be nonzero (resonant drive is "
                             "outside the far-detuned model)")

    @property
    def mass_kg(self):
        if self.mass_unit == "amu":
            return self.mass * ATOMIC_MASS_UNIT
        return self.mass

    @property
    def epsilon(self):
        """Rabi frequency over detuning."""
        return self.rabi_frequency / self.detuning


@dataclass(frozen=True)
class Reduction:
    config: TrapConfig
    epsilon: float
    far_detuning_warning: bool


def reduce_to_dimensionless(setup):
    """Map a :class:`PhysicalSetup` to the dimensionless :class:`TrapConfig`.

    ``hbar = 8 k^2 hbar_SI / (m omega)`` and
    ``coupling = 2 hbar_SI k^2 Omega0^2 / (m omega^2 Delta)``.
    """
    m = setup.mass_kg
    k = setup.wavenumber
    w = setup.rf_frequency
    hbar_eff = 8 * k**2 * HBAR / (m * w)
    coupling = 2 * HBAR * k**2 * setup.rabi_frequency**2 / (m * w**2 * setup.detuning)
    cfg = TrapConfig(a=setup.a, q=setup.q, coupling=coupling,
                     phase=setup.phase, hbar=hbar_eff)
    eps = setup.epsilon
    return Reduction(cfg, eps, abs(eps) > FAR_DETUNING_THRESHOLD)


def rf_frequency_for_hbar(setup, target_hbar):
    """Angular rf frequency that yields ``target_hbar`` (hbar scales as 1/omega)."""
    current = reduce_to_dimensionless(setup).config.hbar
    return setup.rf_frequency * current / target_hbar
