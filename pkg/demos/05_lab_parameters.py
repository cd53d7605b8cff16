"""Dimensionless parameters for a beryllium ion at two trap drive frequencies."""
import math

from paultrap.cli import plan_report
from paultrap.model import PhysicalSetup

for rf_hz in (200e6, 10e6):
    setup = PhysicalSetup(mass=9.012182, mass_unit="amu", wavenumber=2 * math.pi / 313e-9,
                          rf_frequency=2 * math.pi * rf_hz, a=0.0, q=0.2,
                          rabi_frequency=0.1 * 2 * math.pi * 10e9,
                          detuning=2 * math.pi * 10e9)
    _, _, lines, warnings = plan_report(setup)
    print(f"--- drive at {rf_hz / 1e6:g} MHz")
    print("\n".join(lines + [f"warning: {w}" for w in warnings]))
