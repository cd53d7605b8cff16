"""Classical ensemble versus quantum packet over 100 drive periods.

The classical momentum spread keeps growing; the quantum one levels off.
A shorter version of ``paultrap evolve`` with the shipped evolve config.
"""
import math

from paultrap import classical, observables, quantum
from paultrap.classical import EnsembleSpec
from paultrap.model import TrapConfig
from paultrap.quantum import Grid, gaussian_packet

hbar = 0.29
cfg = TrapConfig(a=0.0, q=0.4, coupling=0.65, hbar=hbar)
grid = Grid(-160.0, 160.0, 16384)
t_final = 100 * math.pi

q = quantum.evolve(gaussian_packet(grid, sigma_x2=hbar, hbar=hbar), cfg, t_final)
spec = EnsembleSpec.matching_packet(hbar, 2048, hbar, seed=1)
c = classical.evolve_gaussian_ensemble(spec, cfg, t_final)

qc = observables.cycle_average(q.series)
cc = observables.cycle_average(c.series)
print("   t/pi   classical dp   quantum dp")
for i in range(9, len(qc.times), 10):
    print(f"{qc.times[i] / math.pi:7.1f}   {cc.dp[i]:12.3f}   {qc.dp[i]:10.3f}")
