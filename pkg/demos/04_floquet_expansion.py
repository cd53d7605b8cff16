"""Floquet expansion of the initial packet in a 200-state oscillator basis.

Takes a few minutes: 200 basis states are propagated over one period.
"""
from paultrap import floquet
from paultrap.model import TrapConfig
from paultrap.quantum import Grid, gaussian_packet

hbar = 0.29
cfg = TrapConfig(a=0.0, q=0.4, coupling=0.65, hbar=hbar)
grid = Grid(-80.0, 80.0, 4096)
basis = floquet.ReferenceBasis(grid, 0.29, 200, hbar)
fs = floquet.floquet_states(cfg, basis)
rep = floquet.expansion_coefficients(gaussian_packet(grid, sigma_x2=hbar, hbar=hbar), fs)

print(f"completeness {rep.completeness:.4f}, low-state leakage {fs.core_defect:.2e}")
idx, _ = rep.top(6)
for k in idx:
    d = floquet.floquet_position_distribution(fs, k)
    peak = d.centers[d.density.argmax()]
    print(f"mode {k:3d}  mu = {fs.quasienergies[k]:.4f}  parity {fs.parity[k]:+d}  "
          f"weight {rep.weights[k]:.4f}  density peak at x = {peak:+.2f}")
d = floquet.lowest_doublet(fs)
print(f"ground doublet ({d.first}, {d.second}): splitting {d.splitting:.2e}, center {d.center:.4f}")
