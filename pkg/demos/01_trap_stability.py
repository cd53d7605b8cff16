"""Mathieu stability of the bare trap and the resolution of the default grid."""
from paultrap.model import mathieu_exponent
from paultrap.quantum import Grid

for a, q in [(0.0, 0.2), (0.0, 0.4), (0.1, 0.3), (0.0, 1.0)]:
    res = mathieu_exponent(a, q)
    if res.stable:
        print(f"a={a:<4} q={q:<4} mu = {res.mu:.6f}")
    else:
        print(f"a={a:<4} q={q:<4} unstable, growth rate {res.growth_rate:.4f}")

grid = Grid(-80.0, 80.0, 4096)
print(f"\ndefault grid: dx = {grid.dx:.5f}, p_max = {grid.max_momentum(0.29):.3f}, "
      f"dp = {grid.momentum_spacing(0.29):.5f}")
