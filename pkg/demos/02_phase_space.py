"""Stroboscopic sections: bounded island orbits next to chaotic escape."""
import math

import numpy as np

from paultrap.classical import poincare_section
from paultrap.model import TrapConfig

cfg = TrapConfig(a=0.0, q=0.4, coupling=0.65)
seeds = [(math.pi, 0.0), (0.1, 0.0), (1.5, 0.0)]
for sec in poincare_section(cfg, seeds, 500):
    x = sec.x[np.isfinite(sec.x)]
    print(f"seed {sec.seed.x:+.3f}, {sec.seed.p:+.3f}: x in [{x.min():+.2f}, {x.max():+.2f}]"
          + (f", escaped at period {sec.diverged_at}" if sec.diverged_at else ""))
