"""End-to-end recovery on an 8 x 8 base-point grid (about half a minute).

Forward DN maps for a smooth bump and for V = 0, then V-hat from the
boundary pairing only; ground truth is read afterwards for the error.

    python demos/reconstruct_small.py
"""
import numpy as np

from cgokit.amplitude import PhiConfig, build_sheet_set
from cgokit.field_core import Grid2D, disk_domain, make_potential
from cgokit.forward_dn import PolarGrid, dn_assemble
from cgokit.recovery import CGOTraces, plateau_certificate, reconstruct_from_dn, window_grid

g = Grid2D.square(160, 1.25)
V1 = make_potential("smooth_bump", g, amplitude=1.0, width=0.8, center=[0.05, 0.03])
pg = PolarGrid(128, 256, 1.0)
dn1 = dn_assemble(V1.function(), 16, pg)
dn0 = dn_assemble(0.0, 16, pg)
sheets = build_sheet_set(PhiConfig("identity", disk_domain(g, 1.05, 1.2)), 0j, 0.45)
grid = window_grid(sheets, 8)
lams = [1.0, 1.5, 2.0, 3.0, 4.0, 5.0]
res = reconstruct_from_dn(dn1, dn0, sheets, lams, grid, traces=CGOTraces(sheets, pg, 16, V1))

truth = V1.function()(grid.z) * res.mask
curve = res.error_curve(truth)
for lam, e in zip(lams, curve):
    print(f"lambda <= {lam:3.1f}: relative L2 error {e:.3f}")
print("plateau certificate:", plateau_certificate(curve))
np.set_printoptions(precision=2, suppress=True, linewidth=120)
print("Re V-hat:\n", res.values.real)
