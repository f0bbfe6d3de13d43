"""The tug-of-war with noise DPP at p = 2 tracks the heat equation, first order in eps.

Run: python3 demos/dpp_vs_heat.py
"""
import numpy as np

from degenpar import DppConfig, dpp_solve, heat_reference, make_grid
from degenpar.dpp import fd_time

ref = heat_reference([np.pi / 2])
for eps in (0.2, 0.1, 0.05):
    cfg = DppConfig(eps, 2.0, 1, 1.0)
    grid = make_grid(1, 1 + eps, eps ** 2 / 2, cfg.dt, 0.0, 0.6)

    # DPP time tau runs 2(n + p) times faster than FD time
    def g(x, t):
        return ref.u(x, fd_time(t, 1, 2.0))

    sol = dpp_solve(g, grid, cfg)
    exact = np.stack([g(grid.points(), t) for t in grid.times()])
    print(f"eps = {eps:<5} sup error {np.abs(sol.values - exact)[sol.valid].max():.4e}")
