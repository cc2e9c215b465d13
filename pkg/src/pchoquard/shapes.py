"""Named test profiles and the seeded random battery generator."""

import numpy as np

from .radial import RadialProfile


def gaussian(grid, width=1.0):
    """exp(-(r/width)^2)."""
    if width <= 0.0:
        raise ValueError("width must be positive")
    return RadialProfile(grid, np.exp(-((grid.nodes / width) ** 2)))


def tent(grid, width=1.0):
    """max(0, 1 - r/width)."""
    if width <= 0.0:
        raise ValueError("width must be positive")
    return RadialProfile(grid, np.maximum(0.0, 1.0 - grid.nodes / width))


def indicator_ball(grid, radius=1.0, jump_eps=1e-12):
    """Indicator of the ball of the given radius.

    The jump is captured by inserting nodes at `radius` and just past it, so
    the piecewise-linear view of the data drops from 1 to 0 over a cell of
    width `jump_eps` instead of smearing across a regular cell.
    """
    if not (0.0 < radius < grid.r_max):
        raise ValueError("radius must lie inside the grid")
    g = grid.with_points([radius, radius + jump_eps])
    return RadialProfile(g, (g.nodes <= radius).astype(float))


def indicator_annulus(grid, inner, outer, jump_eps=1e-12):
    """Indicator of the annulus [inner, outer], with both jumps captured."""
    if not (0.0 < inner < outer < grid.r_max):
        raise ValueError("need 0 < inner < outer < r_max")
    g = grid.with_points([inner - jump_eps, inner, outer, outer + jump_eps])
    values = ((g.nodes >= inner) & (g.nodes <= outer)).astype(float)
    return RadialProfile(g, values)


def random_bumps(grid, rng, min_bumps=1, max_bumps=4):
    """Sum of 1 to 4 Gaussian bumps with random centers, widths, amplitudes.

    Centers stay within [0, 8] and widths within [0.4, 3], so every sample is
    smooth, strictly positive somewhere, and decayed to nothing long before
    the default r_max.
    """
    count = min_bumps + rng.below(max_bumps - min_bumps + 1)
    r = grid.nodes
    values = np.zeros_like(r)
    for _ in range(count):
        center = rng.uniform_in(0.0, 8.0)
        width = rng.uniform_in(0.4, 3.0)
        amp = rng.uniform_in(0.2, 1.5)
        values = values + amp * np.exp(-(((r - center) / width) ** 2))
    return RadialProfile(grid, values)
