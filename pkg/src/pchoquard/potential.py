"""Newton potential of radial densities and the Coulomb bilinear form.

For radial f the potential I(f) = (f * 1/(4 pi |x|)) collapses by Newton's
theorem to the one-dimensional formula

    A(r) = int_0^inf f(s) s^2 / max(r, s) ds
         = (1/r) int_0^r f(s) s^2 ds + int_r^inf f(s) s ds,

with no 4 pi in front: the 4 pi of the sphere area cancels against the
1/(4 pi) carried by the kernel. Consequently r * A(r) tends to the plain
integral int f s^2 ds = mass/(4 pi) as r grows, and the Coulomb form is
D(f, g) = 4 pi int_0^inf A_f(s) g(s) s^2 ds.

Both A and D are evaluated exactly for the piecewise-linear interpolant of
the sampled density: the two prefix integrands f s^2 and f s are integrated
cell by cell in closed form, and D integrates the resulting piecewise
polynomial against the linear interpolant of g with a per-cell 3-point
Gauss-Legendre rule. This makes A exact for piecewise-linear data (so
indicator densities are handled to round-off once their jump radius is a
grid node), makes D exactly bilinear, and makes D(f, g) agree with D(g, f)
to round-off rather than to quadrature order.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import UndefinedFunctional
from .radial import FOUR_PI, RadialProfile, same_grid

# Gauss-Legendre nodes/weights on [0, 1], exact through degree 5
_GL_T = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
_GL_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def _linear_cell_moments(x, f):
    """Per-cell integrals of f(s) s and f(s) s^2 for piecewise-linear f."""
    x0, x1 = x[:-1], x[1:]
    f0 = f[:-1]
    h = x1 - x0
    slope = (f[1:] - f0) / h
    m1 = f0 * (h * h / 2.0 + x0 * h) + slope * (h ** 3 / 3.0 + x0 * h * h / 2.0)
    m2 = f0 * (h ** 3 / 3.0 + x0 * h * h + x0 * x0 * h) + slope * (
        h ** 4 / 4.0 + 2.0 * x0 * h ** 3 / 3.0 + x0 * x0 * h * h / 2.0
    )
    return m1, m2


def _prefix_arrays(grid, values):
    """Cumulative moments: P2[i] = int_0^{r_i} f s^2 ds, S1[i] = int_0^{r_i} f s ds."""
    m1, m2 = _linear_cell_moments(grid.nodes, values)
    p2 = np.concatenate([[0.0], np.cumsum(m2)])
    s1 = np.concatenate([[0.0], np.cumsum(m1)])
    return p2, s1


@dataclass(frozen=True, eq=False)
class PotentialProfile:
    """A(r) = I(f)(r) on the grid, with the total 3D mass of the density f.

    `source` keeps the density samples so that A can later be evaluated
    exactly between nodes and beyond the support (tail_ratio needs this);
    profiles reloaded from CSV may not have it.
    """

    profile: RadialProfile
    mass: float
    source: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        a = self.profile.values
        scale = float(np.max(np.abs(a), initial=0.0))
        # slack covers interpolation wiggle when A is sampled from an ODE
        # dense-output polynomial rather than computed by the moment formula
        if np.any(np.diff(a) > 1e-10 * scale + 1e-300):
            raise ValueError("potential must be nonincreasing in r")
        if self.mass < 0.0:
            raise ValueError("mass must be nonnegative")

    @property
    def grid(self):
        return self.profile.grid

    @property
    def values(self):
        return self.profile.values

    def at(self, r):
        """A evaluated at arbitrary radii, exactly when the density is known."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        if self.source is not None:
            out = _potential_at(self.grid, self.source, r_arr)
        else:
            interp = PchipInterpolator(self.grid.nodes, self.values, extrapolate=False)
            inside = np.clip(r_arr, 0.0, self.grid.r_max)
            out = np.asarray(interp(inside))
            beyond = r_arr > self.grid.r_max
            if np.any(beyond):
                # exterior field of the truncated density
                out[beyond] = self.mass / (FOUR_PI * r_arr[beyond])
        return out if np.ndim(r) else float(out[0])

    def to_csv(self, path):
        self.profile.to_csv(path, header="r,A")


def newton_potential(f):
    """Potential profile of a nonnegative radial density."""
    values = f.values
    if np.any(values < 0.0):
        raise ValueError(
            "newton_potential requires a nonnegative density; pass u^p, not u"
        )
    p2, s1 = _prefix_arrays(f.grid, values)
    t1 = s1[-1] - s1
    r = f.grid.nodes
    a = np.empty_like(values)
    a[0] = t1[0]
    a[1:] = p2[1:] / r[1:] + t1[1:]
    return PotentialProfile(
        profile=RadialProfile(f.grid, a),
        mass=FOUR_PI * float(p2[-1]),
        source=values,
    )


def _potential_at(grid, f_values, radii):
    """A at arbitrary radii for the piecewise-linear density, in closed form."""
    x = grid.nodes
    p2, s1 = _prefix_arrays(grid, f_values)
    s1_total = s1[-1]
    out = np.empty_like(radii)
    inside = radii <= x[-1]
    ri = radii[inside]
    cell = np.clip(np.searchsorted(x, ri, side="right") - 1, 0, x.size - 2)
    x0 = x[cell]
    t = ri - x0
    f0 = f_values[cell]
    slope = (f_values[cell + 1] - f0) / (x[cell + 1] - x0)
    dp2 = f0 * (t ** 3 / 3.0 + x0 * t * t + x0 * x0 * t) + slope * (
        t ** 4 / 4.0 + 2.0 * x0 * t ** 3 / 3.0 + x0 * x0 * t * t / 2.0
    )
    ds1 = f0 * (t * t / 2.0 + x0 * t) + slope * (t ** 3 / 3.0 + x0 * t * t / 2.0)
    p2_r = p2[cell] + dp2
    s1_r = s1[cell] + ds1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(ri > 0.0, p2_r / np.where(ri > 0.0, ri, 1.0), 0.0) + (
            s1_total - s1_r
        )
    out[inside] = np.where(ri > 0.0, val, s1_total)
    out[~inside] = p2[-1] / radii[~inside]
    return out


def coulomb_form(f, g):
    """D(f, g) = int I(f) g dx for nonnegative radial densities on one grid."""
    if not same_grid(f.grid, g.grid):
        raise ValueError("coulomb_form requires both densities on the same grid")
    fv, gv = f.values, g.values
    if np.any(fv < 0.0) or np.any(gv < 0.0):
        raise ValueError("coulomb_form requires nonnegative densities")
    x = f.grid.nodes
    p2, s1 = _prefix_arrays(f.grid, fv)
    s1_total = s1[-1]
    x0, x1 = x[:-1], x[1:]
    h = x1 - x0
    f0 = fv[:-1]
    cf = (fv[1:] - f0) / h
    g0 = gv[:-1]
    cg = (gv[1:] - g0) / h
    total = 0.0
    for t_unit, w in zip(_GL_T, _GL_W):
        t = h * t_unit
        s = x0 + t
        dp2 = f0 * (t ** 3 / 3.0 + x0 * t * t + x0 * x0 * t) + cf * (
            t ** 4 / 4.0 + 2.0 * x0 * t ** 3 / 3.0 + x0 * x0 * t * t / 2.0
        )
        ds1 = f0 * (t * t / 2.0 + x0 * t) + cf * (t ** 3 / 3.0 + x0 * t * t / 2.0)
        a_s = (p2[:-1] + dp2) / s + (s1_total - (s1[:-1] + ds1))
        g_s = g0 + cg * t
        total += float(np.dot(w * h, g_s * s * s * a_s))
    return FOUR_PI * total


def coulomb_loads(f):
    """Exact node loads L_k = int I(f) phi_k dx for the hat basis phi_k.

    Because the per-cell integrand A_f(s) phi_k(s) s^2 is a polynomial of
    degree at most five, the 3-point Gauss rule reproduces the continuum
    integral of the piecewise-linear density exactly, and by symmetry of D
    the loads are half the derivative of D(f, f) with respect to the node
    values of f.
    """
    fv = f.values
    if np.any(fv < 0.0):
        raise ValueError("coulomb_loads requires a nonnegative density")
    x = f.grid.nodes
    p2, s1 = _prefix_arrays(f.grid, fv)
    s1_total = s1[-1]
    x0 = x[:-1]
    h = np.diff(x)
    f0 = fv[:-1]
    cf = (fv[1:] - f0) / h
    loads = np.zeros_like(fv)
    for t_unit, w in zip(_GL_T, _GL_W):
        t = h * t_unit
        s = x0 + t
        dp2 = f0 * (t ** 3 / 3.0 + x0 * t * t + x0 * x0 * t) + cf * (
            t ** 4 / 4.0 + 2.0 * x0 * t ** 3 / 3.0 + x0 * x0 * t * t / 2.0
        )
        ds1 = f0 * (t * t / 2.0 + x0 * t) + cf * (t ** 3 / 3.0 + x0 * t * t / 2.0)
        a_s = (p2[:-1] + dp2) / s + (s1_total - (s1[:-1] + ds1))
        common = w * h * a_s * s * s
        loads[:-1] += common * (1.0 - t_unit)
        loads[1:] += common * t_unit
    return FOUR_PI * loads


def tail_ratio(pot, r_eval):
    """4 pi r A(r) / mass; tends to 1 from below as r grows."""
    if not (0.0 < r_eval <= pot.grid.r_max):
        raise ValueError("r_eval must lie in (0, r_max]")
    if pot.mass <= 0.0:
        raise UndefinedFunctional("tail ratio undefined for a massless density")
    return FOUR_PI * r_eval * pot.at(r_eval) / pot.mass
