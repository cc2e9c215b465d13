"""Weinstein functional, Hamiltonians, and the first-variation machinery.

The central object is the scale- and dilation-invariant quotient

    W_p(u) = ||grad u||^{2p/(6-p)} ||u||_p^{2p(5-p)/(6-p)} / D(|u|^p, |u|^p),

whose infimum over nonzero radial u is the reciprocal of the best constant in
the Gagliardo-Nirenberg-type inequality controlling the Coulomb term. Its
minimizers, after the rescaling done by `normalize_to_EL`, solve

    -Delta Q + Q^{p-1} = I(Q^p) Q^{p-1}.

Gradients here are densities against the radial volume measure 4 pi s^2 ds:
`weinstein_gradient` returns g with dW_p(u + eps h)/d eps = 4 pi int g h s^2 ds,
which keeps finite-difference checks independent of the grid layout.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import UndefinedFunctional
from .potential import coulomb_form, coulomb_loads, newton_potential
from .radial import (
    FOUR_PI,
    RadialProfile,
    banded_matvec,
    derivative_adjoint,
    derivative_values,
    grid_from_nodes,
    h1_seminorm,
    hat_volume_weights,
    laplacian_values,
    lp_norm,
    same_grid,
    stiffness_banded,
    volume_integral,
)


def _check_p(p):
    if not (2.0 <= p < 5.0):
        raise ValueError("p must lie in [2, 5)")


@dataclass(frozen=True)
class FunctionalValue:
    """A functional value together with the three norms it is built from."""

    value: float
    grad_sq: float
    lp_mass: float
    coulomb: float

    def to_json_dict(self):
        return {
            "value": self.value,
            "grad_sq": self.grad_sq,
            "lp_mass": self.lp_mass,
            "coulomb": self.coulomb,
        }


def _components(u, p):
    grad_sq = h1_seminorm(u) ** 2
    lp_mass = lp_norm(u, p) ** p
    density = RadialProfile(u.grid, np.abs(u.values) ** p)
    coulomb = coulomb_form(density, density)
    return grad_sq, lp_mass, coulomb


def weinstein(u, p):
    """W_p(u) with its components; undefined for u = 0 or vanishing D."""
    _check_p(p)
    grad_sq, lp_mass, coulomb = _components(u, p)
    if coulomb <= 0.0 or lp_mass <= 0.0:
        raise UndefinedFunctional("W_p requires a nonzero profile with D > 0")
    e1 = p / (6.0 - p)
    e2 = 2.0 * (5.0 - p) / (6.0 - p)
    value = grad_sq ** e1 * lp_mass ** e2 / coulomb
    return FunctionalValue(value, grad_sq, lp_mass, coulomb)


def hamiltonian_p(u, p):
    """H_p(u) = 1/2 ||grad u||^2 - 1/(2p) D(|u|^p, |u|^p).

    With p = 2 this is the classical Hartree Hamiltonian (the 1/(2p) and 1/4
    coincide), so no separate operation is needed for that case.
    """
    _check_p(p)
    grad_sq, lp_mass, coulomb = _components(u, p)
    value = 0.5 * grad_sq - coulomb / (2.0 * p)
    return FunctionalValue(value, grad_sq, lp_mass, coulomb)


def substitute_psi(psi, p):
    """The substitution u = psi^{2/p} linking the two Hamiltonian forms.

    It matches L^2 mass of psi with L^p mass of u: ||psi||_2^2 = ||u||_p^p.
    """
    _check_p(p)
    if np.any(psi.values < 0.0):
        raise ValueError("substitute_psi requires psi >= 0 (phases out of scope)")
    return RadialProfile(psi.grid, psi.values ** (2.0 / p))


@dataclass(frozen=True)
class ResidualReport:
    """Euler-Lagrange residual profile and its normalized L^2 size."""

    profile: RadialProfile
    relative_norm: float


def el_residual(q, pot, p):
    """Residual -Delta Q + Q^{p-1} (1 - A) of the Euler-Lagrange equation.

    The reported norm is the radial L^2 norm of the residual divided by the
    radial L^2 norm of Q^{p-1}, so a genuine solution scores near 0 and any
    smooth non-solution scores at order 1.
    """
    _check_p(p)
    if not same_grid(q.grid, pot.grid):
        raise ValueError("profile and potential must share a grid")
    if np.any(q.values < 0.0) or np.max(q.values) <= 0.0:
        raise ValueError("el_residual requires a nonnegative, nonzero Q")
    qv = q.values
    res = -laplacian_values(q.grid, qv) + qv ** (p - 1.0) * (1.0 - pot.values)
    res_norm = np.sqrt(volume_integral(q.grid, res * res))
    ref = np.sqrt(volume_integral(q.grid, qv ** (2.0 * (p - 1.0))))
    return ResidualReport(
        profile=RadialProfile(q.grid, res),
        relative_norm=res_norm / ref,
    )


def weinstein_covector(q, p):
    """W_p and the exact differential of its grid discretization.

    Returns (w, vec) with vec_k = dW_p/du_k for the functional as actually
    computed on the grid: the Dirichlet term differentiates through the
    transpose of the derivative stencil, the mass term through the quadrature
    weights, and the Coulomb term through the exact hat-basis loads of the
    potential. vec pairs with nodal perturbations by a plain dot product, so
    it is the right-hand side for any metric the flow steps in.
    """
    w = weinstein(q, p)
    grid = q.grid
    qv = q.values
    qpow = np.abs(qv) ** (p - 1.0) * np.sign(qv)
    density = RadialProfile(grid, np.abs(qv) ** p)
    loads = coulomb_loads(density)
    wvol = FOUR_PI * grid.weights * grid.nodes ** 2
    du = derivative_values(grid, qv)
    grad_dirichlet = 2.0 * derivative_adjoint(grid, wvol * du)
    e1 = p / (6.0 - p)
    e2 = 2.0 * (5.0 - p) / (6.0 - p)
    vec = w.value * (
        e1 * grad_dirichlet / w.grad_sq
        + e2 * wvol * p * qpow / w.lp_mass
        - 2.0 * p * loads * qpow / w.coulomb
    )
    return w, vec


def descent_functional(grid, p, refine=3):
    """Self-consistent W_p discretization for the gradient flow.

    Returns a callable mapping nodal values u to (w, vec), with w the
    functional report and vec the exact differential dW/du_k.

    The three integrals are tied to one function, the piecewise-linear
    interpolant of u, as closely as the Coulomb machinery allows: the
    Dirichlet term is its exact finite-element energy u K u, and the mass and
    Coulomb terms both integrate the hat interpolant of its density u^p on a
    `refine`-fold subdivision of every cell. The point-quadrature mix used
    for verification is sharper on resolved profiles but inconsistent at the
    mesh scale: a one-cell spike near the origin carries Coulomb energy far
    out of proportion to its mass and Dirichlet weight there, W_p loses
    coercivity, and descent can tunnel below the continuum minimum into
    spike-shaped artifacts. Subdividing the density representation bounds
    the interpolation overshoot of the convex power u^p, restoring
    W >= (continuum minimum) - O(h^2) over every nodal configuration, so the
    flow cannot escape through under-resolved profiles.
    """
    _check_p(p)
    if refine < 1:
        raise ValueError("refine must be a positive integer")
    x = grid.nodes
    n = x.size
    h = np.diff(x)
    fine_nodes = (
        x[:-1, None] + np.outer(h, np.arange(refine) / refine)
    ).ravel()
    fine_nodes = np.append(fine_nodes, x[-1])
    fine = grid_from_nodes(fine_nodes)
    hat_w = hat_volume_weights(fine)
    stiffness = stiffness_banded(grid)
    # left and right interpolation fractions of each fine node in its cell
    frac = np.tile(np.arange(refine) / refine, n - 1)
    frac = np.append(frac, 1.0)
    e1 = p / (6.0 - p)
    e2 = 2.0 * (5.0 - p) / (6.0 - p)

    def evaluate(values):
        uf = np.empty(fine_nodes.size)
        left = np.repeat(values[:-1], refine)
        right = np.repeat(values[1:], refine)
        uf[:-1] = left * (1.0 - frac[:-1]) + right * frac[:-1]
        uf[-1] = values[-1]
        dens = np.abs(uf) ** p
        lp_mass = float(np.sum(hat_w * dens))
        density = RadialProfile(fine, dens)
        loads = coulomb_loads(density)
        coulomb = float(np.dot(loads, dens))
        if coulomb <= 0.0 or lp_mass <= 0.0:
            raise UndefinedFunctional(
                "W_p requires a nonzero profile with D > 0"
            )
        ku = banded_matvec(stiffness, values)
        grad_sq = float(np.dot(values, ku))
        value = grad_sq ** e1 * lp_mass ** e2 / coulomb
        w = FunctionalValue(value, grad_sq, lp_mass, coulomb)
        # chain rule back to the coarse nodes: fine covector against u_f,
        # then the interpolation transpose
        dpow = p * np.abs(uf) ** (p - 1.0) * np.sign(uf)
        zf = (e2 * hat_w / lp_mass - (2.0 * loads) / coulomb) * dpow
        vec = np.zeros(n)
        zc = zf[:-1].reshape(n - 1, refine)
        fr = frac[:-1].reshape(n - 1, refine)
        vec[:-1] += np.sum(zc * (1.0 - fr), axis=1)
        vec[1:] += np.sum(zc * fr, axis=1)
        vec[-1] += zf[-1]
        vec = w.value * (vec + e1 * 2.0 * ku / grad_sq)
        return w, vec

    return evaluate


def weinstein_with_gradient(q, p):
    """W_p and its first variation as a density against the volume measure.

    Divides the exact differential by the volume weights, so directional
    derivatives are volume inner products with the result. The origin node
    carries zero volume weight, so its covector entry would be invisible to
    the pairing; it is folded onto the first two interior nodes through the
    even-extension parabola h(0) = c1 h(x1) + c2 h(x2), which is exact to
    O(h^4) for every perturbation that is smooth and even at the origin (the
    correct class for radial functions on R^3). The origin value of the
    returned density is the continuum limit, for display and residual use.
    """
    w, vec = weinstein_covector(q, p)
    grid = q.grid
    qv = q.values
    qpow = np.abs(qv) ** (p - 1.0) * np.sign(qv)
    density = RadialProfile(grid, np.abs(qv) ** p)
    wvol = FOUR_PI * grid.weights * grid.nodes ** 2
    e1 = p / (6.0 - p)
    e2 = 2.0 * (5.0 - p) / (6.0 - p)
    x1, x2 = grid.nodes[1], grid.nodes[2]
    c1 = x2 ** 2 / (x2 ** 2 - x1 ** 2)
    c2 = -(x1 ** 2) / (x2 ** 2 - x1 ** 2)
    folded = vec.copy()
    folded[1] += c1 * vec[0]
    folded[2] += c2 * vec[0]
    g = np.empty_like(vec)
    g[1:] = folded[1:] / wvol[1:]
    a0 = newton_potential(density).at(0.0)
    lap0 = 6.0 * (qv[1] - qv[0]) / grid.nodes[1] ** 2
    g[0] = w.value * (
        e1 * (-2.0 * lap0) / w.grad_sq
        + e2 * p * qpow[0] / w.lp_mass
        - 2.0 * p * a0 * qpow[0] / w.coulomb
    )
    return w, RadialProfile(grid, g)


def weinstein_gradient(q, p):
    """First variation of W_p as a density against 4 pi s^2 ds.

    g = W_p(Q) [ 2p/(6-p) ||grad Q||^{-2} (-Delta Q)
                 + 2p(5-p)/(6-p) ||Q||_p^{-p} Q^{p-1}
                 - 2p D^{-1} I(Q^p) Q^{p-1} ].
    """
    return weinstein_with_gradient(q, p)[1]


def normalize_to_EL(u, p):
    """Rescale a Weinstein critical point to the Euler-Lagrange normalization.

    For a critical point of W_p the unnormalized variational equation reads
    -Delta u + c1 u^{p-1} = c2' I(u^p) u^{p-1} with multipliers determined by
    the three norms; v(x) = mu u(lambda x) with mu = sqrt(c2)/c1 and
    lambda^2 = mu^{p-2}/c1 then satisfies the clean equation with unit
    coefficients. The map quotients out the scale and dilation invariance, so
    any two members of the same critical ray land on the same profile.
    """
    _check_p(p)
    grad_sq, lp_mass, coulomb = _components(u, p)
    if grad_sq <= 0.0 or lp_mass <= 0.0 or coulomb <= 0.0:
        raise ValueError("normalize_to_EL requires a nonzero profile")
    c1 = (5.0 - p) * grad_sq / lp_mass
    c2 = (6.0 - p) * grad_sq / coulomb
    if c1 <= 0.0 or c2 <= 0.0:
        raise ValueError("normalization multipliers must be positive")
    mu = np.sqrt(c2) / c1
    lam = np.sqrt(mu ** (p - 2.0) / c1)
    interp = PchipInterpolator(u.grid.nodes, u.values, extrapolate=False)
    scaled_r = lam * u.grid.nodes
    vals = np.asarray(interp(np.clip(scaled_r, 0.0, u.grid.r_max)))
    # a contraction (lambda > 1) samples beyond r_max, where a decayed
    # profile contributes nothing; fill with 0
    vals = np.where(scaled_r > u.grid.r_max, 0.0, vals)
    return RadialProfile(u.grid, mu * np.nan_to_num(vals, nan=0.0))
