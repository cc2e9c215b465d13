"""Scale-invariant gradient descent on the Weinstein quotient.

This is the second, independent route to the ground state: W_p is constant
along rays c u and dilations, so plain descent with a step length measured in
units of the iterate itself converges to a critical ray from generic positive
seeds; normalize_to_EL then lands on the same normalized profile the shooting
solver produces. Agreement of the two routes is the central cross-check of
the package.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .energy import descent_functional, normalize_to_EL, weinstein
from .errors import NonConvergence, UndefinedFunctional
from .radial import (
    FOUR_PI,
    RadialProfile,
    derivative_values,
    h1_operator_banded,
    volume_integral,
)
from .rng import Xorshift64Star
from .shapes import gaussian, tent

_SIGMA_MAX = 10.0
_MAX_BACKTRACKS = 60
_DILATION_STIFFNESS = 1.0


@dataclass(frozen=True)
class FlowConfig:
    p: float
    seed_shape: str = "gaussian:2"
    step0: float = 0.2
    backtrack: float = 0.5
    growth: float = 1.2
    grad_tol: float = 3e-4
    max_iters: int = 40000
    seed: int = 0
    refine: int = 3

    def __post_init__(self):
        if not (2.0 <= self.p < 5.0):
            raise ValueError("p must lie in [2, 5)")
        if self.step0 <= 0.0:
            raise ValueError("step0 must be positive")
        if not (0.0 < self.backtrack < 1.0):
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.growth < 1.0:
            raise ValueError("growth factor must be at least 1")
        if self.grad_tol <= 0.0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.refine < 1:
            raise ValueError("refine must be a positive integer")
        _parse_shape(self.seed_shape)

    def to_json_dict(self):
        return {
            "p": self.p,
            "seed_shape": self.seed_shape,
            "step0": self.step0,
            "backtrack": self.backtrack,
            "growth": self.growth,
            "grad_tol": self.grad_tol,
            "max_iters": self.max_iters,
            "seed": self.seed,
            "refine": self.refine,
        }


def _parse_shape(text):
    name, _, arg = text.partition(":")
    width = 1.0
    if arg:
        try:
            width = float(arg)
        except ValueError as exc:
            raise ValueError(f"bad shape width in {text!r}") from exc
    if width <= 0.0:
        raise ValueError("shape width must be positive")
    if name == "gaussian":
        return lambda grid: gaussian(grid, width=width)
    if name == "tent":
        return lambda grid: tent(grid, width=width)
    raise ValueError(f"unknown seed shape {name!r} (use gaussian:W or tent:W)")


def seed_profile(cfg, grid):
    return _parse_shape(cfg.seed_shape)(grid)


@dataclass(frozen=True)
class FlowResult:
    profile: RadialProfile
    w_value: float
    grad_sq: float
    lp_mass: float
    coulomb: float
    iterations: int
    converged: bool
    nu: float
    stop_reason: str

    def to_json_dict(self):
        return {
            "w_value": self.w_value,
            "grad_sq": self.grad_sq,
            "lp_mass": self.lp_mass,
            "coulomb": self.coulomb,
            "iterations": self.iterations,
            "converged": self.converged,
            "nu": self.nu,
            "stop_reason": self.stop_reason,
        }


def _inner(grid, f, g):
    return volume_integral(grid, f * g)


def minimize_weinstein(cfg, grid, initial=None):
    """Descend W_p from a positive seed until the gauge-projected slope is flat.

    W_p carries two exact invariances, scaling u -> c u and dilation
    u -> u(lambda .). Scaling is exact for the discrete functional too (every
    term is homogeneous in the node values), so the scaling direction is
    projected out of the step purely for conditioning. Dilation is different:
    the grid breaks it, and the discrete orbit tilts downhill wherever the
    quadrature misjudges a dilated rendering of the profile (tail truncation
    for wide profiles, lost gradient energy for under-resolved narrow ones,
    overestimated Coulomb energy on coarse cells). Near the critical p = 5
    end the quotient flattens transversally as well, and a flow free to move
    along the orbit slides far enough for those leaks to distort the shape
    it converges to. The flow therefore pins the dilation gauge instead of
    projecting it: the RMS radius R(u) of the u^2 mass is exactly invariant
    under scaling and exactly monotone along dilations, a pure gauge
    coordinate, and the descended objective is W_p(u) multiplied by
    (1 + zeta ln^2(R(u)/R0)) with R0 frozen at the initial profile. The
    factor is 1 with zero derivative on the slice R = R0, so the minimizer
    over the slice is untouched; away from the slice it rises steeply enough
    that no quadrature tilt can pay for a slide. normalize_to_EL fixes the
    gauge afterwards.

    The descent direction is built to be downhill on the pinned slice:
    project the penalized differential off the scaling ray (in the volume
    inner product), apply the inverse H^1 operator (M + K)^{-1}, and project
    the result back. The first-order decrease is then
    <dF_perp, (M+K)^{-1} dF_perp> > 0. The H^1 metric is what makes the
    iteration fast: volume-metric steps are capped by the square of the
    finest grid spacing (the Dirichlet Hessian is stiff) and crawl, while
    the preconditioned flow converges in a few hundred steps. The step
    length tau = sigma sqrt(<u,u>/<v,v>) keeps sigma dimensionless, so the
    whole iteration commutes with u -> c u; backtracking halves sigma until
    the objective strictly decreases (W_p itself can wiggle by the penalty
    factor, at most a few parts in 1e6 at convergence). The stopping
    statistic nu = |g_perp| |u| / W_p uses the same projected gradient
    density g_perp, is scale-free, and vanishes exactly on critical points
    of the discrete functional restricted to the slice.
    """
    if initial is None:
        initial = seed_profile(cfg, grid)
    u = np.array(initial.values, dtype=float)
    if np.any(u < 0.0) or np.max(u) <= 0.0:
        raise ValueError("flow seed must be nonnegative and nonzero")
    # reduce to the honest degrees of freedom. The last node is pinned to 0;
    # its covector entry is the constraint multiplier, not a direction. The
    # origin value is slaved to the even-extension parabola through the first
    # two interior nodes: the continuum functional does not depend on u(0) at
    # all (a point has no volume), but the discrete Coulomb form sees the
    # origin value through its first cell while the mass quadrature gives it
    # zero weight, and left free that mismatch makes a spike at the origin
    # drive W_p to 0. Slaving u(0) removes the spurious degree of freedom
    # while keeping the C^1 behavior u'(0) = 0 of regular radial functions.
    x1, x2 = grid.nodes[1], grid.nodes[2]
    c1 = x2 ** 2 / (x2 ** 2 - x1 ** 2)
    c2 = -(x1 ** 2) / (x2 ** 2 - x1 ** 2)
    u[-1] = 0.0
    u[0] = max(c1 * u[1] + c2 * u[2], 0.0)
    band = h1_operator_banded(grid)
    band[1, -1] = 1.0
    band[0, -1] = 0.0
    chol = cholesky_banded(band)
    wvol = FOUR_PI * grid.weights * grid.nodes ** 2
    wvol_r2 = wvol * grid.nodes ** 2
    # the flow descends its own self-consistent W_p discretization; see
    # descent_functional for why the verification quadratures must not be
    # used as the descent objective
    objective = descent_functional(grid, cfg.p, refine=cfg.refine)
    num0 = float(np.dot(wvol_r2, u * u))
    den0 = float(np.dot(wvol, u * u))
    log_r0_sq = np.log(num0 / den0)

    def reduced_covector(profile_values):
        w_full, vec_full = objective(profile_values)
        num = float(np.dot(wvol_r2, profile_values * profile_values))
        den = float(np.dot(wvol, profile_values * profile_values))
        half_l = 0.25 * (np.log(num / den) - log_r0_sq)
        factor = 1.0 + _DILATION_STIFFNESS * (2.0 * half_l) ** 2
        f_val = w_full.value * factor
        pen_scale = w_full.value * _DILATION_STIFFNESS * 4.0 * half_l
        vec_full = factor * vec_full + pen_scale * profile_values * (
            wvol_r2 / num - wvol / den
        )
        vec_full[1] += c1 * vec_full[0]
        vec_full[2] += c2 * vec_full[0]
        vec_full[0] = 0.0
        vec_full[-1] = 0.0
        return w_full, f_val, vec_full

    sigma = cfg.step0
    w, f_obj, vec = reduced_covector(u)
    nu = np.inf
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        uu = _inner(grid, u, u)
        e1 = u / np.sqrt(uu)
        # remove the component of the differential along the scaling ray;
        # what is left is the slice-space gradient
        vec_perp = vec - np.dot(vec, e1) * (wvol * e1)
        # its norm as a density against the volume measure: the origin node
        # has zero weight and the last node is pinned
        gg = np.sum(vec_perp[1:-1] ** 2 / wvol[1:-1])
        nu = np.sqrt(gg) * np.sqrt(uu) / f_obj
        if nu < cfg.grad_tol:
            # report the functional as the rest of the package computes it
            final = weinstein(RadialProfile(grid, u), cfg.p)
            return FlowResult(
                profile=RadialProfile(grid, u),
                w_value=final.value,
                grad_sq=final.grad_sq,
                lp_mass=final.lp_mass,
                coulomb=final.coulomb,
                iterations=iters - 1,
                converged=True,
                nu=float(nu),
                stop_reason="gradient below tolerance",
            )
        v = cho_solve_banded((chol, False), vec_perp)
        v -= _inner(grid, v, e1) * e1
        v[-1] = 0.0
        vv = _inner(grid, v, v)
        if not np.isfinite(vv) or vv <= 0.0:
            raise NonConvergence(
                "degenerate descent direction",
                last_iterate=RadialProfile(grid, u),
                grad_norm=float(nu),
            )
        scale = np.sqrt(uu / vv)
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            cand = np.maximum(u - sigma * scale * v, 0.0)
            cand[-1] = 0.0
            cand[0] = max(c1 * cand[1] + c2 * cand[2], 0.0)
            # an overshoot can overflow the functional (an infinite Coulomb
            # denominator reads as W = 0, which would win the comparison), so
            # a candidate only qualifies with every quantity finite
            ok = np.all(np.isfinite(cand))
            if ok:
                try:
                    w_new, f_new, vec_new = reduced_covector(cand)
                except UndefinedFunctional:
                    ok = False
                else:
                    ok = (
                        np.isfinite(f_new)
                        and np.isfinite(w_new.grad_sq)
                        and np.isfinite(w_new.lp_mass)
                        and np.isfinite(w_new.coulomb)
                        and bool(np.all(np.isfinite(vec_new)))
                    )
            if ok and f_new < f_obj:
                u, w, f_obj, vec = cand, w_new, f_new, vec_new
                sigma = min(sigma * cfg.growth, _SIGMA_MAX)
                accepted = True
                break
            sigma *= cfg.backtrack
        if not accepted:
            raise NonConvergence(
                "line search stalled: no descent direction at current iterate",
                last_iterate=RadialProfile(grid, u),
                grad_norm=float(nu),
            )
    raise NonConvergence(
        f"no convergence within {cfg.max_iters} iterations (nu = {nu:.3e})",
        last_iterate=RadialProfile(grid, u),
        grad_norm=float(nu),
    )


def _perturbed_seed(base_values, rng):
    """Multiplicative noise 1 + 0.2 xi, xi uniform in [-1, 1], then one
    diffusion smoothing pass so the seed stays in the quadrature's comfort
    zone."""
    noise = np.array(
        [1.0 + 0.2 * (2.0 * rng.uniform() - 1.0) for _ in base_values]
    )
    v = base_values * noise
    sm = v.copy()
    sm[1:-1] = 0.25 * (v[:-2] + 2.0 * v[1:-1] + v[2:])
    return sm


def perturbed_restarts(cfg, count, grid):
    """Independent flows from `count` seeded perturbations of the seed shape.

    Returns the list of FlowResults in restart order. Restart i draws its
    noise from stream i of the configured seed, so the battery is
    reproducible run to run and each restart is independent of the others.
    """
    if count < 2:
        raise ValueError("perturbed_restarts needs count >= 2")
    base = seed_profile(cfg, grid).values
    results = []
    failures = []
    for i in range(count):
        rng = Xorshift64Star(cfg.seed, stream=i)
        init = RadialProfile(grid, _perturbed_seed(base, rng))
        try:
            results.append(minimize_weinstein(cfg, grid, initial=init))
        except NonConvergence as exc:
            failures.append((i, exc))
    if failures:
        labels = ", ".join(str(i) for i, _ in failures)
        raise NonConvergence(
            f"restarts failed to converge: {labels}",
            partial=results,
        )
    return results


def normalized_profile(result, p):
    """Map a converged flow iterate to the Euler-Lagrange normalization."""
    return normalize_to_EL(result.profile, p)


_CONTINUATION_BASE = 3.0
_CONTINUATION_STEP = 0.5


def flow_ground_state(cfg, grid, initial=None):
    """Run the flow route and package the normalized result as a GroundState.

    For p above 3 with no explicit initial profile, the route reaches its
    target by continuation: it converges the flow at p = 3 from the
    configured seed shape, then walks p upward in steps of at most 0.5,
    reseeding each stage with the previous stage's minimizer. The ground
    state deforms smoothly in p, so each stage starts inside the basin of the
    resolved minimizer; seeding the sharp high-p core directly from a broad
    analytic shape instead lets the iteration wander through mesh-scale
    profiles whose discretized functional is untrustworthy. The ladder uses
    only flow machinery, keeping the route independent of the shooting
    solver.
    """
    from .checks import config_digest, make_ground_state

    if initial is None and cfg.p > _CONTINUATION_BASE:
        rungs = []
        q = _CONTINUATION_BASE
        while q < cfg.p:
            rungs.append(q)
            q += _CONTINUATION_STEP
        carried = None
        for q in rungs:
            stage = minimize_weinstein(
                replace(cfg, p=q), grid, initial=carried
            )
            carried = stage.profile
        initial = carried
    result = minimize_weinstein(cfg, grid, initial=initial)
    q = normalize_to_EL(result.profile, cfg.p)
    digest = config_digest(
        {
            "config": cfg.to_json_dict(),
            "grid": {"r_max": grid.r_max, "n": grid.n},
        }
    )
    gs = make_ground_state(cfg.p, q, provenance="flow", config_hash=digest)
    return gs, result
