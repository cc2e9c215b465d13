"""One-parameter shooting for the radial ground-state system.

The Cauchy problem in the variables (Q, B) with B = 1 - A reads

    Q'' + (2/r) Q' = Q^{p-1} B,      B'' + (2/r) B' = Q^p,

with Q(0) = q0, B(0) = b, Q'(0) = B'(0) = 0. Shooting on b separates
trajectories where Q crosses zero from those where Q turns around and grows;
the ground state lives on the separatrix. Since the system carries the
two-parameter symmetry Q -> alpha Q(lambda r), B -> beta B(lambda r), it is
enough to shoot with q0 = 1 and rescale the separatrix solution afterwards so
that B tends to 1 at infinity, which is the physical normalization A -> 0.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .checks import config_digest, make_ground_state
from .errors import SolverFailure
from .radial import DEFAULT_R_MAX, RadialProfile, make_grid

CROSSING = "crossing"
ESCAPING = "escaping"
UNDETERMINED = "undetermined"

# data within sqrt(1e3 * bracket-width) of zero amplitude is dominated by the
# residual bisection error, so the exponential tail model takes over there
_GLUE_NOISE_GAIN = 1e3
# extension headroom beyond lambda * r_max for the final integration
_EXTEND_MARGIN = 1.05


@dataclass(frozen=True)
class ShootingConfig:
    p: float
    q0: float = 1.0
    b_bracket: tuple = (0.1, 1.5)
    r_max: float = DEFAULT_R_MAX
    rtol: float = 1e-10
    atol: float = 1e-10
    bisect_tol: float = 1e-13
    max_bisect: int = 200
    max_expand: int = 60
    crossing_level: float = 0.0
    escape_factor: float = 2.0
    escape_floor: float = 1e-3
    series_step: float = 1e-4

    def __post_init__(self):
        if not (2.0 <= self.p < 5.0):
            raise ValueError("p must lie in [2, 5)")
        if self.q0 < 0.0 or not np.isfinite(self.q0):
            raise ValueError("q0 must be a nonnegative finite amplitude")
        lo, hi = self.b_bracket
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("b_bracket must be a nonempty interval")
        for name in ("rtol", "atol", "bisect_tol"):
            tol = getattr(self, name)
            if not (0.0 < tol <= 1e-2):
                raise ValueError(f"{name} must lie in (0, 1e-2]")
        if self.r_max <= 0.0:
            raise ValueError("r_max must be positive")
        if self.escape_factor <= 1.0:
            raise ValueError("escape_factor must exceed 1")
        if not (0.0 < self.escape_floor < 1.0):
            raise ValueError("escape_floor must lie in (0, 1)")
        if not (0.0 < self.series_step <= 1e-2):
            raise ValueError("series_step must lie in (0, 1e-2]")

    def to_json_dict(self):
        return {
            "p": self.p,
            "q0": self.q0,
            "b_bracket": list(self.b_bracket),
            "r_max": self.r_max,
            "rtol": self.rtol,
            "atol": self.atol,
            "bisect_tol": self.bisect_tol,
            "max_bisect": self.max_bisect,
            "max_expand": self.max_expand,
            "crossing_level": self.crossing_level,
            "escape_factor": self.escape_factor,
            "escape_floor": self.escape_floor,
            "series_step": self.series_step,
        }


@dataclass(frozen=True)
class Trajectory:
    """One integrated trajectory with its dense interpolant.

    The sampled arrays start with the exact origin state (Q'(0) = B'(0) = 0);
    `state` evaluates anywhere on [0, r_end], using the quadratic origin
    series below series_step and the integrator's interpolant above it.
    """

    p: float
    q0: float
    b: float
    r: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    Qp: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    Bp: np.ndarray = field(repr=False)
    r_end: float
    classification: str
    series_step: float
    sol: object = field(repr=False, default=None)

    def state(self, rr):
        rr = np.atleast_1d(np.asarray(rr, dtype=float))
        if np.any(rr < 0.0) or np.any(rr > self.r_end * (1.0 + 1e-9)):
            raise ValueError("state evaluation outside [0, r_end]")
        out = np.empty((4, rr.size))
        small = rr < self.series_step
        if np.any(small):
            s = rr[small]
            qc = self.q0 ** (self.p - 1.0) * self.b if self.q0 > 0.0 else 0.0
            bc = self.q0 ** self.p
            out[0, small] = self.q0 + qc * s * s / 6.0
            out[1, small] = qc * s / 3.0
            out[2, small] = self.b + bc * s * s / 6.0
            out[3, small] = bc * s / 3.0
        big = ~small
        if np.any(big):
            if self.sol is None:
                raise ValueError("trajectory carries no dense interpolant")
            out[:, big] = self.sol(np.minimum(rr[big], self.r_end))
        return out

    def to_csv(self, path):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("r,Q,Qp,B,Bp\n")
            for row in zip(self.r, self.Q, self.Qp, self.B, self.Bp):
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def _rhs(p):
    def rhs(r, y):
        q, qp, b, bp = y
        qpow = np.sign(q) * np.abs(q) ** (p - 1.0)
        return (qp, -2.0 * qp / r + qpow * b, bp, -2.0 * bp / r + np.abs(q) ** p)

    return rhs


def _make_events(cfg):
    def crossing(r, y):
        return y[0] - cfg.crossing_level

    crossing.terminal = True
    crossing.direction = -1.0

    def blowup(r, y):
        return y[0] - cfg.escape_factor * cfg.q0

    blowup.terminal = True
    blowup.direction = 1.0

    def rebound(r, y):
        return y[0] - cfg.escape_floor * cfg.q0

    rebound.terminal = True
    rebound.direction = 1.0

    return (crossing, blowup, rebound)


def integrate_system(cfg, b, r_end=None):
    """Integrate the Cauchy problem at shooting parameter b.

    Starts at series_step with the quadratic origin series (which removes the
    2/r singularity), then runs an adaptive high-order Runge-Kutta method with
    three terminal events: Q falling through the crossing level, Q exceeding
    escape_factor * q0, and Q rising back through escape_floor * q0 after a
    dip (near the separatrix Q' vanishes at tiny amplitudes, so a bare Q' > 0
    test would misclassify).
    """
    if r_end is None:
        r_end = cfg.r_max
    b = float(b)
    if not np.isfinite(b):
        raise ValueError("shooting parameter b must be finite")
    p, q0 = cfg.p, cfg.q0
    if q0 == 0.0:
        r = np.array([0.0, r_end])
        zero = np.zeros(2)
        return Trajectory(
            p=p, q0=q0, b=b,
            r=r, Q=zero.copy(), Qp=zero.copy(),
            B=np.full(2, b), Bp=zero.copy(),
            r_end=float(r_end), classification=CROSSING,
            series_step=cfg.series_step,
        )
    h0 = cfg.series_step
    y0 = (
        q0 + q0 ** (p - 1.0) * b * h0 * h0 / 6.0,
        q0 ** (p - 1.0) * b * h0 / 3.0,
        b + q0 ** p * h0 * h0 / 6.0,
        q0 ** p * h0 / 3.0,
    )
    sol = solve_ivp(
        _rhs(p),
        (h0, r_end),
        y0,
        method="DOP853",
        rtol=cfg.rtol,
        atol=cfg.atol,
        dense_output=True,
        events=_make_events(cfg),
    )
    if sol.status == -1:
        raise SolverFailure(
            f"integration failed at r = {sol.t[-1]:.6g}: {sol.message}",
            last_state=sol.y[:, -1].tolist(),
        )
    if sol.status == 1:
        label = CROSSING if sol.t_events[0].size else ESCAPING
    else:
        label = UNDETERMINED
    r = np.concatenate(([0.0], sol.t))
    ys = np.concatenate(
        (np.array([[q0], [0.0], [b], [0.0]]), sol.y), axis=1
    )
    return Trajectory(
        p=p, q0=q0, b=b,
        r=r, Q=ys[0], Qp=ys[1], B=ys[2], Bp=ys[3],
        r_end=float(sol.t[-1]), classification=label,
        series_step=cfg.series_step, sol=sol.sol,
    )


def classify(traj, cfg):
    """Classification recomputed from the sampled trajectory data."""
    if np.min(traj.Q) <= cfg.crossing_level:
        return CROSSING
    q_end, qp_end = traj.Q[-1], traj.Qp[-1]
    if q_end >= cfg.escape_factor * cfg.q0 * (1.0 - 1e-12):
        return ESCAPING
    if qp_end > 0.0 and q_end >= cfg.escape_floor * cfg.q0 * (1.0 - 1e-12):
        return ESCAPING
    return UNDETERMINED

def _side(traj, cfg):
    """Which side of the separatrix a trajectory lies on: 'low' or 'high'.

    Low means crossing-like (b too negative), high means escaping-like. A
    trajectory still undetermined at its endpoint is assigned by its terminal
    logarithmic slope: on the low side Q already decays faster than the
    separatrix solution, on the high side slower. For p > 2 the separatrix
    decay is the power r^{-gamma} with gamma = 2/(p-2); for p = 2 it is
    exponential at rate sqrt(B_end).
    """
    if traj.classification == CROSSING:
        return "low"
    if traj.classification == ESCAPING:
        return "high"
    q_end, qp_end = traj.Q[-1], traj.Qp[-1]
    if q_end <= 0.0:
        return "low"
    if cfg.p > 2.0:
        gamma = 2.0 / (cfg.p - 2.0)
        return "low" if traj.r_end * qp_end / q_end < -gamma else "high"
    kappa = np.sqrt(max(traj.B[-1], 1e-12))
    return "low" if qp_end / q_end + 1.0 / traj.r_end < -kappa else "high"


@dataclass(frozen=True)
class TailModel:
    """Analytic continuation of (Q, B) beyond the trusted data range.

    Q continues as (C/r) e^{-kappa r} in the exponential regime (p = 2) or as
    C r^{-sigma} in the power regime (p > 2), matching value and slope at the
    glue radius; B continues as its exterior Newton closure
    B_loc - c/r with c = B'(r_g) r_g^2, also value- and slope-matched.
    """

    r_glue: float
    q_value: float
    q_slope: float
    b_value: float
    b_slope: float
    kind: str

    def q_at(self, rr):
        rr = np.asarray(rr, dtype=float)
        if self.kind == "exponential":
            kappa = -(self.q_slope / self.q_value + 1.0 / self.r_glue)
            return (
                self.q_value
                * (self.r_glue / rr)
                * np.exp(kappa * (self.r_glue - rr))
            )
        sigma = -self.r_glue * self.q_slope / self.q_value
        return self.q_value * (rr / self.r_glue) ** (-sigma)

    def b_at(self, rr):
        rr = np.asarray(rr, dtype=float)
        c = self.b_slope * self.r_glue ** 2
        return self.b_value + c * (1.0 / self.r_glue - 1.0 / rr)


def _build_tail_model(traj, bracket_width):
    """Choose the glue radius and freeze the tail continuation there.

    The glue point is the outermost sample that still looks like the true
    decaying solution: amplitude above the bisection noise floor and strictly
    decreasing, and for p > 2 with a logarithmic slope inside a sane band
    around -gamma. Beyond it the trajectory is dominated by the leftover
    separatrix error and is discarded in favor of the model.
    """
    n_scan = 4001
    r_hi = traj.r_end * (1.0 - 1e-9)
    r_lo = min(max(0.5, r_hi / 200.0), 0.5 * r_hi)
    rs = np.geomspace(r_lo, r_hi, n_scan)
    q, qp, _, _ = traj.state(rs)
    ok = (qp < 0.0) & (q > 0.0)
    if traj.p == 2.0:
        floor = np.sqrt(_GLUE_NOISE_GAIN * max(bracket_width, 1e-300)) * traj.q0
        ok &= q > floor
        kind = "exponential"
    else:
        gamma = 2.0 / (traj.p - 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(q > 0.0, rs * qp / np.where(q > 0.0, q, 1.0), 0.0)
        ok &= (slope > -(1.5 * gamma + 1.0)) & (slope < -0.4 * gamma)
        kind = "power"
    if not np.any(ok):
        raise SolverFailure(
            "no trustworthy glue point on the separatrix trajectory"
        )
    idx = int(np.max(np.nonzero(ok)[0]))
    r_glue = float(rs[idx])
    qg, qpg, bg, bpg = (float(v) for v in traj.state(r_glue)[:, 0])
    return TailModel(
        r_glue=r_glue,
        q_value=qg,
        q_slope=qpg,
        b_value=bg,
        b_slope=bpg,
        kind=kind,
    )


def fit_b_infinity(traj, r_hi=None):
    """B_infinity of a trajectory from its exterior closure on a trailing decade.

    Integrating (r^2 B')' = r^2 Q^p once gives the identity
    B_inf = B(r) + r B'(r) + T(r) with T(r) = int_r^inf s Q^p ds: the r B'
    term carries the entire interior source exactly, and only the exterior
    tail T needs a model, evaluated per sample from the local decay shape of
    Q. A plain least-squares fit of B_inf - c/r is biased wherever the
    window still holds source mass, which ruins the exponential-tail case;
    the closure is exact there. The median over the window discards the
    samples where the local tail shape is not yet (or no longer) clean.
    """
    if r_hi is None:
        r_hi = traj.r_end * (1.0 - 1e-9)
    r_lo = r_hi / 10.0
    rs = np.linspace(r_lo, r_hi, 256)
    q, qp, b, bp = traj.state(rs)
    closure = b + rs * bp
    p = traj.p
    tail_term = np.zeros_like(rs)
    positive = q > 0.0
    qs = np.where(positive, q, 1.0)
    if p == 2.0:
        kappa = -(qp / qs + 1.0 / rs)
        valid = positive & (kappa > 0.0)
        tail_term[valid] = (q[valid] ** p * rs[valid] / (p * kappa[valid]))
    else:
        sigma = -rs * qp / qs
        valid = positive & (p * sigma > 2.0)
        tail_term[valid] = q[valid] ** p * rs[valid] ** 2 / (
            p * sigma[valid] - 2.0
        )
    b_inf = float(np.median(closure + tail_term))
    c = float(np.median(rs * rs * bp))
    if b_inf <= 0.0:
        raise SolverFailure(
            f"trajectory has no positive B limit (closure gave {b_inf:.6g})"
        )
    return b_inf, c


def rescale_to_normalized(traj, p, grid=None, bracket_width=0.0):
    """Map a separatrix trajectory to the normalized ground-state pair.

    With alpha = beta = 1/B_inf and lambda = B_inf^{-(p-1)/2}, the pair
    Q~(r) = Q(lambda r)/B_inf, B~(r) = B(lambda r)/B_inf solves the same
    system with B~ -> 1, i.e. A~ = 1 - B~ -> 0. Radii beyond the glue point
    are evaluated through the frozen tail model.
    """
    if grid is None:
        grid = make_grid()
    tail = _build_tail_model(traj, bracket_width)
    b_inf, _ = fit_b_infinity(traj)
    lam = b_inf ** (-(p - 1.0) / 2.0)
    rr = lam * grid.nodes
    q_vals = np.empty_like(rr)
    a_vals = np.empty_like(rr)
    inside = rr <= tail.r_glue
    if np.any(inside):
        q_in, _, b_in, _ = traj.state(rr[inside])
        q_vals[inside] = q_in / b_inf
        a_vals[inside] = 1.0 - b_in / b_inf
    outside = ~inside
    if np.any(outside):
        q_vals[outside] = tail.q_at(rr[outside]) / b_inf
        a_vals[outside] = 1.0 - tail.b_at(rr[outside]) / b_inf
    q_prof = RadialProfile(grid, q_vals)
    a_prof = RadialProfile(grid, a_vals)
    return q_prof, a_prof, {"b_infinity": b_inf, "lambda": lam, "tail": tail}


@dataclass(frozen=True)
class ShootingOutcome:
    config: ShootingConfig
    b_star: float
    bracket: tuple
    bracket_width: float
    b_infinity: float
    lam: float
    glue_radius: float
    tail_kind: str
    n_bisect: int
    n_expand: int
    probes: tuple
    monotone_ok: bool
    trajectory: Trajectory = field(repr=False)
    ground_state: object = field(repr=False, default=None)

    def to_json_dict(self):
        return {
            "p": self.config.p,
            "q0": self.config.q0,
            "b_star": self.b_star,
            "bracket": list(self.bracket),
            "bracket_width": self.bracket_width,
            "B_infinity": self.b_infinity,
            "lambda": self.lam,
            "glue_radius": self.glue_radius,
            "tail_kind": self.tail_kind,
            "n_bisect": self.n_bisect,
            "n_expand": self.n_expand,
            "monotone_ok": self.monotone_ok,
            "tolerances": {
                "rtol": self.config.rtol,
                "atol": self.config.atol,
                "bisect_tol": self.config.bisect_tol,
            },
            "probes": [[b, label] for b, label in self.probes],
        }


def _probes_monotone(probes):
    """True when no crossing probe sits above any escaping probe."""
    crossings = [b for b, label in probes if label == CROSSING]
    escapes = [b for b, label in probes if label == ESCAPING]
    if not crossings or not escapes:
        return True
    return max(crossings) < min(escapes)


def find_separatrix(cfg, grid=None):
    """Bracket, bisect, extend, and rescale: the full shooting pipeline.

    Returns a ShootingOutcome whose ground_state lives on `grid` (the default
    grid for cfg.r_max when omitted). The final trajectory is re-integrated
    out to lambda * r_max plus margin so the rescaled profile samples real
    data wherever possible; the monotone_ok flag records whether the probe
    classifications were consistent with a single separatrix, which the
    bisection assumes but the underlying theory does not assert.
    """
    if cfg.q0 <= 0.0:
        raise SolverFailure("shooting requires a positive initial amplitude")
    if grid is None:
        grid = make_grid(r_max=cfg.r_max)
    if abs(grid.r_max - cfg.r_max) > 1e-9 * cfg.r_max:
        raise ValueError("grid.r_max must match cfg.r_max")

    probes = []
    best = {"traj": None}

    def run(b):
        traj = integrate_system(cfg, b)
        probes.append((b, traj.classification))
        prev = best["traj"]
        better = prev is None or (
            (traj.classification == UNDETERMINED, traj.r_end)
            >= (prev.classification == UNDETERMINED, prev.r_end)
        )
        if better:
            best["traj"] = traj
        return traj

    lo, hi = (float(b) for b in cfg.b_bracket)
    t_lo, t_hi = run(lo), run(hi)
    n_expand = 0
    while _side(t_lo, cfg) == _side(t_hi, cfg):
        if n_expand >= cfg.max_expand:
            raise SolverFailure(
                "no separatrix: bracket expansion exhausted "
                f"after {n_expand} doublings on [{lo:.6g}, {hi:.6g}]"
            )
        width = hi - lo
        if _side(t_lo, cfg) == "high":
            lo = hi - 2.0 * width
            t_lo = run(lo)
        else:
            hi = lo + 2.0 * width
            t_hi = run(hi)
        n_expand += 1
    if _side(t_lo, cfg) != "low":
        raise SolverFailure(
            "bracket sides inverted: crossing above escaping; "
            "classification is not monotone near this configuration"
        )

    n_bisect = 0
    while hi - lo > cfg.bisect_tol and n_bisect < cfg.max_bisect:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        t_mid = run(mid)
        if _side(t_mid, cfg) == "low":
            lo = mid
        else:
            hi = mid
        n_bisect += 1
    b_star = 0.5 * (lo + hi)
    width = hi - lo

    prefit = best["traj"]
    b_inf_guess, _ = fit_b_infinity(prefit)
    lam_guess = b_inf_guess ** (-(cfg.p - 1.0) / 2.0)
    r_ext = max(1.0, lam_guess) * cfg.r_max * _EXTEND_MARGIN
    final = integrate_system(cfg, b_star, r_end=r_ext)

    q_prof, a_prof, extra = rescale_to_normalized(
        final, cfg.p, grid, bracket_width=width
    )
    digest = config_digest(
        {
            "config": cfg.to_json_dict(),
            "grid": {"r_max": grid.r_max, "n": grid.n},
        }
    )
    gs = make_ground_state(
        cfg.p, q_prof, a_prof, provenance="shooting", config_hash=digest
    )
    tail = extra["tail"]
    return ShootingOutcome(
        config=cfg,
        b_star=b_star,
        bracket=(lo, hi),
        bracket_width=width,
        b_infinity=extra["b_infinity"],
        lam=extra["lambda"],
        glue_radius=tail.r_glue,
        tail_kind=tail.kind,
        n_bisect=n_bisect,
        n_expand=n_expand,
        probes=tuple(probes),
        monotone_ok=_probes_monotone(probes),
        trajectory=final,
        ground_state=gs,
    )


def solve_ground_state(p, grid=None, **overrides):
    """Convenience wrapper: shooting solve of the ground state for one p."""
    if grid is not None:
        overrides.setdefault("r_max", grid.r_max)
    cfg = ShootingConfig(p=float(p), **overrides)
    return find_separatrix(cfg, grid=grid)
