"""A posteriori numerical checks on computed manifolds.

The invariance error of a solution is re-evaluated from the full model
(pointwise, in extended precision), its decay order in x is fitted on a
log-log grid and compared against the declared targets; the reduced
dynamics is checked against the parabolic iteration bound on a sector; and
candidate points are classified against the computed stable set.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolated, EscapedSector, WindowTooWide
from .cohomology import ManifoldSolution
from .dynamics import iterate_reduced

__all__ = [
    "OrderReport",
    "SectorReport",
    "MembershipReport",
    "fit_error_orders",
    "fit_error_orders_auto",
    "sector_decay_check",
    "stable_set_membership",
]

_CDT = np.clongdouble


@dataclass
class OrderReport:
    """Fitted decay exponents of the invariance error vs the targets."""

    fitted_slope: dict[str, float]
    target_order: dict[str, int]
    x_window: tuple[float, float]
    theta_samples: int
    slope_slack: float
    passes: dict[str, bool] = field(default_factory=dict)
    samples: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if not self.passes:
            self.passes = {
                c: self.fitted_slope[c] >= self.target_order[c] - self.slope_slack
                for c in self.fitted_slope
            }

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())

    def rows(self):
        """(component, slope, target, pass) records for structured output."""
        return [
            (c, self.fitted_slope[c], self.target_order[c], self.passes[c])
            for c in sorted(self.fitted_slope)
        ]


def _theta_grid(d: int, n: int):
    if d == 0:
        return [()]
    axes = [np.arange(n) / n for _ in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return [tuple(p) for p in pts]


def _map_residual_at(skew, K, R, x, th):
    """Components of F(K(x, th)) - K(R(x, th)) in extended precision."""
    kx, ky, kth = K.evaluate(x, th, dtype=_CDT)
    fx, fy, fth = skew.evaluate(kx, ky, kth, dtype=_CDT)
    rx, _, rth = R.evaluate(x, th, dtype=_CDT)
    gx, gy, gth = K.evaluate(rx, rth, dtype=_CDT)
    ex = abs(complex(fx - gx))
    ey = max((abs(complex(u - v)) for u, v in zip(fy, gy)), default=0.0)
    eth = max((abs(complex(u - v)) for u, v in zip(fth, gth)), default=0.0)
    mag = abs(complex(fx)) + abs(complex(gx)) + 1.0
    return ex, ey, eth, mag


def _flow_residual_at(model, fld, sol, K, x, th):
    """Components of X(K) - DK Y - dK/dt at a point, extended precision."""
    full = tuple(model.freq.omega) + tuple(model.freq.nu)
    kx, ky, kth = K.evaluate(x, th, dtype=_CDT)
    Xx = fld.x.evaluate(kx, ky, kth, dtype=_CDT)
    Xy = [j.evaluate(kx, ky, kth, dtype=_CDT) for j in fld.y]
    Xdev = [fld.theta_dev[r].evaluate(kx, ky, kth, dtype=_CDT) for r in range(model.d)]
    yx = sol.reduced.x_value(_CDT(x))
    ydev = []
    for r in range(model.d):
        acc = _CDT(0)
        for order, vec in sol.reduced.theta_terms.items():
            if vec[r]:
                acc = acc + _CDT(vec[r]) * _CDT(x) ** order
        ydev.append(acc)

    def transported(jet):
        v = jet.derivative_x().evaluate(x, (), th, dtype=_CDT) * yx
        v = v + jet.directional_theta(full).evaluate(x, (), th, dtype=_CDT)
        for r in range(model.d):
            if ydev[r] != 0:
                v = v + jet.derivative_theta(r).evaluate(x, (), th, dtype=_CDT) * ydev[r]
        return v

    ex = abs(complex(Xx - transported(K.x)))
    ey = max(
        (abs(complex(Xy[i] - transported(K.y[i]))) for i in range(model.m)),
        default=0.0,
    )
    eth = 0.0
    for r in range(model.d):
        eth = max(eth, abs(complex(Xdev[r] - ydev[r] - transported(K.theta_dev[r]))))
    mag = abs(complex(Xx)) + abs(complex(yx)) + 1.0
    return ex, ey, eth, mag


def fit_error_orders(
    model,
    sol: ManifoldSolution,
    x_window: tuple[float, float] = (1e-3, 1e-2),
    n_samples: int = 24,
    theta_samples: int = 16,
    slope_slack: float = 0.1,
) -> OrderReport:
    """Fit the decay order of the full-model invariance residual.

    The residual is evaluated from the model itself (not the error jet),
    which also catches truncation and assembly bugs, at ``n_samples``
    log-spaced x values and a theta grid.  Raises :class:`WindowTooWide`
    when the residual sits at the rounding floor across the window.
    """
    j, N, P = sol.j, sol.N, sol.P
    targets = {"x": j + N, "y": j + N, "theta": min(j + P - 1, j + N - 1)}
    if sol.m == 0:
        targets.pop("y")
    lo, hi = x_window
    if not (0 < lo < hi):
        raise ValueError("x_window must satisfy 0 < lo < hi")
    xs = np.exp(np.linspace(math.log(lo), math.log(hi), n_samples))
    deg = j + N + 1
    K = sol.param(deg)
    thetas = _theta_grid(sol.d, theta_samples)
    eps = float(np.finfo(np.longdouble).eps)

    if model.kind == "map":
        skew = model.as_skew(deg)
        R = sol.reduced.as_param(deg, sol.dim, sol.order_cap, n_angles=sol.dim)
    else:
        fld = model.as_field(deg)
        R = None

    rows = []
    for x in xs:
        worst = {"x": 0.0, "y": 0.0, "theta": 0.0}
        floor = 0.0
        for th in thetas:
            if model.kind == "map":
                ex, ey, eth, mag = _map_residual_at(skew, K, R, x, th)
            else:
                ex, ey, eth, mag = _flow_residual_at(model, fld, sol, K, x, th)
            worst["x"] = max(worst["x"], ex)
            worst["y"] = max(worst["y"], ey)
            worst["theta"] = max(worst["theta"], eth)
            floor = max(floor, 60.0 * eps * mag)
        rows.append(
            {
                "x": float(x),
                "floor": float(floor),
                "e_x": float(worst["x"]),
                "e_y": float(worst["y"]),
                "e_theta": float(worst["theta"]),
            }
        )

    # a component whose error jet vanishes identically and whose numeric
    # residual sits at the floor everywhere satisfies any decay order
    from .cohomology import invariance_error

    ejet = invariance_error(model, sol, deg=deg)
    jet_norm = {
        "x": ejet.ex.norm(),
        "y": max((j.norm() for j in ejet.ey), default=0.0),
        "theta": max((j.norm() for j in ejet.eth), default=0.0),
    }
    jet_scale = max(model.coefficient_scale(), 1.0)

    slopes = {}
    for comp in targets:
        pts = [(r["x"], r["e_" + comp]) for r in rows if r["e_" + comp] > r["floor"]]
        if not pts and jet_norm[comp] <= 1e-13 * jet_scale:
            slopes[comp] = math.inf
            continue
        if len(pts) < max(4, n_samples // 3):
            raise WindowTooWide(
                f"component {comp}: residual at rounding floor across most of "
                f"[{lo:g}, {hi:g}]; shrink or shift the window upward"
            )
        lx = np.log([p[0] for p in pts])
        ly = np.log([p[1] for p in pts])
        slope = float(np.polyfit(lx, ly, 1)[0])
        slopes[comp] = slope

    return OrderReport(
        fitted_slope=slopes,
        target_order=targets,
        x_window=(float(lo), float(hi)),
        theta_samples=theta_samples,
        slope_slack=slope_slack,
        samples=rows,
    )


def fit_error_orders_auto(model, sol, x_window=(1e-3, 1e-2), max_shrinks: int = 4, **kw):
    """Retry :func:`fit_error_orders`, raising the lower edge on WindowTooWide."""
    lo, hi = x_window
    last = None
    for _ in range(max_shrinks + 1):
        try:
            return fit_error_orders(model, sol, (lo, hi), **kw)
        except WindowTooWide as e:
            last = e
            lo = lo * 2.5
            if lo >= hi / 2:
                break
    raise last


# ------------------------------------------------------------ sector bound


@dataclass
class SectorReport:
    steps: int
    eta: float
    beta: float
    rho: float
    min_slack: float
    max_slack: float
    final_abs: float
    ok: bool


def sector_decay_check(
    reduced,
    x0: complex,
    k_steps: int,
    eta: float,
    beta: float = math.pi / 3,
    rho: float = 0.1,
) -> SectorReport:
    """Assert the parabolic iteration bound along the reduced dynamics.

    Checks |R^k(x0)| <= |x0| / (1 + k (a-eta)(N-1) |x0|^(N-1))^(1/(N-1)) at
    every step and that iterates stay in the sector S(beta, rho); raises
    :class:`BoundViolated` / :class:`EscapedSector` with the failing step.
    """
    a = reduced.a_bar
    N = reduced.N
    if not (0.0 < eta < a):
        raise ValueError("need 0 < eta < a_bar")
    x0 = complex(x0)
    if abs(x0) > rho or abs(cmath.phase(x0)) >= beta / 2:
        raise EscapedSector(0, x0)
    alpha = 1.0 / (N - 1)
    r0 = abs(x0)
    iterates = iterate_reduced(reduced, x0, k_steps)
    min_slack = math.inf
    max_slack = -math.inf
    for k, xk in enumerate(iterates):
        bound = r0 / (1.0 + k * (a - eta) * (N - 1) * r0 ** (N - 1)) ** alpha
        slack = bound - abs(xk)
        if slack < 0:
            raise BoundViolated(k, abs(xk), bound)
        if abs(xk) > rho or abs(cmath.phase(xk)) >= beta / 2:
            raise EscapedSector(k, xk)
        min_slack = min(min_slack, slack)
        max_slack = max(max_slack, slack)
    return SectorReport(
        steps=k_steps, eta=eta, beta=beta, rho=rho,
        min_slack=float(min_slack), max_slack=float(max_slack),
        final_abs=float(abs(iterates[-1])), ok=True,
    )


# ------------------------------------------------------- stable set checks


@dataclass
class MembershipReport:
    stays: bool
    left_at: int | None
    distances: list[float]
    fiber_x: list[float]

    @property
    def initial_distance(self) -> float:
        return self.distances[0] if self.distances else math.nan


def _project_fiber(K, x_target: float, th, u_hint: float) -> float:
    """Solve K_x(u, th) = x_target for u by a guarded Newton iteration."""
    u = max(u_hint, 1e-14)
    for _ in range(60):
        f = K.x.evaluate(u, (), th).real - x_target
        df = K.x.derivative_x().evaluate(u, (), th).real
        step = f / df
        u_new = u - step
        if u_new <= 0:
            u_new = u / 2.0
        if abs(u_new - u) <= 1e-15 * max(1.0, abs(u)):
            return u_new
        u = u_new
    return u


def stable_set_membership(model, point, sol: ManifoldSolution, horizon: int,
                          rho: float = 0.1) -> MembershipReport:
    """Iterate the full map and measure distance to the computed manifold.

    The distance uses the x-fiber projection: find (u, theta_base) with
    K_x(u, theta_base) = x and K_theta(u, theta_base) = theta (the latter by
    a short fixed-point iteration, since the theta deviation is O(u)), then
    compare the y components against K_y(u, theta_base).
    """
    from .dynamics import iterate_map

    deg = sol.j + sol.N + 1
    K = sol.param(deg)
    orbit = iterate_map(model, point, horizon, domain_radius=rho, require_positive_x=True)
    dists = []
    fibs = []
    for row in orbit.states:
        x = row[0]
        y = row[1 : 1 + sol.m]
        th_pt = tuple(row[1 + sol.m : 1 + sol.m + sol.d])
        base = list(th_pt)
        u = max(x, 1e-14)
        for _ in range(30):
            u = _project_fiber(K, x, tuple(base), u)
            new_base = []
            shift = 0.0
            for r in range(sol.d):
                devr = K.theta_dev[r].evaluate(u, (), tuple(base)).real
                nb = th_pt[r] - devr
                shift = max(shift, abs(nb - base[r]))
                new_base.append(nb)
            base = new_base
            if shift < 1e-14:
                break
        kx, ky, kth = K.evaluate(u, tuple(base))
        dy2 = sum((float(y[i]) - ky[i].real) ** 2 for i in range(sol.m))
        dth2 = 0.0
        for r in range(sol.d):
            delta = (float(th_pt[r]) - kth[r].real + 0.5) % 1.0 - 0.5
            dth2 += delta ** 2
        dists.append(math.sqrt(dy2 + dth2))
        fibs.append(u)
    return MembershipReport(
        stays=orbit.early_stop is None,
        left_at=orbit.early_stop,
        distances=dists,
        fiber_x=fibs,
    )
