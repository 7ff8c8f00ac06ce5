"""Order-by-order construction of the parabolic manifold parameterization.

The engine solves the semiconjugacy F o K = K o R (maps) or
X o K = DK Y + dK/dt (flows) one order at a time.  At step j the previous
invariance error E is computed exactly at jet level, its leading
coefficients are read off, and the three cohomological blocks are solved:

* y-block:      Kbar_y^j   = -(Bbar + j abar)^(-1) avg(E_y),
                Ktil_y     = SD(Bosc Kbar_y + osc(E_y));
* theta-block:  P = N uses the free Kbar_theta^(j-1) to kill the average,
                P < N absorbs it into a constant correction of R_theta;
* x-block:      psi collects the known terms; at j = N its average becomes
                the invariant b (the x^(2N-1) coefficient of R), otherwise
                it determines Kbar_x^j; the oscillatory part is solved by SD.

After every step the full error is recomputed and its vanishing orders are
asserted; a failure raises OrderRegression rather than continuing with a
corrupted expansion.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import (
    HypothesisViolation,
    OrderRegression,
    SingularBlock,
)
from .fourier import FourierSeries, sd_solve_flow, sd_solve_map
from .jet import (
    Jet,
    ParamMap,
    compose_param_param,
    compose_skew_param,
    jet_compose,
)
from .model import FlowModel, MapModel, ReducedField, ReducedMap

__all__ = [
    "FreeChoicePolicy",
    "ManifoldSolution",
    "ErrorJet",
    "SolveResult",
    "base_step",
    "extend_order",
    "extend_order_flow",
    "invariance_error",
    "solve_manifold",
    "conjugate_normal_form",
]


@dataclass
class FreeChoicePolicy:
    """Values for the constants the cohomological equations leave free.

    ``kbar_x_at_N`` fixes Kbar_x^N (free exactly at step j = N);
    ``kbar_theta`` maps a step j to the free Kbar_theta^(j-1) vector used
    when P < N.  Zeros keep the expansion minimal and deterministic.
    """

    kbar_x_at_N: float = 0.0
    kbar_theta: dict[int, tuple[float, ...]] = field(default_factory=dict)

    def theta_choice(self, j: int, d: int) -> tuple[float, ...]:
        return tuple(self.kbar_theta.get(j, (0.0,) * d))


@dataclass
class ErrorJet:
    """Invariance error split into components, with declared vanishing orders."""

    ex: Jet
    ey: tuple[Jet, ...]
    eth: tuple[Jet, ...]
    declared: tuple[int, int, int]

    def lead_x(self, order: int) -> FourierSeries:
        return self.ex.x_coeff(order)

    def lead_y(self, order: int) -> list[FourierSeries]:
        return [j.x_coeff(order) for j in self.ey]

    def lead_theta(self, order: int) -> list[FourierSeries]:
        return [j.x_coeff(order) for j in self.eth]

    def below_order_norms(self) -> dict[str, float]:
        """Largest coefficient norm sitting below each declared order."""
        dx, dy, dth = self.declared
        out = {"x": 0.0, "y": 0.0, "theta": 0.0}
        for l in range(dx):
            out["x"] = max(out["x"], self.ex.x_coeff(l).strip_norm())
        for j in self.ey:
            for l in range(dy):
                out["y"] = max(out["y"], j.x_coeff(l).strip_norm())
        for j in self.eth:
            for l in range(dth):
                out["theta"] = max(out["theta"], j.x_coeff(l).strip_norm())
        return out

    def order_violations(self, tol: float) -> list[tuple[str, int, float]]:
        dx, dy, dth = self.declared
        bad = []
        for l in range(dx):
            n = self.ex.x_coeff(l).strip_norm()
            if n > tol:
                bad.append(("x", l, n))
        for j in self.ey:
            for l in range(dy):
                n = j.x_coeff(l).strip_norm()
                if n > tol:
                    bad.append(("y", l, n))
        for j in self.eth:
            for l in range(dth):
                n = j.x_coeff(l).strip_norm()
                if n > tol:
                    bad.append(("theta", l, n))
        return bad

    def sample(self, xs, thetas, dtype=complex):
        """Numeric values of the error jet on a grid, max over components."""
        rows = []
        for x in xs:
            worst = 0.0
            for th in thetas:
                vx = abs(self.ex.evaluate(x, (), th, dtype=dtype))
                vy = max((abs(j.evaluate(x, (), th, dtype=dtype)) for j in self.ey), default=0.0)
                vt = max((abs(j.evaluate(x, (), th, dtype=dtype)) for j in self.eth), default=0.0)
                worst = max(worst, vx, vy, vt)
            rows.append(worst)
        return rows


@dataclass
class ManifoldSolution:
    """The split coefficients of K^(j) plus the reduced dynamics.

    Averaged coefficients are stored as reals (vectors for y/theta), the
    oscillatory ones as FourierSeries keyed by their x-order, matching the
    slot structure of the expansion:

        K_x     = x + sum Kbar_x^l x^l + sum Ktil_x^(l+N-1) x^(l+N-1)
        K_y     =     sum Kbar_y^l x^l + sum Ktil_y^(l+N-1) x^(l+N-1)
        K_theta = th + sum Kbar_th^l x^l + sum Ktil_th^(l+P-1) x^(l+P-1)
    """

    j: int
    N: int
    P: int
    m: int
    d: int
    dim: int
    order_cap: int
    kind: str
    kbar_x: dict[int, float] = field(default_factory=dict)
    ktil_x: dict[int, FourierSeries] = field(default_factory=dict)
    kbar_y: dict[int, tuple[float, ...]] = field(default_factory=dict)
    ktil_y: dict[int, list[FourierSeries]] = field(default_factory=dict)
    kbar_th: dict[int, tuple[float, ...]] = field(default_factory=dict)
    ktil_th: dict[int, list[FourierSeries]] = field(default_factory=dict)
    reduced: ReducedMap | ReducedField | None = None
    free_choices: dict = field(default_factory=dict)

    def copy_shallow(self) -> "ManifoldSolution":
        red = self.reduced
        if red is not None:
            red = replace(red, theta_terms=dict(red.theta_terms))
        return ManifoldSolution(
            j=self.j, N=self.N, P=self.P, m=self.m, d=self.d, dim=self.dim,
            order_cap=self.order_cap, kind=self.kind,
            kbar_x=dict(self.kbar_x), ktil_x=dict(self.ktil_x),
            kbar_y=dict(self.kbar_y), ktil_y=dict(self.ktil_y),
            kbar_th=dict(self.kbar_th), ktil_th=dict(self.ktil_th),
            reduced=red, free_choices=dict(self.free_choices),
        )

    def param(self, deg: int, rot=None) -> ParamMap:
        """Assemble the parameterization as a ParamMap at working degree."""
        dim, cap = self.dim, self.order_cap
        kx = Jet.var_x(0, deg, dim, cap)
        for l, c in self.kbar_x.items():
            kx = kx + Jet.monomial(l, (), c, 0, deg, dim, cap)
        for o, s in self.ktil_x.items():
            kx = kx + Jet.monomial(o, (), s, 0, deg, dim, cap)
        ys = []
        for i in range(self.m):
            yi = Jet.zero(0, deg, dim, cap)
            for l, vec in self.kbar_y.items():
                if vec[i]:
                    yi = yi + Jet.monomial(l, (), vec[i], 0, deg, dim, cap)
            for o, row in self.ktil_y.items():
                if row[i].coeffs:
                    yi = yi + Jet.monomial(o, (), row[i], 0, deg, dim, cap)
            ys.append(yi)
        devs = []
        for r in range(self.d):
            dr = Jet.zero(0, deg, dim, cap)
            for l, vec in self.kbar_th.items():
                if vec[r]:
                    dr = dr + Jet.monomial(l, (), vec[r], 0, deg, dim, cap)
            for o, row in self.ktil_th.items():
                if row[r].coeffs:
                    dr = dr + Jet.monomial(o, (), row[r], 0, deg, dim, cap)
            devs.append(dr)
        if rot is None:
            rot = (0.0,) * dim
        return ParamMap(x=kx, y=tuple(ys), theta_dev=tuple(devs), rot=tuple(rot))

    def coefficient_norm(self) -> float:
        s = sum(abs(c) for c in self.kbar_x.values())
        s += sum(t.strip_norm() for t in self.ktil_x.values())
        s += sum(abs(v) for vec in self.kbar_y.values() for v in vec)
        s += sum(t.strip_norm() for row in self.ktil_y.values() for t in row)
        s += sum(abs(v) for vec in self.kbar_th.values() for v in vec)
        s += sum(t.strip_norm() for row in self.ktil_th.values() for t in row)
        return s

    def evaluate(self, x, theta, dtype=complex):
        """Numeric point K(x, theta) = (xk, y-vector, theta-vector)."""
        deg = max(self.j + self.N, 2)
        return self.param(deg).evaluate(x, theta, dtype=dtype)


# --------------------------------------------------------------- error jets


def _sd(model, h, divisor_floor):
    if model.kind == "flow":
        return sd_solve_flow(h, model.freq, divisor_floor)
    return sd_solve_map(h, model.freq, divisor_floor)


def _state_rot(model) -> tuple[float, ...]:
    return tuple(model.freq.omega) + (0.0,) * (model.dim - len(model.freq.omega))


def invariance_error(model, sol: ManifoldSolution, deg: int | None = None) -> ErrorJet:
    """Exact jet-level invariance error of a solution.

    Maps: E = F o K - K o R.  Flows: E = X o K - DK Y - dK/dt, with the
    time derivative acting on the trailing d' torus angles with frequency nu.
    """
    N, P, j = sol.N, sol.P, sol.j
    deg = deg if deg is not None else j + N + 1
    declared = (j + N, j + N, min(j + P - 1, j + N - 1))
    if model.kind == "map":
        F = model.as_skew(deg)
        K = sol.param(deg)
        R = sol.reduced.as_param(deg, model.dim, model.order_cap, n_angles=model.dim)
        FK = compose_skew_param(F, K, deg)
        KR = compose_param_param(K, R, deg)
        return ErrorJet(
            ex=FK.x - KR.x,
            ey=tuple(a - b for a, b in zip(FK.y, KR.y)),
            eth=tuple(a - b for a, b in zip(FK.theta_dev, KR.theta_dev)),
            declared=declared,
        )

    X = model.as_field(deg)
    K = sol.param(deg)
    full = tuple(model.freq.omega) + tuple(model.freq.nu)
    Yx = sol.reduced.x_jet(deg, model.dim, model.order_cap)
    Ydev = sol.reduced.theta_jets(deg, model.dim, model.order_cap, model.d)

    def transport(C: Jet) -> Jet:
        out = C.derivative_x().jet_mul(Yx)
        out = out + C.directional_theta(full)
        for r in range(model.d):
            if not Ydev[r].is_zero():
                out = out + C.derivative_theta(r).jet_mul(Ydev[r])
        return out

    XxK = jet_compose(X.x, K.x, K.y, K.theta_dev, None, deg)
    ex = XxK - transport(K.x)
    eys = []
    for i in range(model.m):
        XyK = jet_compose(X.y[i], K.x, K.y, K.theta_dev, None, deg)
        eys.append(XyK - transport(K.y[i]))
    eths = []
    for r in range(model.d):
        XtK = jet_compose(X.theta_dev[r], K.x, K.y, K.theta_dev, None, deg)
        eths.append(XtK - Ydev[r] - transport(K.theta_dev[r]))
    return ErrorJet(ex=ex, ey=tuple(eys), eth=tuple(eths), declared=declared)


def _order_guard(model, sol, err: ErrorJet, order_tolerance: float):
    scale = model.coefficient_scale() * max(1.0, sol.coefficient_norm()) ** 2
    bad = err.order_violations(order_tolerance * scale)
    if bad:
        comp, order, norm = bad[0]
        raise OrderRegression(comp, order, norm, order_tolerance * scale)


# ---------------------------------------------------------------- the steps


def base_step(model, divisor_floor: float = 1e-12, deg: int | None = None) -> ManifoldSolution:
    """First-order solution: K_x = x + Ktil_x^N(theta) x^N, R_x = x - abar x^N.

    The oscillatory coefficient solves the difference (or derivative)
    equation against the oscillatory part of a; with constant a it is zero.
    """
    from .model import validate

    bad = validate(model)
    if bad:
        raise HypothesisViolation("; ".join(bad))
    N = model.N
    abar = model.a_bar
    a_osc = model.a_osc
    sol = ManifoldSolution(
        j=1, N=N, P=model.P, m=model.m, d=model.d, dim=model.dim,
        order_cap=model.order_cap, kind=model.kind,
    )
    if a_osc.coeffs:
        sol.ktil_x[N] = -_sd(model, a_osc, divisor_floor)
    if model.kind == "map":
        sol.reduced = ReducedMap(N=N, a_bar=abar, omega=tuple(model.freq.omega))
    else:
        sol.reduced = ReducedField(N=N, a_bar=abar, omega=tuple(model.freq.omega))
    return sol


def _real_average(series: FourierSeries, what: str) -> float:
    avg = series.average()
    scale = max(series.strip_norm(), 1.0)
    if abs(avg.imag) > 1e-9 * scale:
        raise HypothesisViolation(
            f"average of {what} has imaginary part {avg.imag:.3e}; "
            "model data is not real-symmetric"
        )
    return avg.real


def extend_order(
    model,
    sol: ManifoldSolution,
    E_prev: ErrorJet,
    choices: FreeChoicePolicy | None = None,
    divisor_floor: float = 1e-12,
    order_tolerance: float = 1e-9,
    inverse_cap: float = 1e12,
    deg: int | None = None,
) -> tuple[ManifoldSolution, ErrorJet]:
    """One induction step j-1 -> j; returns the new solution and its error.

    ``E_prev`` must be the invariance error of ``sol`` (its leading
    coefficients are the data of the cohomological equations).  The new
    error is recomputed exactly and checked against the declared orders.
    """
    choices = choices or FreeChoicePolicy()
    j = sol.j + 1
    N, P, m, d = sol.N, sol.P, sol.m, sol.d
    abar = model.a_bar
    a_osc = model.a_osc
    new = sol.copy_shallow()
    new.j = j
    ox = j + N - 1
    oth = j + P - 2

    # ---- y block
    kbar_y = np.zeros(m)
    if m:
        Ey = E_prev.lead_y(ox)
        Ey_avg = np.array([_real_average(s, f"E_y[{i}]") for i, s in enumerate(Ey)])
        M = model.B_bar() + j * abar * np.eye(m)
        if np.linalg.cond(M) > inverse_cap:
            raise SingularBlock(
                f"(B_bar + {j} a_bar Id) is singular within cap at step {j}"
            )
        kbar_y = -np.linalg.solve(M, Ey_avg)
        new.kbar_y[j] = tuple(kbar_y)
        row = []
        B_osc = model.B_osc()
        for i in range(m):
            rhs = Ey[i].oscillatory()
            for t in range(m):
                if kbar_y[t] and B_osc[i][t].coeffs:
                    rhs = rhs + B_osc[i][t].scale(kbar_y[t])
            row.append(_sd(model, rhs, divisor_floor) if rhs.coeffs
                       else FourierSeries.zeros(model.dim, model.order_cap))
        new.ktil_y[ox] = row

    # ---- theta block
    kbar_th = np.zeros(d)
    r_th_new = None
    if d:
        Eth = E_prev.lead_theta(oth)
        Eth_avg = np.array([_real_average(s, f"E_theta[{r}]") for r, s in enumerate(Eth)])
        if P == N:
            kbar_th = -Eth_avg / ((j - 1) * abar)
            new.kbar_th[j - 1] = tuple(kbar_th)
        else:
            r_th_new = tuple(Eth_avg)
            if any(Eth_avg):
                new.reduced.theta_terms[oth] = r_th_new
            kbar_th = np.array(choices.theta_choice(j, d))
            if any(kbar_th):
                new.kbar_th[j - 1] = tuple(kbar_th)
                new.free_choices.setdefault("kbar_theta", {})[j - 1] = tuple(kbar_th)
        row = []
        for r in range(d):
            rhs = Eth[r].oscillatory()
            row.append(_sd(model, rhs, divisor_floor) if rhs.coeffs
                       else FourierSeries.zeros(model.dim, model.order_cap))
        new.ktil_th[oth] = row

    # ---- x block
    psi = E_prev.lead_x(ox)
    if d and any(kbar_th):
        for r in range(d):
            da = model.a.derivative(r)
            if kbar_th[r] and da.coeffs:
                psi = psi - da.scale(kbar_th[r])
    if m:
        e_i = [tuple(1 if t == i else 0 for t in range(m)) for i in range(m)]
        for i in range(m):
            f_lin = model.f_N.coeff(N - 1, e_i[i])
            if kbar_y[i] and f_lin.coeffs:
                psi = psi + f_lin.scale(kbar_y[i])
    if P == 1 and d:
        ktn = sol.ktil_x.get(N)
        for r in range(d):
            if r_th_new is not None and r_th_new[r] and ktn is not None:
                dk = ktn.derivative(r)
                if model.kind == "map":
                    dk = dk.rotate(_state_rot(model))
                psi = psi - dk.scale(r_th_new[r])
            da = model.a.derivative(r)
            kth_t = new.ktil_th.get(oth)
            if kth_t is not None and da.coeffs and kth_t[r].coeffs:
                psi = psi - da.series_mul(kth_t[r])

    psi_avg = _real_average(psi, "psi")
    psi_osc = psi.oscillatory()
    if j == N:
        kx = choices.kbar_x_at_N
        new.reduced.b = psi_avg
        if kx:
            new.kbar_x[j] = kx
        new.free_choices["kbar_x_N"] = kx
    else:
        kx = -psi_avg / ((j - N) * abar)
        if kx:
            new.kbar_x[j] = kx
    rhs = psi_osc
    if kx and a_osc.coeffs:
        rhs = rhs - a_osc.scale(N * kx)
    if rhs.coeffs:
        new.ktil_x[ox] = _sd(model, rhs, divisor_floor)

    err = invariance_error(model, new, deg=deg)
    _order_guard(model, new, err, order_tolerance)
    return new, err


def extend_order_flow(model: FlowModel, sol, E_prev, choices=None, **kw):
    """Flow-path induction step (same formulas with the flow SD operator)."""
    if model.kind != "flow":
        raise HypothesisViolation("extend_order_flow expects a flow model")
    return extend_order(model, sol, E_prev, choices, **kw)


# ------------------------------------------------------------------ drivers


@dataclass
class SolveResult:
    solution: ManifoldSolution
    error: ErrorJet
    per_order: list[dict]

    @property
    def b(self) -> float | None:
        return self.solution.reduced.b


def solve_manifold(
    model,
    order: int,
    choices: FreeChoicePolicy | None = None,
    divisor_floor: float = 1e-12,
    order_tolerance: float = 1e-9,
    deg: int | None = None,
    callback: Callable | None = None,
) -> SolveResult:
    """Run the engine to the requested order; one guard degree is retained."""
    if order < 1:
        raise ValueError("order must be >= 1")
    deg = deg if deg is not None else order + model.N + 1
    sol = base_step(model, divisor_floor, deg)
    err = invariance_error(model, sol, deg=deg)
    _order_guard(model, sol, err, order_tolerance)
    diags = [_diag_entry(sol, err)]
    if callback:
        callback(sol, err)
    for _ in range(2, order + 1):
        sol, err = extend_order(
            model, sol, err, choices,
            divisor_floor=divisor_floor,
            order_tolerance=order_tolerance,
            deg=deg,
        )
        diags.append(_diag_entry(sol, err))
        if callback:
            callback(sol, err)
    return SolveResult(solution=sol, error=err, per_order=diags)


def _diag_entry(sol, err) -> dict:
    lead = {
        "x": err.ex.x_coeff(sol.j + sol.N).strip_norm(),
        "y": max((j.x_coeff(sol.j + sol.N).strip_norm() for j in err.ey), default=0.0),
        "theta": max(
            (j.x_coeff(min(sol.j + sol.P - 1, sol.j + sol.N - 1)).strip_norm() for j in err.eth),
            default=0.0,
        ),
    }
    return {
        "j": sol.j,
        "below_order": err.below_order_norms(),
        "leading": lead,
        "b": sol.reduced.b,
    }


def conjugate_normal_form(
    model: MapModel,
    order: int | None = None,
    choices: FreeChoicePolicy | None = None,
    **kw,
) -> tuple[float, ParamMap, SolveResult]:
    """Conjugation invariant b and conjugating jet for an m = 0 map model.

    Requires P >= N at build time (folded internally); running beyond order
    N never changes b, which is returned together with the conjugation.
    """
    if model.m != 0:
        raise HypothesisViolation("conjugate_normal_form requires m = 0")
    order = max(model.N, order or model.N)
    res = solve_manifold(model, order, choices, **kw)
    K = res.solution.param(order + model.N)
    return res.solution.reduced.b, K, res
