"""Model containers for parabolic skew-product maps and quasiperiodic fields.

A map model is

    x  ->  x - a(theta) x^N + f_N(x, y, theta) + f_tail(x, y, theta)
    y  ->  y + x^(N-1) B(theta) y + g_N(x, y, theta) + g_tail(x, y, theta)
    th ->  th + omega + h_P(x, y, theta) + h_tail(x, y, theta)

with f_N, g_N homogeneous of degree N satisfying f_N(x,0)=0, g_N(x,0)=0,
D_y g_N(x,0)=0, h_P homogeneous of degree P, and tails of order N+1 / P+1.
The flow form replaces the first two right-hand sides by time derivatives
and allows quasiperiodic time dependence through d' extra angles with
frequency nu.

Averaging normalization conjugates away the theta-dependence of a and B
and rescales so that the averaged leading coefficient becomes 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    HypothesisViolation,
    SingularB,
)
from .fourier import FourierSeries, FrequencyVector, sd_solve_flow, sd_solve_map
from .jet import Jet, SkewMap, compose_skew_skew, invert_x_jet, jet_compose

__all__ = [
    "MapModel",
    "FlowModel",
    "SkewField",
    "ReducedMap",
    "ReducedField",
    "ChangeLog",
    "validate",
    "normalize",
    "normalize_flow",
]

_B_EIG_FLOOR = 1e-9
_STRUCT_TOL = 1e-12


def _zeros_jet(m, deg, dim, cap):
    return Jet.zero(m, deg, dim, cap)


def _as_tuple_jets(js, m, deg, dim, cap, count):
    if js is None:
        return tuple(_zeros_jet(m, deg, dim, cap) for _ in range(count))
    js = tuple(js)
    if len(js) != count:
        raise DimensionMismatch(f"expected {count} component jets, got {len(js)}")
    return js


@dataclass
class ReducedMap:
    """R(x, theta) = (x - a_bar x^N [+ b x^(2N-1)], theta + omega + corrections).

    ``theta_terms`` maps an x-order to a length-d vector of real constants
    (nonempty only when P < N in the source model).
    """

    N: int
    a_bar: float
    omega: tuple[float, ...]
    b: float | None = None
    theta_terms: dict[int, tuple[float, ...]] = field(default_factory=dict)

    def x_poly_coeffs(self) -> dict[int, float]:
        out = {1: 1.0, self.N: -self.a_bar}
        if self.b is not None:
            out[2 * self.N - 1] = out.get(2 * self.N - 1, 0.0) + self.b
        return out

    def x_value(self, x):
        acc = type(x)(0)
        for l, c in self.x_poly_coeffs().items():
            acc = acc + c * x ** l
        return acc

    def as_param(self, deg: int, dim: int, order_cap: int, n_angles: int | None = None):
        """The reduced dynamics as a ParamMap for jet composition."""
        from .jet import ParamMap

        n_angles = len(self.omega) if n_angles is None else n_angles
        x = Jet.zero(0, deg, dim, order_cap)
        for l, c in self.x_poly_coeffs().items():
            x = x + Jet.monomial(l, (), c, 0, deg, dim, order_cap)
        dev = []
        for r in range(n_angles):
            j = Jet.zero(0, deg, dim, order_cap)
            for order, vec in self.theta_terms.items():
                if vec[r]:
                    j = j + Jet.monomial(order, (), vec[r], 0, deg, dim, order_cap)
            dev.append(j)
        rot = tuple(self.omega) + (0.0,) * (dim - len(self.omega))
        return ParamMap(x=x, y=(), theta_dev=tuple(dev), rot=rot)


@dataclass
class ReducedField:
    """Y(x) = (-a_bar x^N [+ b x^(2N-1)], omega + corrections)."""

    N: int
    a_bar: float
    omega: tuple[float, ...]
    b: float | None = None
    theta_terms: dict[int, tuple[float, ...]] = field(default_factory=dict)

    def x_poly_coeffs(self) -> dict[int, float]:
        out = {self.N: -self.a_bar}
        if self.b is not None:
            out[2 * self.N - 1] = out.get(2 * self.N - 1, 0.0) + self.b
        return out

    def x_value(self, x):
        acc = type(x)(0)
        for l, c in self.x_poly_coeffs().items():
            acc = acc + c * x ** l
        return acc

    def x_jet(self, deg: int, dim: int, order_cap: int) -> Jet:
        x = Jet.zero(0, deg, dim, order_cap)
        for l, c in self.x_poly_coeffs().items():
            x = x + Jet.monomial(l, (), c, 0, deg, dim, order_cap)
        return x

    def theta_jets(self, deg: int, dim: int, order_cap: int, n_angles: int):
        out = []
        for r in range(n_angles):
            j = Jet.zero(0, deg, dim, order_cap)
            for order, vec in self.theta_terms.items():
                if vec[r]:
                    j = j + Jet.monomial(order, (), vec[r], 0, deg, dim, order_cap)
            out.append(j)
        return tuple(out)


@dataclass
class _ModelBase:
    N: int
    P: int
    m: int
    d: int
    freq: FrequencyVector
    order_cap: int
    a: FourierSeries
    B: tuple[tuple[FourierSeries, ...], ...]
    f_N: Jet
    g_N: tuple[Jet, ...]
    h_P: tuple[Jet, ...]
    f_tail: Jet
    g_tail: tuple[Jet, ...]
    h_tail: tuple[Jet, ...]
    declared_P: int | None = None
    params: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        """Torus dimension carried by the coefficient series."""
        return self.a.dim

    @property
    def a_bar(self) -> float:
        return self.a.average().real

    @property
    def a_osc(self) -> FourierSeries:
        return self.a.oscillatory()

    def B_bar(self) -> np.ndarray:
        return np.array(
            [[self.B[i][j].average().real for j in range(self.m)] for i in range(self.m)]
        )

    def B_osc(self) -> list[list[FourierSeries]]:
        return [[self.B[i][j].oscillatory() for j in range(self.m)] for i in range(self.m)]

    def native_degree(self) -> int:
        degs = [self.N, self.P]
        for j in (self.f_N, self.f_tail, *self.g_N, *self.g_tail, *self.h_P, *self.h_tail):
            for (l, k) in j.terms:
                degs.append(l + sum(k))
        return max(degs)

    def coefficient_scale(self) -> float:
        """Crude magnitude of the model data, for relative tolerances."""
        s = self.a.strip_norm() + sum(
            self.B[i][j].strip_norm() for i in range(self.m) for j in range(self.m)
        )
        for j in (self.f_N, self.f_tail, *self.g_N, *self.g_tail, *self.h_P, *self.h_tail):
            s += j.norm()
        return max(s, 1.0)


def _fold_P(N, P, h_jets, m, dim, cap):
    """Inputs with P > N are rewritten as P = N with an empty degree-N slot."""
    if P <= N:
        return P, None
    return N, P


@dataclass
class MapModel(_ModelBase):
    """Skew-product map in the parabolic normal form around the torus."""

    kind: str = "map"

    @classmethod
    def build(
        cls,
        N: int,
        P: int,
        freq: FrequencyVector,
        a: FourierSeries,
        m: int,
        order_cap: int,
        B: Sequence[Sequence[FourierSeries]] | None = None,
        f: Jet | None = None,
        g: Sequence[Jet] | None = None,
        h: Sequence[Jet] | None = None,
        deg: int | None = None,
        params: Sequence[float] = (),
    ) -> "MapModel":
        """Assemble a model, splitting f/g/h into leading and tail parts.

        ``f``/``g``/``h`` hold everything except the structural monomials
        (-a x^N, x^(N-1) B y); degree-N parts and tails are separated here,
        and P > N is folded to P = N with an empty leading slot.
        """
        dim = a.dim
        deg = deg if deg is not None else max(N, P) + 4
        f = f if f is not None else _zeros_jet(m, deg, dim, order_cap)
        g = _as_tuple_jets(g, m, deg, dim, order_cap, m)
        h = _as_tuple_jets(h, m, deg, dim, order_cap, dim if h is None else len(tuple(h)))
        declared_P = None
        if P > N:
            declared_P = P
            P = N
        if f.min_order() < N:
            raise HypothesisViolation("f has terms below degree N")
        for j in g:
            if j.min_order() < N:
                raise HypothesisViolation("g has terms below degree N")
        for j in h:
            if j.min_order() < P and declared_P is None:
                raise HypothesisViolation("h has terms below degree P")
        B = (
            tuple(tuple(row) for row in B)
            if B is not None
            else tuple(
                tuple(FourierSeries.zeros(dim, order_cap) for _ in range(m))
                for _ in range(m)
            )
        )
        return cls(
            N=N,
            P=P,
            m=m,
            d=len(freq.omega),
            freq=freq,
            order_cap=order_cap,
            a=a,
            B=B,
            f_N=f.part_of_degree(N),
            g_N=tuple(j.part_of_degree(N) for j in g),
            h_P=tuple(j.part_of_degree(P) if declared_P is None else Jet.zero(m, j.deg, dim, order_cap) for j in h),
            f_tail=f.drop_below(N + 1),
            g_tail=tuple(j.drop_below(N + 1) for j in g),
            h_tail=tuple(j.drop_below(P + 1) for j in h),
            declared_P=declared_P,
            params=tuple(params),
        )

    def as_skew(self, deg: int) -> SkewMap:
        """The full map as a SkewMap at the requested working degree."""
        m, dim, cap = self.m, self.dim, self.order_cap
        x = Jet.var_x(m, deg, dim, cap)
        x = x - Jet.monomial(self.N, (0,) * m, self.a, m, deg, dim, cap)
        x = x + self.f_N.truncated(deg) + self.f_tail.truncated(deg)
        ys = []
        for i in range(m):
            yi = Jet.var_y(i, m, deg, dim, cap)
            for j in range(m):
                kj = tuple(1 if t == j else 0 for t in range(m))
                yi = yi + Jet.monomial(self.N - 1, kj, self.B[i][j], m, deg, dim, cap)
            yi = yi + self.g_N[i].truncated(deg) + self.g_tail[i].truncated(deg)
            ys.append(yi)
        dev = tuple(
            (self.h_P[r].truncated(deg) + self.h_tail[r].truncated(deg))
            for r in range(self.dim)
        )
        rot = tuple(self.freq.omega) + (0.0,) * (dim - len(self.freq.omega))
        return SkewMap(x=x, y=tuple(ys), theta_dev=dev, rot=rot)

    def eval_map(self, x, y, theta, deg: int | None = None, dtype=complex):
        """Numeric image of one point under the full map."""
        skew = self.as_skew(deg if deg is not None else self.native_degree())
        return skew.evaluate(x, y, theta, dtype=dtype)


@dataclass
class SkewField:
    """Vector field in skew form: components are jets in (x, y) on T^(d+d')."""

    x: Jet
    y: tuple[Jet, ...]
    theta_dev: tuple[Jet, ...]
    omega: tuple[float, ...]
    nu: tuple[float, ...]

    @property
    def m(self) -> int:
        return self.x.m

    def angle_point(self, theta, t: float):
        th = (theta,) if np.isscalar(theta) else tuple(theta)
        return tuple(th) + tuple(v * t for v in self.nu)

    def rhs(self, t, state, dtype=complex):
        """Right-hand side at state = (x, y_1..y_m, theta_1..theta_d)."""
        m, d = self.m, len(self.omega)
        x = state[0]
        y = tuple(state[1 : 1 + m])
        th = tuple(state[1 + m : 1 + m + d])
        ang = self.angle_point(th, t)
        out = [self.x.evaluate(x, y, ang, dtype=dtype).real]
        for j in self.y:
            out.append(j.evaluate(x, y, ang, dtype=dtype).real)
        for r in range(d):
            out.append(self.omega[r] + self.theta_dev[r].evaluate(x, y, ang, dtype=dtype).real)
        return np.array(out, dtype=float)


@dataclass
class FlowModel(_ModelBase):
    """Quasiperiodic vector field in the parabolic normal form.

    Coefficients live on T^(d+d'); the last d' angles are time angles
    advancing with frequency nu and are never state variables.
    """

    kind: str = "flow"

    @property
    def dprime(self) -> int:
        return len(self.freq.nu)

    @classmethod
    def build(
        cls,
        N: int,
        P: int,
        freq: FrequencyVector,
        a: FourierSeries,
        m: int,
        order_cap: int,
        B: Sequence[Sequence[FourierSeries]] | None = None,
        f: Jet | None = None,
        g: Sequence[Jet] | None = None,
        h: Sequence[Jet] | None = None,
        deg: int | None = None,
        params: Sequence[float] = (),
    ) -> "FlowModel":
        base = MapModel.build(
            N, P, freq, a, m, order_cap, B=B, f=f, g=g, h=h, deg=deg, params=params
        )
        d = len(freq.omega)
        h_P = base.h_P[:d]
        h_tail = base.h_tail[:d]
        return cls(
            N=base.N,
            P=base.P,
            m=base.m,
            d=d,
            freq=freq,
            order_cap=base.order_cap,
            a=base.a,
            B=base.B,
            f_N=base.f_N,
            g_N=base.g_N,
            h_P=h_P,
            f_tail=base.f_tail,
            g_tail=base.g_tail,
            h_tail=h_tail,
            declared_P=base.declared_P,
            params=base.params,
        )

    def as_field(self, deg: int) -> SkewField:
        m, dim, cap = self.m, self.dim, self.order_cap
        x = -Jet.monomial(self.N, (0,) * m, self.a, m, deg, dim, cap)
        x = x + self.f_N.truncated(deg) + self.f_tail.truncated(deg)
        ys = []
        for i in range(m):
            yi = Jet.zero(m, deg, dim, cap)
            for j in range(m):
                kj = tuple(1 if t == j else 0 for t in range(m))
                yi = yi + Jet.monomial(self.N - 1, kj, self.B[i][j], m, deg, dim, cap)
            yi = yi + self.g_N[i].truncated(deg) + self.g_tail[i].truncated(deg)
            ys.append(yi)
        dev = tuple(
            (self.h_P[r].truncated(deg) + self.h_tail[r].truncated(deg))
            for r in range(self.d)
        )
        return SkewField(
            x=x, y=tuple(ys), theta_dev=dev,
            omega=tuple(self.freq.omega), nu=tuple(self.freq.nu),
        )


# ----------------------------------------------------------------- validate


def _structural_violations(model: _ModelBase) -> list[str]:
    out = []
    tol = _STRUCT_TOL * model.coefficient_scale()
    m = model.m
    zero_k = (0,) * m
    for (l, k), s in model.f_N.terms.items():
        if l + sum(k) != model.N:
            out.append(f"f_N contains a monomial of degree {l + sum(k)} != N")
        if k == zero_k and s.strip_norm() > tol:
            out.append(f"f_N(x,0,theta) != 0: monomial x^{l}")
    for i, g in enumerate(model.g_N):
        for (l, k), s in g.terms.items():
            if l + sum(k) != model.N:
                out.append(f"g_N[{i}] contains a monomial of degree {l + sum(k)} != N")
            if k == zero_k and s.strip_norm() > tol:
                out.append(f"g_N[{i}](x,0,theta) != 0: monomial x^{l}")
            if sum(k) == 1 and s.strip_norm() > tol:
                out.append(f"D_y g_N(x,0,theta) != 0: monomial (l={l}, k={k}) in component {i}")
    for r, h in enumerate(model.h_P):
        for (l, k) in h.terms:
            if l + sum(k) != model.P:
                out.append(f"h_P[{r}] contains a monomial of degree {l + sum(k)} != P")
    if model.f_tail.min_order() <= model.N and not model.f_tail.is_zero(tol):
        out.append("f_tail has terms of order <= N")
    for i, g in enumerate(model.g_tail):
        if g.min_order() <= model.N and not g.is_zero(tol):
            out.append(f"g_tail[{i}] has terms of order <= N")
    for r, h in enumerate(model.h_tail):
        if h.min_order() <= model.P and not h.is_zero(tol):
            out.append(f"h_tail[{r}] has terms of order <= P")
    return out


def validate(model: _ModelBase) -> list[str]:
    """Check hypotheses (i)-(v) plus the spectral conditions; return violations."""
    out = []
    if model.N < 2:
        out.append(f"N = {model.N} < 2")
    if model.P < 1:
        out.append(f"P = {model.P} < 1")
    if model.P > model.N:
        out.append(f"internal P = {model.P} > N (folding failed)")
    out.extend(_structural_violations(model))

    sym = model.a.real_symmetry_defect()
    scale = model.coefficient_scale()
    if sym > 1e-10 * scale:
        out.append(f"a(theta) not real-symmetric (defect {sym:.2e})")
    abar = model.a.average()
    if abs(abar.imag) > 1e-10 * scale:
        out.append("average of a is not real")
    if abar.real <= 0:
        out.append(f"hypothesis a_bar > 0 fails: a_bar = {abar.real:.6g}")
    if model.m:
        Bbar = model.B_bar()
        eigs = np.linalg.eigvals(Bbar)
        if np.min(eigs.real) <= _B_EIG_FLOOR:
            out.append(
                f"hypothesis Re Spec(B_bar) > 0 fails: min Re eig = {np.min(eigs.real):.3e}"
            )
    a_const = model.a_osc.strip_norm() <= 1e-14 * scale
    B_const = all(
        model.B[i][j].oscillatory().strip_norm() <= 1e-14 * scale
        for i in range(model.m)
        for j in range(model.m)
    )
    if not (a_const and B_const):
        if not (model.freq.k_max_checked >= 1 and math.isfinite(model.freq.c_estimate)
                and model.freq.c_estimate > 0):
            out.append(
                "omega has no Diophantine certificate and a or B depends on theta"
            )
    return out


# ---------------------------------------------------------------- normalize


@dataclass
class ChangeLog:
    """Record of the averaging changes, sufficient to map results back."""

    c1: FourierSeries | None = None
    C2: list[list[FourierSeries]] | None = None
    mu: float = 1.0
    D: np.ndarray | None = None
    eps: float = 1.0
    T: SkewMap | None = None
    T_inv: SkewMap | None = None

    def is_identity(self) -> bool:
        return (
            self.c1 is None and self.C2 is None and self.mu == 1.0
            and self.D is None and self.eps == 1.0
        )


def _lift_x_jet(j: Jet, m: int) -> Jet:
    """View a single-variable jet as a jet in (x, y_1..y_m) constant in y."""
    return Jet(
        m, j.deg, j.dim, j.order_cap,
        {(l, (0,) * m): s for (l, k), s in j.terms.items()},
    )


def _skew_x_change(series_coeff: FourierSeries, N: int, m: int, deg: int) -> tuple[SkewMap, SkewMap]:
    """T(x,y,th) = (x + c(th) x^N, y, th) and its inverse."""
    dim, cap = series_coeff.dim, series_coeff.order_cap
    A = Jet.var_x(0, deg, dim, cap) + Jet.monomial(N, (), series_coeff, 0, deg, dim, cap)
    Ainv = invert_x_jet(A, deg)
    T = SkewMap.identity(m, dim, deg, dim, cap)
    T.x = _lift_x_jet(A, m)
    Ti = SkewMap.identity(m, dim, deg, dim, cap)
    Ti.x = _lift_x_jet(Ainv, m)
    return T, Ti


def _skew_y_change(C: list[list[FourierSeries]], N: int, m: int, deg: int) -> tuple[SkewMap, SkewMap]:
    """T(x,y,th) = (x, y + C(th) x^(N-1) y, th) and its Neumann-series inverse."""
    dim, cap = C[0][0].dim, C[0][0].order_cap
    T = SkewMap.identity(m, dim, deg, dim, cap)
    Ti = SkewMap.identity(m, dim, deg, dim, cap)
    ys = []
    for i in range(m):
        yi = Jet.var_y(i, m, deg, dim, cap)
        for j in range(m):
            kj = tuple(1 if t == j else 0 for t in range(m))
            yi = yi + Jet.monomial(N - 1, kj, C[i][j], m, deg, dim, cap)
        ys.append(yi)
    T.y = tuple(ys)
    # (I + C x^(N-1))^{-1} = sum_p (-C x^(N-1))^p, truncated by the degree cap
    p_max = max(0, (deg - 1) // (N - 1)) if N > 1 else 0

    def mat_mul(Am, Bm):
        out = [[None] * m for _ in range(m)]
        for i in range(m):
            for j in range(m):
                acc = FourierSeries.zeros(dim, cap)
                for t in range(m):
                    acc = acc + Am[i][t].series_mul(Bm[t][j])
                out[i][j] = acc
        return out

    Cm = [[C[i][j] for j in range(m)] for i in range(m)]
    power = [
        [FourierSeries.constant(1.0 if i == j else 0.0, dim, cap) for j in range(m)]
        for i in range(m)
    ]
    inv_ys = [Jet.var_y(i, m, deg, dim, cap) for i in range(m)]
    for p in range(1, p_max + 1):
        power = mat_mul(power, Cm)
        for i in range(m):
            for j in range(m):
                s = power[i][j].scale((-1.0) ** p)
                if s.coeffs:
                    kj = tuple(1 if t == j else 0 for t in range(m))
                    inv_ys[i] = inv_ys[i] + Jet.monomial(p * (N - 1), kj, s, m, deg, dim, cap)
    Ti.y = tuple(inv_ys)
    return T, Ti


def _skew_linear_y(Dm: np.ndarray, m: int, deg: int, dim: int, cap: int) -> tuple[SkewMap, SkewMap]:
    T = SkewMap.identity(m, dim, deg, dim, cap)
    Ti = SkewMap.identity(m, dim, deg, dim, cap)
    Dinv = np.linalg.inv(Dm)
    def lin(mat):
        ys = []
        for i in range(m):
            yi = Jet.zero(m, deg, dim, cap)
            for j in range(m):
                if mat[i, j]:
                    kj = tuple(1 if t == j else 0 for t in range(m))
                    yi = yi + Jet.monomial(0, kj, float(mat[i, j]), m, deg, dim, cap)
            ys.append(yi)
        return tuple(ys)
    T.y = lin(Dm)
    Ti.y = lin(Dinv)
    return T, Ti


def _skew_x_scale(mu: float, m: int, deg: int, dim: int, cap: int) -> tuple[SkewMap, SkewMap]:
    T = SkewMap.identity(m, dim, deg, dim, cap)
    Ti = SkewMap.identity(m, dim, deg, dim, cap)
    T.x = Jet.monomial(1, (0,) * m, mu, m, deg, dim, cap)
    Ti.x = Jet.monomial(1, (0,) * m, 1.0 / mu, m, deg, dim, cap)
    return T, Ti


def model_from_skew(
    skew: SkewMap,
    N: int,
    P: int,
    freq: FrequencyVector,
    order_cap: int,
    params=(),
    clamp_tol: float = 1e-11,
) -> MapModel:
    """Re-extract a MapModel from a skew map in (possibly conjugated) form.

    Coefficients sitting in structurally forbidden slots below ``clamp_tol``
    (relative to the jet scale) are dropped as conjugation roundoff.
    """
    m = skew.m
    dim = skew.x.dim
    deg = skew.deg
    scale = max(skew.x.norm(), 1.0)
    tol = clamp_tol * scale
    zero_k = (0,) * m

    lin = skew.x.coeff(1, zero_k)
    if abs(lin.average() - 1.0) > 1e-9 or lin.oscillatory().strip_norm() > 1e-9 * scale:
        raise HypothesisViolation("x-component linear part is not x after conjugation")
    a = -skew.x.coeff(N, zero_k)
    f_all = {}
    for (l, k), s in skew.x.terms.items():
        order = l + sum(k)
        if order < N:
            if (l, k) == (1, zero_k):
                continue
            if s.strip_norm() > tol:
                raise HypothesisViolation(f"x-component has a low-order term at {(l, k)}")
            continue
        if (l, k) == (N, zero_k):
            continue
        if k == zero_k and order == N:
            continue
        f_all[(l, k)] = s
    f = Jet(m, deg, dim, order_cap, f_all)

    B = [[FourierSeries.zeros(dim, order_cap) for _ in range(m)] for _ in range(m)]
    gs = []
    for i in range(m):
        g_all = {}
        for (l, k), s in skew.y[i].terms.items():
            order = l + sum(k)
            if l == 0 and sum(k) == 1:
                j = k.index(1)
                if j == i:
                    s0 = s - FourierSeries.constant(1.0, dim, order_cap)
                else:
                    s0 = s
                if s0.strip_norm() > tol:
                    raise HypothesisViolation("y-component linear part is not the identity")
                continue
            if l == N - 1 and sum(k) == 1:
                B[i][k.index(1)] = s
                continue
            if order < N:
                if s.strip_norm() > tol:
                    raise HypothesisViolation(f"y[{i}] has a low-order term at {(l, k)}")
                continue
            if order == N and (k == zero_k or sum(k) == 1):
                if s.strip_norm() > tol:
                    raise HypothesisViolation(
                        f"y[{i}] violates the structural zeros of g_N at {(l, k)}"
                    )
                continue
            g_all[(l, k)] = s
        gs.append(Jet(m, deg, dim, order_cap, g_all))

    hs = []
    for r in range(len(skew.theta_dev)):
        h_all = {}
        for (l, k), s in skew.theta_dev[r].terms.items():
            if l + sum(k) < P:
                if s.strip_norm() > tol:
                    raise HypothesisViolation(f"theta[{r}] has a term below degree P")
                continue
            h_all[(l, k)] = s
        hs.append(Jet(m, deg, dim, order_cap, h_all))

    return MapModel.build(
        N=N, P=P, freq=freq, a=a, m=m, order_cap=order_cap,
        B=B, f=f, g=gs, h=hs, deg=deg, params=params,
    )


def normalize(
    model: MapModel,
    jordanize: bool = False,
    eps: float | None = None,
    deg: int | None = None,
    divisor_floor: float = 1e-12,
) -> tuple[MapModel, ChangeLog]:
    """Average away the theta-dependence of a and B and rescale a_bar to 1.

    The change is the composition of an x-shear killing the oscillatory
    part of a, a y-shear killing the oscillatory part of B, the scaling
    x -> mu x with mu = a_bar^(-1/(N-1)), and optionally a diagonalizing
    linear change of y and the scaling y -> eps y.  Returns the transformed
    model and a :class:`ChangeLog` with the composite change T, its inverse,
    and the individual ingredients.
    """
    m, dim, cap, N = model.m, model.dim, model.order_cap, model.N
    deg = deg if deg is not None else model.native_degree()
    scale = model.coefficient_scale()
    log = ChangeLog()
    skew = model.as_skew(deg)

    chain: list[tuple[SkewMap, SkewMap]] = []

    a_osc = model.a_osc
    if a_osc.strip_norm() > 1e-14 * scale:
        c1 = sd_solve_map(-a_osc, model.freq, divisor_floor)
        log.c1 = c1
        chain.append(_skew_x_change(c1, N, m, deg))

    if m and any(
        model.B[i][j].oscillatory().strip_norm() > 1e-14 * scale
        for i in range(m)
        for j in range(m)
    ):
        C2 = [
            [sd_solve_map(model.B[i][j].oscillatory(), model.freq, divisor_floor)
             for j in range(m)]
            for i in range(m)
        ]
        log.C2 = C2
        chain.append(_skew_y_change(C2, N, m, deg))

    abar = model.a_bar
    if abar <= 0:
        raise HypothesisViolation("normalize requires a_bar > 0 for the x-scaling")
    if abs(abar - 1.0) > 1e-15:
        mu = abar ** (-1.0 / (N - 1))
        log.mu = mu
        chain.append(_skew_x_scale(mu, m, deg, dim, cap))

    if jordanize and m:
        Bbar = model.B_bar() * (log.mu ** (N - 1))
        w, V = np.linalg.eig(Bbar)
        if np.max(np.abs(w.imag)) > 1e-12 or np.linalg.cond(V) > 1e8:
            raise SingularB(
                "B_bar is not real-diagonalizable within tolerance; "
                "Jordanization with complex or defective spectra is not supported"
            )
        log.D = V.real
        chain.append(_skew_linear_y(V.real, m, deg, dim, cap))

    if eps is not None and eps != 1.0:
        log.eps = float(eps)
        E = np.eye(m) * eps
        chain.append(_skew_linear_y(E, m, deg, dim, cap))

    for T, Ti in chain:
        skew = compose_skew_skew(compose_skew_skew(Ti, skew, deg), T, deg)

    if chain:
        T_total, Ti_total = chain[0]
        for T, Ti in chain[1:]:
            T_total = compose_skew_skew(T_total, T, deg)
            Ti_total = compose_skew_skew(Ti, Ti_total, deg)
        log.T, log.T_inv = T_total, Ti_total

    out = model_from_skew(
        skew, N, model.P, model.freq, cap, params=model.params
    )
    out.declared_P = model.declared_P
    return out, log


# ----------------------------------------------------------- flow normalize


def _identity_subs(m: int, deg: int, dim: int, cap: int):
    return tuple(Jet.var_y(i, m, deg, dim, cap) for i in range(m))


def _field_sub(field: SkewField, sub_x: Jet, sub_y: tuple[Jet, ...], deg: int) -> SkewField:
    """Substitute (x, y) slots in every component of a field."""
    return SkewField(
        x=jet_compose(field.x, sub_x, sub_y, deg=deg),
        y=tuple(jet_compose(j, sub_x, sub_y, deg=deg) for j in field.y),
        theta_dev=tuple(jet_compose(j, sub_x, sub_y, deg=deg) for j in field.theta_dev),
        omega=field.omega,
        nu=field.nu,
    )


def _field_push_x_shear(field: SkewField, c: FourierSeries, N: int, deg: int) -> SkewField:
    """Pushforward under w = x + c(theta, tau) x^N."""
    m, dim, cap = field.m, field.x.dim, field.x.order_cap
    d = len(field.omega)
    zk = (0,) * m
    freqs = field.omega + field.nu
    one_plus = Jet.monomial(0, zk, 1.0, m, deg, dim, cap) + Jet.monomial(
        N - 1, zk, c.scale(N), m, deg, dim, cap
    )
    wdot = field.x.jet_mul(one_plus)
    wdot = wdot + Jet.monomial(N, zk, c.directional_derivative(freqs), m, deg, dim, cap)
    for r in range(d):
        dc = c.derivative(r)
        if dc.coeffs:
            wdot = wdot + Jet.monomial(N, zk, dc, m, deg, dim, cap).jet_mul(
                field.theta_dev[r]
            )
    A = Jet.var_x(0, deg, dim, cap) + Jet.monomial(N, (), c, 0, deg, dim, cap)
    sub_x = _lift_x_jet(invert_x_jet(A, deg), m)
    sub_y = _identity_subs(m, deg, dim, cap)
    shifted = SkewField(
        x=wdot, y=field.y, theta_dev=field.theta_dev,
        omega=field.omega, nu=field.nu,
    )
    return _field_sub(shifted, sub_x, sub_y, deg)


def _field_push_y_shear(field: SkewField, C: list[list[FourierSeries]], N: int, deg: int) -> SkewField:
    """Pushforward under y' = (I + C(theta, tau) x^(N-1)) y."""
    m, dim, cap = field.m, field.x.dim, field.x.order_cap
    d = len(field.omega)
    zk = (0,) * m
    freqs = field.omega + field.nu

    def y_slot(j):
        return tuple(1 if t == j else 0 for t in range(m))

    # dy'/dt = Mdot y + M ydot, as jets in the old (x, y)
    new_y = []
    for i in range(m):
        acc = field.y[i]
        for j in range(m):
            cij = C[i][j]
            yj = Jet.var_y(j, m, deg, dim, cap)
            # Mdot y: [L C + sum_r dC/dtheta_r h_r] x^(N-1) y + (N-1) C x^(N-2) xdot y
            acc = acc + Jet.monomial(
                N - 1, y_slot(j), cij.directional_derivative(freqs), m, deg, dim, cap
            )
            for r in range(d):
                dc = cij.derivative(r)
                if dc.coeffs:
                    acc = acc + Jet.monomial(N - 1, y_slot(j), dc, m, deg, dim, cap).jet_mul(
                        field.theta_dev[r]
                    )
            shear = Jet.monomial(N - 2, zk, cij.scale(N - 1), m, deg, dim, cap) if N >= 2 else None
            if shear is not None:
                acc = acc + shear.jet_mul(field.x).jet_mul(yj)
            # M ydot (off-identity part)
            acc = acc + Jet.monomial(N - 1, zk, cij, m, deg, dim, cap).jet_mul(field.y[j])
        new_y.append(acc)

    # substitute y = (I + C x^(N-1))^{-1} y'
    _, Ti = _skew_y_change(C, N, m, deg)
    sub_x = Jet.var_x(m, deg, dim, cap)
    sub_y = Ti.y
    shifted = SkewField(
        x=field.x, y=tuple(new_y), theta_dev=field.theta_dev,
        omega=field.omega, nu=field.nu,
    )
    return _field_sub(shifted, sub_x, sub_y, deg)


def _field_push_x_scale(field: SkewField, mu: float, deg: int) -> SkewField:
    # new variable w = x / mu, so wdot = xdot / mu evaluated at x = mu w
    m, dim, cap = field.m, field.x.dim, field.x.order_cap
    sub_x = Jet.monomial(1, (0,) * m, mu, m, deg, dim, cap)
    sub_y = _identity_subs(m, deg, dim, cap)
    scaled = SkewField(
        x=field.x.scale(1.0 / mu), y=field.y, theta_dev=field.theta_dev,
        omega=field.omega, nu=field.nu,
    )
    return _field_sub(scaled, sub_x, sub_y, deg)


def _field_push_y_linear(field: SkewField, Dm: np.ndarray, deg: int) -> SkewField:
    m, dim, cap = field.m, field.x.dim, field.x.order_cap
    Dinv = np.linalg.inv(Dm)
    new_y = []
    for i in range(m):
        acc = Jet.zero(m, deg, dim, cap)
        for j in range(m):
            if Dm[i, j]:
                acc = acc + field.y[j].scale(float(Dm[i, j]))
        new_y.append(acc)
    sub_x = Jet.var_x(m, deg, dim, cap)
    sub_y = []
    for j in range(m):
        acc = Jet.zero(m, deg, dim, cap)
        for t in range(m):
            if Dinv[j, t]:
                kt = tuple(1 if q == t else 0 for q in range(m))
                acc = acc + Jet.monomial(0, kt, float(Dinv[j, t]), m, deg, dim, cap)
        sub_y.append(acc)
    shifted = SkewField(
        x=field.x, y=tuple(new_y), theta_dev=field.theta_dev,
        omega=field.omega, nu=field.nu,
    )
    return _field_sub(shifted, sub_x, tuple(sub_y), deg)


def model_from_field(
    fld: SkewField,
    N: int,
    P: int,
    freq: FrequencyVector,
    order_cap: int,
    params=(),
    clamp_tol: float = 1e-11,
) -> FlowModel:
    """Re-extract a FlowModel from a skew field (linear slots must vanish)."""
    m = fld.m
    dim = fld.x.dim
    deg = fld.x.deg
    scale = max(fld.x.norm() + sum(j.norm() for j in fld.y), 1.0)
    tol = clamp_tol * scale
    zk = (0,) * m

    a = -fld.x.coeff(N, zk)
    f_all = {}
    for (l, k), s in fld.x.terms.items():
        order = l + sum(k)
        if order < N:
            if s.strip_norm() > tol:
                raise HypothesisViolation(f"x-component has a low-order term at {(l, k)}")
            continue
        if (l, k) == (N, zk):
            continue
        if k == zk and order == N:
            continue
        f_all[(l, k)] = s
    f = Jet(m, deg, dim, order_cap, f_all)

    B = [[FourierSeries.zeros(dim, order_cap) for _ in range(m)] for _ in range(m)]
    gs = []
    for i in range(m):
        g_all = {}
        for (l, k), s in fld.y[i].terms.items():
            order = l + sum(k)
            if l == N - 1 and sum(k) == 1:
                B[i][k.index(1)] = s
                continue
            if order < N:
                if s.strip_norm() > tol:
                    raise HypothesisViolation(f"y[{i}] has a low-order term at {(l, k)}")
                continue
            if order == N and (k == zk or sum(k) == 1):
                if s.strip_norm() > tol:
                    raise HypothesisViolation(
                        f"y[{i}] violates the structural zeros of g_N at {(l, k)}"
                    )
                continue
            g_all[(l, k)] = s
        gs.append(Jet(m, deg, dim, order_cap, g_all))

    hs = []
    for r in range(len(fld.theta_dev)):
        h_all = {}
        for (l, k), s in fld.theta_dev[r].terms.items():
            if l + sum(k) < P:
                if s.strip_norm() > tol:
                    raise HypothesisViolation(f"theta[{r}] has a term below degree P")
                continue
            h_all[(l, k)] = s
        hs.append(Jet(m, deg, dim, order_cap, h_all))

    return FlowModel.build(
        N=N, P=P, freq=freq, a=a, m=m, order_cap=order_cap,
        B=B, f=f, g=gs, h=hs, deg=deg, params=params,
    )


def normalize_flow(
    model: FlowModel,
    jordanize: bool = False,
    eps: float | None = None,
    deg: int | None = None,
    divisor_floor: float = 1e-12,
) -> tuple[FlowModel, ChangeLog]:
    """Flow analogue of :func:`normalize` using the directional-derivative SD.

    The shear coefficients solve L c1 = a_osc and L C2 = -B_osc, where L is
    the derivative along (omega, nu).
    """
    m, dim, cap, N = model.m, model.dim, model.order_cap, model.N
    deg = deg if deg is not None else model.native_degree()
    scale = model.coefficient_scale()
    log = ChangeLog()
    fld = model.as_field(deg)

    a_osc = model.a_osc
    if a_osc.strip_norm() > 1e-14 * scale:
        c1 = sd_solve_flow(a_osc, model.freq, divisor_floor)
        log.c1 = c1
        fld = _field_push_x_shear(fld, c1, N, deg)

    if m and any(
        model.B[i][j].oscillatory().strip_norm() > 1e-14 * scale
        for i in range(m)
        for j in range(m)
    ):
        C2 = [
            [sd_solve_flow(-model.B[i][j].oscillatory(), model.freq, divisor_floor)
             for j in range(m)]
            for i in range(m)
        ]
        log.C2 = C2
        fld = _field_push_y_shear(fld, C2, N, deg)

    abar = model.a_bar
    if abar <= 0:
        raise HypothesisViolation("normalize requires a_bar > 0 for the x-scaling")
    if abs(abar - 1.0) > 1e-15:
        mu = abar ** (-1.0 / (N - 1))
        log.mu = mu
        fld = _field_push_x_scale(fld, mu, deg)

    if jordanize and m:
        Bbar = model.B_bar() * (log.mu ** (N - 1))
        w, V = np.linalg.eig(Bbar)
        if np.max(np.abs(w.imag)) > 1e-12 or np.linalg.cond(V) > 1e8:
            raise SingularB("B_bar is not real-diagonalizable within tolerance")
        log.D = V.real
        fld = _field_push_y_linear(fld, np.linalg.inv(V.real), deg)

    if eps is not None and eps != 1.0:
        log.eps = float(eps)
        fld = _field_push_y_linear(fld, np.eye(m) / eps, deg)

    out = model_from_field(fld, N, model.P, model.freq, cap, params=model.params)
    out.declared_P = model.declared_P
    return out, log
