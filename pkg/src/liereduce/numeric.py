"""Numerical cross-checks: integration of explicit ODEs, pushforward of
sampled solutions through reduction steps, and residuals along symmetry flows."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
import sympy as sp

from .expr import X, Ode, jet
from .lie import VectorField, prolong

PASS_STEP = 1e-6
PASS_FLOW = 1e-4
SINGULAR = 1e-12


class NumericError(ValueError):
    pass


@dataclass(frozen=True)
class NumericProblem:
    ode: Ode
    x0: float
    jets0: tuple  # y, y', ..., y^(n-1) at x0
    interval: tuple[float, float]
    step: float = 1e-3
    exact: bool = False  # rational arithmetic throughout

    def __post_init__(self):
        if self.ode.unknowns:
            raise NumericError(f"instantiate {', '.join(self.ode.unknowns)} before integrating")
        if len(self.jets0) != self.ode.order:
            raise NumericError(f"need {self.ode.order} initial values, got {len(self.jets0)}")
        if self.step <= 0:
            raise NumericError("step must be positive")
        a, b = self.interval
        if not a <= self.x0 <= b:
            raise NumericError("x0 lies outside the interval")


@dataclass
class Samples:
    """Jets y, y', ..., y^(n) at grid points; the last column is the top jet."""

    xs: np.ndarray
    jets: np.ndarray
    exact: bool = False

    @property
    def order(self) -> int:
        return self.jets.shape[1] - 1


@dataclass
class Report:
    name: str
    xs: np.ndarray
    residuals: np.ndarray
    threshold: float
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals.astype(float)))) if len(self.residuals) else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual < self.threshold

    def as_dict(self) -> dict:
        out = {
            "check": self.name,
            "max_residual": self.max_residual,
            "threshold": self.threshold,
            "result": "PASS" if self.passed else "FAIL",
        }
        out.update(self.extra)
        return out


def _args(order: int) -> list[sp.Symbol]:
    return [X] + [jet(k) for k in range(order + 1)]


def _compile(exprs, order: int, exact: bool):
    args = _args(order)
    exprs = [sp.sympify(e) for e in exprs]
    if exact:
        # lambdify would print Rational(1, 2) as a float division
        def fn(*vals):
            env = dict(zip(args, vals))
            return [e.xreplace(env) for e in exprs]

        return fn
    return sp.lambdify(args, exprs, modules="numpy")


def _as_number(v, exact):
    return sp.Rational(v) if exact else float(v)


def integrate(p: NumericProblem) -> Samples:
    """Classical fixed-step RK4 on the first-order system; the grid runs from
    x0 to both ends of the interval."""
    n = p.ode.order
    rhs = _compile([p.ode.rhs], n - 1, p.exact)
    dens = [d for d in p.ode.denominators()]
    den_f = _compile(dens, n - 1, p.exact) if dens else None
    h = _as_number(p.step, p.exact)

    def field_(x, state):
        if den_f is not None:
            for d in den_f(x, *state):
                if abs(float(d)) < SINGULAR:
                    raise NumericError(f"singularity encountered at x = {float(x):.6g}")
        top = rhs(x, *state)[0]
        if not p.exact and not np.isfinite(top):
            raise NumericError(f"non-finite state at x = {float(x):.6g}")
        return list(state[1:]) + [top]

    def march(x, state, end, hh):
        xs, states = [], []
        count = int(round(abs(float(end) - float(x)) / float(abs(hh))))
        for _ in range(count):
            k1 = field_(x, state)
            k2 = field_(x + hh / 2, [s + hh / 2 * k for s, k in zip(state, k1)])
            k3 = field_(x + hh / 2, [s + hh / 2 * k for s, k in zip(state, k2)])
            k4 = field_(x + hh, [s + hh * k for s, k in zip(state, k3)])
            state = [s + hh / 6 * (a + 2 * b + 2 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4)]
            x = x + hh
            xs.append(x)
            states.append(state)
        return xs, states

    x0 = _as_number(p.x0, p.exact)
    s0 = [_as_number(v, p.exact) for v in p.jets0]
    fx, fs = march(x0, s0, p.interval[1], h)
    bx, bs = march(x0, s0, p.interval[0], -h)
    xs = bx[::-1] + [x0] + fx
    states = bs[::-1] + [s0] + fs
    rows = [st + [field_(x, st)[-1]] for x, st in zip(xs, states)]
    dtype = object if p.exact else float
    return Samples(np.array(xs, dtype=dtype), np.array(rows, dtype=dtype), p.exact)


def _evaluate(exprs, samples: Samples, order: int) -> np.ndarray:
    """Evaluate expressions in (x, y, ..., y^(order)) at every sample."""
    fn = _compile(exprs, order, samples.exact)
    out = [fn(x, *row[: order + 1]) for x, row in zip(samples.xs, samples.jets)]
    return np.array(out, dtype=object if samples.exact else float)


def pushforward(step, samples: Samples) -> Samples:
    """Samples of the child's jets along the parent's trajectory: (u, v, v', ...)
    are the step's invariants evaluated on the parent jets."""
    n = step.parent.order
    vals = _evaluate(step.invariants, samples, n)
    return Samples(vals[:, 0], vals[:, 1:], samples.exact)


def equation_residual(e: Ode, samples: Samples) -> np.ndarray:
    vals = _evaluate([e.residual], samples, e.order)
    return vals[:, 0]


def check_step(step, samples: Samples, name: str | None = None) -> tuple[Report, Samples]:
    """Residual of the child equation on the pushed-forward parent trajectory."""
    child = pushforward(step, samples)
    res = equation_residual(step.child, child)
    label = name or f"step {step.level} by {step.generator.name}"
    return Report(label, np.asarray(samples.xs), res, PASS_STEP), child


def check_chain(path, samples: Samples) -> list[Report]:
    reports = []
    cur = samples
    for step in path.steps:
        rep, cur = check_step(step, cur)
        reports.append(rep)
    return reports


def _lie_series(f: VectorField, order: int, terms: int) -> list[sp.Expr]:
    """exp(eps * pr f) applied to x, y, ..., y^(order), as polynomials in eps."""
    eps = sp.Symbol("eps_")
    pf = prolong(f, order)
    out = []
    for z in [X] + [jet(k) for k in range(order + 1)]:
        total, cur = sp.Integer(0), z
        for k in range(terms + 1):
            total += eps**k / factorial(k) * cur
            if k < terms:
                cur = pf(cur)
                if cur == 0:
                    break
        out.append(total)
    return out


def check_symmetry_flow(f: VectorField, p: NumericProblem, eps: float = 1e-5, terms: int = 8,
                        samples: Samples | None = None) -> Report:
    """Move every sampled jet point by the eps-flow of the prolonged field and
    measure how far the image is from the equation, relative to eps.

    The slope of the transported curve is also re-fitted by 5-point central
    differences and compared with the transported y' (reported, not judged).
    """
    if p.exact:
        raise NumericError("flow checks run in floating point")
    samples = samples if samples is not None else integrate(p)
    n = p.ode.order
    eps_sym = sp.Symbol("eps_")
    series = [s.subs(eps_sym, eps) for s in _lie_series(f, n, terms)]
    moved = _evaluate(series, samples, n)
    image = Samples(moved[:, 0], moved[:, 1:])
    res = equation_residual(p.ode, image) / eps
    xs_t, ys_t = moved[:, 0], moved[:, 1]
    fd_err = np.nan
    if len(xs_t) >= 5 and np.all(np.diff(xs_t) > 0):
        hs = np.diff(xs_t)
        if np.allclose(hs, hs[0], rtol=1e-6):
            h = hs[0]
            slope = (ys_t[:-4] - 8 * ys_t[1:-3] + 8 * ys_t[3:-1] - ys_t[4:]) / (12 * h)
            fd_err = float(np.max(np.abs(slope - moved[2:-2, 2])))
    return Report(f"flow of {f.name}", np.asarray(samples.xs), res, PASS_FLOW,
                  {"eps": eps, "slope_refit_error": fd_err})


def convergence_ratio(p: NumericProblem, exact_solution, coarse: float = 0.1) -> float:
    """Max error at step ``coarse`` over max error at ``coarse / 2``."""
    errs = []
    for h in (coarse, coarse / 2):
        q = NumericProblem(p.ode, p.x0, p.jets0, p.interval, h)
        s = integrate(q)
        errs.append(np.max(np.abs(s.jets[:, 0] - exact_solution(s.xs))))
    return float(errs[0] / errs[1])


def jets_of(expr, x0, order: int, exact: bool = False) -> tuple:
    """Initial values y(x0), ..., y^(order-1)(x0) of a closed-form solution."""
    e = sp.sympify(expr)
    x0s = sp.Rational(x0) if exact else x0
    vals = []
    for k in range(order):
        v = sp.diff(e, X, k).subs(X, x0s)
        vals.append(sp.nsimplify(v) if exact else float(v))
    return tuple(vals)
