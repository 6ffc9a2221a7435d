"""Trust-region subproblem steps with a per-call Cauchy-decrease certificate.

Both solvers work on models in the convention m(c+s) = f0 + g.s + s.H.s;
internally the dogleg formulas use the equivalent standard form with B = 2H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import QuadraticModel


@dataclass
class StepResult:
    step: np.ndarray
    model_decrease: float
    cauchy_decrease_bound: float  # (kappa_fcd_used / 2) ||g|| min{||g||/||H||, delta}
    kappa_fcd_used: float


def _spectral_norm(H: np.ndarray) -> float:
    if not np.any(H):
        return 0.0
    return float(np.abs(np.linalg.eigvalsh(H)).max())


def _certify(model: QuadraticModel, step: np.ndarray, delta: float) -> StepResult:
    gn = model.grad_norm
    decrease = model.decrease(step)
    if gn == 0.0:
        return StepResult(step, decrease, 0.0, 1.0)
    hn = _spectral_norm(model.hessian)
    radius_term = min(gn / hn, delta) if hn > 0 else delta
    full_bound = 0.5 * gn * radius_term  # certificate with fraction 1
    kappa = min(1.0, decrease / full_bound) if full_bound > 0 else 1.0
    return StepResult(step, decrease, kappa * full_bound, kappa)


def cauchy_point(model: QuadraticModel, delta: float) -> StepResult:
    """Exact minimizer of the model along -g within the ball."""
    g = model.gradient
    gn = model.grad_norm
    n = model.dim
    if gn == 0.0:
        return StepResult(np.zeros(n), 0.0, 0.0, 1.0)
    d = -g / gn
    curv = float(g @ model.hessian @ g) / gn**2  # m(t d) = f0 - t gn + t^2 curv
    if curv <= 0:
        t = delta
    else:
        t = min(delta, gn / (2.0 * curv))
    return _certify(model, t * d, delta)


def _clip_to_ball(s: np.ndarray, delta: float) -> np.ndarray:
    ns = float(np.linalg.norm(s))
    if ns > delta:
        s = s * (delta / ns)
    return s


def dogleg(model: QuadraticModel, delta: float) -> StepResult:
    """Dogleg step when the curvature is positive definite, Cauchy fallback
    otherwise; never returns less decrease than the Cauchy point."""
    g = model.gradient
    gn = model.grad_norm
    cp = cauchy_point(model, delta)
    if gn == 0.0:
        return cp
    B = 2.0 * model.hessian
    candidate = None
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        L = None
    if L is not None:
        p_newton = np.linalg.solve(L.T, np.linalg.solve(L, -g))
        if np.linalg.norm(p_newton) <= delta:
            candidate = p_newton
        else:
            gBg = float(g @ B @ g)
            p_u = -(gn**2 / gBg) * g
            nu = float(np.linalg.norm(p_u))
            if nu >= delta:
                candidate = -(delta / gn) * g
            else:
                d = p_newton - p_u
                a = float(d @ d)
                b = 2.0 * float(p_u @ d)
                cc = nu**2 - delta**2
                tau = (-b + np.sqrt(max(0.0, b * b - 4 * a * cc))) / (2 * a)
                candidate = p_u + tau * d
    if candidate is None:
        return cp
    candidate = _clip_to_ball(candidate, delta)
    result = _certify(model, candidate, delta)
    if result.model_decrease < cp.model_decrease:
        return cp
    return result
