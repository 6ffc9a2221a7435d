"""Trust-region variants assembled from the generic engine: persistent-set
sample averaging (with optional full resampling), fresh-regression runs for
unbiased noise, fresh-interpolation runs for computation-failure noise, a
subsampled-Newton variant for logistic loss, and an Adagrad baseline.

Sample-rate rules:
    tr-saa / storm-unbiased : p_k = max(p_min + k, ceil(1/delta_k))
    storm-logistic          : p_k = min(p_max, max(100 k + p0, ceil(1/delta_k^2)))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .engine import RunRecord, StoppingRule, TrustRegionConfig, run
from .logistic import Dataset, LogisticProblem
from .models import (GeometryError, QuadraticModel, fit_quadratic_set,
                     sample_in_ball, _basis_matrix, _unpack_coefficients,
                     _random_orthonormal)
from .oracles import EstimatePair, averaged_estimate
from .subproblem import dogleg

VARIANTS = ("tr-saa", "tr-saa-resample", "storm-unbiased", "storm-failure",
            "storm-logistic")

_DEDUPE_REL_TOL = 1e-12


@dataclass
class VariantConfig:
    variant: str
    p_min: int = 10
    p_max: Optional[int] = None
    p0: Optional[int] = None
    sample_rate_rule: str = ""
    interpolation_set_policy: str = "persist-and-augment"

    def __post_init__(self):
        # p_min/p_max only bound the same quantity (the sample size) in the
        # logistic rule; for the persistent-set variants p_max caps the set.
        if self.p0 is not None and self.p_max is not None and self.p0 > self.p_max:
            raise ValueError("need p0 <= p_max")
        if (self.variant == "storm-logistic" and self.p_max is not None
                and self.p_min > self.p_max):
            raise ValueError("need p_min <= p_max")

    @staticmethod
    def for_variant(variant: str, n: int, p_min: int = 10,
                    p0: Optional[int] = None, n_train: Optional[int] = None):
        quad_count = _kernels.quad_basis_size(n)
        if variant in ("tr-saa", "tr-saa-resample"):
            return VariantConfig(variant, p_min=p_min, p_max=quad_count,
                                 sample_rate_rule="max(p_min+k, ceil(1/delta))",
                                 interpolation_set_policy="persist-and-augment")
        if variant == "storm-unbiased":
            return VariantConfig(variant, p_min=p_min,
                                 sample_rate_rule="max(p_min+k, ceil(1/delta))",
                                 interpolation_set_policy="fresh-per-iteration")
        if variant == "storm-failure":
            return VariantConfig(variant, p_min=n + 1, p_max=quad_count,
                                 p0=quad_count if p0 is None else p0,
                                 sample_rate_rule="single fresh draw per point",
                                 interpolation_set_policy="persist-and-augment")
        if variant == "storm-logistic":
            if n_train is None:
                raise ValueError("storm-logistic needs the training-set size")
            return VariantConfig(variant, p_min=1, p_max=n_train,
                                 p0=(n - 1) + 2 if p0 is None else p0,
                                 sample_rate_rule="min(p_max, max(100k+p0, ceil(1/delta^2)))",
                                 interpolation_set_policy="fresh-per-iteration")
        raise ValueError(f"unknown variant {variant!r}")


def _tag(trace, label):
    if trace is not None:
        trace.append(label)


def _rate_linear(p_min: int, k: int, delta: float,
                 budget_left: Optional[int] = None) -> int:
    p = max(p_min + k, math.ceil(1.0 / delta))
    if budget_left is not None:
        # keep the 1/delta rule from exploding past the budget mid-iteration
        p = min(p, max(1, budget_left))
    return p


def _budget_left(problem, budget: Optional[int]) -> Optional[int]:
    return None if budget is None else budget - problem.eval_count


class _PersistentSet:
    """Interpolation set with running value averages and furthest-point
    eviction (ties broken by lowest index; the current center is never
    evicted)."""

    def __init__(self, points: np.ndarray):
        self.points = [np.array(p, dtype=float) for p in points]
        self.means = [0.0] * len(self.points)
        self.counts = [0] * len(self.points)
        self.center_index = 0
        self.eviction_audit = []  # (evicted_point, distances, new_center)

    def __len__(self):
        return len(self.points)

    def array(self) -> np.ndarray:
        return np.vstack(self.points)

    def find(self, x: np.ndarray) -> Optional[int]:
        tol = _DEDUPE_REL_TOL * max(1.0, float(np.linalg.norm(x)))
        for i, p in enumerate(self.points):
            if np.linalg.norm(p - x) <= tol:
                return i
        return None

    def augment_and_evict(self, trial: np.ndarray, mean: float, count: int,
                          new_center: np.ndarray, p_max: int):
        j = self.find(trial)
        if j is None:
            self.points.append(np.array(trial, dtype=float))
            self.means.append(mean)
            self.counts.append(count)
        elif count > 0:
            total = self.counts[j] + count
            self.means[j] = (self.counts[j] * self.means[j] + count * mean) / total
            self.counts[j] = total
        ci = self.find(new_center)
        if ci is not None:
            self.center_index = ci
        if len(self.points) > p_max:
            dists = np.array([np.linalg.norm(p - new_center) for p in self.points])
            dists[self.center_index] = -np.inf
            evict = int(np.argmax(dists))  # argmax takes the lowest index on ties
            self.eviction_audit.append((self.points[evict].copy(), dists.copy(),
                                        np.array(new_center, dtype=float)))
            for lst in (self.points, self.means, self.counts):
                del lst[evict]
            if evict < self.center_index:
                self.center_index -= 1


def _initial_frame(center: np.ndarray, delta: float, count: int, rng) -> np.ndarray:
    """Center plus an orthonormal frame (and, if needed, opposite/cross points
    or ball samples) totalling ``count`` points."""
    n = center.size
    q = _random_orthonormal(n, rng)
    rows = [center]
    for i in range(n):
        rows.append(center + delta * q[i])
    for i in range(n):
        if len(rows) >= count:
            break
        rows.append(center - delta * q[i])
    for i in range(n):
        for j in range(i + 1, n):
            if len(rows) >= count:
                break
            rows.append(center + delta * (q[i] + q[j]) / np.sqrt(2.0))
    while len(rows) < count:
        rows.append(sample_in_ball(center, delta, 1, rng)[0])
    return np.vstack(rows[:count])


def _fit_persistent(pset: _PersistentSet, center: np.ndarray, delta: float,
                    values) -> QuadraticModel:
    pts = pset.array()
    dists = np.linalg.norm(pts - center, axis=1)
    scale = max(float(dists.max(initial=0.0)), delta, 1e-300)
    return fit_quadratic_set(pts, center, values, scale=scale)


class TrSaaComponents:
    """Persistent interpolation set with incrementally averaged values; the
    center estimate doubles as f_k^0 and is interpolated by the model."""

    def __init__(self, vcfg: VariantConfig, resample: bool, trace=None,
                 budget: Optional[int] = None):
        self.vcfg = vcfg
        self.resample = resample
        self.trace = trace
        self.budget = budget
        self.pset: Optional[_PersistentSet] = None
        self._p_k = vcfg.p_min

    def build(self, problem, state, rng):
        _tag(self.trace, "sample-rate")
        self._p_k = _rate_linear(self.vcfg.p_min, state.k, state.delta,
                                 _budget_left(problem, self.budget))
        if self.pset is None:
            pts = _initial_frame(state.x, state.delta, problem.dimension + 1, rng)
            self.pset = _PersistentSet(pts)
        _tag(self.trace, "value-update")
        for i in range(len(self.pset)):
            if self.resample:
                self.pset.means[i] = averaged_estimate(problem, self.pset.points[i],
                                                       self._p_k, rng)
                self.pset.counts[i] = self._p_k
            else:
                have = self.pset.counts[i]
                if have < self._p_k:
                    extra = self._p_k - have
                    fresh = averaged_estimate(problem, self.pset.points[i], extra, rng)
                    self.pset.means[i] = (have * self.pset.means[i] + extra * fresh) / self._p_k
                    self.pset.counts[i] = self._p_k
        _tag(self.trace, "model")
        return _fit_persistent(self.pset, state.x, state.delta, self.pset.means)

    def estimate(self, problem, state, model, step, rng):
        f0 = self.pset.means[self.pset.center_index]
        fs = averaged_estimate(problem, state.x + step.step, self._p_k, rng)
        return EstimatePair(f0=f0, fs=fs, samples_used=self._p_k)

    def update_after_iteration(self, problem, state, trial, trial_estimate, success, rng):
        _tag(self.trace, "set-update")
        count = 0 if not np.isfinite(trial_estimate) else self._p_k
        mean = trial_estimate if count else 0.0
        self.pset.augment_and_evict(trial, mean, count, state.x, self.vcfg.p_max)


class StormUnbiasedComponents:
    """Fresh uniformly drawn regression set each iteration; estimates are
    sample averages independent of the model values."""

    def __init__(self, vcfg: VariantConfig, trace=None, budget: Optional[int] = None):
        self.vcfg = vcfg
        self.trace = trace
        self.budget = budget
        self._p_k = vcfg.p_min

    def build(self, problem, state, rng):
        _tag(self.trace, "sample-rate")
        self._p_k = _rate_linear(self.vcfg.p_min, state.k, state.delta,
                                 _budget_left(problem, self.budget))
        _tag(self.trace, "set-draw")
        pts = np.vstack([state.x[None, :],
                         sample_in_ball(state.x, state.delta, self._p_k - 1, rng)])
        _tag(self.trace, "values")
        values = np.array([problem.noisy_eval(p, rng) for p in pts])
        _tag(self.trace, "model")
        n = problem.dimension
        degree = 2 if self._p_k >= _kernels.quad_basis_size(n) else 1
        M = _basis_matrix((pts - state.x) / state.delta, degree)
        coef, _, rank, _ = np.linalg.lstsq(M, values, rcond=None)
        if rank < M.shape[1]:
            raise GeometryError("degenerate regression draw")
        f0, g, H = _unpack_coefficients(coef, n, degree, state.delta)
        return QuadraticModel(state.x, f0, g, 0.5 * (H + H.T))

    def estimate(self, problem, state, model, step, rng):
        f0 = averaged_estimate(problem, state.x, self._p_k, rng)
        fs = averaged_estimate(problem, state.x + step.step, self._p_k, rng)
        return EstimatePair(f0=f0, fs=fs, samples_used=2 * self._p_k)


class StormFailureComponents:
    """Persistent minimal-change interpolation set whose values are recomputed
    afresh every iteration (single draws, no averaging)."""

    def __init__(self, vcfg: VariantConfig, trace=None):
        self.vcfg = vcfg
        self.trace = trace
        self.pset: Optional[_PersistentSet] = None

    def build(self, problem, state, rng):
        if self.pset is None:
            p0 = min(self.vcfg.p0 or (problem.dimension + 1), self.vcfg.p_max)
            pts = _initial_frame(state.x, state.delta, p0, rng)
            self.pset = _PersistentSet(pts)
        _tag(self.trace, "values-afresh")
        values = np.array([problem.noisy_eval(p, rng) for p in self.pset.points])
        _tag(self.trace, "model")
        return _fit_persistent(self.pset, state.x, state.delta, values)

    def estimate(self, problem, state, model, step, rng):
        f0 = problem.noisy_eval(state.x, rng)
        fs = problem.noisy_eval(state.x + step.step, rng)
        return EstimatePair(f0=f0, fs=fs, samples_used=2)

    def update_after_iteration(self, problem, state, trial, trial_estimate, success, rng):
        _tag(self.trace, "set-update")
        self.pset.augment_and_evict(trial, 0.0, 0, state.x, self.vcfg.p_max)


class StormLogisticComponents:
    """Model from a subsampled gradient (and optionally Hessian) at x_k; the
    constant term is omitted, so m(0) = 0 and the model decrease is -m(s)."""

    def __init__(self, vcfg: VariantConfig, hessian: bool = True, trace=None):
        self.vcfg = vcfg
        self.hessian = hessian
        self.trace = trace
        self._p_k = vcfg.p0 or 1

    def _rate(self, k: int, delta: float) -> int:
        raw = max(100 * k + (self.vcfg.p0 or 1), math.ceil(1.0 / delta**2))
        return min(self.vcfg.p_max, raw)

    def build(self, problem: LogisticProblem, state, rng):
        _tag(self.trace, "sample-rate")
        self._p_k = self._rate(state.k, state.delta)
        _tag(self.trace, "model")
        idx = problem.draw_sample(self._p_k, rng)
        _, grad, hess = problem.sampled_loss_grad_hess(idx, state.x, self.hessian)
        n = problem.dimension
        H = 0.5 * hess if self.hessian else np.zeros((n, n))
        return QuadraticModel(state.x, 0.0, grad, H)

    def estimate(self, problem: LogisticProblem, state, model, step, rng):
        i0 = problem.draw_sample(self._p_k, rng)
        i_s = problem.draw_sample(self._p_k, rng)
        f0 = problem.sampled_loss(i0, state.x)
        fs = problem.sampled_loss(i_s, state.x + step.step)
        return EstimatePair(f0=f0, fs=fs, samples_used=2 * self._p_k)


def _default_stop(problem, cfg: TrustRegionConfig, stop: Optional[StoppingRule]):
    return stop if stop is not None else StoppingRule(budget=cfg.budget)


def run_tr_saa(problem, cfg: TrustRegionConfig, resample: bool = False, rng=None, *,
               vcfg: Optional[VariantConfig] = None, stop: Optional[StoppingRule] = None,
               solver=dogleg, trace=None, nu: float = 0.5) -> RunRecord:
    name = "tr-saa-resample" if resample else "tr-saa"
    if vcfg is None:
        vcfg = VariantConfig.for_variant(name, problem.dimension)
    stop = _default_stop(problem, cfg, stop)
    comp = TrSaaComponents(vcfg, resample, trace=trace, budget=stop.budget)
    return run(problem, comp, comp, solver, cfg, stop,
               variant=name, nu=nu, rng=rng, trace=trace)


def run_storm_unbiased(problem, cfg: TrustRegionConfig, rng=None, *,
                       vcfg: Optional[VariantConfig] = None,
                       stop: Optional[StoppingRule] = None,
                       solver=dogleg, trace=None, nu: float = 0.5) -> RunRecord:
    if vcfg is None:
        vcfg = VariantConfig.for_variant("storm-unbiased", problem.dimension)
    stop = _default_stop(problem, cfg, stop)
    comp = StormUnbiasedComponents(vcfg, trace=trace, budget=stop.budget)
    return run(problem, comp, comp, solver, cfg, stop,
               variant="storm-unbiased", nu=nu, rng=rng, trace=trace)


def run_storm_failure(problem, cfg: TrustRegionConfig, rng=None, *,
                      vcfg: Optional[VariantConfig] = None,
                      stop: Optional[StoppingRule] = None,
                      solver=dogleg, trace=None, nu: float = 0.5) -> RunRecord:
    if vcfg is None:
        vcfg = VariantConfig.for_variant("storm-failure", problem.dimension)
    comp = StormFailureComponents(vcfg, trace=trace)
    return run(problem, comp, comp, solver, cfg, _default_stop(problem, cfg, stop),
               variant="storm-failure", nu=nu, rng=rng, trace=trace)


def run_storm_logistic(problem: LogisticProblem, cfg: TrustRegionConfig, rng=None, *,
                       hessian: bool = True, vcfg: Optional[VariantConfig] = None,
                       stop: Optional[StoppingRule] = None,
                       solver=dogleg, trace=None, nu: float = 0.5) -> RunRecord:
    if vcfg is None:
        vcfg = VariantConfig.for_variant("storm-logistic", problem.dimension,
                                         n_train=problem.train.n_samples)
    comp = StormLogisticComponents(vcfg, hessian=hessian, trace=trace)
    name = "storm-logistic" if hessian else "storm-logistic-h0"
    return run(problem, comp, comp, solver, cfg, _default_stop(problem, cfg, stop),
               variant=name, nu=nu, rng=rng, trace=trace)


def run_adagrad(dataset: Dataset, step0: float = 1.0, batch: int = 10,
                budget: Optional[int] = None, rng=None, *, lam: float = 1e-4,
                seed: int = 0, record_every: Optional[int] = None) -> RunRecord:
    """Diagonal adaptive gradient descent on the subsampled logistic loss.

    Accumulates per-coordinate squared gradients; the step is
    step0 * g / (sqrt(acc) + 1e-8). True loss is recorded at evenly spaced
    evaluation counts.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    problem = LogisticProblem(dataset, lam=lam)
    if budget is None:
        budget = dataset.n_samples
    if record_every is None:
        record_every = max(1, budget // 50)
    x = problem.x0.copy()
    acc = np.zeros_like(x)
    record = RunRecord(problem=problem.name, variant="adagrad", seed=seed)
    record.loss_trace.append((0, problem.true_f(x)))
    record.x_checkpoints.append((0, x.copy()))
    next_record = record_every
    while problem.eval_count < budget:
        idx = problem.draw_sample(batch, rng)
        _, grad, _ = problem.sampled_loss_grad_hess(idx, x, want_hessian=False)
        if np.any(grad):
            acc += grad**2
            x -= step0 * grad / (np.sqrt(acc) + 1e-8)
        if problem.eval_count >= next_record:
            record.loss_trace.append((problem.eval_count, problem.true_f(x)))
            record.x_checkpoints.append((problem.eval_count, x.copy()))
            next_record += record_every
    record.x_final = x
    record.f_final_true = problem.true_f(x)
    if record.loss_trace[-1][0] != problem.eval_count:
        record.loss_trace.append((problem.eval_count, record.f_final_true))
        record.x_checkpoints.append((problem.eval_count, x.copy()))
    record.eval_total = problem.eval_count
    record.stop_reason = "budget"
    return record
