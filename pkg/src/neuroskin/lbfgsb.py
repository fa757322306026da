"""Local refinement: forward-difference gradients feeding a bound-constrained
limited-memory quasi-Newton minimizer.

The minimizer keeps a short history of curvature pairs, computes descent
directions by the standard two-loop recursion (restricted to variables not
pinned at a bound), projects trial points onto the box and backtracks until
a sufficient-decrease condition holds. Curvature pairs with negligible
``s.y`` are discarded so the implicit inverse-Hessian stays positive
definite. Every accepted iterate is feasible and the accepted objective
values never increase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError

_ARMIJO_C1 = 1.0e-4
_CURVATURE_SKIP = 1.0e-10
_MIN_ALPHA = 1.0e-20


@dataclass
class GradientResult:
    f: float
    g: np.ndarray
    evaluations_used: int


def forward_diff_gradient(
    f,
    x,
    delta: float,
    *,
    mapper=None,
    bounds=None,
    mode: str = "absolute",
) -> GradientResult:
    """Forward-difference gradient: g_i = (f(x + d_i e_i) - f(x)) / d_i.

    The n+1 evaluations are independent; ``mapper`` (a list-of-points to
    list-of-values function) may run them concurrently. With ``bounds``
    given, a component whose forward probe would leave the box is probed
    backward instead (and the difference negated). ``mode='relative'``
    scales the step per component by max(|x_i|, 1).
    """
    if delta <= 0.0:
        raise ConfigError(f"finite-difference step must be positive, got {delta}")
    if mode not in ("absolute", "relative"):
        raise ConfigError(f"unknown step mode {mode!r}")
    x = np.asarray(x, dtype=float).copy()
    n = x.size
    steps = np.full(n, float(delta))
    if mode == "relative":
        steps *= np.maximum(np.abs(x), 1.0)

    signs = np.ones(n)
    if bounds is not None:
        b = np.asarray(bounds, dtype=float)
        signs = np.where(x + steps > b[:, 1], -1.0, 1.0)

    points = [x]
    for i in range(n):
        probe = x.copy()
        probe[i] += signs[i] * steps[i]
        points.append(probe)

    if mapper is None:
        values = []
        for i, p in enumerate(points):
            try:
                values.append(float(f(p)))
            except Exception as exc:
                raise EvaluationError(
                    f"gradient evaluation {i} of {n + 1} failed: {exc}", x=p, index=i
                ) from exc
    else:
        values = [float(v) for v in mapper(points)]

    f0 = values[0]
    g = (np.asarray(values[1:]) - f0) * signs / steps
    return GradientResult(f=f0, g=g, evaluations_used=n + 1)


@dataclass
class QuasiNewtonOptions:
    bounds: np.ndarray            # (n, 2) per-dimension [lo, hi]
    memory: int = 10
    max_iterations: int = 100
    max_function_evals: int = 200
    stop_factor: float = 1.0e7   # relative-decrease stop, in machine epsilons
    gradient_tolerance: float = 1.0e-5

    def __post_init__(self):
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if self.bounds.shape[1] != 2 or np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ConfigError("bounds must be (n, 2) with lo < hi per dimension")
        if self.memory < 1:
            raise ConfigError("memory size must be at least 1")


@dataclass
class QuasiNewtonDiagnostics:
    stop_reason: str
    n_iterations: int
    n_evaluations: int
    line_search_failed: bool
    n_curvature_pairs: int = 0
    accepted_f: list[float] = field(default_factory=list)
    accepted_x: list[np.ndarray] = field(default_factory=list)
    directional_derivatives: list[float] = field(default_factory=list)


def _projected_gradient(x, g, lo, hi):
    pg = g.copy()
    pg[(x <= lo) & (g > 0.0)] = 0.0
    pg[(x >= hi) & (g < 0.0)] = 0.0
    return pg


def _two_loop(g, pairs):
    """Implicit product of the inverse-Hessian estimate with g."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += s * (a - b)
    return q


def lbfgsb_minimize(f_and_grad, x0, options: QuasiNewtonOptions, iterate_callback=None):
    """Minimize within a box. ``f_and_grad(x) -> (f, g)``.

    Returns ``(x_best, f_best, diagnostics)``. Stops on the projected
    gradient tolerance, on a relative decrease below
    ``stop_factor * eps * max(|f_k|, |f_k+1|, 1)``, or on the iteration /
    function-evaluation budgets. A failed line search returns the best
    iterate found with ``diagnostics.line_search_failed`` set instead of
    raising.
    """
    lo, hi = options.bounds[:, 0], options.bounds[:, 1]
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (options.bounds.shape[0],):
        raise ConfigError(f"x0 must have {options.bounds.shape[0]} components")
    if np.any(x < lo) or np.any(x > hi):
        raise ConfigError("x0 must lie within the bounds")

    f, g = f_and_grad(x)
    f = float(f)
    g = np.asarray(g, dtype=float).ravel()
    evals = 1
    pairs: list[tuple[np.ndarray, np.ndarray, float]] = []
    diag = QuasiNewtonDiagnostics("max iterations", 0, evals, False)
    eps = np.finfo(float).eps

    for _ in range(options.max_iterations):
        pg = _projected_gradient(x, g, lo, hi)
        if np.max(np.abs(pg), initial=0.0) <= options.gradient_tolerance:
            diag.stop_reason = "projected gradient below tolerance"
            break

        # search direction over the variables free to move
        masked = (pg == 0.0) & (g != 0.0)
        d = -_two_loop(pg, pairs)
        d[masked] = 0.0
        if np.dot(d, g) >= 0.0:
            d = -pg
        dg = float(np.dot(d, g))
        diag.directional_derivatives.append(dg)

        # backtracking on the projected path; without curvature information
        # yet, open with a unit-length trial step so badly scaled problems
        # still make progress
        alpha = 1.0 if pairs else 1.0 / float(np.linalg.norm(d))
        accepted = False
        while evals < options.max_function_evals:
            x_trial = np.clip(x + alpha * d, lo, hi)
            step = x_trial - x
            if not np.any(step):
                break
            f_trial, g_trial = f_and_grad(x_trial)
            f_trial = float(f_trial)
            g_trial = np.asarray(g_trial, dtype=float).ravel()
            evals += 1
            gd_step = float(np.dot(g, step))
            if f_trial <= f + _ARMIJO_C1 * min(gd_step, 0.0):
                accepted = True
                break
            alpha *= 0.5
            if alpha < _MIN_ALPHA:
                break
        diag.n_evaluations = evals

        if not accepted:
            if evals >= options.max_function_evals:
                diag.stop_reason = "function evaluation budget exhausted"
            else:
                diag.stop_reason = "line search failure"
                diag.line_search_failed = True
            break

        s = x_trial - x
        y = g_trial - g
        if np.dot(s, y) > _CURVATURE_SKIP * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / np.dot(s, y)))
            if len(pairs) > options.memory:
                pairs.pop(0)
            diag.n_curvature_pairs += 1

        f_prev = f
        x, f, g = x_trial, f_trial, g_trial
        diag.n_iterations += 1
        diag.accepted_f.append(f)
        diag.accepted_x.append(x.copy())
        if iterate_callback is not None:
            iterate_callback(x.copy())

        if (f_prev - f) <= options.stop_factor * eps * max(abs(f_prev), abs(f), 1.0):
            diag.stop_reason = "relative decrease below stop factor"
            break
        if evals >= options.max_function_evals:
            diag.stop_reason = "function evaluation budget exhausted"
            break

    return x, f, diag
