"""Bounded pool for concurrent objective evaluations.

Evaluations are pure functions of the parameter vector, so running them in
worker processes cannot change their values; results are always merged in
submission (index) order, never arrival order, which keeps every consumer
deterministic regardless of the worker count.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor

from .errors import EvaluationError

_WORKER_FN = None


def _set_worker_fn(fn):
    global _WORKER_FN
    _WORKER_FN = fn


def _pool_eval(x):
    return _apply_safe(_WORKER_FN, x)


def _apply_safe(fn, x):
    try:
        return (True, float(fn(x)), "")
    except Exception as exc:  # reported back to the coordinator, never raised here
        return (False, math.inf, f"{type(exc).__name__}: {exc}")


def resolve_workers(configured: int) -> int:
    """Worker cap after applying the NEUROSKIN_WORKERS override."""
    env = os.environ.get("NEUROSKIN_WORKERS")
    if env is not None:
        try:
            configured = int(env)
        except ValueError as exc:
            raise EvaluationError(f"NEUROSKIN_WORKERS must be an integer, got {env!r}") from exc
    return max(1, int(configured))


class EvaluationPool:
    """Maps a picklable objective over batches of parameter vectors.

    With ``workers == 1`` everything runs in-process; otherwise a process
    pool is used. Either way the objective code path is identical, so the
    two modes produce bit-identical values.
    """

    def __init__(self, fn, workers: int = 1):
        self.fn = fn
        self.workers = max(1, int(workers))
        self._executor = None
        if self.workers > 1:
            ctx = multiprocessing.get_context("fork")
            self._executor = ProcessPoolExecutor(
                max_workers=self.workers,
                mp_context=ctx,
                initializer=_set_worker_fn,
                initargs=(fn,),
            )

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def map_outcomes(self, xs):
        if self._executor is not None:
            return list(self._executor.map(_pool_eval, xs))
        return [_apply_safe(self.fn, x) for x in xs]

    def map_or_inf(self, xs) -> list[float]:
        """Values in submission order; failed evaluations become +inf."""
        return [value if ok else math.inf for ok, value, _ in self.map_outcomes(xs)]

    def map_strict(self, xs) -> list[float]:
        """Values in submission order; the first failure raises with its index."""
        outcomes = self.map_outcomes(xs)
        for i, (ok, _, message) in enumerate(outcomes):
            if not ok:
                raise EvaluationError(
                    f"evaluation {i} of {len(xs)} failed: {message}", x=xs[i], index=i
                )
        return [value for _, value, _ in outcomes]

    def __call__(self, x) -> float:
        return self.map_strict([x])[0]
