"""Maximum likelihood per part, combined by the candidate that maximises the full-data likelihood.

Two models are shipped: a Gaussian with unknown mean and variance (closed
form) and logistic regression fitted by Newton-Raphson.  For logistic data
the last coordinate is the 0/1 label and the model has an intercept.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Sequence

import numpy as np

from ..errors import (DimensionMismatch, InvalidSpec, NoViableCandidate, NonfiniteValue,
                      ParconError, SingularHessian)
from ..exact import ExactSum
from ..measure import EmpiricalMeasure, EvalVector, MleResult
from .base import CombineContext, Solution

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)


class GaussianModel:
    name = "gaussian"

    def n_params(self, d: int) -> int:
        return 2

    def check(self, d: int) -> None:
        if d != 1:
            raise DimensionMismatch("the Gaussian model expects 1-D data")

    def loglik_terms(self, rows: np.ndarray, theta: Sequence[float]) -> np.ndarray:
        mu, var = float(theta[0]), max(float(theta[1]), VARIANCE_FLOOR)
        x = rows[:, 0]
        return -0.5 * (_LOG_2PI + math.log(var)) - (x - mu) ** 2 / (2.0 * var)

    def fit(self, part: EmpiricalMeasure, init=None, max_iter: int = 0, tol: float = 0.0) -> MleResult:
        self.check(part.d)
        x = part.data[:, 0]
        total = ExactSum(1).add(x)
        mu = total.divided(part.n)[0]
        var = ExactSum(1).add((x - mu) ** 2).divided(part.n)[0]
        loglik = float(np.sum(self.loglik_terms(part.data, (mu, var))))
        return MleResult((mu, var), loglik, self.name, True, 0)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -eta))


class LogisticModel:
    name = "logistic"

    def n_params(self, d: int) -> int:
        return d

    def check(self, d: int) -> None:
        if d < 1:
            raise DimensionMismatch("logistic data needs a label column")

    @staticmethod
    def split(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = rows[:, -1]
        if not np.all((y == 0.0) | (y == 1.0)):
            raise InvalidSpec("logistic labels (last coordinate) must be 0 or 1")
        X = np.hstack([np.ones((rows.shape[0], 1)), rows[:, :-1]])
        return X, y

    def loglik_terms(self, rows: np.ndarray, theta: Sequence[float]) -> np.ndarray:
        X, y = self.split(rows)
        eta = X @ np.asarray(theta, dtype=np.float64)
        return y * eta - np.logaddexp(0.0, eta)

    def fit(self, part: EmpiricalMeasure, init=None, max_iter: int = 100,
            tol: float = 1e-10) -> MleResult:
        X, y = self.split(part.data)
        p = X.shape[1]
        if part.n < p:
            raise InvalidSpec(f"part of {part.n} points cannot identify {p} parameters")
        theta = np.zeros(p) if init is None else np.asarray(init, dtype=np.float64).copy()
        if theta.shape != (p,):
            raise DimensionMismatch(f"init needs {p} entries")

        def loglik(t: np.ndarray) -> float:
            eta = X @ t
            return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

        best_theta, best_ll = theta.copy(), loglik(theta)
        for it in range(1, max_iter + 1):
            prob = _sigmoid(X @ theta)
            grad = X.T @ (y - prob)
            if np.linalg.norm(grad) < tol:
                return MleResult(tuple(theta), loglik(theta), self.name, True, it - 1)
            w = prob * (1.0 - prob)
            hess = (X * w[:, None]).T @ X
            if np.linalg.eigvalsh(hess)[0] <= 1e-10 * part.n:
                raise SingularHessian(
                    "Hessian is singular; the labels may be separable or the features collinear")
            try:
                step = np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError as exc:
                raise SingularHessian(str(exc)) from exc
            theta = theta + step
            if not np.all(np.isfinite(theta)):
                raise SingularHessian("Newton iterate diverged")
            ll = loglik(theta)
            if ll > best_ll:
                best_theta, best_ll = theta.copy(), ll
        prob = _sigmoid(X @ theta)
        if np.linalg.norm(X.T @ (y - prob)) < tol:
            return MleResult(tuple(theta), loglik(theta), self.name, True, max_iter)
        return MleResult(tuple(best_theta), best_ll, self.name, False, max_iter)


MODELS = {"gaussian": GaussianModel, "logistic": LogisticModel}


def get_model(name: str):
    try:
        return MODELS[name]()
    except KeyError:
        raise InvalidSpec(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def rho_mle(part: EmpiricalMeasure, model: str = "gaussian", init=None,
            max_iter: int = 100, tol: float = 1e-10) -> MleResult:
    return get_model(model).fit(part, init, max_iter, tol)


def combine_mle(candidates: Sequence[MleResult], full_loglik: Callable[[Sequence[float]], float],
                warnings: list[str] | None = None) -> MleResult:
    """Candidate with the largest full-data log-likelihood (ties go to the earliest).

    A candidate whose evaluation fails or is not finite is dropped and noted
    in ``warnings``.
    """
    best: MleResult | None = None
    for pos, cand in enumerate(candidates):
        try:
            value = float(full_loglik(cand.theta))
            if not math.isfinite(value):
                raise NonfiniteValue("full-data log-likelihood is not finite")
        except (ParconError, ArithmeticError, ValueError) as exc:
            msg = f"MLE candidate {pos} excluded: {exc}"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            continue
        if best is None or value > best.loglik:
            src = cand.source_part if cand.source_part is not None else pos
            best = MleResult(cand.theta, value, cand.model, cand.converged, cand.iterations, src)
    if best is None:
        raise NoViableCandidate("every MLE candidate failed full-data evaluation")
    return best


class MleSolution(Solution):
    name = "mle"

    def __init__(self, model: str = "gaussian", init: Sequence[float] | None = None,
                 max_iter: int = 100, tol: float = 1e-10) -> None:
        self.model = get_model(model)
        self.init = None if init is None else tuple(float(v) for v in init)
        if max_iter < 1 or tol <= 0:
            raise InvalidSpec("max_iter must be >= 1 and tol > 0")
        self.max_iter = int(max_iter)
        self.tol = float(tol)

    def check_dimension(self, d):
        self.model.check(d)
        if self.init is not None and len(self.init) != self.model.n_params(d):
            raise DimensionMismatch(f"init needs {self.model.n_params(d)} entries")

    def rho(self, part):
        res = self.model.fit(part, self.init, self.max_iter, self.tol)
        return res

    def combine_parts(self, results, ctx: CombineContext):
        if ctx.full_objective is None:
            raise InvalidSpec("MLE combining needs a full-data objective")
        tagged = [MleResult(r.theta, r.loglik, r.model, r.converged, r.iterations, l)
                  for l, r in enumerate(results)]
        for r in tagged:
            if not r.converged:
                ctx.warnings.append(f"k={ctx.repetition} l={r.source_part}: Newton-Raphson did not converge")
        return combine_mle(tagged, ctx.full_objective, ctx.warnings)

    def combine_repetitions(self, results, ctx):
        best = results[0]
        for r in results[1:]:
            if r.loglik > best.loglik:
                best = r
        return best

    def ev(self, result):
        return EvalVector(result.theta + (result.loglik,))

    def ev_length(self, d):
        return self.model.n_params(d) + 1
