"""Penalized logistic regression with inferential outputs.

The objective is NLL(beta)/n + (l2/2)*||beta_p||^2 + l1*||beta_p||_1 over
the penalized coordinates beta_p (the intercept is never penalized by
default). The smooth path is a damped Newton iteration with Armijo step
halving, so the objective is non-increasing across iterations and the fit
is deterministic from the zero initialization. An l1 term switches to a
monotone proximal-gradient iteration.

Standard errors under a penalty are approximate by construction; results
carry the method tag ("penalized-approximate" or "refit-unpenalized") so
reports stay honest about it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.special import expit
from scipy.stats import chi2, norm as normal_dist


class DimensionMismatch(ValueError):
    pass


class OneClassOnly(ValueError):
    pass


@dataclass(frozen=True)
class PenaltySpec:
    l2_weight: float = 0.01
    l1_weight: float = 0.0
    penalize_intercept: bool = False
    penalize_fixed_effects: bool = True

    def __post_init__(self):
        if self.l2_weight < 0 or self.l1_weight < 0:
            raise ValueError("penalty weights must be non-negative")


def _check_dims(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or beta.shape != (X.shape[1],) or y.shape != (X.shape[0],):
        raise DimensionMismatch(
            f"incompatible shapes: X {X.shape}, beta {beta.shape}, y {y.shape}")


def negative_log_likelihood(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli-logit NLL (sum over rows), overflow-safe for |x.beta|<=700."""
    _check_dims(beta, X, y)
    z = X @ beta
    return float(np.sum(np.logaddexp(0.0, z) - y * z))


def gradient(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    _check_dims(beta, X, y)
    return X.T @ (expit(X @ beta) - y)


def hessian(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    _check_dims(beta, X, y)
    p = expit(X @ beta)
    w = p * (1.0 - p)
    return (X * w[:, None]).T @ X


def predict_proba(beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    return expit(X @ beta)


def _default_mask(p: int, penalty: PenaltySpec) -> np.ndarray:
    mask = np.ones(p, dtype=bool)
    if not penalty.penalize_intercept and p > 0:
        mask[0] = False
    return mask


def penalized_objective(beta: np.ndarray, X: np.ndarray, y: np.ndarray,
                        penalty: PenaltySpec, mask: np.ndarray) -> float:
    n = X.shape[0]
    value = negative_log_likelihood(beta, X, y) / n
    bp = beta[mask]
    value += 0.5 * penalty.l2_weight * float(bp @ bp)
    value += penalty.l1_weight * float(np.abs(bp).sum())
    return value


@dataclass
class FitResult:
    coefficients: np.ndarray
    converged: bool
    iterations: int
    objective: float
    objective_history: list[float]
    gradient_norm: float
    model_deviance: float
    null_deviance: float
    penalty: PenaltySpec
    column_names: Optional[list[str]] = None
    standard_errors: Optional[np.ndarray] = None
    se_method: Optional[str] = None
    se_singular: bool = False
    zvalues: Optional[np.ndarray] = None
    pvalues: Optional[np.ndarray] = None
    corrected_pvalues: Optional[np.ndarray] = None
    correction_method: str = "holm"
    inference_columns: Optional[list[int]] = None
    accuracy_mean: Optional[float] = None
    accuracy_sd: Optional[float] = None

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else [float(v) for v in a]
        return {
            "coefficients": arr(self.coefficients),
            "converged": self.converged,
            "iterations": self.iterations,
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
            "model_deviance": self.model_deviance,
            "null_deviance": self.null_deviance,
            "penalty": {"l2_weight": self.penalty.l2_weight,
                        "l1_weight": self.penalty.l1_weight},
            "column_names": self.column_names,
            "standard_errors": arr(self.standard_errors),
            "se_method": self.se_method,
            "se_singular": self.se_singular,
            "zvalues": arr(self.zvalues),
            "pvalues": arr(self.pvalues),
            "corrected_pvalues": arr(self.corrected_pvalues),
            "correction_method": self.correction_method,
            "inference_columns": self.inference_columns,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_sd": self.accuracy_sd,
        }


def _null_deviance(y: np.ndarray) -> float:
    n = len(y)
    rate = float(y.mean())
    if rate in (0.0, 1.0):
        return 0.0
    k = y.sum()
    return float(-2.0 * (k * np.log(rate) + (n - k) * np.log1p(-rate)))


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _fit_newton(X, y, penalty, mask, tol, max_iter):
    n, p = X.shape
    beta = np.zeros(p)
    l2 = penalty.l2_weight
    history = [penalized_objective(beta, X, y, penalty, mask)]
    iterations = 0

    def grad_at(b):
        return X.T @ (expit(X @ b) - y) / n + l2 * mask * b

    grad = grad_at(beta)
    grad_norm = float(np.linalg.norm(grad))
    while grad_norm > tol and iterations < max_iter:
        probs = expit(X @ beta)
        w = probs * (1.0 - probs)
        H = (X * w[:, None]).T @ X / n + l2 * np.diag(mask.astype(float))
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        current = history[-1]
        slope = float(grad @ step)
        t = 1.0
        accepted = None
        for _ in range(60):
            candidate = beta - t * step
            value = penalized_objective(candidate, X, y, penalty, mask)
            if value <= current - 1e-4 * t * slope or value < current:
                accepted = (candidate, value)
                break
            t *= 0.5
        if accepted is None:
            break  # no descent left at machine precision
        beta, value = accepted
        history.append(value)
        iterations += 1
        grad = grad_at(beta)
        grad_norm = float(np.linalg.norm(grad))
    return beta, grad_norm <= tol, iterations, history, grad_norm


def _fit_proximal(X, y, penalty, mask, tol, max_iter):
    """Monotone proximal gradient for the l1 part; backtracking step size."""
    n, p = X.shape
    beta = np.zeros(p)
    l2 = penalty.l2_weight
    l1 = penalty.l1_weight
    history = [penalized_objective(beta, X, y, penalty, mask)]

    def smooth(b):
        bp = b[mask]
        return negative_log_likelihood(b, X, y) / n + 0.5 * l2 * float(bp @ bp)

    def smooth_grad(b):
        return X.T @ (expit(X @ b) - y) / n + l2 * mask * b

    step = 1.0
    converged = False
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = smooth_grad(beta)
        f = smooth(beta)
        while True:
            candidate = beta - step * g
            candidate[mask] = _soft_threshold(candidate[mask], step * l1)
            diff = candidate - beta
            quad = f + float(g @ diff) + float(diff @ diff) / (2 * step)
            if smooth(candidate) <= quad + 1e-12:
                break
            step *= 0.5
            if step < 1e-14:
                break
        residual = float(np.linalg.norm(candidate - beta)) / max(step, 1e-14)
        value = penalized_objective(candidate, X, y, penalty, mask)
        if value <= history[-1]:
            beta = candidate
            history.append(value)
        if residual <= tol:
            converged = True
            break
        step = min(step * 2.0, 1e6)
    return beta, converged, iterations, history, residual


def fit(X: np.ndarray, y: np.ndarray, penalty: PenaltySpec = PenaltySpec(),
        tol: float = 1e-8, max_iter: Optional[int] = None,
        penalty_mask: Optional[np.ndarray] = None,
        column_names: Optional[list[str]] = None,
        inference_columns: Optional[Sequence[int]] = None,
        compute_inference: bool = True) -> FitResult:
    """Minimize the penalized objective from beta = 0.

    `penalty_mask` marks penalized coordinates (default: everything except
    column 0, taken to be the intercept). A non-converged fit is still
    returned, flagged. When `compute_inference` is set, penalized-
    approximate standard errors, z statistics and raw/Holm-corrected
    p-values (family = `inference_columns`, default all) are filled in.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch(f"incompatible shapes: X {X.shape}, y {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be 0/1")
    mask = (np.asarray(penalty_mask, dtype=bool) if penalty_mask is not None
            else _default_mask(X.shape[1], penalty))
    if mask.shape != (X.shape[1],):
        raise DimensionMismatch("penalty_mask length must match column count")

    if penalty.l1_weight > 0:
        iters = max_iter if max_iter is not None else 20000
        beta, converged, iterations, history, grad_norm = _fit_proximal(
            X, y, penalty, mask, tol, iters)
    else:
        iters = max_iter if max_iter is not None else 200
        beta, converged, iterations, history, grad_norm = _fit_newton(
            X, y, penalty, mask, tol, iters)

    result = FitResult(
        coefficients=beta, converged=converged, iterations=iterations,
        objective=history[-1], objective_history=history,
        gradient_norm=grad_norm,
        model_deviance=2.0 * negative_log_likelihood(beta, X, y),
        null_deviance=_null_deviance(y),
        penalty=penalty, column_names=column_names,
    )
    if compute_inference:
        se = standard_errors(result, X, y, penalty_mask=mask)
        result.standard_errors = se.values
        result.se_method = se.method
        result.se_singular = se.singular
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se.values > 0, beta / se.values, 0.0)
        result.zvalues = z
        result.pvalues = 2.0 * normal_dist.sf(np.abs(z))
        family = (list(inference_columns) if inference_columns is not None
                  else list(range(X.shape[1])))
        corrected = np.full(X.shape[1], np.nan)
        corrected[family] = holm_correction(result.pvalues[family])
        result.corrected_pvalues = corrected
        result.inference_columns = family
    return result


@dataclass(frozen=True)
class SEResult:
    values: np.ndarray
    method: str
    singular: bool


def standard_errors(fit_result: FitResult, X: np.ndarray, y: np.ndarray,
                    penalty_mask: Optional[np.ndarray] = None,
                    method: str = "penalized") -> SEResult:
    """Wald standard errors at the fitted coefficients.

    "penalized": sqrt of the diagonal of (H + n*l2*I over penalized
    columns)^-1, tagged penalized-approximate. "refit_unpenalized" refits
    without penalty first. A singular information matrix yields per-column
    infinity with the singular flag set.
    """
    penalty = fit_result.penalty
    beta = fit_result.coefficients
    n, p = X.shape
    mask = (np.asarray(penalty_mask, dtype=bool) if penalty_mask is not None
            else _default_mask(p, penalty))
    if method == "refit_unpenalized":
        refit = fit(X, y, PenaltySpec(l2_weight=0.0, l1_weight=0.0),
                    compute_inference=False)
        beta = refit.coefficients
        info = hessian(beta, X, y)
        tag = "refit-unpenalized"
    elif method == "penalized":
        info = hessian(beta, X, y) + n * penalty.l2_weight * np.diag(mask.astype(float))
        tag = "penalized-approximate"
    else:
        raise ValueError(f"unknown SE method {method!r}")
    try:
        factor = cho_factor(info)
        inverse_diag = np.diag(cho_solve(factor, np.eye(p)))
        if np.any(inverse_diag <= 0):
            raise LinAlgError("non-positive variance")
        return SEResult(values=np.sqrt(inverse_diag), method=tag, singular=False)
    except (LinAlgError, np.linalg.LinAlgError):
        return SEResult(values=np.full(p, np.inf), method=tag, singular=True)


def grid_search_l2(X: np.ndarray, y: np.ndarray, grid: Sequence[float],
                   split: float = 0.9, seed: int = 0) -> float:
    """Grid value maximizing held-out log-likelihood on a single seeded
    train/test split; exact ties go to the smaller l2."""
    if len(grid) == 0:
        raise ValueError("empty grid")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(y))
    n_train = int(round(split * len(y)))
    train, test = order[:n_train], order[n_train:]
    if len(test) == 0:
        raise ValueError("split leaves no held-out rows")
    best_l2, best_ll = None, -np.inf
    for l2 in sorted(grid):
        result = fit(X[train], y[train], PenaltySpec(l2_weight=l2),
                     compute_inference=False)
        ll = -negative_log_likelihood(result.coefficients, X[test], y[test])
        if ll > best_ll:
            best_l2, best_ll = l2, ll
    return best_l2


def deviance_report(fit_result: FitResult, X: np.ndarray, y: np.ndarray) -> dict:
    """Model and null deviance plus the likelihood-ratio test against the
    unpenalized intercept-only null (df = added columns)."""
    model_dev = 2.0 * negative_log_likelihood(fit_result.coefficients, X, y)
    null_dev = _null_deviance(y)
    lr = max(null_dev - model_dev, 0.0)
    df = max(X.shape[1] - 1, 1)
    return {
        "model_deviance": float(model_dev),
        "null_deviance": float(null_dev),
        "lr_statistic": float(lr),
        "lr_df": df,
        "lr_pvalue": float(chi2.sf(lr, df)),
    }


def balanced_accuracy(fit_result: FitResult, X: np.ndarray, y: np.ndarray,
                      runs: int = 10, seed: int = 0) -> tuple[float, float]:
    """Accuracy over repeated majority-class downsampling, threshold 0.5.

    Bit-reproducible given the seed. Raises OneClassOnly when y is constant.
    """
    y = np.asarray(y, dtype=float)
    ones = np.flatnonzero(y == 1)
    zeros = np.flatnonzero(y == 0)
    if len(ones) == 0 or len(zeros) == 0:
        raise OneClassOnly("need both classes for balanced accuracy")
    minority, majority = (ones, zeros) if len(ones) <= len(zeros) else (zeros, ones)
    probs = predict_proba(fit_result.coefficients, np.asarray(X, dtype=float))
    predictions = (probs >= 0.5).astype(float)
    rng = np.random.default_rng(seed)
    accuracies = []
    for _ in range(runs):
        sampled = rng.choice(majority, size=len(minority), replace=False)
        idx = np.concatenate([minority, sampled])
        accuracies.append(float(np.mean(predictions[idx] == y[idx])))
    accuracies = np.array(accuracies)
    return float(accuracies.mean()), float(accuracies.std())


def holm_correction(pvalues: Sequence[float]) -> np.ndarray:
    """Holm step-down correction; monotone, corrected >= raw, capped at 1."""
    p = np.asarray(pvalues, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    if m == 0:
        return np.array([])
    order = np.argsort(p, kind="stable")
    corrected = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        value = (m - rank) * p[idx]
        running = max(running, value)
        corrected[idx] = min(running, 1.0)
    return corrected
