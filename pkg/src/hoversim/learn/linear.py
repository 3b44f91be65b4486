"""Ordinary least squares and Lasso by cyclic coordinate descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SINGULAR_RIDGE = 1e-8
_COND_LIMIT = 1e12


def ols_fit(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least squares with intercept via the normal equations.

    Returns ``(coef (d, m), intercept (m,))``. A tiny ridge is added to the
    Gram matrix only when it is singular or numerically so.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    squeeze = Y.ndim == 1
    Y = Y.reshape(len(Y), -1)
    A = np.hstack([X, np.ones((len(X), 1))])
    G = A.T @ A
    rhs = A.T @ Y
    if not np.all(np.isfinite(G)) or np.linalg.cond(G) > _COND_LIMIT:
        G = G + SINGULAR_RIDGE * np.eye(G.shape[0])
    W = np.linalg.solve(G, rhs)
    coef, intercept = W[:-1], W[-1]
    if squeeze:
        return coef[:, 0], intercept[0]
    return coef, intercept


@dataclass
class LassoResult:
    coef: np.ndarray
    intercept: float
    sweeps: int
    converged: bool
    objective: list[float] = field(default_factory=list)


def _soft(rho: float, lam: float) -> float:
    if rho > lam:
        return rho - lam
    if rho < -lam:
        return rho + lam
    return 0.0


def lasso_fit(
    X: np.ndarray, y: np.ndarray, lam: float, tol: float = 1e-6, max_sweeps: int = 10_000
) -> LassoResult:
    """Minimise ``0.5*||Zw - y_c||^2 + lam*||w||_1`` on standardised columns.

    ``Z`` is *X* centred and scaled to unit variance, ``y_c`` the centred
    target; coefficients are mapped back to the original scale. Stops once
    the largest coefficient change in a sweep is below *tol*.
    ``objective`` holds the value after every sweep, starting from w = 0.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    live = sd > 0
    Z = np.zeros_like(X)
    Z[:, live] = (X[:, live] - mu[live]) / sd[live]
    y_mean = float(y.mean())
    yc = y - y_mean
    # covariance form: every coordinate update costs O(d), not O(n)
    G = Z.T @ Z
    c = Z.T @ yc
    yy = float(yc @ yc)
    w = np.zeros(d)
    Gw = np.zeros(d)

    def objective() -> float:
        return 0.5 * max(yy - 2.0 * float(c @ w) + float(w @ Gw), 0.0) + lam * float(np.abs(w).sum())

    history = [objective()]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(d):
            gjj = G[j, j]
            if gjj == 0.0:
                continue
            old = w[j]
            rho = c[j] - Gw[j] + gjj * old
            new = _soft(rho, lam) / gjj
            if new != old:
                Gw += G[:, j] * (new - old)
                w[j] = new
                max_change = max(max_change, abs(new - old))
        history.append(objective())
        if max_change < tol:
            converged = True
            break

    coef = np.zeros(d)
    coef[live] = w[live] / sd[live]
    intercept = y_mean - float(mu @ coef)
    return LassoResult(coef, intercept, sweeps, converged, history)
