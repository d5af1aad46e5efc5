"""L2-regularized logistic regression fitted by gradient descent."""

import numpy as np


def _log1pexp(z):
    return np.logaddexp(0.0, z)


def loss_and_grad(theta, X, y, l2):
    """Mean log-loss plus (l2 / 2n)·||w||² and its gradient.

    ``theta`` is ``[w..., b]``; the intercept is not penalized.  The optimum
    equals that of the summed loss with penalty (l2 / 2)·||w||².
    """
    n = X.shape[0]
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    sign = 2.0 * y - 1.0
    loss = _log1pexp(-sign * z).sum() / n + 0.5 * l2 * (w @ w) / n
    p = 0.5 * (1.0 + np.tanh(0.5 * z))
    r = (p - y) / n
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r + l2 * w / n
    grad[-1] = r.sum()
    return loss, grad


def fit_logistic(X, y, l2=1.0, tol=1e-8, max_iter=5000):
    """Full-batch gradient descent with Armijo backtracking.

    Each iteration's trial step is the Barzilai-Borwein estimate from the
    previous move; backtracking halves it until sufficient decrease holds.
    Returns ``(theta, iterations, converged)``.
    """
    y = y.astype(float)
    theta = np.zeros(X.shape[1] + 1)
    loss, grad = loss_and_grad(theta, X, y, l2)
    step = 1.0
    prev_theta = prev_grad = None
    for it in range(1, max_iter + 1):
        gnorm2 = grad @ grad
        if np.sqrt(gnorm2) < tol:
            return theta, it - 1, True
        if prev_theta is not None:
            s = theta - prev_theta
            dg = grad - prev_grad
            sy = s @ dg
            if sy > 0:
                step = (s @ s) / sy
        for _ in range(60):
            candidate = theta - step * grad
            c_loss, c_grad = loss_and_grad(candidate, X, y, l2)
            if c_loss <= loss - 0.5 * step * gnorm2:
                break
            step *= 0.5
        else:
            return theta, it, False
        prev_theta, prev_grad = theta, grad
        theta, loss, grad = candidate, c_loss, c_grad
    return theta, max_iter, bool(np.sqrt(grad @ grad) < tol)


def logistic_margin(theta, X):
    return X @ theta[:-1] + theta[-1]
