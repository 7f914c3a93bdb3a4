"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code; each oracle is coded
from the model definition directly.
"""

import math

import numpy as np
from scipy import integrate
from scipy.integrate import trapezoid


def log_post_lambda(lam, theta_hat, s2, m0, tau, a, b):
    v = s2 + lam * tau
    return -0.5 * np.log(v) - (theta_hat - m0) ** 2 / (2 * v) - (a / 2 + 1) * np.log(lam) - b / (2 * lam)


def grid_mode(theta_hat, s2, m0, tau, a, b, lo=-18.5, hi=18.5, fine=1e-6):
    """Two-level grid search on log lambda: 1e-3 coarse, then ``fine`` steps."""
    u = np.arange(lo, hi, 1e-3)
    k = int(np.argmax(log_post_lambda(np.exp(u), theta_hat, s2, m0, tau, a, b)))
    u2 = np.arange(u[k] - 2e-3, u[k] + 2e-3, fine)
    f = log_post_lambda(np.exp(u2), theta_hat, s2, m0, tau, a, b)
    return float(np.exp(u2[int(np.argmax(f))]))


def eq1(theta_hat, s2, m0, tau, lam):
    """Conditional posterior mean and variance, coded as precision weighting."""
    prec = 1.0 / s2 + 1.0 / (lam * tau)
    mean = (theta_hat / s2 + m0 / (lam * tau)) / prec
    return mean, 1.0 / prec


def posterior_moments_2d(theta_hat, s2, m0, tau, a, b, n_theta=1601, n_u=1601):
    """E[theta | theta_hat] and Var[theta | theta_hat] by a 2-D trapezoid grid over (theta, log lambda)."""
    alpha, beta = a / 2, b / 2
    # log lambda range covering the posterior of lambda
    u = np.linspace(-12.0, 14.0, n_u)
    lam = np.exp(u)
    sd = math.sqrt(s2)
    spread = abs(theta_hat - m0) + 12 * sd
    th = np.linspace(min(theta_hat, m0) - spread, max(theta_hat, m0) + spread, n_theta)
    T, L = np.meshgrid(th, lam, indexing="ij")
    U = np.log(L)
    logj = (
        -0.5 * (theta_hat - T) ** 2 / s2
        - 0.5 * np.log(L * tau)
        - 0.5 * (T - m0) ** 2 / (L * tau)
        - (alpha + 1) * U
        - beta / L
        + U  # Jacobian of lambda = e^u
    )
    w = np.exp(logj - logj.max())
    z = trapezoid(trapezoid(w, u, axis=1), th)
    m = trapezoid(trapezoid(w * T, u, axis=1), th) / z
    m2 = trapezoid(trapezoid(w * T**2, u, axis=1), th) / z
    return float(m), float(m2 - m * m)


def posterior_mean_1d(theta_hat, s2, m0, tau, a, b):
    """E[theta | theta_hat] via scipy.quad over lambda of p(lambda | theta_hat) * E[theta | lambda]."""
    f = lambda u: math.exp(log_post_lambda(math.exp(u), theta_hat, s2, m0, tau, a, b) + u)
    g = lambda u: f(u) * eq1(theta_hat, s2, m0, tau, math.exp(u))[0]
    z = integrate.quad(f, -30, 30, limit=400)[0]
    return integrate.quad(g, -30, 30, limit=400)[0] / z


def batch_means_se(x, n_batches=40):
    x = np.asarray(x, dtype=float)
    k = x.size // n_batches
    means = x[: k * n_batches].reshape(n_batches, k).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))
