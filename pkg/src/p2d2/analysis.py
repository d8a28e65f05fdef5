"""
Linear-rate certificates and fixed-point diagnostics.

Notation follows the solver: ``delta`` is the local gradient Lipschitz
constant, ``nu`` the strong convexity of the averaged cost, ``sigma_max``
and ``sigma_under`` the largest and smallest nonzero eigenvalues of
``B = (I - A)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .prox import prox as prox_map, value as regularizer_value
from .errors import CertificateUnavailable, InsufficientData, InvalidC, InvalidRho, StepTooLarge
from .model import stacked_gradient

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
ERROR_FLOOR = 1e-14


def nu_rho(nu, delta, sigma_under, rho, c):
    """Restricted strong-convexity constant of the penalized augmented cost."""
    if not rho > 0:
        raise InvalidRho(f"rho must be positive, got {rho}")
    if not 0 < c < nu / (2.0 * delta):
        raise InvalidC(f"c={c} outside (0, nu/(2 delta)) = (0, {nu / (2.0 * delta)})")
    return min(nu - 2.0 * delta * c, rho * sigma_under * c * c / (4.0 * (c * c + 1.0)))


def optimize_nu_rho(nu, delta, sigma_under, rho, tol=1e-10):
    """Golden-section search for the ``c`` maximizing :func:`nu_rho`."""
    lo, hi = 0.0, nu / (2.0 * delta)

    def f(c):
        if c <= 0.0 or c >= nu / (2.0 * delta):
            return 0.0
        return nu_rho(nu, delta, sigma_under, rho, c)

    a, b = lo, hi
    x1, x2 = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
    c = 0.5 * (a + b)
    return c, f(c)


def max_rho(mu, delta, sigma_max):
    """Largest penalty ``rho`` keeping the descent inequality valid."""
    if mu * delta >= 1.0 - sigma_max:
        raise StepTooLarge(f"mu={mu} violates mu < (1 - sigma_max)/delta = {(1.0 - sigma_max) / delta}")
    slack = 1.0 - sigma_max - mu * delta
    return slack / (mu * (1.0 + slack))


def step_size_defaults(constants, spectrum, safety=0.5):
    """
    Certified step sizes.

    ``mu`` is `safety` times its upper bound, ``rho`` the largest admissible
    penalty for that ``mu``, ``c`` maximizes ``nu_rho`` and ``alpha`` is the
    largest dual step allowed by the general (nonzero R) certificate.
    """
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    delta, nu = constants.delta, constants.nu
    smax = spectrum.sigma_max
    mu = safety * (1.0 - smax) / delta
    rho = max_rho(mu, delta, smax)
    c, nr = optimize_nu_rho(nu, delta, spectrum.sigma_under, rho)
    alpha = min(1.0, mu * nr * (2.0 - smax - mu * delta))
    return mu, alpha, rho, c


@dataclass(frozen=True, eq=False)
class RateCertificate:
    mu: float
    alpha: float
    rho: float
    c: float
    nu_rho: float
    gamma1: float
    gamma2: float
    beta: float
    gamma: float
    r_is_zero: bool
    Q_weight: np.ndarray
    delta: float
    nu: float
    sigma_max: float
    sigma_under: float

    def as_dict(self):
        """Scalar fields in a fixed order (``Q_weight`` omitted)."""
        keys = ("sigma_max", "sigma_under", "delta", "nu", "mu", "alpha", "rho", "c",
                "nu_rho", "gamma1", "gamma2", "beta", "gamma", "r_is_zero")
        out = {k: getattr(self, k) for k in keys}
        out["mu_bound"] = (1.0 - self.sigma_max) / self.delta
        # older EXTRA analyses need steps of order nu_rho (1 - sigma_max) / delta^2
        out["extra_classic_step_scale"] = self.nu_rho * (1.0 - self.sigma_max) / self.delta**2
        return out


def rate_certificate(mu, alpha, rho, c, constants, spectrum, r_is_zero=False, B=None):
    """
    Contraction factor of the certified Lyapunov function.

    General R: ``gamma = max(gamma1/beta, gamma2)`` and the dual step must
    satisfy ``alpha <= mu nu_rho (2 - sigma_max - mu delta)``. With R = 0 the
    bound on ``alpha`` relaxes to ``alpha <= 1`` and ``gamma = max(gamma1, gamma2)``.
    """
    delta, nu = constants.delta, constants.nu
    smax, sund = spectrum.sigma_max, spectrum.sigma_under
    if not mu * delta < 1.0 - smax:
        raise CertificateUnavailable(f"step-size clause mu < (1 - sigma_max)/delta violated (mu={mu})")
    if not 0 < alpha <= 1:
        raise CertificateUnavailable(f"clause alpha <= 1 violated (alpha={alpha})")
    bound = max_rho(mu, delta, smax)
    if not 0 < rho <= bound * (1 + 1e-12):
        raise CertificateUnavailable(f"penalty clause 0 < rho <= {bound} violated (rho={rho})")
    try:
        nr = nu_rho(nu, delta, sund, rho, c)
    except (InvalidC, InvalidRho) as exc:
        raise CertificateUnavailable(str(exc)) from exc
    descent = mu * nr * (2.0 - smax - mu * delta)
    if not r_is_zero and alpha > descent * (1 + 1e-12):
        raise CertificateUnavailable(
            f"dual clause alpha <= mu nu_rho (2 - sigma_max - mu delta) = {descent} violated (alpha={alpha})"
        )
    gamma1 = 1.0 - descent
    gamma2 = 1.0 - alpha * sund
    beta = 1.0 - alpha * smax
    gamma = max(gamma1, gamma2) if r_is_zero else max(gamma1 / beta, gamma2)
    if not gamma < 1.0:
        raise CertificateUnavailable(f"contraction factor {gamma} is not below one")
    Q = None
    if B is not None:
        Bm = B.B if hasattr(B, "B") else np.asarray(B)
        Q = np.eye(Bm.shape[0]) - alpha * Bm
    return RateCertificate(mu, alpha, rho, c, nr, gamma1, gamma2, beta, gamma, bool(r_is_zero),
                           Q, delta, nu, smax, sund)


def certify(constants, spectrum, safety=0.5, r_is_zero=False, B=None):
    """Certified steps plus their certificate in one call."""
    mu, alpha, rho, c = step_size_defaults(constants, spectrum, safety)
    return rate_certificate(mu, alpha, rho, c, constants, spectrum, r_is_zero, B)


def certificate_for_steps(mu, alpha, constants, spectrum, r_is_zero=False, B=None):
    """Best certificate (largest ``rho``, optimal ``c``) for given step sizes."""
    try:
        rho = max_rho(mu, constants.delta, spectrum.sigma_max)
    except StepTooLarge as exc:
        raise CertificateUnavailable(f"step-size clause violated: {exc}") from exc
    c, _ = optimize_nu_rho(constants.nu, constants.delta, spectrum.sigma_under, rho)
    return rate_certificate(mu, alpha, rho, c, constants, spectrum, r_is_zero, B)


@dataclass(frozen=True)
class FixedPointReport:
    residual_a: float
    residual_b: float
    residual_c: float
    z_spread: float

    @property
    def total(self):
        return math.sqrt(self.residual_a**2 + self.residual_b**2 + self.residual_c**2)

    @property
    def worst(self):
        return max(self.residual_a, self.residual_b, self.residual_c)


def fixed_point_residual(W, Z, Y, costs, prox_spec, B, mu):
    """
    Residuals of the three fixed-point equations at ``(W, Y, Z)``.

    ``a = |Z - W + mu grad J_mu(W) + B^{1/2} Y|``, ``b = |B^{1/2} Z|``,
    ``c = |W - prox(Z)|``. When `Y` is ``None`` the minimum-norm least-squares
    ``Y`` is used, which makes ``a`` the distance of the primal equation's
    right-hand side from ``range(B^{1/2})``.
    """
    Bm = B.B
    rhs = W - Z - mu * stacked_gradient(costs, W) - Bm @ W
    if Y is None:
        Y = B.B_sqrt_pinv @ rhs
    res_a = float(np.linalg.norm(B.B_sqrt @ Y - rhs))
    res_b = float(np.linalg.norm(B.B_sqrt @ Z))
    res_c = float(np.linalg.norm(W - prox_map(prox_spec, Z, mu)))
    diffs = Z[:, None, :] - Z[None, :, :]
    spread = float(np.sqrt(np.max(np.sum(diffs**2, axis=2)))) if Z.shape[0] > 1 else 0.0
    return FixedPointReport(res_a, res_b, res_c, spread)


def weighted_sq_norm(X, weight):
    """``sum_m x_m^T weight x_m`` over the columns of a K x M array."""
    return float(np.sum(X * (weight @ X)))


def lyapunov_value(W, Y, W_star, Y_star, alpha, beta, B, r_is_zero=False):
    """
    ``|W - W*|^2 + |Y - Y*|^2 / (alpha beta)`` in general, and
    ``|W - W*|_Q^2 + |Y - Y*|^2 / alpha`` with ``Q = I - alpha B`` when R = 0.
    """
    dW, dY = W - W_star, Y - Y_star
    if r_is_zero:
        Q = np.eye(B.B.shape[0]) - alpha * B.B
        return weighted_sq_norm(dW, Q) + float(np.sum(dY * dY)) / alpha
    return float(np.sum(dW * dW)) + float(np.sum(dY * dY)) / (alpha * beta)


def fit_linear_rate(errors, window=0.5, floor=ERROR_FLOOR):
    """
    Least-squares fit of ``log e_i`` against ``i`` on the tail of a sequence.

    `errors` is an :class:`~p2d2.solver.IterationTrace` (its ``rel_sq_error``
    column) or a plain sequence. Entries at or below `floor` are discarded
    before the trailing `window` fraction is taken. Returns
    ``(gamma_hat, r_squared)``.
    """
    if hasattr(errors, "records"):
        iters = np.array([r.iter for r in errors.records], dtype=float)
        vals = errors.column("rel_sq_error")
    else:
        vals = np.asarray(errors, dtype=float)
        iters = np.arange(vals.size, dtype=float)
    keep = np.isfinite(vals) & (vals > floor)
    iters, vals = iters[keep], vals[keep]
    if vals.size < 10:
        raise InsufficientData(f"only {vals.size} usable records (need >= 10)")
    start = int(math.floor(vals.size * (1.0 - window)))
    iters, logs = iters[start:], np.log(vals[start:])
    if logs.size < 2:
        raise InsufficientData("window too small")
    if np.ptp(logs) == 0.0:
        return 1.0, 1.0
    fit = stats.linregress(iters, logs)
    return float(math.exp(fit.slope)), float(fit.rvalue**2)
