"""Densities and posterior expectations of the Student's-t mixture.

Every density is computed in log space and mixture responsibilities are
normalised with log-sum-exp, so far-apart views never underflow. The
covariance is isotropic, Sigma = sigma2 * I_3, shared by all components, and
all components have the same membership probability and degrees of freedom.

Example of the heavier tail of the t-distribution::

    >>> import numpy as np
    >>> from stmmreg.stmm import MixtureParams, gaussian_log_pdf, t_log_pdf
    >>> x, mu = np.array([4.0, 0, 0]), np.zeros(3)
    >>> bool(t_log_pdf(x, mu, MixtureParams(1.0, 3.0)) > gaussian_log_pdf(x, mu, 1.0))
    True
"""

from typing import Union
from dataclasses import dataclass
import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.integrate import quad

DIM: int = 3
Real = Union[float, np.ndarray]


class InvalidMixtureParamsError(ValueError):
    """Mixture parameters or arguments outside their domain."""


@dataclass(frozen=True)
class MixtureParams:
    """
    Shared parameters of every mixture component.

    Args:
        sigma2 (float): isotropic variance sigma^2 > 0, squared length units.
        dof (float, optional): degrees of freedom v > 0. Defaults to 3.
        dim (int, optional): dimension d, fixed to 3. Defaults to 3.
    """

    sigma2: float
    dof: float = 3.0
    dim: int = DIM

    def __post_init__(self) -> None:
        _check_sigma2(self.sigma2)
        if not (np.isfinite(self.dof) and self.dof > 0):
            raise InvalidMixtureParamsError(f"dof must be finite and positive, got {self.dof}.")
        if self.dim != DIM:
            raise InvalidMixtureParamsError(f"Only d = {DIM} is supported, got {self.dim}.")


def _check_sigma2(sigma2: float) -> None:
    if not (np.isfinite(sigma2) and sigma2 > 0):
        raise InvalidMixtureParamsError(f"sigma2 must be finite and positive, got {sigma2}.")


def _squared_distance(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    diff = np.asarray(x, dtype=float) - np.asarray(mu, dtype=float)
    return np.sum(diff * diff, axis=-1)


def gaussian_log_pdf_delta2(delta2: Real, sigma2: float, dim: int = DIM) -> Real:
    """
    Isotropic Gaussian log-density from the squared Mahalanobis distance.

    Args:
        delta2 (Real): ||x - mu||^2 / sigma2.
        sigma2 (float): variance.
        dim (int, optional): Defaults to 3.

    Returns:
        Real: log-density.
    """
    _check_sigma2(sigma2)
    return -0.5 * dim * np.log(2.0 * np.pi * sigma2) - 0.5 * np.asarray(delta2)


def gaussian_log_pdf(x: np.ndarray, mu: np.ndarray, sigma2: float) -> Real:
    """
    Log-density of N(mu, sigma2 I_3) at x.

    Args:
        x (np.ndarray): point(s), (..., 3).
        mu (np.ndarray): mean(s), broadcastable to x.
        sigma2 (float): variance.

    Raises:
        InvalidMixtureParamsError: if sigma2 <= 0.

    Returns:
        Real: -(d/2) log(2 pi sigma2) - ||x - mu||^2 / (2 sigma2).

    Example::
        >>> import numpy as np
        >>> from stmmreg.stmm import gaussian_log_pdf
        >>> round(float(gaussian_log_pdf(np.zeros(3), np.zeros(3), 1.0)), 4)
        -2.7568
    """
    _check_sigma2(sigma2)
    return gaussian_log_pdf_delta2(_squared_distance(x, mu) / sigma2, sigma2)


def log_t_normaliser(params: MixtureParams) -> float:
    """log Gamma((v+d)/2) - log Gamma(v/2) - (d/2) log(pi v) - (d/2) log sigma2."""
    v, d = params.dof, params.dim
    return float(
        gammaln(0.5 * (v + d))
        - gammaln(0.5 * v)
        - 0.5 * d * np.log(np.pi * v)
        - 0.5 * d * np.log(params.sigma2)
    )


def t_log_pdf_delta2(delta2: Real, params: MixtureParams) -> Real:
    """
    Student's-t log-density from the squared Mahalanobis distance.

    Args:
        delta2 (Real): ||x - mu||^2 / sigma2, any shape.
        params (MixtureParams): sigma2 and v.

    Returns:
        Real: log-density, same shape as `delta2`.
    """
    v, d = params.dof, params.dim
    return log_t_normaliser(params) - 0.5 * (v + d) * np.log1p(np.asarray(delta2) / v)


def t_log_pdf(x: np.ndarray, mu: np.ndarray, params: MixtureParams) -> Real:
    """
    Log-density of the isotropic multivariate t-distribution at x.

    Args:
        x (np.ndarray): point(s), (..., 3).
        mu (np.ndarray): centroid(s), broadcastable to x.
        params (MixtureParams): sigma2 and v.

    Returns:
        Real: log-density.

    Example::
        >>> import numpy as np
        >>> from stmmreg.stmm import MixtureParams, t_log_pdf
        >>> round(float(t_log_pdf(np.zeros(3), np.zeros(3), MixtureParams(1.0, 3.0))), 4)
        -2.5511
    """
    return t_log_pdf_delta2(_squared_distance(x, mu) / params.sigma2, params)


def gamma_pdf(u: Real, alpha: float, beta: float) -> Real:
    """
    Gamma density with shape alpha and rate beta; zero for u <= 0.

    Args:
        u (Real): argument(s).
        alpha (float): shape > 0.
        beta (float): rate > 0.

    Raises:
        InvalidMixtureParamsError: for a non-positive shape or rate.

    Returns:
        Real: beta^alpha u^(alpha-1) exp(-beta u) / Gamma(alpha).

    Example::
        >>> from stmmreg.stmm import gamma_pdf
        >>> round(float(gamma_pdf(0.5, 1.0, 1.0)), 4), float(gamma_pdf(-1.0, 1.0, 1.0))
        (0.6065, 0.0)
    """
    if not (alpha > 0 and beta > 0):
        raise InvalidMixtureParamsError(f"Gamma shape and rate must be positive, got {alpha}, {beta}.")
    u = np.asarray(u, dtype=float)
    positive = u > 0
    safe_u = np.where(positive, u, 1.0)
    log_pdf = alpha * np.log(beta) + (alpha - 1.0) * np.log(safe_u) - beta * safe_u - gammaln(alpha)
    out = np.where(positive, np.exp(log_pdf), 0.0)
    return out if out.ndim else float(out)


def scale_mixture_pdf(x: np.ndarray, mu: np.ndarray, params: MixtureParams) -> float:
    """
    t-density at x by integrating a Gaussian with precision scale u over its
    Gamma(v/2, v/2) prior.

    Numerical quadrature of the marginalisation that defines the
    t-distribution; slow, so only meant for checking `t_log_pdf`.

    Args:
        x (np.ndarray): (3,) point.
        mu (np.ndarray): (3,) centroid.
        params (MixtureParams): sigma2 and v.

    Returns:
        float: density.
    """
    r2 = float(_squared_distance(x, mu))
    half_v, d, sigma2 = 0.5 * params.dof, params.dim, params.sigma2

    def integrand(u: float) -> float:
        if u <= 0:
            return 0.0
        log_normal = -0.5 * d * np.log(2.0 * np.pi * sigma2 / u) - 0.5 * u * r2 / sigma2
        return float(np.exp(log_normal)) * gamma_pdf(u, half_v, half_v)

    value, _ = quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-11, limit=500)
    return value


def normalize_log_weights(log_f: np.ndarray, axis: int = -1) -> np.ndarray:
    """
    Turn unnormalised log-weights into probabilities along `axis`.

    Example::
        >>> import numpy as np
        >>> from stmmreg.stmm import normalize_log_weights
        >>> np.round(normalize_log_weights(np.array([-1000.0, -1000.0])), 12)
        array([0.5, 0.5])
    """
    log_f = np.asarray(log_f, dtype=float)
    return np.exp(log_f - logsumexp(log_f, axis=axis, keepdims=True))


def _centroid_array(centroids: np.ndarray) -> np.ndarray:
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))
    if centroids.size == 0:
        raise InvalidMixtureParamsError("The mixture needs at least one centroid.")
    assert centroids.shape[-1] == DIM
    return centroids


def mixture_density(x: np.ndarray, centroids: np.ndarray, params: MixtureParams) -> float:
    """
    Equal-weight mixture of M - 1 t-components centred on `centroids`.

    There is no uniform outlier component.

    Args:
        x (np.ndarray): (3,) transformed point.
        centroids (np.ndarray): (M - 1, 3) nearest neighbours in the other views.
        params (MixtureParams): shared sigma2 and v.

    Raises:
        InvalidMixtureParamsError: for an empty centroid list.

    Returns:
        float: density.
    """
    centroids = _centroid_array(centroids)
    log_f = t_log_pdf(np.asarray(x, dtype=float)[None, :], centroids, params)
    return float(np.exp(logsumexp(log_f) - np.log(centroids.shape[0])))


def posterior_z(x: np.ndarray, centroids: np.ndarray, params: MixtureParams) -> np.ndarray:
    """
    Responsibility of each t-component for the point x.

    Args:
        x (np.ndarray): (3,) transformed point.
        centroids (np.ndarray): (M - 1, 3) component centroids.
        params (MixtureParams): shared sigma2 and v.

    Returns:
        np.ndarray: (M - 1,) probabilities summing to one.

    Example::
        >>> import numpy as np
        >>> from stmmreg.stmm import MixtureParams, posterior_z
        >>> np.round(posterior_z(np.zeros(3), [[1.0, 0, 0], [0, -1.0, 0]], MixtureParams(1.0)), 12)
        array([0.5, 0.5])
    """
    centroids = _centroid_array(centroids)
    log_f = t_log_pdf(np.asarray(x, dtype=float)[None, :], centroids, params)
    return normalize_log_weights(log_f)


def expected_u(delta2: Real, params: MixtureParams) -> Real:
    """
    Posterior expectation of the precision scale u, (v + d) / (v + delta2).

    Args:
        delta2 (Real): squared Mahalanobis distance(s), >= 0.
        params (MixtureParams): v and d.

    Raises:
        InvalidMixtureParamsError: for a negative delta2.

    Returns:
        Real: U in (0, (v + d) / v].

    Example::
        >>> from stmmreg.stmm import MixtureParams, expected_u
        >>> expected_u(0.0, MixtureParams(1.0, 3.0)), expected_u(3.0, MixtureParams(1.0, 3.0))
        (2.0, 1.0)
    """
    delta2_arr = np.asarray(delta2, dtype=float)
    if np.any(delta2_arr < 0):
        raise InvalidMixtureParamsError("delta2 must be non-negative.")
    out = (params.dof + params.dim) / (params.dof + delta2_arr)
    return out if out.ndim else float(out)


def robust_posterior(posterior: Real, scale: Real) -> Real:
    """
    Robust weight P* = P U used in the weighted least-squares M-step.

    Example::
        >>> from stmmreg.stmm import robust_posterior
        >>> robust_posterior(1.0, 2.0)
        2.0
    """
    return posterior * scale
