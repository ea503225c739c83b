# similarity/plume.py
"""
Steady dispersion of a ground-level pollutant under an inversion lid.

    u C_x = kappa1 C_xx + kappa2 C_yy   on x > 0, 0 < y < 1
    C(0, y) = 1,  C_y(x, 1) = 0,  kappa C_y(x, 0) = lambda gamma C(x, 0)

Separated modes e^{m x} cos p(y - 1) satisfy the lid condition; the ground
condition gives tan p = lambda gamma / (kappa2 p).
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.optimize import bisect

from .exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

PRINTED_FORM = 'paper-exact'
CONSISTENT_QUADRATIC = 'consistent-quadratic'
ROOT_MODES = (PRINTED_FORM, CONSISTENT_QUADRATIC)

EIGEN_XTOL = 1e-12
DEFAULT_TERMS = 200


@dataclass(frozen=True)
class PlumeParams:
    u: float
    kappa1: float
    kappa2: float
    lam: float = 0.0
    h: float = 1.0
    u0: float = 1.0
    n_terms: int = DEFAULT_TERMS
    root_mode: str = PRINTED_FORM

    def __post_init__(self):
        for name in ('u', 'kappa1', 'kappa2', 'lam', 'h', 'u0'):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite", field=name)
        if self.u < 0:
            raise InvalidArgumentError(f"u must be non-negative, got {self.u}", field='u')
        if self.kappa1 <= 0:
            raise InvalidArgumentError(f"kappa1 must be positive, got {self.kappa1}", field='kappa1')
        if self.kappa2 <= 0:
            raise InvalidArgumentError(f"kappa2 must be positive, got {self.kappa2}", field='kappa2')
        if self.lam < 0:
            raise InvalidArgumentError(f"lambda must be non-negative, got {self.lam}", field='lambda')
        if self.h <= 0:
            raise InvalidArgumentError(f"h must be positive, got {self.h}", field='h')
        if self.u0 <= 0:
            raise InvalidArgumentError(f"u0 must be positive, got {self.u0}", field='u0')
        if int(self.n_terms) != self.n_terms or self.n_terms < 1:
            raise InvalidArgumentError(f"n_terms must be an integer >= 1, got {self.n_terms}",
                                       field='n_terms')
        if self.root_mode not in ROOT_MODES:
            raise InvalidArgumentError(
                f"root_mode must be one of {', '.join(ROOT_MODES)}, got '{self.root_mode}'",
                field='root_mode')

    @property
    def gamma(self) -> float:
        return math.sqrt(self.h / self.u0)

    @property
    def robin(self) -> float:
        """lambda gamma / kappa2, the right-hand side constant of p tan p"""
        return self.lam * self.gamma / self.kappa2


def alpha_beta(params: PlumeParams) -> Tuple[float, float]:
    if params.kappa2 <= 0:
        raise InvalidArgumentError("kappa2 must be positive", field='kappa2')
    return params.kappa1 / params.kappa2, params.u / (2.0 * params.kappa2)


def _check_branch(branch):
    if int(branch) != branch or branch < 1:
        raise InvalidArgumentError(f"branch must be an integer >= 1, got {branch}", field='branch')
    return int(branch)


def eigen_p(params: PlumeParams, branch: int = 1) -> float:
    """n-th positive root of tan p = c / p, c = lambda gamma / kappa2"""
    branch = _check_branch(branch)
    c = params.robin
    left = (branch - 1) * math.pi
    if c == 0:
        return left

    def condition(p):
        # p sin p - c cos p has the zeros of tan p - c/p without the poles
        return p * math.sin(p) - c * math.cos(p)

    return bisect(condition, left, left + 0.5 * math.pi, xtol=EIGEN_XTOL)


def decay_rate(params: PlumeParams, p):
    """
    Decaying streamwise exponent m for transverse wavenumber p.

    paper-exact: m = beta - sqrt(beta^2 + alpha p^2)
    consistent-quadratic: the same divided by alpha, the decaying root of
    alpha m^2 - 2 beta m - p^2 = 0
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise InvalidArgumentError("p must be non-negative", field='p')
    alpha, beta = alpha_beta(params)
    # beta - sqrt(beta^2 + a) written without cancellation
    m = -alpha * p ** 2 / (beta + np.sqrt(beta ** 2 + alpha * p ** 2)) if beta > 0 else -np.sqrt(alpha) * p
    if params.root_mode == CONSISTENT_QUADRATIC:
        m = m / alpha
    return float(m) if m.ndim == 0 else m


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise InvalidArgumentError("x must be non-negative", field='x')
    return x


def _check_y(y):
    y = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(y)) or np.any(y < 0) or np.any(y > 1):
        raise InvalidArgumentError("y must lie in [0, 1]", field='y')
    return y


def concentration_no_absorption(params: PlumeParams, x):
    """Weak-absorption limit C = exp([u - sqrt(u^2 + 4 lambda kappa1 gamma)] x / (2 kappa2))"""
    x = _check_x(x)
    u = params.u
    sink = 4.0 * params.lam * params.kappa1 * params.gamma
    exponent = -sink / (u + math.sqrt(u * u + sink)) if sink > 0 else 0.0
    return np.exp(exponent * x / (2.0 * params.kappa2))


def series_wavenumbers(n_terms: int) -> np.ndarray:
    """N pi with N = (2n - 1)/2, n = 1..n_terms"""
    n = np.arange(1, int(n_terms) + 1)
    return (2 * n - 1) * 0.5 * math.pi


def truncation_bound(n_terms: int) -> float:
    """Magnitude bound 2/(pi n) of the first omitted series term"""
    if int(n_terms) != n_terms or n_terms < 1:
        raise InvalidArgumentError(f"n_terms must be an integer >= 1, got {n_terms}", field='n_terms')
    return 2.0 / (math.pi * n_terms)


def concentration_full_absorption(params: PlumeParams, x, y, n_terms: int = None):
    """
    Strong-absorption limit (C = 0 on the ground):
        C = 2 sum_n sin(N pi)/(N pi) e^{m_n x} cos(N pi (y - 1))
    """
    x, y = np.broadcast_arrays(_check_x(x), _check_y(y))
    wavenumbers = series_wavenumbers(params.n_terms if n_terms is None else n_terms)
    rates = decay_rate(params, wavenumbers)
    coefficients = 2.0 * np.sin(wavenumbers) / wavenumbers
    terms = (coefficients * np.exp(rates * x[..., None])
             * np.cos(wavenumbers * (y[..., None] - 1.0)))
    return np.sum(terms, axis=-1)


def separated_mode(params: PlumeParams, x, y, branch: int = 1, amplitude: float = 1.0):
    """amplitude e^{m x} cos p (y - 1) for the branch-th eigenvalue p"""
    x, y = np.broadcast_arrays(_check_x(x), _check_y(y))
    p = eigen_p(params, branch)
    m = decay_rate(params, p)
    return amplitude * np.exp(m * x) * np.cos(p * (y - 1.0))


def eigen_table(params: PlumeParams, count: int) -> List[Tuple[int, float, float, float]]:
    """(n, N, p, m) for the first `count` branches, N = p / pi"""
    rows = []
    for branch in range(1, _check_branch(count) + 1):
        p = eigen_p(params, branch)
        rows.append((branch, p / math.pi, p, decay_rate(params, p)))
    return rows


def term_residual(params: PlumeParams, p: float, m: float) -> float:
    """u C_x - kappa1 C_xx - kappa2 C_yy of e^{m x} cos p(y-1), divided by the mode"""
    return params.u * m - params.kappa1 * m * m + params.kappa2 * p * p
