# similarity/lake.py
"""
Vertical temperature distribution in a stagnant lake heated by absorbed
solar radiation.

Two coefficient laws are handled:

  * case 1: rho = alpha q(z) w^m, kappa = beta g(z)
  * case 2: rho = alpha q(z) w^s, kappa = beta w^n  (requires n = s - m)

with w = T - T0. The scaling group z -> z, t -> (C^w)^m t, w -> C^w w
reduces the heat equation to an ODE in eta = z for F, where
w(z, t) = (m t)^(1/m) F(z). For m = 1 both cases have closed forms; for
general m the reduced two-point problem is solved numerically.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .core import Grid1D, ScalarField, linspace
from .exceptions import (
    ConvergenceError, DomainError, InvalidArgumentError, SingularParameterError,
)

logger = logging.getLogger(__name__)

# Reduced BVP solver settings
BVP_TOLERANCE = 1e-10
BVP_MAX_ITERATIONS = 50
BVP_MAX_HALVINGS = 8
BVP_SEGMENT_GROWTH = 6.0   # max e-folds of the fastest mode per shooting segment
BVP_RTOL = 1e-12
BVP_ATOL = 1e-14

# Sample count used when scanning a profile for zero crossings
ZERO_SCAN_POINTS = 2001


@dataclass(frozen=True)
class LakeParams:
    """Physical constants of the lake problem (both coefficient cases)"""
    alpha: float
    beta: float
    mu: float
    xi: float
    c2: float
    gamma: float = 0.0
    m: float = 1.0
    s: float = 1.0
    n: float = 0.0
    h: float = 400.0
    t0: float = 4.0
    case: int = 1

    def __post_init__(self):
        for name in ('alpha', 'beta', 'mu', 'xi', 'c2', 'gamma', 'm', 's', 'n', 'h', 't0'):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite", field=name)
        if self.alpha <= 0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}", field='alpha')
        if self.beta <= 0:
            raise InvalidArgumentError(f"beta must be positive, got {self.beta}", field='beta')
        if self.xi <= 0:
            raise InvalidArgumentError(f"xi must be positive, got {self.xi}", field='xi')
        if self.mu < 0:
            raise InvalidArgumentError(f"mu must be non-negative, got {self.mu}", field='mu')
        if self.xi == self.mu:
            raise InvalidArgumentError("xi must differ from mu", field='xi')
        if self.h <= 0:
            raise InvalidArgumentError(f"h must be positive, got {self.h}", field='h')
        if self.m <= 0:
            raise InvalidArgumentError(f"m must be positive, got {self.m}", field='m')
        if self.gamma < 0:
            raise InvalidArgumentError(f"gamma must be non-negative, got {self.gamma}", field='gamma')
        if self.case not in (1, 2):
            raise InvalidArgumentError(f"case must be 1 or 2, got {self.case}", field='case')
        if self.case == 2:
            if self.s <= 0:
                raise InvalidArgumentError(f"s must be positive, got {self.s}", field='s')
            # only exponent combination left invariant by the group
            if self.n != self.s - self.m:
                raise InvalidArgumentError(
                    f"case 2 needs n = s - m, got n={self.n}, s={self.s}, m={self.m}", field='n')

    @property
    def sigma2(self) -> float:
        return self.alpha / self.beta

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class LakeProfile:
    """Closed-form similarity profile F(eta) with its first two derivatives"""
    case: int
    f_of_eta: Callable
    df_of_eta: Callable
    d2f_of_eta: Callable
    r1: float
    r2: float
    coefficient: float


@dataclass(frozen=True)
class LakeBVPResult:
    """Numerical solution of the reduced ODE for general m"""
    field: ScalarField
    slope: ScalarField
    iterations: int
    mismatch: float
    surface_value: float


def characteristic_roots(params: LakeParams) -> Tuple[float, float]:
    """Roots of r^2 - mu r - sigma^2 = 0; r1 > 0 > r2"""
    sigma2 = params.sigma2
    r1 = 0.5 * (params.mu + math.sqrt(params.mu ** 2 + 4.0 * sigma2))
    # product form avoids the cancellation in (mu - sqrt(...)) / 2
    r2 = -sigma2 / r1
    return r1, r2


def case1_denominator(params: LakeParams) -> float:
    k = params.mu - params.xi
    return params.beta * k ** 2 - params.beta * params.mu * k - params.alpha


def _require_unit_exponent(params: LakeParams):
    if params.m != 1:
        raise InvalidArgumentError(
            f"closed forms hold for m = 1 only, got m={params.m}", field='m')


def check_range(params: LakeParams, z, t):
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(z)) or np.any(z < 0) or np.any(z > params.h):
        raise InvalidArgumentError(f"depth must lie in [0, {params.h}]", field='z')
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise InvalidArgumentError("time must be non-negative", field='t')
    return z, t


def closed_form_profile(params: LakeParams, case: int = None) -> LakeProfile:
    """
    F(eta) for m = 1 with the growing exponential discarded and F'(0) = 0.

    Case 1: F = a3 [exp(-(xi-mu) eta) + ((xi-mu)/r2) exp(r2 eta)]
    Case 2: F = C2/(sigma^2-xi^2) [exp(-xi eta) - (xi/sigma) exp(-sigma eta)]
    """
    case = params.case if case is None else case
    _require_unit_exponent(params)

    if case == 1:
        denominator = case1_denominator(params)
        if denominator == 0 or abs(denominator) <= 1e-14 * (params.alpha + params.beta):
            raise SingularParameterError(
                "beta(mu-xi)^2 - beta mu (mu-xi) - alpha vanishes for these parameters")
        r1, r2 = characteristic_roots(params)
        a3 = -params.c2 / denominator
        k = params.mu - params.xi

        def f(eta):
            eta = np.asarray(eta, dtype=float)
            return a3 * (np.exp(k * eta) - (k / r2) * np.exp(r2 * eta))

        def df(eta):
            eta = np.asarray(eta, dtype=float)
            return a3 * k * (np.exp(k * eta) - np.exp(r2 * eta))

        def d2f(eta):
            eta = np.asarray(eta, dtype=float)
            return a3 * k * (k * np.exp(k * eta) - r2 * np.exp(r2 * eta))

        return LakeProfile(1, f, df, d2f, r1, r2, a3)

    if case == 2:
        sigma, xi = params.sigma, params.xi
        if math.isclose(sigma, xi, rel_tol=1e-12):
            raise SingularParameterError(f"sigma equals xi ({xi}); case 2 closed form is singular")
        amplitude = params.c2 / (params.sigma2 - xi ** 2)

        def f(eta):
            eta = np.asarray(eta, dtype=float)
            return amplitude * (np.exp(-xi * eta) - (xi / sigma) * np.exp(-sigma * eta))

        def df(eta):
            eta = np.asarray(eta, dtype=float)
            return amplitude * xi * (np.exp(-sigma * eta) - np.exp(-xi * eta))

        def d2f(eta):
            eta = np.asarray(eta, dtype=float)
            return amplitude * xi * (xi * np.exp(-xi * eta) - sigma * np.exp(-sigma * eta))

        return LakeProfile(2, f, df, d2f, sigma, -sigma, amplitude)

    raise InvalidArgumentError(f"case must be 1 or 2, got {case}", field='case')


def temperature_case1(params: LakeParams, z, t):
    """T(z, t) for rho = alpha q(z) w, kappa = beta g(z)"""
    z, t = check_range(params, z, t)
    profile = closed_form_profile(params, 1)
    return params.t0 + t * profile.f_of_eta(z)


def temperature_case2(params: LakeParams, z, t):
    """T(z, t) for rho = alpha q(z) w, kappa = beta"""
    z, t = check_range(params, z, t)
    profile = closed_form_profile(params, 2)
    return params.t0 + t * profile.f_of_eta(z)


def temperature(params: LakeParams, z, t):
    if params.case == 1:
        return temperature_case1(params, z, t)
    return temperature_case2(params, z, t)


def source_term(params: LakeParams, z, t):
    """Absorbed radiation r = C2 (m t)^(1/m) exp(-xi z)"""
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidArgumentError("time must be non-negative", field='t')
    return params.c2 * np.power(params.m * t, 1.0 / params.m) * np.exp(-params.xi * z)


def find_zero_crossing(f: Callable, h: float, samples: int = ZERO_SCAN_POINTS):
    """First depth in (0, h] where f vanishes or changes sign, else None"""
    eta = np.linspace(0.0, h, samples)
    values = np.asarray(f(eta), dtype=float)
    interior = values[1:]
    zeros = np.flatnonzero(interior == 0)
    flips = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)
    candidates = []
    if zeros.size:
        candidates.append(eta[zeros[0] + 1])
    if flips.size:
        i = flips[0]
        # linear estimate inside the bracketing cell
        candidates.append(eta[i] - values[i] * (eta[i + 1] - eta[i]) / (values[i + 1] - values[i]))
    return min(candidates) if candidates else None


def coefficient_functions(params: LakeParams, case: int, profile: LakeProfile):
    """
    Density and conductivity shape functions implied by the profile.

    Case 1: q(z) = exp(-mu z)/F(z), g(z) = exp(-mu z)
    Case 2: q(z) = 1/F(z), g = 1 (the conductivity is beta w^n instead)
    """
    crossing = find_zero_crossing(profile.f_of_eta, params.h)
    if crossing is not None:
        raise DomainError(
            f"F vanishes at z = {crossing:.6g} inside (0, {params.h}]; q(z) is undefined",
            location=crossing)

    f = profile.f_of_eta
    mu = params.mu
    if case == 1:
        def q(z):
            z = np.asarray(z, dtype=float)
            return np.exp(-mu * z) / f(z)

        def g(z):
            return np.exp(-mu * np.asarray(z, dtype=float))
    elif case == 2:
        def q(z):
            return 1.0 / f(np.asarray(z, dtype=float))

        def g(z):
            return np.ones_like(np.asarray(z, dtype=float))
    else:
        raise InvalidArgumentError(f"case must be 1 or 2, got {case}", field='case')
    return q, g


# ==================== REDUCED ODE, GENERAL m ====================

def _power(values, m):
    if float(m).is_integer():
        return np.power(values, int(m))
    if np.any(values < 0):
        raise DomainError(f"F^m is undefined for negative F with non-integer m={m}")
    return np.power(values, m)


def _power_slope(values, m):
    """d(F^m)/dF"""
    if m == 1:
        return np.ones_like(values)
    return m * _power(values, m - 1) if float(m).is_integer() else m * np.power(np.abs(values), m - 1)


def _quasi_static_guess(params: LakeParams, eta):
    """Balance sigma^2 F^m = (C2/beta) exp(-(xi-mu) eta), dropping derivatives"""
    forcing = (params.c2 / params.alpha) * np.exp((params.mu - params.xi) * eta)
    magnitude = np.power(np.abs(forcing), 1.0 / params.m)
    guess = np.sign(forcing) * magnitude
    slope = (params.mu - params.xi) / params.m * guess
    return guess, slope


def solve_reduced_ode(params: LakeParams, eta_grid: Grid1D) -> LakeBVPResult:
    """
    F'' - mu F' - (alpha/beta) F^m = -(C2/beta) exp(-(xi-mu) eta)
    with F'(0) = 0 and F(h) = gamma / m^(1/m).

    Shooting on F(0). A single trajectory across the whole lake amplifies
    the growing mode by exp(r1 h), so the interval is cut into segments
    short enough to keep each segment well conditioned; Newton iterates on
    F(0) together with the segment start states until the continuity
    defects and the terminal mismatch fall below BVP_TOLERANCE.
    """
    if params.case != 1:
        raise InvalidArgumentError("the reduced ODE solver covers coefficient case 1 only", field='case')
    if params.m < 1:
        raise InvalidArgumentError(f"reduced ODE solver needs m >= 1, got {params.m}", field='m')
    points = eta_grid.points
    if abs(points[0]) > 1e-12 * params.h or abs(points[-1] - params.h) > 1e-9 * params.h:
        raise InvalidArgumentError(
            f"eta grid must span [0, {params.h}], got [{points[0]}, {points[-1]}]", field='eta')

    mu, sigma2, m = params.mu, params.sigma2, params.m
    forcing_scale = params.c2 / params.beta
    decay = params.xi - mu
    target = params.gamma / m ** (1.0 / m)

    guess_f, guess_df = _quasi_static_guess(params, np.array([0.0]))
    f_scale = max(abs(float(guess_f[0])), target, 1e-12)
    rate = 0.5 * (mu + math.sqrt(mu ** 2 + 4.0 * sigma2 * max(1.0, m * f_scale ** (m - 1))))
    segments = max(1, int(math.ceil(params.h * rate / BVP_SEGMENT_GROWTH)))
    length = params.h / segments
    starts = length * np.arange(segments)
    logger.debug(f"Reduced ODE: m={m}, {segments} shooting segments of length {length:.4g}")

    def rhs(tau, y):
        state = y.reshape(segments, 6)
        eta = starts + tau
        f, df = state[:, 0], state[:, 1]
        jac = sigma2 * _power_slope(f, m)
        out = np.empty_like(state)
        out[:, 0] = df
        out[:, 1] = mu * df + sigma2 * _power(f, m) - forcing_scale * np.exp(-decay * eta)
        # variational equations, Phi' = [[0, 1], [jac, mu]] Phi
        for col in (2, 3):
            a, b = state[:, col], state[:, col + 2]
            out[:, col] = b
            out[:, col + 2] = jac * a + mu * b
        return out.ravel()

    def unpack(x):
        f0 = np.empty(segments)
        df0 = np.empty(segments)
        f0[0], df0[0] = x[0], 0.0
        if segments > 1:
            f0[1:] = x[1::2]
            df0[1:] = x[2::2]
        return f0, df0

    def shoot(x, dense=False):
        f0, df0 = unpack(x)
        y0 = np.zeros((segments, 6))
        y0[:, 0], y0[:, 1] = f0, df0
        y0[:, 2], y0[:, 5] = 1.0, 1.0
        sol = solve_ivp(rhs, (0.0, length), y0.ravel(), method='DOP853',
                        rtol=BVP_RTOL, atol=BVP_ATOL, dense_output=dense)
        if not sol.success:
            raise ConvergenceError(f"Segment integration failed: {sol.message}")
        return sol, sol.y[:, -1].reshape(segments, 6)

    def residual_and_jacobian(x):
        sol, end = shoot(x)
        f0, df0 = unpack(x)
        size = 2 * segments - 1
        residual = np.empty(size)
        jacobian = np.zeros((size, size))
        for k in range(segments):
            phi = np.array([[end[k, 2], end[k, 3]], [end[k, 4], end[k, 5]]])
            cols = [0] if k == 0 else [2 * k - 1, 2 * k]
            if k < segments - 1:
                rows = [2 * k, 2 * k + 1]
                residual[rows[0]] = end[k, 0] - f0[k + 1]
                residual[rows[1]] = end[k, 1] - df0[k + 1]
                jacobian[rows[0], 2 * k + 1] = -1.0
                jacobian[rows[1], 2 * k + 2] = -1.0
            else:
                rows = [size - 1]
                residual[rows[0]] = end[k, 0] - target
            for i, row in enumerate(rows):
                jacobian[row, cols] += phi[i, :len(cols)]
        return residual, jacobian

    f_nodes, df_nodes = _quasi_static_guess(params, starts)
    x = np.empty(2 * segments - 1)
    x[0] = f_nodes[0]
    x[1::2] = f_nodes[1:]
    x[2::2] = df_nodes[1:]

    residual, jacobian = residual_and_jacobian(x)
    norm = float(np.max(np.abs(residual)))
    iterations = 0
    while norm > BVP_TOLERANCE:
        if iterations >= BVP_MAX_ITERATIONS:
            raise ConvergenceError(
                f"Reduced ODE shooting did not converge in {BVP_MAX_ITERATIONS} iterations "
                f"(mismatch {norm:.3e})", last_mismatch=norm, best_iterate=float(x[0]),
                iterations=iterations)
        step = np.linalg.solve(jacobian, -residual)
        damping = 1.0
        domain_error = None
        for _ in range(BVP_MAX_HALVINGS + 1):
            trial = x + damping * step
            try:
                trial_residual, trial_jacobian = residual_and_jacobian(trial)
                trial_norm = float(np.max(np.abs(trial_residual)))
            except DomainError as e:
                domain_error, trial_norm = e, math.inf
            if trial_norm < norm:
                break
            damping *= 0.5
        else:
            if domain_error is not None:
                raise domain_error
            raise ConvergenceError(
                f"Reduced ODE shooting stalled at mismatch {norm:.3e}",
                last_mismatch=norm, best_iterate=float(x[0]), iterations=iterations)
        x, residual, jacobian, norm = trial, trial_residual, trial_jacobian, trial_norm
        iterations += 1
        logger.debug(f"Reduced ODE iteration {iterations}: F(0)={x[0]:.12g}, mismatch={norm:.3e}")

    sol, _ = shoot(x, dense=True)
    segment_index = np.minimum((points // length).astype(int), segments - 1)
    f_values = np.empty_like(points)
    df_values = np.empty_like(points)
    for k in np.unique(segment_index):
        mask = segment_index == k
        local = sol.sol(points[mask] - starts[k])
        f_values[mask] = local[6 * k]
        df_values[mask] = local[6 * k + 1]

    logger.info(f"Reduced ODE converged: m={m}, F(0)={x[0]:.10g}, "
                f"{iterations} iterations, mismatch {norm:.2e}")
    grid = eta_grid
    return LakeBVPResult(
        field=ScalarField(grid, f_values, 'F'),
        slope=ScalarField(grid, df_values, 'dF'),
        iterations=iterations,
        mismatch=norm,
        surface_value=float(x[0]),
    )


def reduced_ode_general_m(params: LakeParams, eta_grid: Grid1D) -> ScalarField:
    """F sampled on eta_grid from the reduced two-point problem"""
    return solve_reduced_ode(params, eta_grid).field


def default_eta_grid(params: LakeParams, num: int = 4001) -> Grid1D:
    return linspace(0.0, params.h, num, name='eta')
