# similarity/blayer.py
"""
Unsteady free convection along a heated vertical plate.

With the invariant eta = y / sqrt(a1 t + b1) and
    Psi = (x + b2) F(eta) / sqrt(a1 t + b1),  T = T_w(x, t) Theta(eta)
the boundary-layer equations reduce to

    F'''   = -(a1 eta/2 + F) F'' + F'^2 - a1 F' - Theta
    Theta'' = -Pr [(a1 eta/2 + F) Theta' + (2 a1 - F') Theta]

with F(0) = F'(0) = 0, Theta(0) = 1 and F', Theta -> 0 far from the plate.
The two missing wall values (F''(0), Theta'(0)) are found by Newton
shooting at eta_max.
"""
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly

from .core import Grid1D, ResidualReport, linspace
from .exceptions import (
    ConvergenceError, DivergenceError, ExtrapolationError, InvalidArgumentError,
)

logger = logging.getLogger(__name__)

# Shooting settings
DEFAULT_GUESS = (0.6, -0.5)
SHOOTING_TOLERANCE = 1e-8
SHOOTING_RTOL = 1e-10
SHOOTING_ATOL = 1e-14
JACOBIAN_STEP = 1e-6
MAX_NEWTON_ITERATIONS = 50
MAX_HALVINGS = 8
STAGNATION_STEP = 1e-14
POLISH_ITERATIONS = 4
# a trajectory leaving either band is running away and is cut off there
BLOW_UP_LIMIT = 1e3
PROFILE_BAND = 10.0

# Fallback starting strategies
DOMAIN_LADDER = (5.0, 8.0, 11.0)
GRID_SEARCH_F2 = np.linspace(0.0, 2.0, 9)
GRID_SEARCH_THETA1 = np.linspace(-2.0, 0.0, 9)
GRID_SEARCH_STARTS = 4
CONTINUATION_STEPS = 8

# Residual sampling
RESIDUAL_STEP = 2e-4

DEFAULT_WALL_FACTOR = 0.4472


@dataclass(frozen=True)
class BLayerParams:
    prandtl: float
    a1: float = 0.0
    b1: float = 1.0
    b2: float = 0.0
    eta_max: float = 15.0
    t0_scale: float = 1.0
    flux_b1_variant: bool = False
    wall_factor: float = DEFAULT_WALL_FACTOR
    grid_points: int = 2001

    def __post_init__(self):
        for name in ('prandtl', 'a1', 'b1', 'b2', 'eta_max', 't0_scale', 'wall_factor'):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite", field=name)
        if self.prandtl <= 0:
            raise InvalidArgumentError(f"prandtl must be positive, got {self.prandtl}", field='prandtl')
        if self.eta_max < 10:
            raise InvalidArgumentError(f"eta_max must be at least 10, got {self.eta_max}", field='eta_max')
        if self.wall_factor <= 0:
            raise InvalidArgumentError(f"wall_factor must be positive, got {self.wall_factor}",
                                       field='wall_factor')
        if self.t0_scale <= 0:
            raise InvalidArgumentError(f"t0_scale must be positive, got {self.t0_scale}", field='t0_scale')
        if int(self.grid_points) != self.grid_points or self.grid_points < 3:
            raise InvalidArgumentError(f"grid_points must be an integer >= 3, got {self.grid_points}",
                                       field='grid_points')

    def scale(self, t):
        return self.a1 * np.asarray(t, dtype=float) + self.b1


@dataclass(frozen=True, eq=False)
class SimilaritySolution:
    """
    Tabulated similarity profiles on [0, eta_max]. Besides the shooting
    state (F, F', F'', Theta, Theta') the ODE right-hand sides F''' and
    Theta'' are kept so profiles interpolate with Hermite data.
    """
    eta: Grid1D
    F: np.ndarray
    dF: np.ndarray
    d2F: np.ndarray
    d3F: np.ndarray
    Theta: np.ndarray
    dTheta: np.ndarray
    d2Theta: np.ndarray
    wall_theta_slope: float
    wall_shear: float
    iterations: int = 0
    mismatch: float = 0.0

    def __post_init__(self):
        n = len(self.eta)
        for name in ('F', 'dF', 'd2F', 'd3F', 'Theta', 'dTheta', 'd2Theta'):
            array = np.array(getattr(self, name), dtype=float)
            if array.shape != (n,):
                raise InvalidArgumentError(f"{name} has shape {array.shape}, expected ({n},)", field=name)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def eta_max(self) -> float:
        return float(self.eta.points[-1])

    @cached_property
    def _f_poly(self) -> BPoly:
        return BPoly.from_derivatives(
            self.eta.points, np.column_stack([self.F, self.dF, self.d2F, self.d3F]))

    @cached_property
    def _theta_poly(self) -> BPoly:
        return BPoly.from_derivatives(
            self.eta.points, np.column_stack([self.Theta, self.dTheta, self.d2Theta]))

    def check_range(self, eta):
        eta = np.asarray(eta, dtype=float)
        limit = self.eta_max * (1.0 + 1e-12)
        if np.any(eta < 0) or np.any(eta > limit):
            worst = float(np.max(eta)) if np.any(eta > limit) else float(np.min(eta))
            raise ExtrapolationError(
                f"eta = {worst:.6g} lies outside the tabulated range [0, {self.eta_max}]")
        return eta

    def f(self, eta, nu: int = 0):
        """nu-th derivative of F at eta (piecewise Hermite, C3)"""
        eta = self.check_range(eta)
        return self._f_poly(eta, nu)

    def theta(self, eta, nu: int = 0):
        eta = self.check_range(eta)
        return self._theta_poly(eta, nu)


class BoundaryLayerFields(NamedTuple):
    u: np.ndarray
    v: np.ndarray
    T_w: np.ndarray
    q_flux: np.ndarray
    T: np.ndarray


def similarity_rhs(eta: float, state, params: BLayerParams):
    """Right-hand side of the similarity system for state (F, F', F'', Theta, Theta')"""
    f, df, d2f, theta, dtheta = (float(v) for v in state)
    if not all(math.isfinite(v) for v in (eta, f, df, d2f, theta, dtheta)):
        raise InvalidArgumentError("similarity_rhs received a non-finite state", field='state')
    a1, pr = params.a1, params.prandtl
    convect = 0.5 * a1 * eta + f
    d3f = -convect * d2f + df * df - a1 * df - theta
    d2theta = -pr * (convect * dtheta + (2.0 * a1 - df) * theta)
    return np.array([df, d2f, d3f, dtheta, d2theta])


def _stacked_rhs(a1: float, pr: float, copies: int) -> Callable:
    def rhs(eta, y):
        state = y.reshape(copies, 5)
        f, df, d2f, theta, dtheta = state.T
        convect = 0.5 * a1 * eta + f
        out = np.empty_like(state)
        out[:, 0] = df
        out[:, 1] = d2f
        out[:, 2] = -convect * d2f + df * df - a1 * df - theta
        out[:, 3] = dtheta
        out[:, 4] = -pr * (convect * dtheta + (2.0 * a1 - df) * theta)
        return out.ravel()
    return rhs


def _blow_up(eta, y):
    # F' and Theta sit in columns 1 and 3 of every stacked copy
    profiles = np.concatenate([np.abs(y[1::5]), np.abs(y[3::5])])
    return min(BLOW_UP_LIMIT - np.max(np.abs(y)), PROFILE_BAND - np.max(profiles))


_blow_up.terminal = True
_blow_up.direction = -1


def _integrate(params: BLayerParams, guesses: np.ndarray, t_eval=None, eta_end: Optional[float] = None):
    """Integrate one copy per row of guesses = [[F''(0), Theta'(0)], ...] together"""
    guesses = np.atleast_2d(np.asarray(guesses, dtype=float))
    copies = guesses.shape[0]
    y0 = np.zeros((copies, 5))
    y0[:, 2] = guesses[:, 0]
    y0[:, 3] = 1.0
    y0[:, 4] = guesses[:, 1]
    end = params.eta_max if eta_end is None else eta_end
    sol = solve_ivp(
        _stacked_rhs(params.a1, params.prandtl, copies), (0.0, end), y0.ravel(),
        method='RK45', rtol=SHOOTING_RTOL, atol=SHOOTING_ATOL, events=_blow_up, t_eval=t_eval)
    if sol.status == 1 or not sol.success:
        eta_fail = float(sol.t[-1]) if sol.t.size else 0.0
        raise DivergenceError(
            f"Shooting trajectory from {guesses[0].tolist()} blew up near eta = {eta_fail:.4g}",
            eta=eta_fail)
    return sol


def _end_mismatch(sol, copies: int) -> np.ndarray:
    end = sol.y[:, -1].reshape(copies, 5)
    return end[:, [1, 3]]


def shooting_map(params: BLayerParams, guess, eta_end: Optional[float] = None) -> np.ndarray:
    """(F''(0), Theta'(0)) -> (F'(eta_max), Theta(eta_max))"""
    sol = _integrate(params, [guess], eta_end=eta_end)
    return _end_mismatch(sol, 1)[0]


def _map_with_jacobian(params: BLayerParams, guess, scheme: str = 'forward',
                       step: float = JACOBIAN_STEP, eta_end: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    guess = np.asarray(guess, dtype=float)
    offsets = np.eye(2) * step
    if scheme == 'forward':
        starts = np.vstack([guess, guess + offsets])
    elif scheme == 'central':
        starts = np.vstack([guess, guess + offsets, guess - offsets])
    else:
        raise InvalidArgumentError(f"unknown jacobian scheme '{scheme}'", field='scheme')
    # one integration for all copies so they share step sizes
    ends = _end_mismatch(_integrate(params, starts, eta_end=eta_end), starts.shape[0])
    base = ends[0]
    if scheme == 'forward':
        jacobian = (ends[1:3] - base).T / step
    else:
        jacobian = (ends[1:3] - ends[3:5]).T / (2.0 * step)
    return base, jacobian


def shooting_jacobian(params: BLayerParams, guess, scheme: str = 'forward',
                      step: float = JACOBIAN_STEP, eta_end: Optional[float] = None) -> np.ndarray:
    """Finite-difference Jacobian of shooting_map; rows (F', Theta), columns (F'', Theta')"""
    return _map_with_jacobian(params, guess, scheme, step, eta_end)[1]


def _newton(params: BLayerParams, guess, eta_end: Optional[float] = None) -> Tuple[np.ndarray, int, float]:
    s = np.asarray(guess, dtype=float)
    mismatch, jacobian = _map_with_jacobian(params, s, eta_end=eta_end)
    norm = float(np.max(np.abs(mismatch)))
    best = (s, norm)
    iteration = 0

    while norm > SHOOTING_TOLERANCE:
        if iteration >= MAX_NEWTON_ITERATIONS:
            raise ConvergenceError(
                f"Shooting did not converge in {MAX_NEWTON_ITERATIONS} iterations (mismatch {norm:.3e})",
                last_mismatch=norm, best_iterate=best[0], iterations=iteration)
        iteration += 1
        try:
            step = np.linalg.solve(jacobian, -mismatch)
        except np.linalg.LinAlgError as e:
            raise ConvergenceError(f"Singular shooting Jacobian at {s.tolist()}: {e}",
                                   last_mismatch=norm, best_iterate=best[0], iterations=iteration)
        if np.max(np.abs(step)) < STAGNATION_STEP:
            raise ConvergenceError(
                f"Newton stagnated at mismatch {norm:.3e}",
                last_mismatch=norm, best_iterate=best[0], iterations=iteration)

        damping = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = s + damping * step
            try:
                trial_mismatch, trial_jacobian = _map_with_jacobian(params, trial, eta_end=eta_end)
                trial_norm = float(np.max(np.abs(trial_mismatch)))
            except DivergenceError:
                trial_norm = math.inf
            if trial_norm < norm:
                break
            damping *= 0.5
        else:
            raise ConvergenceError(
                f"Damped Newton could not reduce mismatch {norm:.3e} from {s.tolist()}",
                last_mismatch=norm, best_iterate=best[0], iterations=iteration)

        s, mismatch, jacobian, norm = trial, trial_mismatch, trial_jacobian, trial_norm
        best = (s, norm)
        logger.debug(f"Shooting iteration {iteration}: s={s.tolist()}, mismatch={norm:.3e}, "
                     f"damping={damping:g}")

    # with a1 > 0 the end mismatch barely responds to the wall values;
    # keep taking full steps while it still drops
    for _ in range(POLISH_ITERATIONS):
        try:
            step = np.linalg.solve(jacobian, -mismatch)
            trial = s + step
            trial_mismatch, trial_jacobian = _map_with_jacobian(params, trial, eta_end=eta_end)
        except (np.linalg.LinAlgError, DivergenceError):
            break
        trial_norm = float(np.max(np.abs(trial_mismatch)))
        if not trial_norm < norm:
            break
        s, mismatch, jacobian, norm = trial, trial_mismatch, trial_jacobian, trial_norm
        if np.max(np.abs(step)) < STAGNATION_STEP:
            break

    return s, iteration, norm


def _domain_continuation(params: BLayerParams, guess):
    """Shoot on growing truncations [0, 5], [0, 8], ... seeding each with the last root"""
    s = np.asarray(guess, dtype=float)
    ends = [e for e in DOMAIN_LADDER if e < params.eta_max] + [params.eta_max]
    for eta_end in ends:
        s, iterations, norm = _newton(params, s, eta_end)
        logger.debug(f"Domain continuation to eta={eta_end:g}: s={s.tolist()}")
    return s, iterations, norm


def _grid_candidates(params: BLayerParams):
    """Best starts on the shortest truncation, where few trajectories run away"""
    scored = []
    for f2 in GRID_SEARCH_F2:
        for theta1 in GRID_SEARCH_THETA1:
            try:
                norm = float(np.max(np.abs(shooting_map(params, (f2, theta1), DOMAIN_LADDER[0]))))
            except DivergenceError:
                continue
            scored.append((norm, (f2, theta1)))
    scored.sort(key=lambda item: item[0])
    return [guess for _, guess in scored[:GRID_SEARCH_STARTS]]


def _continuation(params: BLayerParams):
    """March a1 from 0 to its target, seeding each solve with the previous one"""
    s, _, _ = _domain_continuation(_with_a1(params, 0.0), DEFAULT_GUESS)
    for a1 in np.linspace(0.0, params.a1, CONTINUATION_STEPS + 1)[1:]:
        s, iterations, norm = _newton(_with_a1(params, float(a1)), s)
        logger.debug(f"Continuation at a1={a1:.4g}: s={s.tolist()}")
    return s, iterations, norm


def _with_a1(params: BLayerParams, a1: float) -> BLayerParams:
    return replace(params, a1=a1)


def _find_wall_values(params: BLayerParams, guess, warm: bool = False):
    """
    Strategies in order: Newton on the full domain (warm starts only),
    domain continuation, grid search on the shortest truncation, and
    continuation in a1.
    """
    if warm:
        try:
            return _newton(params, guess)
        except (ConvergenceError, DivergenceError) as e:
            logger.info(f"Shooting from {tuple(guess)} failed ({e}); continuing from a short domain")

    try:
        return _domain_continuation(params, guess)
    except (ConvergenceError, DivergenceError) as e:
        logger.warning(f"Domain continuation from {tuple(guess)} failed ({e}); trying grid search")

    for candidate in _grid_candidates(params):
        try:
            return _domain_continuation(params, candidate)
        except (ConvergenceError, DivergenceError) as e:
            logger.debug(f"Grid start {candidate} failed: {e}")

    if params.a1 != 0:
        logger.warning(f"Grid search failed for Pr={params.prandtl}, a1={params.a1}; "
                       f"trying continuation in a1")
        try:
            return _continuation(params)
        except (ConvergenceError, DivergenceError) as e:
            logger.error(f"Continuation failed: {e}")
            raise
    raise ConvergenceError(
        f"No starting strategy converged for Pr={params.prandtl}, a1={params.a1}")


def solve_similarity(params: BLayerParams, guess: Optional[Tuple[float, float]] = None) -> SimilaritySolution:
    """Shoot for (F''(0), Theta'(0)) and tabulate the profiles on the eta grid"""
    if guess is None:
        s, iterations, norm = _find_wall_values(params, DEFAULT_GUESS)
    else:
        s, iterations, norm = _find_wall_values(params, guess, warm=True)

    grid = linspace(0.0, params.eta_max, int(params.grid_points), name='eta')
    sol = _integrate(params, [s], t_eval=grid.points)
    f, df, d2f, theta, dtheta = sol.y
    a1, pr = params.a1, params.prandtl
    convect = 0.5 * a1 * grid.points + f
    d3f = -convect * d2f + df * df - a1 * df - theta
    d2theta = -pr * (convect * dtheta + (2.0 * a1 - df) * theta)

    # imposed wall values, exact
    f[0], df[0], theta[0] = 0.0, 0.0, 1.0
    logger.info(f"Similarity solution Pr={pr}, a1={a1}: F''(0)={s[0]:.10f}, "
                f"Theta'(0)={s[1]:.10f}, mismatch {norm:.2e} after {iterations} iterations")
    return SimilaritySolution(
        eta=grid, F=f, dF=df, d2F=d2f, d3F=d3f, Theta=theta, dTheta=dtheta, d2Theta=d2theta,
        wall_theta_slope=float(s[1]), wall_shear=float(s[0]),
        iterations=iterations, mismatch=norm,
    )


# ==================== PHYSICAL FIELDS ====================

def reconstruct_fields(sol: SimilaritySolution, params: BLayerParams, x, y, t) -> BoundaryLayerFields:
    """
    Velocity, wall temperature, wall heat flux and temperature at (x, y, t).

    T_w uses wall_factor * a1 t + b1 in its denominator; the flux law uses
    a1 t + b2 unless flux_b1_variant is set, and is NaN where that is not
    positive.
    """
    x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
    s = params.scale(t)
    if np.any(s <= 0):
        raise InvalidArgumentError("a1 t + b1 must be positive at every evaluation time", field='t')
    wall_scale = params.wall_factor * params.a1 * t + params.b1
    if np.any(wall_scale <= 0):
        raise InvalidArgumentError("wall_factor a1 t + b1 must be positive", field='t')
    flux_scale = params.a1 * t + (params.b1 if params.flux_b1_variant else params.b2)
    flux_defined = flux_scale > 0
    if not np.all(flux_defined):
        logger.warning("Heat-flux scale a1 t + b2 is not positive at some points; q_flux set to NaN there")

    root = np.sqrt(s)
    eta = y / root
    offset = x + params.b2
    u = offset * sol.f(eta, 1) / s
    v = -sol.f(eta) / root
    T_w = offset / wall_scale ** 2
    q_flux = np.where(flux_defined, offset * (-sol.wall_theta_slope)
                      / np.where(flux_defined, flux_scale, 1.0) ** 2.5, np.nan)
    T = T_w * sol.theta(eta)
    return BoundaryLayerFields(u, v, T_w, q_flux, T)


def boundary_layer_residuals(fields: Callable, x, y, t, prandtl: float,
                             step=RESIDUAL_STEP) -> Tuple[ResidualReport, ...]:
    """
    Continuity, momentum and energy residuals of fields(x, y, t) -> (u, v, T)
    by central differences; `step` is one width for every axis or an
    (hx, hy, ht) triple. Each report's scale is the largest magnitude of
    any single term of its equation.
    """
    x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
    hx, hy, ht = np.broadcast_to(np.asarray(step, dtype=float), (3,))
    u, v, T = fields(x, y, t)
    uxp, _, Txp = fields(x + hx, y, t)
    uxm, _, Txm = fields(x - hx, y, t)
    uyp, vyp, Typ = fields(x, y + hy, t)
    uym, vym, Tym = fields(x, y - hy, t)
    utp, _, Ttp = fields(x, y, t + ht)
    utm, _, Ttm = fields(x, y, t - ht)

    u_x = (uxp - uxm) / (2 * hx)
    u_y = (uyp - uym) / (2 * hy)
    u_t = (utp - utm) / (2 * ht)
    u_yy = (uyp - 2 * u + uym) / hy ** 2
    v_y = (vyp - vym) / (2 * hy)
    T_x = (Txp - Txm) / (2 * hx)
    T_y = (Typ - Tym) / (2 * hy)
    T_t = (Ttp - Ttm) / (2 * ht)
    T_yy = (Typ - 2 * T + Tym) / hy ** 2

    def largest(*terms):
        return max(float(np.max(np.abs(term))) for term in terms)

    spacing = (hx, hy, ht)
    return (
        ResidualReport.from_values('continuity', u_x + v_y, spacing, largest(u_x, v_y)),
        ResidualReport.from_values(
            'momentum', u_t + u * u_x + v * u_y - T - u_yy, spacing,
            largest(u_t, u * u_x, v * u_y, T, u_yy)),
        ResidualReport.from_values(
            'energy', T_t + u * T_x + v * T_y - T_yy / prandtl, spacing,
            largest(T_t, u * T_x, v * T_y, T_yy / prandtl)),
    )


def sample_points(grid: Tuple[Grid1D, Grid1D, Grid1D]):
    x_grid, y_grid, t_grid = grid
    return np.meshgrid(x_grid.points, y_grid.points, t_grid.points, indexing='ij')


def pde_residual_blayer(sol: SimilaritySolution, params: BLayerParams,
                        grid: Tuple[Grid1D, Grid1D, Grid1D],
                        step=RESIDUAL_STEP) -> Tuple[ResidualReport, ...]:
    """Residuals of the boundary-layer equations for the reconstructed fields"""
    x, y, t = sample_points(grid)

    def fields(xs, ys, ts):
        result = reconstruct_fields(sol, params, xs, ys, ts)
        return result.u, result.v, result.T

    reports = boundary_layer_residuals(fields, x, y, t, params.prandtl, step)
    for report in reports:
        logger.debug(f"Boundary-layer {report.equation} residual: max {report.max_norm:.3e}")
    return reports


def overshoot(sol: SimilaritySolution) -> float:
    """max Theta; above 1 the fluid near the plate is hotter than the wall"""
    return float(np.max(sol.Theta))


def default_sample_grid(params: BLayerParams, t: float = 1.0):
    """Interior box well inside the tabulated layer at time t"""
    eta_limit = 0.5 * params.eta_max
    y_max = eta_limit * math.sqrt(float(params.scale(t)))
    return (
        linspace(1.0, 2.0, 5, name='x'),
        linspace(0.1 * y_max, y_max, 9, name='y'),
        linspace(t, t + 0.5, 3, name='t'),
    )
