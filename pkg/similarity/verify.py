# similarity/verify.py
"""
Independent checks of the similarity solutions against the PDEs they came
from: residual engines, a finite-difference solver for the plume,
collocation of the boundary-layer ODEs, and the scaling groups acting on
whole scenarios.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from . import blayer, lake, plume
from .core import Grid1D, ResidualReport, ScalarField, central_derivative, linspace
from .exceptions import ConvergenceError, DomainError, InvalidArgumentError

logger = logging.getLogger(__name__)

# Finite-difference plume solver
SOR_OMEGA = 1.8
SOR_TOLERANCE = 1e-10
SOR_MAX_SWEEPS = 10 ** 6
SOR_DIVERGENCE_FACTOR = 100.0
SOR_MIN_OMEGA = 1e-3
SOR_LOG_EVERY = 1000
OUTLET_DECAY_LIMIT = 1e-3

NEUMANN_OUTLET = 'neumann'
RADIATION_OUTLET = 'radiation'
OUTLETS = (NEUMANN_OUTLET, RADIATION_OUTLET)
# (spacing ratio at 0, ramp centre, ramp width) as fractions of the index range
X_REFINEMENT = (0.025, 0.3, 0.08)
Y_REFINEMENT = (0.1, 0.3, 0.08)

# FD vs series comparison, corner band excluded
FD_X_MIN = 0.05
FD_Y_MIN = 0.05
FD_X_MAX = 15.0
FD_NX = 129
FD_NY = 65

PLUME_RESIDUAL_STEP = 1e-3

FAMILIES = ('lake', 'blayer', 'plume')
SCALE_KEYS = {'lake': ('C_w', 'C_q'), 'blayer': ('C_y', 'C_psi'), 'plume': ('E_x', 'E_c')}
SHIFT_KEYS = {'lake': (), 'blayer': ('K_x', 'K_t', 'K_psi'), 'plume': ()}
EXPONENT_KEYS = {'lake': ('t',), 'blayer': ('t', 'T'), 'plume': ('kappa1', 'u')}
DEFAULT_EXPONENTS = {'lake': {}, 'blayer': {'t': 2.0, 'T': 3.0}, 'plume': {'kappa1': 2.0, 'u': 1.0}}


# ==================== GROUP ELEMENTS ====================

@dataclass(frozen=True)
class GroupElement:
    """
    One element of an application's scaling group.

    lake:   t -> (C_w)^e t (e defaults to m), w -> C_w w, and q, g, r scaled
            per coefficient case
    blayer: x -> C_y C_psi x + K_x, y -> C_y y, t -> C_y^2 t + K_t,
            Psi -> C_psi Psi + K_psi, T -> (C_psi / C_y^3) T
    plume:  x -> E_x x, u -> E_x u, kappa1 -> E_x^2 kappa1, C -> E_c C

    `exponents` overrides a group-law exponent (t, T, kappa1, u); the
    defaults are the invariant ones.
    """
    application: str
    scales: Mapping[str, float] = field(default_factory=dict)
    shifts: Mapping[str, float] = field(default_factory=dict)
    exponents: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.application not in FAMILIES:
            raise InvalidArgumentError(
                f"group application must be one of {', '.join(FAMILIES)}, got '{self.application}'",
                field='application')
        for kind, given, allowed in (('scale', self.scales, SCALE_KEYS),
                                     ('shift', self.shifts, SHIFT_KEYS),
                                     ('exponent', self.exponents, EXPONENT_KEYS)):
            unknown = set(given) - set(allowed[self.application])
            if unknown:
                raise InvalidArgumentError(
                    f"unknown {kind} {sorted(unknown)} for the {self.application} group", field=kind)
        for key, value in self.scales.items():
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"scale {key} must be positive and finite, got {value}", field=key)
        for key, value in list(self.shifts.items()) + list(self.exponents.items()):
            if not math.isfinite(value):
                raise InvalidArgumentError(f"{key} must be finite, got {value}", field=key)
        object.__setattr__(self, 'scales', {k: float(self.scales.get(k, 1.0))
                                            for k in SCALE_KEYS[self.application]})
        object.__setattr__(self, 'shifts', {k: float(self.shifts.get(k, 0.0))
                                            for k in SHIFT_KEYS[self.application]})
        object.__setattr__(self, 'exponents', {k: float(v) for k, v in self.exponents.items()})

    @classmethod
    def identity(cls, application: str) -> 'GroupElement':
        return cls(application)

    @classmethod
    def random(cls, application: str, rng: np.random.Generator, spread: float = 2.0,
               shift: float = 0.5) -> 'GroupElement':
        """Scales log-uniform in [1/spread, spread], shifts uniform in [-shift, shift]"""
        if application not in FAMILIES:
            raise InvalidArgumentError(f"unknown group application '{application}'", field='application')
        bound = math.log(spread)
        scales = {key: float(np.exp(rng.uniform(-bound, bound))) for key in SCALE_KEYS[application]}
        shifts = {key: float(rng.uniform(-shift, shift)) for key in SHIFT_KEYS[application]}
        return cls(application, scales, shifts)

    def exponent(self, key: str, default: float) -> float:
        return self.exponents.get(key, DEFAULT_EXPONENTS[self.application].get(key, default))


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """The element acting as g1 followed by g2"""
    if g1.application != g2.application:
        raise InvalidArgumentError(
            f"cannot compose {g1.application} and {g2.application} elements", field='application')
    if g1.exponents != g2.exponents:
        raise InvalidArgumentError("cannot compose elements with different group-law exponents",
                                   field='exponents')
    application = g1.application
    scales = {key: g1.scales[key] * g2.scales[key] for key in SCALE_KEYS[application]}
    shifts = {}
    if application == 'blayer':
        c2, psi2 = g2.scales['C_y'], g2.scales['C_psi']
        e_t = g2.exponent('t', 2.0)
        shifts = {
            'K_x': c2 * psi2 * g1.shifts['K_x'] + g2.shifts['K_x'],
            'K_t': c2 ** e_t * g1.shifts['K_t'] + g2.shifts['K_t'],
            'K_psi': psi2 * g1.shifts['K_psi'] + g2.shifts['K_psi'],
        }
    return GroupElement(application, scales, shifts, dict(g1.exponents))


def _map_grid(grids, name, factor, shift=0.0):
    if name in grids:
        grids[name] = grids[name].scaled(factor, shift)


def _lake_factors(elem: GroupElement, params: lake.LakeParams):
    """(time factor P, q factor, g factor, r factor) of a lake element"""
    c_w, c_q = elem.scales['C_w'], elem.scales['C_q']
    period = c_w ** elem.exponent('t', params.m)
    if params.case == 1:
        return period, c_q, c_q, c_q * c_w
    return period, c_w ** (params.n + params.m - params.s), 1.0, c_w ** (params.n + 1)


def apply_group_action(elem: GroupElement, scenario):
    """New scenario with parameters, grids and probes carried through the group law"""
    if elem.application != scenario.family:
        raise InvalidArgumentError(
            f"a {elem.application} group element cannot act on a {scenario.application} scenario",
            field='application')
    grids = dict(scenario.grids)
    probes = dict(scenario.probes)
    params = scenario.params

    if elem.application == 'lake':
        c_w = elem.scales['C_w']
        period, q_factor, g_factor, r_factor = _lake_factors(elem, params)
        time_root = period ** (-1.0 / params.m)
        if params.case == 1:
            # kappa = beta g and rho = alpha q: scaling g and q scales beta and alpha
            params = replace(params, alpha=params.alpha * q_factor, beta=params.beta * g_factor,
                             c2=params.c2 * r_factor * time_root, gamma=params.gamma * c_w * time_root)
        else:
            params = replace(params, alpha=params.alpha * q_factor,
                             c2=params.c2 * r_factor * time_root, gamma=params.gamma * c_w * time_root)
        _map_grid(grids, 't', period)
        if 't' in probes:
            probes['t'] = [period * t for t in probes['t']]

    elif elem.application == 'blayer':
        c, c_psi = elem.scales['C_y'], elem.scales['C_psi']
        k_x, k_t = elem.shifts['K_x'], elem.shifts['K_t']
        time_scale = c ** elem.exponent('t', 2.0)
        params = replace(params, b1=time_scale * params.b1 - params.a1 * k_t,
                         b2=c * c_psi * params.b2 - k_x)
        _map_grid(grids, 'x', c * c_psi, k_x)
        _map_grid(grids, 'y', c)
        _map_grid(grids, 't', time_scale, k_t)
        if 'points' in probes:
            probes['points'] = [[c * c_psi * x + k_x, time_scale * t + k_t] for x, t in probes['points']]

    else:
        e = elem.scales['E_x']
        params = replace(params, u=params.u * e ** elem.exponent('u', 1.0),
                         kappa1=params.kappa1 * e ** elem.exponent('kappa1', 2.0))
        _map_grid(grids, 'x', e)
        if 'x' in probes:
            probes['x'] = [e * x for x in probes['x']]

    transform = elem if scenario.transform is None else compose(scenario.transform, elem)
    logger.debug(f"Applied {elem.application} group element {elem.scales} to '{scenario.name}'")
    return replace(scenario, params=params, grids=grids, probes=probes, transform=transform)


# ==================== LAKE ====================

@dataclass(frozen=True)
class LakeFields:
    """w = T - T0 with its derivatives, plus the coefficient functions"""
    w: Callable
    w_z: Callable
    w_zz: Callable
    w_t: Callable
    q: Callable
    g: Callable
    g_z: Callable
    r: Callable


def lake_fields_closed_form(params: lake.LakeParams, case: int = None) -> LakeFields:
    """Analytic fields of the m = 1 closed forms, w = t F(z)"""
    case = params.case if case is None else case
    profile = lake.closed_form_profile(params, case)
    q, g = lake.coefficient_functions(params, case, profile)
    mu = params.mu

    def g_z(z):
        z = np.asarray(z, dtype=float)
        return -mu * np.exp(-mu * z) if case == 1 else np.zeros_like(z)

    return LakeFields(
        w=lambda z, t: t * profile.f_of_eta(z),
        w_z=lambda z, t: t * profile.df_of_eta(z),
        w_zz=lambda z, t: t * profile.d2f_of_eta(z),
        w_t=lambda z, t: profile.f_of_eta(z) + 0 * t,
        q=q, g=g, g_z=g_z,
        r=lambda z, t: lake.source_term(params, z, t),
    )


def lake_fields_from_bvp(params: lake.LakeParams, result: lake.LakeBVPResult) -> LakeFields:
    """
    Fields w = (m t)^(1/m) F(z) from a numerical profile. F'' is taken by
    central differences of the computed slope; values between grid nodes
    are linearly interpolated.
    """
    if params.case != 1:
        raise InvalidArgumentError("numerical lake profiles exist for coefficient case 1 only", field="case")
    eta = result.field.grid.points
    f_nodes = result.field.values
    df_nodes = result.slope.values
    d2f_nodes = central_derivative(result.slope).values
    m, mu = params.m, params.mu

    def f(z):
        return np.interp(z, eta, f_nodes)

    crossing = lake.find_zero_crossing(f, params.h)
    if crossing is not None:
        raise DomainError(f"numerical F vanishes at z = {crossing:.6g}", location=crossing)

    def growth(t):
        return np.power(m * np.asarray(t, dtype=float), 1.0 / m)

    def growth_rate(t):
        return np.power(m * np.asarray(t, dtype=float), 1.0 / m - 1.0)

    return LakeFields(
        w=lambda z, t: growth(t) * f(z),
        w_z=lambda z, t: growth(t) * np.interp(z, eta, df_nodes),
        w_zz=lambda z, t: growth(t) * np.interp(z, eta, d2f_nodes),
        w_t=lambda z, t: growth_rate(t) * f(z),
        q=lambda z: np.exp(-mu * np.asarray(z, dtype=float)) / f(z),
        g=lambda z: np.exp(-mu * np.asarray(z, dtype=float)),
        g_z=lambda z: -mu * np.exp(-mu * np.asarray(z, dtype=float)),
        r=lambda z, t: lake.source_term(params, z, t),
    )


def lake_fields(params: lake.LakeParams) -> LakeFields:
    if params.m == 1:
        return lake_fields_closed_form(params)
    result = lake.solve_reduced_ode(params, lake.default_eta_grid(params))
    return lake_fields_from_bvp(params, result)


def _lake_terms(params: lake.LakeParams, case: int, fields: LakeFields, z, t):
    w = fields.w(z, t)
    w_z, w_zz, w_t = fields.w_z(z, t), fields.w_zz(z, t), fields.w_t(z, t)
    r = fields.r(z, t)
    if case == 1:
        return [
            params.beta * fields.g(z) * w_zz,
            params.beta * fields.g_z(z) * w_z,
            -params.alpha * fields.q(z) * lake._power(w, params.m) * w_t,
        ], r
    n = params.n
    terms = [lake._power(w, n) * w_zz if n else w_zz]
    if n:
        terms.append(n * lake._power(w, n - 1) * w_z ** 2)
    terms.append(-params.sigma2 * fields.q(z) * lake._power(w, params.s) * w_t)
    return terms, r


def _lake_report(params, case, fields, z, t, spacing) -> ResidualReport:
    terms, r = _lake_terms(params, case, fields, z, t)
    residual = sum(terms) + r
    scale = float(np.max(np.abs(r)))
    if scale == 0:
        scale = max([float(np.max(np.abs(term))) for term in terms] + [0.0]) or 1.0
    return ResidualReport.from_values(f"lake-case{case}", residual, spacing, scale)


def lake_pde_residual(params: lake.LakeParams, case: int, z_grid: Grid1D, t_grid: Grid1D,
                      fields: Optional[LakeFields] = None) -> ResidualReport:
    """
    Residual of the lake heat equation on the tensor grid z x t using
    exact derivatives of the closed form (or the supplied fields). The
    report's scale is max |r|.
    """
    if z_grid.points[0] < 0 or z_grid.points[-1] > params.h:
        raise InvalidArgumentError(f"z grid must lie in [0, {params.h}]", field='z')
    if t_grid.points[0] <= 0:
        raise InvalidArgumentError("t grid must be positive", field='t')
    if fields is None:
        fields = lake_fields_closed_form(params, case) if params.m == 1 else lake_fields(params)
    z, t = np.meshgrid(z_grid.points, t_grid.points, indexing='ij')
    spacing = (float(np.max(z_grid.spacing)), float(np.max(t_grid.spacing)))
    report = _lake_report(params, case, fields, z, t, spacing)
    logger.debug(f"Lake case {case} residual: max {report.max_norm:.3e}, relative {report.relative:.3e}")
    return report


def reduced_ode_residual(params: lake.LakeParams, profile: ScalarField) -> ResidualReport:
    """F'' - mu F' - sigma^2 F^m + (C2/beta) e^{-(xi-mu) eta} at interior nodes, by differences"""
    eta = profile.grid.points
    f = profile.values
    spacing = np.diff(eta)
    if len(eta) < 3 or not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0):
        raise InvalidArgumentError("reduced ODE residual needs a uniform grid of >= 3 points", field='eta')
    dx = spacing[0]
    inner = eta[1:-1]
    d2f = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dx ** 2
    df = (f[2:] - f[:-2]) / (2.0 * dx)
    forcing = (params.c2 / params.beta) * np.exp(-(params.xi - params.mu) * inner)
    residual = d2f - params.mu * df - params.sigma2 * lake._power(f[1:-1], params.m) + forcing
    return ResidualReport.from_values('lake-reduced-ode', residual, (dx,),
                                      scale=float(np.max(np.abs(forcing))) or 1.0)


def _lake_symmetry(elem: GroupElement, scenario, mapped) -> ResidualReport:
    params = scenario.params
    base = lake_fields(params)
    period, q_factor, g_factor, r_factor = _lake_factors(elem, params)
    c_w = elem.scales['C_w']

    mapped_fields = LakeFields(
        w=lambda z, t: c_w * base.w(z, t / period),
        w_z=lambda z, t: c_w * base.w_z(z, t / period),
        w_zz=lambda z, t: c_w * base.w_zz(z, t / period),
        w_t=lambda z, t: (c_w / period) * base.w_t(z, t / period),
        q=lambda z: q_factor * base.q(z),
        g=lambda z: g_factor * base.g(z),
        g_z=lambda z: g_factor * base.g_z(z),
        r=lambda z, t: r_factor * base.r(z, t / period),
    )
    z_grid, t_grid = _lake_sample_grids(mapped)
    return lake_pde_residual(params, params.case, z_grid, t_grid, fields=mapped_fields)


def _lake_sample_grids(scenario) -> Tuple[Grid1D, Grid1D]:
    params = scenario.params
    z_grid = scenario.grids.get('z') or linspace(0.0, params.h, 101, name='z')
    t_grid = scenario.grids.get('t')
    if t_grid is None:
        times = scenario.probes.get('t') or []
        t_grid = (Grid1D.from_points(sorted(times), name='t') if len(times) >= 2
                  else linspace(1.0, 150.0, 51, name='t'))
    return z_grid, t_grid


# ==================== BOUNDARY LAYER ====================

def collocation_check(sol: blayer.SimilaritySolution, params: blayer.BLayerParams) -> ResidualReport:
    """
    Residuals of both similarity ODEs at the midpoints of the tabulation,
    from cubic splines of the tabulated columns (F''' from the spline of F'',
    Theta'' from the spline of Theta').
    """
    eta = sol.eta.points
    mid = 0.5 * (eta[1:] + eta[:-1])
    spline = {name: CubicSpline(eta, getattr(sol, name)) for name in ('F', 'dF', 'd2F', 'Theta', 'dTheta')}
    f, df, d2f = spline['F'](mid), spline['dF'](mid), spline['d2F'](mid)
    d3f = spline['d2F'](mid, 1)
    theta, dtheta = spline['Theta'](mid), spline['dTheta'](mid)
    d2theta = spline['dTheta'](mid, 1)

    a1, pr = params.a1, params.prandtl
    convect = 0.5 * a1 * mid + f
    momentum = d3f - (-convect * d2f + df * df - a1 * df - theta)
    energy = d2theta + pr * (convect * dtheta + (2.0 * a1 - df) * theta)

    flags = ()
    if sol.F[0] != 0 or sol.dF[0] != 0 or sol.Theta[0] != 1:
        flags = ('boundary-conditions-violated',)
        logger.warning("Collocation check on a profile that violates F(0)=F'(0)=0, Theta(0)=1")
    scale = max(float(np.max(np.abs(d3f))), float(np.max(np.abs(theta))), 1e-300)
    return ResidualReport.from_values(
        'similarity-odes', np.concatenate([momentum, energy]), (float(np.max(np.diff(eta))),),
        scale, flags)


def _blayer_sample_scenario(scenario):
    # output grids may touch the wall or the edge of the table; sample inside
    grids = dict(scenario.grids)
    for axis in blayer.default_sample_grid(scenario.params):
        grids[axis.name] = axis
    return replace(scenario, grids=grids)


def _blayer_symmetry(elem: GroupElement, scenario, mapped, step) -> Tuple[ResidualReport, ...]:
    params = scenario.params
    sol = blayer.solve_similarity(params)
    c, c_psi = elem.scales['C_y'], elem.scales['C_psi']
    k_x, k_t = elem.shifts['K_x'], elem.shifts['K_t']
    time_scale = c ** elem.exponent('t', 2.0)
    temperature_scale = c_psi / c ** elem.exponent('T', 3.0)

    def fields(x_bar, y_bar, t_bar):
        result = blayer.reconstruct_fields(
            sol, params, (x_bar - k_x) / (c * c_psi), y_bar / c, (t_bar - k_t) / time_scale)
        return (c_psi / c) * result.u, result.v / c, temperature_scale * result.T

    x, y, t = blayer.sample_points((mapped.grids['x'], mapped.grids['y'], mapped.grids['t']))
    steps = (step * c * c_psi, step * c, step * time_scale)
    return blayer.boundary_layer_residuals(fields, x, y, t, params.prandtl, steps)


# ==================== PLUME ====================

def plume_solution(params: plume.PlumeParams, case: int) -> Callable:
    """Closed-form C(x, y) used as the base solution for a plume case"""
    if case == 2:
        return lambda x, y: plume.concentration_full_absorption(params, x, y)
    return lambda x, y: plume.separated_mode(params, x, y, 1)


def plume_pde_residual(params: plume.PlumeParams, x_grid: Grid1D, y_grid: Grid1D,
                       concentration: Callable, step=PLUME_RESIDUAL_STEP) -> ResidualReport:
    """u C_x - kappa1 C_xx - kappa2 C_yy of concentration(x, y) by central differences"""
    hx, hy = np.broadcast_to(np.asarray(step, dtype=float), (2,))
    x, y = np.meshgrid(x_grid.points, y_grid.points, indexing='ij')
    c = concentration(x, y)
    c_xp, c_xm = concentration(x + hx, y), concentration(x - hx, y)
    c_yp, c_ym = concentration(x, y + hy), concentration(x, y - hy)
    advection = params.u * (c_xp - c_xm) / (2 * hx)
    streamwise = params.kappa1 * (c_xp - 2 * c + c_xm) / hx ** 2
    vertical = params.kappa2 * (c_yp - 2 * c + c_ym) / hy ** 2
    scale = max(float(np.max(np.abs(term))) for term in (advection, streamwise, vertical))
    return ResidualReport.from_values('advection-diffusion', advection - streamwise - vertical,
                                      (hx, hy), scale or 1.0)


def _plume_symmetry(elem: GroupElement, scenario, mapped, step) -> ResidualReport:
    params = scenario.params
    base = plume_solution(params, scenario.case)
    e, e_c = elem.scales['E_x'], elem.scales['E_c']

    def concentration(x_bar, y):
        return e_c * base(x_bar / e, y)

    x_grid = linspace(0.5 * e, 3.0 * e, 26, name='x')
    y_grid = linspace(0.05, 0.95, 19, name='y')
    return plume_pde_residual(mapped.params, x_grid, y_grid, concentration, (step * e, step))


def _decay_estimate(params: plume.PlumeParams, case: int) -> float:
    consistent = replace(params, root_mode=plume.CONSISTENT_QUADRATIC)
    p = 0.5 * math.pi if case == 2 else plume.eigen_p(consistent, 1)
    return plume.decay_rate(consistent, p)


def refined_grid(length: float, n: int, refinement: Tuple[float, float, float], name: str) -> Grid1D:
    """
    n points on [0, length] whose spacing ramps smoothly from `ratio` times
    the far spacing at 0 up to the far spacing, with the ramp centred at
    index fraction `centre`. Every n samples the same mapping.
    """
    ratio, centre, width = refinement
    xi = (np.arange(n - 1) + 0.5) / (n - 1)
    weight = ratio + (1.0 - ratio) * 0.5 * (1.0 + np.tanh((xi - centre) / width))
    points = np.concatenate([[0.0], np.cumsum(weight)]) * (length / float(np.sum(weight)))
    points[-1] = length
    return Grid1D(points, name=name)


def plume_fd_solve(params: plume.PlumeParams, x_max: float, nx: int, ny: int, case: int,
                   outlet: str = NEUMANN_OUTLET, refined: bool = False,
                   omega: float = SOR_OMEGA, tolerance: float = SOR_TOLERANCE,
                   max_sweeps: int = SOR_MAX_SWEEPS) -> ScalarField:
    """
    Second-order finite differences for u C_x = kappa1 C_xx + kappa2 C_yy
    on [0, x_max] x [0, 1], relaxed column by column (zebra line SOR).

    Inlet C = 1, lid C_y = 0, ground kappa2 C_y = lambda gamma C (case 1)
    or C = 0 (case 2). The outlet is C_x = 0, or C_x = m C with the
    first-mode decay rate m for the radiation outlet. Ghost nodes mirror
    the boundary spacing. With `refined` the grids are clustered at the
    inlet and the ground. Convergence is measured on the residual divided
    by the diagonal.
    """
    if nx < 16 or ny < 16:
        raise InvalidArgumentError(f"plume_fd_solve needs nx, ny >= 16, got {nx} x {ny}", field='nx')
    if case not in (1, 2):
        raise InvalidArgumentError(f"case must be 1 or 2, got {case}", field='case')
    if outlet not in OUTLETS:
        raise InvalidArgumentError(f"outlet must be one of {', '.join(OUTLETS)}, got '{outlet}'",
                                   field='outlet')
    if refined:
        x_grid = refined_grid(x_max, nx, X_REFINEMENT, 'x')
        y_grid = refined_grid(1.0, ny, Y_REFINEMENT, 'y')
    else:
        x_grid = linspace(0.0, x_max, nx, name='x')
        y_grid = linspace(0.0, 1.0, ny, name='y')
    hx, hy = x_grid.spacing, y_grid.spacing
    k1, k2 = params.kappa1, params.kappa2

    peclet = params.u * float(np.max(hx)) / (2.0 * k1)
    if peclet > 1:
        logger.warning(f"Cell Peclet number {peclet:.3g} > 1; central differences may oscillate")
    decay = _decay_estimate(params, case)
    if outlet == NEUMANN_OUTLET:
        slope = 0.0
        if math.exp(decay * x_max) >= OUTLET_DECAY_LIMIT:
            logger.warning(f"Estimated C(x_max) = {math.exp(decay * x_max):.3g}; "
                           f"the outlet condition will distort the solution")
    else:
        slope = decay

    # x couplings by column; the outlet ghost C[nx] = C[nx-2] + 2 h slope C[nx-1]
    h_minus = hx
    h_plus = np.append(hx[1:], hx[-1])
    west = np.zeros(nx)
    east = np.zeros(nx)
    west[1:] = (2.0 * k1 + params.u * h_plus) / (h_minus * (h_minus + h_plus))
    east[1:] = (2.0 * k1 - params.u * h_minus) / (h_plus * (h_minus + h_plus))
    centre_x = west + east
    centre_x[-1] -= 2.0 * hx[-1] * slope * east[-1]
    west[-1] += east[-1]
    east[-1] = 0.0

    # y couplings by row; lid and Robin ground through mirrored ghosts
    south = np.zeros(ny)
    north = np.zeros(ny)
    south[1:-1] = 2.0 * k2 / (hy[:-1] * (hy[:-1] + hy[1:]))
    north[1:-1] = 2.0 * k2 / (hy[1:] * (hy[:-1] + hy[1:]))
    south[-1] = 2.0 * k2 / hy[-1] ** 2
    north[0] = 2.0 * k2 / hy[0] ** 2
    centre_y = south + north
    centre_y[0] += 2.0 * params.lam * params.gamma / hy[0]

    first = 0 if case == 1 else 1
    rows = np.arange(first, ny)
    size = rows.size
    below, above = np.maximum(rows - 1, 0), np.minimum(rows + 1, ny - 1)
    south_r, north_r, centre_r = south[rows], north[rows], centre_y[rows]

    columns = np.arange(1, nx)
    east_of = np.minimum(columns + 1, nx - 1)
    colours = (columns[0::2], columns[1::2])

    def stacked_band(colour):
        # the colour's columns are uncoupled: one block-tridiagonal system
        k = colour.size
        band = np.zeros((3, k * size))
        band[0].reshape(k, size)[:, 1:] = -north_r[:-1]
        band[1] = (centre_x[colour][:, None] + centre_r[None, :]).ravel()
        band[2].reshape(k, size)[:, :-1] = -south_r[1:]
        return band

    bands = [stacked_band(colour) for colour in colours]
    diagonal = centre_x[1:, None] + centre_r[None, :]

    def initial():
        c = np.ones((nx, ny))
        if case == 2:
            c[1:, 0] = 0.0
        return c

    def residual_norm(c):
        inner = c[1:][:, rows]
        applied = (diagonal * inner - south_r * c[1:][:, below] - north_r * c[1:][:, above]
                   - west[1:, None] * c[:-1][:, rows] - east[1:, None] * c[east_of][:, rows])
        return float(np.max(np.abs(applied / diagonal)))

    c = initial()
    start_norm = residual_norm(c)
    norm = start_norm
    sweeps = 0
    while norm > tolerance:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"SOR did not reach {tolerance:g} in {max_sweeps} sweeps (residual {norm:.3e})",
                last_mismatch=norm, iterations=sweeps)
        for colour, band in zip(colours, bands):
            east_cols = np.minimum(colour + 1, nx - 1)
            rhs = west[colour, None] * c[colour - 1][:, rows] + east[colour, None] * c[east_cols][:, rows]
            line = solve_banded((1, 1), band, rhs.ravel()).reshape(colour.size, size)
            c[np.ix_(colour, rows)] = (1.0 - omega) * c[np.ix_(colour, rows)] + omega * line
        sweeps += 1
        norm = residual_norm(c)
        if not math.isfinite(norm) or norm > SOR_DIVERGENCE_FACTOR * max(start_norm, tolerance):
            omega *= 0.5
            if omega < SOR_MIN_OMEGA:
                raise ConvergenceError("SOR diverged at every relaxation factor",
                                       last_mismatch=norm, iterations=sweeps)
            logger.warning(f"SOR diverging after {sweeps} sweeps; restarting with omega={omega:g}")
            c = initial()
            norm = start_norm
        elif sweeps % SOR_LOG_EVERY == 0:
            logger.debug(f"SOR sweep {sweeps}: residual {norm:.3e}")

    logger.info(f"Plume FD solve {nx}x{ny} converged in {sweeps} sweeps (omega={omega:g}, "
                f"residual {norm:.2e})")
    return ScalarField((x_grid, y_grid), c, 'C')


def robin_series(params: plume.PlumeParams, x, y, n_terms: int = None):
    """
    Eigenfunction series of the case-1 problem: modes cos p_n (y - 1) with
    tan p_n = lambda gamma / (kappa2 p_n), coefficients projecting C = 1
    at the inlet, consistent decay rates.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    count = params.n_terms if n_terms is None else n_terms
    p = np.array([plume.eigen_p(params, branch) for branch in range(1, count + 1)])
    rates = plume.decay_rate(replace(params, root_mode=plume.CONSISTENT_QUADRATIC), p)
    coefficients = np.sinc(p / math.pi) / (0.5 + 0.5 * np.sinc(2.0 * p / math.pi))
    terms = coefficients * np.exp(rates * x[..., None]) * np.cos(p * (y[..., None] - 1.0))
    return np.sum(terms, axis=-1)


def plume_series(params: plume.PlumeParams, x, y, case: int):
    """Separated series of the full elliptic problem (consistent decay rates)"""
    if case == 2:
        consistent = replace(params, root_mode=plume.CONSISTENT_QUADRATIC)
        return plume.concentration_full_absorption(consistent, x, y)
    return robin_series(params, x, y)


def plume_fd_deviation(params: plume.PlumeParams, x_max: float = FD_X_MAX, nx: int = FD_NX,
                       ny: int = FD_NY, case: int = 2, x_min: float = FD_X_MIN,
                       y_min: float = FD_Y_MIN) -> ResidualReport:
    """
    Pointwise relative deviation (C_fd - C_series) / C_series at every node
    with x >= x_min and y >= y_min, on grids refined at the inlet and the
    ground and closed by the radiation outlet.
    """
    solution = plume_fd_solve(params, x_max, nx, ny, case, outlet=RADIATION_OUTLET, refined=True)
    x_grid, y_grid = solution.axes
    x, y = np.meshgrid(x_grid.points, y_grid.points, indexing='ij')
    region = (x >= x_min) & (y >= y_min)
    reference = plume_series(params, x[region], y[region], case)
    deviation = (solution.values[region] - reference) / reference
    return ResidualReport.from_values(
        'plume-fd-deviation' if case == 2 else 'plume-fd-robin', deviation,
        (float(np.max(x_grid.spacing)), float(np.max(y_grid.spacing))))


# ==================== SYMMETRY ====================

def symmetry_check(elem: GroupElement, scenario, step: float = None) -> Tuple[ResidualReport, ...]:
    """
    Carry the scenario's solution through the group element and evaluate
    the governing equations on the mapped grid. Relative norms are the
    invariant quantity: a valid element leaves them unchanged.
    """
    if elem.application != scenario.family:
        raise InvalidArgumentError(
            f"a {elem.application} group element cannot act on a {scenario.application} scenario",
            field='application')
    if scenario.family == 'lake':
        mapped = apply_group_action(elem, scenario)
        return (_lake_symmetry(elem, scenario, mapped),)
    if scenario.family == 'blayer':
        base = _blayer_sample_scenario(scenario)
        mapped = apply_group_action(elem, base)
        return _blayer_symmetry(elem, base, mapped, step or blayer.RESIDUAL_STEP)
    mapped = apply_group_action(elem, scenario)
    return (_plume_symmetry(elem, scenario, mapped, step or PLUME_RESIDUAL_STEP),)


# ==================== VERIFICATION SUITE ====================

def verification_reports(scenario) -> Tuple[ResidualReport, ...]:
    """The residual reports the runner checks for a scenario"""
    params = scenario.params
    if scenario.family == 'lake':
        if params.m != 1:
            # numerical profiles carry discretisation error; check the ODE they solve
            result = lake.solve_reduced_ode(params, lake.default_eta_grid(params))
            return (reduced_ode_residual(params, result.field),)
        z_grid, t_grid = _lake_sample_grids(scenario)
        return (lake_pde_residual(params, params.case, z_grid, t_grid),)

    if scenario.family == 'blayer':
        sol = blayer.solve_similarity(params)
        reports = [collocation_check(sol, params)]
        pde = blayer.pde_residual_blayer(sol, params, blayer.default_sample_grid(params))
        if params.a1 == 0 or params.wall_factor == 1:
            reports.extend(pde)
        else:
            logger.warning(f"wall_factor={params.wall_factor} with a1={params.a1} is not a solution "
                           f"of the momentum equation; checking continuity only")
            reports.append(pde[0])
        return tuple(reports)

    if scenario.case == 2:
        return (plume_fd_deviation(params, case=2),)
    p = plume.eigen_p(params, 1)
    consistent = replace(params, root_mode=plume.CONSISTENT_QUADRATIC)
    m = plume.decay_rate(consistent, p)
    residual = plume.term_residual(params, p, m)
    scale = max(abs(params.u * m), params.kappa1 * m * m, params.kappa2 * p * p) or 1.0
    return (ResidualReport.from_values('plume-mode', [residual], (), scale),
            plume_fd_deviation(params, case=1))
