# similarity/runner.py
"""
Scenario runner behind the management commands: load a scenario, evaluate
every requested output into CSV (and optionally a plot), run the
verification oracles, and map the outcome to a process exit status.
"""
import io
import logging
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from . import blayer, lake, plume, verify
from .core import ResidualReport, ScalarField, linspace, write_csv, write_table
from .exceptions import (ConvergenceError, DivergenceError, DomainError, ExtrapolationError,
                         InvalidArgumentError, ScenarioError, SingularParameterError)
from .plotting import line_plot
from .scenarios import Scenario, load_scenario, resolve_scenario
from .serializers import param_attribute

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
EXIT_VERIFY_FAILED = 3

INVALID_ERRORS = (InvalidArgumentError, DomainError, SingularParameterError, ExtrapolationError)
SOLVER_ERRORS = (ConvergenceError, DivergenceError)

RESIDUAL_HEADER = ('equation', 'max_norm', 'l2_norm', 'samples', 'relative', 'threshold', 'passed',
                   'variant')

DEFAULT_LAKE_DEPTHS = 401
DEFAULT_LAKE_TIMES = (0.0, 150.0, 151)
DEFAULT_BLAYER_POINTS = [[1.0, 1.0]]
DEFAULT_PLUME_X = (0.0, 10.0)
DEFAULT_EIGEN_BRANCHES = 5


@dataclass(frozen=True)
class RunRequest:
    scenario: str
    out_dir: Optional[Path] = None
    verify: bool = False
    plot: bool = False

    def output_dir(self) -> Path:
        return Path(self.out_dir or getattr(settings, 'SIMILARITY_OUTPUT_DIR', 'output'))


@dataclass
class RunOutcome:
    status: int
    files: List[Path]
    reports: List[Tuple[str, ResidualReport]]
    message: str = ''


def _slug(output: str) -> str:
    return re.sub(r'[^A-Za-z0-9-]+', '_', output).strip('_')


def _suffix(key: Optional[str], value) -> str:
    return '' if key is None else f"_{key}={value:g}"


def variants(scenario: Scenario) -> List[Tuple[str, Scenario]]:
    """(column suffix, scenario) for every value of the swept parameter"""
    if not scenario.sweep:
        return [('', scenario)]
    key, values = next(iter(scenario.sweep.items()))
    attribute = param_attribute(key)
    kind = type(getattr(scenario.params, attribute))
    result = []
    for value in values:
        params = replace(scenario.params, **{attribute: kind(value)})
        result.append((_suffix(key, value), replace(scenario, params=params)))
    return result


def _probe(scenario: Scenario, key: str, output: str, default=None):
    values = scenario.probes.get(key, default)
    if values is None or (hasattr(values, '__len__') and len(values) == 0):
        raise ScenarioError(f"Output '{output}' needs probes.{key}",
                            [(f"probes.{key}", None, f"required for output '{output}'")],
                            scenario.source)
    return values


# ==================== LAKE ====================

class LakeEvaluator:
    """T(z, t) for one parameter set: closed forms at m = 1, the reduced BVP otherwise"""

    def __init__(self, params: lake.LakeParams):
        self.params = params
        self._bvp = None

    @property
    def bvp(self) -> lake.LakeBVPResult:
        if self._bvp is None:
            self._bvp = lake.solve_reduced_ode(self.params, lake.default_eta_grid(self.params))
        return self._bvp

    def temperature(self, z, t):
        if self.params.m == 1:
            return lake.temperature(self.params, z, t)
        z, t = lake.check_range(self.params, z, t)
        eta = self.bvp.field.grid.points
        growth = np.power(self.params.m * t, 1.0 / self.params.m)
        return self.params.t0 + growth * np.interp(z, eta, self.bvp.field.values)

    def profile(self, eta) -> Dict[str, np.ndarray]:
        if self.params.m == 1:
            shape = lake.closed_form_profile(self.params)
            return {'F': shape.f_of_eta(eta), 'dF': shape.df_of_eta(eta), 'd2F': shape.d2f_of_eta(eta)}
        grid = self.bvp.field.grid.points
        return {'F': np.interp(eta, grid, self.bvp.field.values),
                'dF': np.interp(eta, grid, self.bvp.slope.values)}


def _lake_output(scenario: Scenario, output: str, cases):
    params = scenario.params
    if output == 'temperature(z)':
        z_grid = scenario.grids.get('z') or linspace(0.0, params.h, DEFAULT_LAKE_DEPTHS, name='z')
        times = _probe(scenario, 't', output)
        fields = []
        for suffix, variant in cases:
            evaluator = LakeEvaluator(variant.params)
            for t in times:
                label = f"T_{t:g}" + suffix if len(times) > 1 or not suffix else 'T' + suffix
                fields.append(ScalarField(z_grid, evaluator.temperature(z_grid.points, t), label))
        return fields, dict(xlabel='z', ylabel='T', swap_axes=True)

    if output == 'temperature(t)':
        t_grid = scenario.grids.get('t') or linspace(*DEFAULT_LAKE_TIMES[:2], DEFAULT_LAKE_TIMES[2], name='t')
        depths = _probe(scenario, 'z', output)
        fields = []
        for suffix, variant in cases:
            evaluator = LakeEvaluator(variant.params)
            for z in depths:
                fields.append(ScalarField(t_grid, evaluator.temperature(z, t_grid.points), f"T_z={z:g}{suffix}"))
        return fields, dict(xlabel='t', ylabel='T')

    eta_grid = scenario.grids.get('eta') or linspace(0.0, params.h, DEFAULT_LAKE_DEPTHS, name='eta')
    fields = []
    for suffix, variant in cases:
        for label, values in LakeEvaluator(variant.params).profile(eta_grid.points).items():
            fields.append(ScalarField(eta_grid, values, label + suffix))
    return fields, dict(xlabel='eta', ylabel='F')


# ==================== BOUNDARY LAYER ====================

def _blayer_output(scenario: Scenario, output: str, cases, destination):
    solutions = [(suffix, variant.params, blayer.solve_similarity(variant.params)) for suffix, variant in cases]

    if output == 'profile':
        eta_grid = scenario.grids.get('eta') or solutions[0][2].eta.renamed('eta')
        fields = []
        for suffix, _, sol in solutions:
            fields.extend([
                ScalarField(eta_grid, sol.f(eta_grid.points), 'F' + suffix),
                ScalarField(eta_grid, sol.f(eta_grid.points, 1), 'dF' + suffix),
                ScalarField(eta_grid, sol.f(eta_grid.points, 2), 'd2F' + suffix),
                ScalarField(eta_grid, sol.theta(eta_grid.points), 'Theta' + suffix),
                ScalarField(eta_grid, sol.theta(eta_grid.points, 1), 'dTheta' + suffix),
            ])
        return fields, dict(xlabel='eta', ylabel='F, Theta')

    points = _probe(scenario, 'points', output, DEFAULT_BLAYER_POINTS)
    if output == 'wall':
        rows = []
        for suffix, params, sol in solutions:
            for x, t in points:
                fields = blayer.reconstruct_fields(sol, params, x, 0.0, t)
                s = float(params.scale(t))
                shear = (x + params.b2) * sol.wall_shear / s ** 1.5
                rows.append((suffix.lstrip('_') or '-', float(x), float(t), float(fields.T_w),
                             float(fields.q_flux), float(shear)))
        write_table(('variant', 'x', 't', 'T_w', 'q_flux', 'wall_shear'), rows, destination)
        return None, None

    y_grid = scenario.grids.get('y')
    if y_grid is None:
        # the whole tabulated layer at the earliest requested time
        reach = min(sol.eta_max * math.sqrt(float(p.scale(t))) for _, p, sol in solutions for _, t in points)
        y_grid = linspace(0.0, reach, 201, name='y')
    fields = []
    for suffix, params, sol in solutions:
        for x, t in points:
            result = blayer.reconstruct_fields(sol, params, x, y_grid.points, t)
            values = result.u if output == 'u(y)' else result.T
            fields.append(ScalarField(y_grid, values, f"{output[0]}_x={x:g}_t={t:g}{suffix}"))
    return fields, dict(xlabel='y', ylabel=output[0])


# ==================== PLUME ====================

def _plume_output(scenario: Scenario, output: str, cases, destination):
    if output == 'eigen-table':
        count = int(scenario.probes.get('branches', DEFAULT_EIGEN_BRANCHES))
        rows = []
        for suffix, variant in cases:
            for n, big_n, p, m in plume.eigen_table(variant.params, count):
                rows.append((suffix.lstrip('_') or '-', n, float(big_n), float(p), float(m)))
        write_table(('variant', 'n', 'N', 'p', 'm'), rows, destination)
        return None, None

    x_grid = scenario.grids.get('x') or linspace(*DEFAULT_PLUME_X, 201, name='x')
    if output == 'C(x)':
        fields = [ScalarField(x_grid, plume.concentration_no_absorption(variant.params, x_grid.points),
                              'C' + suffix) for suffix, variant in cases]
        return fields, dict(xlabel='x', ylabel='C')

    y_grid = scenario.grids.get('y') or linspace(0.0, 1.0, 51, name='y')
    x, y = np.meshgrid(x_grid.points, y_grid.points, indexing='ij')
    fields = [ScalarField((x_grid, y_grid), plume.concentration_full_absorption(variant.params, x, y),
                          'C' + suffix) for suffix, variant in cases]
    return fields, None


def evaluate_output(scenario: Scenario, output: str, destination) -> Tuple[Optional[list], Optional[dict]]:
    """
    Write one output to destination. Returns the written fields and plot
    options for 1-D series, (None, None) for tables and 2-D fields that are
    not plotted.
    """
    cases = variants(scenario)
    if scenario.family == 'lake':
        fields, plot = _lake_output(scenario, output, cases)
    elif scenario.family == 'blayer':
        fields, plot = _blayer_output(scenario, output, cases, destination)
    else:
        fields, plot = _plume_output(scenario, output, cases, destination)
    if fields is not None:
        write_csv(fields, destination)
    return fields, plot


# ==================== VERIFICATION ====================

def threshold_for(equation: str) -> Optional[float]:
    return getattr(settings, 'SIMILARITY_VERIFY_THRESHOLDS', {}).get(equation)


def verify_scenario(scenario: Scenario) -> List[Tuple[str, ResidualReport]]:
    """(variant, report) for every sweep value"""
    results = []
    for suffix, variant in variants(scenario):
        for report in verify.verification_reports(variant):
            results.append((suffix.lstrip('_') or '-', report))
    return results


def report_passes(report: ResidualReport) -> bool:
    threshold = threshold_for(report.equation)
    if threshold is None:
        logger.warning(f"No verification threshold configured for '{report.equation}'")
        return False
    return report.passes(threshold, relative=True) and not report.flags


def residual_rows(results: Sequence[Tuple[str, ResidualReport]]):
    for variant, report in results:
        threshold = threshold_for(report.equation)
        yield (report.equation, report.max_norm, report.l2_norm, report.samples, report.relative,
               float('nan') if threshold is None else threshold,
               'yes' if report_passes(report) else 'no', variant)


def write_residuals(results, destination) -> None:
    write_table(RESIDUAL_HEADER, residual_rows(results), destination)


# ==================== RUN ====================

def _check_writable(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InvalidArgumentError(f"Output directory {out_dir} is not writable: {e}", field='out')
    if not out_dir.is_dir():
        raise InvalidArgumentError(f"Output path {out_dir} is not a directory", field='out')


def execute(request: RunRequest) -> RunOutcome:
    """Like run() but returns the written files and verification reports too"""
    files, reports = [], []
    try:
        scenario = load_scenario(resolve_scenario(request.scenario))
        out_dir = request.output_dir()
        _check_writable(out_dir)
        logger.info(f"Running scenario '{scenario.name}' ({scenario.application}) into {out_dir}")

        for output in scenario.outputs:
            path = out_dir / f"{scenario.name}_{_slug(output)}.csv"
            fields, plot = evaluate_output(scenario, output, path)
            files.append(path)
            if request.plot and fields is not None and plot is not None:
                axis = fields[0].axes[0].points
                series = {field.label: field.values for field in fields}
                files.append(line_plot(path.with_suffix(''), axis, series, title=scenario.name, **plot))

        if request.verify:
            reports = verify_scenario(scenario)
            path = out_dir / f"{scenario.name}_residuals.csv"
            write_residuals(reports, path)
            files.append(path)
            failed = [report.equation for _, report in reports if not report_passes(report)]
            if failed:
                message = f"Verification failed for {', '.join(sorted(set(failed)))}"
                logger.error(message)
                return RunOutcome(EXIT_VERIFY_FAILED, files, reports, message)

    except INVALID_ERRORS as e:
        logger.error(f"Invalid scenario {request.scenario}: {e}")
        return RunOutcome(EXIT_INVALID, files, reports, str(e))
    except SOLVER_ERRORS as e:
        logger.error(f"Solver did not converge for {request.scenario}: {e}")
        return RunOutcome(EXIT_NOT_CONVERGED, files, reports, str(e))

    logger.info(f"Scenario '{scenario.name}' done: {len(files)} files")
    return RunOutcome(EXIT_OK, files, reports, f"Wrote {len(files)} files to {out_dir}")


def run(request: RunRequest) -> int:
    return execute(request).status


def residual_text(results) -> str:
    """Residual rows as CSV text, for printing"""
    buffer = io.StringIO()
    write_residuals(results, buffer)
    return buffer.getvalue()
