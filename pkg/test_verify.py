import time
from dataclasses import replace

import numpy as np
import pytest

from similarity import blayer, lake, plume, verify
from similarity.core import linspace
from similarity.exceptions import ConvergenceError, InvalidArgumentError
from similarity.plume import CONSISTENT_QUADRATIC, PlumeParams
from similarity.scenarios import Scenario
from similarity.verify import GroupElement, LakeFields, compose

CASE1 = lake.LakeParams(alpha=14095, beta=12355, mu=1.439239e-4, xi=0.048, c2=2496, h=400, t0=4)
CASE2 = lake.LakeParams(alpha=13306, beta=12391, mu=0.0, xi=0.048, c2=0.2014, h=400, t0=4, case=2)
PLUME = PlumeParams(u=1.0, kappa1=0.1, kappa2=0.1, root_mode=CONSISTENT_QUADRATIC)
BLAYER = blayer.BLayerParams(prandtl=1.0)

Z_GRID = linspace(10.0, 390.0, 101, name='z')
T_GRID = linspace(1.0, 150.0, 51, name='t')


def lake_scenario(params, **grids):
    grids = grids or {'z': Z_GRID, 't': T_GRID}
    return Scenario(name='lake', application=f"lake-case{params.case}", params=params,
                    grids=grids, outputs=('temperature(z)',))


def blayer_scenario(params=BLAYER):
    return Scenario(name='blayer', application='blayer', params=params, grids={}, outputs=('profile',))


def plume_scenario(params=PLUME, application='plume-large-lambda'):
    grids = {'x': linspace(0.0, 10.0, 21, name='x')}
    return Scenario(name='plume', application=application, params=params, grids=grids, outputs=('C(x,y)',))


def random_elements(application, count=5, seed=20240611):
    rng = np.random.default_rng(seed)
    return [GroupElement.random(application, rng) for _ in range(count)]


@pytest.fixture(scope='module')
def blayer_solution():
    return blayer.solve_similarity(BLAYER)


class TestGroupElement:
    def test_defaults_fill_in(self):
        elem = GroupElement('blayer', {'C_y': 2.0})
        assert elem.scales == {'C_y': 2.0, 'C_psi': 1.0}
        assert elem.shifts == {'K_x': 0.0, 'K_t': 0.0, 'K_psi': 0.0}
        assert elem.exponent('t', 0.0) == 2.0
        assert elem.exponent('T', 0.0) == 3.0

    def test_lake_time_exponent_defaults_to_m(self):
        assert GroupElement('lake').exponent('t', 2.0) == 2.0

    @pytest.mark.parametrize('kwargs', [
        dict(application='ocean'),
        dict(application='lake', scales={'C_w': -1.0}),
        dict(application='lake', scales={'C_w': float('inf')}),
        dict(application='lake', scales={'C_y': 2.0}),
        dict(application='plume', shifts={'K_x': 1.0}),
        dict(application='blayer', shifts={'K_x': float('nan')}),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            GroupElement(**kwargs)

    def test_compose_multiplies_scales(self):
        g = compose(GroupElement('plume', {'E_x': 2.0, 'E_c': 3.0}), GroupElement('plume', {'E_x': 5.0}))
        assert g.scales == {'E_x': 10.0, 'E_c': 3.0}

    def test_compose_rejects_mixed_applications(self):
        with pytest.raises(InvalidArgumentError):
            compose(GroupElement('plume'), GroupElement('lake'))

    def test_compose_rejects_mixed_exponents(self):
        with pytest.raises(InvalidArgumentError):
            compose(GroupElement('plume'), GroupElement('plume', exponents={'kappa1': 1.0}))


class TestGroupAction:
    def test_identity_leaves_scenario_unchanged(self):
        scenario = lake_scenario(CASE1)
        mapped = verify.apply_group_action(GroupElement.identity('lake'), scenario)
        assert mapped.params == scenario.params
        assert mapped.grids == scenario.grids

    def test_lake_time_doubles(self):
        mapped = verify.apply_group_action(GroupElement('lake', {'C_w': 2.0}), lake_scenario(CASE1))
        assert np.allclose(mapped.grids['t'].points, 2 * T_GRID.points)
        assert np.array_equal(mapped.grids['z'].points, Z_GRID.points)

    def test_plume_scaling(self):
        mapped = verify.apply_group_action(GroupElement('plume', {'E_x': 3.0}), plume_scenario())
        assert mapped.params.u == pytest.approx(3.0)
        assert mapped.params.kappa1 == pytest.approx(0.9)
        assert mapped.params.kappa2 == PLUME.kappa2

    def test_original_untouched(self):
        scenario = plume_scenario()
        verify.apply_group_action(GroupElement('plume', {'E_x': 3.0}), scenario)
        assert scenario.params == PLUME
        assert scenario.transform is None

    def test_mismatched_application(self):
        with pytest.raises(InvalidArgumentError):
            verify.apply_group_action(GroupElement('lake'), plume_scenario())

    def test_actions_compose(self):
        params = replace(BLAYER, a1=0.5, b1=2.0, b2=0.3)
        scenario = Scenario(name='b', application='blayer', params=params, outputs=('profile',),
                            grids={'x': linspace(1.0, 2.0, 3, 'x'), 't': linspace(1.0, 3.0, 3, 't')})
        g1 = GroupElement('blayer', {'C_y': 1.5, 'C_psi': 0.5}, {'K_x': 0.2, 'K_t': 0.1})
        g2 = GroupElement('blayer', {'C_y': 0.8, 'C_psi': 2.0}, {'K_x': -0.4, 'K_t': 0.3, 'K_psi': 1.0})
        twice = verify.apply_group_action(g2, verify.apply_group_action(g1, scenario))
        once = verify.apply_group_action(compose(g1, g2), scenario)
        assert twice.params.b1 == pytest.approx(once.params.b1, rel=1e-14)
        assert twice.params.b2 == pytest.approx(once.params.b2, rel=1e-14)
        for axis in ('x', 't'):
            assert np.allclose(twice.grids[axis].points, once.grids[axis].points, rtol=1e-14)
        assert twice.transform.scales == pytest.approx(once.transform.scales)
        assert twice.transform.shifts == pytest.approx(once.transform.shifts)


class TestLakeResidual:
    @pytest.mark.parametrize('params', [CASE1, CASE2], ids=['case1', 'case2'])
    def test_closed_forms_solve_the_pde(self, params):
        report = verify.lake_pde_residual(params, params.case, Z_GRID, T_GRID)
        assert report.relative < 1e-8
        assert report.samples == 101 * 51
        assert report.scale == pytest.approx(params.c2 * 150 * np.exp(-params.xi * 10))

    def test_trivial_solution(self):
        zero = lambda z, t: np.zeros(np.broadcast(z, t).shape)
        fields = LakeFields(w=zero, w_z=zero, w_zz=zero, w_t=zero, q=lambda z: np.ones_like(z),
                            g=lambda z: np.ones_like(z), g_z=lambda z: np.zeros_like(z), r=zero)
        report = verify.lake_pde_residual(CASE1, 1, Z_GRID, T_GRID, fields=fields)
        assert report.max_norm == 0.0

    def test_perturbation_detected(self):
        exact = verify.lake_fields_closed_form(CASE1)
        bump = 1.001
        fields = replace(exact, w=lambda z, t: bump * exact.w(z, t), w_z=lambda z, t: bump * exact.w_z(z, t),
                         w_zz=lambda z, t: bump * exact.w_zz(z, t), w_t=lambda z, t: bump * exact.w_t(z, t))
        assert verify.lake_pde_residual(CASE1, 1, Z_GRID, T_GRID, fields=fields).relative > 1e-4

    def test_grid_outside_lake(self):
        with pytest.raises(InvalidArgumentError):
            verify.lake_pde_residual(CASE1, 1, linspace(0.0, 500.0, 11, 'z'), T_GRID)

    def test_reduced_ode_residual_square_exponent(self):
        params = replace(CASE1, m=2.0, h=40.0)
        result = lake.solve_reduced_ode(params, lake.default_eta_grid(params))
        report = verify.reduced_ode_residual(params, result.field)
        assert report.relative < 1e-4

    def test_reduced_ode_residual_needs_uniform_grid(self):
        field = lake.solve_reduced_ode(CASE1, lake.default_eta_grid(CASE1, num=401)).field
        warped = replace(field, grid=type(field.grid).from_points(field.grid.points ** 1.01 / 400 ** 0.01, 'eta'))
        with pytest.raises(InvalidArgumentError):
            verify.reduced_ode_residual(CASE1, warped)

    def test_numerical_fields_need_case1(self):
        params = replace(CASE1, m=2.0, h=40.0)
        result = lake.solve_reduced_ode(params, lake.default_eta_grid(params))
        with pytest.raises(InvalidArgumentError):
            verify.lake_fields_from_bvp(replace(CASE2, h=40.0), result)


class TestCollocation:
    def test_reference_solution(self, blayer_solution):
        report = verify.collocation_check(blayer_solution, BLAYER)
        assert report.max_norm < 1e-6
        assert report.flags == ()

    def test_zero_profile_flagged(self, blayer_solution):
        zeros = np.zeros(len(blayer_solution.eta))
        degenerate = blayer.SimilaritySolution(
            eta=blayer_solution.eta, F=zeros, dF=zeros, d2F=zeros, d3F=zeros, Theta=zeros,
            dTheta=zeros, d2Theta=zeros, wall_theta_slope=0.0, wall_shear=0.0)
        report = verify.collocation_check(degenerate, BLAYER)
        assert report.max_norm == 0.0
        assert 'boundary-conditions-violated' in report.flags

    def test_corrupted_column_detected(self, blayer_solution):
        corrupted = replace(blayer_solution, d2F=np.zeros(len(blayer_solution.eta)))
        assert verify.collocation_check(corrupted, BLAYER).max_norm > 0.1


class TestPlumeSolver:
    def test_no_sink_stays_uniform(self):
        params = PlumeParams(u=1.0, kappa1=0.1, kappa2=0.1, lam=0.0)
        field = verify.plume_fd_solve(params, 10.0, 17, 17, case=1)
        assert np.max(np.abs(field.values - 1.0)) < 1e-9

    def test_grid_too_coarse(self):
        with pytest.raises(InvalidArgumentError):
            verify.plume_fd_solve(PLUME, 30.0, 8, 65, case=2)

    def test_sweep_limit(self):
        with pytest.raises(ConvergenceError) as err:
            verify.plume_fd_solve(PLUME, 30.0, 33, 17, case=2, max_sweeps=2)
        assert err.value.iterations == 2
        assert err.value.last_mismatch > 1e-10

    def test_boundary_values(self):
        field = verify.plume_fd_solve(PLUME, 15.0, 65, 33, case=2, outlet=verify.RADIATION_OUTLET, refined=True)
        assert np.all(field.values[0, 1:] == 1.0)
        assert np.all(field.values[1:, 0] == 0.0)

    def test_unknown_outlet(self):
        with pytest.raises(InvalidArgumentError) as err:
            verify.plume_fd_solve(PLUME, 15.0, 33, 17, case=2, outlet='open')
        assert err.value.field == 'outlet'

    def test_refined_grid(self):
        grid = verify.refined_grid(15.0, 129, verify.X_REFINEMENT, 'x')
        assert len(grid) == 129
        assert grid.points[0] == 0.0 and grid.points[-1] == 15.0
        spacing = grid.spacing
        assert spacing[0] < 0.05 * spacing[-1]
        assert np.max(spacing[1:] / spacing[:-1]) < 1.3

    def test_matches_series_near_the_inlet(self):
        start = time.perf_counter()
        report = verify.plume_fd_deviation(PLUME, 15.0, 129, 65, case=2)
        assert time.perf_counter() - start < 60.0
        assert report.max_norm < 1e-2
        # every node with x >= 0.05 and y >= 0.05 is compared
        x_grid = verify.refined_grid(15.0, 129, verify.X_REFINEMENT, 'x')
        y_grid = verify.refined_grid(1.0, 65, verify.Y_REFINEMENT, 'y')
        expected = np.sum(x_grid.points >= 0.05) * np.sum(y_grid.points >= 0.05)
        assert report.samples == expected
        assert x_grid.points[np.argmax(x_grid.points >= 0.05)] < 0.06

    def test_second_order_refinement(self):
        coarse = verify.plume_fd_deviation(PLUME, 15.0, 65, 33, case=2)
        fine = verify.plume_fd_deviation(PLUME, 15.0, 129, 65, case=2)
        assert fine.max_norm * 3 <= coarse.max_norm

    def test_robin_ground_matches_series(self):
        params = replace(PLUME, lam=0.01)
        report = verify.plume_fd_deviation(params, 15.0, 129, 65, case=1)
        assert report.equation == 'plume-fd-robin'
        assert report.max_norm < 1e-2

    def test_robin_series_without_absorption(self):
        params = PlumeParams(u=1.0, kappa1=0.1, kappa2=0.1, lam=0.0, n_terms=5)
        values = verify.robin_series(params, np.array([0.0, 3.0]), np.array([0.2, 0.9]))
        assert np.allclose(values, 1.0, atol=1e-15)

    def test_radiation_outlet_without_absorption(self):
        params = PlumeParams(u=1.0, kappa1=0.1, kappa2=0.1, lam=0.0)
        field = verify.plume_fd_solve(params, 5.0, 33, 17, case=1, outlet=verify.RADIATION_OUTLET)
        assert np.max(np.abs(field.values - 1.0)) < 1e-9

    def test_series_residual(self):
        x_grid = linspace(0.5, 3.0, 11, 'x')
        y_grid = linspace(0.05, 0.95, 10, 'y')
        report = verify.plume_pde_residual(PLUME, x_grid, y_grid,
                                           lambda x, y: plume.concentration_full_absorption(PLUME, x, y))
        assert report.relative < 1e-4


class TestSymmetry:
    def test_lake_identity_matches_plain_residual(self):
        scenario = lake_scenario(CASE1)
        (mapped,) = verify.symmetry_check(GroupElement.identity('lake'), scenario)
        plain = verify.lake_pde_residual(CASE1, 1, Z_GRID, T_GRID)
        assert mapped.max_norm == plain.max_norm

    @pytest.mark.parametrize('params', [CASE1, CASE2], ids=['case1', 'case2'])
    @pytest.mark.parametrize('elem', random_elements('lake'))
    def test_lake_invariance(self, params, elem):
        (report,) = verify.symmetry_check(elem, lake_scenario(params))
        assert report.relative < 1e-8

    def test_lake_wrong_time_exponent_fails(self):
        params = replace(CASE1, m=2.0, h=40.0)
        scenario = lake_scenario(params, z=linspace(0.4, 39.6, 50, 'z'), t=T_GRID)
        (valid,) = verify.symmetry_check(GroupElement('lake', {'C_w': 2.0}), scenario)
        (broken,) = verify.symmetry_check(GroupElement('lake', {'C_w': 2.0}, exponents={'t': 1.0}), scenario)
        assert valid.relative < 1e-3
        assert broken.relative > 1e-3

    @pytest.mark.parametrize('elem', random_elements('blayer'))
    def test_blayer_invariance(self, elem):
        scenario = blayer_scenario()
        base = verify.symmetry_check(GroupElement.identity('blayer'), scenario)
        mapped = verify.symmetry_check(elem, scenario)
        for before, after in zip(base, mapped):
            assert before.equation == after.equation
            # within a factor of two, above the rounding floor of the difference quotients
            assert after.relative <= 2 * before.relative + 1e-8
            assert before.relative <= 2 * after.relative + 1e-8

    def test_blayer_wrong_temperature_exponent_fails(self):
        scenario = blayer_scenario()
        elem = GroupElement('blayer', {'C_y': 2.0}, exponents={'T': 2.0})
        _, momentum, _ = verify.symmetry_check(elem, scenario)
        assert momentum.relative > 1e-2

    @pytest.mark.parametrize('elem', random_elements('plume'))
    def test_plume_invariance(self, elem):
        scenario = plume_scenario()
        (base,) = verify.symmetry_check(GroupElement.identity('plume'), scenario)
        (mapped,) = verify.symmetry_check(elem, scenario)
        assert mapped.relative <= 2 * base.relative + 1e-12
        assert base.relative <= 2 * mapped.relative + 1e-12

    def test_plume_wrong_diffusion_exponent_fails(self):
        scenario = plume_scenario()
        (base,) = verify.symmetry_check(GroupElement.identity('plume'), scenario)
        (broken,) = verify.symmetry_check(
            GroupElement('plume', {'E_x': 3.0}, exponents={'kappa1': 1.0}), scenario)
        assert broken.relative > 1e-3
        assert broken.relative > 100 * base.relative

    def test_plume_single_mode_invariance(self):
        params = replace(PLUME, lam=0.05)
        scenario = plume_scenario(params, application='plume-small-lambda')
        (base,) = verify.symmetry_check(GroupElement.identity('plume'), scenario)
        (mapped,) = verify.symmetry_check(GroupElement('plume', {'E_x': 0.5, 'E_c': 4.0}), scenario)
        assert mapped.relative <= 2 * base.relative + 1e-12


class TestVerificationReports:
    def test_lake_scenario(self):
        (report,) = verify.verification_reports(lake_scenario(CASE1))
        assert report.equation == 'lake-case1'
        assert report.relative < 1e-8

    def test_plume_mode_and_robin_solver(self):
        scenario = plume_scenario(replace(PLUME, lam=0.05), application='plume-small-lambda')
        mode, robin = verify.verification_reports(scenario)
        assert mode.equation == 'plume-mode'
        assert mode.relative < 1e-8
        assert robin.equation == 'plume-fd-robin'
        assert robin.max_norm < 1e-2

    def test_plume_full_absorption(self):
        (report,) = verify.verification_reports(plume_scenario())
        assert report.equation == 'plume-fd-deviation'
        assert report.max_norm < 1e-2

    def test_blayer_reports(self):
        names = [report.equation for report in verify.verification_reports(blayer_scenario())]
        assert names == ['similarity-odes', 'continuity', 'momentum', 'energy']
