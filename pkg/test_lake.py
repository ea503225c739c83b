import math
from dataclasses import replace

import numpy as np
import pytest

from similarity import lake
from similarity.core import linspace
from similarity.exceptions import DomainError, InvalidArgumentError, SingularParameterError
from similarity.lake import LakeParams
from similarity.runner import LakeEvaluator

CASE1 = LakeParams(alpha=14095, beta=12355, mu=1.439239e-4, xi=0.048, c2=2496, h=400, t0=4)
CASE2 = LakeParams(alpha=13306, beta=12391, mu=0.0, xi=0.048, c2=0.2014, h=400, t0=4, case=2)


class TestParams:
    @pytest.mark.parametrize('field, value', [('alpha', -1), ('beta', 0), ('xi', 0), ('mu', -0.1),
                                              ('h', 0), ('m', 0), ('gamma', -1)])
    def test_rejects_out_of_range(self, field, value):
        with pytest.raises(InvalidArgumentError) as err:
            replace(CASE1, **{field: value})
        assert err.value.field == field

    def test_xi_equal_mu_rejected(self):
        with pytest.raises(InvalidArgumentError):
            replace(CASE1, mu=0.048)

    def test_case2_exponent_relation(self):
        with pytest.raises(InvalidArgumentError) as err:
            replace(CASE2, n=1.0)
        assert err.value.field == 'n'
        replace(CASE2, s=2.0, n=1.0)


class TestCharacteristicRoots:
    def test_symmetric_roots(self):
        params = LakeParams(alpha=2.0, beta=2.0, mu=0.0, xi=0.5, c2=1.0)
        r1, r2 = lake.characteristic_roots(params)
        assert r1 == pytest.approx(1.0, abs=1e-15)
        assert r2 == pytest.approx(-1.0, abs=1e-15)

    def test_vieta(self):
        r1, r2 = lake.characteristic_roots(CASE1)
        assert r1 * r2 == pytest.approx(-CASE1.sigma2, rel=1e-15)
        assert r1 + r2 == pytest.approx(CASE1.mu, abs=1e-15)
        assert r1 > 0 > r2

    def test_roots_solve_quadratic(self):
        for r in lake.characteristic_roots(CASE1):
            assert abs(r * r - CASE1.mu * r - CASE1.sigma2) < 1e-12 * CASE1.sigma2


class TestCase1:
    def test_initial_homothermy(self):
        z = np.linspace(0, 400, 11)
        assert np.all(lake.temperature_case1(CASE1, z, 0.0) == 4.0)

    def test_linear_in_time(self):
        z = np.linspace(0, 400, 11)
        once = lake.temperature_case1(CASE1, z, 40.0) - 4.0
        twice = lake.temperature_case1(CASE1, z, 80.0) - 4.0
        assert np.allclose(twice, 2 * once, rtol=1e-14, atol=0)

    def test_matches_direct_formula(self):
        # independent evaluation with math.* and the printed denominator
        r2 = (CASE1.mu - math.sqrt(CASE1.mu ** 2 + 4 * CASE1.alpha / CASE1.beta)) / 2
        k = CASE1.mu - CASE1.xi
        denom = CASE1.beta * k ** 2 - CASE1.beta * CASE1.mu * k - CASE1.alpha
        for z in (0.0, 25.0, 200.0):
            expected = 4 - 2496 * 40 / denom * (math.exp(k * z) + (-k / r2) * math.exp(r2 * z))
            assert float(lake.temperature_case1(CASE1, z, 40.0)) == pytest.approx(expected, rel=1e-9)

    def test_warms_from_the_surface_down(self):
        z = np.linspace(0, 400, 401)
        rise = lake.temperature_case1(CASE1, z, 40.0) - 4.0
        assert np.all(rise >= 0)
        assert np.all(np.diff(rise) <= 0)

    def test_neumann_surface(self):
        profile = lake.closed_form_profile(CASE1)
        assert abs(float(profile.df_of_eta(0.0))) < 1e-8 * float(profile.f_of_eta(0.0))

    def test_singular_denominator(self):
        k = CASE1.mu - CASE1.xi
        alpha = CASE1.beta * k ** 2 - CASE1.beta * CASE1.mu * k
        with pytest.raises(SingularParameterError):
            lake.closed_form_profile(replace(CASE1, alpha=alpha))

    @pytest.mark.parametrize('z, t', [(-1.0, 1.0), (401.0, 1.0), (10.0, -1.0)])
    def test_range_checked(self, z, t):
        with pytest.raises(InvalidArgumentError):
            lake.temperature_case1(CASE1, z, t)

    def test_closed_form_needs_unit_exponent(self):
        with pytest.raises(InvalidArgumentError):
            lake.closed_form_profile(replace(CASE1, m=2.0))


class TestCase2:
    def test_initial_homothermy(self):
        assert float(lake.temperature_case2(CASE2, 100.0, 0.0)) == 4.0

    def test_deep_water_limit(self):
        surface = float(lake.temperature_case2(CASE2, 0.0, 40.0)) - 4.0
        bottom = float(lake.temperature_case2(CASE2, 400.0, 40.0)) - 4.0
        assert 0 <= bottom < 1e-6 * surface

    def test_surface_slope_vanishes(self):
        profile = lake.closed_form_profile(CASE2)
        assert float(profile.df_of_eta(0.0)) == pytest.approx(0.0, abs=1e-15)

    def test_sigma_equal_xi_is_singular(self):
        params = replace(CASE2, alpha=CASE2.beta * CASE2.xi ** 2)
        with pytest.raises(SingularParameterError):
            lake.temperature_case2(params, 0.0, 1.0)

    def test_dispatch_by_case(self):
        assert lake.temperature(CASE2, 50.0, 10.0) == lake.temperature_case2(CASE2, 50.0, 10.0)

    def test_warms_from_the_surface_down(self):
        z = np.linspace(0, 400, 401)
        rise = lake.temperature_case2(CASE2, z, 40.0) - 4.0
        assert np.all(rise >= 0)
        assert np.all(np.diff(rise) <= 0)

    def test_affine_in_time(self):
        z = np.linspace(0, 400, 11)
        t = np.array([10.0, 25.0, 40.0])
        values = np.array([lake.temperature_case2(CASE2, z, s) for s in t])
        slope = (values[2] - values[0]) / (t[2] - t[0])
        assert np.allclose(values[1], values[0] + slope * (t[1] - t[0]), rtol=1e-13, atol=1e-14)
        assert np.allclose(values[0] - 10.0 * slope, 4.0, rtol=0, atol=1e-13)


class TestSourceAndCoefficients:
    def test_source_vanishes_at_start(self):
        assert np.all(lake.source_term(CASE1, np.linspace(0, 400, 5), 0.0) == 0)

    def test_surface_source_is_linear_for_unit_m(self):
        assert float(lake.source_term(CASE1, 0.0, 7.0)) == pytest.approx(2496 * 7.0)

    def test_source_general_m(self):
        params = replace(CASE1, m=2.0)
        z = 30.0
        assert float(lake.source_term(params, z, 2.0)) == pytest.approx(2496 * 2.0 * math.exp(-0.048 * z))

    def test_case1_q_times_f_is_g(self):
        profile = lake.closed_form_profile(CASE1)
        q, g = lake.coefficient_functions(CASE1, 1, profile)
        z = np.linspace(0, 400, 41)
        assert np.allclose(q(z) * profile.f_of_eta(z), g(z), rtol=1e-13)

    def test_unit_g_without_decay(self):
        params = replace(CASE1, mu=0.0)
        _, g = lake.coefficient_functions(params, 1, lake.closed_form_profile(params))
        assert np.all(g(np.linspace(0, 400, 5)) == 1.0)

    def test_case2_q(self):
        profile = lake.closed_form_profile(CASE2)
        q, g = lake.coefficient_functions(CASE2, 2, profile)
        assert float(q(200.0)) == pytest.approx(1.0 / float(profile.f_of_eta(200.0)), rel=1e-12)
        assert float(g(200.0)) == 1.0

    def test_zero_crossing_reported(self):
        profile = lake.closed_form_profile(CASE1)
        shifted = replace(profile, f_of_eta=lambda eta: profile.f_of_eta(eta) - float(profile.f_of_eta(100.0)))
        with pytest.raises(DomainError) as err:
            lake.coefficient_functions(CASE1, 1, shifted)
        assert err.value.location == pytest.approx(100.0, abs=0.5)


class TestReducedOde:
    def test_unit_exponent_matches_closed_form(self):
        grid = lake.default_eta_grid(CASE1)
        result = lake.solve_reduced_ode(CASE1, grid)
        exact = lake.closed_form_profile(CASE1).f_of_eta(grid.points)
        error = np.max(np.abs(result.field.values - exact)) / np.max(np.abs(exact))
        assert error < 1e-8
        assert result.mismatch <= 1e-10

    def test_homogeneous_problem(self):
        params = replace(CASE1, c2=0.0)
        field = lake.reduced_ode_general_m(params, linspace(0.0, 400.0, 101, name='eta'))
        assert np.max(np.abs(field.values)) < 1e-12

    def test_square_exponent_converges(self):
        params = replace(CASE1, m=2.0, h=40.0)
        result = lake.solve_reduced_ode(params, lake.default_eta_grid(params))
        assert result.mismatch <= 1e-10
        assert np.all(result.field.values[:-1] > 0)
        assert abs(result.field.values[-1]) < 1e-9

    @pytest.mark.parametrize('m', [1.0, 2.0])
    @pytest.mark.parametrize('z, t, field', [(-1.0, 1.0, 'z'), (41.0, 1.0, 'z'), (10.0, -1.0, 't')])
    def test_evaluator_checks_range(self, m, z, t, field):
        evaluator = LakeEvaluator(replace(CASE1, m=m, h=40.0))
        with pytest.raises(InvalidArgumentError) as err:
            evaluator.temperature(z, t)
        assert err.value.field == field

    def test_grid_must_span_lake(self):
        with pytest.raises(InvalidArgumentError):
            lake.solve_reduced_ode(CASE1, linspace(0.0, 200.0, 11, name='eta'))

    def test_case1_only(self):
        with pytest.raises(InvalidArgumentError) as err:
            lake.solve_reduced_ode(CASE2, lake.default_eta_grid(CASE2))
        assert err.value.field == 'case'

    def test_rejects_small_exponent(self):
        params = replace(CASE1, m=0.5)
        with pytest.raises(InvalidArgumentError):
            lake.solve_reduced_ode(params, lake.default_eta_grid(params))
