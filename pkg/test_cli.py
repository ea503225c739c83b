import io
import textwrap

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from similarity.core import read_csv
from similarity.exceptions import ScenarioError
from similarity.runner import EXIT_INVALID, RunRequest, execute, run
from similarity.scenarios import list_bundled, parse_scenario
from similarity.serializers import ScenarioSerializer

BAD_ALPHA = textwrap.dedent("""\
    name: broken
    application: lake-case1
    params:
      beta: 12355
      alpha: -1
      xi: 0.048
      c2: 2496
    probes:
      t: [40]
    outputs:
      - temperature(z)
""")

LAKE_PARAMS = {'alpha': 14095, 'beta': 12355, 'mu': 1.439239e-4, 'xi': 0.048, 'c2': 2496, 'h': 400, 't0': 4}


def call(*args, **options):
    out = io.StringIO()
    call_command(*args, stdout=out, stderr=io.StringIO(), **options)
    return out.getvalue()


class TestList:
    def test_lists_every_bundled_scenario(self):
        lines = call('list').splitlines()
        assert len(lines) == 7
        assert [line.split()[0] for line in lines] == [name for name, _ in list_bundled()]
        assert any('13306' in line for line in lines)

    @pytest.mark.parametrize('name', [name for name, _ in list_bundled()])
    def test_every_entry_runs(self, name, tmp_path):
        assert run(RunRequest(scenario=name, out_dir=tmp_path)) == 0


class TestRun:
    def test_writes_temperature_table(self, tmp_path):
        call('run', scenario='fig2', out=tmp_path)
        header, data = read_csv(tmp_path / 'fig2_temperature_z.csv')
        assert header == ['z', 'T_10', 'T_20', 'T_40', 'T_80', 'T_150']
        assert data.shape == (401, 6)
        assert list(data[:, 1] - 4.0 > 0) == [True] * 401

    def test_verify_writes_passing_residuals(self, tmp_path):
        call('run', scenario='fig2', out=tmp_path, verify=True)
        with open(tmp_path / 'fig2_residuals.csv') as f:
            rows = [line.split(',') for line in f.read().splitlines()]
        assert rows[0][:3] == ['equation', 'max_norm', 'l2_norm']
        assert len(rows) > 1
        assert all(row[0] == 'lake-case1' and row[6] == 'yes' for row in rows[1:])

    def test_sweep_columns(self, tmp_path):
        call('run', scenario='fig3', out=tmp_path)
        header, _ = read_csv(tmp_path / 'fig3_temperature_z.csv')
        assert header == ['z', 'T_alpha=11000', 'T_alpha=13306', 'T_alpha=15000', 'T_alpha=17000']

    def test_invalid_parameter(self, tmp_path):
        path = tmp_path / 'broken.scn'
        path.write_text(BAD_ALPHA)
        with pytest.raises(CommandError) as err:
            call('run', scenario=str(path), out=tmp_path / 'out')
        assert err.value.returncode == EXIT_INVALID
        assert 'alpha' in str(err.value)

    def test_unknown_scenario(self, tmp_path):
        assert run(RunRequest(scenario='no-such-scenario', out_dir=tmp_path)) == EXIT_INVALID

    @pytest.mark.parametrize('name', [name for name, _ in list_bundled()])
    def test_output_is_deterministic(self, name, tmp_path):
        for run_dir in ('first', 'second'):
            call('run', scenario=name, out=tmp_path / run_dir)
        produced = sorted(path.name for path in (tmp_path / 'first').iterdir())
        assert produced
        assert produced == sorted(path.name for path in (tmp_path / 'second').iterdir())
        for filename in produced:
            assert (tmp_path / 'first' / filename).read_bytes() == (tmp_path / 'second' / filename).read_bytes()

    def test_plot(self, tmp_path):
        outcome = execute(RunRequest(scenario='plume-case1', out_dir=tmp_path, plot=True))
        assert outcome.status == 0
        plot = tmp_path / 'plume-case1_C_x.svg'
        assert plot in outcome.files
        assert plot.read_text().lstrip().startswith('<?xml')

    def test_eigen_table(self, tmp_path):
        call('run', scenario='plume-case1', out=tmp_path)
        with open(tmp_path / 'plume-case1_eigen-table.csv') as f:
            lines = f.read().splitlines()
        assert lines[0] == 'variant,n,N,p,m'
        assert [line.split(',')[1] for line in lines[1:]] == ['1', '2', '3', '4', '5']

    def test_boundary_layer_outputs(self, tmp_path):
        outcome = execute(RunRequest(scenario='blayer-ref', out_dir=tmp_path))
        assert outcome.status == 0
        with open(tmp_path / 'blayer-ref_wall.csv') as f:
            lines = f.read().splitlines()
        assert lines[0] == 'variant,x,t,T_w,q_flux,wall_shear'
        assert len(lines) == 3


class TestVerifyCommand:
    def test_single_scenario(self):
        output = call('verify', scenario=['plume-case1'])
        assert output.splitlines()[0].startswith('equation,')
        assert 'plume-mode' in output

    def test_invalid_scenario(self, tmp_path):
        path = tmp_path / 'broken.scn'
        path.write_text(BAD_ALPHA)
        with pytest.raises(CommandError) as err:
            call('verify', scenario=[str(path)])
        assert err.value.returncode == EXIT_INVALID


class TestScenarioParsing:
    def test_diagnostic_points_at_line(self):
        with pytest.raises(ScenarioError) as err:
            parse_scenario(BAD_ALPHA, source='broken.scn')
        key, line, _ = err.value.diagnostics[0]
        assert key == 'params.alpha'
        assert line == 5
        assert 'broken.scn: line 5' in str(err.value)

    def test_malformed_yaml(self):
        with pytest.raises(ScenarioError) as err:
            parse_scenario('name: [unclosed\n')
        assert err.value.diagnostics[0][0] == '<yaml>'

    def test_unknown_output(self):
        text = BAD_ALPHA.replace('alpha: -1', 'alpha: 14095').replace('temperature(z)', 'C(x)')
        with pytest.raises(ScenarioError) as err:
            parse_scenario(text)
        assert err.value.diagnostics[0][0] == 'outputs'

    def test_lambda_key(self):
        scenario = parse_scenario(textwrap.dedent("""\
            application: plume-small-lambda
            params: {u: 1.0, kappa1: 0.1, kappa2: 0.1, lambda: 0.02}
            outputs: [C(x)]
        """))
        assert scenario.params.lam == 0.02
        assert scenario.case == 1

    def test_misspelled_parameter(self):
        text = BAD_ALPHA.replace('alpha: -1', 'alpha: 14095\n  gama: 0.5')
        with pytest.raises(ScenarioError) as err:
            parse_scenario(text)
        keys = {key: line for key, line, _ in err.value.diagnostics}
        assert keys == {'params.gama': 6}

    def test_unknown_plume_parameter(self):
        with pytest.raises(ScenarioError) as err:
            parse_scenario(textwrap.dedent("""\
                application: plume-small-lambda
                params: {u: 1.0, kappa1: 0.1, kappa2: 0.1, lamda: 0.02}
                outputs: [C(x)]
            """))
        assert [key for key, _, _ in err.value.diagnostics] == ['params.lamda']

    @pytest.mark.parametrize('application, case', [('lake-case1', 2), ('lake-case2', 1)])
    def test_case_contradicts_application(self, application, case):
        serializer = ScenarioSerializer(data={'application': application, 'outputs': ['temperature(z)'],
                                              'params': {**LAKE_PARAMS, 'case': case}})
        assert not serializer.is_valid()
        assert 'case' in serializer.errors['params']

    def test_case_matching_application(self):
        serializer = ScenarioSerializer(data={'application': 'lake-case2', 'outputs': ['temperature(z)'],
                                              'params': {**LAKE_PARAMS, 'case': 2}})
        assert serializer.is_valid(), serializer.errors
        assert serializer.validated_data['params'].case == 2


class TestSweepValidation:
    def document(self, sweep):
        return {'application': 'lake-case1', 'params': dict(LAKE_PARAMS), 'outputs': ['temperature(z)'],
                'sweep': sweep}

    def test_valid_sweep(self):
        assert ScenarioSerializer(data=self.document({'alpha': [12000, 16000]})).is_valid()

    def test_one_parameter_only(self):
        serializer = ScenarioSerializer(data=self.document({'alpha': [1.0], 'beta': [1.0]}))
        assert not serializer.is_valid()
        assert 'sweep' in serializer.errors

    def test_invalid_value(self):
        serializer = ScenarioSerializer(data=self.document({'alpha': [12000, -5]}))
        assert not serializer.is_valid()
        assert 'alpha' in serializer.errors['sweep']

    def test_unknown_parameter(self):
        serializer = ScenarioSerializer(data=self.document({'kappa1': [1.0]}))
        assert not serializer.is_valid()
