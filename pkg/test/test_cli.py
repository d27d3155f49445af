"""
Tests sqrt_gaps.cli
"""

import json

import pytest

from sqrt_gaps import (CheckFailed, ConfigError, NumericsError, arith, checks,
                       cli, moments, output, testing)
from sqrt_gaps.models import JutilaReport, MomentReport, RunConfig

TESTED = cli.__name__


def test_parse_config():
    cfg = cli.parse_config(['gaps', '--n', '1000'])
    assert cfg.command == 'gaps'
    assert cfg.n == 1000
    assert cfg.delta == 2.0
    assert cfg.threads is None
    assert cfg.out_path is None

    cfg = cli.parse_config(['prop3-check',
                            '--delta', '1.5',
                            '--theta', '4e-7',
                            '--mode', 'relaxed',
                            '--eta', '0.5',
                            '--deltas', '1.2', '1.5',
                            '--restricted',
                            ])
    assert cfg.command == 'prop3-check'
    assert cfg.delta == 1.5
    assert cfg.theta == 4e-7
    assert cfg.mode == 'relaxed'
    assert cfg.deltas == [1.2, 1.5]
    assert cfg.restricted
    assert cfg.function_params().eta == 0.5


def test_parse_config_file(tmp_path):
    args = tmp_path / 'args.txt'
    args.write_text('--n\n2000\n--k\n3\n')
    cfg = cli.parse_config(['moments', f'@{args}'])
    assert cfg.n == 2000
    assert cfg.k == 3


@pytest.mark.parametrize('args, flag', [
    (['gaps', '--n', '50'], '--n'),
    (['moments', '--k', '4'], '--k'),
    (['gaps', '--bins', '5'], '--bins'),
    (['qset', '--prime-floor', '2'], '--prime-floor'),
    (['moments', '--t-cap', '0'], '--t-cap'),
])
def test_config_errors(args, flag):
    with pytest.raises(ConfigError) as exc_info:
        cli.parse_config(args)
    assert flag in str(exc_info.value)


def test_config_root_errors():
    with pytest.raises(ConfigError):
        cli.parse_config(['gaps', '--eta', '0.3'])
    with pytest.raises(ConfigError):
        cli.parse_config(['jutila', '--n', '1000', '--max-ell', '10'])
    with pytest.raises(ConfigError) as exc_info:
        cli.parse_config(['gaps', '--bogus', '1'])
    assert 'Unknown arguments' in str(exc_info.value)


def test_main_usage(mocker, capsys):
    m_error = mocker.patch(TESTED + '.LOGGER.error')
    assert cli.main(['gaps', '--n', '50', '--unknown', 'really']) == cli.EXIT_USAGE
    assert 'usage' in capsys.readouterr().err
    m_error.assert_called_once_with(testing.matching(r".*\['--unknown', 'really'\]"))


def test_run_codes(mocker, capsys):
    cfg = RunConfig(command='gaps', n=1000)

    mocker.patch.dict(checks.COMMANDS, {'gaps': lambda cfg: ({'lhs': 1.0}, None)})
    assert cli.run(cfg) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)['results'] == {'lhs': 1.0}

    def failing(cfg):
        raise CheckFailed('out of tolerance', {'rows': [{'s': 1.0}], 'max_mismatch': 0.5})

    mocker.patch.dict(checks.COMMANDS, {'gaps': failing})
    assert cli.run(cfg) == cli.EXIT_CHECK
    assert json.loads(capsys.readouterr().out)['results']['max_mismatch'] == 0.5

    csv_cfg = cfg.copy(update={'format': 'csv'})
    assert cli.run(csv_cfg) == cli.EXIT_CHECK
    assert capsys.readouterr().out.splitlines()[2:] == ['s', '1']

    def broken(cfg):
        raise NumericsError('no convergence')

    mocker.patch.dict(checks.COMMANDS, {'gaps': broken})
    assert cli.run(cfg) == cli.EXIT_CHECK
    assert capsys.readouterr().out == ''


def test_run_write_error(mocker):
    mocker.patch.dict(checks.COMMANDS, {'qset': lambda cfg: ({}, None)})
    m_write = mocker.patch(output.__name__ + '.write_output', side_effect=OSError('disk full'))
    assert cli.run(RunConfig(command='qset')) == cli.EXIT_IO
    assert m_write.call_count == 1


def test_summary():
    cfg = RunConfig(command='jutila')
    assert cli._summary(cfg, {'max_ratio': 0.5, 'rows': []}) == 'jutila max_ratio=0.5'
    assert cli._summary(cfg, None) == 'jutila'


def test_gaps_command(tmp_path):
    path = tmp_path / 'gaps.csv'
    assert cli.main(['gaps', '--n', '1000', '--bins', '20', '--format', 'csv',
                     '--out-path', str(path), '--threads', '1']) == cli.EXIT_OK
    lines = path.read_text().splitlines()
    assert lines[0].startswith('# schema:')
    assert lines[1].startswith('# config:')
    assert lines[2].startswith('bin_lo,bin_hi,count')
    assert len(lines) == 3 + 21


def test_void_command(tmp_path):
    path = tmp_path / 'void.json'
    assert cli.main(['void', '--n', '1000', '--out-path', str(path)]) == cli.EXIT_OK
    results = json.loads(path.read_text())['results']
    assert [r['s'] for r in results['rows']] == [0.1, 0.5, 1.0, 2.0, 5.0]
    assert results['max_mismatch'] <= checks.VOID_TOL


def test_qset_command(tmp_path):
    path = tmp_path / 'qset.json'
    assert cli.main(['qset', '--n', '10000', '--delta', '1.5', '--out-path', str(path)]) == cli.EXIT_OK
    results = json.loads(path.read_text())['results']
    assert len(results['qset']['members']) == 8
    assert results['qset']['a_band'] == [6, 12]
    assert results['phi_stats']['phi_total'] == 1496


def test_fresnel_command(tmp_path):
    path = tmp_path / 'fresnel.csv'
    assert cli.main(['fresnel-check', '--format', 'csv', '--out-path', str(path)]) == cli.EXIT_OK
    lines = path.read_text().splitlines()
    assert lines[2] == 'v,bump,lhs_re,lhs_im,rhs_re,rhs_im,deviation'
    assert len(lines) == 3 + 2 * len(checks.FRESNEL_VS)


def test_moments_defaults(mocker, tmp_path):
    path = tmp_path / 'moments.json'

    def lhs(mu, tf, N, Delta, k, *args, **kwargs):
        return moments.moment_rhs(tf, Delta, k, threads=1)

    m_compare = mocker.patch(checks.__name__ + '.moment_compare', wraps=checks.moment_compare)
    mocker.patch(moments.__name__ + '.moment_lhs', side_effect=lhs)
    assert cli.main(['moments', '--n', '10000', '--delta', '1.5', '--threads', '1',
                     '--out-path', str(path)]) == cli.EXIT_OK
    assert m_compare.call_count == 1

    doc = json.loads(path.read_text())
    assert doc['config']['mode'] == 'relaxed'
    assert doc['config']['eta'] == 0.5
    report = MomentReport(**doc['results'])
    assert report.k == 2
    assert report.rhs > 0
    assert report.rel_error == 0


def test_moments_strict(mocker):
    # Strict ramps need a coupling table above the size limit
    mocker.patch(moments.__name__ + '.moment_lhs', return_value=0.5)
    assert cli.main(['moments', '--n', '10000', '--delta', '1.5', '--threads', '1',
                     '--mode', 'strict']) == cli.EXIT_CHECK


@pytest.mark.slow
def test_gauss_command(tmp_path):
    path = tmp_path / 'gauss.json'
    assert cli.main(['gauss-check', '--out-path', str(path)]) == cli.EXIT_OK
    results = json.loads(path.read_text())['results']
    assert results['phase_nonzero'] == 0
    assert results['closed_max_deviation'] <= checks.GAUSS_TOL


@pytest.mark.parametrize('v', [1, 7, checks.GAUSS_DIRECT_V_MAX, checks.GAUSS_DIRECT_V_MAX + 1])
def test_closed_deviation(v):
    # Direct summation up to the cutoff, FFT row above it
    assert checks._closed_deviation(v) <= checks.GAUSS_TOL


def test_jutila_empty_rung(mocker, tmp_path):
    path = tmp_path / 'jutila.json'
    build = arith.build_qset

    def qset(delta, N, *args):
        if delta > 2:
            raise arith.EmptyQSet(f'nothing at {delta}')
        return build(delta, N, *args)

    def report(mu, N, *args):
        return JutilaReport(delta=mu.qset.Delta, n=N, members=len(mu.qset.members), L=mu.L,
                            lhs=2.0, head=2.0, tail=0.0, bound=1.0)

    mocker.patch(arith.__name__ + '.build_qset', side_effect=qset)
    mocker.patch(checks.__name__ + '.jutila_l2', side_effect=report)
    assert cli.main(['jutila', '--n', '10000', '--deltas', '1.5', '2.5',
                     '--out-path', str(path)]) == cli.EXIT_OK
    results = json.loads(path.read_text())['results']
    assert [r['delta'] for r in results['rows']] == [1.5]
    assert results['max_ratio'] == 2.0

    assert cli.main(['jutila', '--n', '10000', '--deltas', '2.5', '3']) == cli.EXIT_CHECK


@pytest.mark.slow
def test_jutila_ladder(tmp_path):
    path = tmp_path / 'jutila.json'
    assert cli.main(['jutila', '--n', '100000', '--deltas', '1.5', '2', '2.5',
                     '--out-path', str(path)]) == cli.EXIT_OK
    rows = json.loads(path.read_text())['results']['rows']
    assert [r['delta'] for r in rows][:2] == [1.5, 2.0]
    assert all(r['ratio'] <= checks.JUTILA_RATIO_MAX for r in rows)


@pytest.mark.parametrize('fmt', ['csv', 'json'])
def test_output_independent_of_threads(tmp_path, fmt):
    texts = []
    for threads in (1, 4):
        path = tmp_path / f'gaps-{threads}.{fmt}'
        assert cli.main(['gaps', '--n', '10000', '--format', fmt, '--threads', str(threads),
                         '--out-path', str(path)]) == cli.EXIT_OK
        texts.append(path.read_bytes())
    assert texts[0] == texts[1]
