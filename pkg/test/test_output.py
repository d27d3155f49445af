"""
Tests sqrt_gaps.output
"""

import json
from pathlib import Path

import numpy as np
import pytest

from sqrt_gaps import output
from sqrt_gaps.models import SCHEMA_VERSION, GapSummary, RunConfig


@pytest.fixture
def cfg() -> RunConfig:
    return RunConfig(command='gaps', n=1000)


def test_jsonable():
    summary = GapSummary(n=3, mean=1.0, min=0.5, max=1.5, sup_deviation=0.25)
    assert output.jsonable(summary) == summary.dict()
    assert output.jsonable(np.array([1.5, 2.5])) == [1.5, 2.5]
    assert output.jsonable({1: np.int64(3)}) == {'1': 3}
    assert type(output.jsonable(np.float64(0.1))) is float
    assert output.jsonable(1 - 2j) == [1.0, -2.0]
    assert output.jsonable(Path('/tmp/out.csv')) == '/tmp/out.csv'
    assert output.jsonable((1, None)) == [1, None]


def test_json_document(cfg):
    value = 0.1 + 0.2
    doc = json.loads(output.json_document(cfg, {'value': value, 'rows': [{'x': np.float64(1 / 3)}]}))
    assert list(doc.keys()) == ['config', 'schema', 'results']
    assert doc['schema'] == SCHEMA_VERSION
    assert doc['config']['command'] == 'gaps'
    assert doc['config']['n'] == 1000
    assert doc['results']['value'] == value
    assert doc['results']['rows'][0]['x'] == 1 / 3


def test_csv_document(cfg):
    rows = [{'s': 0.1, 'void': 1 / 3, 'note': None}, {'s': 2.0, 'void': 1e-300, 'note': 'x'}]
    lines = output.csv_document(cfg, rows).splitlines()
    assert lines[0] == f'# schema: {SCHEMA_VERSION}'
    assert lines[1].startswith('# config: ')
    assert json.loads(lines[1][len('# config: '):])['command'] == 'gaps'
    assert lines[2] == 's,void,note'
    assert len(lines) == 5

    cells = lines[3].split(',')
    assert float(cells[1]) == 1 / 3
    assert cells[2] == ''
    assert float(lines[4].split(',')[1]) == 1e-300

    # No header without rows
    assert len(output.csv_document(cfg, []).splitlines()) == 2


def test_render(cfg):
    assert output.render(cfg, {'a': 1}).startswith('{')

    csv_cfg = cfg.copy(update={'format': 'csv'})
    lines = output.render(csv_cfg, {'a': 1.5, 'b': 2}).splitlines()
    assert lines[2:] == ['a,b', '1.5,2']

    lines = output.render(csv_cfg, {'ignored': True}, rows=[{'c': 3}]).splitlines()
    assert lines[2:] == ['c', '3']


def test_write_output(cfg, tmp_path, capsys):
    assert output.write_output(cfg, {'a': 1}) is None
    assert json.loads(capsys.readouterr().out)['results'] == {'a': 1}

    path = tmp_path / 'out.json'
    assert output.write_output(cfg.copy(update={'out_path': path}), {'a': 2}) == path
    assert json.loads(path.read_text())['results'] == {'a': 2}
    assert capsys.readouterr().out == ''

    with pytest.raises(OSError):
        output.write_output(cfg.copy(update={'out_path': tmp_path / 'missing' / 'out.json'}), {'a': 3})


def test_format_float():
    assert output.format_float(0.1) == '0.10000000000000001'
    assert output.format_float(np.float64(2.0)) == '2.0'
    assert output.format_float(-3.0) == '-3.0'
    assert output.format_float(float('nan')) == 'NaN'
    assert output.format_float(-float('inf')) == '-Infinity'


def test_json_float_digits(cfg):
    text = output.json_document(cfg, {'value': 0.1, 'rows': [{'x': 1.0, 'z': [1 - 2j]}], 'empty': []})
    assert '"value": 0.10000000000000001' in text
    assert '"x": 1.0' in text
    assert '"empty": []' in text
    doc = json.loads(text)
    assert doc['results']['rows'][0] == {'x': 1.0, 'z': [[1.0, -2.0]]}

    # The CSV config line uses the same float format
    line = output.csv_document(cfg, []).splitlines()[1]
    assert '"budget": 0.01' in line
    assert '"eta": 0.0050000000000000001' in line


def test_config_dict(cfg, tmp_path):
    config = output.config_dict(cfg.copy(update={'threads': 4, 'out_path': tmp_path / 'x.json', 'debug': True}))
    assert not set(output.RUNTIME_FIELDS) & set(config)
    assert list(config) == sorted(config)
    assert output.config_dict(cfg.copy(update={'threads': 1})) == config
