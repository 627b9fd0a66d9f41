import re
import xml.etree.ElementTree as ET

import pytest

from utils.errors import ContractError
from utils.metrics import write_metrics
from utils.plotting import emit_plot


def eval_metrics(path, returns):
    records = [{'step': i, 'env_steps': 200 * (i + 1), 'eval_return': r} for i, r in enumerate(returns)]
    return write_metrics(path, records)


def series_path(svg_path, gid):
    root = ET.parse(svg_path).getroot()
    groups = [el for el in root.iter() if el.get('id') == gid]
    assert groups, f"no element with id {gid}"
    paths = [el for el in groups[0].iter() if el.tag.endswith('path')]
    return paths[0].get('d')


def test_single_series(tmp_path):
    metrics = eval_metrics(tmp_path / 'a' / 'metrics.csv', [1.0, 3.0, 2.0])
    out = emit_plot([metrics], 'eval_return', tmp_path / 'plot.svg')
    root = ET.parse(out).getroot()
    assert root.tag.endswith('svg')
    assert series_path(out, 'series-0').startswith('M')
    text = (tmp_path / 'plot.svg').read_text()
    assert 'eval_return' in text
    assert 'env_steps' in text


def test_one_group_per_file(tmp_path):
    first = eval_metrics(tmp_path / 'seed0' / 'metrics.csv', [1.0, 2.0])
    second = eval_metrics(tmp_path / 'seed1' / 'metrics.csv', [2.0, 4.0])
    out = emit_plot([first, second], 'eval_return', tmp_path / 'plot.svg')
    assert series_path(out, 'series-0')
    assert series_path(out, 'series-1')


def test_constant_series_is_horizontal(tmp_path):
    metrics = eval_metrics(tmp_path / 'metrics.csv', [5.0, 5.0, 5.0, 5.0])
    out = emit_plot([metrics], 'eval_return', tmp_path / 'plot.svg')
    numbers = [float(n) for n in re.findall(r'-?\d+(?:\.\d+)?', series_path(out, 'series-0'))]
    ys = numbers[1::2]
    assert len(ys) == 4
    assert len(set(ys)) == 1


def test_unmeasured_rows_are_skipped(tmp_path):
    records = [
        {'step': 1, 'env_steps': 200, 'loss_total': 1.0},
        {'step': 1, 'env_steps': 200, 'eval_return': 7.0},
        {'step': 2, 'env_steps': 400, 'loss_total': 0.5},
        {'step': 2, 'env_steps': 400, 'eval_return': 9.0},
    ]
    metrics = write_metrics(tmp_path / 'metrics.csv', records)
    out = emit_plot([metrics], 'eval_return', tmp_path / 'plot.svg')
    numbers = re.findall(r'-?\d+(?:\.\d+)?', series_path(out, 'series-0'))
    assert len(numbers) == 4


@pytest.mark.parametrize('column', ['accuracy', 'env_steps'])
def test_unknown_column(tmp_path, column):
    metrics = eval_metrics(tmp_path / 'metrics.csv', [1.0])
    with pytest.raises(ContractError, match="available"):
        emit_plot([metrics], column, tmp_path / 'plot.svg')


def test_missing_metrics_file(tmp_path):
    with pytest.raises(ContractError):
        emit_plot([tmp_path / 'missing.csv'], 'eval_return', tmp_path / 'plot.svg')


def test_output_is_deterministic(tmp_path):
    metrics = eval_metrics(tmp_path / 'metrics.csv', [1.0, 4.0, 9.0])
    a = emit_plot([metrics], 'eval_return', tmp_path / 'a.svg')
    b = emit_plot([metrics], 'eval_return', tmp_path / 'b.svg')
    with open(a, 'rb') as fa, open(b, 'rb') as fb:
        assert fa.read() == fb.read()
