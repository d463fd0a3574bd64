import json

import pytest
from click.testing import CliRunner
from sqlalchemy import create_engine, select

from pnetdesign.main import CSV_COLUMNS, EXIT_INFEASIBLE, EXIT_INPUT_ERROR, EXIT_LIMIT, EXIT_OK, cli
from pnetdesign.models import cut_table, metadata, run_table


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def multipath(tmp_path, runner):
    path = tmp_path / 'multipath.json'
    result = runner.invoke(cli, ['generate', '--segments', '8', '--options', '3', '--seed', '1', '--output', str(path)])
    assert result.exit_code == EXIT_OK, result.output
    return path


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_version(runner):
    result = runner.invoke(cli, ['--version'])
    assert result.exit_code == EXIT_OK
    assert '0.1.0' in result.output


def test_generate_to_stdout(runner):
    result = runner.invoke(cli, ['generate', '--kind', 'random', '--nodes', '4', '--arcs', '5', '--seed', '3'])
    assert result.exit_code == EXIT_OK
    assert json.loads(result.output)['name'] == 'random-4n5a-s3'


def test_check_feasible(runner, data_dir, tmp_path):
    x_file = write(tmp_path, 'x.txt', 'a0 1\na1 1\na2 1\na3 1\na4 1\n')
    result = runner.invoke(cli, ['check', str(data_dir / 'two_segment.json'), x_file])
    assert result.exit_code == EXIT_OK
    assert result.output.startswith('feasible, spread ≤ π̄')


def test_check_infeasible(runner, data_dir, tmp_path):
    x_file = write(tmp_path, 'x.txt', 'a0 1\na3 1\n')
    result = runner.invoke(cli, ['check', str(data_dir / 'two_segment.json'), x_file, '--show-flows'])
    assert result.exit_code == EXIT_INFEASIBLE
    assert result.output.startswith('infeasible: potential spread')
    assert 'arc a1 flow 0' in result.output


def test_check_bad_build_vector(runner, data_dir, tmp_path):
    x_file = write(tmp_path, 'x.txt', 'a9 1\n')
    result = runner.invoke(cli, ['check', str(data_dir / 'two_segment.json'), x_file])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "unknown arc 'a9'" in result.output


def test_missing_file(runner, tmp_path):
    result = runner.invoke(cli, ['solve', str(tmp_path / 'nope.json')])
    assert result.exit_code == EXIT_INPUT_ERROR


def test_malformed_instance(runner, tmp_path):
    result = runner.invoke(cli, ['solve', write(tmp_path, 'bad.json', '{"version": 1}')])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert '$.nodes: missing' in result.output


def test_brute_force_excludes_cut_options(runner, data_dir):
    result = runner.invoke(cli, ['solve', str(data_dir / 'two_segment.json'), '--brute-force', '--no-cuts'])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert 'cannot be combined' in result.output


def test_solve_agrees_with_brute_force(runner, data_dir):
    instance = str(data_dir / 'bounded.json')
    exact = json.loads(runner.invoke(cli, ['solve', instance, '--brute-force', '--format', 'json']).output)
    solved = json.loads(runner.invoke(cli, ['solve', instance, '--format', 'json']).output)
    assert solved['status'] == exact['status'] == 'optimal'
    assert solved['cost'] == pytest.approx(exact['cost'])
    assert solved['x'] == exact['x']
    assert exact['k_max'] == 'brute-force'


def test_solve_csv(runner, data_dir):
    result = runner.invoke(cli, ['solve', str(data_dir / 'two_segment.json'), '--format', 'csv'])
    assert result.exit_code == EXIT_OK
    header, row = result.output.strip().splitlines()
    assert header.split(',') == list(CSV_COLUMNS)
    assert row.startswith('two-segment,True,all,1.0,')


def test_solve_multipath_with_cuts(runner, multipath, tmp_path):
    pool = tmp_path / 'pool.txt'
    x_output = tmp_path / 'x.txt'
    result = runner.invoke(cli, ['solve', str(multipath), '--fixed-k', '8', '--format', 'json',
                                 '--cut-pool', str(pool), '--x-output', str(x_output)])
    assert result.exit_code == EXIT_OK
    record = json.loads(result.output)
    assert record['branch_nodes'] == 0
    assert record['k_max'] == '=8'
    assert pool.read_text().startswith('8; v0; ')
    checked = CliRunner().invoke(cli, ['check', str(multipath), str(x_output)])
    assert checked.exit_code == EXIT_OK


def test_solve_multipath_without_cuts(runner, multipath):
    result = runner.invoke(cli, ['solve', str(multipath), '--no-cuts', '--node-limit', '3', '--format', 'json'])
    assert result.exit_code == EXIT_LIMIT
    record = json.loads(result.output)
    assert record['status'] == 'limit-reached'
    assert record['branch_nodes'] > 0
    assert record['cuts_enabled'] is False


def test_solve_stores_run(runner, data_dir, tmp_path):
    url = f'sqlite:///{tmp_path / "runs.db"}'
    engine = create_engine(url)
    metadata.create_all(engine)
    result = runner.invoke(cli, ['solve', str(data_dir / 'two_segment.json'), '--database-url', url])
    assert result.exit_code == EXIT_OK
    with engine.connect() as connection:
        runs = connection.execute(select(run_table.c.instance, run_table.c.status)).fetchall()
        cuts = connection.execute(select(cut_table.c.kind)).fetchall()
    assert [tuple(run) for run in runs] == [('two-segment', 'optimal')]
    assert len(cuts) >= 1


def test_separate_command(runner, data_dir, tmp_path):
    text = (data_dir / 'two_segment.json').read_text().replace('1.6', '1.8')
    instance = write(tmp_path, 'tight.json', text)
    x_file = write(tmp_path, 'x.txt', 'a0 1\na1 1\na2 1\na3 1\na4 1\n')
    result = runner.invoke(cli, ['separate', instance, x_file, '--log'])
    assert result.exit_code == EXIT_OK
    lines = result.output.splitlines()
    assert 'k=1 X={s} sigma=2 g=0.2' in lines
    assert lines[-2].startswith('violation -0.03223')
    assert lines[-1].startswith('2; s; 1.8; a0:0.353553')


def test_separate_command_no_violation(runner, data_dir, tmp_path):
    x_file = write(tmp_path, 'x.txt', 'a0 1\na1 1\na2 1\na3 1\na4 1\n')
    result = runner.invoke(cli, ['separate', str(data_dir / 'two_segment.json'), x_file])
    assert result.exit_code == EXIT_OK
    assert result.output.splitlines() == ['no violated inequality', 'min g_1 = 0', 'min g_2 = 0']


def test_reduce(runner, data_dir):
    result = runner.invoke(cli, ['reduce', str(data_dir / 'two_segment.json'), 's', 't', '--series-parallel'])
    assert result.exit_code == EXIT_OK
    lines = result.output.splitlines()
    assert lines[0].startswith('effective resistance s-t: ')
    assert float(lines[0].split(': ')[1]) == pytest.approx(13 / 36)
    assert lines[2] == 'series-parallel reduction: 2 nodes, 1 arcs'
    assert lines[3] == '  s -> t beta=0.361111111111'


def test_reduce_unknown_node(runner, data_dir):
    result = runner.invoke(cli, ['reduce', str(data_dir / 'two_segment.json'), 's', 'x'])
    assert result.exit_code == EXIT_INPUT_ERROR


def test_stats(runner, data_dir):
    result = runner.invoke(cli, ['stats', str(data_dir / 'two_segment.json'), str(data_dir / 'bounded.json'), '--format', 'json'])
    assert result.exit_code == EXIT_OK
    rows = json.loads(result.output)
    assert [row['instance'] for row in rows] == ['two-segment', 'bounded']
    assert rows[0]['arcs'] == 5
    assert rows[0]['feasible_all_built'] is True
    assert rows[0]['demand'] == pytest.approx(1.6)
