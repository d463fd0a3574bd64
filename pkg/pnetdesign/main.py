import asyncio
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Sequence

import alembic.config
import click
import databases
import numpy as np

from pnetdesign import __version__
from pnetdesign.flow import FlowSolverException, InvalidBuildVectorException, check_feasibility, effective_resistance, \
    reduce_series_parallel
from pnetdesign.generator import GeneratorSpec, InvalidGeneratorSpecException, generate
from pnetdesign.inequality import InequalityFormatException, format_inequality
from pnetdesign.instance_io import InstanceFormatException, format_build_vector, parse_instance, read_build_vector, \
    serialize_instance
from pnetdesign.logger import add_stdout_handler, logger
from pnetdesign.lp import LpNumericalException
from pnetdesign.mutually_exclusive_click import MutuallyExclusiveOption
from pnetdesign.network import Instance, InvalidInstanceException, NonTerminalException, UnknownNodeException, \
    balance_of_subset
from pnetdesign.repository import CutRecord, RunRecord, SqlalchemyRepository
from pnetdesign.separation import ProblemTooLargeException, separate
from pnetdesign.solver import SolveOutcome, SolveStatus, SolverConfig, solve_branch_and_cut, solve_bruteforce

EXIT_OK, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_INPUT_ERROR, EXIT_NUMERICAL = 0, 1, 2, 3, 4
CSV_COLUMNS = ('instance', 'cuts_enabled', 'k_max', 'pi_bar', 'time_s', 'nodes', 'gap_pct')
TABLE_COLUMNS = ('instance', 'cuts_enabled', 'k_max', 'pi_bar', 'status', 'cost', 'time_s', 'nodes', 'branch_nodes', 'cuts', 'gap_pct')
STATUS_EXIT = {SolveStatus.OPTIMAL: EXIT_OK, SolveStatus.INFEASIBLE: EXIT_INFEASIBLE, SolveStatus.LIMIT: EXIT_LIMIT}

INPUT_ERRORS = (InstanceFormatException, InvalidBuildVectorException, InvalidInstanceException, UnknownNodeException,
                NonTerminalException, InequalityFormatException, InvalidGeneratorSpecException,
                ProblemTooLargeException, OSError, ValueError)
NUMERICAL_ERRORS = (FlowSolverException, LpNumericalException)


class ExitCodeGroup(click.Group):
    """maps usage and domain errors to the documented exit codes"""

    def main(self, *args, **kwargs):
        kwargs['standalone_mode'] = False
        try:
            code = super().main(*args, **kwargs)
        except click.UsageError as error:
            error.show()
            code = EXIT_INPUT_ERROR
        except click.ClickException as error:
            error.show()
            code = error.exit_code
        except click.Abort:
            click.echo('Aborted!', err=True)
            code = EXIT_INFEASIBLE
        except NUMERICAL_ERRORS as error:
            click.echo(f'numerical failure: {error}', err=True)
            code = EXIT_NUMERICAL
        except INPUT_ERRORS as error:
            click.echo(f'input error: {error}', err=True)
            code = EXIT_INPUT_ERROR
        sys.exit(code if isinstance(code, int) else EXIT_OK)


def _load_instance(path: str) -> Instance:
    return parse_instance(Path(path).read_text())


def _format_value(value) -> str:
    if isinstance(value, float):
        return 'inf' if math.isinf(value) else f'{value:.6g}'
    return '-' if value is None else str(value)


def format_rows(rows: Sequence[Dict], columns: Sequence[str], fmt: str) -> str:
    if fmt == 'json':
        return json.dumps(list(rows), indent=2, default=str)
    if fmt == 'csv':
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=list(columns), extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
        return buffer.getvalue().rstrip('\n')
    cells = [list(columns)] + [[_format_value(row.get(column)) for column in columns] for row in rows]
    widths = [max(len(line[i]) for line in cells) for i in range(len(columns))]
    return '\n'.join('  '.join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip() for line in cells)


@click.group(cls=ExitCodeGroup)
@click.version_option(__version__)
@click.option('--verbose/--quiet', default=None, help='Log debug details (or only warnings) to stdout')
@click.pass_context
def cli(ctx, **options):
    # Pass all option to context
    ctx.ensure_object(dict)
    ctx.obj.update(options)
    if options['verbose'] is not None:
        add_stdout_handler(level=logging.DEBUG if options['verbose'] else logging.WARNING)


@cli.command('generate')
@click.option('--kind', type=click.Choice(['multipath', 'random']), default='multipath', help='Instance family')
@click.option('--segments', type=int, default=8, help='Multipath: number of segments')
@click.option('--options', type=int, default=3, help='Multipath: pipe options per segment')
@click.option('--nodes', type=int, default=6, help='Random: number of nodes')
@click.option('--arcs', type=int, default=9, help='Random: number of arcs')
@click.option('--entries', type=int, default=1, help='Random: number of entries')
@click.option('--exits', type=int, default=1, help='Random: number of exits')
@click.option('--demand', type=float, default=1.0, help='Total demand d')
@click.option('--pi-bar', type=float, default=None, help='Global potential bound (default: tight for multipath, scaled spread for random)')
@click.option('--pi-factor', type=float, default=1.5, help='Random: pi_bar as a multiple of the spread with every arc built')
@click.option('--degree-r', type=float, default=2.0, help='Exponent r of the potential law')
@click.option('--unequal-lengths', is_flag=True, help='Draw one length per pipe instead of one for all')
@click.option('--seed', type=int, default=0, help='Random seed')
@click.option('--output', type=click.Path(dir_okay=False), default=None, help='Instance file to write (default stdout)')
def generate_instance(kind, segments, options, nodes, arcs, entries, exits, demand, pi_bar, pi_factor, degree_r,
                      unequal_lengths, seed, output) -> int:
    spec = GeneratorSpec(kind=kind, segments=segments, options=options, nodes=nodes, arcs=arcs, entries=entries,
                         exits=exits, demand=demand, pi_bar=pi_bar, pi_factor=pi_factor, degree_r=degree_r,
                         equal_lengths=not unequal_lengths, seed=seed)
    text = serialize_instance(generate(spec))
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)
    return EXIT_OK


async def _store(database_url: str, inst: Instance, record: Dict, outcome: SolveOutcome) -> int:
    database = databases.Database(database_url)
    await database.connect()
    try:
        repository = SqlalchemyRepository(database)
        run_id = await repository.save_run(RunRecord.from_record(record))
        await repository.save_cuts(run_id, [CutRecord.from_cut(cut, inst.graph) for cut in outcome.cuts])
        return run_id
    finally:
        await database.disconnect()


@cli.command()
@click.argument('instance', type=click.Path(exists=True, dir_okay=False))
@click.option('--k-max', type=int, cls=MutuallyExclusiveOption, mutually_exclusive=['brute_force'], help='Largest k separated (default |V|-1)')
@click.option('--fixed-k', type=int, cls=MutuallyExclusiveOption, mutually_exclusive=['brute_force'], help='Separate a single k only')
@click.option('--no-cuts', is_flag=True, cls=MutuallyExclusiveOption, mutually_exclusive=['brute_force'], help='Disable disjoint-cut inequalities')
@click.option('--root-only-cuts', is_flag=True, help='Separate at the root node only')
@click.option('--time-limit', type=float, default=None, help='Wall time limit in seconds')
@click.option('--node-limit', type=int, default=None, help='Limit on processed nodes')
@click.option('--workers', type=int, default=1, cls=MutuallyExclusiveOption, mutually_exclusive=['brute_force'], help='Threads used by separation')
@click.option('--brute-force', is_flag=True, cls=MutuallyExclusiveOption, mutually_exclusive=['no_cuts', 'k_max', 'fixed_k', 'workers'],
              help='Enumerate every build vector instead')
@click.option('--format', 'fmt', type=click.Choice(['table', 'csv', 'json']), default='table', help='Output format')
@click.option('--database-url', default=None, help='Sqlite url ex: sqlite:///path/to/sqlfile to store the run')
@click.option('--cut-pool', type=click.Path(dir_okay=False), default=None, help='File receiving the final cut pool')
@click.option('--x-output', type=click.Path(dir_okay=False), default=None, help='File receiving the best build vector')
def solve(instance, k_max, fixed_k, no_cuts, root_only_cuts, time_limit, node_limit, workers, brute_force, fmt,
          database_url, cut_pool, x_output) -> int:
    inst = _load_instance(instance)
    if brute_force:
        config = None
        outcome = solve_bruteforce(inst)
    else:
        config = SolverConfig(use_cuts=not no_cuts, k_max=k_max, fixed_k=fixed_k, node_limit=node_limit,
                              time_limit=time_limit, root_only_cuts=root_only_cuts, workers=workers)
        outcome = solve_branch_and_cut(inst, config)
    record = outcome.to_record(inst, config)
    if fmt == 'json':
        record['x'] = None if outcome.x is None else dict(zip(inst.graph.arc_names, outcome.x.astype(int).tolist()))
        click.echo(json.dumps(record, indent=2, default=str))
    else:
        click.echo(format_rows([record], CSV_COLUMNS if fmt == 'csv' else TABLE_COLUMNS, fmt))

    if cut_pool:
        Path(cut_pool).write_text(''.join(format_inequality(cut, inst.graph) + '\n' for cut in outcome.cuts))
    if x_output and outcome.x is not None:
        Path(x_output).write_text(format_build_vector(outcome.x, inst, f'{inst.name} {outcome.status.value} cost {outcome.cost!r}'))
    if database_url:
        loop = asyncio.new_event_loop()
        run_id = loop.run_until_complete(_store(database_url, inst, record, outcome))
        loop.close()
        logger.info(f'stored run {run_id} in {database_url}')
    return STATUS_EXIT[outcome.status]


@cli.command()
@click.argument('instance', type=click.Path(exists=True, dir_okay=False))
@click.argument('x_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--show-flows', is_flag=True, help='Print arc flows and node potentials')
def check(instance, x_file, show_flows) -> int:
    inst = _load_instance(instance)
    x = read_build_vector(Path(x_file).read_text(), inst)
    report = check_feasibility(inst, x)
    if report.feasible:
        click.echo(f'feasible, spread ≤ π̄ (spread={report.max_spread:.9g}, pi_bar={inst.pi_bar:.9g})')
    else:
        click.echo(f'infeasible: {report.reason}')
    if show_flows:
        g = inst.graph
        for a, name in enumerate(g.arc_names):
            click.echo(f'arc {name} flow {report.flow[a]:.9g}')
        for v, name in enumerate(g.node_names):
            click.echo(f'node {name} potential {report.potential[v]:.9g}')
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


@cli.command('separate')
@click.argument('instance', type=click.Path(exists=True, dir_okay=False))
@click.argument('x_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--k-max', type=int, default=None, help='Largest k separated (default |V|-1)')
@click.option('--fixed-k', type=int, default=None, help='Separate a single k only')
@click.option('--log/--no-log', 'show_log', default=False, help='Print every evaluated (k, X) candidate')
def separate_command(instance, x_file, k_max, fixed_k, show_log) -> int:
    inst = _load_instance(instance)
    x = read_build_vector(Path(x_file).read_text(), inst)
    result = separate(inst, x, k_max=k_max, fixed_k=fixed_k)
    g = inst.graph
    if show_log:
        for candidate in result.log:
            nodes = ','.join(g.node_names[v] for v in sorted(candidate.X))
            click.echo(f'k={candidate.k} X={{{nodes}}} sigma={candidate.sigma:.9g} g={candidate.g:.9g}')
    if result.violated is None:
        click.echo('no violated inequality')
        for k, value in sorted(result.certificate.items()):
            click.echo(f'min g_{k} = {value:.9g}')
    else:
        click.echo(f'violation {result.best.g:.9g}')
        click.echo(format_inequality(result.violated, g))
    return EXIT_OK


@cli.command('reduce')
@click.argument('instance', type=click.Path(exists=True, dir_okay=False))
@click.argument('source')
@click.argument('target')
@click.option('--series-parallel', is_flag=True, help='Also print the series-parallel reduction between the two nodes')
def reduce_command(instance, source, target, series_parallel) -> int:
    inst = _load_instance(instance)
    g = inst.graph
    s, t = g.node_index(source), g.node_index(target)
    resistance = effective_resistance(inst.network, s, t)
    click.echo(f'effective resistance {source}-{target}: {resistance:.12g}')
    click.echo(f'effective conductance {source}-{target}: {resistance ** (-1.0 / inst.degree_r):.12g}')
    if series_parallel:
        reduced = reduce_series_parallel(inst.network, [s, t])
        click.echo(f'series-parallel reduction: {reduced.graph.n_nodes} nodes, {reduced.graph.n_arcs} arcs')
        for a, arc in enumerate(reduced.graph.arcs):
            click.echo(f'  {reduced.graph.node_names[arc.tail]} -> {reduced.graph.node_names[arc.head]} beta={reduced.beta[a]:.12g}')
    return EXIT_OK


@cli.command()
@click.argument('instances', nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--format', 'fmt', type=click.Choice(['table', 'csv', 'json']), default='table', help='Output format')
def stats(instances, fmt) -> int:
    rows: List[Dict] = []
    for path in instances:
        inst = _load_instance(path)
        report = check_feasibility(inst, np.ones(inst.graph.n_arcs))
        rows.append({
            'instance': inst.name,
            'nodes': inst.graph.n_nodes,
            'arcs': inst.graph.n_arcs,
            'entries': len(inst.t_plus),
            'exits': len(inst.t_minus),
            'demand': balance_of_subset(inst, inst.t_plus),
            'degree_r': inst.degree_r,
            'pi_bar': inst.pi_bar,
            'spread_all_built': report.max_spread,
            'feasible_all_built': report.feasible,
            'total_cost': float(np.sum(inst.cost)),
        })
    click.echo(format_rows(rows, list(rows[0]), fmt))
    return EXIT_OK


@cli.command()
@click.option('--database-url', prompt='Database file', help='Sqlite url ex: sqlite:///path/to/sqlfile')
def migrate(database_url: str) -> None:
    _migrate(database_url)


def _migrate(database_url: str) -> None:
    args = [
        '--raiseerr',
        '-x', f'dbPath={database_url}',
        'upgrade', 'head'
    ]
    alembic.config.main(argv=args)


if __name__ == '__main__':
    cli()
