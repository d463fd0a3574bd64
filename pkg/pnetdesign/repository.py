import abc
import datetime
import math
from typing import Dict, List, Optional, Sequence

from databases import Database
from sqlalchemy import insert, select

from pnetdesign.inequality import Cut, format_inequality
from pnetdesign.logger import logger
from pnetdesign.models import cut_table, run_table
from pnetdesign.network import MultiGraph


def _finite(value: Optional[float]) -> Optional[float]:
    return None if value is None or not math.isfinite(value) else float(value)


class RunRecord:
    def __init__(self, instance: str, cuts_enabled: bool, k_max: str, pi_bar: float, status: str,
                 cost: Optional[float], dual_bound: Optional[float], nodes: int, branch_nodes: int, cuts: int,
                 time_s: float, gap_pct: Optional[float], created_at: Optional[datetime.datetime] = None, id=None):
        self.id = id
        self.instance = instance
        self.cuts_enabled = cuts_enabled
        self.k_max = k_max
        self.pi_bar = pi_bar
        self.status = status
        self.cost = cost
        self.dual_bound = dual_bound
        self.nodes = nodes
        self.branch_nodes = branch_nodes
        self.cuts = cuts
        self.time_s = time_s
        self.gap_pct = gap_pct
        self.created_at = created_at or datetime.datetime.now()

    @staticmethod
    def from_record(record: Dict) -> 'RunRecord':
        return RunRecord(
            instance=record['instance'],
            cuts_enabled=record['cuts_enabled'],
            k_max=str(record['k_max']),
            pi_bar=record['pi_bar'],
            status=record['status'],
            cost=_finite(record['cost']),
            dual_bound=_finite(record['dual_bound']),
            nodes=record['nodes'],
            branch_nodes=record['branch_nodes'],
            cuts=record['cuts'],
            time_s=record['time_s'],
            gap_pct=_finite(record['gap_pct']),
        )


class CutRecord:
    def __init__(self, kind: str, k: int, line: str, run_id: Optional[int] = None,
                 created_at: Optional[datetime.datetime] = None, id=None):
        self.id = id
        self.run_id = run_id
        self.kind = kind
        self.k = k
        self.line = line
        self.created_at = created_at or datetime.datetime.now()

    @staticmethod
    def from_cut(cut: Cut, g: MultiGraph) -> 'CutRecord':
        return CutRecord(cut.kind, cut.k, format_inequality(cut, g))


class Repository(metaclass=abc.ABCMeta):

    @abc.abstractmethod
    async def save_run(self, run: RunRecord) -> int:
        """
        Save the outcome of a solve

        :param run: run to store
        :return: the run id
        """

    @abc.abstractmethod
    async def get_run(self, id: int) -> Optional[RunRecord]:
        """
        :param id: run id
        :return: the run if found
        """

    @abc.abstractmethod
    async def get_runs(self, instance: Optional[str] = None) -> List[RunRecord]:
        """
        :param instance: only the runs of this instance name when given
        :return: runs ordered by creation
        """

    @abc.abstractmethod
    async def save_cuts(self, run_id: int, cuts: Sequence[CutRecord]) -> int:
        """
        Save the cut pool of a run
        :return: the number of stored cuts
        """

    @abc.abstractmethod
    async def get_cuts(self, run_id: int) -> List[CutRecord]:
        """
        :return: the cut pool lines of a run in insertion order
        """


class SqlalchemyRepository(Repository):
    def __init__(self, database: Database):
        self.database = database

    @staticmethod
    def _run_from_row(row) -> RunRecord:
        return RunRecord(
            id=row['id'],
            instance=row['instance'],
            cuts_enabled=row['cuts_enabled'],
            k_max=row['k_max'],
            pi_bar=row['pi_bar'],
            status=row['status'],
            cost=row['cost'],
            dual_bound=row['dual_bound'],
            nodes=row['nodes'],
            branch_nodes=row['branch_nodes'],
            cuts=row['cuts'],
            time_s=row['time_s'],
            gap_pct=row['gap_pct'],
            created_at=row['created_at'],
        )

    async def save_run(self, run: RunRecord) -> int:
        run.id = await self.database.execute(insert(run_table).values(
            instance=run.instance,
            cuts_enabled=run.cuts_enabled,
            k_max=run.k_max,
            pi_bar=run.pi_bar,
            status=run.status,
            cost=_finite(run.cost),
            dual_bound=_finite(run.dual_bound),
            nodes=run.nodes,
            branch_nodes=run.branch_nodes,
            cuts=run.cuts,
            time_s=run.time_s,
            gap_pct=_finite(run.gap_pct),
            created_at=run.created_at,
        ))
        logger.debug(f'saved run {run.id} for {run.instance}')
        return run.id

    async def get_run(self, id: int) -> Optional[RunRecord]:
        row = await self.database.fetch_one(run_table.select().where(run_table.c.id == id))
        return SqlalchemyRepository._run_from_row(row) if row is not None else None

    async def get_runs(self, instance: Optional[str] = None) -> List[RunRecord]:
        stmt = run_table.select()
        if instance is not None:
            stmt = stmt.where(run_table.c.instance == instance)
        rows = await self.database.fetch_all(stmt.order_by(run_table.c.created_at, run_table.c.id))
        return [SqlalchemyRepository._run_from_row(row) for row in rows]

    async def save_cuts(self, run_id: int, cuts: Sequence[CutRecord]) -> int:
        async with self.database.transaction():
            for cut in cuts:
                cut.run_id = run_id
                cut.id = await self.database.execute(insert(cut_table).values(
                    run_id=run_id,
                    kind=cut.kind,
                    k=cut.k,
                    line=cut.line,
                    created_at=cut.created_at,
                ))
        return len(cuts)

    async def get_cuts(self, run_id: int) -> List[CutRecord]:
        stmt = select(cut_table).where(cut_table.c.run_id == run_id).order_by(cut_table.c.id)
        return [CutRecord(row['kind'], row['k'], row['line'], row['run_id'], row['created_at'], row['id'])
                for row in await self.database.fetch_all(stmt)]
