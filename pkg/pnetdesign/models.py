from sqlalchemy import Table, Column, Integer, MetaData, ForeignKey, DateTime, Text, Boolean, String, Float, SmallInteger

# Database table definitions.
metadata = MetaData()

run_table = Table(
    "run",
    metadata,
    Column("id", Integer, primary_key=True),
    Column("instance", String(128), index=True, nullable=False),
    Column("cuts_enabled", Boolean, nullable=False),
    Column("k_max", String(16), nullable=False),
    Column("pi_bar", Float, nullable=False),
    Column("status", String(16), nullable=False),
    Column("cost", Float, nullable=True),
    Column("dual_bound", Float, nullable=True),
    Column("nodes", Integer, nullable=False),
    Column("branch_nodes", Integer, nullable=False),
    Column("cuts", Integer, nullable=False),
    Column("time_s", Float, nullable=False),
    Column("gap_pct", Float, nullable=True),
    Column("created_at", DateTime, index=True, nullable=False),
)

cut_table = Table(
    "cut",
    metadata,
    Column("id", Integer, primary_key=True),
    Column("run_id", Integer, ForeignKey('run.id'), index=True, nullable=False),
    Column("kind", String(16), nullable=False),
    Column("k", SmallInteger, nullable=False),
    Column("line", Text, nullable=False),
    Column("created_at", DateTime, nullable=False),
)
