"""init

Revision ID: 3b9e1c27d4a0
Revises: 
Create Date: 2026-10-17 09:12:41.208113

"""
from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision = '3b9e1c27d4a0'
down_revision = None
branch_labels = None
depends_on = None


def upgrade():
    # ### commands auto generated by Alembic - please adjust! ###
    op.create_table('run',
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('instance', sa.String(length=128), nullable=False),
    sa.Column('cuts_enabled', sa.Boolean(), nullable=False),
    sa.Column('k_max', sa.String(length=16), nullable=False),
    sa.Column('pi_bar', sa.Float(), nullable=False),
    sa.Column('status', sa.String(length=16), nullable=False),
    sa.Column('cost', sa.Float(), nullable=True),
    sa.Column('dual_bound', sa.Float(), nullable=True),
    sa.Column('nodes', sa.Integer(), nullable=False),
    sa.Column('branch_nodes', sa.Integer(), nullable=False),
    sa.Column('cuts', sa.Integer(), nullable=False),
    sa.Column('time_s', sa.Float(), nullable=False),
    sa.Column('gap_pct', sa.Float(), nullable=True),
    sa.Column('created_at', sa.DateTime(), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_run_instance'), 'run', ['instance'], unique=False)
    op.create_index(op.f('ix_run_created_at'), 'run', ['created_at'], unique=False)
    op.create_table('cut',
    sa.Column('id', sa.Integer(), nullable=False),
    sa.Column('run_id', sa.Integer(), nullable=False),
    sa.Column('kind', sa.String(length=16), nullable=False),
    sa.Column('k', sa.SmallInteger(), nullable=False),
    sa.Column('line', sa.Text(), nullable=False),
    sa.Column('created_at', sa.DateTime(), nullable=False),
    sa.ForeignKeyConstraint(['run_id'], ['run.id'], ),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_cut_run_id'), 'cut', ['run_id'], unique=False)
    # ### end Alembic commands ###


def downgrade():
    # ### commands auto generated by Alembic - please adjust! ###
    op.drop_index(op.f('ix_cut_run_id'), table_name='cut')
    op.drop_table('cut')
    op.drop_index(op.f('ix_run_created_at'), table_name='run')
    op.drop_index(op.f('ix_run_instance'), table_name='run')
    op.drop_table('run')
    # ### end Alembic commands ###
