import json
from numbers import Real
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from pnetdesign.flow import InvalidBuildVectorException, check_build_vector
from pnetdesign.network import Instance, MultiGraph, Network, derived_pi_bar, frozen_array, validate_instance

FORMAT_VERSION = 1
ENTRY, EXIT = 'entry', 'exit'
ARC_METADATA = ('diameter', 'length')


class InstanceFormatException(Exception): pass


def _number(value: Any, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise InstanceFormatException(f'{path}: expected a number, got {value!r}')
    if positive and not value > 0:
        raise InstanceFormatException(f'{path}: must be positive, got {value!r}')
    return float(value)


def _field(obj: Mapping, key: str, path: str) -> Any:
    if not isinstance(obj, Mapping):
        raise InstanceFormatException(f'{path}: expected an object')
    if key not in obj:
        raise InstanceFormatException(f'{path}.{key}: missing')
    return obj[key]


def _list(obj: Mapping, key: str, path: str) -> List:
    value = _field(obj, key, path)
    if not isinstance(value, list):
        raise InstanceFormatException(f'{path}.{key}: expected a list')
    return value


def instance_from_document(doc: Mapping) -> Instance:
    version = _field(doc, 'version', '$')
    if version != FORMAT_VERSION:
        raise InstanceFormatException(f'$.version: unsupported version {version!r}, expected {FORMAT_VERSION}')

    nodes = _list(doc, 'nodes', '$')
    names, balance, lower, upper = [], [], [], []
    t_plus, t_minus = set(), set()
    for i, node in enumerate(nodes):
        path = f'$.nodes[{i}]'
        name = _field(node, 'id', path)
        if not isinstance(name, str):
            raise InstanceFormatException(f'{path}.id: expected a string')
        names.append(name)
        balance.append(_number(node.get('balance', 0.0), f'{path}.balance'))
        terminal = node.get('terminal')
        if terminal == ENTRY:
            t_plus.add(i)
        elif terminal == EXIT:
            t_minus.add(i)
        elif terminal is not None:
            raise InstanceFormatException(f'{path}.terminal: expected "{ENTRY}" or "{EXIT}", got {terminal!r}')
        if ('pi_min' in node) != ('pi_max' in node):
            raise InstanceFormatException(f'{path}: pi_min and pi_max go together')
        if 'pi_min' in node:
            lower.append(_number(node['pi_min'], f'{path}.pi_min'))
            upper.append(_number(node['pi_max'], f'{path}.pi_max'))
    if lower and len(lower) != len(nodes):
        raise InstanceFormatException('$.nodes: individual potential bounds must be given for every node or none')

    position = {name: i for i, name in enumerate(names)}
    arcs = _list(doc, 'arcs', '$')
    pairs, arc_names, beta, cost, attributes = [], [], [], [], []
    for i, arc in enumerate(arcs):
        path = f'$.arcs[{i}]'
        arc_name = _field(arc, 'id', path)
        if not isinstance(arc_name, str):
            raise InstanceFormatException(f'{path}.id: expected a string')
        ends = []
        for end in ('tail', 'head'):
            node_name = _field(arc, end, path)
            if node_name not in position:
                raise InstanceFormatException(f'{path}.{end}: unknown node {node_name!r}')
            ends.append(position[node_name])
        pairs.append(tuple(ends))
        arc_names.append(arc_name)
        beta.append(_number(_field(arc, 'beta', path), f'{path}.beta', positive=True))
        cost.append(_number(_field(arc, 'cost', path), f'{path}.cost', positive=True))
        attributes.append({key: _number(arc[key], f'{path}.{key}') for key in ARC_METADATA if key in arc})

    degree_r = _number(_field(doc, 'degree_r', '$'), '$.degree_r', positive=True)
    if 'pi_bar' in doc:
        pi_bar = _number(doc['pi_bar'], '$.pi_bar', positive=True)
    elif lower:
        pi_bar = derived_pi_bar(np.array(lower), np.array(upper))
    else:
        raise InstanceFormatException('$.pi_bar: missing and no individual bounds to derive it from')

    graph = MultiGraph.from_pairs(len(names), pairs, names, arc_names)
    inst = Instance(
        Network(graph, frozen_array(beta), degree_r),
        frozenset(t_plus),
        frozenset(t_minus),
        frozen_array(balance),
        pi_bar,
        frozen_array(cost),
        name=str(doc.get('name', 'instance')),
        pi_lower=frozen_array(lower) if lower else None,
        pi_upper=frozen_array(upper) if upper else None,
        arc_attributes=tuple(attributes),
    )
    report = validate_instance(inst)
    if not report.ok:
        raise InstanceFormatException('; '.join(report.violations))
    return inst


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as error:
        raise InstanceFormatException(f'line {error.lineno} column {error.colno}: {error.msg}')
    return instance_from_document(doc)


def instance_to_document(inst: Instance) -> Dict:
    g = inst.graph
    nodes = []
    for v, name in enumerate(g.node_names):
        node: Dict[str, Any] = {'id': name}
        if v in inst.t_plus:
            node['terminal'] = ENTRY
        elif v in inst.t_minus:
            node['terminal'] = EXIT
        if v in inst.terminals:
            node['balance'] = float(inst.balance[v])
        if inst.has_individual_bounds:
            node['pi_min'] = float(inst.pi_lower[v])
            node['pi_max'] = float(inst.pi_upper[v])
        nodes.append(node)
    arcs = []
    for a, arc in enumerate(g.arcs):
        entry: Dict[str, Any] = {
            'id': g.arc_names[a],
            'tail': g.node_names[arc.tail],
            'head': g.node_names[arc.head],
            'beta': float(inst.network.beta[a]),
            'cost': float(inst.cost[a]),
        }
        if inst.arc_attributes:
            entry.update({key: float(inst.arc_attributes[a][key]) for key in ARC_METADATA if key in inst.arc_attributes[a]})
        arcs.append(entry)
    return {
        'version': FORMAT_VERSION,
        'name': inst.name,
        'degree_r': float(inst.degree_r),
        'pi_bar': float(inst.pi_bar),
        'nodes': nodes,
        'arcs': arcs,
    }


def serialize_instance(inst: Instance) -> str:
    return json.dumps(instance_to_document(inst), indent=2, ensure_ascii=False) + '\n'


def read_build_vector(text: str, inst: Instance) -> np.ndarray:
    """'arc value' lines, '#' starts a comment, unlisted arcs are 0"""
    g = inst.graph
    x = np.zeros(g.n_arcs)
    seen = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise InvalidBuildVectorException(f'line {number}: expected "arc value", got {raw!r}')
        name, value = fields
        if name not in g.arc_names:
            raise InvalidBuildVectorException(f'line {number}: unknown arc {name!r}')
        if name in seen:
            raise InvalidBuildVectorException(f'line {number}: arc {name!r} given twice')
        seen.add(name)
        try:
            x[g.arc_index(name)] = float(value)
        except ValueError:
            raise InvalidBuildVectorException(f'line {number}: {value!r} is not a number')
    return check_build_vector(g, x)


def format_build_vector(x: Sequence[float], inst: Instance, comment: Optional[str] = None) -> str:
    g = inst.graph
    values = check_build_vector(g, x)
    lines = [f'# {comment}'] if comment else []
    for name, value in zip(g.arc_names, values):
        lines.append(f'{name} {int(value) if value in (0.0, 1.0) else repr(float(value))}')
    return '\n'.join(lines) + '\n'
