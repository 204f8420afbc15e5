"""JSON and CSV persistence for flows, measures and tables."""

import csv
import io
import json
import math
import os
import tempfile
from typing import Any, Dict, Iterable, List, Sequence

from ..errors import FlowFormatError
from .atomic_measure import AtomicMeasure
from .polygonal_flow import PolygonalFlow


def _reject_constant(name: str):
    raise FlowFormatError(f"Non-finite number {name} is not accepted")


def _finite(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FlowFormatError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise FlowFormatError(f"{where}: non-finite value")
    return value


def _point(value: Any, where: str):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise FlowFormatError(f"{where}: expected [x, y]")
    return (_finite(value[0], where), _finite(value[1], where))


def atomic_write_text(path: str, text: str) -> None:
    """Write a file through a temporary sibling and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def dumps(data: Any) -> str:
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def loads(text: str) -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise FlowFormatError(f"Malformed JSON: {e}") from None


def flow_to_dict(flow: PolygonalFlow) -> Dict[str, Any]:
    return {
        "nodes": [{"id": n.id, "x": [n.x[0], n.x[1]], "t": n.t} for n in flow.nodes()],
        "edges": [{"tail": e.tail, "head": e.head, "flux": e.flux}
                  for e in flow.edge_records()],
        "eps": flow.eps,
        "rooted": flow.rooted,
    }


def flow_from_dict(data: Dict[str, Any]) -> PolygonalFlow:
    if not isinstance(data, dict) or "nodes" not in data or "edges" not in data:
        raise FlowFormatError("Flow JSON needs 'nodes' and 'edges'")
    nodes = []
    for k, node in enumerate(data["nodes"]):
        where = f"nodes[{k}]"
        if not isinstance(node, dict) or not isinstance(node.get("id"), int):
            raise FlowFormatError(f"{where}: needs an integer 'id'")
        nodes.append((node["id"], _point(node.get("x"), where), _finite(node.get("t"), where)))
    edges = []
    for k, edge in enumerate(data["edges"]):
        where = f"edges[{k}]"
        if not isinstance(edge, dict):
            raise FlowFormatError(f"{where}: expected an object")
        tail, head = edge.get("tail"), edge.get("head")
        if not isinstance(tail, int) or not isinstance(head, int):
            raise FlowFormatError(f"{where}: tail and head must be integer ids")
        edges.append((tail, head, _finite(edge.get("flux"), where)))
    eps = _finite(data.get("eps", 0.0), "eps")
    rooted = data.get("rooted", True)
    if not isinstance(rooted, bool):
        raise FlowFormatError("'rooted' must be a boolean")
    try:
        return PolygonalFlow.from_records(nodes, edges, eps=eps, rooted=rooted)
    except ValueError as e:
        raise FlowFormatError(str(e)) from None


def measure_to_dict(m: AtomicMeasure) -> Dict[str, Any]:
    return {"atoms": [{"x": [p[0], p[1]], "w": w, "r": r} for p, w, r in m.as_tuples()]}


def measure_from_dict(data: Dict[str, Any]) -> AtomicMeasure:
    if not isinstance(data, dict) or not isinstance(data.get("atoms"), list):
        raise FlowFormatError("Measure JSON needs an 'atoms' list")
    atoms = []
    for k, atom in enumerate(data["atoms"]):
        where = f"atoms[{k}]"
        if not isinstance(atom, dict):
            raise FlowFormatError(f"{where}: expected an object")
        atoms.append((_point(atom.get("x"), where), _finite(atom.get("w"), where),
                      _finite(atom.get("r", 0.0), where)))
    try:
        return AtomicMeasure.from_atoms(atoms)
    except ValueError as e:
        raise FlowFormatError(str(e)) from None


def save_flow(flow: PolygonalFlow, path: str) -> None:
    atomic_write_text(path, dumps(flow_to_dict(flow)))


def load_flow(path: str) -> PolygonalFlow:
    with open(path, "r") as f:
        return flow_from_dict(loads(f.read()))


def save_measure(m: AtomicMeasure, path: str) -> None:
    atomic_write_text(path, dumps(measure_to_dict(m)))


def load_measure(path: str) -> AtomicMeasure:
    with open(path, "r") as f:
        return measure_from_dict(loads(f.read()))


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def save_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    atomic_write_text(path, rows_to_csv(header, rows))


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", newline="") as f:
        return list(csv.DictReader(f))
