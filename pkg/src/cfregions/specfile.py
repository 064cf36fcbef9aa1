"""YAML channel-spec files with line/column diagnostics."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .achievability import ComputeTask, TaskError
from .channel import ChannelSpec, SpecError
from .gflin import GfMatrix

REQUIRED = ("q", "K", "pmf_u", "x_alphabet_sizes", "x_map", "y_alphabet_size", "channel", "A")
RECEIVER_KEYS = ("y_alphabet_size", "channel", "A")


class SpecFileError(ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None, col: int | None = None):
        self.path, self.line, self.col = path, line, col
        where = path or "<spec>"
        if line is not None:
            where += f":{line}:{col}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True, eq=False)
class LoadedSpec:
    """Parsed spec file: one task per receiver (the top-level one first)."""

    tasks: tuple[ComputeTask, ...]
    path: str | None = None

    @property
    def task(self) -> ComputeTask:
        return self.tasks[0]

    @property
    def spec(self) -> ChannelSpec:
        return self.tasks[0].spec

    @property
    def K(self) -> int:
        return self.spec.K


class _Doc:
    def __init__(self, node: yaml.MappingNode, data: dict, path: str | None):
        self.node, self.data, self.path = node, data, path
        self.value_nodes = {}
        for k, v in node.value:
            self.value_nodes[getattr(k, "value", None)] = v

    def fail(self, key: str | None, message: str):
        node = self.value_nodes.get(key, self.node) if key else self.node
        mark = node.start_mark
        raise SpecFileError(message if key is None else f"{key}: {message}", self.path, mark.line + 1, mark.column + 1)

    def get(self, key: str):
        if key not in self.data:
            self.fail(None, f"missing required key '{key}'")
        return self.data[key]


def _compose(text: str, path: str | None) -> tuple[yaml.Node, object]:
    loader = yaml.SafeLoader(io.StringIO(text))
    try:
        node = loader.get_single_node()
        data = loader.construct_document(node) if node is not None else None
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line, col = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise SpecFileError(f"malformed YAML: {exc.problem}", path, line, col) from None
    finally:
        loader.dispose()
    return node, data


def _int(doc: _Doc, key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        doc.fail(key, f"expected an integer, got {value!r}")
    return value


def _array(doc: _Doc, key: str, value, dtype=float) -> np.ndarray:
    try:
        arr = np.array(value, dtype=dtype)
    except (TypeError, ValueError):
        doc.fail(key, "expected a rectangular array of numbers")
    if arr.dtype == object:
        doc.fail(key, "expected a rectangular array of numbers")
    if dtype is int and not np.array_equal(np.array(value, dtype=float), arr):
        doc.fail(key, "expected integer entries")
    return arr


def _receiver(doc: _Doc, q: int, k: int, x_sizes: tuple[int, ...], block: dict, prefix: str):
    ny = _int(doc, prefix + "y_alphabet_size", block["y_alphabet_size"])
    ch = _array(doc, prefix + "channel", block["channel"])
    if ch.shape != x_sizes + (ny,):
        doc.fail(prefix + "channel", f"expected nested shape {x_sizes + (ny,)}, got {ch.shape}")
    a = _array(doc, prefix + "A", block["A"], int)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != k:
        doc.fail(prefix + "A", f"expected an L x {k} integer matrix, got shape {a.shape}")
    return ch, GfMatrix(a, q)


def parse_spec(text: str, path: str | None = None) -> LoadedSpec:
    node, data = _compose(text, path)
    if not isinstance(node, yaml.MappingNode) or not isinstance(data, dict):
        raise SpecFileError("top level must be a mapping", path, 1, 1)
    doc = _Doc(node, data, path)
    for key in REQUIRED:
        doc.get(key)
    q = _int(doc, "q", data["q"])
    k = _int(doc, "K", data["K"])
    if k < 1:
        doc.fail("K", "must be at least 1")
    pmf = _array(doc, "pmf_u", data["pmf_u"])
    if pmf.shape != (k, q):
        doc.fail("pmf_u", f"expected {k} arrays of {q} probabilities, got shape {pmf.shape}")
    xs = _array(doc, "x_alphabet_sizes", data["x_alphabet_sizes"], int)
    if xs.shape != (k,) or np.any(xs < 1):
        doc.fail("x_alphabet_sizes", f"expected {k} positive integers")
    x_sizes = tuple(int(v) for v in xs)
    smap = _array(doc, "x_map", data["x_map"], int)
    if smap.shape != (k, q):
        doc.fail("x_map", f"expected {k} arrays of {q} integers, got shape {smap.shape}")
    ch, a = _receiver(doc, q, k, x_sizes, data, "")
    blocks = [(ch, a)]
    receivers = data.get("receivers") or []
    if not isinstance(receivers, list):
        doc.fail("receivers", "expected a list")
    for i, blk in enumerate(receivers):
        if not isinstance(blk, dict):
            doc.fail("receivers", f"entry {i + 1} must be a mapping")
        for key in RECEIVER_KEYS:
            if key not in blk:
                doc.fail("receivers", f"entry {i + 1} is missing '{key}'")
        blocks.append(_receiver(doc, q, k, x_sizes, blk, "receivers"))
    tasks = []
    for ch, a in blocks:
        try:
            spec = ChannelSpec(q, pmf, smap, ch)
            tasks.append(ComputeTask(spec, a))
        except SpecError as exc:
            doc.fail(exc.key if exc.key in doc.value_nodes else None, str(exc))
        except TaskError as exc:
            doc.fail("A", str(exc))
    return LoadedSpec(tuple(tasks), path)


def load_spec(path: str | Path) -> LoadedSpec:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SpecFileError(f"cannot read spec file: {exc.strerror}", str(p)) from None
    return parse_spec(text, str(p))


def dump_spec(spec: ChannelSpec, a: GfMatrix, comment: str | None = None) -> str:
    """Serialise a single-receiver spec; inverse of :func:`parse_spec`."""
    doc = {
        "q": spec.q,
        "K": spec.K,
        "pmf_u": spec.pmf_u.tolist(),
        "x_alphabet_sizes": list(spec.x_sizes),
        "x_map": spec.symbol_map.tolist(),
        "y_alphabet_size": spec.y_size,
        "channel": spec.channel.tolist(),
        "A": a.tolist(),
    }
    body = yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
    return (f"# {comment}\n" if comment else "") + body
