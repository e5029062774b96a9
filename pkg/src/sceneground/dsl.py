"""Expression-tree DSL for spatial relation encoders.

An encoder candidate is a JSON tree over a small numeric node set; evaluating
it against a scene's geometry yields a relation feature of rank 1, 2 or 3.
Every operation is total: division is guarded away from zero, ``exp`` is
clipped, ``sqrt`` floors its argument at zero, and the finished feature is
sanitized to finite nonnegative values with repeated-index entries zeroed.

Node wire format (one definition per file):
    {"relation": "above", "metadata": "...", "body": {"op": "mul", "args": [...]}}
Leaves: {"const": 0.5} | {"get": "center", "obj": "i", "axis": "z"} |
        {"agg": "mean_diagonal"} | {"agg": "hull_min", "axis": "x"}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expression import relation_arity
from .scene import PairGeometry, Scene

__all__ = [
    "DefinitionError",
    "EncoderDefinition",
    "RelationFeature",
    "OPS",
    "guarded_div",
    "guarded_exp",
    "guarded_sqrt",
    "finalize_feature",
    "validate_definition",
    "eval_encoder",
    "const",
    "get",
    "agg",
    "op",
    "definition_from_dict",
    "definition_to_dict",
    "load_definition",
    "save_definition",
]

DIV_EPS = 1e-6
EXP_CLIP = 50.0
FEATURE_CAP = 1e30
MAX_TREE_DEPTH = 64
MAX_TREE_NODES = 512

# operator name -> argument count
OPS = {
    "add": 2, "sub": 2, "mul": 2, "div": 2, "min": 2, "max": 2,
    "abs": 1, "neg": 1, "exp": 1, "sqrt": 1, "relu": 1, "clamp01": 1,
    # 2D dot/cross sugar over (ax, ay, bx, by); expands to add/sub/mul
    "dot2": 4, "cross2": 4,
}

# swappable commutative pairs used by the mutation operator
COMMUTATIVE_SWAPS = {"add": "mul", "mul": "add", "min": "max", "max": "min"}

_GET_FIELDS = {"center": True, "size": True, "bottom": False, "top": False, "volume": False}
_AGG_FIELDS = {
    "mean_diagonal": None,
    "floor_z": None,
    "hull_min": ("x", "y"),
    "hull_max": ("x", "y"),
    "centroid": ("x", "y"),
    "volume_min": None,
    "volume_max": None,
    "center_min": ("x", "y", "z"),
    "center_max": ("x", "y", "z"),
}
_AXES = {"x": 0, "y": 1, "z": 2}
_OBJS_FOR_ARITY = {1: ("i",), 2: ("i", "j"), 3: ("i", "j", "k")}


class DefinitionError(ValueError):
    """Raised when an encoder definition fails static validation."""


def guarded_div(a, b):
    """a / b with the denominator pushed at least DIV_EPS away from zero."""
    b = np.asarray(b, dtype=np.float64)
    return a / (b + DIV_EPS * np.where(b >= 0.0, 1.0, -1.0))


def guarded_exp(a):
    return np.exp(np.minimum(a, EXP_CLIP))


def guarded_sqrt(a):
    return np.sqrt(np.maximum(a, 0.0))


def const(value: float) -> dict:
    return {"const": float(value)}


def get(field: str, obj: str, axis: str | None = None) -> dict:
    node = {"get": field, "obj": obj}
    if axis is not None:
        node["axis"] = axis
    return node


def agg(name: str, axis: str | None = None) -> dict:
    node = {"agg": name}
    if axis is not None:
        node["axis"] = axis
    return node


def op(name: str, *args: dict) -> dict:
    return {"op": name, "args": list(args)}


@dataclass(frozen=True)
class EncoderDefinition:
    """A relation encoder candidate: relation name, DSL body, provenance tag."""

    relation: str
    body: dict
    metadata: str = ""

    def to_dict(self) -> dict:
        return {"relation": self.relation, "metadata": self.metadata, "body": self.body}

    def canonical_json(self) -> str:
        return json.dumps({"relation": self.relation, "body": self.body}, sort_keys=True)

    def digest(self) -> str:
        """Content hash over relation + body (metadata excluded)."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def definition_to_dict(defn: EncoderDefinition) -> dict:
    return defn.to_dict()


def definition_from_dict(raw: object) -> EncoderDefinition:
    if not isinstance(raw, dict):
        raise DefinitionError("definition must be a JSON object")
    relation = raw.get("relation")
    if not isinstance(relation, str):
        raise DefinitionError("definition missing relation name")
    body = raw.get("body")
    if not isinstance(body, dict):
        raise DefinitionError("definition missing body tree")
    metadata = raw.get("metadata", "")
    if not isinstance(metadata, str):
        raise DefinitionError("metadata must be a string")
    return EncoderDefinition(relation=relation, body=body, metadata=metadata)


def load_definition(path: str | Path) -> EncoderDefinition:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    defn = definition_from_dict(raw)
    validate_definition(defn)
    return defn


def save_definition(defn: EncoderDefinition, path: str | Path) -> None:
    Path(path).write_text(json.dumps(defn.to_dict(), indent=2) + "\n", encoding="utf-8")


def _validate_node(node: object, allowed_objs: tuple[str, ...], depth: int, path: str) -> int:
    """Return node count of the subtree; raise DefinitionError at the first fault."""
    if depth > MAX_TREE_DEPTH:
        raise DefinitionError(f"{path}: tree depth exceeds {MAX_TREE_DEPTH}")
    if not isinstance(node, dict):
        raise DefinitionError(f"{path}: node must be an object, got {type(node).__name__}")
    if "const" in node:
        value = node["const"]
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not np.isfinite(value):
            raise DefinitionError(f"{path}: const must be a finite number")
        return 1
    if "get" in node:
        field = node["get"]
        if field not in _GET_FIELDS:
            raise DefinitionError(f"{path}: unknown accessor {field!r}")
        obj = node.get("obj")
        if obj not in allowed_objs:
            raise DefinitionError(
                f"{path}: accessor object {obj!r} not allowed here (allowed: {allowed_objs})"
            )
        needs_axis = _GET_FIELDS[field]
        axis = node.get("axis")
        if needs_axis and axis not in _AXES:
            raise DefinitionError(f"{path}: accessor {field!r} needs axis x|y|z")
        if not needs_axis and axis is not None:
            raise DefinitionError(f"{path}: accessor {field!r} takes no axis")
        return 1
    if "agg" in node:
        name = node["agg"]
        if name not in _AGG_FIELDS:
            raise DefinitionError(f"{path}: unknown aggregate {name!r}")
        axes = _AGG_FIELDS[name]
        axis = node.get("axis")
        if axes is None and axis is not None:
            raise DefinitionError(f"{path}: aggregate {name!r} takes no axis")
        if axes is not None and axis not in axes:
            raise DefinitionError(f"{path}: aggregate {name!r} needs axis in {axes}")
        return 1
    if "op" in node:
        name = node["op"]
        if name not in OPS:
            raise DefinitionError(f"{path}: unknown op {name!r}")
        args = node.get("args")
        if not isinstance(args, list) or len(args) != OPS[name]:
            raise DefinitionError(f"{path}: op {name!r} takes {OPS[name]} args")
        count = 1
        for k, child in enumerate(args):
            count += _validate_node(child, allowed_objs, depth + 1, f"{path}.args[{k}]")
        return count
    raise DefinitionError(f"{path}: node must have one of const/get/agg/op")


def validate_definition(defn: EncoderDefinition) -> None:
    """Static check: well-formed tree, arity-consistent accessors, size caps."""
    arity = relation_arity(defn.relation)
    allowed = _OBJS_FOR_ARITY[arity]
    count = _validate_node(defn.body, allowed, 1, "body")
    if count > MAX_TREE_NODES:
        raise DefinitionError(f"body: tree has {count} nodes, cap is {MAX_TREE_NODES}")


def _get_values(field: str, geom: PairGeometry, axis: str | None) -> np.ndarray:
    if field == "center":
        return geom.centers[:, _AXES[axis]]
    if field == "size":
        return geom.sizes[:, _AXES[axis]]
    if field == "bottom":
        return geom.centers[:, 2] - geom.sizes[:, 2] / 2
    if field == "top":
        return geom.centers[:, 2] + geom.sizes[:, 2] / 2
    return geom.volumes  # volume


def _agg_value(name: str, geom: PairGeometry, axis: str | None) -> float:
    if name == "mean_diagonal":
        return geom.mean_diagonal
    if name == "floor_z":
        return geom.floor_z
    if name == "hull_min":
        return float(geom.hull_min[_AXES[axis]])
    if name == "hull_max":
        return float(geom.hull_max[_AXES[axis]])
    if name == "centroid":
        return float(geom.centroid_xy[_AXES[axis]])
    if name == "volume_min":
        return float(geom.volumes.min())
    if name == "volume_max":
        return float(geom.volumes.max())
    if name == "center_min":
        return float(geom.centers[:, _AXES[axis]].min())
    return float(geom.centers[:, _AXES[axis]].max())  # center_max


def _broadcast_obj(values: np.ndarray, which: str, rank: int, i_slice: slice | None):
    if rank == 1:
        return values if i_slice is None else values[i_slice]
    if rank == 2:
        return values[:, None] if which == "i" else values[None, :]
    if which == "i":
        sliced = values if i_slice is None else values[i_slice]
        return sliced[:, None, None]
    if which == "j":
        return values[None, :, None]
    return values[None, None, :]


def _eval_node(node: dict, geom: PairGeometry, rank: int, i_slice: slice | None):
    if "const" in node:
        return float(node["const"])
    if "get" in node:
        values = _get_values(node["get"], geom, node.get("axis"))
        return _broadcast_obj(values, node["obj"], rank, i_slice)
    if "agg" in node:
        return _agg_value(node["agg"], geom, node.get("axis"))
    name = node["op"]
    args = [_eval_node(child, geom, rank, i_slice) for child in node["args"]]
    if name == "add":
        return args[0] + args[1]
    if name == "sub":
        return args[0] - args[1]
    if name == "mul":
        return args[0] * args[1]
    if name == "div":
        return guarded_div(args[0], args[1])
    if name == "min":
        return np.minimum(args[0], args[1])
    if name == "max":
        return np.maximum(args[0], args[1])
    if name == "abs":
        return np.abs(args[0])
    if name == "neg":
        return -args[0]
    if name == "exp":
        return guarded_exp(args[0])
    if name == "sqrt":
        return guarded_sqrt(args[0])
    if name == "relu":
        return np.maximum(args[0], 0.0)
    if name == "clamp01":
        return np.clip(args[0], 0.0, 1.0)
    if name == "dot2":
        return args[0] * args[2] + args[1] * args[3]
    # cross2
    return args[0] * args[3] - args[1] * args[2]


def finalize_feature(raw, rank: int, n: int) -> np.ndarray:
    """Sanitize to finite nonnegative values; zero every repeated-index entry."""
    shape = (n,) * rank
    data = np.asarray(raw, dtype=np.float64)
    data = np.ascontiguousarray(np.broadcast_to(data, shape)).copy()
    data = np.nan_to_num(data, nan=0.0, posinf=FEATURE_CAP, neginf=0.0)
    np.maximum(data, 0.0, out=data)
    if rank >= 2:
        idx = np.arange(n)
        if rank == 2:
            data[idx, idx] = 0.0
        else:
            data[idx, idx, :] = 0.0
            data[idx, :, idx] = 0.0
            data[:, idx, idx] = 0.0
    data.setflags(write=False)
    return data


@dataclass(frozen=True)
class RelationFeature:
    """Dense nonnegative feature of rank 1 (N), 2 (N,N) or 3 (N,N,N)."""

    relation: str
    rank: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != self.rank:
            raise ValueError(f"feature rank {self.rank} but data has ndim {self.data.ndim}")


def eval_encoder(
    defn: EncoderDefinition,
    scene: Scene,
    geom: PairGeometry,
    chunk_elems: int = 1 << 18,
) -> RelationFeature:
    """Evaluate a definition over a scene; pure and deterministic.

    Rank-3 bodies are evaluated in chunks along the first index so the
    intermediate working set stays bounded even when N is large.
    """
    n = len(scene)
    if geom.centers.shape[0] != n:
        raise ValueError("scene and geometry disagree on object count")
    rank = relation_arity(defn.relation)
    if rank < 3:
        raw = _eval_node(defn.body, geom, rank, None)
        data = finalize_feature(raw, rank, n)
    else:
        out = np.empty((n, n, n), dtype=np.float64)
        step = max(1, chunk_elems // max(1, n * n))
        for start in range(0, n, step):
            sl = slice(start, min(start + step, n))
            out[sl] = _eval_node(defn.body, geom, rank, sl)
        data = finalize_feature(out, rank, n)
    return RelationFeature(relation=defn.relation, rank=rank, data=data)
