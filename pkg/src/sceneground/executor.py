"""Recursive executor: combine category and relation features into scores.

Evaluation starts from the target category's feature and folds in one factor
per relation clause: unary clauses contribute their feature directly, binary
clauses contract the pair feature against the anchor's scores, ternary
clauses contract over both anchors. Each factor is softmax-normalized,
optionally negated as ``max(f) - f``, and multiplied into the running score.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from .dsl import EncoderDefinition, RelationFeature, eval_encoder
from .expression import SymbolicExpression, expression_to_dict, relation_arity
from .registry import EncoderRegistry
from .scene import (
    PairGeometry,
    Scene,
    SimilarityTable,
    exact_match_similarity,
    precompute_geometry,
)

__all__ = [
    "ExecutionError",
    "CategoryFeature",
    "FeatureCache",
    "MatchingScore",
    "stable_softmax",
    "compute_category_feature",
    "execute",
    "rank_candidates",
    "grounding_result",
    "condition_level_eval",
]

logger = logging.getLogger(__name__)

CATEGORY_SCALE = 100.0


class ExecutionError(RuntimeError):
    """Raised when an expression cannot be executed against a scene."""


def stable_softmax(values: np.ndarray) -> np.ndarray:
    z = np.asarray(values, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass(frozen=True)
class CategoryFeature:
    """Per-object category match scores; positive and summing to one."""

    category: str
    data: np.ndarray


def compute_category_feature(scene: Scene, sim_column: np.ndarray,
                             category: str = "") -> CategoryFeature:
    sim = np.asarray(sim_column, dtype=np.float64)
    if sim.shape != (len(scene),):
        raise ExecutionError(
            f"similarity column has shape {sim.shape}, scene has {len(scene)} objects"
        )
    data = stable_softmax(CATEGORY_SCALE * sim)
    data.setflags(write=False)
    return CategoryFeature(category=category, data=data)


class FeatureCache:
    """Per-scene memo of relation and category features.

    The cache snapshots the registry's active definitions at construction, so
    a grounding run sees one consistent encoder set. Feature computation is
    memoized under a lock (single-flight: concurrent requests for the same
    relation compute it once). Entries are only valid for the fingerprinted
    scene.
    """

    def __init__(
        self,
        scene: Scene,
        registry: EncoderRegistry | dict[str, EncoderDefinition],
        similarities: SimilarityTable | None = None,
    ) -> None:
        self.scene = scene
        self.geometry: PairGeometry = precompute_geometry(scene)
        self.fingerprint = scene.fingerprint()
        self._definitions = registry.snapshot() if isinstance(registry, EncoderRegistry) else dict(registry)
        self._similarities = similarities if similarities is not None else scene.similarities
        self._relations: dict[str, RelationFeature] = {}
        self._categories: dict[str, CategoryFeature] = {}
        self._lock = threading.Lock()

    def relation_feature(self, relation: str) -> RelationFeature:
        with self._lock:
            if relation not in self._relations:
                try:
                    defn = self._definitions[relation]
                except KeyError:
                    raise ExecutionError(f"no active encoder for relation {relation!r}") from None
                self._relations[relation] = eval_encoder(defn, self.scene, self.geometry)
            return self._relations[relation]

    def category_feature(self, category: str) -> CategoryFeature:
        with self._lock:
            if category not in self._categories:
                self._categories[category] = self._compute_category(category)
            return self._categories[category]

    def _compute_category(self, category: str) -> CategoryFeature:
        column = None
        if self._similarities is not None:
            column = self._similarities.column(category)
        if column is None:
            column = exact_match_similarity(self.scene, [category]).values[:, 0]
        if not np.any(column):
            logger.warning(
                "category %r matches nothing in scene %s; scores fall back to uniform",
                category, self.scene.scene_id,
            )
        return compute_category_feature(self.scene, column, category)


@dataclass(frozen=True)
class MatchingScore:
    """Final per-object scores, aligned with scene object positions."""

    data: np.ndarray
    object_ids: tuple[int, ...]

    def order(self) -> np.ndarray:
        """Positions sorted by descending score; ties keep scene order."""
        return np.argsort(-self.data, kind="stable")

    def argmax_id(self) -> int:
        return self.object_ids[int(self.order()[0])]


def _run(expr: SymbolicExpression, cache: FeatureCache) -> np.ndarray:
    score = cache.category_feature(expr.category).data.copy()
    for clause in expr.relations:
        feature = cache.relation_feature(clause.relation).data
        arity = relation_arity(clause.relation)
        if arity == 1:
            f = feature.copy()
        elif arity == 2:
            anchor = _run(clause.anchors[0], cache)
            f = feature @ anchor
        else:
            a1 = _run(clause.anchors[0], cache)
            a2 = _run(clause.anchors[1], cache)
            f = np.einsum("ijk,j,k->i", feature, a1, a2)
        f = stable_softmax(f)
        if clause.negative:
            f = f.max() - f
        score = score * f
    return score


def execute(expr: SymbolicExpression, scene: Scene, cache: FeatureCache) -> MatchingScore:
    """Evaluate an expression to per-object matching scores."""
    if cache.fingerprint != scene.fingerprint():
        raise ExecutionError(
            f"feature cache was built for a different scene "
            f"(cache {cache.fingerprint[:12]}, scene {scene.fingerprint()[:12]})"
        )
    data = _run(expr, cache)
    data.setflags(write=False)
    return MatchingScore(data=data, object_ids=tuple(scene.ids))


def rank_candidates(score: MatchingScore, top_k: int, threshold: float) -> list[int]:
    """Object ids of the strongest candidates.

    Takes the ``top_k`` highest-scoring objects, then keeps those whose score
    is at least ``threshold * max_score``; the argmax always survives.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    order = score.order()[:top_k]
    cutoff = threshold * float(score.data[order[0]])
    kept = [int(pos) for pos in order if score.data[pos] >= cutoff]
    if not kept:
        kept = [int(order[0])]
    return [score.object_ids[pos] for pos in kept]


def grounding_result(
    scene: Scene,
    expr: SymbolicExpression,
    score: MatchingScore,
    top_k: int = 5,
    threshold: float = 0.9,
) -> dict:
    """Grounding result in the wire format (scores listed in descending order)."""
    order = score.order()
    return {
        "scene_id": scene.scene_id,
        "expression": expression_to_dict(expr),
        "scores": [
            {"id": score.object_ids[int(pos)], "score": float(score.data[pos])}
            for pos in order
        ],
        "candidates": rank_candidates(score, top_k, threshold),
        "argmax": score.argmax_id(),
    }


def condition_level_eval(
    entries: list[tuple[str, SymbolicExpression, int]],
    scenes: dict[str, Scene],
    registry: EncoderRegistry | dict[str, EncoderDefinition],
) -> tuple[float, float]:
    """Macro-averaged precision/recall of single-condition grounding.

    Each root-level clause of every expression is executed in isolation; its
    argmax is a prediction for that expression's ground-truth object.
    Predictions and ground truths are grouped per (scene, target category),
    and set precision/recall are macro-averaged over groups. An empty
    condition set scores (1.0, 1.0) by convention.
    """
    caches: dict[str, FeatureCache] = {}
    predicted: dict[tuple[str, str], set[int]] = {}
    truth: dict[tuple[str, str], set[int]] = {}

    for scene_id, expr, ground_truth in entries:
        try:
            scene = scenes[scene_id]
        except KeyError:
            raise ExecutionError(f"unknown scene {scene_id!r}") from None
        if ground_truth not in scene.index_of:
            raise ExecutionError(f"unknown ground-truth id {ground_truth} in scene {scene_id!r}")
        if scene_id not in caches:
            caches[scene_id] = FeatureCache(scene, registry)
        cache = caches[scene_id]
        group = (scene_id, expr.category.casefold())
        for clause in expr.relations:
            single = SymbolicExpression(category=expr.category, relations=(clause,))
            result = execute(single, scene, cache)
            predicted.setdefault(group, set()).add(result.argmax_id())
            truth.setdefault(group, set()).add(ground_truth)

    if not predicted:
        logger.warning("condition-level evaluation saw no conditions; scoring (1.0, 1.0)")
        return 1.0, 1.0

    precisions = []
    recalls = []
    for group, preds in predicted.items():
        actual = truth[group]
        hit = len(preds & actual)
        precisions.append(hit / len(preds))
        recalls.append(hit / len(actual))
    return float(np.mean(precisions)), float(np.mean(recalls))
