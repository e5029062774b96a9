"""Executing an expression: category feature times per-clause factors.

The score starts as a softmax over category similarity, then each clause
multiplies in a softmax-normalized relation factor (contracted against the
anchor's own scores for binary/ternary relations). Negated clauses invert
their factor as max(f) - f before the product.
"""

import numpy as np

from sceneground import EncoderRegistry, FeatureCache, execute, parse_expression, rank_candidates
from sceneground.expression import RelationClause, SymbolicExpression
from sceneground.scene import scene_from_dict

scene = scene_from_dict({"scene_id": "demo", "objects": [
    {"id": 0, "label": "chair", "bbox": [0.0, 0, 0, 1, 1, 1]},
    {"id": 1, "label": "chair", "bbox": [10.0, 0, 0, 1, 1, 1]},
    {"id": 2, "label": "table", "bbox": [1.0, 0, 0, 1, 1, 1]},
]})
cache = FeatureCache(scene, EncoderRegistry())

expr = parse_expression(
    '{"category": "chair", "relations":'
    ' [{"relation_name": "near", "objects": [{"category": "table"}]}]}')

print("scene: chair#0 at x=0, chair#1 at x=10, table#2 at x=1")
print("query: the chair near the table\n")

category = cache.category_feature("chair").data
print(f"category factor : {np.round(category, 4)}")
score = execute(expr, scene, cache)
print(f"final scores    : {np.round(score.data, 4)}")
print(f"argmax          : object {score.argmax_id()}  (the chair beside the table)")
print(f"candidates      : {rank_candidates(score, top_k=5, threshold=0.9)}")

negated = SymbolicExpression(category="chair", relations=(
    RelationClause(relation="near",
                   anchors=(SymbolicExpression(category="table"),),
                   negative=True),
))
flipped = execute(negated, scene, cache)
print(f"\nnegated clause flips the winner: argmax = object {flipped.argmax_id()}")
