"""The symbolic expression language: category plus relation clauses.

An utterance like "the chair near the table" becomes a small JSON tree.
The parser accepts the loose spellings language models produce (both
"anchors" and "objects" for the anchor list, spaces or underscores in
relation names) and canonicalizes everything.
"""

from sceneground import collect_conditions, parse_expression, serialize_expression

RAW = """
{"category": "chair",
 "relations": [
   {"relation_name": "Near", "objects": [
      {"category": "table",
       "relations": [{"relation_name": "against the wall"}]}]},
   {"relation_name": "on_the_floor", "negative": false}
 ]}
"""

expr = parse_expression(RAW)
print("canonical form:")
print("  " + serialize_expression(expr))

print("\nconditions, depth-first (target category, relation, #anchors, negated):")
for category, clause in collect_conditions(expr):
    print(f"  {category:8s} {clause.relation:16s} {len(clause.anchors)}  {clause.negative}")

print("\nthe closed relation vocabulary is enforced:")
try:
    parse_expression('{"category": "bed", "relations": [{"relation_name": "hovering"}]}')
except Exception as err:
    print(f"  rejected: {err}")
