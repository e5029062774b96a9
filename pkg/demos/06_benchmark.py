"""The bundled synthetic benchmark: 40 queries over 5 rooms, fully offline.

Every query has a geometrically unambiguous answer and several
same-category distractors, so the random baseline stays far below the
pipeline. The bench harness also reports condition-level precision/recall
(each root clause executed in isolation) and can emit CSV matrices for
feature heatmaps and per-step grounding scores.
"""

import tempfile
from pathlib import Path

from sceneground import EncoderRegistry, generate_mini_benchmark
from sceneground.bench import emit_plot_data, run_bench

with tempfile.TemporaryDirectory() as td:
    manifest = generate_mini_benchmark(td, seed=7)
    print(f"generated {manifest['n_queries']} queries over scenes: {manifest['scenes']}")

    report = run_bench(td, EncoderRegistry(), workers=4, with_baseline=True)
    print("\naggregates:")
    for key, value in report.aggregates.items():
        print(f"  {key:20s} {value:.4f}" if isinstance(value, float) else f"  {key:20s} {value}")

    misses = [r for r in report.records if not r.correct]
    print(f"\nmisses: {len(misses)}")

    plots = Path(td) / "plots"
    plot_manifest = emit_plot_data(td, EncoderRegistry(), plots)
    print(f"plot data: {len(plot_manifest['heatmaps'])} heatmap CSVs, "
          f"{len(plot_manifest['steps'])} per-step score CSVs")
