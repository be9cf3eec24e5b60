"""Visual-retrieval benchmark: suite generation, scoring, layout sweeps and request timing."""
from sceneground.bench.scoring import RetrievalAnswer, parse_retrieval_answer, retrieval_recall, score_retrieval
from sceneground.bench.suite import (
    BLOCK_COLORS,
    COLOR_NAMES,
    BenchItem,
    generate_suite,
    suite_manifest,
    truth_map,
    write_suite_images,
)
from sceneground.bench.sweep import (
    SweepRow,
    TimingRow,
    run_layout_sweep,
    time_requests,
    write_sweep_csv,
    write_timing_csv,
)

__all__ = [
    "BLOCK_COLORS",
    "COLOR_NAMES",
    "BenchItem",
    "RetrievalAnswer",
    "SweepRow",
    "TimingRow",
    "generate_suite",
    "parse_retrieval_answer",
    "retrieval_recall",
    "run_layout_sweep",
    "score_retrieval",
    "suite_manifest",
    "time_requests",
    "truth_map",
    "write_suite_images",
    "write_sweep_csv",
    "write_timing_csv",
]
