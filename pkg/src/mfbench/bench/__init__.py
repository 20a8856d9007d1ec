from mfbench.bench.complexity import ComplexityModel, attention_cost, naive_over_warm
from mfbench.bench.latency import (
    LatencyReport,
    measure_latency,
    naive_multiframe_encode,
    time_encoder_work,
)
from mfbench.bench.metrics import r_score, round_half_up, success_rate
from mfbench.bench.report import (
    comparison_csv,
    emit_report,
    load_report,
    report_csv,
    write_frames_sweep,
)
from mfbench.bench.runner import (
    RobustnessReport,
    Setting,
    SettingRow,
    SuiteConfig,
    TrialResult,
    aggregate_categories,
    all_settings,
    plans_for,
    run_benchmark,
    run_trial,
)

__all__ = [
    "ComplexityModel", "LatencyReport", "RobustnessReport", "Setting", "SettingRow",
    "SuiteConfig", "TrialResult", "aggregate_categories", "all_settings", "attention_cost",
    "comparison_csv", "emit_report", "load_report", "measure_latency", "naive_multiframe_encode",
    "naive_over_warm", "plans_for", "r_score", "report_csv", "round_half_up", "run_benchmark",
    "run_trial", "success_rate", "time_encoder_work", "write_frames_sweep",
]
