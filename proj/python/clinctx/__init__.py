"""Python access to the clinctx native core."""

import json as _json

from ._core import (
    ClinctxError,
    bed_day_revenue,
    chart_review_savings,
    chunk_text,
    cluster_labels,
    count_tokens,
    format_compact,
    parse_bundle,
    plan_chunk_count,
    prompts,
    serialize_bundle,
    sample_sessions,
    sha256_hex,
    time_savings,
)
from . import _core


def project_scenario(scenario):
    """Projection for a scenario given as a dict or JSON text."""
    text = scenario if isinstance(scenario, str) else _json.dumps(scenario)
    return _json.loads(_core.project_scenario_json(text))


def metrics_report(jsonl, latency_bin=10.0, token_bin=40000.0):
    return _json.loads(_core.metrics_report_json(jsonl, latency_bin, token_bin))


__all__ = [
    "ClinctxError",
    "bed_day_revenue",
    "chart_review_savings",
    "chunk_text",
    "cluster_labels",
    "count_tokens",
    "format_compact",
    "metrics_report",
    "parse_bundle",
    "plan_chunk_count",
    "project_scenario",
    "prompts",
    "sample_sessions",
    "serialize_bundle",
    "sha256_hex",
    "time_savings",
]
