from __future__ import annotations

import jinja2

from neunets.engine.export import read_metrics
from neunets.engine.settings import Settings
from neunets.engine.snapshots import PipelineStore
from neunets.engine.state import PipelineState

REPORT_TEMPLATE = """Pipeline {{ state.id }}: {{ state.stage.value }}
{%- if state.stop_reason %} (stop: {{ state.stop_reason }}){% endif %}
{%- if state.failure %}
  failure            {{ state.failure }}
{%- endif %}

  dataset            {{ config.dataset }} ({{ config.domain }}, {{ config.n_examples }} examples, {{ config.n_classes }} classes)
  algorithm          {{ config.algorithm }}
  selected because   {{ config.selection_reason }}{% if config.selection_reason.startswith("auto") %} [engine policy]{% endif %}
  budget             {{ config.tier.value }} tier, {{ "%.1f"|format(state.consumed_seconds) }}s of {{ "%.1f"|format(config.cap_seconds) }}s used
  cycles             {{ state.cycle }}
  candidates         {{ state.candidates|length }}{% if failed %} ({{ failed }} failed){% endif %}
{%- if best %}
  best               candidate {{ best.id }} ({{ best.label }}), holdout {{ "%.4f"|format(best.fitness) }}
{%- endif %}
{%- if metrics %}

Exported to {{ state.export_dir }}
  holdout accuracy   {{ "%.4f"|format(metrics.holdout_accuracy) }}
{%- if metrics.test_accuracy is not none %}
  test accuracy      {{ "%.4f"|format(metrics.test_accuracy) }}
{%- endif %}
  parameters         {{ metrics.params }}
  inference FLOPs    {{ metrics.inference_flops }}
{%- endif %}
{%- if state.history %}

cycle  candidates  best      seconds
{%- for summary in state.history %}
{{ "%5d"|format(summary.cycle) }}  {{ "%10d"|format(summary.candidates|length) }}  {{ "%.4f"|format(summary.best_fitness) }}  {{ "%9.1f"|format(summary.consumed_seconds) }}
{%- endfor %}
{%- endif %}
{%- if state.finegrain_reports %}

Fine-grained pass{% if not state.finegrained %} (not adopted){% endif %}
phase  name                  params  holdout
{%- for report in state.finegrain_reports %}
{{ "%5d"|format(report.phase) }}  {{ "%-20s"|format(report.name) }}  {{ "%6d"|format(report.params) }}  {{ "%.4f"|format(report.holdout_accuracy) }}
{%- endfor %}
{%- endif %}
"""


def render_report(state: PipelineState) -> str:
    metrics = read_metrics(state.export_dir) if state.export_dir else None
    return jinja2.Template(REPORT_TEMPLATE).render(
        state=state,
        config=state.config,
        best=state.best_candidate,
        failed=sum(1 for c in state.candidates if c.failed),
        metrics=metrics,
    )


def pipeline_report(pipeline_id: str, settings: Settings) -> str:
    """
    :raises UnknownPipelineError: if there is no such pipeline
    """
    return render_report(PipelineStore(settings.pipelines_dir).restore(pipeline_id))
