from neunets.engine.config import AUTO, RunConfig, SynthesisRequest, ValidationError, load_dataset, select_algorithm, validate_request
from neunets.engine.export import Evaluation, ExportMetrics, Preprocessing, evaluate_export, export_model, read_metrics
from neunets.engine.pipeline import (
    STOP_BY_BUDGET,
    STOP_BY_USER,
    Pipeline,
    PipelineStatus,
    create_pipeline,
    pipeline_status,
    resume_pipeline,
    run_pipeline,
    stop_pipeline,
)
from neunets.engine.report import pipeline_report, render_report
from neunets.engine.settings import Settings, load_settings
from neunets.engine.snapshots import PipelineStore, SnapshotError, UnknownPipelineError
from neunets.engine.state import CandidateRecord, CycleSummary, IllegalTransitionError, PipelineState, Stage
