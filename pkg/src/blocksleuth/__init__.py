"""Detection and prediction of blocking concurrency bugs from sync-event traces."""

from .analysis import AnalysisResult, Config, analyze
from .events import Event, Frame, Phase, SemanticKind, Trace, validate_trace
from .findings import AnalysisWarning, BugFinding, FindingKind, Provenance
from .model import ProgramModel, load_model, parse_model
from .oracle import OracleVerdict, enumerate_schedules
from .report import render_report
from .simulator import GroundTruth, RoundRobin, Script, SeededRandom, run
from .trace_io import load_semantic_table, parse_trace, read_trace, write_trace

__all__ = [
    "AnalysisResult", "AnalysisWarning", "BugFinding", "Config", "Event", "FindingKind", "Frame",
    "GroundTruth", "OracleVerdict", "Phase", "ProgramModel", "Provenance", "RoundRobin", "Script",
    "SeededRandom", "SemanticKind", "Trace", "analyze", "enumerate_schedules", "load_model",
    "load_semantic_table", "parse_model", "parse_trace", "read_trace", "render_report", "run",
    "validate_trace", "write_trace",
]
