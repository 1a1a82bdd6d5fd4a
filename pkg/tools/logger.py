"""Logger - Records run stages, tool calls and metrics to the trace history with tracing support"""

import os
import json
import uuid
from datetime import datetime, timezone
from typing import Optional

from config.settings import get_settings

# Global trace context
_history_path: Optional[str] = None
_current_trace_id: Optional[str] = None
_current_span_id: Optional[str] = None
_span_stack: list = []
_span_start_times: dict = {}


def generate_id() -> str:
    """Generate a short unique ID for traces/spans."""
    return uuid.uuid4().hex[:12]


def start_trace() -> str:
    """Start a new trace and return the trace ID."""
    global _current_trace_id, _current_span_id
    _current_trace_id = generate_id()
    _current_span_id = None
    _span_stack.clear()
    _span_start_times.clear()
    return _current_trace_id


def set_history_path(path: Optional[str]):
    """Redirect the trace history. None restores the configured default."""
    global _history_path
    _history_path = path


def get_history_path() -> str:
    return _history_path or get_settings().TRACE_HISTORY


def read_history(path: Optional[str] = None) -> list:
    """Load every entry of a trace history file; unreadable lines are skipped."""
    path = path or get_history_path()
    if not os.path.exists(path):
        return []
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError:
                continue
    return entries


def _append_to_history(entry: dict):
    """Append an entry to the trace history (one JSON object per line)."""
    path = get_history_path()
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(entry, default=str) + "\n")


def log_tool_call(tool_name: str, method: str, data: dict, span_id: Optional[str] = None):
    """Log a tool call (file read, file write) to the trace history.

    Args:
        tool_name: Name of the tool (FileReader, FileWriter)
        method: Method being called
        data: Input/output data to log
        span_id: Optional span ID to associate this tool call with
    """
    entry = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "type": "tool_call",
        "tool": tool_name,
        "method": method,
        "data": data,
        "trace_id": _current_trace_id,
        "span_id": span_id or _current_span_id
    }
    _append_to_history(entry)


def log_stage(stage_name: str, event: str, data: dict):
    """Log a pipeline stage event to the trace history.

    Args:
        stage_name: Name of the stage (e.g. "Kernel SVM", "Pretrain fold 3")
        event: Event type (start, complete, failed, ...)
        data: Event data to log
    """
    global _current_span_id

    span_id = None
    duration_ms = None
    parent_id = _current_span_id

    if event == "start":
        span_id = generate_id()
        _span_stack.append(span_id)
        _current_span_id = span_id
        _span_start_times[span_id] = datetime.now(timezone.utc)
    elif event in ("complete", "failed") and _span_stack:
        span_id = _span_stack.pop()
        _current_span_id = _span_stack[-1] if _span_stack else None
        parent_id = _current_span_id
        if span_id in _span_start_times:
            start_time = _span_start_times[span_id]
            duration_ms = int((datetime.now(timezone.utc) - start_time).total_seconds() * 1000)
            del _span_start_times[span_id]
    else:
        span_id = _current_span_id

    entry = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "type": "stage_event",
        "stage": stage_name,
        "event": event,
        "data": data,
        "trace_id": _current_trace_id,
        "span_id": span_id,
        "parent_span_id": parent_id if parent_id != span_id else None
    }

    if duration_ms is not None:
        entry["duration_ms"] = duration_ms

    _append_to_history(entry)


def log_metric(stage_name: str, name: str, value: float, **fields):
    """Log a scalar training metric (epoch loss, validation accuracy).

    Args:
        stage_name: Stage the metric belongs to
        name: Metric name
        value: Metric value
        fields: Extra context such as epoch, fold, repetition
    """
    entry = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "type": "metric",
        "stage": stage_name,
        "name": name,
        "value": value,
        "fields": fields,
        "trace_id": _current_trace_id,
        "span_id": _current_span_id
    }
    _append_to_history(entry)
