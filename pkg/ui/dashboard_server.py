import json
import os

from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse, JSONResponse

from config.settings import get_settings
from experiments.report import Report, aggregate
from tools.logger import read_history

app = FastAPI(title="Kernel Pretrained DGCNN Dashboard")


def read_json_file(path, default=None):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except (FileNotFoundError, json.JSONDecodeError):
        return default if default is not None else {}


def output_dir() -> str:
    return get_settings().OUTPUT_DIR


def find_reports() -> dict:
    """Report directories under OUTPUT_DIR, keyed by directory name."""
    found = {}
    root = output_dir()
    if not os.path.isdir(root):
        return found
    for name in sorted(os.listdir(root)):
        path = os.path.join(root, name, "report.json")
        data = read_json_file(path, None)
        if data:
            found[name] = data
    return found


@app.get("/api/reports")
def get_reports():
    reports = []
    for name, data in find_reports().items():
        reports.append({
            "name": name,
            "method": data.get("method"),
            "dataset": data.get("dataset"),
            "mean": data.get("mean"),
            "std": data.get("std"),
            "std_over": data.get("std_over"),
            "folds": len(data.get("folds", [])),
            "failed_folds": sum(1 for f in data.get("folds", []) if f.get("failed")),
            "wall_clock_seconds": data.get("wall_clock_seconds"),
        })
    return JSONResponse({"reports": reports})


@app.get("/api/reports/{name}")
def get_report(name: str):
    data = find_reports().get(name)
    if data is None:
        raise HTTPException(status_code=404, detail=f"no report named {name}")
    return JSONResponse(data)


@app.get("/api/comparison")
def get_comparison():
    reports = [Report.model_validate(data) for data in find_reports().values()]
    if not reports:
        return JSONResponse({"table": "", "csv": ""})
    text, table_csv = aggregate(reports)
    return JSONResponse({"table": text, "csv": table_csv})


@app.get("/api/traces")
def get_traces():
    """Group the trace history into stage spans with their metrics and tool calls."""
    entries = read_history()

    if not entries:
        return JSONResponse({"traces": [], "summary": {}})

    spans = {}
    order = []
    trace_id = None

    for entry in entries:
        if entry.get("trace_id"):
            trace_id = entry["trace_id"]

        if entry.get("type") == "stage_event":
            span_id = entry.get("span_id")
            event = entry.get("event")
            if event == "start":
                spans[span_id] = {
                    "span_id": span_id,
                    "parent_span_id": entry.get("parent_span_id"),
                    "stage": entry.get("stage"),
                    "start_time": entry.get("timestamp"),
                    "end_time": None,
                    "duration_ms": None,
                    "status": "running",
                    "input": entry.get("data", {}),
                    "output": None,
                    "metrics": [],
                    "tool_calls": [],
                }
                order.append(span_id)
            elif event in ("complete", "failed") and span_id in spans:
                span = spans[span_id]
                span["end_time"] = entry.get("timestamp")
                span["duration_ms"] = entry.get("duration_ms")
                span["status"] = "success" if event == "complete" else "failed"
                span["output"] = entry.get("data", {}).get("output", entry.get("data"))

        elif entry.get("type") == "metric" and entry.get("span_id") in spans:
            spans[entry["span_id"]]["metrics"].append({
                "name": entry.get("name"),
                "value": entry.get("value"),
                "fields": entry.get("fields", {}),
            })

        elif entry.get("type") == "tool_call" and entry.get("span_id") in spans:
            spans[entry["span_id"]]["tool_calls"].append({
                "timestamp": entry.get("timestamp"),
                "tool": entry.get("tool"),
                "method": entry.get("method"),
                "data": entry.get("data", {}),
            })

    traces = [spans[span_id] for span_id in order]
    top_level = [s for s in traces if not s["parent_span_id"]]
    summary = {
        "trace_id": trace_id,
        "total_spans": len(traces),
        "total_duration_ms": sum(s["duration_ms"] or 0 for s in top_level),
        "total_metrics": sum(len(s["metrics"]) for s in traces),
        "total_tool_calls": sum(len(s["tool_calls"]) for s in traces),
        "failed_spans": sum(1 for s in traces if s["status"] == "failed"),
        "stages": [s["stage"] for s in top_level],
    }

    return JSONResponse({"traces": traces, "summary": summary})


@app.get("/", response_class=HTMLResponse)
def dashboard():
    return HTMLResponse(DASHBOARD_HTML)


DASHBOARD_HTML = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="UTF-8">
<title>Kernel Pretrained DGCNN Dashboard</title>
<style>
  body { font-family: -apple-system, BlinkMacSystemFont, "Segoe UI", sans-serif; background: #0f172a; color: #e2e8f0; margin: 0; padding: 24px; }
  h1 { font-size: 20px; margin: 0 0 16px; }
  h2 { font-size: 15px; color: #94a3b8; margin: 24px 0 8px; text-transform: uppercase; letter-spacing: .05em; }
  table { border-collapse: collapse; width: 100%; background: #1e293b; border-radius: 6px; overflow: hidden; }
  th, td { padding: 8px 12px; text-align: left; border-bottom: 1px solid #334155; font-size: 13px; }
  th { color: #94a3b8; font-weight: 600; }
  tr.clickable:hover { background: #273549; cursor: pointer; }
  pre { background: #1e293b; padding: 12px; border-radius: 6px; font-size: 12px; overflow-x: auto; }
  .failed { color: #f87171; }
  .success { color: #4ade80; }
  .running { color: #facc15; }
</style>
</head>
<body>
<h1>Kernel Pretrained DGCNN</h1>

<h2>Comparison</h2>
<pre id="comparison">loading...</pre>

<h2>Reports</h2>
<table>
  <thead><tr><th>name</th><th>method</th><th>dataset</th><th>accuracy</th><th>folds</th><th>failed</th><th>seconds</th></tr></thead>
  <tbody id="reports"></tbody>
</table>
<pre id="report-detail"></pre>

<h2>Trace</h2>
<table>
  <thead><tr><th>stage</th><th>status</th><th>duration (ms)</th><th>metrics</th><th>tool calls</th></tr></thead>
  <tbody id="traces"></tbody>
</table>

<script>
function pct(x) { return x === null || x === undefined ? "-" : (100 * x).toFixed(2); }

async function loadComparison() {
  const data = await (await fetch("/api/comparison")).json();
  document.getElementById("comparison").textContent = data.table || "no reports yet";
}

async function loadReports() {
  const data = await (await fetch("/api/reports")).json();
  const body = document.getElementById("reports");
  body.innerHTML = "";
  for (const r of data.reports) {
    const row = document.createElement("tr");
    row.className = "clickable";
    row.innerHTML = `<td>${r.name}</td><td>${r.method}</td><td>${r.dataset}</td>` +
      `<td>${pct(r.mean)} &plusmn; ${pct(r.std)} <small>(${r.std_over})</small></td>` +
      `<td>${r.folds}</td><td class="${r.failed_folds ? "failed" : ""}">${r.failed_folds}</td>` +
      `<td>${(r.wall_clock_seconds || 0).toFixed(1)}</td>`;
    row.onclick = async () => {
      const detail = await (await fetch(`/api/reports/${encodeURIComponent(r.name)}`)).json();
      document.getElementById("report-detail").textContent = JSON.stringify(detail.folds, null, 2);
    };
    body.appendChild(row);
  }
}

async function loadTraces() {
  const data = await (await fetch("/api/traces")).json();
  const body = document.getElementById("traces");
  body.innerHTML = "";
  for (const s of data.traces) {
    const row = document.createElement("tr");
    const indent = s.parent_span_id ? "&nbsp;&nbsp;&nbsp;&nbsp;" : "";
    row.innerHTML = `<td>${indent}${s.stage}</td><td class="${s.status}">${s.status}</td>` +
      `<td>${s.duration_ms ?? "-"}</td><td>${s.metrics.length}</td><td>${s.tool_calls.length}</td>`;
    body.appendChild(row);
  }
}

loadComparison();
loadReports();
loadTraces();
</script>
</body>
</html>
"""


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=get_settings().DASHBOARD_PORT)
