"""HTTP front for the simulator (FastAPI).

Each endpoint wraps one library entry point with pydantic request/response
models.  Responses carry the canonical CSV payloads as strings so clients
get byte-identical artifacts whether they run the library in process or
talk to a remote server.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import metrics as metrics_mod
from .shapes import ShapeError, build_shape_table, dump_shape_table, parse_shape_matrix
from .world import ScenarioError, run, scenario_from_dict, trace_from_csv, trace_to_csv

app = FastAPI(
    title="swarmform",
    description="Decentralized shape formation and formation-control simulation service.",
    version="0.1.0",
)


class RunRequest(BaseModel):
    scenario: dict
    seed: int | None = Field(default=None, description="Overrides the scenario seed.")
    max_ticks: int | None = Field(default=None, description="Overrides the scenario tick budget.")


class RunResponse(BaseModel):
    trace_csv: str
    metrics_csv: str
    summary: dict


class ValidateRequest(BaseModel):
    scenario: dict


class ValidateResponse(BaseModel):
    valid: bool
    bots: int
    message: str


class ShapeTableRequest(BaseModel):
    shape_text: str
    spacing: float = 1.0


class ShapeTableResponse(BaseModel):
    table_csv: str
    labels: int


class MetricsRequest(BaseModel):
    trace_csv: str
    summary: dict | None = None


class MetricsResponse(BaseModel):
    metrics_csv: str


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/run", response_model=RunResponse)
def run_scenario(req: RunRequest) -> RunResponse:
    try:
        doc = dict(req.scenario)
        if req.seed is not None:
            doc["seed"] = req.seed
        if req.max_ticks is not None:
            doc["max_ticks"] = req.max_ticks
        scenario = scenario_from_dict(doc)
        result = run(scenario)
    except (ScenarioError, ShapeError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    # Metrics derive from the trace as written (9 significant digits), so a
    # later recomputation from the file reproduces them byte for byte.
    trace_csv = trace_to_csv(result.rows)
    rows = trace_from_csv(trace_csv)
    summary = metrics_mod.build_summary(result, rows=rows)
    series = metrics_mod.compute_series(
        rows,
        scenario.goal_azimuth,
        parents=result.parents,
        ref_offsets=result.ref_offsets,
        done_counts=result.done_counts,
    )
    return RunResponse(
        trace_csv=trace_csv,
        metrics_csv=metrics_mod.metrics_to_csv(series),
        summary=summary,
    )


@app.post("/validate", response_model=ValidateResponse)
def validate_scenario(req: ValidateRequest) -> ValidateResponse:
    try:
        scenario = scenario_from_dict(dict(req.scenario))
        matrix = scenario.validate()
    except (ScenarioError, ShapeError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    return ValidateResponse(valid=True, bots=matrix.n, message="scenario is valid")


@app.post("/shape-table", response_model=ShapeTableResponse)
def shape_table(req: ShapeTableRequest) -> ShapeTableResponse:
    try:
        matrix = parse_shape_matrix(req.shape_text)
        table = build_shape_table(matrix, req.spacing)
    except ShapeError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    return ShapeTableResponse(table_csv=dump_shape_table(table), labels=table.n)


@app.post("/metrics", response_model=MetricsResponse)
def recompute_metrics(req: MetricsRequest) -> MetricsResponse:
    try:
        rows = trace_from_csv(req.trace_csv)
    except ScenarioError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    series = metrics_mod.series_from_trace(rows, req.summary)
    return MetricsResponse(metrics_csv=metrics_mod.metrics_to_csv(series))
