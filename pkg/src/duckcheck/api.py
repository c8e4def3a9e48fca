"""HTTP service wrapping the checker: check, run, and health endpoints."""

from __future__ import annotations

from fastapi import FastAPI

from . import __version__
from .service import (
    CheckRequest, CheckResponse, RunRequest, RunResponse, check_source,
    run_source,
)

app = FastAPI(title="duckcheck", version=__version__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/check", response_model=CheckResponse)
def check(req: CheckRequest) -> CheckResponse:
    return check_source(req)


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    return run_source(req)
