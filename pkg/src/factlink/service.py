"""HTTP service exposing query, explain, schema, history, and load endpoints."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import FactLinkError
from .planner import BASELINE, ENHANCED
from .session import Session


def _error(status: int, name: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": name, "detail": detail})


def create_app(session: Session | None = None) -> FastAPI:
    """Build the service around a session (possibly not yet loaded)."""
    session = session if session is not None else Session()
    app = FastAPI(title="factlink", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.session = session

    async def _json_body(request: Request) -> dict | JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return _error(400, "MalformedBody", "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "MalformedBody", "request body must be a JSON object")
        return body

    @app.post("/query")
    async def query(request: Request):
        body = await _json_body(request)
        if isinstance(body, JSONResponse):
            return body
        text = body.get("text")
        goal = body.get("goal")
        mode = body.get("mode", ENHANCED)
        if mode not in (BASELINE, ENHANCED):
            return _error(400, "MalformedBody", f"unknown mode {mode!r}")
        if not isinstance(text, str) and not isinstance(goal, str):
            return _error(400, "MalformedBody", "body needs 'text' or 'goal'")
        if not session.loaded:
            return _error(422, "SessionNotLoaded", "no data loaded")
        try:
            if isinstance(goal, str) and goal:
                strategy = body.get("strategy", "interpretive")
                result_id, table = session.ask_goal(goal, strategy=strategy)
            else:
                if not text or not text.strip():
                    return _error(400, "MalformedBody", "'text' is empty")
                result_id, outcome = session.ask(text, mode=mode)
                table = outcome.table
        except FactLinkError as exc:
            return _error(422, exc.name, str(exc))
        payload = table.to_payload()
        payload["result_id"] = result_id
        return JSONResponse(content=payload)

    @app.get("/explain/{provenance_id}")
    async def explain(provenance_id: str):
        trace = session.explain(provenance_id)
        if trace is None:
            return _error(404, "UnknownProvenance", f"no trace {provenance_id!r}")
        return JSONResponse(content=trace)

    @app.get("/schema")
    async def schema():
        if not session.loaded:
            return _error(422, "SessionNotLoaded", "no data loaded")
        return JSONResponse(content=session.schema_payload())

    @app.get("/history")
    async def history():
        return JSONResponse(
            content=[
                {"query": record.text, "result_id": record.result_id}
                for record in session.history
            ]
        )

    @app.post("/load")
    async def load(request: Request):
        body = await _json_body(request)
        if isinstance(body, JSONResponse):
            return body
        try:
            session.load(body.get("data_dir"), body.get("knowledge_file"))
        except FactLinkError as exc:
            return _error(422, exc.name, str(exc))
        except OSError as exc:
            return _error(422, "LoadFailed", str(exc))
        return JSONResponse(content=session.schema_payload())

    return app
