"""HTTP session API for the web console.

Commands reuse the REPL grammar verbatim; per-replicate updates are
pushed as a plain HTTP event stream (one `data:` line of JSON per
emission, one terminal state event), which independent readers can
resume by re-requesting the stream.
"""

from __future__ import annotations

import asyncio
from typing import Optional, Union

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .commands import CommandError, run_command
from .session import Session
from .source import Codebook, DatasetError, open_dataset
from .tables import canonical_json


class OpenSessionRequest(BaseModel):
    path: str
    codebook: Optional[Union[dict, str]] = None
    workers: int = 1
    subsize: int = 10**5
    niter: int = 5
    seq: bool = True
    seed: int = 0
    se_target: Optional[float] = None


class CommandRequest(BaseModel):
    command: str


def create_app() -> FastAPI:
    app = FastAPI(title="pondstat service", version="0.1.0")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    sessions: dict = {}

    def _session(sid: str) -> Session:
        try:
            return sessions[sid]
        except KeyError:
            raise HTTPException(404, f"unknown session: {sid}") from None

    def _task(sid: str, tid: str):
        session = _session(sid)
        task = session.tasks.get(tid)
        if task is None:
            raise HTTPException(404, f"unknown task: {tid}")
        return task

    @app.post("/sessions")
    def open_session(req: OpenSessionRequest):
        codebook = None
        if isinstance(req.codebook, str):
            try:
                codebook = Codebook.from_file(req.codebook)
            except (OSError, ValueError, DatasetError) as exc:
                raise HTTPException(400, f"bad codebook: {exc}") from exc
        elif isinstance(req.codebook, dict):
            try:
                codebook = Codebook.from_dict(req.codebook)
            except DatasetError as exc:
                raise HTTPException(400, f"bad codebook: {exc}") from exc
        try:
            handle = open_dataset(req.path, "with_codebook" if codebook else "no_codebook",
                                  codebook)
        except DatasetError as exc:
            raise HTTPException(409, f"dataset unreadable: {exc}") from exc
        session = Session(handle, workers=req.workers, n=req.subsize, k_max=req.niter,
                          sequential=req.seq, master_seed=req.seed,
                          se_target=req.se_target)
        sessions[session.id] = session
        return {"session_id": session.id}

    @app.get("/sessions/{sid}/schema")
    def schema(sid: str):
        return _session(sid).schema_json()

    @app.post("/sessions/{sid}/commands")
    def command(sid: str, req: CommandRequest):
        session = _session(sid)
        try:
            result = run_command(session, req.command)
        except CommandError as exc:
            raise HTTPException(400, str(exc)) from exc
        if result.kind == "task":
            return {"task_id": result.task.id, "kind": result.task.spec.kind}
        if result.kind == "quit":
            raise HTTPException(400, "use DELETE /sessions/{id} to end a session")
        out = {"ok": True}
        if result.message:
            out["message"] = result.message
        if result.payload is not None:
            out["payload"] = result.payload
        return out

    @app.get("/sessions/{sid}/tasks/{tid}")
    def task_state(sid: str, tid: str):
        return _task(sid, tid).snapshot()

    @app.get("/sessions/{sid}/tasks/{tid}/stream")
    def stream(sid: str, tid: str, from_index: int = 0):
        task = _task(sid, tid)

        async def gen():
            i = from_index
            while True:
                n = len(task.emissions)
                while i < n:
                    emission = task.emissions[i]
                    i += 1
                    yield f"data: {canonical_json(emission)}\n\n"
                    if emission.get("terminal"):
                        return
                await asyncio.sleep(0.02)

        return StreamingResponse(gen(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    @app.post("/sessions/{sid}/tasks/{tid}/cancel")
    def cancel(sid: str, tid: str):
        task = _task(sid, tid)
        return {"task_id": tid, "state": task.cancel()}

    @app.get("/sessions/{sid}/plots/{tid}/latest")
    def latest_plot(sid: str, tid: str):
        task = _task(sid, tid)
        if task.latest_plot is None:
            raise HTTPException(404, f"task {tid} has no plot yet")
        return task.latest_plot.to_json()

    @app.delete("/sessions/{sid}")
    def close_session(sid: str):
        session = _session(sid)
        for task in session.tasks.values():
            task.cancel()
        del sessions[sid]
        return {"deleted": sid}

    return app
