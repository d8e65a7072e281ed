"""HTTP service for interactive evolution sessions.

Thin wrapper over EvolutionSession: create a session, fetch the current
population (topology sent once, per-face vertices alongside), submit a
selection to advance, download the session log. Sessions live in memory,
one lock each; every response is produced by the same evolution and
session_io code paths the batch tools use.

Error mapping: 400 invalid config, 404 unknown rig/session, 409 state or
generation mismatch, 422 invalid selection payload.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from . import session_io
from .evolution import EvolutionSession, GAConfig, Selection, SelectionError
from .rig import BlendshapeRig, RigError
from .synth import RigGenParams, generate_synthetic_rig

STATE_AWAITING = "awaiting-selection"
STATE_ADVANCING = "advancing"
STATE_FINISHED = "finished"

DEFAULT_BOUNDS = (1, 10)


@dataclass
class SessionEntry:
    session: EvolutionSession
    rig: BlendshapeRig
    bounds: tuple
    lock: threading.Lock
    state: str = STATE_AWAITING


def _state_of(entry: SessionEntry) -> str:
    if entry.session.finished:
        return STATE_FINISHED
    return entry.state


def _handle_payload(session_id: str, entry: SessionEntry) -> dict:
    return {
        "session_id": session_id,
        "state": _state_of(entry),
        "generation": int(entry.session.generation),
        "generations": int(entry.session.cfg.generations),
        "bounds": list(entry.bounds),
        "rig_id": entry.rig.rig_id,
        "config": entry.session.cfg.to_dict(),
    }


def create_app(rigs: dict | None = None) -> FastAPI:
    """Build the service; ``rigs`` maps rig id to BlendshapeRig.

    Without an explicit registry a default synthetic rig is generated and
    additionally registered under the alias "default".
    """
    app = FastAPI(title="emogen session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=False,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    if rigs is None:
        rig = generate_synthetic_rig(RigGenParams())
        rigs = {rig.rig_id: rig, "default": rig}
    sessions: dict = {}
    sessions_lock = threading.Lock()

    def get_entry(session_id: str) -> SessionEntry:
        with sessions_lock:
            entry = sessions.get(session_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return entry

    @app.get("/rigs")
    def list_rigs() -> dict:
        return {"rigs": sorted(rigs.keys())}

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body(...)) -> dict:
        rig_id = payload.get("rig", "default")
        rig = rigs.get(rig_id)
        if rig is None:
            raise HTTPException(status_code=404, detail=f"unknown rig {rig_id!r}")
        try:
            cfg = GAConfig.from_dict(payload.get("ga", {}))
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=f"invalid config: {exc}") from exc
        bounds = payload.get("selection_bounds", list(DEFAULT_BOUNDS))
        try:
            lo, hi = (int(bounds[0]), int(bounds[1]))
        except (ValueError, TypeError, IndexError) as exc:
            raise HTTPException(status_code=400, detail="invalid selection bounds") from exc
        if not 1 <= lo <= hi <= 10:
            raise HTTPException(
                status_code=400, detail=f"invalid selection bounds [{lo}, {hi}]")
        fixed = payload.get("fixed_members")
        try:
            session = EvolutionSession(
                rig, cfg,
                fixed_members=None if fixed is None else np.asarray(fixed, dtype=float))
        except (ValueError, RigError) as exc:
            raise HTTPException(status_code=400, detail=f"invalid config: {exc}") from exc

        session_id = uuid.uuid4().hex[:12]
        entry = SessionEntry(session=session, rig=rig, bounds=(lo, hi),
                             lock=threading.Lock())
        with sessions_lock:
            sessions[session_id] = entry
        return _handle_payload(session_id, entry)

    @app.get("/sessions/{session_id}/population")
    def get_population(session_id: str) -> dict:
        entry = get_entry(session_id)
        with entry.lock:
            if _state_of(entry) != STATE_AWAITING:
                raise HTTPException(
                    status_code=409,
                    detail=f"session is {_state_of(entry)}, not awaiting a selection")
            pop = entry.session.population
            rig = entry.rig
            faces = []
            for i, weights in enumerate(pop.members):
                mesh = rig.evaluate(weights)
                corr = pop.corrections[i]
                faces.append({
                    "index": i,
                    "weights": weights.tolist(),
                    "vertices": mesh.vertices.tolist(),
                    "tag": pop.tags[i],
                    "corrected": corr is not None and bool(np.any(corr.w_clsn > 0.0)),
                    "resolved": corr.resolved if corr is not None else True,
                })
            return {
                "session_id": session_id,
                "generation": int(pop.generation),
                "state": _state_of(entry),
                "bounds": list(entry.bounds),
                "topology": {"faces": rig.faces.tolist()},
                "faces": faces,
            }

    @app.post("/sessions/{session_id}/selection")
    def submit_selection(session_id: str, payload: dict = Body(...)) -> dict:
        entry = get_entry(session_id)
        with entry.lock:
            if _state_of(entry) == STATE_FINISHED:
                raise HTTPException(status_code=409, detail="session already finished")
            if "generation" not in payload:
                raise HTTPException(status_code=422, detail="selection missing 'generation'")
            try:
                generation = int(payload["generation"])
                selection = Selection(
                    elite=int(payload["elite"]),
                    others=[int(i) for i in payload.get("others", [])],
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise HTTPException(status_code=422,
                                    detail=f"malformed selection: {exc}") from exc
            current = int(entry.session.generation)
            if generation != current:
                raise HTTPException(
                    status_code=409,
                    detail=f"selection targets generation {generation}, "
                           f"session is at {current}")
            n_picks = 1 + len(selection.others)
            lo, hi = entry.bounds
            if not lo <= n_picks <= hi:
                raise HTTPException(
                    status_code=422,
                    detail=f"selection count {n_picks} outside bounds [{lo}, {hi}]")
            try:
                selection.validate()
            except SelectionError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc

            entry.state = STATE_ADVANCING
            try:
                entry.session.submit(selection)
            finally:
                entry.state = STATE_AWAITING

            out = _handle_payload(session_id, entry)
            if entry.session.finished:
                out["final_elite"] = entry.session.log.final_elite.tolist()
                out["log_ref"] = f"/sessions/{session_id}/log"
            return out

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str) -> dict:
        entry = get_entry(session_id)
        with entry.lock:
            doc = {"schema": f"sessionlog/{session_io.SCHEMA_VERSIONS['sessionlog']}"}
            doc.update(session_io.log_to_dict(entry.session.log))
            return doc

    return app
