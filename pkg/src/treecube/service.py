"""HTTP session service: load a cube once, explore it operation by operation.

Each session keeps an undo stack of immutable snapshots whose bottom entry
is the originally loaded cube; a monotonically increasing version number
guards against concurrent lost updates (stale writers get a 412).  With a
persist directory, every accepted mutation is snapshotted as canonical XML
and sessions survive a restart.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .algebra import OperatorError
from .model import (
    CubeSchema,
    CubeValidationError,
    HierarchySet,
    ModelError,
    TreeCube,
)
from .ops import (
    OpRequest,
    OpsError,
    UsageError,
    apply,
    lattice_cells,
)
from .tree import DataTree, TreeCollection
from .xmlio import (
    XmlFormatError,
    parse_facts,
    parse_hierarchy,
    parse_tree,
    serialize,
    serialize_cube,
)


# --- session state --------------------------------------------------------------------

@dataclass
class HistoryEntry:
    version: int
    request: Optional[OpRequest]  # None for the base entry
    cube: TreeCube
    warnings: list[str] = field(default_factory=list)
    document: Optional[DataTree] = None


@dataclass
class Session:
    id: str
    hierarchies: HierarchySet
    stack: list[HistoryEntry]
    version: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def current(self) -> HistoryEntry:
        return self.stack[-1]

    @property
    def base_cube(self) -> TreeCube:
        return self.stack[0].cube


def _schema_payload(schema: CubeSchema) -> dict:
    return {
        "fact_tag": schema.fact_tag,
        "collection_tag": schema.collection_tag,
        "dimensions": list(schema.dimensions),
        "measure": schema.measure,
        "pushed": list(schema.pushed),
        "level_of": dict(schema.level_of),
        "base_dimension": dict(schema.base_dimension),
    }


def _schema_from_payload(data: dict) -> CubeSchema:
    return CubeSchema(
        fact_tag=data["fact_tag"],
        collection_tag=data["collection_tag"],
        dimensions=tuple(data["dimensions"]),
        measure=data.get("measure"),
        level_of=dict(data.get("level_of") or {}),
        base_dimension=dict(data.get("base_dimension") or {}),
        pushed=tuple(data.get("pushed") or ()),
    )


def _cells_payload(cube: TreeCube) -> list[dict]:
    return [
        {"coordinates": c.coordinates, "value": c.value} for c in cube.to_cells()
    ]


class SessionStore:
    def __init__(self, persist_dir: Optional[Path] = None):
        self.persist_dir = persist_dir
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        if persist_dir is not None:
            persist_dir.mkdir(parents=True, exist_ok=True)
            self._reload()

    # -- lookup ------------------------------------------------------------------

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail=f"unknown session {session_id!r}")
        return session

    def create(self, facts_text: str, hierarchy_texts: list[str]) -> Session:
        hierarchies = HierarchySet()
        for text in hierarchy_texts:
            hierarchies = hierarchies.add(parse_hierarchy(text))
        cube = parse_facts(facts_text).with_hierarchies(hierarchies)
        session = Session(
            id=uuid.uuid4().hex[:12],
            hierarchies=hierarchies,
            stack=[HistoryEntry(version=0, request=None, cube=cube)],
        )
        with self._lock:
            self.sessions[session.id] = session
        self._persist(session, hierarchy_texts)
        return session

    # -- persistence -------------------------------------------------------------

    def _session_dir(self, session: Session) -> Optional[Path]:
        if self.persist_dir is None:
            return None
        return self.persist_dir / session.id

    def _persist(
        self, session: Session, hierarchy_texts: Optional[list[str]] = None
    ) -> None:
        root = self._session_dir(session)
        if root is None:
            return
        root.mkdir(parents=True, exist_ok=True)
        if hierarchy_texts is not None:
            for i, text in enumerate(hierarchy_texts):
                (root / f"h{i}.xml").write_text(text, encoding="utf-8")
        entries = []
        for entry in session.stack:
            snapshot = root / f"v{entry.version}.xml"
            if not snapshot.exists():
                snapshot.write_text(serialize_cube(entry.cube), encoding="utf-8")
            entries.append(
                {
                    "version": entry.version,
                    "file": snapshot.name,
                    "request": entry.request.to_dict() if entry.request else None,
                    "schema": _schema_payload(entry.cube.schema),
                    "warnings": entry.warnings,
                }
            )
        manifest = {
            "session": session.id,
            "version": session.version,
            "hierarchies": sorted(
                p.name for p in root.glob("h*.xml")
            ),
            "entries": entries,
        }
        tmp = root / "session.json.tmp"
        tmp.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        os.replace(tmp, root / "session.json")

    def _reload(self) -> None:
        assert self.persist_dir is not None
        for manifest_path in sorted(self.persist_dir.glob("*/session.json")):
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            root = manifest_path.parent
            hierarchies = HierarchySet()
            for name in manifest.get("hierarchies", []):
                hierarchies = hierarchies.add(
                    parse_hierarchy((root / name).read_text(encoding="utf-8"))
                )
            stack = []
            for data in manifest["entries"]:
                tree = parse_tree((root / data["file"]).read_text(encoding="utf-8"))
                cube = TreeCube(
                    _schema_from_payload(data["schema"]),
                    TreeCollection.of([tree]),
                    hierarchies,
                )
                request = (
                    OpRequest.from_dict(data["request"])
                    if data.get("request")
                    else None
                )
                stack.append(
                    HistoryEntry(
                        version=data["version"],
                        request=request,
                        cube=cube,
                        warnings=list(data.get("warnings", [])),
                    )
                )
            if not stack:
                continue
            session = Session(
                id=manifest["session"],
                hierarchies=hierarchies,
                stack=stack,
                version=manifest["version"],
            )
            self.sessions[session.id] = session


# --- the application ------------------------------------------------------------------

def _state_payload(session: Session) -> dict:
    entry = session.current
    return {
        "session": session.id,
        "version": session.version,
        "depth": len(session.stack),
        "schema": _schema_payload(entry.cube.schema),
        "cells": _cells_payload(entry.cube),
    }


def _unprocessable(exc: Exception) -> HTTPException:
    detail: dict = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, CubeValidationError):
        detail["issues"] = [
            {"code": i.code, "fact_index": i.fact_index, "message": i.message}
            for i in exc.issues
        ]
    return HTTPException(422, detail=detail)


def create_app(
    persist_dir: Optional[str | Path] = None,
    ui_dir: Optional[str | Path] = None,
) -> FastAPI:
    store = SessionStore(Path(persist_dir) if persist_dir else None)
    app = FastAPI(title="treecube service")
    app.state.store = store

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "sessions": len(store.sessions)}

    @app.post("/sessions")
    async def create_session(
        facts: UploadFile = File(...),
        hierarchies: Optional[list[UploadFile]] = File(None),
    ) -> JSONResponse:
        facts_text = (await facts.read()).decode("utf-8")
        hier_texts = []
        for up in hierarchies or []:
            hier_texts.append((await up.read()).decode("utf-8"))
        try:
            session = store.create(facts_text, hier_texts)
        except (XmlFormatError, CubeValidationError, ModelError) as e:
            raise _unprocessable(e) from None
        with session.lock:
            return JSONResponse(_state_payload(session), status_code=201)

    @app.get("/sessions/{session_id}/cube")
    def get_cube(session_id: str) -> dict:
        session = store.get(session_id)
        with session.lock:
            payload = _state_payload(session)
            payload["xml"] = serialize_cube(session.current.cube)
            return payload

    @app.post("/sessions/{session_id}/ops")
    def run_op(session_id: str, body: dict) -> dict:
        session = store.get(session_id)
        if not isinstance(body, dict):
            raise HTTPException(422, detail={"message": "body must be an object"})
        expected = body.pop("version", None)
        try:
            request = OpRequest.from_dict(body)
        except UsageError as e:
            raise _unprocessable(e) from None
        with session.lock:
            if expected is not None and expected != session.version:
                raise HTTPException(
                    412,
                    detail={
                        "message": "version conflict",
                        "expected": expected,
                        "current": session.version,
                    },
                )
            try:
                result = apply(
                    session.current.cube, request, base_cube=session.base_cube
                )
            except (UsageError, OpsError, ModelError, OperatorError) as e:
                raise _unprocessable(e) from None
            session.version += 1
            entry = HistoryEntry(
                version=session.version,
                request=request,
                cube=result.cube,
                warnings=list(result.warnings),
                document=result.document,
            )
            session.stack.append(entry)
            store._persist(session)
            payload = _state_payload(session)
            payload["warnings"] = list(result.warnings)
            payload["trace"] = list(result.trace)
            if result.document is not None:
                payload["document"] = serialize(result.document)
                payload["cuboids"] = [
                    {
                        "label": label,
                        "cells": [
                            {"coordinates": c.coordinates, "value": c.value}
                            for c in cells
                        ],
                    }
                    for label, cells in lattice_cells(result.document)
                ]
            return payload

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str) -> dict:
        session = store.get(session_id)
        with session.lock:
            if len(session.stack) == 1:
                raise HTTPException(
                    422, detail={"message": "already at the base state"}
                )
            session.stack.pop()
            session.version += 1
            store._persist(session)
            return _state_payload(session)

    @app.get("/sessions/{session_id}/history")
    def history(session_id: str) -> dict:
        session = store.get(session_id)
        with session.lock:
            return {
                "session": session.id,
                "version": session.version,
                "depth": len(session.stack),
                "entries": [
                    {
                        "version": e.version,
                        "op": e.request.to_dict() if e.request else None,
                        "cells": len(e.cube.to_cells()),
                        "warnings": e.warnings,
                    }
                    for e in session.stack
                ],
            }

    ui_path = Path(ui_dir) if ui_dir else Path("frontend") / "dist"
    if ui_path.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_path), html=True), name="ui")

    return app
