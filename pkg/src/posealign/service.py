"""HTTP annotation API over a loaded model and dataset.

All coordinates in request and response bodies are pixel-space; payloads
include each frame's detection box so clients can convert.  Sessions are
in-process state; everything else is stateless.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .errors import InfeasiblePathError, NoConsistentClassError, SchemaError
from .inference import GridSpec, marginal_heatmap, mixture
from .model import AlignmentModel
from .sessions import SessionStore, StaleVersionError, frame_payload, pixel_evidence


class CreateSessionRequest(BaseModel):
    video_id: str | None = None
    frame_indices: list[int] | None = None


class EvidenceRequest(BaseModel):
    landmark: int
    x: float
    y: float
    tolerance: float | None = None  # pixels
    version: int | None = None


def create_app(model: AlignmentModel, dataset) -> FastAPI:
    app = FastAPI(title="posealign annotation service")
    store = SessionStore(model, dataset)
    app.state.store = store

    @app.get("/model/info")
    def model_info():
        return model.info()

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        try:
            session = store.create(req.video_id, req.frame_indices)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {
            "session_id": session.id,
            "frames": [frame_payload(session, t) for t in range(len(session.frames))],
        }

    def _session(sid):
        try:
            return store.get(sid)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/sessions/{sid}/frames/{t}/image.png")
    def frame_image(sid: str, t: int):
        import io

        from fastapi import Response
        from PIL import Image

        session = _session(sid)
        try:
            fs = session.frame(t)
        except SchemaError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        img = Image.fromarray(np.round(fs.record.image * 255.0).astype(np.uint8), mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/sessions/{sid}/frames/{t}/heatmap")
    def heatmap(sid: str, t: int, landmark: int = 0, res: int = 32):
        session = _session(sid)
        try:
            fs = session.frame(t)
        except SchemaError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        bb = fs.record.annotation.bbox
        # evaluate in the canonical frame over the box window, report pixels
        half_w = (bb.w / bb.diagonal) * 0.75
        half_h = (bb.h / bb.diagonal) * 0.75
        try:
            grid = GridSpec(-half_w, half_w, -half_h, half_h, res)
            dist = mixture(fs.current, model.classes)
            heat = marginal_heatmap(dist, landmark, grid)
        except SchemaError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        cx, cy = bb.center
        return {
            "landmark": landmark,
            "res": res,
            "version": fs.version,
            "extent": {
                "x0": cx - half_w * bb.diagonal,
                "x1": cx + half_w * bb.diagonal,
                "y0": cy - half_h * bb.diagonal,
                "y1": cy + half_h * bb.diagonal,
            },
            "values": heat.ravel().tolist(),  # row-major, rows are y
        }

    @app.post("/sessions/{sid}/frames/{t}/evidence")
    def evidence(sid: str, t: int, req: EvidenceRequest):
        session = _session(sid)
        try:
            fs = session.frame(t)
        except SchemaError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        if not 0 <= req.landmark < model.schema.n_points:
            raise HTTPException(status_code=422, detail=f"landmark {req.landmark} out of range")
        ev = pixel_evidence(fs.record, req.landmark, req.x, req.y, req.tolerance, model.tau_evidence)
        try:
            session.apply_evidence(t, ev, expected_version=req.version)
        except StaleVersionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except NoConsistentClassError as exc:
            raise HTTPException(
                status_code=422,
                detail=f"{exc}; retry with a larger tolerance",
            )
        return frame_payload(session, t)

    @app.post("/sessions/{sid}/decode")
    def decode(sid: str):
        session = _session(sid)
        try:
            path, changed = session.decode()
        except InfeasiblePathError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {
            "path": [int(k) for k in path],
            "changed_frames": changed,
            "frames": [frame_payload(session, t) for t in range(len(session.frames))],
        }

    @app.get("/sessions/{sid}/export")
    def export(sid: str):
        session = _session(sid)
        files, manifest = session.export()
        return {"files": files, "manifest": manifest}

    return app


def serve(model: AlignmentModel, dataset, host: str = "127.0.0.1", port: int = 8008):
    import uvicorn

    uvicorn.run(create_app(model, dataset), host=host, port=port, log_level="warning")
