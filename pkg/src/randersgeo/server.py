"""HTTP session service for interactive segmentation.

Endpoints (JSON bodies carry a top-level "v": 1):

* POST /sessions                      image upload (PNG or PGM bytes)
* PUT  /sessions/{id}/config          adjust the segmentation config
* PUT  /sessions/{id}/landmarks       ordered landmark list, builds the
                                      initial contour
* POST /sessions/{id}/step?n=K        run K outer iterations
* GET  /sessions/{id}/artifacts/{kind}

Sessions are in-memory; one in-flight step per session (409 otherwise);
a failed step keeps the pre-step state (stage moves to "error" and a new
landmark edit resumes from "initialized").
"""

from __future__ import annotations

import copy
import io
import json
import threading
import uuid

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse

from .cli import energy_csv_bytes
from .errors import InitError, RandersGeoError
from .evolve import LandmarkSet, SegmentationConfig, make_evolution
from .grid import (
    Grid2D,
    Image,
    contour_to_json,
    mask_to_pgm_bytes,
    rsf1_bytes_from_planes,
)

MAX_UPLOAD_BYTES = 16 * 1024 * 1024

STAGE_NEW = "new"
STAGE_INITIALIZED = "initialized"
STAGE_EVOLVING = "evolving"
STAGE_CONVERGED = "converged"
STAGE_ERROR = "error"

ARTIFACT_KINDS = ("contour.json", "mask.pgm", "tube.pgm", "xi.rsf1",
                  "omega.rsf1", "energy.csv")


class Session:
    def __init__(self, image):
        self.id = uuid.uuid4().hex
        self.image = image
        self.config = SegmentationConfig()
        self.landmarks = None
        self.driver = None
        self.stage = STAGE_NEW
        self.error = None
        self.lock = threading.Lock()       # store mutation guard
        self.step_lock = threading.Lock()  # one in-flight step

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("lock")
        state.pop("step_lock")
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.lock = threading.Lock()
        self.step_lock = threading.Lock()

    def persist(self, directory):
        import pickle

        path = directory / f"{self.id}.session"
        tmp = path.with_suffix(".tmp")
        with open(tmp, "wb") as f:
            pickle.dump(self, f)
        tmp.replace(path)

    def reinitialize(self):
        from .errors import RandersGeoError

        try:
            self.driver = make_evolution(self.image, self.landmarks,
                                         self.config)
        except RandersGeoError as e:
            self.driver = None
            self.stage = STAGE_ERROR
            self.error = str(e)
            raise
        self.stage = STAGE_INITIALIZED
        self.error = None

    def state_payload(self):
        st = self.driver.state
        return {
            "v": 1,
            "id": self.id,
            "stage": self.stage,
            "iteration": st.iteration,
            "energy": st.energy,
            "area_delta": (st.history[-1]["area_delta"]
                           if st.history else None),
            "converged": st.converged,
            "contour": json.loads(contour_to_json(st.contour)),
        }


def _decode_image(body):
    if body[:2] in (b"P5", b"P6", b"P2", b"P3"):
        import tempfile

        with tempfile.NamedTemporaryFile(suffix=".pgm") as f:
            f.write(body)
            f.flush()
            from .grid import load_image

            return load_image(f.name, target_channels=1)
    if body[:8] == b"\x89PNG\r\n\x1a\n":
        from PIL import Image as PILImage

        im = PILImage.open(io.BytesIO(body))
        arr = np.asarray(im.convert("L" if im.mode == "L" else "RGB"),
                         dtype=np.float64) / 255.0
        h, w = arr.shape[:2]
        channels = 1 if arr.ndim == 2 else 3
        return Image(Grid2D(w, h), channels, arr)
    return None


def create_app(persist_dir=None):
    """Session service; ``persist_dir`` turns on directory-backed
    persistence (each session re-serialized after landmark edits and
    steps, restored on startup so a UI reload can resume)."""
    from pathlib import Path

    app = FastAPI(title="randersgeo")
    sessions = {}
    if persist_dir is not None:
        persist_dir = Path(persist_dir)
        persist_dir.mkdir(parents=True, exist_ok=True)
        import pickle

        for path in sorted(persist_dir.glob("*.session")):
            try:
                with open(path, "rb") as f:
                    s = pickle.load(f)
                sessions[s.id] = s
            except Exception:
                continue  # stale/corrupt snapshot

    def _persist(s):
        if persist_dir is not None:
            s.persist(persist_dir)

    try:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(CORSMiddleware, allow_origins=["*"],
                           allow_methods=["*"], allow_headers=["*"])
    except ImportError:
        pass

    def _session_or_404(sid):
        s = sessions.get(sid)
        if s is None:
            return None, JSONResponse({"v": 1, "error": "unknown session"},
                                      status_code=404)
        return s, None

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.body()
        if len(body) > MAX_UPLOAD_BYTES:
            return JSONResponse({"v": 1, "error": "image too large"},
                                status_code=413)
        try:
            image = _decode_image(body)
        except Exception:
            image = None
        if image is None:
            return JSONResponse({"v": 1, "error": "unsupported image format"},
                                status_code=415)
        s = Session(image)
        sessions[s.id] = s
        _persist(s)
        return {"v": 1, "id": s.id, "width": image.grid.width,
                "height": image.grid.height, "stage": s.stage}

    @app.put("/sessions/{sid}/config")
    async def put_config(sid: str, request: Request):
        s, err = _session_or_404(sid)
        if err:
            return err
        payload = await request.json()
        with s.lock:
            try:
                d = s.config.to_dict()
                d.update({k: v for k, v in payload.items() if k != "v"})
                s.config = SegmentationConfig.from_dict(d)
            except (ValueError, TypeError) as e:
                return JSONResponse({"v": 1, "error": str(e)},
                                    status_code=422)
            if s.landmarks is not None:
                try:
                    s.reinitialize()
                except RandersGeoError as e:
                    return JSONResponse({"v": 1, "error": str(e)},
                                        status_code=422)
                _persist(s)
                return s.state_payload()
        _persist(s)
        return {"v": 1, "id": s.id, "stage": s.stage,
                "config": s.config.to_dict()}

    @app.put("/sessions/{sid}/landmarks")
    async def put_landmarks(sid: str, request: Request):
        s, err = _session_or_404(sid)
        if err:
            return err
        payload = await request.json()
        pts = payload.get("points", [])
        grid = s.image.grid
        for p in pts:
            if not (len(p) == 2 and grid.contains_point(p)):
                return JSONResponse(
                    {"v": 1, "error": f"point {p} out of bounds"},
                    status_code=422)
        with s.lock:
            try:
                s.landmarks = LandmarkSet(np.asarray(pts, dtype=np.float64))
                s.reinitialize()
            except (ValueError, InitError, RandersGeoError) as e:
                return JSONResponse({"v": 1, "error": str(e)},
                                    status_code=422)
            _persist(s)
            return s.state_payload()

    # plain def: FastAPI serves it from the threadpool, so other requests
    # (and the 409 concurrent-step contract) stay responsive while the
    # solver runs
    @app.post("/sessions/{sid}/step")
    def step(sid: str, n: int = Query(default=1, ge=0)):
        s, err = _session_or_404(sid)
        if err:
            return err
        if s.stage not in (STAGE_INITIALIZED, STAGE_EVOLVING):
            return JSONResponse(
                {"v": 1, "error": f"cannot step in stage {s.stage}"},
                status_code=409)
        if not s.step_lock.acquire(blocking=False):
            return JSONResponse({"v": 1, "error": "step already in flight"},
                                status_code=409)
        try:
            snapshot = copy.deepcopy(s.driver)
            for _ in range(n):
                if s.driver.done:
                    break
                try:
                    s.driver.step()
                except RandersGeoError as e:
                    s.driver = snapshot  # atomic step: keep pre-step state
                    s.stage = STAGE_ERROR
                    s.error = str(e)
                    return JSONResponse({"v": 1, "error": str(e)},
                                        status_code=500)
            if s.driver.state.converged:
                s.stage = STAGE_CONVERGED
            elif s.driver.state.iteration > 0:
                s.stage = STAGE_EVOLVING
            _persist(s)
            return s.state_payload()
        finally:
            s.step_lock.release()

    @app.get("/sessions/{sid}/artifacts/{kind}")
    async def artifact(sid: str, kind: str):
        s, err = _session_or_404(sid)
        if err:
            return err
        if kind not in ARTIFACT_KINDS:
            return JSONResponse({"v": 1, "error": f"unknown kind {kind}"},
                                status_code=404)
        if s.driver is None:
            return JSONResponse(
                {"v": 1, "error": "no artifacts before initialization"},
                status_code=404)
        st = s.driver.state
        if kind == "contour.json":
            return Response(contour_to_json(st.contour).encode(),
                            media_type="application/json")
        if kind == "mask.pgm":
            return Response(mask_to_pgm_bytes(st.mask),
                            media_type="image/x-portable-graymap")
        if kind == "energy.csv":
            return Response(energy_csv_bytes(st.history),
                            media_type="text/csv")
        fields = getattr(s.driver.pipe, "last_fields", {})
        if kind == "tube.pgm":
            td = fields.get("search") or fields.get("tube")
            if td is None:
                return JSONResponse({"v": 1, "error": "tube not computed"},
                                    status_code=404)
            return Response(mask_to_pgm_bytes(td.mask),
                            media_type="image/x-portable-graymap")
        if kind == "xi.rsf1":
            xi = fields.get("xi")
            if xi is None:
                return JSONResponse({"v": 1, "error": "xi not computed"},
                                    status_code=404)
            return Response(
                rsf1_bytes_from_planes(xi.values[None], s.image.grid),
                media_type="application/octet-stream")
        if kind == "omega.rsf1":
            om = fields.get("omega")
            if om is None:
                return JSONResponse({"v": 1, "error": "omega not computed"},
                                    status_code=404)
            planes = np.stack([om.vectors[:, :, 0], om.vectors[:, :, 1]])
            return Response(rsf1_bytes_from_planes(planes, s.image.grid),
                            media_type="application/octet-stream")
        return JSONResponse({"v": 1, "error": "unreachable"},
                            status_code=500)

    app.state.sessions = sessions
    return app


def main():
    import argparse

    import uvicorn

    import os

    p = argparse.ArgumentParser(prog="randersgeo-server")
    p.add_argument("--host", default=os.environ.get("RANDERSGEO_HOST",
                                                    "127.0.0.1"))
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("RANDERSGEO_PORT", "8321")))
    p.add_argument("--persist", default=os.environ.get("RANDERSGEO_PERSIST"),
                   help="directory for session snapshots (resume on restart)")
    args = p.parse_args()
    # generous keep-alive: solver steps block a connection for seconds and
    # pooled client sockets must survive the gaps in between
    uvicorn.run(create_app(persist_dir=args.persist), host=args.host,
                port=args.port, log_level="warning", timeout_keep_alive=300)


if __name__ == "__main__":
    main()
