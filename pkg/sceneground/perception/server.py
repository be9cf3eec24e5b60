"""
FastAPI perception server.
Serves any Perception bundle (fixtures by default) over the wire contract the HTTP clients speak.
"""
import argparse
import json
import logging
from contextlib import asynccontextmanager
from typing import Any, Dict, Optional

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import JSONResponse, Response

from sceneground import __version__
from sceneground.errors import PerceptionError, SegmentationError
from sceneground.perception.base import Perception
from sceneground.perception.http import decode_png, encode_png
from sceneground.perception.models import pair_key

logger = logging.getLogger(__name__)


def _params(raw: str) -> Dict[str, Any]:
    try:
        params = json.loads(raw)
    except json.JSONDecodeError as e:
        raise HTTPException(status_code=422, detail=f"params is not JSON: {e}")
    if not isinstance(params, dict):
        raise HTTPException(status_code=422, detail="params must be a JSON object")
    return params


async def _image(upload: UploadFile):
    try:
        image = decode_png(await upload.read())
    except PerceptionError as e:
        raise HTTPException(status_code=422, detail=str(e))
    if image.ndim == 2:
        image = image[:, :, None].repeat(3, axis=2)
    return image[:, :, :3]


def create_app(perception: Optional[Perception] = None) -> FastAPI:
    """
    Build the app around one perception bundle.

    The bundle is closed on shutdown.
    """

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        logger.info("Starting perception server...")
        yield
        logger.info("Shutting down perception server...")
        if app.state.perception is not None:
            await app.state.perception.close()

    app = FastAPI(
        title="sceneground perception",
        description="Detection, segmentation and matching endpoints",
        version=__version__,
        lifespan=lifespan,
    )
    app.state.perception = perception

    def _require() -> Perception:
        if app.state.perception is None:
            raise HTTPException(status_code=503, detail="no perception backend configured")
        return app.state.perception

    # =========================================================================
    # HEALTH ENDPOINTS
    # =========================================================================

    @app.get("/")
    async def root():
        return {"service": "sceneground perception", "version": __version__, "status": "running"}

    @app.get("/health")
    async def health():
        ready = app.state.perception is not None
        return {
            "status": "healthy" if ready else "degraded",
            "api": "running",
            "perception": "configured" if ready else "missing",
        }

    @app.get("/health/live")
    async def health_live():
        return {"status": "alive"}

    @app.get("/health/ready")
    async def health_ready():
        if app.state.perception is not None:
            return {"status": "ready"}
        return JSONResponse({"status": "not_ready"}, status_code=503)

    # =========================================================================
    # PERCEPTION ENDPOINTS
    # =========================================================================

    @app.post("/detect")
    async def detect(image: UploadFile = File(...), params: str = Form(...)):
        backend = _require()
        p = _params(params)
        frame_id = str(p.get("frame_id", ""))
        try:
            detections = await backend.detector.detect(frame_id, await _image(image), p.get("classes") or [])
        except PerceptionError as e:
            raise HTTPException(status_code=502, detail=str(e))
        return {frame_id: [d.to_fixture() for d in detections]}

    @app.post("/segment")
    async def segment(image: UploadFile = File(...), params: str = Form(...)):
        backend = _require()
        p = _params(params)
        try:
            box = tuple(float(x) for x in p["box"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(status_code=422, detail="params.box must be [x0, y0, x1, y1]")
        try:
            mask = await backend.segmenter.segment(str(p.get("frame_id", "")), await _image(image), box)
        except SegmentationError as e:
            raise HTTPException(status_code=404, detail=str(e))
        except PerceptionError as e:
            raise HTTPException(status_code=502, detail=str(e))
        return Response(content=encode_png(mask.bitmap.astype("uint8") * 255), media_type="image/png")

    @app.post("/match")
    async def match(source: UploadFile = File(...), target: UploadFile = File(...), params: str = Form(...)):
        backend = _require()
        p = _params(params)
        source_frame, target_frame = str(p.get("source_frame", "")), str(p.get("target_frame", ""))
        try:
            pairs = await backend.matcher.match(source_frame, await _image(source), target_frame, await _image(target))
        except PerceptionError as e:
            raise HTTPException(status_code=502, detail=str(e))
        return {pair_key(source_frame, target_frame): pairs.to_fixture()}

    return app


def main(argv: Optional[list] = None) -> None:
    """Serve fixture perception for one scene: python -m sceneground.perception.server <root> <scene_id>."""
    import uvicorn

    from sceneground.perception.fixtures import load_fixture_perception

    parser = argparse.ArgumentParser(description="Serve fixture perception over HTTP")
    parser.add_argument("fixtures_root")
    parser.add_argument("scene_id")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO)
    app = create_app(load_fixture_perception(args.fixtures_root, args.scene_id))
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
