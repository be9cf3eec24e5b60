"""
HTTP perception clients.
Each POSTs a multipart PNG upload plus a JSON "params" form field; responses mirror the fixture schema.
"""
import io
import json
import logging
from typing import Any, Dict, List, Optional, Sequence

import httpx
import numpy as np
from PIL import Image

from sceneground.errors import PerceptionError, SegmentationError
from sceneground.perception.base import Detector, Matcher, Perception, Segmenter
from sceneground.perception.models import Box, Detection2D, MatchPairs, pair_key
from sceneground.scene.models import Mask2D

logger = logging.getLogger(__name__)


def encode_png(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(array)).save(buffer, format="PNG")
    return buffer.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    try:
        return np.asarray(Image.open(io.BytesIO(data)))
    except OSError as e:
        raise PerceptionError(f"response is not a PNG image ({e})") from e


class _HttpClient:
    """Shared httpx.AsyncClient handling; an injected client is never closed here."""

    def __init__(self, base_url: str, timeout_s: float = 60.0, client: Optional[httpx.AsyncClient] = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = httpx.Timeout(timeout_s)
        self._client = client
        self._owns_client = client is None

    def _get_client(self) -> httpx.AsyncClient:
        if self._client is None or self._client.is_closed:
            self._client = httpx.AsyncClient(timeout=self.timeout)
            self._owns_client = True
        return self._client

    async def _post(self, path: str, files: Dict[str, bytes], params: Dict[str, Any]) -> httpx.Response:
        client = self._get_client()
        try:
            response = await client.post(
                f"{self.base_url}{path}",
                files={name: (f"{name}.png", data, "image/png") for name, data in files.items()},
                data={"params": json.dumps(params)},
            )
        except httpx.HTTPError as e:
            raise PerceptionError(f"{path} request failed: {e}") from e
        return response

    async def close(self) -> None:
        if self._owns_client and self._client is not None and not self._client.is_closed:
            await self._client.aclose()


class HttpDetector(_HttpClient, Detector):
    async def detect(self, frame_id: str, image: np.ndarray, classes: Sequence[str]) -> List[Detection2D]:
        response = await self._post("/detect", {"image": encode_png(image)}, {"frame_id": frame_id, "classes": list(classes)})
        if response.status_code != 200:
            raise PerceptionError(f"detector error {response.status_code}: {response.text}")
        payload = response.json()
        try:
            return [Detection2D.from_fixture(frame_id, r) for r in payload.get(frame_id, [])]
        except (KeyError, TypeError, ValueError) as e:
            raise PerceptionError(f"malformed detector response ({e})") from e


class HttpSegmenter(_HttpClient, Segmenter):
    async def segment(self, frame_id: str, image: np.ndarray, box: Box) -> Mask2D:
        response = await self._post("/segment", {"image": encode_png(image)}, {"frame_id": frame_id, "box": list(box)})
        if response.status_code == 404:
            raise SegmentationError(f"segmenter found no mask for frame {frame_id} box {list(box)}")
        if response.status_code != 200:
            raise PerceptionError(f"segmenter error {response.status_code}: {response.text}")
        bitmap = decode_png(response.content)
        if bitmap.ndim == 3:
            bitmap = bitmap.max(axis=2)
        mask = Mask2D(frame_id=frame_id, bitmap=bitmap > 0)
        if mask.is_empty:
            raise SegmentationError(f"segmenter returned an empty mask for frame {frame_id}")
        return mask


class HttpMatcher(_HttpClient, Matcher):
    async def match(
        self,
        source_frame: str,
        source_image: np.ndarray,
        target_frame: str,
        target_image: np.ndarray,
    ) -> MatchPairs:
        response = await self._post(
            "/match",
            {"source": encode_png(source_image), "target": encode_png(target_image)},
            {"source_frame": source_frame, "target_frame": target_frame},
        )
        if response.status_code != 200:
            raise PerceptionError(f"matcher error {response.status_code}: {response.text}")
        rows = response.json().get(pair_key(source_frame, target_frame), [])
        return MatchPairs(source_frame=source_frame, target_frame=target_frame, pairs=np.asarray(rows, dtype=np.float64))


def http_perception(
    detector_url: str,
    segmenter_url: str,
    matcher_url: str,
    timeout_s: float = 60.0,
    client: Optional[httpx.AsyncClient] = None,
) -> Perception:
    return Perception(
        detector=HttpDetector(detector_url, timeout_s, client),
        segmenter=HttpSegmenter(segmenter_url, timeout_s, client),
        matcher=HttpMatcher(matcher_url, timeout_s, client),
    )
