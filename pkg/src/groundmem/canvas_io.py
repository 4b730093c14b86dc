"""Canvas <-> raster conversions (numpy arrays and PNG bytes)."""

from __future__ import annotations

import io
import json

import numpy as np
from PIL import Image

from .core import Canvas, CanvasObject, Outline


def canvas_to_array(canvas: Canvas) -> np.ndarray:
    arr = np.asarray(canvas.pixels, dtype=np.uint8)
    return arr.reshape(canvas.height, canvas.width, 3)


def canvas_from_array(arr: np.ndarray, registry=()) -> Canvas:
    h, w, _ = arr.shape
    pixels = tuple(tuple(int(c) for c in px) for px in arr.reshape(-1, 3))
    return Canvas(width=w, height=h, pixels=pixels, object_registry=tuple(registry))


def canvas_to_png_bytes(canvas: Canvas) -> bytes:
    img = Image.fromarray(canvas_to_array(canvas), mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def canvas_from_png_bytes(data: bytes, registry=()) -> Canvas:
    img = Image.open(io.BytesIO(data)).convert("RGB")
    return canvas_from_array(np.asarray(img, dtype=np.uint8), registry)


def registry_to_json(registry) -> str:
    return json.dumps(
        [
            {
                "name": obj.name,
                "outline": obj.outline.value,
                "box": list(obj.box),
                "attributes": list(obj.attributes),
            }
            for obj in registry
        ],
        indent=2,
    )


def registry_from_json(text: str) -> tuple[CanvasObject, ...]:
    return tuple(
        CanvasObject(
            name=entry["name"],
            outline=Outline(entry["outline"]),
            box=tuple(entry["box"]),
            attributes=tuple(entry["attributes"]),
        )
        for entry in json.loads(text)
    )
