"""Record the shared conformance corpus: python -m clip_service.record_corpus OUTDIR.

Writes the checked-in test photos, replays each request against the live app,
and freezes the responses as golden JSON. Goldens are tied to the model id
reported by /v1/health; re-record if the model ever changes.
"""

from __future__ import annotations

import base64
import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient
from PIL import Image, ImageDraw

from .app import create_app


def draw_kitchen(path: Path) -> None:
    """A bright warm interior: cream walls, wood counter, steel appliance."""
    img = Image.new("RGB", (128, 128), (244, 239, 227))
    d = ImageDraw.Draw(img)
    d.rectangle([0, 88, 128, 128], fill=(200, 168, 124))  # wood counter
    d.rectangle([8, 20, 52, 86], fill=(226, 219, 205))  # cupboard
    d.rectangle([10, 22, 50, 52], fill=(248, 248, 242))
    d.rectangle([86, 30, 122, 88], fill=(182, 187, 192))  # refrigerator
    d.rectangle([88, 34, 120, 40], fill=(206, 210, 214))
    d.rectangle([58, 60, 80, 86], fill=(252, 250, 244))  # sink highlight
    img.save(path)


def draw_garage(path: Path) -> None:
    """A dim concrete interior: gray walls, dark floor, a shadowed door."""
    img = Image.new("RGB", (128, 128), (96, 96, 102))
    d = ImageDraw.Draw(img)
    d.rectangle([0, 86, 128, 128], fill=(66, 66, 72))  # dark floor
    d.rectangle([20, 16, 108, 84], fill=(118, 118, 124))  # rolling door
    for y in range(20, 84, 12):
        d.line([(20, y), (108, y)], fill=(88, 88, 94), width=3)
    d.rectangle([4, 90, 36, 112], fill=(52, 52, 58))  # clutter shadow
    img.save(path)


def record(out_dir: Path) -> list[dict]:
    images = out_dir / "images"
    cases_dir = out_dir / "cases"
    images.mkdir(parents=True, exist_ok=True)
    cases_dir.mkdir(parents=True, exist_ok=True)
    draw_kitchen(images / "kitchen.png")
    draw_garage(images / "garage.png")

    kitchen_b64 = base64.b64encode((images / "kitchen.png").read_bytes()).decode("ascii")
    garage_b64 = base64.b64encode((images / "garage.png").read_bytes()).decode("ascii")

    cases = [
        {
            "name": "kitchen_vs_garage_b64",
            "request": {
                "image": kitchen_b64,
                "candidates": ["kitchen", "garage"],
                "prompt": "a photo of {}",
            },
        },
        {
            "name": "kitchen_rooms_by_path",
            "request": {
                "image": {"path": str(images / "kitchen.png")},
                "candidates": ["kitchen", "garage", "bedroom", "bathroom", "hallway"],
                "prompt": "a photo of {}",
            },
        },
        {
            "name": "garage_vs_kitchen_b64",
            "request": {
                "image": garage_b64,
                "candidates": ["garage", "kitchen"],
                "prompt": "a photo of {}",
            },
        },
        {
            "name": "kitchen_objects_b64",
            "request": {
                "image": kitchen_b64,
                "candidates": ["table", "refrigerator", "television", "plant"],
                "prompt": "a photo of {}",
            },
        },
        {
            "name": "single_candidate",
            "request": {
                "image": garage_b64,
                "candidates": ["kitchen"],
                "prompt": "a photo of {}",
            },
        },
    ]

    app = create_app()
    recorded = []
    with TestClient(app) as client:
        model_id = client.get("/v1/health").json()["model"]
        for case in cases:
            resp = client.post("/v1/score", json=case["request"])
            resp.raise_for_status()
            payload = {
                "name": case["name"],
                "model": model_id,
                "request": case["request"],
                "response": resp.json(),
            }
            # path-based requests replay on other machines via this relative form
            if isinstance(case["request"]["image"], dict):
                payload["request_image_relpath"] = "images/kitchen.png"
            target = cases_dir / f"{case['name']}.json"
            target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            recorded.append(payload)
    return recorded


def main(argv=None) -> int:
    args = argv if argv is not None else sys.argv[1:]
    out = Path(args[0]) if args else Path("conformance")
    recorded = record(out)
    for case in recorded:
        print(f"recorded {case['name']}: scores {case['response']['scores']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
