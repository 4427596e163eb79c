#!/usr/bin/env python3
"""Convert COCO-style model outputs into effectcast's per-video annotation JSON.

Input is a COCO dataset file (for the image list and category names) plus a
COCO results file produced by a detector or an instance segmenter. Output is
one JSON document per video, mapping frame index to a list of records:

  detections:     {"kind": "hand"|"object", "box": [x0, y0, x1, y1], "score": s}
  segmentations:  {"category": name, "polygons": [[[x, y], ...], ...], "score": s}

Video id and frame index are recovered from each image's file_name with a
regular expression that has named groups `video` and `frame`.

Boxes are clipped to the image bounds and dropped if nothing is left.
Polygon vertices are clamped the same way. RLE masks are not supported.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from collections import defaultdict
from pathlib import Path

DEFAULT_PATTERN = r"(?P<video>[^/]+)/frame_(?P<frame>\d+)\.(?:png|jpe?g)$"


def clip(value: float, upper: float) -> float:
    return min(max(value, 0.0), upper)


def parse_images(dataset: dict, pattern: re.Pattern[str]) -> dict[int, tuple[str, int, int, int]]:
    images = {}
    for img in dataset.get("images", []):
        m = pattern.search(img["file_name"])
        if not m:
            raise ValueError(f"file_name does not match pattern: {img['file_name']}")
        images[img["id"]] = (m["video"], int(m["frame"]), int(img["width"]), int(img["height"]))
    return images


def detection_record(result: dict, width: int, height: int, hand_categories: set[str],
                     names: dict[int, str]) -> dict | None:
    x, y, w, h = (float(v) for v in result["bbox"])
    x0, y0 = clip(x, width), clip(y, height)
    x1, y1 = clip(x + w, width), clip(y + h, height)
    if x1 <= x0 or y1 <= y0:
        return None
    name = names.get(result["category_id"], str(result["category_id"]))
    return {
        "kind": "hand" if name in hand_categories else "object",
        "box": [x0, y0, x1, y1],
        "score": float(result["score"]),
    }


def segmentation_record(result: dict, width: int, height: int,
                        names: dict[int, str]) -> dict | None:
    seg = result.get("segmentation")
    if not isinstance(seg, list):
        raise ValueError("only polygon segmentations are supported (got RLE)")
    polygons = []
    for flat in seg:
        pts = [[clip(float(flat[i]), width), clip(float(flat[i + 1]), height)]
               for i in range(0, len(flat) - 1, 2)]
        if len(pts) >= 3:
            polygons.append(pts)
    if not polygons:
        return None
    return {
        "category": names.get(result["category_id"], str(result["category_id"])),
        "polygons": polygons,
        "score": float(result["score"]),
    }


def convert(dataset: dict, results: list[dict], kind: str, pattern: str,
            hand_categories: set[str]) -> dict[str, dict[str, list[dict]]]:
    images = parse_images(dataset, re.compile(pattern))
    names = {c["id"]: c["name"] for c in dataset.get("categories", [])}
    videos: dict[str, dict[str, list[dict]]] = defaultdict(lambda: defaultdict(list))
    for result in results:
        if result["image_id"] not in images:
            raise ValueError(f"result references unknown image_id {result['image_id']}")
        video, frame, width, height = images[result["image_id"]]
        if kind == "detections":
            record = detection_record(result, width, height, hand_categories, names)
        else:
            record = segmentation_record(result, width, height, names)
        if record is not None:
            videos[video][str(frame)].append(record)
    return {v: dict(frames) for v, frames in videos.items()}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("kind", choices=["detections", "segmentations"])
    parser.add_argument("--dataset", required=True, type=Path,
                        help="COCO dataset JSON with images and categories")
    parser.add_argument("--results", required=True, type=Path, help="COCO results JSON")
    parser.add_argument("--out", required=True, type=Path,
                        help="output directory; one <video>.json is written per video")
    parser.add_argument("--pattern", default=DEFAULT_PATTERN,
                        help="regex with named groups 'video' and 'frame' (default: %(default)s)")
    parser.add_argument("--hand-category", action="append", default=None,
                        help="category name treated as a hand (repeatable; default: hand)")
    args = parser.parse_args(argv)

    try:
        dataset = json.loads(args.dataset.read_text())
        results = json.loads(args.results.read_text())
        videos = convert(dataset, results, args.kind, args.pattern,
                         set(args.hand_category or ["hand"]))
    except (OSError, ValueError, KeyError) as exc:
        print(f"convert_annotations: {exc}", file=sys.stderr)
        return 1

    args.out.mkdir(parents=True, exist_ok=True)
    for video, frames in sorted(videos.items()):
        (args.out / f"{video}.json").write_text(json.dumps(frames, indent=1) + "\n")
    print(f"wrote {len(videos)} file(s) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
