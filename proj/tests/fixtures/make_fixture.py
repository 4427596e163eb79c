#!/usr/bin/env python3
"""Regenerate the mini dataset under tests/fixtures/mini.

Three action instances in three videos, each with a start and a stop frame,
authored hand/object detections and segmentation polygons, an action-effect
pairs file, a scripted completion table and a run configuration.

    python3 tests/fixtures/make_fixture.py
"""

import csv
import json
from pathlib import Path

from PIL import Image, ImageDraw

ROOT = Path(__file__).resolve().parent / "mini"
W, H = 160, 120

INSTANCES = [
    # narration_id, participant, video, start, stop, verb, noun
    ("P01_01_12", "P01", "P01_01", 120, 180, "cut", "apple"),
    ("P02_03_40", "P02", "P02_03", 2400, 2460, "add", "chicken"),
    ("P03_05_7", "P03", "P03_05", 75, 150, "remove", "lid"),
]


def counter(draw):
    draw.rectangle([0, 0, W, H], fill=(196, 170, 132))
    for y in range(0, H, 12):
        draw.line([0, y, W, y], fill=(184, 158, 120))
    draw.rectangle([0, 0, W, 28], fill=(222, 224, 228))


def hand(draw, x, y):
    draw.ellipse([x, y, x + 26, y + 20], fill=(233, 190, 160), outline=(180, 130, 100))


def frame_apple(stop):
    img = Image.new("RGB", (W, H))
    d = ImageDraw.Draw(img)
    counter(d)
    d.rectangle([40, 70, 120, 110], fill=(150, 100, 60))  # board
    if not stop:
        d.ellipse([66, 64, 94, 92], fill=(200, 30, 40))
    else:
        d.pieslice([58, 66, 86, 94], 90, 270, fill=(240, 230, 200), outline=(200, 30, 40))
        d.pieslice([74, 66, 102, 94], 270, 90, fill=(240, 230, 200), outline=(200, 30, 40))
    d.polygon([(100, 60), (140, 50), (142, 54), (102, 66)], fill=(170, 175, 180))  # knife
    hand(d, 118, 44)
    hand(d, 30, 62)
    return img


def frame_chicken(stop):
    img = Image.new("RGB", (W, H))
    d = ImageDraw.Draw(img)
    counter(d)
    d.ellipse([30, 56, 110, 112], fill=(60, 60, 66))  # pot
    d.ellipse([38, 62, 102, 104], fill=(150, 120, 60))  # stew
    d.ellipse([56, 74, 70, 84], fill=(230, 200, 90))  # potato
    if stop:
        for cx, cy in ((78, 80), (86, 90), (64, 92)):
            d.ellipse([cx - 6, cy - 4, cx + 6, cy + 4], fill=(240, 220, 190))
    else:
        d.ellipse([112, 40, 140, 60], fill=(240, 220, 190))  # chicken on a plate
    hand(d, 118, 30)
    return img


def frame_lid(stop):
    img = Image.new("RGB", (W, H))
    d = ImageDraw.Draw(img)
    counter(d)
    d.rectangle([52, 60, 108, 108], fill=(120, 140, 160))  # jar
    if stop:
        d.ellipse([114, 70, 150, 84], fill=(90, 90, 96))
        hand(d, 120, 56)
    else:
        d.rectangle([50, 52, 110, 62], fill=(90, 90, 96))
        hand(d, 70, 34)
    return img


FRAMES = {"P01_01": frame_apple, "P02_03": frame_chicken, "P03_05": frame_lid}

DETECTIONS = {
    "P01_01": {
        120: [
            {"kind": "hand", "box": [118, 44, 145, 65], "score": 0.97},
            {"kind": "hand", "box": [30, 62, 57, 83], "score": 0.91},
            {"kind": "object", "box": [66, 64, 95, 93], "score": 0.88},
            {"kind": "object", "box": [100, 50, 143, 67], "score": 0.1},
            {"kind": "object", "box": [2, 2, 20, 14], "score": 0.04},
        ],
    },
    "P02_03": {
        2400: [
            {"kind": "hand", "box": [118, 30, 145, 51], "score": 0.95},
            {"kind": "object", "box": [112.4, 40, 140.6, 60.2], "score": 0.82},
            {"kind": "object", "box": [30, 56, 111, 113], "score": 0.35},
        ],
    },
    "P03_05": {
        75: [
            {"kind": "hand", "box": [70, 34, 97, 55], "score": 0.93},
            {"kind": "object", "box": [50, 52, 111, 63], "score": 0.79},
        ],
    },
}

SEGMENTATIONS = {
    "P01_01": {
        120: [
            {"category": "apple", "score": 0.9,
             "polygons": [[[80, 63], [95, 70], [95, 86], [80, 93], [65, 86], [65, 70]]]},
            {"category": "hand", "score": 0.9,
             "polygons": [[[118, 54], [131, 44], [145, 54], [131, 65]]]},
        ],
    },
    "P02_03": {
        2400: [
            {"category": "pot", "score": 0.9,
             "polygons": [[[30, 84], [42, 62], [70, 56], [98, 62], [110, 84],
                           [98, 106], [70, 112], [42, 106]]]},
            {"category": "chicken", "score": 0.86,
             "polygons": [[[112, 50], [126, 40], [140, 50], [126, 60]]]},
            {"category": "potato", "score": 0.7,
             "polygons": [[[56, 79], [63, 74], [70, 79], [63, 84]]]},
        ],
    },
    "P03_05": {
        75: [
            {"category": "lid", "score": 0.88,
             "polygons": [[[50, 52], [110, 52], [110, 62], [50, 62]]]},
            {"category": "jar", "score": 0.8,
             "polygons": [[[52, 62], [108, 62], [108, 108], [52, 108]]]},
        ],
    },
}

PAIRS = [
    ("open fridge", "The fridge door is open and the shelves are visible."),
    ("wash plate", "The plate is clean and wet."),
    ("peel potato", "The potato is peeled and the skin is on the board."),
    ("pour water", "The glass is full of water."),
    ("close drawer", "The drawer is shut."),
    ("put pan", "The pan is on the hob."),
    ("crack egg", "The egg is broken into the bowl."),
    ("slice bread", "The bread is cut into slices."),
    ("turn-on tap", "Water is running from the tap."),
    ("stir soup", "The soup is mixed in the pot."),
]

# Continuations start with a space, the way a completion model continues
# "Effect:". The second line checks that only the first line is kept.
SCRIPT = [
    ("cut apple", " Apple is cut in half with a knife\\n\\nAction: wash knife"),
    ("add chicken", " After add chicken, there are now chicken in the pot."),
    ("remove lid", " The jar is open and the lid is beside it.\\nextra line"),
]

CONFIG = {
    "dataset": {
        "actions": "actions.csv",
        "frames_dir": "frames",
        "detections_dir": "detections",
        "segmentations_dir": "segmentations",
        "pairs": "pairs.tsv",
    },
    "completion": {"kind": "scripted", "script": "completions.tsv"},
    "backend": {"id": "mock"},
    "seed": 7,
    "output_dir": "out",
}


def main():
    ROOT.mkdir(parents=True, exist_ok=True)
    with open(ROOT / "actions.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["narration_id", "participant_id", "video_id", "narration",
                    "start_frame", "stop_frame", "verb", "noun"])
        for nid, part, vid, start, stop, verb, noun in INSTANCES:
            w.writerow([nid, part, vid, f"{verb} the {noun}", start, stop, verb, noun])

    for nid, part, vid, start, stop, verb, noun in INSTANCES:
        d = ROOT / "frames" / vid
        d.mkdir(parents=True, exist_ok=True)
        FRAMES[vid](False).save(d / f"frame_{start:010d}.png", optimize=True)
        FRAMES[vid](True).save(d / f"frame_{stop:010d}.png", optimize=True)

    for sub, table in (("detections", DETECTIONS), ("segmentations", SEGMENTATIONS)):
        (ROOT / sub).mkdir(exist_ok=True)
        for vid, frames in table.items():
            doc = {str(k): v for k, v in frames.items()}
            (ROOT / sub / f"{vid}.json").write_text(json.dumps(doc, indent=1) + "\n")

    with open(ROOT / "pairs.tsv", "w") as f:
        f.write("# action<TAB>effect\n")
        for a, e in PAIRS:
            f.write(f"{a}\t{e}\n")
    with open(ROOT / "completions.tsv", "w") as f:
        for a, c in SCRIPT:
            f.write(f"{a}\t{c}\n")
    (ROOT / "config.json").write_text(json.dumps(CONFIG, indent=2) + "\n")

    write_adapter_replies()


def write_adapter_replies():
    """Canned replies for the adapter replay stub."""
    import base64
    import io

    d = ROOT / "adapter"
    d.mkdir(exist_ok=True)
    # A full 64x64 image that differs everywhere from any fixture frame: the
    # adapter must restore the preserve region itself.
    img = Image.new("RGB", (64, 64))
    px = img.load()
    for y in range(64):
        for x in range(64):
            px[x, y] = ((x * 4) % 256, (y * 4) % 256, ((x + y) * 2) % 256)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    (d / "reply_ok.json").write_text(json.dumps(
        {"image_b64": base64.b64encode(buf.getvalue()).decode(),
         "meta": {"model": "replay", "steps": 100}}) + "\n")

    small = Image.new("RGB", (32, 32), (10, 200, 10))
    buf = io.BytesIO()
    small.save(buf, format="PNG")
    (d / "reply_wrong_size.json").write_text(json.dumps(
        {"image_b64": base64.b64encode(buf.getvalue()).decode(), "meta": {}}) + "\n")


if __name__ == "__main__":
    main()
