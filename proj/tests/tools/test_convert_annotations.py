import json
import sys
import tempfile
import unittest
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tools"))
import convert_annotations as conv  # noqa: E402

DATASET = {
    "images": [
        {"id": 1, "file_name": "frames/P01_01/frame_0000000120.png", "width": 160, "height": 120},
        {"id": 2, "file_name": "frames/P02_03/frame_0000002400.jpg", "width": 160, "height": 120},
    ],
    "categories": [{"id": 1, "name": "hand"}, {"id": 2, "name": "apple"}],
}


class ConvertTest(unittest.TestCase):
    def test_detections_are_clipped_and_grouped(self):
        results = [
            {"image_id": 1, "category_id": 1, "bbox": [150, 100, 30, 40], "score": 0.9},
            {"image_id": 1, "category_id": 2, "bbox": [10, 20, 5, 6], "score": 0.4},
            {"image_id": 2, "category_id": 2, "bbox": [170, 10, 5, 5], "score": 0.8},
        ]
        out = conv.convert(DATASET, results, "detections", conv.DEFAULT_PATTERN, {"hand"})
        self.assertEqual(set(out), {"P01_01"})
        recs = out["P01_01"]["120"]
        self.assertEqual(recs[0], {"kind": "hand", "box": [150.0, 100.0, 160.0, 120.0], "score": 0.9})
        self.assertEqual(recs[1]["kind"], "object")
        self.assertEqual(recs[1]["box"], [10.0, 20.0, 15.0, 26.0])

    def test_segmentations_become_polygon_lists(self):
        results = [{"image_id": 2, "category_id": 2, "score": 0.7,
                    "segmentation": [[0, 0, 10, 0, 10, 200], [1, 1, 2, 2]]}]
        out = conv.convert(DATASET, results, "segmentations", conv.DEFAULT_PATTERN, {"hand"})
        rec = out["P02_03"]["2400"][0]
        self.assertEqual(rec["category"], "apple")
        self.assertEqual(rec["polygons"], [[[0.0, 0.0], [10.0, 0.0], [10.0, 120.0]]])

    def test_rle_is_rejected(self):
        results = [{"image_id": 1, "category_id": 2, "score": 0.7,
                    "segmentation": {"counts": "abc", "size": [120, 160]}}]
        with self.assertRaises(ValueError):
            conv.convert(DATASET, results, "segmentations", conv.DEFAULT_PATTERN, {"hand"})

    def test_cli_writes_one_file_per_video(self):
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            (tmp / "ds.json").write_text(json.dumps(DATASET))
            (tmp / "res.json").write_text(json.dumps(
                [{"image_id": 2, "category_id": 1, "bbox": [1, 2, 3, 4], "score": 0.5}]))
            rc = conv.main(["detections", "--dataset", str(tmp / "ds.json"),
                            "--results", str(tmp / "res.json"), "--out", str(tmp / "out")])
            self.assertEqual(rc, 0)
            doc = json.loads((tmp / "out" / "P02_03.json").read_text())
            self.assertEqual(doc, {"2400": [{"kind": "hand", "box": [1.0, 2.0, 4.0, 6.0], "score": 0.5}]})


if __name__ == "__main__":
    unittest.main()
