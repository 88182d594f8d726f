#!/usr/bin/env python3
# Copyright 2026 The RegionEdit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerate the synthetic benchmark cases under data/sample_cases."""
import json
import pathlib

from PIL import Image, ImageDraw

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data" / "sample_cases"
SIZE = 64


def background(kind):
    img = Image.new("RGB", (SIZE, SIZE), (90, 140, 200))
    d = ImageDraw.Draw(img)
    d.rectangle([0, 40, SIZE - 1, SIZE - 1], fill=(70, 150, 60))
    if kind == "sun":
        d.ellipse([44, 4, 60, 20], fill=(240, 220, 40))
    elif kind == "house":
        d.rectangle([8, 24, 30, 44], fill=(150, 80, 40))
    elif kind == "checker":
        for y in range(0, SIZE, 16):
            for x in range(0, SIZE, 16):
                if (x // 16 + y // 16) % 2:
                    d.rectangle([x, y, x + 15, y + 15], fill=(200, 200, 200))
    return img


def mask(boxes):
    m = Image.new("L", (SIZE, SIZE), 0)
    d = ImageDraw.Draw(m)
    for b in boxes:
        d.rectangle(b, fill=255)
    return m


CASES = {
    "overlap": ("sun", [
        ([[8, 8, 39, 39]], "make it red", 1, 1),
        ([[24, 24, 55, 55]], "turn it blue", 2, 2),
    ]),
    "intersection": ("house", [
        ([[0, 24, 63, 39]], "paint a yellow stripe", 1, 1),
        ([[24, 0, 39, 63]], "add a purple pole", 2, 2),
    ]),
    "shared_group": ("plain", [
        ([[8, 8, 23, 23]], "add a red ball", 1, 1),
        ([[40, 8, 55, 23]], "add a red ball", 1, 1),
    ]),
    "shared_boundary": ("checker", [
        ([[0, 16, 31, 47]], "make it orange", 1, 1),
        ([[32, 16, 63, 47]], "make it cyan", 1, 2),
    ]),
    "single": ("sun", [
        ([[16, 16, 47, 47]], "turn the sky magenta", 1, 1),
    ]),
}


def main():
    for case_id, (kind, edits) in CASES.items():
        d = ROOT / case_id
        d.mkdir(parents=True, exist_ok=True)
        background(kind).save(d / "image.png")
        manifest = {"id": case_id, "image": "image.png", "edits": [], "sampler": {"steps": 10, "blend_stop": 1}}
        for i, (boxes, prompt, order, group) in enumerate(edits):
            name = f"mask{i}.png"
            mask(boxes).save(d / name)
            manifest["edits"].append({"mask": name, "prompt": prompt, "order": order, "group": group})
        (d / "case.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
