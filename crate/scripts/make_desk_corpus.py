#!/usr/bin/env python3
"""Build the 24-image desk corpus (256x256 RGB PNG) from photos bundled
with scikit-image, scikit-learn, and matplotlib.

Each source is cropped to a square window (fractions of the shorter side)
and resized with Lanczos filtering.
"""
import os
import sys

import matplotlib
import sklearn
import skimage
from PIL import Image

SK = os.path.join(os.path.dirname(skimage.__file__), "data")
SL = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "images")
MPL = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "sample_data")

# (output name, source path, horizontal anchor 0..1, vertical anchor 0..1, crop scale)
SOURCES = [
    ("astronaut", f"{SK}/astronaut.png", 0.5, 0.5, 1.0),
    ("astronaut_face", f"{SK}/astronaut.png", 0.45, 0.1, 0.5),
    ("coffee_left", f"{SK}/coffee.png", 0.0, 0.5, 1.0),
    ("coffee_right", f"{SK}/coffee.png", 1.0, 0.5, 1.0),
    ("chelsea_left", f"{SK}/chelsea.png", 0.0, 0.5, 1.0),
    ("chelsea_right", f"{SK}/chelsea.png", 1.0, 0.5, 1.0),
    ("rocket_left", f"{SK}/rocket.jpg", 0.0, 0.5, 1.0),
    ("rocket_right", f"{SK}/rocket.jpg", 1.0, 0.5, 1.0),
    ("motorcycle_left", f"{SK}/motorcycle_left.png", 0.0, 0.5, 1.0),
    ("motorcycle_right", f"{SK}/motorcycle_right.png", 1.0, 0.5, 1.0),
    ("china_left", f"{SL}/china.jpg", 0.0, 0.5, 1.0),
    ("china_right", f"{SL}/china.jpg", 1.0, 0.5, 1.0),
    ("flower_left", f"{SL}/flower.jpg", 0.0, 0.5, 1.0),
    ("flower_right", f"{SL}/flower.jpg", 1.0, 0.5, 1.0),
    ("grace_hopper", f"{MPL}/grace_hopper.jpg", 0.5, 0.5, 1.0),
    ("grace_hopper_detail", f"{MPL}/grace_hopper.jpg", 0.5, 0.2, 0.6),
    ("hubble", f"{SK}/hubble_deep_field.jpg", 0.5, 0.5, 1.0),
    ("hubble_detail", f"{SK}/hubble_deep_field.jpg", 0.2, 0.8, 0.4),
    ("ihc", f"{SK}/ihc.png", 0.5, 0.5, 1.0),
    ("retina", f"{SK}/retina.jpg", 0.5, 0.5, 0.6),
    ("camera", f"{SK}/camera.png", 0.5, 0.5, 1.0),
    ("coins", f"{SK}/coins.png", 0.5, 0.5, 1.0),
    ("brick", f"{SK}/brick.png", 0.5, 0.5, 1.0),
    ("colorwheel", f"{SK}/color.png", 0.5, 0.5, 1.0),
]


def crop_square(img, ax, ay, scale):
    w, h = img.size
    side = int(min(w, h) * scale)
    x0 = int(round((w - side) * ax))
    y0 = int(round((h - side) * ay))
    return img.crop((x0, y0, x0 + side, y0 + side))


def main(out_dir, size=256):
    os.makedirs(out_dir, exist_ok=True)
    for i, (name, path, ax, ay, scale) in enumerate(SOURCES):
        img = Image.open(path).convert("RGB")
        img = crop_square(img, ax, ay, scale).resize((size, size), Image.LANCZOS)
        img.save(os.path.join(out_dir, f"{i:02d}_{name}.png"), optimize=True)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/data/desk_corpus")
