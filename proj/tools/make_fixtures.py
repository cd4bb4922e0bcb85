"""Regenerates the small procedural fixture images and point clouds in fixtures/.

The images are synthetic (no third-party artwork): a simple landscape as the
content image and a swirling multi-colour texture as the style image.
"""
import pathlib

import numpy as np
from PIL import Image

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def content_image(size):
    y, x = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.zeros((size, size, 3))
    sky = np.stack([0.45 + 0.3 * y, 0.65 + 0.2 * y, 0.95 - 0.1 * y], axis=-1)
    img[:] = sky
    ground = y > 0.62 + 0.06 * np.sin(6.0 * x)
    img[ground] = np.stack([0.25 + 0.1 * x, 0.55 - 0.2 * y, 0.2 + 0.0 * x], axis=-1)[ground]
    sun = (x - 0.75) ** 2 + (y - 0.22) ** 2 < 0.012
    img[sun] = [1.0, 0.85, 0.3]
    wall = (x > 0.18) & (x < 0.48) & (y > 0.5) & (y < 0.8)
    img[wall] = [0.8, 0.3, 0.25]
    roof = (y <= 0.5) & (y > 0.32) & (np.abs(x - 0.33) < (y - 0.32) * 0.95)
    img[roof] = [0.35, 0.2, 0.15]
    door = (x > 0.29) & (x < 0.37) & (y > 0.64) & (y < 0.8)
    img[door] = [0.25, 0.15, 0.1]
    return img


def style_image(size):
    y, x = np.mgrid[0:size, 0:size] / (size - 1)
    cx, cy = x - 0.5, y - 0.5
    r = np.sqrt(cx ** 2 + cy ** 2)
    theta = np.arctan2(cy, cx)
    swirl = np.sin(10.0 * r * 2 * np.pi / 3 + 3.0 * theta)
    strokes = np.sin(28.0 * (x + 0.35 * np.sin(7.0 * y)))
    t = 0.5 + 0.35 * swirl + 0.15 * strokes
    palette = np.array([[0.05, 0.10, 0.35], [0.10, 0.35, 0.75], [0.95, 0.85, 0.25], [0.9, 0.45, 0.1]])
    idx = np.clip(t, 0, 0.999) * (len(palette) - 1)
    lo = np.floor(idx).astype(int)
    frac = (idx - lo)[..., None]
    img = palette[lo] * (1 - frac) + palette[lo + 1] * frac
    return img


def save(img, name):
    arr = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(OUT / name, optimize=False)


def write_points(name, rows):
    with open(OUT / name, "w") as f:
        for row in rows:
            f.write(",".join(f"{v:g}" for v in row) + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    for size in (64, 128):
        save(content_image(size), f"content_{size}.png")
        save(style_image(size), f"style_{size}.png")
    write_points("ones_n4.csv", [[1, 1, 1, 1]] * 4)
    write_points("negones_n4.csv", [[-1, -1, -1, -1]] * 4)


if __name__ == "__main__":
    main()
