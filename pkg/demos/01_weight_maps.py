"""Key pixel selection and the weight maps that spread their edits.

A handful of key pixels carry the tunable parameters; every other pixel
blends them through Gaussian process regression weights.  This script
builds a small synthetic photo, picks key pixels two ways, and writes the
resulting weight maps out as grayscale PNGs.
"""

from pathlib import Path

import numpy as np

from localenhance import Image, apply_param_map, save_image
from localenhance.gpr import (
    KernelConfig,
    assemble_param_map,
    pixel_features,
    weight_map_images,
    weight_maps,
)
from localenhance.illumination import initial_illumination, refine_illumination
from localenhance.selection import SelectionStrategy, select_key_pixels

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# a 96x72 scene: smooth gradient plus a dark corner and a bright blob
h, w = 72, 96
yy, xx = np.mgrid[0:h, 0:w]
yy = yy / (h - 1.0)
xx = xx / (w - 1.0)
base = 0.25 + 0.5 * xx
base = base * (1.0 - 0.6 * np.exp(-((xx - 0.15) ** 2 + (yy - 0.8) ** 2) / 0.03))
base = base + 0.35 * np.exp(-((xx - 0.75) ** 2 + (yy - 0.25) ** 2) / 0.02)
grid = np.clip(np.stack([base, 0.9 * base, 0.8 * base], axis=-1), 0.0, 1.0)
photo = Image.from_pixels(grid)
save_image(photo, OUT / "01_scene.png")

# features are (x, y, t): pixel position plus estimated illumination
t = refine_illumination(initial_illumination(photo), photo)
feats = pixel_features(photo, t)
cfg = KernelConfig()

print(f"scene: {photo.width}x{photo.height}, illumination in "
      f"[{t.t.min():.3f}, {t.t.max():.3f}]")

# pick 4 key pixels by expected model output change, then at random
for kind in ("emoc", "random"):
    keys = select_key_pixels(feats, 4, SelectionStrategy(kind=kind, seed=0), cfg)
    ys, xs = np.divmod(keys, photo.width)
    print(f"{kind:>6} keys:", ", ".join(f"({x},{y})" for x, y in zip(xs, ys)))

    w_maps = weight_maps(feats, keys, cfg)
    for l, img in enumerate(weight_map_images(w_maps, photo.width, photo.height)):
        save_image(img, OUT / f"01_weights_{kind}_{l}.png")

    # hand-picked per-key parameters show how the maps mix edits:
    # brighten key 0, desaturate key 1, add contrast at key 2, darken key 3
    q = np.array([
        [0.6, 0.0, 0.0],
        [0.0, -0.8, 0.0],
        [0.0, 0.0, 0.7],
        [-0.5, 0.0, 0.0],
    ])
    pmap = assemble_param_map(w_maps, q)
    save_image(apply_param_map(photo, pmap), OUT / f"01_edited_{kind}.png")
    print(f"{kind:>6} weight rows sum to "
          f"[{w_maps.sum(axis=1).min():.3f}, {w_maps.sum(axis=1).max():.3f}]")

print(f"wrote weight maps and edited previews to {OUT}")
