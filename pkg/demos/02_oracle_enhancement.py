"""End-to-end enhancement of an underexposed photo, scored by an oracle.

Instead of crowd feedback, a no-reference quality score answers every
slider microtask.  The run produces the enhanced photo, the per-pixel
parameter map, and a trace of each step's chosen slider position.
"""

from pathlib import Path

import numpy as np

from localenhance import Image, save_image, to_uint8
from localenhance.orchestrator import (
    EnhanceConfig,
    enhance,
    oracle_responder,
    trace_to_csv,
)
from localenhance.quality import nr_score

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# synthetic night shot: textured scene pushed down to ~20% exposure,
# with one streetlight patch left bright
h, w = 120, 160
rng = np.random.default_rng(7)
yy, xx = np.mgrid[0:h, 0:w]
yy = yy / (h - 1.0)
xx = xx / (w - 1.0)
detail = sum(
    a * np.sin(2 * np.pi * (fx * xx + fy * yy))
    for a, fx, fy in zip((0.08, 0.05, 0.03), (2, 5, 9), (3, 7, 4))
)
scene = np.clip(0.45 + 0.25 * xx + detail, 0.05, 0.95)
lamp = np.exp(-((xx - 0.8) ** 2 + (yy - 0.3) ** 2) / 0.01)
exposure = 0.2 + 0.8 * lamp
grid = np.stack([scene * exposure, 0.95 * scene * exposure, 0.85 * scene * exposure], axis=-1)
photo = Image.from_pixels(np.clip(grid, 0.0, 1.0))
save_image(photo, OUT / "02_input.png")
print(f"input: {w}x{h}, nr_score {nr_score(photo):.4f}")

cfg = EnhanceConfig(n_key_pixels=4, n_sliders=4, preview_max_edge=256, seed=3)
out, pmap, trace = enhance(photo, cfg, oracle_responder(nr_score), scorer=nr_score)

save_image(out, OUT / "02_enhanced.png")
trace_to_csv(trace, OUT / "02_trace.csv")
np.save(OUT / "02_param_map.npy", pmap)

print(f"output: nr_score {nr_score(out):.4f} after {len(trace)} steps")
print("step  s  l   alpha   score")
for rec in trace:
    print(f"{rec.step:>4} {rec.s:>2} {rec.l:>2}  {rec.alpha:.4f}  {rec.score:.4f}")

# side-by-side strip for a quick visual check
pair = np.concatenate([to_uint8(photo), to_uint8(out)], axis=1)
save_image(Image.from_pixels(pair / 255.0), OUT / "02_before_after.png")
print(f"wrote enhanced photo, trace, and parameter map to {OUT}")
