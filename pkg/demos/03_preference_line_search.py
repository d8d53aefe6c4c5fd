"""Sequential line search on its own, driven by a simulated rater.

Each round presents one segment in parameter space; the rater picks the
point on it closest to a hidden target, and the next segment starts from
that choice.  The anchors should creep toward the target even though the
rater only ever answers with a single slider position.
"""

import numpy as np

from localenhance.linesearch import (
    add_endpoint,
    blend,
    new_state,
    next_endpoint,
    record_choice,
)

target = np.array([0.55, -0.3, 0.2])


def utility(p):
    # concave preference peaking at the hidden target
    return -np.sum((p - target) ** 2)


def rate(segment, grid=1000):
    # a careful rater: scan the slider at 1/1000 granularity
    alphas = np.linspace(0.0, 1.0, grid + 1)
    scores = [utility(blend(segment[0], segment[1], a)) for a in alphas]
    return float(alphas[int(np.argmax(scores))])


state = new_state(seed=11)
print(f"hidden target {np.round(target, 3)}")
print("round   alpha   anchor                      dist")
for rnd in range(1, 16):
    segment = state.current_segment()
    alpha = rate(segment)
    state = record_choice(state, alpha)
    anchor = state.current_anchor()
    dist = float(np.linalg.norm(anchor - target))
    print(f"{rnd:>5}  {alpha:.4f}  {np.round(anchor, 4)!s:<26} {dist:.4f}")
    state = add_endpoint(state, next_endpoint(state))

assert dist < 0.1, "rater should land near the target within fifteen rounds"
print("anchor converged to the rater's preference")
