"""Key-pixel selection: EMOC active learning plus ablation baselines.

Selection happens before any parameter is known, so every strategy here
is a pure function of pixel features and the kernel.  EMOC greedily adds
the pixel whose hypothetical label would change the regression output the
most in expectation; the expectation has a label-free closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .gpr import KernelConfig, PixelFeatures, _factor, kernel_matrix

STRATEGY_KINDS = ("emoc", "variance", "greedy_distance", "random")

CANDIDATE_LIMIT = 16384  # full candidate scan above this N gets subsampled
EVAL_GRID_LIMIT = 4096   # output-change sum runs over this many pixels
SCORE_CHUNK = 2048       # candidates scored per block (memory bound)


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str = "emoc"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")


def _cross(points: np.ndarray, selected_pts: np.ndarray, cfg: KernelConfig):
    return kernel_matrix(points, selected_pts, cfg)


def predictive_variance(
    x: np.ndarray,
    selected: list[int] | np.ndarray,
    features: PixelFeatures,
    cfg: KernelConfig,
) -> float:
    """Posterior variance at one scaled feature point; 1+r when nothing is selected."""
    if len(selected) == 0:
        return 1.0 + cfg.r
    pts = features.scaled()[np.asarray(selected, dtype=np.intp)]
    gram = kernel_matrix(pts, pts, cfg) + cfg.r * np.eye(len(pts))
    k_x = kernel_matrix(np.atleast_2d(x), pts, cfg)[0]
    solved = cho_solve(_factor(gram), k_x)
    return float(1.0 + cfg.r - k_x @ solved)


def _variance_batch(cand_pts, selected_pts, cfg):
    if selected_pts.shape[0] == 0:
        return np.full(cand_pts.shape[0], 1.0 + cfg.r)
    gram = kernel_matrix(selected_pts, selected_pts, cfg) + cfg.r * np.eye(
        selected_pts.shape[0]
    )
    factor = _factor(gram)
    k_c = _cross(cand_pts, selected_pts, cfg)
    solved = cho_solve(factor, k_c.T)
    return 1.0 + cfg.r - np.einsum("cl,lc->c", k_c, solved)


def _emoc_batch(cand_pts, selected_pts, eval_pts, cfg):
    """Closed-form EMOC for a block of candidates.

    Adding candidate q shifts the prediction at x by
    cov(x,q)/sigma^2(q) * (y_q - mu(q)); with y_q drawn from the
    predictive law the expected absolute shift is
    sqrt(2/pi) * |cov(x,q)| / sigma(q), no labels needed.
    """
    k_qq = np.ones(cand_pts.shape[0])  # kernel(q,q) = 1
    cross_eval_cand = _cross(eval_pts, cand_pts, cfg)
    if selected_pts.shape[0] == 0:
        var = k_qq + cfg.r
        cov = cross_eval_cand
    else:
        gram = kernel_matrix(selected_pts, selected_pts, cfg) + cfg.r * np.eye(
            selected_pts.shape[0]
        )
        factor = _factor(gram)
        k_cand = _cross(cand_pts, selected_pts, cfg)
        k_eval = _cross(eval_pts, selected_pts, cfg)
        solved_cand = cho_solve(factor, k_cand.T)
        var = k_qq + cfg.r - np.einsum("cl,lc->c", k_cand, solved_cand)
        cov = cross_eval_cand - k_eval @ solved_cand
    var = np.maximum(var, 1e-300)
    return np.sqrt(2.0 / np.pi) * np.abs(cov).mean(axis=0) / np.sqrt(var)


def emoc_score(
    candidate: int,
    selected: list[int] | np.ndarray,
    features: PixelFeatures,
    cfg: KernelConfig,
    eval_limit: int = EVAL_GRID_LIMIT,
) -> float:
    """Expected mean absolute prediction change from labeling one candidate."""
    sel = np.asarray(selected, dtype=np.intp)
    if candidate in sel.tolist():
        raise ValueError("candidate already selected")
    pts = features.scaled()
    eval_idx = _eval_grid(features.n_pixels, eval_limit)
    return float(
        _emoc_batch(pts[[candidate]], pts[sel], pts[eval_idx], cfg)[0]
    )


def _eval_grid(n: int, limit: int) -> np.ndarray:
    if n <= limit:
        return np.arange(n, dtype=np.intp)
    # evenly spaced; spacing >= 1 keeps indices distinct after rounding
    return np.round(np.linspace(0, n - 1, limit)).astype(np.intp)


def _candidate_pool(n: int, limit: int, seed: int) -> np.ndarray:
    if n <= limit:
        return np.arange(n, dtype=np.intp)
    rng = np.random.default_rng(seed)
    bounds = np.linspace(0, n, limit + 1).astype(np.intp)
    picks = bounds[:-1] + (
        rng.random(limit) * (bounds[1:] - bounds[:-1])
    ).astype(np.intp)
    return np.unique(picks)


def _greedy_scores(kind, cand_pts, selected_pts, eval_pts, cfg):
    scores = np.empty(cand_pts.shape[0])
    for start in range(0, cand_pts.shape[0], SCORE_CHUNK):
        block = cand_pts[start : start + SCORE_CHUNK]
        if kind == "emoc":
            vals = _emoc_batch(block, selected_pts, eval_pts, cfg)
        else:
            vals = _variance_batch(block, selected_pts, cfg)
        scores[start : start + block.shape[0]] = vals
    return scores


def select_key_pixels(
    features: PixelFeatures,
    count: int,
    strategy: SelectionStrategy,
    cfg: KernelConfig,
    candidate_limit: int = CANDIDATE_LIMIT,
    eval_limit: int = EVAL_GRID_LIMIT,
) -> np.ndarray:
    """Greedy sequential selection of `count` distinct key pixels."""
    n = features.n_pixels
    if not 1 <= count <= n:
        raise ValueError("count must be in [1, n_pixels]")

    if strategy.kind == "random":
        rng = np.random.default_rng(strategy.seed)
        return rng.choice(n, size=count, replace=False).astype(np.intp)

    pts = features.scaled()
    pool = _candidate_pool(n, candidate_limit, strategy.seed)
    selected: list[int] = []

    if strategy.kind == "greedy_distance":
        centroid = pts.mean(axis=0)
        d = np.linalg.norm(pts[pool] - centroid, axis=1)
        selected.append(int(pool[np.argmin(d)]))
        while len(selected) < count:
            dmin = np.min(
                np.linalg.norm(pts[pool][:, None, :] - pts[selected], axis=2),
                axis=1,
            )
            selected.append(int(pool[np.argmax(dmin)]))
        return np.asarray(selected, dtype=np.intp)

    eval_pts = pts[_eval_grid(n, eval_limit)]
    for _ in range(count):
        scores = _greedy_scores(
            strategy.kind, pts[pool], pts[selected], eval_pts, cfg
        )
        taken = np.isin(pool, selected)
        scores[taken] = -np.inf
        # argmax takes the first hit; pool is ascending, so ties break low
        selected.append(int(pool[np.argmax(scores)]))
    return np.asarray(selected, dtype=np.intp)
