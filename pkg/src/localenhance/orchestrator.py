"""End-to-end enhancement loop: schedule, responses, rendering.

One session = preprocessing, key-pixel selection, weight maps, then S
sliders per key pixel in the fixed order (1,1)..(1,L),(2,1)..(S,L).  The
response source is pluggable: an automated quality oracle or a crowd
pipeline feeding aggregated slider positions.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .gpr import (
    KernelConfig,
    PixelFeatures,
    assemble_param_map,
    pixel_features,
    weight_maps,
    weight_rows,
)
from .illumination import (
    DEFAULT_GAMMA,
    IlluminationMap,
    denoise,
    initial_illumination,
    lime_preprocess,
    refine_illumination,
)
from .imaging import (
    Image,
    apply_param_map,
    resize_for_preview,
    resize_plane,
)
from .linesearch import (
    LineSearchState,
    add_endpoint,
    blend,
    new_state,
    next_endpoint,
    record_choice,
)
from .selection import SelectionStrategy, select_key_pixels

DEFAULT_KEY_PIXELS = 4
DEFAULT_SLIDERS = 4
DEFAULT_RESPONSES = 7
DEFAULT_CHECK_RANGE = (0.25, 0.75)
DEFAULT_PREVIEW_EDGE = 512


@dataclass(frozen=True)
class PreprocessConfig:
    enabled: bool = False
    gamma: float = DEFAULT_GAMMA


@dataclass(frozen=True)
class EnhanceConfig:
    n_key_pixels: int = DEFAULT_KEY_PIXELS
    n_sliders: int = DEFAULT_SLIDERS
    strategy: SelectionStrategy = field(default_factory=SelectionStrategy)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    denoise_strength: int = 0
    seed: int = 0
    responses_per_slider: int = DEFAULT_RESPONSES
    check_range: tuple = DEFAULT_CHECK_RANGE
    use_illumination: bool = True
    feature_scales: tuple = (1.0, 1.0, 1.0)
    preview_max_edge: int = DEFAULT_PREVIEW_EDGE

    def __post_init__(self):
        if self.n_key_pixels < 1 or self.n_sliders < 1:
            raise ValueError("key pixel and slider counts must be >= 1")
        if self.responses_per_slider < 1 or self.responses_per_slider % 2 == 0:
            raise ValueError("responses_per_slider must be odd and >= 1")
        lo, hi = self.check_range
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError("check_range must satisfy 0 <= lower < upper <= 1")
        if self.denoise_strength not in (0, 1, 2, 3):
            raise ValueError("denoise_strength must be 0..3")


def config_to_dict(cfg: EnhanceConfig) -> dict:
    return {
        "n_key_pixels": cfg.n_key_pixels,
        "n_sliders": cfg.n_sliders,
        "strategy": {"kind": cfg.strategy.kind, "seed": cfg.strategy.seed},
        "kernel": {"length_scale": cfg.kernel.length_scale, "r": cfg.kernel.r},
        "preprocess": {
            "enabled": cfg.preprocess.enabled,
            "gamma": cfg.preprocess.gamma,
        },
        "denoise_strength": cfg.denoise_strength,
        "seed": cfg.seed,
        "responses_per_slider": cfg.responses_per_slider,
        "check_range": list(cfg.check_range),
        "use_illumination": cfg.use_illumination,
        "feature_scales": list(cfg.feature_scales),
        "preview_max_edge": cfg.preview_max_edge,
    }


def config_from_dict(data: dict) -> EnhanceConfig:
    return EnhanceConfig(
        n_key_pixels=int(data["n_key_pixels"]),
        n_sliders=int(data["n_sliders"]),
        strategy=SelectionStrategy(**data["strategy"]),
        kernel=KernelConfig(**data["kernel"]),
        preprocess=PreprocessConfig(**data["preprocess"]),
        denoise_strength=int(data["denoise_strength"]),
        seed=int(data["seed"]),
        responses_per_slider=int(data["responses_per_slider"]),
        check_range=tuple(data["check_range"]),
        use_illumination=bool(data["use_illumination"]),
        feature_scales=tuple(data["feature_scales"]),
        preview_max_edge=int(data["preview_max_edge"]),
    )


@dataclass
class SliderTask:
    """One slider assignment: blend the segment at alpha, render to judge."""

    session_id: str
    step: int              # 1-based overall step index
    s: int                 # 1-based slider round
    l: int                 # 1-based key-pixel index
    segment: tuple
    render: Callable[[float], Image]


@dataclass
class TraceRecord:
    step: int
    s: int
    l: int
    alpha: float
    score: Optional[float]
    wall_time: float


def slider_param_map(
    weights: np.ndarray,
    anchors: np.ndarray,
    active: int,
    segment: tuple,
    alpha: float,
) -> np.ndarray:
    """Parameter map with the active key pixel's slider at `alpha` (0-based index)."""
    anchors = np.asarray(anchors, dtype=np.float64)
    if not 0 <= active < anchors.shape[0]:
        raise ValueError("active key-pixel index out of range")
    effective = anchors.copy()
    effective[active] = blend(segment[0], segment[1], alpha)
    return assemble_param_map(weights, effective)


def oracle_adjust(
    render: Callable[[float], Image], quality: Callable[[Image], float]
) -> float:
    """Best alpha by 17-point grid plus golden-section refinement.

    Ties resolve to the smaller alpha.
    """
    evaluated: dict[float, float] = {}

    def score(alpha: float) -> float:
        alpha = float(alpha)
        if alpha not in evaluated:
            evaluated[alpha] = float(quality(render(alpha)))
        return evaluated[alpha]

    grid = np.linspace(0.0, 1.0, 17)
    values = [score(a) for a in grid]
    best = int(np.argmax(values))
    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, len(grid) - 1)])

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = score(c), score(d)
    while (b - a) > 1e-3:
        if fc >= fd:  # keep the left bracket on ties
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = score(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = score(d)

    return min(evaluated, key=lambda k: (-evaluated[k], k))


def aggregate_responses(alphas: Sequence[float]) -> float:
    """Exact median of an odd number of responses."""
    values = list(alphas)
    if not values or len(values) % 2 == 0:
        raise ValueError("need an odd, non-empty response count")
    if any(not 0.0 <= a <= 1.0 for a in values):
        raise ValueError("responses must be in [0,1]")
    return float(sorted(values)[len(values) // 2])


def validate_check(alpha_check: float, check_range: tuple) -> bool:
    """Accept iff the check slider landed inside the closed interval."""
    lo, hi = check_range
    return lo <= alpha_check <= hi


def _pixel_seed(seed: int, index: int) -> int:
    seq = np.random.SeedSequence([seed & 0xFFFFFFFF, index])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


class EnhanceSession:
    """Stepwise enhancement state machine (the loop behind `enhance`).

    Deterministic given (image, config, submitted alphas); serializable
    with `to_state_dict` and bit-identically resumable from the persisted
    work image plus that dict.
    """

    def __init__(self, image: Image, cfg: EnhanceConfig, session_id: str = ""):
        work = image
        if cfg.preprocess.enabled:
            work = lime_preprocess(work, cfg.preprocess.gamma)
        if cfg.denoise_strength:
            work = denoise(work, cfg.denoise_strength)
        self._init_common(work, cfg, session_id)
        self.keys = select_key_pixels(
            self.features, cfg.n_key_pixels, cfg.strategy, cfg.kernel
        )
        self.weights = weight_maps(self.features, self.keys, cfg.kernel)
        self.states = [
            new_state(_pixel_seed(cfg.seed, l)) for l in range(cfg.n_key_pixels)
        ]
        self.trace: list[TraceRecord] = []
        self.step_index = 0

    def _init_common(self, work: Image, cfg: EnhanceConfig, session_id: str):
        self.cfg = cfg
        self.session_id = session_id
        self.work = work
        self.illumination = refine_illumination(
            initial_illumination(work), work
        )
        self.features = _build_features(work, self.illumination, cfg)
        self._previews: dict[int, tuple[Image, np.ndarray]] = {}

    # -- schedule bookkeeping ------------------------------------------------

    @property
    def total_steps(self) -> int:
        return self.cfg.n_sliders * self.cfg.n_key_pixels

    @property
    def done(self) -> bool:
        return self.step_index >= self.total_steps

    def current_round(self) -> tuple[int, int]:
        """1-based (s, l) of the step awaiting a response."""
        if self.done:
            raise ValueError("session is complete")
        s = self.step_index // self.cfg.n_key_pixels + 1
        l = self.step_index % self.cfg.n_key_pixels + 1
        return s, l

    def effective_anchors(self) -> np.ndarray:
        """Per-key-pixel current parameters; untouched pixels count as zero."""
        rows = []
        for state in self.states:
            if state.completed_segments() >= 1:
                rows.append(state.current_anchor())
            else:
                rows.append(np.zeros(3))
        return np.stack(rows)

    # -- previews ------------------------------------------------------------

    def _preview(self, max_edge: int) -> tuple[Image, np.ndarray]:
        if max_edge not in self._previews:
            small = resize_for_preview(self.work, max_edge)
            t_small = np.clip(
                resize_plane(
                    self.illumination.plane(), small.height, small.width
                ),
                0.0,
                1.0,
            )
            t_map = IlluminationMap(small.width, small.height, t_small.ravel())
            feats = _build_features(small, t_map, self.cfg)
            # key features stay full-resolution: same model, smaller canvas
            w_prev = weight_rows(
                feats.scaled(), self.features.scaled()[self.keys], self.cfg.kernel
            )
            self._previews[max_edge] = (small, w_prev)
        return self._previews[max_edge]

    def render_at(self, alpha: float, max_edge: Optional[int] = None) -> Image:
        """Preview of the pending step's slider at `alpha`."""
        s, l = self.current_round()
        small, w_prev = self._preview(max_edge or self.cfg.preview_max_edge)
        pmap = slider_param_map(
            w_prev,
            self.effective_anchors(),
            l - 1,
            self.states[l - 1].current_segment(),
            alpha,
        )
        return apply_param_map(small, pmap)

    def current_task(self, max_edge: Optional[int] = None) -> SliderTask:
        s, l = self.current_round()
        edge = max_edge or self.cfg.preview_max_edge
        return SliderTask(
            session_id=self.session_id,
            step=self.step_index + 1,
            s=s,
            l=l,
            segment=self.states[l - 1].current_segment(),
            render=lambda alpha: self.render_at(alpha, edge),
        )

    # -- advancement ---------------------------------------------------------

    def submit(
        self,
        alpha: float,
        score: Optional[float] = None,
        wall_time: float = 0.0,
    ) -> bool:
        """Record the aggregated alpha for the pending step; returns done."""
        s, l = self.current_round()
        state = record_choice(self.states[l - 1], alpha)
        if s < self.cfg.n_sliders:
            state = add_endpoint(state, next_endpoint(state))
        self.states[l - 1] = state
        self.trace.append(
            TraceRecord(self.step_index + 1, s, l, float(alpha), score, wall_time)
        )
        self.step_index += 1
        return self.done

    def result(self) -> tuple[Image, np.ndarray]:
        if not self.done:
            raise ValueError("session not finished")
        pmap = assemble_param_map(self.weights, self.effective_anchors())
        return apply_param_map(self.work, pmap), pmap

    # -- persistence ---------------------------------------------------------

    def to_state_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "config": config_to_dict(self.cfg),
            "keys": [int(k) for k in self.keys],
            "step_index": self.step_index,
            "states": [
                {
                    "history": [list(map(float, v)) for v in st.history],
                    "observations": [[int(i), float(a)] for i, a in st.observations],
                    "rng_seed": int(st.rng_seed),
                }
                for st in self.states
            ],
            "trace": [
                {
                    "step": r.step,
                    "s": r.s,
                    "l": r.l,
                    "alpha": r.alpha,
                    "score": r.score,
                    "wall_time": r.wall_time,
                }
                for r in self.trace
            ],
        }

    @classmethod
    def from_state_dict(cls, work: Image, data: dict) -> "EnhanceSession":
        cfg = config_from_dict(data["config"])
        session = cls.__new__(cls)
        session._init_common(work, cfg, data.get("session_id", ""))
        session.keys = np.asarray(data["keys"], dtype=np.intp)
        session.weights = weight_maps(session.features, session.keys, cfg.kernel)
        session.states = [
            LineSearchState(
                history=[np.asarray(v, dtype=np.float64) for v in st["history"]],
                observations=[(int(i), float(a)) for i, a in st["observations"]],
                rng_seed=int(st["rng_seed"]),
            )
            for st in data["states"]
        ]
        session.trace = [
            TraceRecord(
                int(r["step"]),
                int(r["s"]),
                int(r["l"]),
                float(r["alpha"]),
                r["score"],
                float(r["wall_time"]),
            )
            for r in data["trace"]
        ]
        session.step_index = int(data["step_index"])
        return session


def _build_features(
    image: Image, t: IlluminationMap, cfg: EnhanceConfig
) -> PixelFeatures:
    used = t
    if not cfg.use_illumination:
        used = IlluminationMap(t.width, t.height, np.zeros_like(t.t))
    return pixel_features(image, used, cfg.feature_scales)


def enhance(
    image: Image,
    cfg: EnhanceConfig,
    respond: Callable[[SliderTask], float],
    scorer: Optional[Callable[[Image], float]] = None,
) -> tuple[Image, np.ndarray, list[TraceRecord]]:
    """Run a full session with a synchronous response source."""
    session = EnhanceSession(image, cfg)
    while not session.done:
        started = time.perf_counter()
        task = session.current_task()
        alpha = float(respond(task))
        score = float(scorer(task.render(alpha))) if scorer is not None else None
        session.submit(alpha, score, time.perf_counter() - started)
    out, pmap = session.result()
    return out, pmap, session.trace


def oracle_responder(
    quality: Callable[[Image], float]
) -> Callable[[SliderTask], float]:
    """Respond by maximizing a quality function over the slider."""

    def respond(task: SliderTask) -> float:
        return oracle_adjust(task.render, quality)

    return respond


def trace_to_csv(trace: Sequence[TraceRecord], path) -> None:
    """Step/alpha/score log; wall times stay out so reruns diff clean."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "s", "l", "alpha", "score"])
        for rec in trace:
            score = "" if rec.score is None else repr(rec.score)
            writer.writerow([rec.step, rec.s, rec.l, repr(rec.alpha), score])
