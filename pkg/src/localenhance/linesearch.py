"""Single-slider sequential line search for one key pixel's parameters.

Each slider presents a segment [anchor, endpoint] in parameter space; the
chosen blend becomes the next anchor.  The next endpoint is proposed by a
preferential GP fit to the choice history (every chosen point is treated
as preferred over the two segment ends it beat), maximizing expected
improvement so successive sliders stay informative.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

N_PARAMS = 3
MIN_INIT_SEPARATION = 0.1
FALLBACK_SEPARATION = 0.5

GP_LENGTH_SCALE = 1.2
PREF_SCALE = 0.5
GP_JITTER = 1e-8
EI_XI = 0.01
EI_STARTS = 64
EI_ITERS = 100


@dataclass
class LineSearchState:
    """Alternating anchors/endpoints plus recorded slider choices.

    history = [p1, pbar1, p2, pbar2, ...]; even length means a segment is
    open (awaiting a choice), odd length means a new anchor awaits its
    endpoint.
    """

    history: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    rng_seed: int = 0

    def __post_init__(self):
        if len(self.history) < 2:
            raise ValueError("history must start with an anchor/endpoint pair")
        for vec in self.history:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (N_PARAMS,) or np.any(np.abs(arr) > 1.0):
                raise ValueError("history vectors must lie in [-1,1]^3")

    @property
    def segment_open(self) -> bool:
        return len(self.history) % 2 == 0

    def current_anchor(self) -> np.ndarray:
        idx = -2 if self.segment_open else -1
        return np.asarray(self.history[idx], dtype=np.float64)

    def current_segment(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.segment_open:
            raise ValueError("no open segment")
        return (
            np.asarray(self.history[-2], dtype=np.float64),
            np.asarray(self.history[-1], dtype=np.float64),
        )

    def completed_segments(self) -> int:
        return len(self.observations)


def blend(p: np.ndarray, p_bar: np.ndarray, alpha: float) -> np.ndarray:
    """Convex combination (1-alpha) p + alpha p_bar."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0,1]")
    p = np.asarray(p, dtype=np.float64)
    p_bar = np.asarray(p_bar, dtype=np.float64)
    return (1.0 - alpha) * p + alpha * p_bar


def init_endpoints(seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two seeded uniform points in [-1,1]^3, at least 0.1 apart (L-inf)."""
    rng = np.random.default_rng(seed)
    p1 = rng.uniform(-1.0, 1.0, N_PARAMS)
    p1_bar = rng.uniform(-1.0, 1.0, N_PARAMS)
    while np.abs(p1 - p1_bar).max() < MIN_INIT_SEPARATION:
        p1_bar = rng.uniform(-1.0, 1.0, N_PARAMS)
    return p1, p1_bar


def new_state(seed: int) -> LineSearchState:
    p1, p1_bar = init_endpoints(seed)
    return LineSearchState(history=[p1, p1_bar], rng_seed=seed)


def record_choice(state: LineSearchState, alpha_star: float) -> LineSearchState:
    """Close the open segment with the chosen alpha; the blend becomes the anchor."""
    if not state.segment_open:
        raise ValueError("no open segment to record into")
    p, p_bar = state.current_segment()
    chosen = blend(p, p_bar, alpha_star)
    segment = state.completed_segments()
    return replace(
        state,
        history=state.history + [chosen],
        observations=state.observations + [(segment, float(alpha_star))],
    )


def add_endpoint(state: LineSearchState, p_bar: np.ndarray) -> LineSearchState:
    if state.segment_open:
        raise ValueError("segment already open")
    arr = np.asarray(p_bar, dtype=np.float64)
    if arr.shape != (N_PARAMS,) or np.any(np.abs(arr) > 1.0):
        raise ValueError("endpoint must lie in [-1,1]^3")
    return replace(state, history=state.history + [arr])


def _rbf(a: np.ndarray, b: np.ndarray, ell: float) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * ell * ell))


def _preferences(state: LineSearchState):
    """(points, pairs): chosen anchor beats both ends of its segment."""
    points: list[np.ndarray] = []
    index: dict[tuple, int] = {}

    def intern(vec: np.ndarray) -> int:
        key = tuple(np.asarray(vec, dtype=np.float64).tolist())
        if key not in index:
            index[key] = len(points)
            points.append(np.asarray(vec, dtype=np.float64))
        return index[key]

    pairs: list[tuple[int, int]] = []
    for seg, _alpha in state.observations:
        p = state.history[2 * seg]
        p_bar = state.history[2 * seg + 1]
        chosen = state.history[2 * seg + 2]
        win = intern(chosen)
        for loser in (p, p_bar):
            lose = intern(loser)
            if lose != win:
                pairs.append((win, lose))
    return np.array(points), pairs


def _fit_latent(x: np.ndarray, pairs, ell: float, scale: float):
    """MAP latent goodness under a logistic preference likelihood."""
    m = x.shape[0]
    gram = _rbf(x, x, ell) + GP_JITTER * np.eye(m)
    f = np.zeros(m)
    for _ in range(50):
        grad = np.zeros(m)
        w = np.zeros((m, m))
        for win, lose in pairs:
            d = (f[win] - f[lose]) / scale
            sig = 1.0 / (1.0 + np.exp(-d))
            g = (1.0 - sig) / scale
            grad[win] += g
            grad[lose] -= g
            h = sig * (1.0 - sig) / (scale * scale)
            w[win, win] += h
            w[lose, lose] += h
            w[win, lose] -= h
            w[lose, win] -= h
        # Newton step in the standard GP form: solve (I + K W) f+ = K (W f + grad)
        target = gram @ (w @ f + grad)
        f_new = np.linalg.solve(np.eye(m) + gram @ w, target)
        step = f_new - f
        if np.abs(step).max() < 1e-10:
            f = f_new
            break
        f = f + 0.8 * step
    return f, gram, w


def _posterior(x: np.ndarray, f_hat: np.ndarray, gram: np.ndarray, w: np.ndarray, ell: float):
    """Laplace predictive mean and whitened cross term as a batch closure.

    Preferences only identify latent differences, so marginal variances
    carry a large shared level term; returning the whitened vectors u(x)
    (cov(f(a),f(b)) = k(a,b) - u(a)^T u(b)) lets the acquisition work with
    differences, where the level cancels.
    """
    m = x.shape[0]
    alpha = cho_solve(cho_factor(gram, lower=True), f_hat)
    # stable form B = I + W^{1/2} K W^{1/2}; W is PSD but singular
    evals, evecs = np.linalg.eigh(w)
    evals = np.maximum(evals, 0.0)
    w_sqrt = (evecs * np.sqrt(evals)) @ evecs.T
    b = np.eye(m) + w_sqrt @ gram @ w_sqrt
    b_chol = np.linalg.cholesky(b)

    def predict(queries: np.ndarray):
        cross = _rbf(queries, x, ell)
        mean = cross @ alpha
        u = solve_triangular(b_chol, w_sqrt @ cross.T, lower=True)
        return mean, u

    return predict


def _norm_cdf(z: np.ndarray) -> np.ndarray:
    from scipy.special import erf

    return 0.5 * (1.0 + erf(z / np.sqrt(2.0)))


def _expected_improvement(gain, sd):
    """EI of a Gaussian improvement with mean `gain` and spread `sd`."""
    sd = np.maximum(sd, 1e-12)
    z = gain / sd
    return gain * _norm_cdf(z) + sd * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


def _fallback_endpoint(anchor: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    for _ in range(200):
        cand = rng.uniform(-1.0, 1.0, N_PARAMS)
        if np.abs(cand - anchor).max() >= FALLBACK_SEPARATION:
            return cand
    # the box always contains a point this far away along some axis
    cand = anchor.copy()
    dim = int(np.argmax(np.abs(anchor)))
    cand[dim] = anchor[dim] - np.sign(anchor[dim]) * FALLBACK_SEPARATION
    return np.clip(cand, -1.0, 1.0)


def next_endpoint(state: LineSearchState) -> np.ndarray:
    """Most informative next endpoint for the current anchor.

    Deterministic given the state (RNG derives from seed and history
    length); never returns the anchor itself.
    """
    if state.segment_open or state.completed_segments() == 0:
        raise ValueError("need a completed segment and a pending anchor")
    anchor = state.current_anchor()
    rng = np.random.default_rng(
        np.random.SeedSequence([state.rng_seed & 0xFFFFFFFF, len(state.history)])
    )

    points, pairs = _preferences(state)
    if not pairs:
        return _fallback_endpoint(anchor, rng)

    f_hat, gram, w = _fit_latent(points, pairs, GP_LENGTH_SCALE, PREF_SCALE)
    predict = _posterior(points, f_hat, gram, w, GP_LENGTH_SCALE)
    inc_mean, inc_u = predict(anchor[None, :])
    inc_mean = float(inc_mean[0])
    inc_u = inc_u[:, 0]

    def scores_at(batch: np.ndarray) -> np.ndarray:
        mean, u = predict(batch)
        gain = mean - inc_mean - EI_XI
        # var of f(x)-f(anchor): the unidentified level cancels here
        k_xi = np.exp(
            -((batch - anchor) ** 2).sum(axis=1)
            / (2.0 * GP_LENGTH_SCALE * GP_LENGTH_SCALE)
        )
        var = 2.0 * (1.0 - k_xi) - ((u - inc_u[:, None]) ** 2).sum(axis=0)
        return _expected_improvement(gain, np.sqrt(np.maximum(var, 0.0)))

    current = rng.uniform(-1.0, 1.0, (EI_STARTS, N_PARAMS))
    scores = scores_at(current)
    step = np.full(EI_STARTS, 0.5)
    for _ in range(EI_ITERS):
        if np.all(step < 1e-12):  # remaining moves are numerical no-ops
            break
        improved = np.zeros(EI_STARTS, dtype=bool)
        for dim in range(N_PARAMS):
            for sign in (1.0, -1.0):
                cand = current.copy()
                cand[:, dim] = np.clip(cand[:, dim] + sign * step, -1.0, 1.0)
                c_scores = scores_at(cand)
                better = c_scores > scores
                current[better] = cand[better]
                scores[better] = c_scores[better]
                improved |= better
        step[~improved] *= 0.5

    winner = current[int(np.argmax(scores))]
    if np.abs(winner - anchor).max() < 1e-9:
        return _fallback_endpoint(anchor, rng)
    return winner
