"""Position-bias estimation from click feedback.

Four interchangeable strategies produce the examination-probability vector
``q`` consumed by the ranking policies:

* :class:`FixedBias` — a hand-set (or oracle) vector, never updated.
* :class:`CtrEstimator` — per-position click-through rates, normalized by
  position 1 (assumes the first position is always examined).
* :class:`ProbitEstimator` — one Bayesian probit regression per position
  with a factorized Gaussian belief over the weights, updated by
  truncated-Gaussian moment matching; the bias is the average ratio of a
  position's predicted click probability to position 1's on a probe set of
  recent traffic.
* :class:`EmEstimator` — treats examination as a latent variable: the
  expectation step computes the posterior probability that a position was
  examined given the click outcome and a plug-in relevance estimate from
  the live ranking model; the maximization step averages those posteriors
  per position.  Unlike CTR and probit, it does not anchor ``q_1 = 1``,
  which makes it robust when the first position is not surely examined.

All strategies consume click-log records (click, context, action, position)
and emit vectors with entries in ``[0, 1]``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .core import ClickLogEntry, PositionBias

__all__ = [
    "EstimatorNotReady",
    "DegenerateUpdateError",
    "fallback_schedule",
    "CtrState",
    "ctr_update",
    "ctr_bias",
    "ProbitState",
    "probit_predict",
    "probit_update",
    "probit_bias",
    "EmState",
    "em_init",
    "em_e_step",
    "em_m_step",
    "em_accumulate",
    "em_fit",
    "FixedBias",
    "CtrEstimator",
    "ProbitEstimator",
    "EmEstimator",
    "make_estimator",
    "estimator_from_snapshot",
    "ESTIMATOR_NAMES",
]


class EstimatorNotReady(RuntimeError):
    """The estimator has not seen enough data to produce an estimate."""


class DegenerateUpdateError(ValueError):
    """An update hit a mathematically degenerate configuration."""


def fallback_schedule(length: int) -> np.ndarray:
    """Cold-start examination schedule 1/exp(l-1) for 1-based position l."""
    return np.exp(-np.arange(length, dtype=float))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# --- CTR -------------------------------------------------------------------


@dataclass
class CtrState:
    """Per-position click sums and impression counts."""

    click_sum: np.ndarray
    impression_count: np.ndarray

    @classmethod
    def initial(cls, length: int) -> "CtrState":
        return cls(np.zeros(length), np.zeros(length, dtype=np.int64))

    @property
    def length(self) -> int:
        return self.click_sum.shape[0]

    def rho(self) -> np.ndarray:
        """Per-position sample mean click rate; NaN where no impressions."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(
                self.impression_count > 0,
                self.click_sum / self.impression_count,
                np.nan,
            )


def ctr_update(state: CtrState, entries: Iterable[ClickLogEntry]) -> CtrState:
    """Fold click records into the per-position sample means (in place)."""
    for entry in entries:
        idx = entry.position - 1
        if idx >= state.length:
            raise ValueError(
                f"position {entry.position} outside configured range {state.length}"
            )
        state.click_sum[idx] += entry.click
        state.impression_count[idx] += 1
    return state


def ctr_bias(state: CtrState) -> PositionBias:
    """Bias estimate q_l = min(1, rho_l / rho_1), so q_1 = 1.

    Raises :class:`EstimatorNotReady` while position 1 has no clicks, since
    the normalizer is then zero or undefined.
    """
    rho = state.rho()
    if state.impression_count[0] == 0 or not rho[0] > 0.0:
        raise EstimatorNotReady("position 1 has no clicks yet; cannot normalize")
    q = np.where(np.isnan(rho), np.nan, np.minimum(1.0, rho / rho[0]))
    q[0] = 1.0
    fallback = fallback_schedule(state.length)
    q = np.where(np.isnan(q), fallback, q)
    return PositionBias(q)


# --- Bayesian probit regression ---------------------------------------------


@dataclass
class ProbitState:
    """Factorized Gaussian beliefs over per-position probit weights.

    ``mu`` and ``var`` are (L, d) arrays: row l is the weight belief of
    position l+1's model.  ``steepness`` scales the probit link.
    """

    mu: np.ndarray
    var: np.ndarray
    steepness: float
    update_count: np.ndarray

    @classmethod
    def initial(
        cls, length: int, dim: int, steepness: float = 1.0, prior_var: float = 1.0
    ) -> "ProbitState":
        if steepness <= 0.0:
            raise ValueError(f"steepness must be positive, got {steepness}")
        if prior_var <= 0.0:
            raise ValueError(f"prior variance must be positive, got {prior_var}")
        return cls(
            mu=np.zeros((length, dim)),
            var=np.full((length, dim), prior_var),
            steepness=steepness,
            update_count=np.zeros(length, dtype=np.int64),
        )

    @property
    def length(self) -> int:
        return self.mu.shape[0]

    @property
    def dim(self) -> int:
        return self.mu.shape[1]


def _truncated_gaussian_moments(t: float) -> tuple[float, float]:
    """v(t) = N(t)/Phi(t) and w(t) = v(t)*(v(t)+t), with a stable far tail."""
    if t < -8.0:
        v = -t - 1.0 / t  # Mills-ratio asymptote
    else:
        v = math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi) / float(ndtr(t))
    return v, v * (v + t)


def probit_predict(state: ProbitState, position: int, features: np.ndarray) -> float:
    """Predictive click probability of position's model on a feature vector.

    Integrates the Gaussian weight belief through the probit link:
    Phi(mu.x / sqrt(steepness^2 + sum var_i x_i^2)).
    """
    if not (1 <= position <= state.length):
        raise ValueError(f"position {position} outside [1, {state.length}]")
    x = np.asarray(features, dtype=float)
    if x.shape[0] != state.dim:
        raise ValueError(f"feature dim {x.shape[0]} != model dim {state.dim}")
    row = position - 1
    total = math.sqrt(state.steepness**2 + float(state.var[row] @ (x * x)))
    return float(ndtr(float(state.mu[row] @ x) / total))


def probit_update(
    state: ProbitState,
    position: int,
    features: np.ndarray,
    click: int,
) -> ProbitState:
    """Moment-matched Gaussian posterior update for one observation.

    Only the addressed position's belief moves.  The mean shifts in the
    click direction proportionally to each coordinate's variance, and each
    variance shrinks by the truncated-Gaussian factor, so a zero feature
    vector leaves the belief untouched.
    """
    if click not in (0, 1):
        raise ValueError(f"click must be binary, got {click!r}")
    if not (1 <= position <= state.length):
        raise ValueError(f"position {position} outside [1, {state.length}]")
    x = np.asarray(features, dtype=float)
    if x.shape[0] != state.dim:
        raise ValueError(f"feature dim {x.shape[0]} != model dim {state.dim}")
    row = position - 1
    y = 2 * click - 1
    x_sq = x * x
    total_sq = state.steepness**2 + float(state.var[row] @ x_sq)
    total = math.sqrt(total_sq)
    t = y * float(state.mu[row] @ x) / total
    v, w = _truncated_gaussian_moments(t)
    state.mu[row] += y * (state.var[row] * x / total) * v
    state.var[row] *= 1.0 - (state.var[row] * x_sq / total_sq) * w
    state.update_count[row] += int(np.any(x != 0.0))
    return state


def probit_bias(state: ProbitState, probes: Sequence[np.ndarray] | np.ndarray) -> PositionBias:
    """Bias from prediction ratios against position 1 on a probe set.

    q_l = clamp(mean_x pred_l(x) / pred_1(x), 0, 1), with q_1 = 1 by
    construction.  Positions that never received an update keep the prior
    belief, whose ratio is 1 (callers may treat those as low-confidence).
    """
    X = np.asarray(probes, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ValueError("probe set is empty")
    if X.shape[1] != state.dim:
        raise ValueError(f"probe dim {X.shape[1]} != model dim {state.dim}")
    scale = np.sqrt(state.steepness**2 + (X * X) @ state.var.T)  # (n, L)
    preds = ndtr((X @ state.mu.T) / scale)  # (n, L)
    ratios = preds / preds[:, [0]]
    q = np.clip(ratios.mean(axis=0), 0.0, 1.0)
    q[0] = 1.0
    return PositionBias(q)


# --- Expectation-maximization ------------------------------------------------


@dataclass
class EmState:
    """Current bias estimate plus running M-step accumulators.

    ``num``/``cnt`` accumulate, per position, the E-step quantity
    ``c + (1-c) * P(examined | no click)`` and the record count; the M-step
    is their ratio.  Values are accumulated under the estimate in force at
    observation time, realizing the iterative scheme online.
    """

    q: np.ndarray
    num: np.ndarray
    cnt: np.ndarray

    @classmethod
    def with_bias(cls, q: np.ndarray) -> "EmState":
        q = np.asarray(q, dtype=float).copy()
        length = q.shape[0]
        return cls(q=q, num=np.zeros(length), cnt=np.zeros(length, dtype=np.int64))

    @property
    def length(self) -> int:
        return self.q.shape[0]


def em_init(
    length: int,
    rng: np.random.Generator,
    scheme: str = "harmonic",
    epsilon: float | None = None,
    epsilon_range: tuple[float, float] = (0.0, 0.1),
) -> EmState:
    """Initialize the latent-examination estimate.

    ``harmonic`` starts at 1/(l + eps) for 1-based l with a small random
    eps; ``uniform`` draws every entry independently from (0, 1].  The
    harmonic scheme makes independently-initialized runs land near the same
    solution; the uniform scheme exists to study that sensitivity.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if scheme == "harmonic":
        eps = float(rng.uniform(*epsilon_range)) if epsilon is None else float(epsilon)
        q = 1.0 / (np.arange(1, length + 1, dtype=float) + eps)
    elif scheme == "uniform":
        q = np.clip(rng.uniform(0.0, 1.0, size=length), 1e-3, 1.0)
    else:
        raise ValueError(f"unknown init scheme {scheme!r}")
    return EmState.with_bias(q)


def em_e_step(q_l: float, gamma: float, click: int) -> float:
    """Posterior probability the position was examined, given the click.

    A click implies examination outright.  Without a click, examination of
    a relevant-looking item is evidence against: the posterior is
    ``q(1-gamma) / (1 - q*gamma)``.
    """
    if click not in (0, 1):
        raise ValueError(f"click must be binary, got {click!r}")
    if not (0.0 < q_l <= 1.0):
        raise ValueError(f"q must be in (0, 1], got {q_l}")
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    if click == 1:
        return 1.0
    denom = 1.0 - q_l * gamma
    if denom <= 0.0:
        raise DegenerateUpdateError(
            f"q*gamma = {q_l * gamma} leaves no probability for a no-click"
        )
    return q_l * (1.0 - gamma) / denom


def em_accumulate(
    state: EmState,
    positions: np.ndarray,
    clicks: np.ndarray,
    gammas: np.ndarray,
) -> EmState:
    """Add one batch of records to the M-step accumulators (vectorized)."""
    idx = np.asarray(positions, dtype=int) - 1
    clicks = np.asarray(clicks, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    q_l = state.q[idx]
    denom = 1.0 - q_l * gammas
    if np.any(denom <= 0.0):
        raise DegenerateUpdateError("q*gamma reached 1 for a no-click record")
    posterior_no_click = q_l * (1.0 - gammas) / denom
    values = clicks + (1.0 - clicks) * posterior_no_click
    np.add.at(state.num, idx, values)
    np.add.at(state.cnt, idx, 1)
    return state


def em_m_step(state: EmState, q_floor: float = 1e-4) -> PositionBias:
    """Refresh the estimate as the per-position average of accumulated values.

    Raises :class:`EstimatorNotReady` while any position has no records.
    The result is floored at ``q_floor`` so a later E-step can still revise
    it upward (an exact zero would be absorbing).
    """
    if np.any(state.cnt == 0):
        missing = [int(i + 1) for i in np.flatnonzero(state.cnt == 0)]
        raise EstimatorNotReady(f"no records accumulated at positions {missing}")
    state.q = np.clip(state.num / state.cnt, q_floor, 1.0)
    return PositionBias(state.q.copy())


def em_fit(
    positions: np.ndarray,
    clicks: np.ndarray,
    gammas: np.ndarray,
    length: int,
    sweeps: int = 20,
    init: EmState | None = None,
    rng: np.random.Generator | None = None,
    q_floor: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray]:
    """Batch EM over a fixed click log.

    Each sweep recomputes every record's examination posterior under the
    current estimate, then averages per position.  Returns the final
    estimate and the (sweeps, L) trace of the estimates after each sweep.
    """
    state = init if init is not None else em_init(length, rng or np.random.default_rng())
    positions = np.asarray(positions, dtype=int)
    clicks = np.asarray(clicks, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    trace = np.empty((sweeps, length))
    for sweep in range(sweeps):
        state.num[:] = 0.0
        state.cnt[:] = 0
        em_accumulate(state, positions, clicks, gammas)
        em_m_step(state, q_floor=q_floor)
        trace[sweep] = state.q
    return state.q.copy(), trace


# --- estimator strategies -----------------------------------------------------


class FixedBias:
    """A constant bias vector; also used to inject the oracle bias."""

    name = "fixed"
    needs_scores = False

    def __init__(self, q):
        self._bias = PositionBias(np.asarray(q, dtype=float))

    def ready(self) -> bool:
        return True

    @property
    def confident(self) -> np.ndarray:
        return np.ones(len(self._bias), dtype=bool)

    def observe(self, clicks, features, positions=None, scores=None) -> None:
        pass

    def ingest_entries(self, entries: Iterable[ClickLogEntry], score_fn=None) -> None:
        pass

    def bias(self) -> np.ndarray:
        return self._bias.q.copy()

    def position_bias(self) -> PositionBias:
        return self._bias

    def to_snapshot(self) -> dict:
        return {"name": self.name, "q": self._bias.q.tolist()}

    @classmethod
    def from_snapshot(cls, snap: dict) -> "FixedBias":
        return cls(snap["q"])


class CtrEstimator:
    """Per-position click-through rates normalized by position 1."""

    name = "ctr"
    needs_scores = False

    def __init__(self, length: int):
        self.state = CtrState.initial(length)

    @property
    def length(self) -> int:
        return self.state.length

    def ready(self) -> bool:
        return self.state.impression_count[0] > 0 and self.state.click_sum[0] > 0

    @property
    def confident(self) -> np.ndarray:
        return self.state.impression_count > 0

    def observe(self, clicks, features=None, positions=None, scores=None) -> None:
        clicks = np.asarray(clicks, dtype=float)
        if positions is None:
            idx = np.arange(clicks.shape[0])
        else:
            idx = np.asarray(positions, dtype=int) - 1
        np.add.at(self.state.click_sum, idx, clicks)
        np.add.at(self.state.impression_count, idx, 1)

    def ingest_entries(self, entries: Iterable[ClickLogEntry], score_fn=None) -> None:
        ctr_update(self.state, entries)

    def bias(self) -> np.ndarray:
        return ctr_bias(self.state).q.copy()

    def position_bias(self) -> PositionBias:
        return ctr_bias(self.state)

    def to_snapshot(self) -> dict:
        return {
            "name": self.name,
            "click_sum": self.state.click_sum.tolist(),
            "impression_count": self.state.impression_count.tolist(),
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "CtrEstimator":
        est = cls(len(snap["click_sum"]))
        est.state.click_sum = np.asarray(snap["click_sum"], dtype=float)
        est.state.impression_count = np.asarray(snap["impression_count"], dtype=np.int64)
        return est


class ProbitEstimator:
    """One Bayesian probit model per position, biases from prediction ratios.

    Predictions are compared on a probe set of the most recent traffic
    (default 256 contextualized vectors), so the item-quality factor in the
    click rate cancels out.  The bias vector is recomputed lazily every
    ``refresh_every`` observed rounds; positions that never received data
    report the cold-start fallback schedule.
    """

    name = "probit"
    needs_scores = False

    def __init__(
        self,
        length: int,
        dim: int,
        steepness: float = 1.0,
        prior_var: float = 1.0,
        probe_size: int = 256,
        refresh_every: int = 100,
    ):
        self.state = ProbitState.initial(length, dim, steepness, prior_var)
        self.probes: deque[np.ndarray] = deque(maxlen=probe_size)
        self.refresh_every = max(1, refresh_every)
        self._rounds_since_refresh = 0
        self._cached_q: np.ndarray | None = None

    @property
    def length(self) -> int:
        return self.state.length

    def ready(self) -> bool:
        return len(self.probes) > 0 and self.state.update_count[0] > 0

    @property
    def confident(self) -> np.ndarray:
        return self.state.update_count > 0

    def observe(self, clicks, features, positions=None, scores=None) -> None:
        clicks = np.asarray(clicks)
        X = np.asarray(features, dtype=float)
        if positions is None:
            positions = np.arange(1, clicks.shape[0] + 1)
        for pos, x, c in zip(positions, X, clicks):
            probit_update(self.state, int(pos), x, int(round(float(c))))
            self.probes.append(np.array(x))
        self._rounds_since_refresh += 1
        if self._rounds_since_refresh >= self.refresh_every:
            self._cached_q = None

    def ingest_entries(self, entries: Iterable[ClickLogEntry], score_fn=None) -> None:
        entries = list(entries)
        if not entries:
            return
        X = np.stack([e.contextualized() for e in entries])
        clicks = np.array([e.click for e in entries])
        positions = np.array([e.position for e in entries])
        self.observe(clicks, X, positions)

    def bias(self) -> np.ndarray:
        if not self.ready():
            raise EstimatorNotReady("probit models have no probe traffic yet")
        if self._cached_q is None:
            q = probit_bias(self.state, np.stack(self.probes)).q.copy()
            fallback = fallback_schedule(self.length)
            cold = ~self.confident
            q[cold] = fallback[cold]
            self._cached_q = q
            self._rounds_since_refresh = 0
        return self._cached_q.copy()

    def position_bias(self) -> PositionBias:
        return PositionBias(self.bias())

    def to_snapshot(self) -> dict:
        return {
            "name": self.name,
            "mu": self.state.mu.tolist(),
            "var": self.state.var.tolist(),
            "steepness": self.state.steepness,
            "update_count": self.state.update_count.tolist(),
            "probes": [p.tolist() for p in self.probes],
            "probe_size": self.probes.maxlen,
            "refresh_every": self.refresh_every,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "ProbitEstimator":
        mu = np.asarray(snap["mu"], dtype=float)
        est = cls(
            mu.shape[0],
            mu.shape[1],
            steepness=float(snap["steepness"]),
            probe_size=int(snap["probe_size"]),
            refresh_every=int(snap["refresh_every"]),
        )
        est.state.mu = mu
        est.state.var = np.asarray(snap["var"], dtype=float)
        est.state.update_count = np.asarray(snap["update_count"], dtype=np.int64)
        for p in snap["probes"]:
            est.probes.append(np.asarray(p, dtype=float))
        return est


class EmEstimator:
    """Latent-examination EM with a plug-in relevance from the live model.

    The relevance of a record is read off the ranking model's mean score
    for its contextualized features, mapped to a probability by
    ``gamma_mode``: ``"linear"`` clips the score into (0, 1) — appropriate
    because the linear model is fit to click probabilities directly —
    while ``"sigmoid"`` squashes it through a logistic.  Accumulators run
    over the whole history; the estimate refreshes every ``m_step_every``
    rounds.
    """

    name = "em"
    needs_scores = True

    def __init__(
        self,
        length: int,
        rng: np.random.Generator | None = None,
        init: str = "harmonic",
        epsilon: float | None = None,
        m_step_every: int = 100,
        gamma_mode: str = "linear",
        gamma_clip: float = 1e-4,
        q_floor: float = 1e-4,
    ):
        if gamma_mode not in ("linear", "sigmoid"):
            raise ValueError(f"unknown gamma_mode {gamma_mode!r}")
        self.state = em_init(length, rng or np.random.default_rng(), scheme=init, epsilon=epsilon)
        self.init_scheme = init
        self.m_step_every = max(1, m_step_every)
        self.gamma_mode = gamma_mode
        self.gamma_clip = gamma_clip
        self.q_floor = q_floor
        self._rounds = 0
        self._stepped = False

    @property
    def length(self) -> int:
        return self.state.length

    def ready(self) -> bool:
        return self._stepped

    @property
    def confident(self) -> np.ndarray:
        return self.state.cnt > 0

    def gammas_from_scores(self, scores: np.ndarray) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        if self.gamma_mode == "sigmoid":
            g = _sigmoid(scores)
        else:
            g = scores
        return np.clip(g, self.gamma_clip, 1.0 - self.gamma_clip)

    def observe(self, clicks, features=None, positions=None, scores=None) -> None:
        clicks = np.asarray(clicks, dtype=float)
        n = clicks.shape[0]
        if scores is None:
            scores = np.zeros(n)
        positions = (
            np.arange(1, n + 1) if positions is None else np.asarray(positions, dtype=int)
        )
        gammas = self.gammas_from_scores(scores)
        em_accumulate(self.state, positions, clicks, gammas)
        self._rounds += 1
        if self._rounds % self.m_step_every == 0 and np.all(self.state.cnt > 0):
            em_m_step(self.state, q_floor=self.q_floor)
            self._stepped = True

    def ingest_entries(
        self,
        entries: Iterable[ClickLogEntry],
        score_fn: Callable[[np.ndarray], float] | None = None,
    ) -> None:
        entries = list(entries)
        if not entries:
            return
        clicks = np.array([e.click for e in entries], dtype=float)
        positions = np.array([e.position for e in entries])
        if score_fn is None:
            scores = np.zeros(len(entries))
        else:
            scores = np.array([score_fn(e.contextualized()) for e in entries])
        self.observe(clicks, None, positions, scores)

    def bias(self) -> np.ndarray:
        return self.state.q.copy()

    def position_bias(self) -> PositionBias:
        return PositionBias(self.state.q.copy())

    def to_snapshot(self) -> dict:
        return {
            "name": self.name,
            "q": self.state.q.tolist(),
            "num": self.state.num.tolist(),
            "cnt": self.state.cnt.tolist(),
            "rounds": self._rounds,
            "stepped": self._stepped,
            "init": self.init_scheme,
            "m_step_every": self.m_step_every,
            "gamma_mode": self.gamma_mode,
            "gamma_clip": self.gamma_clip,
            "q_floor": self.q_floor,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "EmEstimator":
        est = cls(
            len(snap["q"]),
            init=snap["init"],
            m_step_every=int(snap["m_step_every"]),
            gamma_mode=snap["gamma_mode"],
            gamma_clip=float(snap["gamma_clip"]),
            q_floor=float(snap["q_floor"]),
        )
        est.state.q = np.asarray(snap["q"], dtype=float)
        est.state.num = np.asarray(snap["num"], dtype=float)
        est.state.cnt = np.asarray(snap["cnt"], dtype=np.int64)
        est._rounds = int(snap["rounds"])
        est._stepped = bool(snap["stepped"])
        return est


ESTIMATOR_NAMES = ("real", "fixed", "ctr", "probit", "em")

_ESTIMATOR_CLASSES = {
    "fixed": FixedBias,
    "ctr": CtrEstimator,
    "probit": ProbitEstimator,
    "em": EmEstimator,
}


def make_estimator(
    name: str,
    length: int,
    dim: int | None = None,
    rng: np.random.Generator | None = None,
    fixed_q=None,
    **options,
):
    """Instantiate an estimator strategy by its configuration name.

    ``real`` is resolved by the caller (it needs the environment's true
    bias) and is rejected here.
    """
    if name == "fixed":
        if fixed_q is None:
            raise ValueError("estimator 'fixed' requires an explicit q vector")
        return FixedBias(fixed_q)
    if name == "ctr":
        return CtrEstimator(length)
    if name == "probit":
        if dim is None:
            raise ValueError("estimator 'probit' requires the feature dimension")
        return ProbitEstimator(length, dim, **options)
    if name == "em":
        return EmEstimator(length, rng=rng, **options)
    if name == "real":
        raise ValueError("the oracle estimator is constructed from the environment")
    raise ValueError(f"unknown estimator {name!r}; expected one of {ESTIMATOR_NAMES}")


def estimator_from_snapshot(snap: dict):
    name = snap.get("name")
    if name not in _ESTIMATOR_CLASSES:
        raise ValueError(f"unknown estimator {name!r} in snapshot")
    return _ESTIMATOR_CLASSES[name].from_snapshot(snap)
