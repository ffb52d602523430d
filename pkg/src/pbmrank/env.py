"""Synthetic ranking environments with position-censored feedback.

Reproduces the offline protocol used to validate the ranking policies: per
round, K sparse action vectors and one context vector are drawn with entries
uniform in [0, 1) and entries below 0.1 zeroed; each action is joined with
the context (concatenation plus flattened outer product, scaled by the
squared norm); a fixed hidden unit vector scores the joined features; and
observed feedback at slate position l is the realized reward attenuated by
the position's true examination probability.

Two reward flavors exist: real-valued rewards clamp the noisy score into
[0, 1] ("real"), binary rewards threshold it ("binary").  The true
examination schedule decays exponentially with position, optionally scaled
by (1 - eps) to violate the assumption that position 1 is always examined.

By default the K action vectors form a fixed catalog drawn once per
dataset (a page has a stable pool of candidates) while the context is
redrawn each round; ``action_resampling="per_round"`` redraws the actions
too.

Randomness is split over three independent streams so that the *dataset*
(hidden vector plus action/context draws) is a pure function of the config
seed, while reward noise and censoring draws can be resampled per replicate
through ``noise_seed``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, asdict
from typing import Iterator, TextIO

import numpy as np

from .core import ContextualizedAction, PositionBias, contextualize_batch

__all__ = [
    "EnvConfig",
    "HiddenModel",
    "RoundData",
    "SPARSITY_CUTOFF",
    "sparsify",
    "gen_vectors",
    "contextualize_batch",
    "latent_reward",
    "position_bias_true",
    "simulate_feedback",
    "SyntheticEnv",
    "export_dataset",
    "ReplayEnv",
]

SPARSITY_CUTOFF = 0.1


@dataclass(frozen=True)
class EnvConfig:
    """Full description of a synthetic environment instance."""

    K: int = 25
    L: int = 5
    d_a: int = 5
    d_c: int = 10
    reward_kind: str = "real"  # "real" | "binary"
    binarize_threshold: float = 0.5
    noise_halfwidth: float = 0.1
    bias_schedule: str = "exp_decay"  # "exp_decay" | "eps_exp_decay"
    bias_epsilon: float = 0.0
    position_indexing: str = "zero_based"  # "zero_based" | "one_based"
    censoring: str = "attenuation"  # "attenuation" | "bernoulli"
    hidden_sign: str = "positive"  # "positive" | "signed"
    action_resampling: str = "fixed"  # "fixed" | "per_round"
    seed: int = 0

    def __post_init__(self):
        if self.L > self.K:
            raise ValueError(f"slate size {self.L} exceeds candidate count {self.K}")
        if min(self.K, self.L, self.d_a, self.d_c) < 1:
            raise ValueError("K, L, d_a, d_c must all be positive")
        if self.reward_kind not in ("real", "binary"):
            raise ValueError(f"unknown reward_kind {self.reward_kind!r}")
        if not (0.0 < self.binarize_threshold < 1.0):
            raise ValueError("binarize_threshold must be in (0, 1)")
        if self.noise_halfwidth < 0.0:
            raise ValueError("noise_halfwidth must be nonnegative")
        if self.bias_schedule not in ("exp_decay", "eps_exp_decay"):
            raise ValueError(f"unknown bias_schedule {self.bias_schedule!r}")
        if not (0.0 <= self.bias_epsilon < 1.0):
            raise ValueError("bias_epsilon must be in [0, 1)")
        if self.position_indexing not in ("zero_based", "one_based"):
            raise ValueError(f"unknown position_indexing {self.position_indexing!r}")
        if self.censoring not in ("attenuation", "bernoulli"):
            raise ValueError(f"unknown censoring {self.censoring!r}")
        if self.hidden_sign not in ("positive", "signed"):
            raise ValueError(f"unknown hidden_sign {self.hidden_sign!r}")
        if self.action_resampling not in ("fixed", "per_round"):
            raise ValueError(f"unknown action_resampling {self.action_resampling!r}")

    @property
    def d(self) -> int:
        return self.d_a + self.d_c + self.d_a * self.d_c


@dataclass(frozen=True)
class HiddenModel:
    """The environment's hidden scoring vector (unit Euclidean norm)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if not np.isclose(np.linalg.norm(w), 1.0, atol=1e-9):
            raise ValueError("hidden vector must have unit norm")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "w", w)


@dataclass
class RoundData:
    """One round's candidate set.

    ``features`` holds the K contextualized vectors; ``mu`` the hidden
    scores (pre-noise); ``expected_rewards`` the exact per-candidate
    expected reward after noise and clamping/thresholding.
    """

    index: int
    features: np.ndarray           # (K, d)
    action_features: np.ndarray    # (K, d_a)
    context: np.ndarray            # (d_c,)
    mu: np.ndarray                 # (K,)
    expected_rewards: np.ndarray   # (K,)
    action_ids: tuple[str, ...]

    def candidates(self) -> list[ContextualizedAction]:
        return [
            ContextualizedAction(id=aid, features=self.features[k])
            for k, aid in enumerate(self.action_ids)
        ]


def sparsify(values: np.ndarray) -> np.ndarray:
    """Zero all entries strictly below the sparsity cutoff (in place)."""
    values[values < SPARSITY_CUTOFF] = 0.0
    return values


def gen_vectors(cfg: EnvConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw one round's raw action matrix (K, d_a) and context vector (d_c,)."""
    actions = sparsify(rng.random((cfg.K, cfg.d_a)))
    context = sparsify(rng.random(cfg.d_c))
    return actions, context


def latent_reward(
    model: HiddenModel,
    action: ContextualizedAction | np.ndarray,
    cfg: EnvConfig,
    rng: np.random.Generator,
) -> float:
    """One realized reward draw for a contextualized action.

    Real rewards clamp the noisy hidden score into [0, 1]; binary rewards
    are the indicator of the noisy score reaching the threshold.
    """
    x = action.features if isinstance(action, ContextualizedAction) else np.asarray(action)
    noisy = float(model.w @ x) + float(rng.uniform(-cfg.noise_halfwidth, cfg.noise_halfwidth))
    if cfg.reward_kind == "binary":
        return 1.0 if noisy >= cfg.binarize_threshold else 0.0
    return float(np.clip(noisy, 0.0, 1.0))


def position_bias_true(cfg: EnvConfig) -> PositionBias:
    """The environment's true examination schedule.

    Zero-based indexing puts exp(0)=1 at the first position; one-based uses
    exp(-1) there.  The eps schedule scales everything by (1 - eps).
    """
    offsets = np.arange(cfg.L, dtype=float)
    if cfg.position_indexing == "one_based":
        offsets = offsets + 1.0
    q = np.exp(-offsets)
    if cfg.bias_schedule == "eps_exp_decay":
        q = (1.0 - cfg.bias_epsilon) * q
    return PositionBias(q)


def simulate_feedback(
    rewards: np.ndarray,
    q_true: PositionBias | np.ndarray,
    cfg: EnvConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Censor realized per-position rewards by the true examination schedule.

    Attenuation mode multiplies the reward by the examination probability;
    bernoulli mode multiplies by a sampled examination indicator.  Either
    way the conditional expectation is ``q_l * E[reward]``.
    """
    rewards = np.asarray(rewards, dtype=float)
    q = q_true.q if isinstance(q_true, PositionBias) else np.asarray(q_true, dtype=float)
    if rewards.shape != q.shape:
        raise ValueError(f"rewards shape {rewards.shape} != bias shape {q.shape}")
    if cfg.censoring == "bernoulli":
        return rewards * (rng.random(q.shape[0]) < q)
    return rewards * q


def _expected_reward(mu: np.ndarray, cfg: EnvConfig) -> np.ndarray:
    """Exact E[reward | mu] under uniform noise on [-h, h)."""
    h = cfg.noise_halfwidth
    if cfg.reward_kind == "binary":
        if h == 0.0:
            return (mu >= cfg.binarize_threshold).astype(float)
        return np.clip((mu + h - cfg.binarize_threshold) / (2.0 * h), 0.0, 1.0)
    if h == 0.0:
        return np.clip(mu, 0.0, 1.0)
    lo, hi = mu - h, mu + h
    lin_hi, lin_lo = np.minimum(hi, 1.0), np.maximum(lo, 0.0)
    linear = np.maximum(lin_hi, lin_lo)  # guard against empty overlap
    area = 0.5 * (linear**2 - lin_lo**2) + np.maximum(hi - 1.0, 0.0)
    return np.clip(area / (hi - lo), 0.0, 1.0)


class SyntheticEnv:
    """Streaming synthetic environment.

    The dataset stream (hidden vector, action/context draws) depends only on
    ``cfg.seed``; reward noise and censoring draws come from ``noise_seed``
    (defaulting to the config seed) so replicates can share a dataset while
    resampling observation noise.
    """

    def __init__(self, cfg: EnvConfig, noise_seed: int | None = None):
        self.cfg = cfg
        model_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
        self._stream_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
        noise_entropy = cfg.seed if noise_seed is None else noise_seed
        self._noise_rng = np.random.default_rng(np.random.SeedSequence(noise_entropy, spawn_key=(2,)))
        self.model = self._draw_hidden(model_rng)
        self._q_true = position_bias_true(cfg)
        self._round = 0
        width = len(str(cfg.K - 1))
        self._ids = tuple(f"a{k:0{width}d}" for k in range(cfg.K))
        self._catalog: np.ndarray | None = None
        if cfg.action_resampling == "fixed":
            self._catalog = sparsify(self._stream_rng.random((cfg.K, cfg.d_a)))

    def _draw_hidden(self, rng: np.random.Generator) -> HiddenModel:
        g = rng.standard_normal(self.cfg.d)
        if self.cfg.hidden_sign == "positive":
            g = np.abs(g)
        return HiddenModel(w=g / np.linalg.norm(g))

    @property
    def d(self) -> int:
        return self.cfg.d

    def true_bias(self) -> np.ndarray:
        return self._q_true.q.copy()

    def new_round(self) -> RoundData:
        if self._catalog is not None:
            actions = self._catalog
            context = sparsify(self._stream_rng.random(self.cfg.d_c))
        else:
            actions, context = gen_vectors(self.cfg, self._stream_rng)
        features = contextualize_batch(actions, context)
        mu = features @ self.model.w
        rd = RoundData(
            index=self._round,
            features=features,
            action_features=actions,
            context=context,
            mu=mu,
            expected_rewards=_expected_reward(mu, self.cfg),
            action_ids=self._ids,
        )
        self._round += 1
        return rd

    def rounds(self, horizon: int) -> Iterator[RoundData]:
        for _ in range(horizon):
            yield self.new_round()

    def realized_rewards(self, rd: RoundData, selection: np.ndarray) -> np.ndarray:
        """Draw rewards for the selected candidates (selection[l] at position l)."""
        mu = rd.mu[selection]
        noise = self._noise_rng.uniform(
            -self.cfg.noise_halfwidth, self.cfg.noise_halfwidth, size=mu.shape[0]
        )
        noisy = mu + noise
        if self.cfg.reward_kind == "binary":
            return (noisy >= self.cfg.binarize_threshold).astype(float)
        return np.clip(noisy, 0.0, 1.0)

    def feedback(self, rd: RoundData, selection: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Realized rewards and their censored observations for a slate."""
        rewards = self.realized_rewards(rd, selection)
        z = simulate_feedback(rewards, self._q_true, self.cfg, self._noise_rng)
        return z, rewards

    def clicks_from_feedback(self, z: np.ndarray) -> np.ndarray:
        """Binary click conversion of censored feedback.

        Censored values are expected click probabilities under the PBM
        factorization, so sampling one Bernoulli per position preserves
        E[click | position] = q_l * E[reward].  Already-binary values pass
        through unchanged (the draw is still consumed, keeping the stream
        layout independent of realized values).
        """
        z = np.asarray(z, dtype=float)
        return (self._noise_rng.random(z.shape[0]) < z).astype(np.int8)

    def oracle_value(self, rd: RoundData) -> float:
        """Best achievable expected slate value given the hidden model."""
        top = np.sort(rd.expected_rewards)[::-1][: self.cfg.L]
        q_sorted = np.sort(self._q_true.q)[::-1]
        return float(top @ q_sorted)

    def expected_slate_value(self, rd: RoundData, selection: np.ndarray) -> float:
        return float(self._q_true.q @ rd.expected_rewards[selection])


# --- dataset export / replay --------------------------------------------------
#
# Columnar text format, one record per line, tab-separated:
#   line 1:  "#pbmrank-dataset\t1"
#   line 2:  "#config\t<json of EnvConfig>"
#   then per round:
#     "R\t<round>\t<context csv>"
#     "A\t<round>\t<k>\t<action csv>\t<hidden score repr>"
# Floats are written with repr, which round-trips exactly.


def _csv(values: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in values)


def export_dataset(env: SyntheticEnv, horizon: int, fp: TextIO) -> None:
    """Write ``horizon`` rounds of the dataset stream to a text file."""
    fp.write("#pbmrank-dataset\t1\n")
    fp.write(f"#config\t{json.dumps(asdict(env.cfg), sort_keys=True)}\n")
    for rd in env.rounds(horizon):
        fp.write(f"R\t{rd.index}\t{_csv(rd.context)}\n")
        for k in range(env.cfg.K):
            fp.write(
                f"A\t{rd.index}\t{k}\t{_csv(rd.action_features[k])}\t{float(rd.mu[k])!r}\n"
            )


class ReplayEnv:
    """Replays an exported dataset with the same interface as SyntheticEnv.

    Reward noise and censoring still come from a seeded generator, so a
    replay with the original noise seed reproduces the original feedback
    stream bit-exactly.
    """

    def __init__(self, fp: TextIO, noise_seed: int | None = None):
        header = fp.readline().rstrip("\n").split("\t")
        if header[0] != "#pbmrank-dataset" or header[1] != "1":
            raise ValueError("not a pbmrank dataset file")
        cfg_line = fp.readline().rstrip("\n").split("\t")
        if cfg_line[0] != "#config":
            raise ValueError("missing config header")
        self.cfg = EnvConfig(**json.loads(cfg_line[1]))
        noise_entropy = self.cfg.seed if noise_seed is None else noise_seed
        self._noise_rng = np.random.default_rng(
            np.random.SeedSequence(noise_entropy, spawn_key=(2,))
        )
        self._q_true = position_bias_true(self.cfg)
        self._rows = self._parse(fp)
        self._round = 0
        width = len(str(self.cfg.K - 1))
        self._ids = tuple(f"a{k:0{width}d}" for k in range(self.cfg.K))

    def _parse(self, fp: TextIO) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        rows = []
        context = None
        actions: list[np.ndarray] = []
        mus: list[float] = []

        def flush():
            if context is not None:
                rows.append((context, np.stack(actions), np.array(mus)))

        for line in fp:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "R":
                flush()
                context = np.array([float(v) for v in parts[2].split(",")])
                actions, mus = [], []
            elif parts[0] == "A":
                actions.append(np.array([float(v) for v in parts[3].split(",")]))
                mus.append(float(parts[4]))
        flush()
        return rows

    @property
    def d(self) -> int:
        return self.cfg.d

    @property
    def horizon(self) -> int:
        return len(self._rows)

    def true_bias(self) -> np.ndarray:
        return self._q_true.q.copy()

    def new_round(self) -> RoundData:
        context, actions, mu = self._rows[self._round]
        features = contextualize_batch(actions, context)
        rd = RoundData(
            index=self._round,
            features=features,
            action_features=actions,
            context=context,
            mu=mu,
            expected_rewards=_expected_reward(mu, self.cfg),
            action_ids=self._ids,
        )
        self._round += 1
        return rd

    rounds = SyntheticEnv.rounds
    realized_rewards = SyntheticEnv.realized_rewards
    feedback = SyntheticEnv.feedback
    clicks_from_feedback = SyntheticEnv.clicks_from_feedback
    oracle_value = SyntheticEnv.oracle_value
    expected_slate_value = SyntheticEnv.expected_slate_value
