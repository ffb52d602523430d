"""Experiment harness: policy x estimator x environment grids.

One *experiment* runs a ranking policy against a synthetic environment for a
fixed horizon, several times (replicates).  All replicates share the
environment's dataset stream (hidden vector, candidate draws); each gets its
own observation-noise and policy seeds, so per-replicate spread reflects
feedback noise and algorithmic randomness rather than dataset variation.

Per round the loop: generates the candidate set, reads the current bias
estimate (the true vector for the oracle estimator, a fixed cold-start
schedule during warm-up), ranks, observes censored feedback, updates the
policy with the estimate in force, and feeds the click records back to the
estimator.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .env import EnvConfig, SyntheticEnv
from .estimators import FixedBias, fallback_schedule, make_estimator, ESTIMATOR_NAMES
from .policies import make_policy, POLICY_NAMES

__all__ = [
    "ExperimentSpec",
    "RunResult",
    "ExperimentResult",
    "run_replicate",
    "run_experiment",
    "run_grid",
    "compare_bias_estimates",
    "posterior_similarity",
    "welch_p_one_sided",
    "summarize",
    "save_results",
    "load_results",
    "spec_from_dict",
    "specs_from_file",
]


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment cell."""

    env: EnvConfig
    policy: str
    estimator: str
    horizon: int = 20000
    replicates: int = 5
    seeds: tuple[int, ...] | None = None
    fixed_q: tuple[float, ...] | None = None
    estimator_warmup: int = 500
    em_init: str = "harmonic"
    em_gamma_mode: str = "linear"
    em_step_every: int = 100
    probit_refresh: int = 100
    probe_size: int = 256
    lam: float = 1.0
    delta: float = 0.05
    s_bound: float = 1.0
    alpha0: float = 1.0
    beta0: float = 1.0
    ucb_radius: str = "constant"
    spec_id: str = ""

    def __post_init__(self):
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.policy!r}; expected {POLICY_NAMES}")
        if self.estimator not in ESTIMATOR_NAMES:
            raise ValueError(
                f"unknown estimator {self.estimator!r}; expected {ESTIMATOR_NAMES}"
            )
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.estimator == "fixed":
            if self.fixed_q is None:
                raise ValueError("estimator 'fixed' requires fixed_q")
            if len(self.fixed_q) != self.env.L:
                raise ValueError("fixed_q length must equal the slate size")
        if self.seeds is not None and len(self.seeds) != self.replicates:
            raise ValueError("seeds list length must equal replicates")
        if not self.spec_id:
            object.__setattr__(self, "spec_id", default_spec_id(self))

    def resolved_seeds(self) -> tuple[int, ...]:
        if self.seeds is not None:
            return tuple(self.seeds)
        return tuple(range(self.replicates))


def default_spec_id(spec: ExperimentSpec) -> str:
    parts = [spec.policy, spec.estimator, spec.env.reward_kind, f"L{spec.env.L}"]
    if spec.env.bias_schedule == "eps_exp_decay":
        parts.append(f"eps{spec.env.bias_epsilon:g}")
    if spec.estimator == "em" and spec.em_init != "harmonic":
        parts.append(f"init-{spec.em_init}")
    parts.append(f"T{spec.horizon}")
    return ".".join(parts)


@dataclass
class RunResult:
    """Traces and summaries of one replicate."""

    spec_id: str
    replicate: int
    seed: int
    policy: str
    estimator: str
    rewards: np.ndarray        # (T,) realized slate reward per round
    regret: np.ndarray         # (T,) oracle minus expected value of the shown slate
    q_trace: np.ndarray        # (T, L) bias estimate per round (float32)
    final_q: np.ndarray        # (L,) estimator's final estimate
    final_theta: np.ndarray | None
    cumulative_reward: float
    wall_clock: float

    def validate(self) -> None:
        if not np.isclose(self.cumulative_reward, float(self.rewards.sum())):
            raise AssertionError("cumulative reward does not match its trace")


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    results: list[RunResult]

    def cumulative_rewards(self) -> np.ndarray:
        return np.array([r.cumulative_reward for r in self.results])

    def summary(self) -> dict:
        return summarize(self)


def _policy_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(10,)))


def _estimator_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))


def _build_estimator(spec: ExperimentSpec, d: int, rng: np.random.Generator):
    if spec.estimator == "real":
        return None
    if spec.estimator == "fixed":
        return FixedBias(np.asarray(spec.fixed_q, dtype=float))
    if spec.estimator == "ctr":
        return make_estimator("ctr", spec.env.L)
    if spec.estimator == "probit":
        return make_estimator(
            "probit", spec.env.L, dim=d,
            probe_size=spec.probe_size, refresh_every=spec.probit_refresh,
        )
    return make_estimator(
        "em", spec.env.L, rng=rng,
        init=spec.em_init, m_step_every=spec.em_step_every,
        gamma_mode=spec.em_gamma_mode,
    )


def run_replicate(spec: ExperimentSpec, replicate: int, seed: int) -> RunResult:
    """Run one replicate of an experiment to completion."""
    started = time.perf_counter()
    env = SyntheticEnv(spec.env, noise_seed=seed)
    policy = make_policy(
        spec.policy, env.d, rng=_policy_rng(seed),
        lam=spec.lam, delta=spec.delta, s_bound=spec.s_bound,
        alpha0=spec.alpha0, beta0=spec.beta0, ucb_radius=spec.ucb_radius,
    )
    estimator = _build_estimator(spec, env.d, _estimator_rng(seed))
    exact = estimator is None or isinstance(estimator, FixedBias)

    T, L = spec.horizon, spec.env.L
    q_true = env.true_bias()
    fallback = fallback_schedule(L)
    rewards = np.empty(T)
    regret = np.empty(T)
    q_trace = np.empty((T, L), dtype=np.float32)

    for t in range(T):
        rd = env.new_round()
        if estimator is None:
            q_hat = q_true
        elif exact:
            q_hat = estimator.bias()
        elif t < spec.estimator_warmup or not estimator.ready():
            q_hat = fallback
        else:
            q_hat = estimator.bias()

        sel = policy.rank_indices(rd.features, q_hat)
        X_sel = rd.features[sel]
        z, _ = env.feedback(rd, sel)
        scores = None
        if estimator is not None and estimator.needs_scores:
            scores = policy.mean_scores(X_sel)
        policy.update_arrays(q_hat, X_sel, z)
        if estimator is not None and not exact:
            clicks = env.clicks_from_feedback(z)
            estimator.observe(clicks, X_sel, scores=scores)

        rewards[t] = z.sum()
        regret[t] = env.oracle_value(rd) - env.expected_slate_value(rd, sel)
        q_trace[t] = q_hat

    if estimator is None:
        final_q = q_true.copy()
    else:
        try:
            final_q = np.asarray(estimator.bias(), dtype=float)
        except Exception:
            final_q = fallback.copy()
    theta = getattr(getattr(policy, "state", None), "theta", None)
    if theta is None and hasattr(policy, "theta"):
        theta = policy.theta()

    return RunResult(
        spec_id=spec.spec_id,
        replicate=replicate,
        seed=seed,
        policy=spec.policy,
        estimator=spec.estimator,
        rewards=rewards,
        regret=regret,
        q_trace=q_trace,
        final_q=final_q,
        final_theta=None if theta is None else np.array(theta, dtype=float),
        cumulative_reward=float(rewards.sum()),
        wall_clock=time.perf_counter() - started,
    )


def _run_replicate_star(args) -> RunResult:
    return run_replicate(*args)


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Run all replicates of a spec, optionally across processes."""
    seeds = spec.resolved_seeds()
    jobs = [(spec, r, s) for r, s in enumerate(seeds)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replicate_star, jobs))
    else:
        results = [run_replicate(*job) for job in jobs]
    return ExperimentResult(spec=spec, results=results)


def run_grid(specs: Sequence[ExperimentSpec], workers: int = 1) -> list[ExperimentResult]:
    """Run several specs, parallelizing across all their replicates."""
    jobs = []
    for spec in specs:
        for r, s in enumerate(spec.resolved_seeds()):
            jobs.append((spec, r, s))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_run_replicate_star, jobs))
    else:
        flat = [run_replicate(*job) for job in jobs]
    by_id: dict[str, list[RunResult]] = {}
    for res in flat:
        by_id.setdefault(res.spec_id, []).append(res)
    out = []
    for spec in specs:
        runs = sorted(by_id[spec.spec_id], key=lambda r: r.replicate)
        out.append(ExperimentResult(spec=spec, results=runs))
    return out


def summarize(result: ExperimentResult) -> dict:
    """Means and spreads over replicates, recomputable from the raw values."""
    values = result.cumulative_rewards()
    regrets = np.array([float(r.regret.sum()) for r in result.results])
    n = len(values)
    def block(v: np.ndarray) -> dict:
        std = float(v.std(ddof=1)) if n > 1 else 0.0
        return {
            "mean": float(v.mean()),
            "std": std,
            "stderr": std / np.sqrt(n) if n > 1 else 0.0,
            "values": [float(x) for x in v],
        }
    # wall-clock intentionally omitted: persisted summaries must be
    # bit-identical across reruns of the same seeds
    return {
        "spec_id": result.spec.spec_id,
        "policy": result.spec.policy,
        "estimator": result.spec.estimator,
        "replicates": n,
        "cumulative_reward": block(values),
        "cumulative_regret": block(regrets),
    }


def compare_bias_estimates(run: RunResult, q_true) -> dict:
    """Per-position absolute error of the final estimate, plus the trace."""
    q = np.asarray(getattr(q_true, "q", q_true), dtype=float)
    if run.q_trace is None or run.q_trace.size == 0:
        raise ValueError("run carries no bias-estimate trace")
    if run.final_q.shape[0] != q.shape[0]:
        raise ValueError("bias length mismatch")
    return {
        "final_error": np.abs(run.final_q - q),
        "trace_error": np.abs(run.q_trace.astype(float) - q[None, :]),
    }


def posterior_similarity(run_a: RunResult, run_b: RunResult) -> float:
    """Cosine similarity of two runs' final posterior means (TS policies)."""
    for run in (run_a, run_b):
        if not run.policy.startswith("lints"):
            raise ValueError(f"posterior similarity needs TS runs, got {run.policy!r}")
        if run.final_theta is None:
            raise ValueError("run carries no posterior mean")
    a, b = run_a.final_theta, run_b.final_theta
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        raise ValueError("posterior mean has zero norm")
    return float(a @ b / denom)


def welch_p_one_sided(greater: Sequence[float], lesser: Sequence[float]) -> float:
    """One-sided Welch test p-value for mean(greater) > mean(lesser)."""
    res = stats.ttest_ind(
        np.asarray(greater, dtype=float),
        np.asarray(lesser, dtype=float),
        equal_var=False,
        alternative="greater",
    )
    return float(res.pvalue)


# --- persistence ---------------------------------------------------------------


def save_results(outdir: str, result: ExperimentResult) -> str:
    """Write one experiment's spec, summary and raw traces under outdir.

    Uses plain .npy and JSON files so identical runs produce bit-identical
    directories.
    """
    spec_dir = os.path.join(outdir, result.spec.spec_id)
    os.makedirs(spec_dir, exist_ok=True)
    spec_dict = asdict(result.spec)
    with open(os.path.join(spec_dir, "spec.json"), "w") as fp:
        json.dump(spec_dict, fp, sort_keys=True, indent=1)
    with open(os.path.join(spec_dir, "summary.json"), "w") as fp:
        json.dump(result.summary(), fp, sort_keys=True, indent=1)
    for run in result.results:
        prefix = os.path.join(spec_dir, f"rep{run.replicate}")
        np.save(prefix + "_rewards.npy", run.rewards)
        np.save(prefix + "_regret.npy", run.regret)
        np.save(prefix + "_qtrace.npy", run.q_trace)
        np.save(prefix + "_qfinal.npy", run.final_q)
        if run.final_theta is not None:
            np.save(prefix + "_theta.npy", run.final_theta)
        meta = {
            "spec_id": run.spec_id,
            "replicate": run.replicate,
            "seed": run.seed,
            "policy": run.policy,
            "estimator": run.estimator,
            "cumulative_reward": run.cumulative_reward,
        }
        with open(prefix + "_meta.json", "w") as fp:
            json.dump(meta, fp, sort_keys=True, indent=1)
    return spec_dir


def load_results(outdir: str, spec_id: str) -> ExperimentResult:
    spec_dir = os.path.join(outdir, spec_id)
    with open(os.path.join(spec_dir, "spec.json")) as fp:
        spec = spec_from_dict(json.load(fp))
    results = []
    for rep in range(spec.replicates):
        prefix = os.path.join(spec_dir, f"rep{rep}")
        with open(prefix + "_meta.json") as fp:
            meta = json.load(fp)
        theta_path = prefix + "_theta.npy"
        rewards = np.load(prefix + "_rewards.npy")
        results.append(
            RunResult(
                spec_id=meta["spec_id"],
                replicate=meta["replicate"],
                seed=meta["seed"],
                policy=meta["policy"],
                estimator=meta["estimator"],
                rewards=rewards,
                regret=np.load(prefix + "_regret.npy"),
                q_trace=np.load(prefix + "_qtrace.npy"),
                final_q=np.load(prefix + "_qfinal.npy"),
                final_theta=np.load(theta_path) if os.path.exists(theta_path) else None,
                cumulative_reward=meta["cumulative_reward"],
                wall_clock=0.0,
            )
        )
    return ExperimentResult(spec=spec, results=results)


def spec_from_dict(obj: dict) -> ExperimentSpec:
    """Build a spec from parsed JSON, rejecting unknown keys."""
    obj = dict(obj)
    env_obj = obj.pop("env", None)
    if env_obj is None:
        raise ValueError("spec is missing the 'env' section")
    known_env = set(EnvConfig.__dataclass_fields__)
    unknown = set(env_obj) - known_env
    if unknown:
        raise ValueError(f"unknown env fields: {sorted(unknown)}")
    env = EnvConfig(**env_obj)
    known = set(ExperimentSpec.__dataclass_fields__) - {"env"}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown spec fields: {sorted(unknown)}")
    if "seeds" in obj and obj["seeds"] is not None:
        obj["seeds"] = tuple(obj["seeds"])
    if "fixed_q" in obj and obj["fixed_q"] is not None:
        obj["fixed_q"] = tuple(obj["fixed_q"])
    return ExperimentSpec(env=env, **obj)


def specs_from_file(path: str) -> list[ExperimentSpec]:
    """Parse a spec file: either one spec object or {"experiments": [...]}."""
    with open(path) as fp:
        obj = json.load(fp)
    if isinstance(obj, dict) and "experiments" in obj:
        specs = [spec_from_dict(o) for o in obj["experiments"]]
    else:
        specs = [spec_from_dict(obj)]
    ids = [s.spec_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate spec_id values in spec file")
    return specs
