"""Command-line entry points.

Subcommands: ``run`` (execute an experiment spec file), ``report``
(summaries as CSV or JSON), ``plotdata`` (tidy per-round CSV for plotting),
``calibrate`` (offline bias estimation from a click log), ``dataset``
(export a synthetic dataset stream), ``serve`` (HTTP serving).

All failures exit nonzero after printing a single machine-readable JSON
error line to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - contract: machine-readable error line
        print(
            json.dumps({"error": str(exc), "type": type(exc).__name__}),
            file=sys.stderr,
        )
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbmrank")
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("run", help="run the experiments in a spec file")
    p.add_argument("--spec", required=True, help="JSON spec file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="summaries of saved results")
    p.add_argument("--out", required=True, help="results directory from 'run'")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--dest", default="-", help="output path, '-' for stdout")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("plotdata", help="tidy per-round CSV for plotting")
    p.add_argument("--out", required=True, help="results directory from 'run'")
    p.add_argument("--metric", choices=("reward", "bias", "regret"), required=True)
    p.add_argument("--stride", type=int, default=1, help="emit every k-th round")
    p.add_argument("--dest", default="-", help="output path, '-' for stdout")
    p.set_defaults(func=_cmd_plotdata)

    p = sub.add_parser("calibrate", help="estimate position bias from a click log")
    p.add_argument("--log", required=True, help="JSON-lines click log")
    p.add_argument("--estimator", choices=("ctr", "probit", "em"), required=True)
    p.add_argument("--slate-size", type=int, required=True)
    p.add_argument("--out", required=True, help="write estimated q as a JSON array")
    p.add_argument("--trace", required=True, help="write convergence trace CSV")
    p.add_argument("--sweeps", type=int, default=20, help="EM sweeps / checkpoints")
    p.add_argument("--gamma-mode", choices=("linear", "sigmoid"), default="linear")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("dataset", help="export a synthetic dataset stream")
    p.add_argument("--env", required=True, help="JSON file with EnvConfig fields")
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("serve", help="serve rank/feedback over HTTP")
    p.add_argument("--config", required=True, help="serving config JSON")
    p.set_defaults(func=_cmd_serve)

    return parser


def _cmd_run(args) -> int:
    from .harness import run_grid, save_results, specs_from_file

    specs = specs_from_file(args.spec)
    results = run_grid(specs, workers=args.workers)
    for result in results:
        save_results(args.out, result)
        summary = result.summary()
        print(
            json.dumps(
                {
                    "spec_id": summary["spec_id"],
                    "mean_cumulative_reward": summary["cumulative_reward"]["mean"],
                    "std": summary["cumulative_reward"]["std"],
                }
            )
        )
    return 0


def _iter_summaries(outdir: str):
    for name in sorted(os.listdir(outdir)):
        path = os.path.join(outdir, name, "summary.json")
        if os.path.exists(path):
            with open(path) as fp:
                yield json.load(fp)


def _open_dest(dest: str):
    return sys.stdout if dest == "-" else open(dest, "w", newline="")


def _cmd_report(args) -> int:
    summaries = list(_iter_summaries(args.out))
    if not summaries:
        raise FileNotFoundError(f"no summaries under {args.out}")
    out = _open_dest(args.dest)
    try:
        if args.format == "json":
            json.dump(summaries, out, indent=1, sort_keys=True)
            out.write("\n")
        else:
            writer = csv.writer(out)
            writer.writerow(
                ["spec_id", "policy", "estimator", "replicates",
                 "reward_mean", "reward_std", "reward_stderr",
                 "regret_mean", "regret_std"]
            )
            for s in summaries:
                writer.writerow(
                    [s["spec_id"], s["policy"], s["estimator"], s["replicates"],
                     s["cumulative_reward"]["mean"], s["cumulative_reward"]["std"],
                     s["cumulative_reward"]["stderr"],
                     s["cumulative_regret"]["mean"], s["cumulative_regret"]["std"]]
                )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_plotdata(args) -> int:
    from .harness import load_results

    stride = max(1, args.stride)
    out = _open_dest(args.dest)
    try:
        writer = csv.writer(out)
        writer.writerow(["spec_id", "replicate", "round", "metric", "value"])
        wrote = False
        for name in sorted(os.listdir(args.out)):
            if not os.path.exists(os.path.join(args.out, name, "spec.json")):
                continue
            result = load_results(args.out, name)
            for run in result.results:
                rounds = range(0, run.rewards.shape[0], stride)
                if args.metric == "reward":
                    for t in rounds:
                        writer.writerow([name, run.replicate, t, "reward", repr(float(run.rewards[t]))])
                elif args.metric == "regret":
                    for t in rounds:
                        writer.writerow([name, run.replicate, t, "regret", repr(float(run.regret[t]))])
                else:
                    L = run.q_trace.shape[1]
                    for t in rounds:
                        for l in range(L):
                            writer.writerow(
                                [name, run.replicate, t, f"bias_l{l + 1}",
                                 repr(float(run.q_trace[t, l]))]
                            )
                wrote = True
        if not wrote:
            raise FileNotFoundError(f"no results under {args.out}")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_calibrate(args) -> int:
    from .core import read_click_log
    from .estimators import CtrState, ProbitState, ctr_update, ctr_bias
    from .estimators import em_fit, em_init, probit_bias, probit_update

    with open(args.log) as fp:
        entries = list(read_click_log(fp))
    if not entries:
        raise ValueError(f"click log {args.log} is empty")
    L = args.slate_size
    checkpoints: list[np.ndarray] = []

    if args.estimator == "ctr":
        state = CtrState.initial(L)
        for chunk in np.array_split(np.arange(len(entries)), min(args.sweeps, len(entries))):
            ctr_update(state, [entries[i] for i in chunk])
            checkpoints.append(ctr_bias(state).q.copy())
        q = checkpoints[-1]
    elif args.estimator == "probit":
        dim = entries[0].contextualized().shape[0]
        state = ProbitState.initial(L, dim)
        probes = [e.contextualized() for e in entries[-256:]]
        for chunk in np.array_split(np.arange(len(entries)), min(args.sweeps, len(entries))):
            for i in chunk:
                e = entries[i]
                probit_update(state, e.position, e.contextualized(), e.click)
            checkpoints.append(probit_bias(state, np.stack(probes)).q.copy())
        q = checkpoints[-1]
    else:
        X = np.stack([e.contextualized() for e in entries])
        clicks = np.array([e.click for e in entries], dtype=float)
        positions = np.array([e.position for e in entries])
        # Plug-in relevance: ridge fit of clicks on the contextualized features.
        theta = np.linalg.solve(X.T @ X + np.eye(X.shape[1]), X.T @ clicks)
        scores = X @ theta
        if args.gamma_mode == "sigmoid":
            gammas = 1.0 / (1.0 + np.exp(-scores))
        else:
            gammas = scores
        gammas = np.clip(gammas, 1e-4, 1.0 - 1e-4)
        q, trace = em_fit(
            positions, clicks, gammas, L,
            sweeps=args.sweeps,
            init=em_init(L, np.random.default_rng(0)),
        )
        checkpoints = list(trace)

    with open(args.out, "w") as fp:
        json.dump([float(v) for v in q], fp)
        fp.write("\n")
    with open(args.trace, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["iteration", "position", "q"])
        for it, vec in enumerate(checkpoints):
            for l, v in enumerate(vec):
                writer.writerow([it, l + 1, repr(float(v))])
    print(json.dumps({"estimator": args.estimator, "q": [float(v) for v in q]}))
    return 0


def _cmd_dataset(args) -> int:
    from .env import EnvConfig, SyntheticEnv, export_dataset

    with open(args.env) as fp:
        cfg = EnvConfig(**json.load(fp))
    env = SyntheticEnv(cfg)
    with open(args.out, "w") as fp:
        export_dataset(env, args.rounds, fp)
    print(json.dumps({"rounds": args.rounds, "path": args.out}))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .http_api import build_service, create_app, load_serving_config

    cfg = load_serving_config(args.config)
    service = build_service(cfg)
    app = create_app(service)
    uvicorn.run(app, host=cfg.get("host", "127.0.0.1"), port=int(cfg.get("port", 8000)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
