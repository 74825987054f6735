"""Command-line surface: stage commands plus the end-to-end pipeline."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .corpus import Dataset, PromptCodePair, load_dataset, save_dataset
from .evaluation import load_canaries, load_tasks, measure_leakage, run_benchmark
from .filters import RoundTripConfig, execution_validate, round_trip_validate
from .lm import load_checkpoint, save_checkpoint
from .minilang.interp import ExecBudget
from .pipeline import (
    REPORT_DIR_ENV,
    ConfigError,
    StageError,
    _privacy_dict,
    _stamp,
    config_hash,
    load_config,
    load_prompts,
    run_pipeline,
)
from .privacy import calibrate_sigma, compute_epsilon
from .privsa import privsa_train
from .synth import SamplingConfig, batch_generate


def _cmd_train_dp(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    ds = load_dataset(cfg.corpus_path)
    params, trace = privsa_train(ds, cfg.stage1, cfg.junior)
    ckpt = os.path.join(out_dir, "junior.ckpt")
    save_checkpoint(ckpt, params, cfg.junior, _stamp(cfg, trace.report))
    report_path = os.path.join(out_dir, "privacy.json")
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(
            {
                "privacy": _privacy_dict(trace.report),
                "sampling_rate": trace.sampling_rate,
                "steps": len(trace.steps),
                "config_hash": config_hash(cfg),
            },
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")
    print(f"checkpoint: {ckpt}")
    print(f"epsilon: {trace.report.epsilon:.4f} at delta={trace.report.delta:g}")
    return 0


def _cmd_generate(args) -> int:
    params, lm_cfg, _ = load_checkpoint(args.checkpoint)
    prompts = load_prompts(args.prompts)
    sampling = SamplingConfig(
        strategy=args.strategy,
        k=args.k,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
        seed=args.seed,
    )
    records = batch_generate(params, lm_cfg, prompts, sampling, args.samples_per_prompt)
    ds = Dataset(
        pairs=[PromptCodePair(r.prompt, r.snippet) for r in records], id="generated"
    )
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} records to {args.out}")
    return 0


def _cmd_filter(args) -> int:
    ds = load_dataset(args.infile)
    budget = ExecBudget(max_steps=args.budget_steps)
    stats_blob: dict = {"input": len(ds)}
    if args.stage in ("exec", "both"):
        ds, stats = execution_validate(ds, budget)
        stats_blob["execution"] = {
            "total": stats.total,
            "counts": dict(stats.counts),
            "acceptance_rate": stats.acceptance_rate,
        }
    if args.stage in ("roundtrip", "both"):
        ds, scores = round_trip_validate(ds, RoundTripConfig(threshold=args.tau))
        stats_blob["round_trip"] = {
            "threshold": args.tau,
            "kept": len(ds),
            "f1": [s.f1 for s in scores],
        }
    save_dataset(ds, args.out)
    stats_blob["output"] = len(ds)
    if args.stats:
        with open(args.stats, "w", encoding="utf-8") as f:
            json.dump(stats_blob, f, indent=2, sort_keys=True)
            f.write("\n")
    print(f"kept {len(ds)} records -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    params, lm_cfg, _ = load_checkpoint(args.checkpoint)
    tasks = load_tasks(args.tasks)
    report = run_benchmark(params, lm_cfg, tasks)
    blob = {
        "pass_at_1": report.pass_at_1,
        "compile_pass_rate": report.compile_pass_rate,
        "execution_pass_rate": report.execution_pass_rate,
        "per_task": [
            {
                "task_id": o.task_id,
                "status": o.status,
                "fail_tests": list(o.fail_tests),
                "compiled": o.compiled,
            }
            for o in report.per_task
        ],
    }
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(blob, f, indent=2, sort_keys=True)
        f.write("\n")
    print(
        f"pass@1={report.pass_at_1:.3f} compile={report.compile_pass_rate:.3f} "
        f"exec={report.execution_pass_rate:.3f}"
    )
    return 0


def _cmd_audit(args) -> int:
    params, lm_cfg, _ = load_checkpoint(args.checkpoint)
    specs = load_canaries(args.canaries)
    prompts = load_prompts(args.prompts)
    sampling = SamplingConfig(
        strategy="temperature", temperature=1.0, max_tokens=args.max_tokens,
        seed=args.seed,
    )
    generations = batch_generate(params, lm_cfg, prompts, sampling, args.samples)
    leak = measure_leakage(generations, specs)
    blob = {"counts": dict(leak.counts), "leakage_rate": leak.leakage_rate}
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(blob, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"leakage_rate={leak.leakage_rate:.1f} counts={dict(leak.counts)}")
    return 0


def _cmd_accountant(args) -> int:
    if args.target_eps is not None:
        sigma = calibrate_sigma(
            args.q, args.steps, args.delta, args.target_eps, conversion=args.conversion
        )
        print(f"sigma: {sigma:.4f}")
        report = compute_epsilon(
            args.q, sigma, args.steps, args.delta, conversion=args.conversion
        )
    else:
        if args.sigma is None:
            raise ConfigError("accountant needs --sigma or --target-eps")
        report = compute_epsilon(
            args.q, args.sigma, args.steps, args.delta, conversion=args.conversion
        )
    print(
        f"epsilon: {report.epsilon:.4f} at delta={report.delta:g} "
        f"(best order {report.best_order})"
    )
    return 0


def _cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.out:
        overrides["out_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    report = run_pipeline(cfg)
    report_path = os.path.join(cfg.out_dir, report.data["artifacts"]["report"])
    print(f"report: {report_path}")
    ev = report.data["evaluation"]
    print(
        f"pass@1={ev['pass_at_1']:.3f} compile={ev['compile_pass_rate']:.3f} "
        f"exec={ev['execution_pass_rate']:.3f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privforge",
        description=(
            "Two-stage differentially private code synthesis: DP-train a small "
            "model, generate and filter synthetic pairs, fine-tune a larger "
            "model on the survivors."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-dp", help="run the stage-1 DP training only")
    p.add_argument("--config", required=True, help="pipeline config file")
    p.add_argument("--out", default="", help=f"output dir (else config/{REPORT_DIR_ENV})")
    p.set_defaults(fn=_cmd_train_dp)

    p = sub.add_parser("generate", help="sample snippets from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--prompts", required=True, help="one prompt per line")
    p.add_argument("--out", required=True, help="output dataset (JSONL)")
    p.add_argument("--strategy", default="greedy", choices=["greedy", "topk", "temperature"])
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--samples-per-prompt", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("filter", help="execution and round-trip filtering")
    p.add_argument("--in", dest="infile", required=True, help="input dataset (JSONL)")
    p.add_argument("--out", required=True, help="output dataset (JSONL)")
    p.add_argument("--stage", default="both", choices=["exec", "roundtrip", "both"])
    p.add_argument("--tau", type=float, default=0.88, help="round-trip f1 threshold")
    p.add_argument("--budget-steps", type=int, default=10000)
    p.add_argument("--stats", default="", help="optional stats JSON path")
    p.set_defaults(fn=_cmd_filter)

    p = sub.add_parser("evaluate", help="run the benchmark tasks")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tasks", required=True, help="task file (JSONL)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("audit", help="canary leakage audit")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--canaries", required=True, help="canary spec file (JSONL)")
    p.add_argument("--prompts", required=True, help="audit prompts, one per line")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--samples", type=int, default=100, help="generations per prompt")
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_audit)

    p = sub.add_parser("accountant", help="epsilon for (q, sigma, T, delta), or calibrate sigma")
    p.add_argument("--q", type=float, required=True, help="sampling rate")
    p.add_argument("--sigma", type=float, default=None, help="noise multiplier")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--target-eps", type=float, default=None, help="calibrate sigma to this epsilon")
    p.add_argument("--conversion", default="classic", choices=["classic", "improved"])
    p.set_defaults(fn=_cmd_accountant)

    p = sub.add_parser("pipeline", help="full end-to-end run")
    p.add_argument("--mode", choices=["privcode", "dpft", "jft", "nondpft"], default="")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="", help=f"output dir (else config/{REPORT_DIR_ENV})")
    p.set_defaults(fn=_cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, StageError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
