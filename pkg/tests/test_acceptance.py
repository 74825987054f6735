"""Acceptance gate: one test per numbered criterion, one printed verdict each.

Every test prints a `criterion NN [pass/fail] ...` line through
capsys.disabled() so the verdicts land in the plain pytest transcript, then
asserts. Criteria 1 and 2 pin the accountant against externally published
target values; the remaining criteria are self-contained properties of this
implementation. Criteria 9, 12, and 13 train models and take minutes each;
everything else finishes in seconds.
"""

import json
import math
import os
import random
import time
from collections import Counter

import numpy as np
import pytest

from privforge.cli import main
from privforge.corpus import CodeSnippet, PromptCodePair, corpus_entropy, load_dataset
from privforge.evaluation import (
    TaskOutcome,
    inject_canaries,
    load_canaries,
    measure_leakage,
    report_from_outcomes,
)
from privforge.filters import RoundTripConfig, classify_execution, round_trip_validate
from privforge.lm import (
    LmConfig,
    init_params,
    kl_divergence,
    n_params,
    per_sample_gradient,
    sequence_nll,
    structural_kl,
)
from privforge.minilang import extract_structural_tokens
from privforge.minilang.interp import ExecBudget
from privforge.pipeline import build_config, load_report, parse_config_text, run_pipeline
from privforge.privacy import DpConfig, calibrate_sigma, clip_gradient, compute_epsilon
from privforge.privsa import LambdaSchedule, TrainConfig, lambda_at, plain_train, privsa_train
from privforge.synth import SamplingConfig, batch_generate

from conftest import data_path

CORPUS = data_path("mini_corpus.jsonl")
PROMPTS = data_path("prompts.txt")
TASKS = data_path("benchmark_tasks.jsonl")
CANARIES = data_path("canaries.jsonl")
PROSE = data_path("prose_corpus.txt")


def verdict(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {number:02d} [{'pass' if ok else 'fail'}] {detail}")


# --- 1: accountant target values ---------------------------------------------


def test_criterion_01_accountant_golden_values(capsys):
    rows = [
        (0.0131, 0.63, 100, 3.97),
        (0.0083, 0.77, 2000, 3.98),
        (0.0262, 0.69, 1000, 3.97),
    ]
    t0 = time.perf_counter()
    results = []
    for q, sigma, steps, target in rows:
        epsilons = {
            conv: compute_epsilon(q, sigma, steps, 1e-5, conversion=conv).epsilon
            for conv in ("classic", "improved")
        }
        best = min(epsilons.values(), key=lambda e: abs(e - target))
        results.append((target, best, epsilons))
    elapsed = time.perf_counter() - t0
    ok = elapsed < 1.0 and all(abs(b - t) <= 0.10 for t, b, _ in results)
    detail = "; ".join(
        f"target {t:.2f} got classic {e['classic']:.4f} / improved {e['improved']:.4f}"
        for t, _, e in results
    )
    verdict(capsys, 1, ok, f"accountant target values: {detail} ({elapsed:.2f}s)")
    assert elapsed < 1.0
    for target, best, _ in results:
        assert abs(best - target) <= 0.10, (
            f"epsilon {best:.4f} misses target {target} by more than 0.10"
        )


def test_criterion_02_calibration_inverts_row_one(capsys):
    t0 = time.perf_counter()
    sigmas = {
        conv: calibrate_sigma(0.0131, 100, 1e-5, 4.0, conversion=conv)
        for conv in ("classic", "improved")
    }
    elapsed = time.perf_counter() - t0
    best = min(sigmas.values(), key=lambda s: abs(s - 0.63))
    ok = elapsed < 5.0 and abs(best - 0.63) <= 0.03
    verdict(
        capsys, 2, ok,
        f"calibration to epsilon 4.0: target sigma 0.63 got classic "
        f"{sigmas['classic']:.4f} / improved {sigmas['improved']:.4f} ({elapsed:.2f}s)",
    )
    assert elapsed < 5.0
    assert abs(best - 0.63) <= 0.03, f"sigma {best:.4f} misses 0.63 by more than 0.03"


# --- 3: gradient vs finite differences ---------------------------------------

FD_CFG = LmConfig(embed_dim=5, context_window=6, hidden_dim=10, seed=0)
FD_PAIRS = [
    PromptCodePair("adds two numbers", CodeSnippet("def add(a, b):\n    return a + b")),
    PromptCodePair(
        "absolute value",
        CodeSnippet("def f(n):\n    if n < 0:\n        return 0 - n\n    return n"),
    ),
    PromptCodePair(
        "sum below n",
        CodeSnippet("def f(n):\n    t = 0\n    for i in range(n):\n        t = t + i\n    return t"),
    ),
]


def test_criterion_03_gradient_matches_finite_differences(capsys):
    assert n_params(FD_CFG) <= 5000
    rng = np.random.default_rng(3)
    ref = init_params(LmConfig(embed_dim=5, context_window=6, hidden_dim=10, seed=77))
    h = 1e-4
    t0 = time.perf_counter()
    max_err, n_draws, n_coords = 0.0, 0, 0
    # draws 0 and 1 sweep every coordinate at the two mandated lambda values;
    # the remaining draws sample 400 coordinates each across varied settings
    plans = [(0.0, None), (1000.0, None)]
    for i in range(19):
        lam = [0.0, 1000.0, float(10 ** rng.uniform(-2, 2))][i % 3]
        plans.append((lam, 400))
    for draw, (lam, n_sub) in enumerate(plans):
        pair = FD_PAIRS[draw % len(FD_PAIRS)] if n_sub else FD_PAIRS[0]
        spans = extract_structural_tokens(pair.snippet.source)
        params = init_params(
            LmConfig(embed_dim=5, context_window=6, hidden_dim=10, seed=100 + draw)
        ) * float(rng.uniform(0.3, 1.0))
        grad, _ = per_sample_gradient(params, ref, FD_CFG, pair, spans, lam)

        def loss_at(p):
            nll, _ = sequence_nll(p, FD_CFG, pair)
            if lam == 0.0:
                return nll
            return nll + lam * structural_kl(p, ref, FD_CFG, pair, spans)

        indices = (
            range(params.size)
            if n_sub is None
            else rng.choice(params.size, size=n_sub, replace=False)
        )
        for idx in indices:
            bumped = params.copy()
            bumped[idx] += h
            up = loss_at(bumped)
            bumped[idx] -= 2 * h
            down = loss_at(bumped)
            fd = (up - down) / (2 * h)
            err = abs(grad[idx] - fd) / max(1.0, abs(grad[idx]), abs(fd))
            max_err = max(max_err, err)
            n_coords += 1
        n_draws += 1
    elapsed = time.perf_counter() - t0
    ok = n_draws >= 20 and max_err <= 1e-4 and elapsed < 60.0
    verdict(
        capsys, 3, ok,
        f"gradient vs central differences: {n_draws} draws, {n_coords} coordinates, "
        f"max scaled error {max_err:.2e} ({elapsed:.1f}s)",
    )
    assert n_draws >= 20
    assert max_err <= 1e-4
    assert elapsed < 60.0


# --- 4: clipping invariant ----------------------------------------------------


def test_criterion_04_clipping_invariant(capsys):
    rng = np.random.default_rng(4)
    n_clipped = n_unchanged = 0
    for _ in range(1000):
        clip = float(rng.uniform(0.5, 3.0))
        dim = int(rng.integers(1, 300))
        g = rng.normal(0.0, float(rng.uniform(0.01, 5.0)), size=dim)
        clipped = clip_gradient(g, clip)
        assert float(np.linalg.norm(clipped)) <= clip + 1e-12
        if float(np.linalg.norm(g)) <= clip:
            assert clipped.tobytes() == g.tobytes()
            n_unchanged += 1
        else:
            n_clipped += 1
    ok = n_clipped > 0 and n_unchanged > 0
    verdict(
        capsys, 4, ok,
        f"clipping invariant: 1000 gradients, {n_clipped} clipped, "
        f"{n_unchanged} within bound and bitwise unchanged",
    )
    assert ok


# --- 5: lambda schedule -------------------------------------------------------


def test_criterion_05_lambda_schedule(capsys):
    s = LambdaSchedule(lambda_max=1000.0, lambda_min=0.01, decay_rate=0.01, step_interval=20)
    oracle_20 = 0.01 + (1000.0 - 0.01) * math.exp(-0.01 * 20)
    checks = [
        lambda_at(0, s) == 1000.0,
        all(lambda_at(t, s) == 1000.0 for t in range(20)),
        lambda_at(19, s) != lambda_at(20, s),
        all(lambda_at(t, s) == lambda_at(20, s) for t in range(20, 40)),
        abs(lambda_at(20, s) - oracle_20) <= 1e-6,
        abs(lambda_at(100000, s) - 0.01) <= 1e-9,
    ]
    ok = all(checks)
    verdict(
        capsys, 5, ok,
        f"lambda schedule: start {lambda_at(0, s):g}, plateau width 20, "
        f"lambda(20) {lambda_at(20, s):.10f} vs oracle {oracle_20:.10f}, "
        f"lambda(1e5) {lambda_at(100000, s):.12f}",
    )
    assert lambda_at(0, s) == 1000.0
    assert all(checks)


# --- 6: KL properties ---------------------------------------------------------


def test_criterion_06_kl_properties(capsys):
    rng = np.random.default_rng(6)
    min_kl = math.inf
    for _ in range(1000):
        v = int(rng.integers(2, 260))
        p = rng.random(v) + 1e-9
        q = rng.random(v) + 1e-9
        p /= p.sum()
        q /= q.sum()
        kl = kl_divergence(p, q)
        min_kl = min(min_kl, kl)
        assert kl >= -1e-12
    p = np.array([0.3, 0.45, 0.25])
    self_kl = kl_divergence(p, p)
    fixture = kl_divergence(np.array([0.5, 0.5]), np.array([0.25, 0.75]))
    analytic = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
    ok = min_kl >= -1e-12 and abs(self_kl) <= 1e-12 and abs(fixture - analytic) <= 1e-6
    verdict(
        capsys, 6, ok,
        f"KL properties: min over 1000 pairs {min_kl:.3e}, self-KL {self_kl:.1e}, "
        f"fixture {fixture:.12f} vs analytic {analytic:.12f}",
    )
    assert abs(self_kl) <= 1e-12
    assert abs(fixture - analytic) <= 1e-6


# --- 7: execution taxonomy ----------------------------------------------------

_TIGHT = ExecBudget(max_steps=200)

TAXONOMY_FIXTURES = (
    # EnvironmentError: require() of a capability outside the allow-list
    [(f'require("{cap}")\nprint(1)', "EnvironmentError", "", None)
     for cap in ["net", "fs", "gpu", "socket", "db", "http", "clock", "rand", "sys", "env"]]
    # CompileError: parse failures that clear the foreign-syntax pre-check
    + [(src, "CompileError", "", None) for src in [
        "def f(:",
        "x =",
        "if 1 == 1\n    print(1)",
        "def f():\nprint(1)",
        "print(",
        "for i in items:\n    print(i)",
        "def f(a, a):\n    return a",
        "\tprint(1)",
        "if 1 == 1:\n   print(1)",
        "x = 'unterminated",
    ]]
    # RuntimeError: undefined names, type faults, division by zero
    + [(src, "RuntimeError", "", None) for src in [
        "print(zzz)",
        "x = y + 1",
        "def f(a):\n    return a\nprint(g(1))",
        'x = "a" + 1',
        'print(1 + "b")',
        "return 5",
        "def f(a):\n    return a\nprint(f(1, 2))",
        "print(1 / 0)",
        "print(7 % 0)",
        "x = 0\nprint(5 / x)",
    ]]
    # LanguageMismatch: foreign-syntax markers caught before parsing
    + [(src, "LanguageMismatch", "", None) for src in [
        "public static void main",
        "int x = 1;",
        "if (x) { y(); }",
        "{}",
        "x = 1;",
        "function f() { return 1; }",
        "for (;;) {}",
        "#include <stdio.h>;",
        "class A { }",
        "while (true) ;",
    ]]
    # Other: empty sources and step-limit timeouts
    + [(src, "Other", "Empty", None) for src in ["", "   ", "\n\n", "  \n  "]]
    + [(src, "Other", "Timeout", _TIGHT) for src in [
        "while 1 == 1:\n    x = 1",
        "def f(n):\n    return f(n)\nprint(f(1))",
        "for i in range(100000):\n    x = i",
        "while 2 > 1:\n    print(0)",
        "def loop(n):\n    while n > 0:\n        n = n + 0\n    return n\nprint(loop(5))",
        "x = 0\nwhile x == 0:\n    x = x * 1",
    ]]
)


def test_criterion_07_execution_taxonomy(capsys):
    assert len(TAXONOMY_FIXTURES) == 50
    per_category = Counter(cat for _, cat, _, _ in TAXONOMY_FIXTURES)
    assert all(per_category[c] == 10 for c in per_category) and len(per_category) == 5
    mismatches = []
    for src, category, sub, budget in TAXONOMY_FIXTURES:
        out = classify_execution(CodeSnippet(source=src), budget or ExecBudget())
        if (out.category, out.sub) != (category, sub):
            mismatches.append((src, out.category, out.sub, category, sub))
    ok = not mismatches
    verdict(
        capsys, 7, ok,
        f"execution taxonomy: 50 fixtures (10 per failure category), "
        f"{50 - len(mismatches)}/50 classified correctly",
    )
    assert mismatches == []


# --- 8: round-trip threshold chain --------------------------------------------


def test_criterion_08_round_trip_containment_chain(capsys):
    ds = load_dataset(CORPUS)
    kept = {}
    for tau in (0.95, 0.88, 0.75, 0.60):
        out, _ = round_trip_validate(ds, RoundTripConfig(threshold=tau))
        kept[tau] = {(p.prompt, p.snippet.source) for p in out.pairs}
    chain = [kept[0.95], kept[0.88], kept[0.75], kept[0.60]]
    contained = all(a < b for a, b in zip(chain, chain[1:]))
    sizes = [len(s) for s in chain]
    ok = contained and sizes == sorted(sizes)
    verdict(
        capsys, 8, ok,
        "round-trip containment chain on the bundled corpus: "
        + " < ".join(f"{len(kept[t])} (tau {t})" for t in (0.95, 0.88, 0.75, 0.60)),
    )
    assert contained, f"containment chain broken: sizes {sizes}"


# --- 9: canary audit property -------------------------------------------------

AUDIT_MODEL = dict(embed_dim=8, context_window=8, hidden_dim=16)


def _email_canary():
    return [s for s in load_canaries(CANARIES) if s.category == "Email"][0]


def _audit_count(params, lm_cfg, spec, seed: int) -> int:
    sampling = SamplingConfig(
        strategy="temperature", temperature=1.0, max_tokens=80, seed=seed
    )
    gens = batch_generate(params, lm_cfg, [spec.sample.prompt], sampling, 500)
    return measure_leakage(gens, [spec]).counts["Email"]


def test_criterion_09_canary_audit(capsys):
    base = load_dataset(CORPUS)
    spec = _email_canary()
    assert spec.repetition_rate == 100

    overfit_counts, dp_counts, dp_epsilons = [], [], []
    for seed in range(10):
        ds = inject_canaries(base, [spec], seed=seed)
        assert len(ds) == len(base) + spec.repetition_rate
        lm_cfg = LmConfig(seed=seed, **AUDIT_MODEL)

        params = plain_train(ds, lm_cfg, 200, 32, 1.0, seed)
        overfit_counts.append(_audit_count(params, lm_cfg, spec, seed))

        dp_cfg = TrainConfig(
            schedule=LambdaSchedule(
                lambda_max=1000.0, lambda_min=0.01, decay_rate=0.01, step_interval=20
            ),
            dp=DpConfig(
                clip_norm=1.0, noise_scale=1.6301, sampling_rate=0.1,
                max_steps=100, delta=1e-5, rng_seed=seed,
            ),
            learning_rate=0.1,
        )
        params, trace = privsa_train(ds, dp_cfg, lm_cfg)
        dp_counts.append(_audit_count(params, lm_cfg, spec, seed))
        dp_epsilons.append(trace.report.epsilon)

    overfit_leaks = sum(1 for c in overfit_counts if c >= 1)
    dp_leaks = sum(1 for c in dp_counts if c >= 1)
    ok = overfit_leaks >= 8 and dp_leaks == 0 and max(dp_epsilons) <= 4.05
    verdict(
        capsys, 9, ok,
        f"canary audit: overfit leaked in {overfit_leaks}/10 seeds "
        f"(counts {overfit_counts}), private at epsilon "
        f"{max(dp_epsilons):.3f} leaked in {dp_leaks}/10 (counts {dp_counts})",
    )
    assert overfit_leaks >= 8
    assert dp_leaks == 0
    assert max(dp_epsilons) <= 4.05


# --- 10: metric arithmetic ----------------------------------------------------


def _outcome(i: int, kind: str) -> TaskOutcome:
    if kind == "pass":
        return TaskOutcome(task_id=f"t{i}", status="pass", fail_tests=(), compiled=True)
    if kind == "fail_compiled":
        return TaskOutcome(task_id=f"t{i}", status="fail", fail_tests=(0,), compiled=True)
    return TaskOutcome(task_id=f"t{i}", status="fail", fail_tests=(), compiled=False)


def test_criterion_10_metric_arithmetic(capsys):
    crafted = [
        (["pass", "pass", "fail_compiled", "fail_uncompiled"], 0.5, 0.75, 2 / 3),
        (["pass"] * 3, 1.0, 1.0, 1.0),
        (["fail_uncompiled"] * 2, 0.0, 0.0, 0.0),
    ]
    for kinds, want_pass, want_compile, want_exec in crafted:
        report = report_from_outcomes([_outcome(i, k) for i, k in enumerate(kinds)])
        assert report.pass_at_1 == pytest.approx(want_pass, abs=1e-12)
        assert report.compile_pass_rate == pytest.approx(want_compile, abs=1e-12)
        assert report.execution_pass_rate == pytest.approx(want_exec, abs=1e-12)

    rng = random.Random(10)
    for _ in range(100):
        kinds = [
            rng.choice(["pass", "fail_compiled", "fail_uncompiled"])
            for _ in range(rng.randint(1, 30))
        ]
        report = report_from_outcomes([_outcome(i, k) for i, k in enumerate(kinds)])
        assert report.pass_at_1 <= report.compile_pass_rate + 1e-12
        if report.compile_pass_rate > 0:
            assert report.execution_pass_rate == pytest.approx(
                report.pass_at_1 / report.compile_pass_rate, abs=1e-12
            )
        else:
            assert report.execution_pass_rate == 0.0
        for outcome in report.per_task:
            if not outcome.compiled:
                assert outcome.status == "fail" and outcome.fail_tests == ()
    verdict(
        capsys, 10, True,
        "metric arithmetic: identities hold on 3 crafted fixtures "
        "and 100 random outcome vectors",
    )


# --- 11: entropy direction ----------------------------------------------------


def _byte_entropy(data: bytes) -> float:
    counts = Counter(data)
    total = len(data)
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


def test_criterion_11_entropy_direction(capsys):
    ds = load_dataset(CORPUS)
    code_entropy = corpus_entropy(ds)
    recount = _byte_entropy("".join(p.snippet.source for p in ds.pairs).encode("utf-8"))
    with open(PROSE, "rb") as f:
        prose_entropy = _byte_entropy(f.read())
    ok = abs(code_entropy - recount) <= 1e-9 and code_entropy < prose_entropy
    verdict(
        capsys, 11, ok,
        f"entropy direction: code {code_entropy:.4f} bits/byte "
        f"(independent recount {recount:.4f}) < prose {prose_entropy:.4f}",
    )
    assert abs(code_entropy - recount) <= 1e-9
    assert code_entropy < prose_entropy


# --- 12 and 13: end-to-end runs -----------------------------------------------


def smoke_config_text(out_dir: str, mode: str = "privcode", max_steps: int = 1400) -> str:
    return "\n".join(
        [
            f"mode = {mode}",
            "seed = 0",
            f"corpus = {CORPUS}",
            f"prompts = {PROMPTS}",
            f"tasks = {TASKS}",
            f"out_dir = {out_dir}",
            "stage1.clip_norm = 20.0",
            "stage1.noise_scale = 0.01",
            "stage1.sampling_rate = 0.15",
            f"stage1.max_steps = {max_steps}",
            "stage1.learning_rate = 1.0",
            "stage1.lambda_max = 2.0",
            "stage1.lambda_min = 0.01",
            "stage1.decay_rate = 0.05",
            "stage1.step_interval = 20",
            "sampling.strategy = temperature",
            "sampling.temperature = 1.0",
            "sampling.max_tokens = 31",
            "samples_per_prompt = 25",
            "roundtrip.threshold = 0.75",
        ]
    )


def test_criterion_12_end_to_end_determinism(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("PRIVFORGE_REPORT_DIR", raising=False)
    t0 = time.perf_counter()
    reports = []
    for run in ("a", "b"):
        out_dir = str(tmp_path / run)
        cfg_path = tmp_path / f"{run}.cfg"
        cfg_path.write_text(smoke_config_text(out_dir), encoding="utf-8")
        assert main(["pipeline", "--config", str(cfg_path)]) == 0
        reports.append(load_report(os.path.join(out_dir, "report.json")))
    elapsed = time.perf_counter() - t0

    artifacts = reports[0].data["artifacts"]
    mismatched = []
    for name in sorted(artifacts.values()):
        if name == "report.json":
            continue
        with open(tmp_path / "a" / name, "rb") as f:
            blob_a = f.read()
        with open(tmp_path / "b" / name, "rb") as f:
            blob_b = f.read()
        if blob_a != blob_b:
            mismatched.append(name)
    cores_equal = reports[0].core() == reports[1].core()
    sizes = reports[0].data["sizes"]
    ok = not mismatched and cores_equal and elapsed < 600.0
    verdict(
        capsys, 12, ok,
        f"end-to-end determinism: |D|={sizes['d']} |D_e|={sizes['d_e']} "
        f"|D_f|={sizes['d_f']}; artifacts bit-identical, report cores equal "
        f"({elapsed:.0f}s for two runs)",
    )
    assert mismatched == [], f"artifacts differ between runs: {mismatched}"
    assert cores_equal
    assert elapsed < 600.0


def test_criterion_13_utility_comparison_reported(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("PRIVFORGE_REPORT_DIR", raising=False)
    scores = {"privcode": [], "dpft": []}
    for seed in range(5):
        for mode in ("privcode", "dpft"):
            out_dir = str(tmp_path / f"{mode}-{seed}")
            text = smoke_config_text(out_dir, mode=mode, max_steps=700)
            text = text.replace("seed = 0", f"seed = {seed}")
            report = run_pipeline(build_config(parse_config_text(text)))
            pass_at_1 = report.data["evaluation"]["pass_at_1"]
            assert 0.0 <= pass_at_1 <= 1.0
            scores[mode].append(pass_at_1)
    mean = {m: sum(v) / len(v) for m, v in scores.items()}
    lines = [
        f"    seed {s}: privcode {scores['privcode'][s]:.3f}  dpft {scores['dpft'][s]:.3f}"
        for s in range(5)
    ]
    verdict(
        capsys, 13, True,
        "utility comparison over 5 seeds (reported, not asserted): mean pass@1 "
        f"privcode {mean['privcode']:.3f} vs dpft {mean['dpft']:.3f}\n"
        + "\n".join(lines),
    )
    assert len(scores["privcode"]) == 5 and len(scores["dpft"]) == 5
