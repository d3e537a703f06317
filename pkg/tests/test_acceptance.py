"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL`` line with the measured
figures, so ``pytest -s -k acceptance`` doubles as a report.
"""

import json
import os
import shutil
import time
from pathlib import Path

import pytest

import oracles
import refscenes
from conftest import GROUPS, make_sample
from tempsynth.cli import main
from tempsynth.cot.backends import MockGenerator, MockJudge, MockPolisher
from tempsynth.cot.pipeline import run_pipeline
from tempsynth.dataset import GenerateConfig, Job, generate_dataset, produce
from tempsynth.export import build_metadata, encoder_available
from tempsynth.longterm.families import replay, rewind
from tempsynth.longterm.scripts import generate_longterm_sample
from tempsynth.metrics import THRESHOLDS, accuracy_reward, grounding_report, interval_iou
from tempsynth.model import Family, QuestionMode, ShortTask, frame_count
from tempsynth.render.plan import RenderConfig, longterm_events, plan_longterm, plan_shortterm, script_timing
from tempsynth.render.raster import rasterize
from tempsynth.rng import new_rng
from tempsynth.shortterm.tasks import generate_shortterm_sample
from tempsynth.validate import replay_answer, validate_manifest
from test_metrics import random_pairs, reference_report

GOLDEN = json.loads((Path(__file__).parent / "golden" / "frames.json").read_text())["frames"]
SEEDS = range(100)
FAMILIES = [f.value for f in Family]
MODES = [m.value for m in QuestionMode]


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return report


def test_criterion_1_shortterm_oracle(verdict):
    start = time.perf_counter()
    mismatches = []
    for task in ShortTask:
        for seed in SEEDS:
            s = generate_shortterm_sample(task, new_rng(seed), seed=seed)
            want = oracles.oracle_answer(s.spec.to_dict())
            if want != s.truth.answer:
                mismatches.append((task.value, seed, s.truth.answer, want))
    took = time.perf_counter() - start
    verdict(1, not mismatches and took < 120,
            f"{len(SEEDS) * 12} short-term samples, {len(mismatches)} oracle mismatches, {took:.1f} s")


def test_criterion_2_replay_soundness(verdict):
    bad_forward = bad_inverse = bad_choices = 0
    n = 0
    for family in FAMILIES:
        for mode in MODES:
            for seed in SEEDS:
                q, s = make_sample(family, mode, seed)
                script = s.script
                n += 1
                if replay(script.initial, script.operations) != script.final or \
                        oracles.oracle_replay(script.to_dict()) != oracles.as_lists(script.final.to_dict()["entities"]):
                    bad_forward += 1
                if rewind(script.final, script.operations) != script.initial:
                    bad_inverse += 1
                doc = json.loads(json.dumps(build_metadata(script, [], s.truth, fps=30, total_frames=1)))
                correct = replay_answer(doc)
                if q.choices.count(correct) != 1 or q.choices[q.answer_index] != correct:
                    bad_choices += 1
    verdict(2, bad_forward == bad_inverse == bad_choices == 0,
            f"{n} scripts: {bad_forward} forward, {bad_inverse} inverse, {bad_choices} choice-set mismatches")


def test_criterion_3_timing_law(verdict):
    cfg = RenderConfig()
    problems = []
    checked = 0
    for family in FAMILIES:
        for mode in MODES:
            for seed in range(20):
                s = generate_longterm_sample(family, mode, new_rng(seed), seed=seed)
                plan = plan_longterm(s.script, cfg)
                t = script_timing(s.script, cfg.fps)
                want = {
                    "initial_reveal": round(s.script.reveal_duration_s * cfg.fps),
                    "operation": sum(round(op.duration_s * cfg.fps) for op in s.script.operations),
                    "final_reveal": round(s.script.reveal_duration_s * cfg.fps),
                }
                got = {p.name: p.frames for p in plan.phases}
                if got != want or got["initial_reveal"] != 60 or len(plan) != sum(want.values()):
                    problems.append((family, mode, seed, got))
                if not all(15 <= f <= 30 for f in t.op_frames):
                    problems.append((family, mode, seed, t.op_frames))
                checked += 1
    for task in ShortTask:
        for seed in range(20):
            s = generate_shortterm_sample(task, new_rng(seed), seed=seed)
            plan = plan_shortterm(s.trace, cfg)
            if len(plan) != round(s.spec.duration_s * cfg.fps) or len(plan) != frame_count(s.spec.duration_s, 30):
                problems.append((task.value, seed, len(plan)))
            checked += 1
    verdict(3, not problems, f"{checked} plans, {len(problems)} timing violations")


def test_criterion_4_determinism(verdict, tmp_path):
    cfg = GenerateConfig(image_sequence=True)
    diffs = []
    for k, (group, mode) in enumerate(GROUPS):
        job = Job(k, "shortterm" if mode is None else "longterm", group, mode, 4000 + k)
        a, b = produce(job, cfg, tmp_path / "a"), produce(job, cfg, tmp_path / "b")
        side = Path("videos") / f"{job.sample_id}.json"
        if a.sample != b.sample or (tmp_path / "a" / side).read_bytes() != (tmp_path / "b" / side).read_bytes():
            diffs.append(job.sample_id)
        plan = refscenes.plan_for(job.kind, group, mode, seed=job.seed)
        if list(rasterize(plan)) != list(rasterize(refscenes.plan_for(job.kind, group, mode, seed=job.seed))):
            diffs.append(job.sample_id + " frames")
    golden_bad = [name for name, kind, group, mode, frame in refscenes.SCENES
                  if refscenes.frame_hash(kind, group, mode, frame) != GOLDEN[name]]
    verdict(4, not diffs and not golden_bad,
            f"{len(GROUPS)} samples regenerated, {len(diffs)} differences; "
            f"{len(GOLDEN) - len(golden_bad)}/{len(GOLDEN)} golden frame hashes match")


def test_criterion_5_occlusion_and_leaks(verdict):
    cfg = RenderConfig()
    glyphs = leaks = 0
    scenes = 0
    for seed in SEEDS:
        mode = MODES[seed % 3]
        q, s = make_sample("shell_game", mode, seed, mcq=None)
        plan = plan_longterm(s.script, cfg)
        hidden = "final_reveal" if s.script.visible_state == "initial_only" else "initial_reveal"
        for phase in (hidden, "operation"):
            glyphs += sum(1 for c in plan.commands_in(phase) if c.role == "entity")
        leaks += s.truth.hidden in q.question
        scenes += 1
    for family in FAMILIES:
        for mode in MODES:
            for seed in range(20):
                q, s = make_sample(family, mode, seed, mcq=None)
                leaks += s.truth.hidden in q.question
    verdict(5, glyphs == 0 and leaks == 0,
            f"{scenes} shell-game scenes: {glyphs} hidden-state glyph commands; {leaks} leaking questions")


def test_criterion_6_cot_bounds(verdict):
    items = []
    for k, (group, mode) in enumerate(GROUPS * 2):
        q, s = make_sample(group, mode, 7000 + k)
        if mode is None:
            doc = build_metadata(s.spec, s.trace.events, s.truth, fps=30, total_frames=s.trace.total_frames)
        else:
            doc = build_metadata(s.script, longterm_events(s.script, 30), s.truth, fps=30,
                                 total_frames=script_timing(s.script, 30).total)
        items.append((q, json.loads(json.dumps(doc))))
    failed = run_pipeline(items, MockGenerator(), MockJudge("fail"), MockPolisher(), workers=4)
    passed = run_pipeline(items, MockGenerator(), MockJudge("pass"), MockPolisher(), workers=4)
    flipped = run_pipeline(items, MockGenerator(), MockJudge("pass"), MockPolisher(flip=True), workers=4)
    filtered_at_5 = sum(r.final_status == "filtered" and len(r.iterations) == 5 for r in failed)
    verified = sum(r.final_status == "verified" for r in passed)
    preserved = all(
        accuracy_reward(r.polished_cot, q) == 1.0
        for recs in (passed, flipped) for (q, _), r in zip(items, recs) if r.final_status == "verified"
    )
    n = len(items)
    verdict(6, filtered_at_5 == n and verified == n and preserved,
            f"{n} samples: always-fail {filtered_at_5}/{n} filtered at 5 iterations; "
            f"always-pass {verified}/{n} verified; answer preserved: {preserved}")


def test_criterion_7_metrics(verdict):
    iou = interval_iou([0, 10], [5, 15])
    pairs = random_pairs(1000, 7)
    grid = [k / 100 for k in range(101)]
    r = grounding_report(pairs, grid)
    monotone = all(r[f"R@{a}"] >= r[f"R@{b}"] for a, b in zip(grid, grid[1:]))
    got, want = grounding_report(pairs[:100]), reference_report(pairs[:100], THRESHOLDS)
    worst = max(abs(got[k] - want[k]) for k in want)
    verdict(7, abs(iou - 1 / 3) <= 1e-9 and monotone and worst <= 1e-12,
            f"IoU={iou:.10f}, R@theta monotone over 1000 pairs: {monotone}, max deviation from reference {worst:.1e}")


@pytest.fixture(scope="module")
def mixed_datasets(tmp_path_factory):
    base = tmp_path_factory.mktemp("mixed")
    workers = os.cpu_count() or 1
    out = {}
    for name, seq in (("encoded", False), ("frames", True)):
        if not seq and not encoder_available():
            continue
        cfg = GenerateConfig(output=str(base / name), mix={"total": 700, "shortterm_fraction": 0.5},
                             image_sequence=seq, workers=workers)
        start = time.perf_counter()
        report = generate_dataset(cfg)
        out[name] = (base / name, report, time.perf_counter() - start)
    return out, workers


@pytest.mark.slow
def test_criterion_8_throughput(verdict, mixed_datasets):
    runs, workers = mixed_datasets
    budgets = {"encoded": 30 * 60, "frames": 10 * 60}
    ok = set(runs) == set(budgets) and all(
        report.ok and report.produced == 700 and took < budgets[name] for name, (_, report, took) in runs.items()
    )
    detail = ", ".join(f"{name}: {r.produced}/700 in {took:.0f} s (budget {budgets[name]} s)"
                       for name, (_, r, took) in runs.items())
    verdict(8, ok, f"{detail}; {workers} worker process(es)")


def _faults(root):
    """Inject one fault of each class into a copy of ``root``; returns {class: sample id}."""
    manifest = root / "manifest.jsonl"
    recs = [json.loads(x) for x in manifest.read_text().splitlines()]
    injected = {}

    def edit_sidecar(rec, fn):
        p = root / rec["metadata_path"]
        doc = json.loads(p.read_text())
        fn(doc)
        p.write_text(json.dumps(doc))

    edit_sidecar(recs[3], lambda d: d.update(answer="not the answer"))
    injected["tampered_answer"] = (recs[3]["id"], {"replay_mismatch", "answer_mismatch"})

    video = root / recs[10]["video_path"]
    shutil.rmtree(video) if video.is_dir() else video.unlink()
    injected["missing_video"] = (recs[10]["id"], {"missing_video"})

    recs.append(dict(recs[20]))
    injected["duplicate_id"] = (recs[20]["id"], {"duplicate_id"})

    long_rec = next(r for r in recs[30:] if r["provenance"]["kind"] == "longterm")

    def break_replay(doc):
        doc["params"]["operations"] = doc["params"]["operations"][:-1]

    edit_sidecar(long_rec, break_replay)
    injected["broken_replay"] = (long_rec["id"], {"replay_mismatch"})

    mcq = next(r for r in recs[40:] if r["choices"])
    mcq["choices"] = [mcq["answer"]] * len(mcq["choices"])
    injected["bad_choices"] = (mcq["id"], {"bad_choices"})

    manifest.write_text("".join(json.dumps(r) + "\n" for r in recs))
    return injected


@pytest.mark.slow
def test_criterion_9_validation_closure(verdict, mixed_datasets, tmp_path, capsys):
    runs, _ = mixed_datasets
    name = "encoded" if "encoded" in runs else "frames"
    root = runs[name][0]
    pristine = main(["validate", str(root / "manifest.jsonl")])
    capsys.readouterr()
    broken = tmp_path / "broken"
    shutil.copytree(root, broken)
    injected = _faults(broken)
    found = validate_manifest(broken / "manifest.jsonl", check_videos=False)
    by_id: dict = {}
    for v in found:
        by_id.setdefault(v.sample_id, set()).add(v.rule)
    detected = {cls: expect <= by_id.get(sid, set()) for cls, (sid, expect) in injected.items()}
    exit_broken = main(["validate", "--skip-videos", str(broken / "manifest.jsonl")])
    capsys.readouterr()
    verdict(9, pristine == 0 and all(detected.values()) and exit_broken == 1,
            f"pristine {name} manifest exit {pristine}; injected faults detected: "
            + ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in detected.items()))
