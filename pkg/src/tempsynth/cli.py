"""Command line: generate, augment-cot, validate, stats, score."""

from __future__ import annotations

import argparse
import json
import sys
import threading
from collections import Counter
from pathlib import Path

import yaml

from .cot.backends import MockGenerator, MockJudge, MockPolisher, make_backend
from .cot.pipeline import MAX_ITERS, load_records, pipeline_stats, run_pipeline
from .dataset import ConfigError, GenerateConfig, generate_dataset, parse_override
from .export import ManifestError, read_manifest, read_metadata, write_manifest
from .metrics import accuracy_reward, grounding_report
from .validate import seed_overlap, validate_manifest

MOCKS = {
    "always-pass": lambda: (MockGenerator("echo"), MockJudge("pass"), MockPolisher()),
    "always-fail": lambda: (MockGenerator("echo"), MockJudge("fail"), MockPolisher()),
    "strict": lambda: (MockGenerator("echo"), MockJudge("strict"), MockPolisher()),
}


def _print(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


def cmd_generate(args) -> int:
    try:
        overrides = dict(parse_override(o) for o in args.set or ())
        if args.output:
            overrides["output"] = args.output
        if args.workers:
            overrides["workers"] = args.workers
        if args.image_sequence:
            overrides["image_sequence"] = True
        cfg = GenerateConfig.load(args.config, overrides)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    def progress(k, total, res):
        if not args.quiet and (k == total or k % 50 == 0):
            print(f"[{k}/{total}] {res.job.sample_id}", file=sys.stderr)

    report = generate_dataset(cfg, progress)
    for f in report.failures:
        print(f"failed: {f['id']} seed={f['seed']}: {f['error']}", file=sys.stderr)
    print(f"produced {report.produced}/{report.requested} samples in {report.summary['wall_time_s']} s "
          f"-> {Path(cfg.output) / 'manifest.jsonl'}")
    return 0 if report.ok else 1


def _backends(args):
    if args.mock:
        return MOCKS[args.mock]()
    doc = yaml.safe_load(Path(args.backend_config).read_text(encoding="utf-8")) or {}
    gen = make_backend(doc["generator"])
    judge = make_backend(doc.get("judge", doc["generator"]))
    polish = make_backend(doc["polisher"]) if doc.get("polisher") else None
    return gen, judge, polish


def cmd_augment_cot(args) -> int:
    manifest = Path(args.manifest)
    root = manifest.parent
    out = Path(args.output or root / "cot")
    out.mkdir(parents=True, exist_ok=True)
    try:
        samples = read_manifest(manifest)
    except (ManifestError, OSError) as exc:
        print(f"invalid manifest: {exc}", file=sys.stderr)
        return 2
    if not args.mock and not args.backend_config:
        print("pass --mock or --backend-config", file=sys.stderr)
        return 2
    gen, judge, polish = _backends(args)

    records_path = out / "cot_records.jsonl"
    done = load_records(records_path)
    # rewrite without any line torn by an interrupt so appends start on a clean line
    records_path.write_text("".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in done.values()),
                            encoding="utf-8")
    todo = [s for s in samples if s.id not in done]
    items = [(s, read_metadata(root / s.metadata_path)) for s in todo]
    lock = threading.Lock()
    with open(records_path, "a", encoding="utf-8") as fh:
        def persist(rec):
            with lock:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
                fh.flush()

        fresh = run_pipeline(items, gen, judge, polish, max_iters=args.max_iters, workers=args.workers,
                             root=root, on_record=persist)
    by_id = {**done, **{r.sample_id: r for r in fresh}}
    records = [by_id[s.id] for s in samples if s.id in by_id]
    augmented = [s.with_cot(by_id[s.id].polished_cot) for s in samples
                 if s.id in by_id and by_id[s.id].final_status == "verified"]
    # the augmented manifest sits next to the original so relative paths still resolve
    write_manifest(augmented, root / (manifest.stem + ".cot.jsonl"), check_files=False)
    stats = pipeline_stats(records)
    stats["skipped_already_done"] = len(samples) - len(todo)
    stats["excluded"] = [r.sample_id for r in records if r.final_status != "verified"]
    (out / "cot_stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    _print({k: v for k, v in stats.items() if k != "excluded"})
    return 0


def cmd_validate(args) -> int:
    violations = []
    for m in args.manifest:
        violations += validate_manifest(m, check_videos=not args.skip_videos, purpose=args.purpose)
    if len(args.manifest) > 1:
        violations += seed_overlap(args.manifest)
    for v in violations:
        print(v)
    counts = Counter(v.rule for v in violations)
    print(f"{len(violations)} violation(s)" + (f": {dict(sorted(counts.items()))}" if counts else ""))
    return 0 if not violations else 1


def cmd_stats(args) -> int:
    samples = read_manifest(args.manifest)
    positions = Counter(s.answer_letter for s in samples if s.is_mcq)
    _print({
        "samples": len(samples),
        "per_task": dict(sorted(Counter(s.task for s in samples).items())),
        "per_mode": dict(sorted(Counter(s.question_mode or "shortterm" for s in samples).items())),
        "mcq": sum(1 for s in samples if s.is_mcq),
        "free_form": sum(1 for s in samples if not s.is_mcq),
        "answer_positions": dict(sorted(positions.items())),
        "with_cot": sum(1 for s in samples if s.cot),
    })
    return 0


def cmd_score(args) -> int:
    """Predictions JSONL: ``{"id", "output"}`` for accuracy or ``{"id", "interval", "gt"}`` for grounding."""
    samples = {s.id: s for s in read_manifest(args.manifest)} if args.manifest else {}
    rewards: dict[str, list[float]] = {}
    pairs = []
    missing = 0
    for line in Path(args.predictions).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        p = json.loads(line)
        if "interval" in p:
            pairs.append((p["interval"], p["gt"]))
        elif p.get("id") in samples:
            s = samples[p["id"]]
            rewards.setdefault(s.task, []).append(accuracy_reward(p.get("output"), s, require_tag=args.require_tag))
        else:
            missing += 1
    report: dict = {"unmatched_predictions": missing}
    if rewards:
        flat = [r for v in rewards.values() for r in v]
        report["accuracy"] = sum(flat) / len(flat)
        report["accuracy_per_task"] = {k: sum(v) / len(v) for k, v in sorted(rewards.items())}
        report["scored"] = len(flat)
    if pairs:
        report["grounding"] = grounding_report(pairs)
    _print(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tempsynth", description="Synthetic temporal-reasoning video datasets.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate videos, sidecars and a manifest from a config")
    g.add_argument("config", nargs="?", help="YAML config file")
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (repeatable)")
    g.add_argument("--output", "-o")
    g.add_argument("--workers", "-j", type=int)
    g.add_argument("--image-sequence", action="store_true", help="write PNG frame directories instead of MP4")
    g.add_argument("--quiet", "-q", action="store_true")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("augment-cot", help="add verified reasoning chains to a manifest")
    a.add_argument("manifest")
    a.add_argument("--backend-config", help="YAML with generator/judge/polisher backend settings")
    a.add_argument("--mock", choices=sorted(MOCKS), help="use deterministic mock backends")
    a.add_argument("--output", help="directory for records and stats (default: <manifest dir>/cot)")
    a.add_argument("--max-iters", type=int, default=MAX_ITERS)
    a.add_argument("--workers", type=int, default=4)
    a.set_defaults(func=cmd_augment_cot)

    v = sub.add_parser("validate", help="check manifests against their files and sidecars")
    v.add_argument("manifest", nargs="+")
    v.add_argument("--purpose", choices=["rl", "cot"], help="require seeds from this range")
    v.add_argument("--skip-videos", action="store_true", help="skip decoding videos")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("stats", help="summarize a manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_stats)

    sc = sub.add_parser("score", help="score predictions (accuracy reward and grounding metrics)")
    sc.add_argument("predictions")
    sc.add_argument("--manifest")
    sc.add_argument("--require-tag", action="store_true", help="only accept answers inside <answer>...</answer>")
    sc.set_defaults(func=cmd_score)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
