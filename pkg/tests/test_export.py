import json
import os
import random
import stat
import sys

import pytest

from tempsynth.cot.pipeline import timeline_lines
from tempsynth.export import (
    EncoderConfig,
    EncoderFailed,
    EncoderMissing,
    ManifestError,
    ManifestWriter,
    build_metadata,
    encode_video,
    encoder_available,
    find_encoder,
    metadata_events,
    metadata_source,
    probe_video,
    read_manifest,
    read_metadata,
    sidecar_path,
    write_image_sequence,
    write_manifest,
    write_metadata,
)
from tempsynth.longterm.scripts import generate_longterm_sample
from tempsynth.model import EventRecord, GroundTruth, Operation, QASample, ScenarioScript
from tempsynth.render.plan import RenderConfig, longterm_events, plan_shortterm
from tempsynth.render.raster import rasterize
from tempsynth.rng import new_rng
from tempsynth.shortterm.tasks import generate_shortterm_sample

needs_encoder = pytest.mark.skipif(not encoder_available(), reason="no ffmpeg available")


def frames(n, w=64, h=48):
    return [bytes([(7 * k) % 256]) * (w * h * 3) for k in range(n)]


@needs_encoder
def test_120_frames_probe_as_four_seconds(tmp_path):
    out = tmp_path / "v.mp4"
    assert encode_video(frames(120), 64, 48, 30, out) == 120
    info = probe_video(out)
    assert (info.width, info.height, info.fps, info.frames) == (64, 48, 30.0, 120)
    assert abs(info.duration_s - 4.0) <= 1 / 30


@needs_encoder
def test_rendered_clip_probes_at_configured_resolution(tmp_path):
    s = generate_shortterm_sample("collision_counting", new_rng(1), seed=1, width=128, height=96)
    plan = plan_shortterm(s.trace, RenderConfig(128, 96))
    n = encode_video(rasterize(plan), 128, 96, 30, tmp_path / "c.mp4")
    info = probe_video(tmp_path / "c.mp4")
    assert (info.width, info.height, info.fps, info.frames) == (128, 96, 30.0, n)


def test_image_sequence_fallback(tmp_path):
    out = tmp_path / "clip.frames"
    assert write_image_sequence(frames(120), 64, 48, out) == 120
    names = sorted(p.name for p in out.iterdir())
    assert names[0] == "frame_00000.png" and names[-1] == "frame_00119.png" and len(names) == 120
    info = probe_video(out)
    assert (info.width, info.height, info.frames, info.fps) == (64, 48, 120, None)


def test_missing_encoder_names_the_fallback(monkeypatch):
    monkeypatch.setattr("shutil.which", lambda name: None)
    monkeypatch.setitem(sys.modules, "imageio_ffmpeg", None)
    with pytest.raises(EncoderMissing, match="--image-sequence") as exc:
        find_encoder()
    assert "ffmpeg" in str(exc.value)
    assert not encoder_available()
    with pytest.raises(EncoderMissing):
        find_encoder("/nonexistent/ffmpeg")


@pytest.mark.skipif(os.name == "nt", reason="shell script encoder")
def test_failing_encoder_leaves_no_partial_file(tmp_path):
    fake = tmp_path / "fake-ffmpeg"
    fake.write_text('#!/bin/sh\nfor a; do last="$a"; done\necho junk > "$last"\necho "boom" >&2\nexit 3\n')
    fake.chmod(fake.stat().st_mode | stat.S_IEXEC)
    out = tmp_path / "out.mp4"
    with pytest.raises(EncoderFailed, match="status 3"):
        encode_video(frames(30), 64, 48, 30, out, EncoderConfig(binary=str(fake)))
    assert not out.exists()


def test_encoder_rejects_bad_frames(tmp_path):
    with pytest.raises(ValueError):
        encode_video(frames(2), 63, 48, 30, tmp_path / "x.mp4")
    if encoder_available():
        with pytest.raises(ValueError):
            encode_video([b"\0" * 10], 64, 48, 30, tmp_path / "x.mp4")
        assert not (tmp_path / "x.mp4").exists()


def test_sidecar_path():
    assert sidecar_path("videos/a-0000000001.mp4").as_posix() == "videos/a-0000000001.json"
    assert sidecar_path("videos/a-0000000001.frames").as_posix() == "videos/a-0000000001.json"


def swap_script():
    s = generate_longterm_sample("shell_game", "forward_prediction", new_rng(7), seed=7, T=3)
    ops = tuple(Operation(o.kind, o.params, o.op_index, 0.5) for o in s.script.operations)
    script = ScenarioScript(7, "shell_game", s.script.initial, ops, s.script.final, "initial_only",
                            "forward_prediction", 0.5)
    return script, s.truth


def test_swap_timestamp_and_round_trip(tmp_path):
    script, truth = swap_script()
    events = longterm_events(script, 30)
    doc = build_metadata(script, events, truth, fps=30, total_frames=165)
    first = next(e for e in doc["events"] if e["kind"] == "operation_applied")
    assert first["frame_index"] == 60 and first["timestamp"] == "00:02.000"
    path = write_metadata(doc, tmp_path / "m.json")
    back = read_metadata(path)
    assert back == json.loads(json.dumps(doc))
    assert metadata_source(back) == script
    assert [e.to_dict() for e in metadata_events(back)] == [e.to_dict() for e in events]
    assert back["duration"] == "00:05.500"


def test_sidecar_event_count_survives_cot_read(tmp_path):
    s = generate_shortterm_sample("collision_counting", new_rng(3), seed=3)
    doc = build_metadata(s.spec, s.trace.events, s.truth, fps=30, total_frames=s.trace.total_frames)
    back = read_metadata(write_metadata(doc, tmp_path / "m.json"))
    assert len(timeline_lines(back)) == len(s.trace.events) == len(metadata_events(back))


def test_metadata_requires_sorted_events():
    script, truth = swap_script()
    events = list(reversed(longterm_events(script, 30)))
    with pytest.raises(ValueError):
        build_metadata(script, events, truth, fps=30, total_frames=165)


def test_unknown_schema_rejected(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(ValueError):
        read_metadata(p)


def sample(i, root=None):
    s = QASample(f"s{i}", f"videos/s{i}.mp4", f"videos/s{i}.json", "collision_counting", "q?", str(i))
    if root is not None:
        for rel in (s.video_path, s.metadata_path):
            (root / rel).parent.mkdir(parents=True, exist_ok=True)
            (root / rel).write_text("x")
    return s


def test_empty_manifest(tmp_path):
    p = write_manifest([], tmp_path / "manifest.jsonl")
    assert p.read_text() == "" and read_manifest(p) == []


def test_manifest_round_trip_and_order_independence(tmp_path):
    samples = [sample(i, tmp_path) for i in range(20)]
    a = read_manifest(write_manifest(samples, tmp_path / "a.jsonl"))
    shuffled = samples[:]
    random.Random(0).shuffle(shuffled)
    b = read_manifest(write_manifest(shuffled, tmp_path / "b.jsonl"))
    assert a == samples
    assert sorted(b, key=lambda s: s.id) == sorted(a, key=lambda s: s.id)


def test_manifest_rejects_duplicates_and_dangling_refs(tmp_path):
    good = sample(1, tmp_path)
    with pytest.raises(ManifestError, match="duplicate"):
        write_manifest([good, good], tmp_path / "m.jsonl")
    with pytest.raises(ManifestError, match="does not exist") as exc:
        write_manifest([good, sample(2)], tmp_path / "m.jsonl")
    assert len(exc.value.problems) == 2
    with ManifestWriter(tmp_path / "w.jsonl") as w:
        w.append(good)
        with pytest.raises(ManifestError):
            w.append(good)


def test_corrupt_manifest_line(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text(json.dumps(sample(1).to_dict()) + "\n{not json\n")
    with pytest.raises(ManifestError, match="line 2"):
        read_manifest(p)


def test_truth_round_trip():
    t = GroundTruth("3", ("1", "2"), {"subject": "red circle"}, True, None)
    assert GroundTruth.from_dict(t.to_dict()) == t
    ev = EventRecord.at(60, 30, "wall_contact", "obj0", wall="left")
    assert EventRecord.from_dict(ev.to_dict()) == ev
