import contextlib
import io
import json
import subprocess
import sys

import pytest

from melscribe import htparse
from melscribe.align import AlignmentMap, constant_tempo_grid
from melscribe.cli import main
from melscribe.labeler import densify_melody, reference_melody
from melscribe.synth import render_audio, write_wav


def beats(num, den=1):
    return {"num": num, "den": den}


def functional_doc(seg_id, artist, tonic=0, mode="major"):
    degrees = [1, 2, 3, 4, 5, 6, 7, 1]
    octaves = [0, 0, 0, 0, 0, 0, 0, 1]
    melody = [
        {
            "scale_degree": d,
            "accidental": 0,
            "rel_octave": o,
            "onset_beats": beats(i),
            "duration_beats": beats(1),
        }
        for i, (d, o) in enumerate(zip(degrees, octaves))
    ]
    chords = [
        {"degree": 1, "accidental": 0, "kind": "triad", "borrowed_mode": None,
         "onset_beats": beats(0), "duration_beats": beats(4)},
        {"degree": 5, "accidental": 0, "kind": "seventh", "borrowed_mode": None,
         "onset_beats": beats(4), "duration_beats": beats(4)},
    ]
    return json.dumps({
        "id": seg_id,
        "artist": artist,
        "audio_ref": f"{seg_id}-take",
        "start_s": 0.5,
        "end_s": 4.5,
        "meter": {"beats_per_bar": 4, "beat_unit": 4},
        "key": {"tonic_pc": tonic, "mode": mode},
        "key_changes": [],
        "meter_changes": [],
        "melody": melody,
        "chords": chords,
    })


def run(argv):
    """Invoke the CLI in-process, returning (exit_code, parsed_stdout)."""
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(argv)
    text = buf.getvalue().strip()
    return code, json.loads(text) if text else None


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    raw = root / "raw"
    data = root / "data"
    raw.mkdir()
    specs = [("s00", "ann", 0), ("s01", "ann", 7), ("s02", "bob", 5), ("s03", "cly", 9)]
    for seg_id, artist, tonic in specs:
        (raw / f"{seg_id}.json").write_text(functional_doc(seg_id, artist, tonic))

    code, convert_out = run(["dataset", "convert", str(raw), "--out", str(data)])
    assert code == 0
    code, split_out = run([
        "dataset", "split", "--dir", str(data), "--artists", str(data / "artists.json"),
    ])
    assert code == 0

    grid_path = root / "grid.json"
    grid = constant_tempo_grid(120.0, 0.5, 12)
    grid_path.write_text(json.dumps(grid.to_json_dict()))
    refine_outs = {}
    for seg_id, _, _ in specs:
        code, out = run([
            "align", "refine", "--grid", str(grid_path), "--start", "0.5",
            "--beats", "8", "--out", str(data / f"{seg_id}.alignment.json"),
        ])
        assert code == 0
        refine_outs[seg_id] = out

    for seg_id, _, _ in specs:
        segment = htparse.load_segment(data / f"{seg_id}.segment.json")
        amap = AlignmentMap.load(data / f"{seg_id}.alignment.json")
        write_wav(raw / f"{seg_id}.wav", render_audio(segment.melody, amap))

    feat_dir = root / "feats"
    wavs = [str(raw / f"{seg_id}.wav") for seg_id, _, _ in specs]
    code, mel_out = run(["features", "mel", *wavs, "--out-dir", str(feat_dir)])
    assert code == 0
    for seg_id, _, _ in specs:
        code, _ = run([
            "features", "resample",
            "--features", str(feat_dir / f"{seg_id}.ssft"),
            "--alignment", str(data / f"{seg_id}.alignment.json"),
            "--out", str(data / f"{seg_id}.features.ssft"),
        ])
        assert code == 0

    ckpt = root / "model.ckpt"
    code, train_out = run([
        "train", "--data", str(data), "--out", str(ckpt),
        "--steps", "60", "--eval-every", "30", "--lr", "1e-3", "--batch-size", "4",
    ])
    assert code == 0

    segment = htparse.load_segment(data / "s00.segment.json")
    amap = AlignmentMap.load(data / "s00.alignment.json")
    ref_path = root / "s00.ref.json"
    from melscribe.evaluate import save_transcript

    save_transcript(ref_path, reference_melody(densify_melody(segment.melody, 8), amap))

    return {
        "root": root, "raw": raw, "data": data, "feats": feat_dir,
        "grid": grid_path, "ckpt": ckpt, "ref": ref_path,
        "convert": convert_out, "split": split_out,
        "refine": refine_outs, "mel": mel_out, "train": train_out,
    }


def test_convert_reports_counts(corpus):
    assert corpus["convert"]["converted"] == 4
    assert corpus["convert"]["rejected"] == 0
    artists = json.loads((corpus["data"] / "artists.json").read_text())
    assert artists == {"s00": "ann", "s01": "ann", "s02": "bob", "s03": "cly"}


def test_split_assigns_every_segment(corpus):
    out = corpus["split"]
    assert out["train"] + out["valid"] + out["test"] == 4
    assert out["train"] >= 1 and out["valid"] >= 1
    by_artist = {}
    for seg_path in sorted(corpus["data"].glob("*.segment.json")):
        seg = htparse.load_segment(seg_path)
        artists = json.loads((corpus["data"] / "artists.json").read_text())
        by_artist.setdefault(artists[seg.id], set()).add(seg.split)
    # no artist straddles two splits
    assert all(len(splits) == 1 for splits in by_artist.values())


def test_refine_reports_span(corpus):
    out = corpus["refine"]["s00"]
    assert out["beats"] == 8
    assert out["start_s"] == pytest.approx(0.5)
    assert out["end_s"] == pytest.approx(4.5)


def test_mel_reports_each_file(corpus):
    assert len(corpus["mel"]["files"]) == 4
    assert all(entry["frames"] > 0 for entry in corpus["mel"]["files"])
    assert all((corpus["feats"] / f"s{i:02d}.ssft").exists() for i in range(4))


def test_train_writes_checkpoint(corpus):
    assert corpus["ckpt"].exists()
    out = corpus["train"]
    assert out["steps_run"] <= 60
    assert 0.0 <= out["valid_f1"] <= 1.0
    assert out["best_step"] % 30 == 0


def test_transcribe_both_feature_kinds_match(corpus):
    root = corpus["root"]
    est_tick = root / "est_tick.json"
    est_rate = root / "est_rate.json"
    base = [
        "transcribe", "--checkpoint", str(corpus["ckpt"]),
        "--alignment", str(corpus["data"] / "s00.alignment.json"),
    ]
    code, out_a = run(base + ["--features", str(corpus["data"] / "s00.features.ssft"),
                             "--out", str(est_tick)])
    assert code == 0
    code, out_b = run(base + ["--features", str(corpus["feats"] / "s00.ssft"),
                             "--out", str(est_rate)])
    assert code == 0
    assert est_tick.read_text() == est_rate.read_text()
    assert out_a["notes"] == out_b["notes"]
    assert out_a["tau"] == corpus["train"]["tau"]


def test_transcribe_tau_override(corpus):
    out_path = corpus["root"] / "est_tau.json"
    code, out = run([
        "transcribe", "--checkpoint", str(corpus["ckpt"]),
        "--features", str(corpus["data"] / "s00.features.ssft"),
        "--alignment", str(corpus["data"] / "s00.alignment.json"),
        "--tau", "0.9", "--out", str(out_path),
    ])
    assert code == 0
    assert out["tau"] == 0.9


def test_evaluate_self_is_perfect(corpus):
    ref = str(corpus["ref"])
    code, out = run(["evaluate", "--estimate", ref, "--reference", ref])
    assert code == 0
    assert out["f1"] == 1.0 and out["precision"] == 1.0 and out["recall"] == 1.0
    code, out = run([
        "evaluate", "--estimate", ref, "--reference", ref, "--octave-invariant",
    ])
    assert code == 0
    assert out["f1"] == 1.0 and out["best_sigma"] == 0


def test_evaluate_estimate_against_reference(corpus):
    est = corpus["root"] / "est_tick.json"
    if not est.exists():
        pytest.skip("transcription output not present")
    code, out = run([
        "evaluate", "--estimate", str(est), "--reference", str(corpus["ref"]),
        "--octave-invariant",
    ])
    assert code == 0
    assert 0.0 <= out["f1"] <= 1.0


def test_leadsheet_outputs(corpus):
    root = corpus["root"]
    chords_path = root / "chords.json"
    chords_path.write_text(json.dumps({
        "changes": [
            {"tick": 0, "root": 0, "quality": "maj"},
            {"tick": 16, "root": 7, "quality": "dom7"},
        ]
    }))
    ly = root / "sheet.ly"
    mid = root / "sheet.mid"
    code, out = run([
        "leadsheet", "--transcript", str(corpus["ref"]),
        "--alignment", str(corpus["data"] / "s00.alignment.json"),
        "--chords", str(chords_path),
        "--key", "0:major",
        "--lilypond", str(ly), "--midi", str(mid),
    ])
    assert code == 0
    assert out["key"] == {"tonic": 0, "mode": "major"}
    assert out["tempo_bpm"] == pytest.approx(120.0)
    assert out["notes"] == 8 and out["chords"] == 2
    text = ly.read_text()
    assert text.startswith('\\version')
    assert "\\key c \\major" in text
    assert mid.read_bytes()[:4] == b"MThd"


def test_leadsheet_auto_key(corpus):
    code, out = run([
        "leadsheet", "--transcript", str(corpus["ref"]),
        "--alignment", str(corpus["data"] / "s00.alignment.json"),
    ])
    assert code == 0
    # s00 is a C major scale
    assert out["key"] == {"tonic": 0, "mode": "major"}


def test_missing_input_exits_2(tmp_path):
    code, _ = run(["evaluate", "--estimate", str(tmp_path / "a.json"),
                   "--reference", str(tmp_path / "b.json")])
    assert code == 2


def test_domain_errors_exit_1(corpus, tmp_path):
    wavs = [str(corpus["raw"] / "s00.wav"), str(corpus["raw"] / "s01.wav")]
    code, _ = run(["features", "mel", *wavs, "--out", str(tmp_path / "x.ssft")])
    assert code == 1
    code, _ = run([
        "leadsheet", "--transcript", str(corpus["ref"]),
        "--alignment", str(corpus["data"] / "s00.alignment.json"),
        "--key", "0:dorian",
    ])
    assert code == 1
    code, _ = run([
        "leadsheet", "--transcript", str(corpus["ref"]),
        "--alignment", str(corpus["data"] / "s00.alignment.json"),
        "--meter", "common-time",
    ])
    assert code == 1


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data"])
    assert exc.value.code == 2


def test_convert_skips_bad_documents(tmp_path):
    good = functional_doc("g00", "ann")
    bad = json.dumps({"id": "b00", "unexpected": True})
    (tmp_path / "good.json").write_text(good)
    (tmp_path / "bad.json").write_text(bad)
    out_dir = tmp_path / "out"
    code, out = run(["dataset", "convert", str(tmp_path), "--out", str(out_dir)])
    assert code == 0
    assert out == {"converted": 1, "rejected": 1, "out": str(out_dir)}
    code, out = run([
        "dataset", "convert", str(tmp_path / "bad.json"), "--out", str(out_dir),
    ])
    assert code == 1
    assert out["converted"] == 0


def test_split_requires_artist_records(tmp_path):
    (tmp_path / "g00.json").write_text(functional_doc("g00", "ann"))
    out_dir = tmp_path / "out"
    code, _ = run(["dataset", "convert", str(tmp_path), "--out", str(out_dir)])
    assert code == 0
    (out_dir / "artists.json").write_text("{}")
    code, _ = run([
        "dataset", "split", "--dir", str(out_dir),
        "--artists", str(out_dir / "artists.json"),
    ])
    assert code == 1


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "melscribe.cli", "--help"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert "melscribe" in proc.stdout
    assert "transcribe" in proc.stdout
