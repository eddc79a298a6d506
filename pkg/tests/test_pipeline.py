import json
import math

import numpy as np
import pytest

from tubeforge.cli import main
from tubeforge.containers import read_manifest, read_npy, read_tensor
from tubeforge.errors import ConfigError
from tubeforge.ingest import LabelVector, open_raw_stream
from tubeforge.labels import Label
from tubeforge.pipeline import PipelineConfig, plan_video, run_extract
from tubeforge.synthetic import random_video, two_person_clip


def extract_args(paths, out, *extra):
    return ["extract", "--frames", str(paths["frames"]), "--width", "64", "--height", "64",
            "--detections", str(paths["detections"]), "--labels", str(paths["labels"]),
            "--out", str(out), *extra]


def test_two_person_clip_end_to_end(tmp_path, capsys):
    paths = two_person_clip().write(tmp_path / "in")
    assert main(extract_args(paths, tmp_path / "out")) == 0
    assert "volumes=2 clusters=2 tubes=2 fight=2" in capsys.readouterr().out
    manifest = read_manifest(tmp_path / "out" / "manifest.json")
    assert manifest.counts == {"fight": 2, "nonfight": 0}
    for entry in manifest.entries:
        shape, data = read_npy(tmp_path / "out" / entry.path)
        assert shape == (128, 224, 224, 3)
        assert entry.provenance["best_box"] == [10, 10, 47, 52]


def test_pipeline_matches_direct_crop_and_resize(tmp_path):
    from tubeforge.tubes import resize_bilinear

    clip = two_person_clip(frame_count=128)
    frames = clip.frames()
    config = PipelineConfig(out_dir=str(tmp_path), out_width=32, out_height=24)
    entries, _ = run_extract(open_raw_stream(frames.tobytes(), 64, 64, frame_count=128),
                             clip.labels, clip.detections, config)
    _, data = read_npy(tmp_path / entries[0].path)
    x1, y1, x2, y2 = entries[0].provenance["crop_box"]
    from tubeforge.tubes import ResizeSpec
    np.testing.assert_array_equal(data, resize_bilinear(frames[:, y1:y2, x1:x2], ResizeSpec(32, 24)))


def test_zero_detections_warns(tmp_path, capsys, caplog):
    clip = two_person_clip()
    clip.detections, clip.all_detections = {}, {}
    paths = clip.write(tmp_path / "in")
    assert main(extract_args(paths, tmp_path / "out")) == 0
    assert "tubes=0" in capsys.readouterr().out
    assert "no clusters" in caplog.text
    assert read_manifest(tmp_path / "out" / "manifest.json").entries == []


def test_label_length_mismatch_is_config_error(tmp_path, capsys):
    paths = two_person_clip().write(tmp_path / "in")
    paths["labels"].write_text("0,299,fight\n")
    assert main(extract_args(paths, tmp_path / "out")) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error[config:IntervalOutOfRange]")


def test_detection_beyond_video_is_config_error(tmp_path, capsys):
    paths = two_person_clip(frame_count=128).write(tmp_path / "in")
    with open(paths["detections"], "a") as fh:
        fh.write(json.dumps({"frame": 500, "box": [0, 0, 5, 5], "score": 0.5, "class": 0}) + "\n")
    assert main(extract_args(paths, tmp_path / "out")) == 2
    assert capsys.readouterr().err.startswith("error[config:ConfigError]")


def test_bad_config_value(tmp_path, capsys):
    paths = two_person_clip().write(tmp_path / "in")
    assert main(extract_args(paths, tmp_path / "out", "--workers", "0")) == 2
    assert "workers must be >= 1" in capsys.readouterr().err


def test_missing_input_is_io_error(tmp_path, capsys):
    paths = two_person_clip().write(tmp_path / "in")
    paths["detections"] = tmp_path / "nope.jsonl"
    assert main(extract_args(paths, tmp_path / "out")) == 4
    assert capsys.readouterr().err.startswith("error[io:FileNotFoundError]")


def test_config_file_with_flag_override(tmp_path):
    paths = two_person_clip().write(tmp_path / "in")
    cfg = tmp_path / "run.toml"
    cfg.write_text('[extract]\nvolume-length = 64\nformat = "chunked"\nchunk_frames = 8\nout_width = 16\nout_height = 16\n')
    assert main(extract_args(paths, tmp_path / "out", "--config", str(cfg), "--volume-length", "128")) == 0
    manifest = read_manifest(tmp_path / "out" / "manifest.json")
    assert len(manifest) == 2
    assert all(e.format == "chunked" and e.shape == (128, 16, 16, 3) for e in manifest.entries)


def test_unknown_config_key(tmp_path, capsys):
    paths = two_person_clip().write(tmp_path / "in")
    cfg = tmp_path / "run.toml"
    cfg.write_text("bogus = 1\n")
    assert main(extract_args(paths, tmp_path / "out", "--config", str(cfg))) == 2
    assert "unknown setting 'bogus'" in capsys.readouterr().err


@pytest.mark.parametrize("fmt", ["npy", "flatbin", "chunked"])
def test_all_formats_round_trip_through_manifest(tmp_path, fmt):
    paths = two_person_clip(frame_count=130).write(tmp_path / "in")
    assert main(extract_args(paths, tmp_path / "out", "--format", fmt, "--out-size", "8", "--pad-remainder")) == 0
    manifest = read_manifest(tmp_path / "out" / "manifest.json")
    assert len(manifest) == 2
    for e in manifest.entries:
        shape, data = read_tensor(fmt, tmp_path / "out" / e.path)
        assert shape == (128, 8, 8, 3)


def test_pad_remainder_repeats_last_frame(tmp_path):
    clip = two_person_clip(frame_count=130)
    frames = clip.frames()
    config = PipelineConfig(out_dir=str(tmp_path), out_width=4, out_height=4, pad_remainder=True)
    entries, summary = run_extract(open_raw_stream(frames.tobytes(), 64, 64, frame_count=130),
                                   clip.labels, clip.detections, config)
    assert summary.volumes == 2
    _, tail = read_npy(tmp_path / entries[1].path)
    assert (tail[1:] == tail[1]).all()


def test_debug_cluster_dump(tmp_path):
    paths = two_person_clip().write(tmp_path / "in")
    dump = tmp_path / "clusters.json"
    assert main(extract_args(paths, tmp_path / "out", "--debug-clusters", str(dump), "--out-size", "4")) == 0
    volumes = json.loads(dump.read_text())["volumes"]
    assert [v["start_frame"] for v in volumes] == [0, 128]
    assert volumes[0]["clusters"][0]["best_box"] == [10, 10, 47, 52]
    assert len(volumes[0]["clusters"][0]["members"]) == 256


def test_plan_video_rejects_inconsistent_labels():
    with pytest.raises(ConfigError):
        plan_video(10, LabelVector(np.zeros(9, bool)), {})


def test_plan_video_labels_and_counts():
    video = random_video(5)
    plans = plan_video(video.frame_count, video.labels, video.detections)
    assert len(plans) == video.frame_count // 128
    for p in plans:
        fight = int(video.labels.fight[p.volume.start_frame:p.volume.stop_frame].sum())
        assert (p.label.value is Label.FIGHT) == (fight * 10 > 7 * 128)
