from __future__ import annotations

import json
from pathlib import Path

import pytest

from cfsim_runner.cli import main
from cfsim_runner.inference import InferenceError, RunnerJob, run_inference
from cfsim_runner.labels import NVD_CLASS_NAMES
from cfsim_runner.models import ModelResolutionError, resolve_model

from conftest import frame_ids, write_frame_images, write_manifest


def read_log(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


class TestModels:
    def test_builtin_resolves(self):
        model = resolve_model("builtin:tiny17")
        assert len(model.labels) == 17
        assert model.labels == NVD_CLASS_NAMES
        assert model.preprocess_info["input_size"] == 64

    def test_builtin_weights_stable(self):
        import torch

        a = resolve_model("builtin:tiny17").module
        b = resolve_model("builtin:tiny17").module
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_unknown_scheme(self):
        with pytest.raises(ModelResolutionError, match="unresolvable"):
            resolve_model("mystery-model")

    def test_unknown_builtin(self):
        with pytest.raises(ModelResolutionError):
            resolve_model("builtin:huge99")

    def test_missing_file_model(self):
        with pytest.raises(ModelResolutionError, match="not found"):
            resolve_model("file:/nonexistent/model.pt")


class TestRunInference:
    def test_two_frame_manifest_line_counts(self, tmp_path):
        manifest = tmp_path / "m.json"
        doc = write_manifest(manifest, ["t0", "t1"], [0.0], 0.0)
        images = tmp_path / "img"
        write_frame_images(images, frame_ids(doc))
        out = tmp_path / "preds.jsonl"
        run_inference(RunnerJob(str(manifest), str(images), "builtin:tiny17", str(out), k=5))
        lines = read_log(out)
        assert len(lines) == 3  # meta + 2 frames
        assert lines[0]["trial_id"] == "__meta__"
        assert "preprocess" in lines[0]
        for rec in lines[1:]:
            assert len(rec["topk"]) == 5
            scores = [s for _, s in rec["topk"]]
            assert scores == sorted(scores, reverse=True)
            labels = [l for l, _ in rec["topk"]]
            assert len(set(labels)) == 5

    def test_frames_in_enumeration_order(self, toy_sweep):
        manifest, images, tmp = toy_sweep
        out = tmp / "preds.jsonl"
        run_inference(RunnerJob(str(manifest), str(images), "builtin:tiny17", str(out)))
        records = read_log(out)[1:]
        assert [r["theta"] for r in records] == [0.0, 1.0, 2.0, 3.0, 4.0]
        assert records[0]["frame_id"] == "t0/custom/000"

    def test_absent_reference_frame_emitted(self, tmp_path):
        manifest = tmp_path / "m.json"
        doc = write_manifest(manifest, ["t0"], [-1.0, 0.0, 1.0], "absent")
        images = tmp_path / "img"
        write_frame_images(images, frame_ids(doc))
        out = tmp_path / "preds.jsonl"
        run_inference(RunnerJob(str(manifest), str(images), "builtin:tiny17", str(out)))
        records = read_log(out)[1:]
        assert records[0]["theta"] == "reference"
        assert records[0]["frame_id"] == "t0/custom/ref"
        assert len(records) == 4

    def test_missing_image_fails_fast_naming_frame(self, tmp_path):
        manifest = tmp_path / "m.json"
        doc = write_manifest(manifest, ["t0"], [0.0, 1.0], 0.0)
        images = tmp_path / "img"
        write_frame_images(images, frame_ids(doc)[:1])
        with pytest.raises(InferenceError, match="t0/custom/001"):
            run_inference(
                RunnerJob(str(manifest), str(images), "builtin:tiny17", str(tmp_path / "o.jsonl"))
            )

    def test_k_exceeding_classes(self, toy_sweep):
        manifest, images, tmp = toy_sweep
        with pytest.raises(InferenceError, match="17-class"):
            run_inference(
                RunnerJob(str(manifest), str(images), "builtin:tiny17", str(tmp / "o.jsonl"), k=50)
            )

    def test_deterministic_topk_sequences(self, toy_sweep):
        manifest, images, tmp = toy_sweep
        a, b = tmp / "a.jsonl", tmp / "b.jsonl"
        for out in (a, b):
            run_inference(RunnerJob(str(manifest), str(images), "builtin:tiny17", str(out), batch_size=2))
        labels_a = [[l for l, _ in r["topk"]] for r in read_log(a)[1:]]
        labels_b = [[l for l, _ in r["topk"]] for r in read_log(b)[1:]]
        assert labels_a == labels_b

    def test_torchscript_file_model(self, tmp_path, toy_sweep):
        import torch

        from cfsim_runner.models import TinyNet

        manifest, images, tmp = toy_sweep
        torch.manual_seed(7)
        scripted = torch.jit.script(TinyNet(17))
        model_path = tmp_path / "tiny.pt"
        torch.jit.save(scripted, str(model_path))
        out = tmp / "file_preds.jsonl"
        run_inference(RunnerJob(str(manifest), str(images), f"file:{model_path}", str(out)))
        records = read_log(out)
        assert len(records) == 6
        assert records[1]["model_id"] == "file:tiny.pt"


class TestCli:
    def test_unknown_model_nonzero_exit_names_model(self, toy_sweep, capsys):
        manifest, images, tmp = toy_sweep
        code = main(
            ["--manifest", str(manifest), "--images", str(images),
             "--model", "builtin:nope", "--out", str(tmp / "o.jsonl")]
        )
        assert code != 0
        assert "builtin:nope" in capsys.readouterr().err

    def test_missing_flag_usage(self):
        assert main(["--manifest", "m.json"]) == 2

    def test_happy_path(self, toy_sweep):
        manifest, images, tmp = toy_sweep
        out = tmp / "cli.jsonl"
        code = main(
            ["--manifest", str(manifest), "--images", str(images),
             "--model", "builtin:tiny17", "--k", "5", "--out", str(out)]
        )
        assert code == 0
        assert len(read_log(out)) == 6
