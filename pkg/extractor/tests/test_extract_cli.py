from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

from pta.ptae import read_embeddings
from pta_extract.cli import main


def _write_job(tmp_path, **overrides) -> str:
    rng = np.random.default_rng(3)
    for name, base in (("brick", 200), ("moss", 60)):
        cls_dir = tmp_path / "data" / name
        cls_dir.mkdir(parents=True, exist_ok=True)
        for i in range(4):
            px = (rng.integers(0, 40, size=(8, 8, 3)) + base).astype(np.uint8)
            Image.fromarray(px).save(cls_dir / f"{i}.png")
    doc = dict(
        model="hashed:24",
        dataset_path=str(tmp_path / "data"),
        class_names=["brick", "moss"],
        anchors_path=str(tmp_path / "anchors.ptae"),
        stream_path=str(tmp_path / "stream.ptae"),
    )
    doc.update(overrides)
    job = tmp_path / "job.json"
    job.write_text(json.dumps(doc))
    return str(job)


def test_all_subcommand_writes_both_files(tmp_path, capsys) -> None:
    job = _write_job(tmp_path)
    assert main(["all", "--manifest", job]) == 0
    out = capsys.readouterr().out
    assert str(tmp_path / "anchors.ptae") in out
    assert str(tmp_path / "stream.ptae") in out
    anchors = read_embeddings(tmp_path / "anchors.ptae")
    stream = read_embeddings(tmp_path / "stream.ptae")
    assert anchors.matrix.shape == (2, 24)
    assert stream.matrix.shape == (8, 24)
    assert stream.labels.tolist() == [0] * 4 + [1] * 4


def test_anchors_subcommand_writes_only_anchors(tmp_path) -> None:
    job = _write_job(tmp_path)
    assert main(["anchors", "--manifest", job]) == 0
    assert (tmp_path / "anchors.ptae").exists()
    assert not (tmp_path / "stream.ptae").exists()


def test_bad_manifest_exits_one(tmp_path, capsys) -> None:
    job = _write_job(tmp_path, class_names=["brick", "brick"])
    assert main(["all", "--manifest", job]) == 1
    assert "duplicate" in capsys.readouterr().err


def test_missing_manifest_exits_two(tmp_path, capsys) -> None:
    assert main(["all", "--manifest", str(tmp_path / "absent.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_dataset_exits_two(tmp_path) -> None:
    job = _write_job(tmp_path, dataset_path=str(tmp_path / "nowhere"))
    assert main(["stream", "--manifest", job]) == 2


def test_usage_error_exits_one(capsys) -> None:
    assert main([]) == 1
    capsys.readouterr()


def test_unknown_backend_exits_one(tmp_path, capsys) -> None:
    job = _write_job(tmp_path, model="resnet:50")
    assert main(["anchors", "--manifest", job]) == 1
    assert "unknown model identifier" in capsys.readouterr().err
