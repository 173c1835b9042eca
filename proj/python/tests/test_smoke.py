# Copyright 2026 The pairwise-vl Authors
# SPDX-License-Identifier: Apache-2.0

import json
import pathlib

import pytest

import pairwise_vl as pv

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "mini"
DATASET = FIXTURES / "dataset.jsonl"


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("PAIRWISE_VL_CACHE_DIR", str(tmp_path / "cache"))


def test_config_names_and_labels():
    names = pv.config_names()
    assert names[0] == "one-turn"
    assert len(names) == 6
    assert pv.config_label("two-turn-vision-cot") == "GPT-4V Desp + GPT-4V CoT (2-turns)"
    with pytest.raises(pv.UsageError):
        pv.config_label("nope")


def test_load_dataset():
    ds = pv.load_dataset(DATASET)
    assert len(ds["pairs"]) == 2
    assert ds["pairs"][0]["tags"] == ["Object", "Symbolic"]
    assert len(ds["digest"]) == 64


def test_render_one_turn_text_probe():
    msgs = pv.render(DATASET, 0, "text-0", "one-turn")
    parts = msgs[0]["parts"]
    assert [p["type"] for p in parts] == ["image", "text"]
    assert parts[1]["text"] == (
        "Does this image present (A) a dog chases a cat, or (B) a cat chases a dog? "
        "Note, you must choose one of the two options."
    )


def test_extract_choice():
    r = pv.extract_choice("I think so. The answer is (B).", "text")
    assert r["choice"] == "B"
    assert r["rule"] == "R1"
    assert pv.extract_choice("no idea", "text") is None
    assert pv.extract_choice("The second image fits.", "image")["choice"] == "second"


def test_scores_and_percent():
    assert pv.pair_scores(True, True, True, False) == (1, 0, 0)
    assert pv.percent(36, 41) == "87.80"
    assert pv.percent(0, 3) == "0.00"


def test_run_score_and_report(tmp_path):
    out = tmp_path / "run"
    summary = pv.run(DATASET, FIXTURES / "oracle.json", "one-turn", out, concurrency=2)
    assert summary["text_score"] == 100.0
    assert summary["group_score"] == 100.0
    before = (out / "summary.json").read_bytes()
    rescored = pv.score(out)
    assert rescored == json.loads(before)
    assert (out / "summary.json").read_bytes() == before

    table = pv.report_table([out], "csv")
    assert table.splitlines()[1] == "GPT-4V (1-turn),100.00,100.00,100.00"
    assert "[1 | 1]" in pv.report_tags(out, "text", "text")


def test_two_turn_image_setting_is_rejected(tmp_path):
    with pytest.raises(pv.UsageError):
        pv.run(DATASET, FIXTURES / "oracle.json", "two-turn-text-cot", tmp_path / "r",
               setting="image")


def test_cli_exit_codes(tmp_path):
    code, out, _ = pv.cli(["validate", str(DATASET)])
    assert code == 0
    assert out.startswith("2 pairs")
    code, _, _ = pv.cli(["run", "--config", "two-turn-vision-cot", "--setting", "image",
                         "--dataset", str(DATASET), "--backend", str(FIXTURES / "oracle.json"),
                         "--out", str(tmp_path / "r")])
    assert code == 2
    code, _, _ = pv.cli(["score", str(tmp_path / "missing")])
    assert code == 1
