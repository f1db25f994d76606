import json

import pytest

from canarykit.cli import main
from canarykit.corpus import load_corpus


@pytest.fixture
def keyfile(tmp_path):
    p = tmp_path / "org.key"
    p.write_bytes(b"cli test organisation key\n")
    return p


@pytest.fixture
def cover(tmp_path):
    p = tmp_path / "cover.txt"
    p.write_text(load_corpus()[0][1], encoding="utf-8")
    return p


def test_encode_then_scan(tmp_path, keyfile, cover, capsys):
    out, reg, man = tmp_path / "c.txt", tmp_path / "reg.txt", tmp_path / "manifest.tsv"
    rc = main(["encode", "--config", "M5", "--file-id", "a.txt", "--key-file", str(keyfile),
               "--input", str(cover), "--output", str(out), "--registry", str(reg), "--manifest", str(man)])
    assert rc == 0
    assert man.read_text().split("\t")[:3] == ["a.txt", "hmac", "M5"]
    capsys.readouterr()
    assert main(["scan", "--input", str(out), "--registry", str(reg)]) == 3
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["matched"] and verdict["layer"] == "WS"
    assert main(["scan", "--input", str(cover), "--registry", str(reg)]) == 0


def test_encode_key_from_env(tmp_path, keyfile, monkeypatch, capsys):
    monkeypatch.setenv("CANARYKIT_KEY_FILE", str(keyfile))
    assert main(["encode", "--config", "M4", "--file-id", "x", "--output", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o").read_text().isascii()


def test_eddsa_registry_via_cli(tmp_path, keyfile, cover):
    out, reg = tmp_path / "c.txt", tmp_path / "reg.txt"
    big = tmp_path / "big.txt"
    big.write_text(cover.read_text() * 2)
    assert main(["encode", "--scheme", "eddsa", "--file-id", "a", "--key-file", str(keyfile),
                 "--input", str(big), "--output", str(out), "--registry", str(reg)]) == 0
    assert main(["scan", "--scheme", "eddsa", "--input", str(out), "--registry", str(reg)]) == 3


def test_scan_empty_input(tmp_path):
    empty, reg = tmp_path / "e.txt", tmp_path / "r.json"
    empty.write_text("")
    reg.write_text("# empty registry\n")
    assert main(["scan", "--input", str(empty), "--registry", str(reg)]) == 0


def test_capacity_error(tmp_path, keyfile, capsys):
    tiny = tmp_path / "tiny.txt"
    tiny.write_text("two words")
    assert main(["encode", "--file-id", "a", "--key-file", str(keyfile), "--input", str(tiny)]) == 2
    assert "capacity" in capsys.readouterr().err


def test_missing_key(monkeypatch):
    monkeypatch.delenv("CANARYKIT_KEY_FILE", raising=False)
    assert main(["encode", "--config", "M4", "--file-id", "a"]) == 2


def test_transform(tmp_path, capsys):
    src = tmp_path / "in.txt"
    src.write_text("a\u2009b\u200bc", encoding="utf-8")
    assert main(["transform", "--chain", "Tier-2", "--input", str(src)]) == 0
    assert capsys.readouterr().out == "a bc"
    assert main(["transform", "--chain", "T05,T07", "--input", str(src)]) == 0


def test_transform_paraphrase_unavailable(tmp_path, monkeypatch):
    monkeypatch.delenv("CANARYKIT_PARAPHRASE_CMD", raising=False)
    src = tmp_path / "in.txt"
    src.write_text("x")
    assert main(["transform", "--chain", "T12", "--input", str(src)]) == 2


def test_heatmap_verb(tmp_path, capsys):
    out = tmp_path / "h.csv"
    assert main(["heatmap", "--configs", "M1", "--chains", "T00;T05", "--trials", "2", "--output", str(out)]) == 0
    text = capsys.readouterr().out
    assert "M1" in text and out.exists() and (tmp_path / "h_raw.csv").exists()
