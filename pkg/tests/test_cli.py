import json
import re

import pytest
from hypothesis import given, settings, strategies as st

from capiso.cli import ANCHORS, SUBCOMMANDS, RunConfig, UsageError, anchor, main, parse_config_text

configs = st.builds(
    RunConfig,
    subcommand=st.sampled_from(SUBCOMMANDS),
    weight=st.sampled_from(["const", "monomial:xn:1", "monomial:xn:2.5", "radial:1"]),
    region=st.one_of(st.none(), st.sampled_from(["cap:1:0", "cap:0.5:0.2"])),
    n=st.integers(2, 5),
    alpha=st.one_of(st.none(), st.floats(0, 4, allow_nan=False)),
    lam=st.floats(-0.99, 0.99, allow_nan=False),
    samples=st.integers(1, 10 ** 7),
    seed=st.integers(0, 2 ** 31),
    sigma=st.floats(0.5, 10, allow_nan=False),
    levels=st.integers(2, 512),
)


@settings(max_examples=200, deadline=None)
@given(configs)
def test_config_text_round_trip(cfg):
    text = cfg.to_text()
    back = RunConfig.from_text(text)
    assert back == cfg
    assert back.to_text() == text


def test_config_comments_and_blank_lines():
    assert parse_config_text("# c\n\nseed = 4\nlambda=0.5\n") == {"seed": "4", "lambda": "0.5"}


@pytest.mark.parametrize("text, field", [("bogus = 1\n", "bogus"), ("seed = x\n", "seed"),
                                         ("subcommand = nope\n", "subcommand"), ("no equals\n", "line 1")])
def test_bad_config_names_the_field(text, field):
    with pytest.raises(UsageError, match=field):
        RunConfig.from_text(text)


def test_anchor_names_are_descriptive():
    for key in ANCHORS:
        assert not re.search(r"\b(Eq|Sec|Section|Theorem|Lemma)\b|\d+\.\d+", anchor(key)), anchor(key)
    assert anchor("zero_abp_deficit") != anchor("equimeasurable")


def _csv_body(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# generated ")
    return lines[1:]


def test_iso_exit_zero_and_summary(tmp_path, capsys):
    out = tmp_path / "a"
    code = main(["iso", "--region", "cap:1:0", "--weight", "const", "--n", "2", "--samples", "20000",
                 "--seed", "1", "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary
    for row in summary:
        assert set(row) == {"check_id", "paper_anchor", "value", "se", "z", "pass"}
    assert "PASS" in capsys.readouterr().out


def test_csv_body_is_deterministic_per_seed(tmp_path):
    args = ["iso", "--region", "cap:1:0", "--weight", "monomial:xn:1", "--n", "2", "--samples", "20000",
            "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert _csv_body(tmp_path / "a" / "iso.csv") == _csv_body(tmp_path / "b" / "iso.csv")


def test_failed_check_exits_one(tmp_path):
    code = main(["sobolev", "--n", "3", "--p", "2", "--weight", "const", "--samples", "20000",
                 "--tolerance", "1e-12", "--out", str(tmp_path)])
    assert code == 1
    rows = json.loads((tmp_path / "summary.json").read_text())
    assert not rows[0]["pass"]


@pytest.mark.parametrize("argv, msg", [
    (["iso", "--weight", "bogus:7"], "bogus"),
    (["sobolev", "--n", "2", "--p", "2", "--weight", "const"], "p"),
    (["symmetrize", "--field", "nope"], "field"),
    (["abp", "--lambda", "0.3"], "lambda"),
    (["iso", "--weight", "monomial:xn:1", "--alpha", "2"], "alpha"),
])
def test_usage_errors_exit_two(tmp_path, capsys, argv, msg):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert msg in capsys.readouterr().err


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("region = cap:1:0\nsamples = 10000\nseed = 9\n")
    out = tmp_path / "o"
    assert main(["iso", "--config", str(cfg), "--seed", "2", "--out", str(out)]) == 0
    saved = RunConfig.from_text((out / "run.cfg").read_text())
    assert saved.seed == 2 and saved.samples == 10000 and saved.subcommand == "iso"
