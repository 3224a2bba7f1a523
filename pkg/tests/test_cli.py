import argparse
import io

import pytest

from sparseids.cli import EXIT_CODES, build_parser, main

FAST = ["--epochs", "1", "--hidden", "6", "--layers", "1", "--batch", "8", "--log-every", "50"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    data = d / "flows.csv"
    assert run("synth", "--out", data, "--flows", 150, "--seed", 4)[0] == 0
    model = d / "m.spid"
    assert run("train", "--data", data, "--out", model, *FAST)[0] == 0
    steer_model = d / "s.spid"
    assert run("train", "--data", data, "--out", steer_model, "--alpha", "uniform", *FAST)[0] == 0
    return d, data, model, steer_model


def test_pipeline_emits_all_artifacts(pipeline):
    d, data, model, steer_model = pipeline
    assert (d / "m.spid.log.csv").read_text().startswith(
        "flows,epoch,accuracy,sparsity,loss_classifier,loss_critic,loss_actor")
    code, out, _ = run("eval", "--data", data, "--checkpoint", model, "--by-attack",
                       "--metrics-out", d / "metrics.txt", "--histogram-dir", d / "hist")
    assert code == 0 and "accuracy" in out
    assert "sparsity = " in (d / "metrics.txt").read_text()
    assert (d / "hist" / "histogram_All.csv").exists()
    assert (d / "hist" / "histogram_SignalAttack.csv").exists()
    code, out, _ = run("steer", "--data", data, "--checkpoint", steer_model, "--target", 0.3,
                       "--window", 10, "--out", d / "steer.csv")
    assert code == 0 and (d / "steer.csv").read_text().startswith("window,tradeoff,sparsity")
    code, out, _ = run("inspect", "--checkpoint", model)
    assert code == 0 and "topology        shared" in out and "parameters" in out


def test_every_packet_policy_reports_zero_sparsity(pipeline):
    d, data, model, _ = pipeline
    code, out, _ = run("eval", "--data", data, "--checkpoint", model, "--policy", "every-ith", "--rate", 1.0)
    assert code == 0 and "sparsity    0.0000" in out


def test_outputs_are_byte_identical(pipeline, tmp_path):
    _, data, _, _ = pipeline
    for k in (1, 2):
        assert run("synth", "--out", tmp_path / f"s{k}.csv", "--flows", 50, "--seed", 9)[0] == 0
        assert run("train", "--data", data, "--out", tmp_path / f"m{k}.spid", *FAST)[0] == 0
        assert run("eval", "--data", data, "--checkpoint", tmp_path / f"m{k}.spid",
                   "--metrics-out", tmp_path / f"x{k}.txt")[0] == 0
    for name in ("s{}.csv", "m{}.spid", "m{}.spid.log.csv", "x{}.txt"):
        assert (tmp_path / name.format(1)).read_bytes() == (tmp_path / name.format(2)).read_bytes()


def test_higher_alpha_gives_higher_sparsity(tmp_path):
    data = tmp_path / "flows.csv"
    run("synth", "--out", data, "--flows", 2000)
    sparsity = {}
    for a in ("0", "1"):
        code, _, _ = run("train", "--data", data, "--out", tmp_path / f"a{a}.spid", "--split", 1,
                         "--epochs", 2, "--hidden", 16, "--layers", 1, "--alpha", a, "--log-every", 4000)
        assert code == 0
        last = (tmp_path / f"a{a}.spid.log.csv").read_text().splitlines()[-1]
        sparsity[a] = float(last.split(",")[3])
    assert sparsity["1"] > sparsity["0"]


def parse_error(err):
    line = err.strip()
    assert "\n" not in line and line.startswith("error kind=")
    fields = dict(kv.split("=", 1) for kv in line.split(" ", 3)[1:3])
    return fields["kind"], int(fields["exit"])


def test_exit_codes_are_distinct(pipeline, tmp_path):
    d, data, model, _ = pipeline
    assert len(set(EXIT_CODES.values())) == len(EXIT_CODES)
    cases = {
        "missing-file": ["eval", "--data", tmp_path / "nope.csv", "--checkpoint", model],
        "checkpoint": ["inspect", "--checkpoint", data],
        "topology": ["eval", "--data", data, "--checkpoint", model, "--expect-topology", "separate"],
        "steering": ["steer", "--data", data, "--checkpoint", model, "--target", 0.5],
    }
    bad = tmp_path / "bad.csv"
    bad.write_text("flow_id,pkt_idx\nx,0\n")
    cases["data"] = ["train", "--data", bad, *FAST]
    for kind, argv in cases.items():
        code, _, err = run(*argv)
        assert parse_error(err) == (kind, EXIT_CODES[kind]) and code == EXIT_CODES[kind], kind
    assert run("train")[0] == 2
    assert run("frobnicate")[0] == 2


def test_config_file_and_flag_precedence(pipeline, tmp_path):
    _, data, _, _ = pipeline
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# tiny run\ndata = {data}\nepochs = 1\nhidden = 6\nlayers = 1\nbatch = 8\nalpha = 0.5\n")
    out = tmp_path / "c.spid"
    assert run("train", "--config", cfg, "--out", out, "--alpha", "0.25")[0] == 0
    code, text, _ = run("inspect", "--checkpoint", out)
    assert "alpha = 0.25" in text and "hidden x layers 6 x 1" in text
    cfg.write_text("colour = blue\n")
    code, _, err = run("train", "--config", cfg, "--data", data)
    assert code == EXIT_CODES["usage"] and "colour" in err
    code, _, err = run("train", "--config", tmp_path / "missing.cfg", "--data", data)
    assert code == EXIT_CODES["missing-file"]


def test_every_flag_shows_its_default():
    parser = build_parser()
    subs = parser._subparsers._group_actions[0].choices
    for name, sub in subs.items():
        text = sub.format_help()
        options = text[text.index("options:"):]
        flags = [a.option_strings[-1] for a in sub._actions if not isinstance(a, argparse._HelpAction)]
        starts = sorted((options.index(f"  {f}"), f) for f in flags)
        for (pos, flag), (end, _) in zip(starts, starts[1:] + [(len(options), None)]):
            assert "default:" in options[pos:end], f"{name} {flag}"
