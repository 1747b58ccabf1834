import json

import pytest
import yaml

from ganbound import cli
from ganbound.config import (
    config_hash,
    dump_config,
    example_config,
    parse_config,
)
from ganbound.errors import ConfigError
from ganbound.experiments import ERROR_KINDS, ExperimentConfig, GapRecord
from ganbound.report import GAPS_HEADER, emit_results, gaps_csv, new_manifest, read_gaps_csv

MINIMAL = """
error_kind: theorem1
master_seed: 7
discriminator: {layer_dims: [1, 1, 1], norm_bounds: [1, 1], activations: [relu]}
generator: {layer_dims: [1, 1], norm_bounds: [1]}
base: {kind: uniform_cube, radius: 1.0, dimension: 1}
target: {kind: pushforward, theta: [[[0.7]]]}
n_grid: [16, 32, 64]
search: {grid_points: 21, theta_grid_points: 201}
"""


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, MINIMAL))
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.N_pop == 100_000 and cfg.replicates == 200
    assert cfg.abs_mode is True and cfg.sup_method == "grid" and cfg.epsilon_slack == 0.0
    assert cfg.target.generator == cfg.gspec


def test_master_seed_required(tmp_path):
    text = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith("master_seed"))
    with pytest.raises(ConfigError, match="master_seed required"):
        parse_config(write(tmp_path, text))


def test_log_phi_rejected_by_precheck(tmp_path):
    with pytest.raises(ConfigError, match="precheck.*log"):
        parse_config(write(tmp_path, MINIMAL + "phi: log\n"))


@pytest.mark.parametrize("extra,match", [
    ("surprise: 1\n", "unknown key"),
    ("replicates: two\n", "integer"),
    ("abs_mode: maybe\n", "abs_mode"),
    ("search: {grid_pts: 3}\n", "unknown key"),
])
def test_config_errors(tmp_path, extra, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(write(tmp_path, MINIMAL + extra))


def test_unsorted_grid_rejected(tmp_path):
    with pytest.raises(ConfigError, match="sorted"):
        parse_config(write(tmp_path, MINIMAL.replace("[16, 32, 64]", "[64, 32]")))


def test_abs_mode_strings(tmp_path):
    assert parse_config(write(tmp_path, MINIMAL + "abs_mode: 'off'\n")).abs_mode is False
    assert parse_config(write(tmp_path, MINIMAL + "abs_mode: off\n")).abs_mode is False


@pytest.mark.parametrize("kind", ERROR_KINDS)
def test_roundtrip_and_examples(tmp_path, kind):
    text = example_config(kind)
    cfg = parse_config(write(tmp_path, text))
    assert cfg.error_kind == kind
    again = parse_config(write(tmp_path, dump_config(cfg), "again.yaml"))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_other_examples_parse(tmp_path):
    assert parse_config(write(tmp_path, example_config("bounds")), "bounds").B_X == 1.0
    req = parse_config(write(tmp_path, example_config("distance")), "distance")
    assert req.variant == "empirical_mn" and req.n == 1000
    with pytest.raises(ConfigError):
        example_config("nope")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "absent.yaml")


def records(points=3, reps=2):
    return [GapRecord("e", "theorem1", 2**(k + 4), 2**(k + 4), r, 0.1 / (k + 1) + 0.01 * r, True, "grid", "grid", 11 * k + r)
            for k in range(points) for r in range(reps)]


def test_emit_row_count_and_identity(tmp_path):
    m = new_manifest("h", 1, {}, "experiment")
    emit_results(records(), {}, m, tmp_path / "a")
    lines = (tmp_path / "a" / "gaps.csv").read_text().splitlines()
    assert len(lines) == 7 and lines[0] == ",".join(GAPS_HEADER)
    emit_results(records(), {}, new_manifest("h", 1, {}, "experiment"), tmp_path / "b")
    assert (tmp_path / "a" / "gaps.csv").read_bytes() == (tmp_path / "b" / "gaps.csv").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert set(manifest["outputs"]) >= {"gaps.csv", "rate_fit.json", "plot_data.csv", "manifest.json"}
    assert manifest["status"] == "complete"


def test_emit_empty_is_error(tmp_path):
    with pytest.raises(ValueError):
        emit_results([], {}, new_manifest("h", 1, {}, "experiment"), tmp_path)
    assert not (tmp_path / "gaps.csv").exists()


def test_csv_format_roundtrip(tmp_path):
    recs = records()
    recs[0].gap = 0.1 + 0.2
    text = gaps_csv(recs)
    assert "0.30000000000000004" in text
    p = tmp_path / "g.csv"
    p.write_text(text)
    back = read_gaps_csv(p)
    assert [r.gap for r in back] == [r.gap for r in sorted(recs, key=GapRecord.sort_key)]


def test_cli_experiment_end_to_end(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL + "replicates: 3\n")
    out = tmp_path / "out"
    assert cli.main(["experiment", "--config", str(cfg), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"gaps.csv", "rate_fit.json", "bound_report.json", "plot_data.csv", "manifest.json",
            "rate_fit.png", "dyadic_blocks.png"} <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert names == set(manifest["outputs"])
    assert manifest["config"]["replicates"] == 3 and manifest["config"]["N_pop"] == 100_000
    plot = (out / "plot_data.csv").read_text().splitlines()
    assert plot[0] == "n,median_gap,q25,q75,predicted_gap_from_fit" and len(plot) == 4
    first = (out / "gaps.csv").read_bytes()
    assert cli.main(["experiment", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == 0
    assert (out / "gaps.csv").read_bytes() == first
    assert cli.main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "o2"), "--seed", "99"]) == 0
    assert (tmp_path / "o2" / "gaps.csv").read_bytes() != first


def test_manifest_written_before_computation(tmp_path, monkeypatch):
    seen = {}

    def fake_run(cfg, threads=1, diagnostics=None):
        seen["manifest"] = json.loads((tmp_path / "out" / "manifest.json").read_text())
        return records()

    monkeypatch.setattr(cli, "run_error_experiment", fake_run)
    assert cli.main(["experiment", "--config", str(write(tmp_path, MINIMAL)), "--out", str(tmp_path / "out")]) == 0
    assert seen["manifest"]["status"] == "running"
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["status"] == "complete"


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["experiment", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert cli.main(["experiment", "--config", str(write(tmp_path, MINIMAL + "phi: log\n"))]) == 2
    assert cli.main(["experiment"]) == 2
    bad_out = tmp_path / "file"
    bad_out.write_text("x")
    assert cli.main(["experiment", "--config", str(write(tmp_path, MINIMAL)), "--out", str(bad_out / "sub")]) == 4
    # grid sup over a discriminator above the cap is a numerical-domain failure at run time
    dist = yaml.safe_load(example_config("distance"))
    dist["discriminator"] = {"layer_dims": [1, 4, 1], "norm_bounds": [1, 1], "activations": ["relu"]}
    assert cli.main(["distance", "--config", str(write(tmp_path, yaml.safe_dump(dist), "d.yaml")),
                     "--out", str(tmp_path / "d")]) == 3


def test_cli_example_config(capsys):
    assert cli.main(["--example-config", "plugin_ji"]) == 0
    assert "error_kind: plugin_ji" in capsys.readouterr().out
    assert cli.main(["--example-config", "nope"]) == 2


def test_cli_bounds(tmp_path, capsys):
    cfg = write(tmp_path, example_config("bounds"))
    assert cli.main(["bounds", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    rep = json.loads((tmp_path / "b" / "bound_report.json").read_text())
    assert rep["K1"] == 1.0 and rep["K4"] == 2.0


def test_cli_distance(tmp_path, capsys):
    cfg = write(tmp_path, example_config("distance"))
    assert cli.main(["distance", "--config", str(cfg), "--out", str(tmp_path / "d"), "--sup-method", "grid",
                     "--abs-mode", "off"]) == 0
    rec = json.loads((tmp_path / "d" / "distance.json").read_text())
    assert rec["abs_mode"] == "off" and rec["method"] == "grid" and rec["value"] >= 0


def test_cli_distance_inline_samples(tmp_path, capsys):
    text = """
discriminator: {layer_dims: [1, 1], norm_bounds: [1]}
generator: {layer_dims: [1, 1], norm_bounds: [1]}
theta: [[[0.3]]]
samples: {x: [[0.5]], z: [[0.0]]}
method: grid
"""
    assert cli.main(["distance", "--config", str(write(tmp_path, text)), "--out", str(tmp_path / "d")]) == 0
    assert json.loads((tmp_path / "d" / "distance.json").read_text())["value"] == 0.5


def test_cli_rate_fit(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL + "replicates: 3\n")
    assert cli.main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "e")]) == 0
    assert cli.main(["rate-fit", "--gaps", str(tmp_path / "e" / "gaps.csv"), "--out", str(tmp_path / "r")]) == 0
    a = json.loads((tmp_path / "e" / "rate_fit.json").read_text())
    b = json.loads((tmp_path / "r" / "rate_fit.json").read_text())
    assert a["log_n"]["slope"] == b["log_n"]["slope"]


def test_cli_verify_quick(tmp_path, capsys):
    assert cli.main(["verify", "--quick", "--out", str(tmp_path / "v")]) == 0
    out = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert all(v["passed"] for v in out.values())
