"""YAML config parsing, override semantics, and end-to-end CLI runs on
temporary output directories."""

import hashlib
import json
from pathlib import Path

import pytest
import yaml

from adpricing import cli
from adpricing.config import ConfigError, load_config, parse_config

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_YAML = ROOT / "configs" / "default.yaml"


def _base_dict():
    with open(DEFAULT_YAML) as fh:
        return yaml.safe_load(fh)


def _small_dict(study="simulate", **study_params):
    """Default config shrunk so CLI round trips stay in the millisecond range."""
    raw = _base_dict()
    raw["study"] = study
    raw["replications"] = 4000
    raw["study_params"] = {
        "simulate": {"rounds": 40, "mode": "analytic"},
        "dominance": {"replications": 3000, "grid_points": 21,
                      "grid_max_multiplier": 2.0, "fixtures": [0.5, 1.0]},
        "lemmas": {"replications": 20000},
        "collapse": {"rounds": 14, "decay": 0.5, "replications": 4000,
                     "threshold": 1.0e-3},
        "sweep": {"r_min": 0.0, "r_max": 2.0, "r_points": 9},
        "cpsc": {"replications": 20000, "enumeration_replications": 20000},
    }
    if study_params:
        raw["study_params"][study].update(study_params)
    return raw


def _write(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_load_default_config():
    cfg = load_config(str(DEFAULT_YAML))
    assert cfg.study == "reproduce-all"
    assert cfg.seed == 42
    assert cfg.replications == 1_000_000
    assert cfg.threads == 1
    assert cfg.game.n == 2
    assert cfg.game.model.name == "OCPC"
    assert cfg.models == ("CPC", "OCPC")
    assert cfg.cart_game is not None and cfg.cart_game.chain.has_cart
    assert cfg.study_replications("dominance", 100_000) == 100_000
    assert cfg.params("sweep")["r_points"] == 41


def test_overrides_apply_and_force_replications():
    cfg = load_config(
        str(DEFAULT_YAML),
        {"study": "lemmas", "seed": 7, "out": "elsewhere", "replications": 5000,
         "threads": 3},
    )
    assert cfg.study == "lemmas"
    assert cfg.seed == 7
    assert cfg.out == "elsewhere"
    assert cfg.threads == 3
    assert cfg.replications_forced
    # forced count wins over every per-study default
    assert cfg.study_replications("dominance", 100_000) == 5000
    assert cfg.study_replications("collapse", 10_000) == 5000


def test_config_hash_ignores_out_and_threads(tmp_path):
    a = load_config(str(DEFAULT_YAML))
    b = load_config(str(DEFAULT_YAML), {"out": str(tmp_path), "threads": 8})
    c = load_config(str(DEFAULT_YAML), {"seed": 43})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.pop("seed"), "seed"),
        (lambda d: d.__setitem__("study", "bogus"), "study"),
        (lambda d: d["game"].__setitem__("model", "XPC"), "game"),
        (lambda d: d["game"].__setitem__("scenario", "offsite"), "game"),
        (lambda d: d["game"]["advertisers"][0]["rates"].pop("click"), "game"),
        (lambda d: d["game"].__setitem__("advertisers", d["game"]["advertisers"][:1]),
         "game"),
        (lambda d: d["game"]["advertisers"][0].__setitem__("m", -5.0), "game"),
        (lambda d: d["game"]["advertisers"][0]["rates"].__setitem__(
            "click", {"kind": "gaussian"}), "game"),
        (lambda d: d.__setitem__("replications", "many"), "replications"),
    ],
)
def test_config_errors_name_the_field(mutate, field):
    raw = _base_dict()
    mutate(raw)
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    msg = str(exc.value)
    assert msg.startswith("config field")
    assert field in msg


def test_posted_strategies_parse_and_validate():
    raw = _base_dict()
    raw["game"]["strategies"] = [{"bid": 120.0}, {"bid": 80.0, "alpha": 1.0}]
    cfg = parse_config(raw)
    assert [s.bid for s in cfg.strategies] == [120.0, 80.0]
    assert all(s.alpha == 1.0 for s in cfg.strategies)

    raw["game"]["strategies"] = [{"bid": 120.0}]
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert "game.strategies" in str(exc.value)

    raw["game"]["strategies"] = [{"bid": 120.0}, {"bid": -1.0}]
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert "game.strategies[1]" in str(exc.value)


def test_manifest_config_round_trips(tmp_path):
    out = tmp_path / "results"
    out.mkdir()
    cfg_path = _write(tmp_path, _small_dict("simulate"))
    assert cli.main(["--config", cfg_path, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    original = load_config(cfg_path)
    rebuilt = parse_config(manifest["config"])
    assert rebuilt.config_hash() == original.config_hash() == manifest["config_sha256"]
    assert rebuilt.game == original.game
    assert rebuilt.cart_game == original.cart_game


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.yaml"))
    bad = tmp_path / "bad.yaml"
    bad.write_text("study: [unclosed\n")
    with pytest.raises(ConfigError) as exc:
        load_config(str(bad))
    assert "line" in str(exc.value)


def test_cli_simulate_end_to_end(tmp_path):
    out = tmp_path / "results"
    out.mkdir()
    cfg = _write(tmp_path, _small_dict("simulate"))
    assert cli.main(["--config", cfg, "--out", str(out)]) == 0

    trace = (out / "simulate" / "trace.csv").read_text().splitlines()
    header = trace[0].split(",")
    conservation = header.index("conservation")
    assert len(trace) == 41
    assert all(row.split(",")[conservation] == "0.0" for row in trace[1:])

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] is True
    assert manifest["study"] == "simulate"
    assert set(manifest["files"]) == {"simulate/trace.csv", "simulate/totals.csv"}
    for rel, digest in manifest["files"].items():
        assert hashlib.sha256((out / rel).read_bytes()).hexdigest() == digest


def test_cli_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, _small_dict("lemmas"))
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        out.mkdir()
        assert cli.main(["--config", cfg, "--out", str(out)]) == 0
        blobs.append({
            p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*.csv"))
        })
    assert blobs[0] == blobs[1]


def test_cli_seed_changes_numbers_not_verdicts(tmp_path):
    cfg = _write(tmp_path, _small_dict("cpsc"))
    manifests = []
    for seed in (42, 43):
        out = tmp_path / f"s{seed}"
        out.mkdir()
        assert cli.main(["--config", cfg, "--out", str(out), "--seed", str(seed)]) == 0
        manifests.append(json.loads((out / "manifest.json").read_text()))
    a, b = manifests
    assert a["verdicts"] == b["verdicts"]
    assert all(a["verdicts"].values())
    assert a["files"] != b["files"]


def test_cli_replications_override_reaches_studies(tmp_path):
    out = tmp_path / "results"
    out.mkdir()
    cfg = _write(tmp_path, _small_dict("collapse"))
    assert cli.main(
        ["--config", cfg, "--out", str(out), "--replications", "2000"]
    ) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["replications"] == 2000


def test_cli_failed_verdict_exits_one(tmp_path):
    out = tmp_path / "results"
    out.mkdir()
    # grid confined to the CPC region: the three-region verdict must fail
    cfg = _write(tmp_path, _small_dict("sweep", r_min=0.0, r_max=0.5, r_points=5))
    assert cli.main(["--config", cfg, "--out", str(out)]) == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] is False
    assert manifest["verdicts"]["sweep.three_regions"] is False


def test_cli_config_errors_exit_two(tmp_path, capsys):
    out = tmp_path / "results"
    out.mkdir()
    cfg = _write(tmp_path, _small_dict())
    assert cli.main(["--config", cfg, "--out", str(out / "missing")]) == 2
    assert "out" in capsys.readouterr().err

    raw = _small_dict()
    raw["game"]["advertisers"][0]["m"] = -5.0
    bad = _write(tmp_path, raw, "bad.yaml")
    assert cli.main(["--config", bad, "--out", str(out)]) == 2
    assert "m must be > 0" in capsys.readouterr().err

    assert cli.main(["--config", str(tmp_path / "nope.yaml"), "--out", str(out)]) == 2
