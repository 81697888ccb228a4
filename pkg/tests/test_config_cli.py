import csv
import subprocess
import sys

import pytest

from tarasim.cli import main
from tarasim.config import ConfigError, RunConfig, format_seeds, parse_config, parse_seeds


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- config

def test_config_round_trip():
    cfg = RunConfig(seeds=[1, 2, 3], algorithms=["tara", "ideal"], tau_ms=25.0, tara_prediction=False)
    assert parse_config(cfg.to_text()) == cfg


def test_defaults_round_trip():
    assert parse_config(RunConfig().to_text()) == RunConfig()


@pytest.mark.parametrize("text, field", [
    ("tau_ms = fast", "tau_ms"),
    ("seeds = 9..2", "seeds"),
    ("colour = red", "colour"),
    ("algorithms = minstrel,arf", "algorithms"),
    ("tara_prediction = maybe", "tara_prediction"),
])
def test_malformed_config_names_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


def test_invalid_value_rejected():
    with pytest.raises(ConfigError, match="scenario"):
        parse_config("arena_side = -5")


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\nrun_duration = 60  # short\n")
    assert cfg.run_duration == 60.0


@pytest.mark.parametrize("text, seeds", [("1..4", [1, 2, 3, 4]), ("7", [7]), ("1,4,9", [1, 4, 9])])
def test_seed_syntax(text, seeds):
    assert parse_seeds(text) == seeds
    assert parse_seeds(format_seeds(seeds)) == seeds


# ---------------------------------------------------------------- thresholds

def test_thresholds_stdout(capsys):
    assert main(["thresholds"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 9
    thr = [float(l.split(",")[-1]) for l in lines[1:]]
    assert all(a < b for a, b in zip(thr, thr[1:]))


def test_relaxed_target_lowers_rows(capsys):
    main(["thresholds"])
    strict = [float(l.split(",")[-1]) for l in capsys.readouterr().out.splitlines()[1:]]
    main(["thresholds", "--target-ber", "1e-3"])
    loose = [float(l.split(",")[-1]) for l in capsys.readouterr().out.splitlines()[1:]]
    assert all(a < b for a, b in zip(loose, strict))


def test_thresholds_to_directory(tmp_path):
    assert main(["thresholds", "--out", str(tmp_path)]) == 0
    assert len(read_rows(tmp_path / "thresholds.csv")) == 8
    rows = read_rows(tmp_path / "snr_distance_relay.csv")
    snr = [float(r["snr_db"]) for r in rows]
    assert all(a > b for a, b in zip(snr, snr[1:]))


def test_bad_config_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("tau_ms = -1\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "config error" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1


# ---------------------------------------------------------------- run / analyze

@pytest.fixture(scope="module")
def small_batch(tmp_path_factory):
    out = tmp_path_factory.mktemp("batch")
    rc = main(["run", "--seeds", "1..5", "--duration", "20", "--out", str(out), "--traces"])
    assert rc == 0
    return out


def test_run_writes_expected_files(small_batch):
    runs = sorted(p.name for p in (small_batch / "runs").iterdir())
    assert len(runs) == 15
    assert runs[0] == "seed0001_ideal.csv"
    assert len(list((small_batch / "scenarios").iterdir())) == 5
    assert len(list((small_batch / "traces").iterdir())) == 15
    summary = read_rows(small_batch / "summary.csv")
    assert len(summary) == 5 * 3 * 2
    rows = read_rows(small_batch / "runs" / "seed0002_tara.csv")
    assert len(rows) == 20 * 2
    assert set(rows[0]) == {"time_s", "link", "delivered_bits", "distance_m", "first_stage_mcs"}


def test_rerun_is_byte_identical(small_batch, tmp_path):
    assert main(["run", "--seeds", "1..5", "--duration", "20", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "summary.csv").read_bytes() == (small_batch / "summary.csv").read_bytes()
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("out_dir")]
    assert strip(tmp_path / "config.txt") == strip(small_batch / "config.txt")
    for p in (small_batch / "runs").iterdir():
        assert (tmp_path / "runs" / p.name).read_bytes() == p.read_bytes()


def test_analyze(small_batch):
    assert main(["analyze", str(small_batch)]) == 0
    out = small_batch / "analysis"
    for row in read_rows(out / "percentiles.csv"):
        assert float(row["p70"]) <= float(row["p50"]) <= float(row["p30"])
    gains = read_rows(out / "gains.csv")
    assert {r["baseline"] for r in gains} == {"minstrel", "ideal"}
    assert len(gains) == 2 * 5 * 2
    ci = read_rows(out / "ci.csv")
    assert all(float(r["half_width_99_bps"]) >= 0 for r in ci)


def test_analyze_identical_algorithms_gives_zero_gain(tmp_path):
    out = tmp_path / "b"
    assert main(["run", "--seeds", "1..3", "--duration", "10", "--out", str(out),
                 "--algorithms", "minstrel,tara"]) == 0
    # overwrite tara's output with minstrel's; analyze must report zero gain
    summary = (out / "summary.csv").read_text().splitlines()
    mins = [l for l in summary if ",minstrel," in l]
    (out / "summary.csv").write_text("\n".join([summary[0], *mins, *(l.replace(",minstrel,", ",tara,") for l in mins)]) + "\n")
    for s in (1, 2, 3):
        (out / "runs" / f"seed{s:04d}_tara.csv").write_bytes((out / "runs" / f"seed{s:04d}_minstrel.csv").read_bytes())
    assert main(["analyze", str(out)]) == 0
    assert all(float(r["gain_pct"]) == 0 for r in read_rows(out / "analysis" / "gains.csv"))


def test_analyze_missing_directory(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope")]) == 2
    assert "error" in capsys.readouterr().err


def test_analyze_corrupt_run(small_batch, tmp_path):
    import shutil
    copy = tmp_path / "copy"
    shutil.copytree(small_batch, copy)
    (copy / "runs" / "seed0001_tara.csv").write_text("time_s,link\n0,relay\n")
    assert main(["analyze", str(copy)]) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--seeds", "1", "--duration", "2", "--out", str(blocker / "sub")]) == 2


def test_out_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("TARASIM_OUT", str(tmp_path / "env"))
    assert main(["run", "--seeds", "1", "--duration", "2", "--algorithms", "ideal"]) == 0
    assert (tmp_path / "env" / "summary.csv").exists()


def test_scenario_dump(capsys):
    assert main(["scenario-dump", "--seeds", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    header = lines[0].split(",")
    assert "node" in header[0] or "node_id" in header
    nodes = {l.split(",")[0] for l in lines[1:]}
    assert nodes == {"fen", "fgw", "bkh"}


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "tarasim", "thresholds"], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.startswith("mcs,")
