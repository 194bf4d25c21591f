import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hexmc.cli import main
from hexmc.config import ConfigError, load_config

from conftest import SYNTHETIC_TABLE, analytic_graphene_bands


BASE = """
[material]
kind = "graphene"

[disorder]
p_vac = 0.1
master_seed = 7

[levels]
nq = 8
ns = [2, 4]
samples = [6, 3]

[qoi]
delta = 0.02
energy_points = 512

[run]
mode = "mlmc"
workers = 1
out_dir = "{out}"
"""


def write_cfg(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    return header, rows


def test_unknown_key_rejected(tmp_path):
    cfg = write_cfg(tmp_path, BASE.format(out=tmp_path / "o") + "\n[levels2]\nx = 1\n")
    with pytest.raises(ConfigError, match="levels2"):
        load_config(cfg)
    cfg2 = write_cfg(tmp_path, BASE.format(out=tmp_path / "o").replace("p_vac", "pvac"), "b.toml")
    with pytest.raises(ConfigError, match="pvac"):
        load_config(cfg2)


def test_validation_errors(tmp_path):
    bad = BASE.format(out=tmp_path / "o").replace("p_vac = 0.1", "p_vac = 1.5")
    with pytest.raises(ConfigError, match="p_vac"):
        load_config(write_cfg(tmp_path, bad))
    bad2 = BASE.format(out=tmp_path / "o").replace("ns = [2, 4]", "ns = [2, 8]")
    with pytest.raises(ConfigError, match="double"):
        load_config(write_cfg(tmp_path, bad2, "c.toml"))
    bad3 = BASE.format(out=tmp_path / "o").replace("samples = [6, 3]", "samples = [6]")
    with pytest.raises(ConfigError, match="samples"):
        load_config(write_cfg(tmp_path, bad3, "d.toml"))


def test_missing_config_exit_code(tmp_path, capsys):
    rc = main(["run", "--config", str(tmp_path / "nope.toml")])
    assert rc == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["exit_code"] == 2


def test_mlmc_run_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, BASE.format(out=out))
    assert main(["run", "--config", str(cfg)]) == 0
    header, rows = read_csv(out / "idos.csv")
    assert header == ["energy_eV", "idos_mean", "idos_variance", "dos"]
    assert len(rows) == 512
    uheader, urows = read_csv(out / "unperturbed.csv")
    assert uheader == ["energy_eV", "idos", "dos"]
    records = [json.loads(line) for line in (out / "levels.jsonl").read_text().splitlines()]
    assert [r["level"] for r in records] == [1, 2]
    assert list(records[0]) == [
        "level",
        "n",
        "q",
        "nsamples",
        "mean_level_variance",
        "wall_time_s",
        "cache_hits",
    ]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["master_seed"] == 7
    assert summary["mode"] == "mlmc"
    assert summary["config"]["levels"]["ns"] == [2, 4]


def test_exhaustive_terminal_value(tmp_path):
    text = BASE.format(out=tmp_path / "out")
    text = text.replace('mode = "mlmc"', 'mode = "exhaustive"')
    text = text.replace("ns = [2, 4]", "ns = [1]").replace("samples = [6, 3]", "")
    text = text.replace("p_vac = 0.1", "p_vac = 0.5")
    cfg = write_cfg(tmp_path, text)
    assert main(["run", "--config", str(cfg)]) == 0
    _, rows = read_csv(tmp_path / "out" / "idos.csv")
    assert rows[-1, 1] == pytest.approx(1.0, abs=1e-12)
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["exhaustive"]["configurations"] == 4
    assert summary["exhaustive"]["weight_sum"] == pytest.approx(1.0, abs=1e-12)


def test_bands_mode_reproduces_dispersion(tmp_path, graphene):
    text = BASE.format(out=tmp_path / "out").replace('mode = "mlmc"', 'mode = "bands"')
    text = text.replace("ns = [2, 4]", "ns = [1]").replace("samples = [6, 3]", "")
    cfg = write_cfg(tmp_path, text)
    assert main(["bands", "--config", str(cfg)]) == 0
    header, rows = read_csv(tmp_path / "out" / "bands.csv")
    assert header == ["kx", "ky", "band", "energy_eV"]
    for kx, ky, band, energy in rows:
        expected = analytic_graphene_bands(graphene, (kx, ky))[int(band) - 1]
        assert energy == pytest.approx(expected, abs=1e-9)


def test_worker_count_determinism(tmp_path):
    outs = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}"
        cfg = write_cfg(tmp_path, BASE.format(out=out), f"w{workers}.toml")
        assert main(["run", "--config", str(cfg), "--workers", str(workers)]) == 0
        outs.append((out / "idos.csv").read_bytes())
    assert outs[0] == outs[1]


def test_rerun_reproduces_values(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg = write_cfg(tmp_path, BASE.format(out=out1))
    assert main(["run", "--config", str(cfg)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(out2)]) == 0
    assert (out1 / "idos.csv").read_bytes() == (out2 / "idos.csv").read_bytes()
    assert (out1 / "unperturbed.csv").read_bytes() == (out2 / "unperturbed.csv").read_bytes()
    # jsonl records identical apart from measured wall time
    for f in ("levels.jsonl",):
        recs1 = [json.loads(l) for l in (out1 / f).read_text().splitlines()]
        recs2 = [json.loads(l) for l in (out2 / f).read_text().splitlines()]
        for r1, r2 in zip(recs1, recs2):
            r1.pop("wall_time_s"), r2.pop("wall_time_s")
            assert r1 == r2


def test_seed_override_changes_results(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg = write_cfg(tmp_path, BASE.format(out=out1))
    assert main(["run", "--config", str(cfg)]) == 0
    assert main(["run", "--config", str(cfg), "--seed", "8", "--out", str(out2)]) == 0
    summary = json.loads((out2 / "summary.json").read_text())
    assert summary["master_seed"] == 8
    assert (out1 / "idos.csv").read_bytes() != (out2 / "idos.csv").read_bytes()


def test_env_worker_override(tmp_path, monkeypatch):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, BASE.format(out=out))
    monkeypatch.setenv("HEXMC_WORKERS", "2")
    assert main(["run", "--config", str(cfg)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["workers"] == 2
    monkeypatch.setenv("HEXMC_WORKERS", "zebra")
    assert main(["run", "--config", str(cfg)]) == 2


def test_rates_mode_outputs(tmp_path):
    text = BASE.format(out=tmp_path / "out").replace('mode = "mlmc"', 'mode = "rates"')
    text = text.replace("samples = [6, 3]", "samples = [8, 8]")
    cfg = write_cfg(tmp_path, text)
    assert main(["rates", "--config", str(cfg)]) == 0
    records = [
        json.loads(line) for line in (tmp_path / "out" / "levels.jsonl").read_text().splitlines()
    ]
    for rec in records:
        assert {"variance_q", "variance_diff", "seconds_per_sample"} <= set(rec)
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["rates"]["S"]["value"] is not None
    assert summary["rates"]["D"]["value"] is not None
    assert summary["rates"]["W"] is None  # two levels give a single bias proxy


def test_slmc_artifacts(tmp_path):
    text = BASE.format(out=tmp_path / "out") + "slmc_samples = 4\n"
    cfg = write_cfg(tmp_path, text)
    assert main(["run", "--config", str(cfg)]) == 0
    header, rows = read_csv(tmp_path / "out" / "slmc.csv")
    assert header == ["energy_eV", "idos_mean", "idos_variance", "dos"]
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    comp = summary["slmc_comparison"]
    assert comp["slmc_samples"] == 4
    assert comp["work_ratio"] > 0


def test_table_material_runs(tmp_path):
    text = BASE.format(out=tmp_path / "out").replace(
        'kind = "graphene"', f'kind = "table"\ncoupling_file = "{SYNTHETIC_TABLE}"'
    )
    text = text.replace("nq = 8", "nq = 4").replace("ns = [2, 4]", "ns = [2]")
    text = text.replace("samples = [6, 3]", "samples = [4]")
    text = text.replace('mode = "mlmc"', 'mode = "mc"')
    cfg = write_cfg(tmp_path, text)
    assert main(["run", "--config", str(cfg)]) == 0
    _, rows = read_csv(tmp_path / "out" / "idos.csv")
    assert rows[-1, 1] > 0


def test_numerical_failure_exit_code(tmp_path, capsys):
    bad_table = tmp_path / "singular.tbc"
    lines = ["tbcoupling v1", "orbitals A 1", "orbitals B 1", "removable A B"]
    for di, dj in ((0, 0), (-1, 0), (0, -1)):
        lines.append(f"coupling {di} {dj} A 0 B 0 -1.0 0.0")
        lines.append(f"coupling {-di} {-dj} B 0 A 0 -1.0 0.0")
        lines.append(f"overlap_coupling {di} {dj} A 0 B 0 0.5 0.0")
        lines.append(f"overlap_coupling {-di} {-dj} B 0 A 0 0.5 0.0")
    bad_table.write_text("\n".join(lines) + "\n")
    text = BASE.format(out=tmp_path / "out").replace(
        'kind = "graphene"', f'kind = "table"\ncoupling_file = "{bad_table}"'
    )
    text = text.replace("ns = [2, 4]", "ns = [1]").replace("samples = [6, 3]", "samples = [2]")
    text = text.replace('mode = "mlmc"', 'mode = "mc"')
    cfg = write_cfg(tmp_path, text)
    rc = main(["run", "--config", str(cfg)])
    assert rc == 3
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert err["error"]["exit_code"] == 3


def test_console_entry_point(tmp_path):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, BASE.format(out=out))
    proc = subprocess.run(
        [sys.executable, "-m", "hexmc.cli", "run", "--config", str(cfg)],
        capture_output=True,
        text=True,
        cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "summary.json").exists()
