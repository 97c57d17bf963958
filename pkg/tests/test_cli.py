import json
import math

import pytest

from pulsespec import cli
from pulsespec import spectrum as sp
from pulsespec.errors import WeakCouplingWarning

from conftest import gm, orbit_of

BASE = """
[model]
family = "gierer_meinhardt"
variant = "{variant}"
mu = 1.0
beta2 = 2
coupling = {coupling}

[existence]
u0 = {u0}
eps = {eps}

[spectrum]
region = [-0.5, 4.0, -1.0, 1.0]
contours = [{{center = [0.35312, 0.0], radius = 0.1}}]
gamma = [1.0]
lambda_scan = [-0.49, 10.0, 100]

[output]
directory = "{out}"
formats = ["csv", "json", "svg"]
"""


def write_cfg(tmp_path, name="run.toml", variant="minus_mu", coupling=1.0, u0=1.0, eps="[0.04]", out="out"):
    path = tmp_path / name
    path.write_text(BASE.format(variant=variant, coupling=coupling, u0=u0, eps=eps, out=tmp_path / out))
    return str(path)


def load(path):
    with open(path) as fh:
        return json.load(fh)


def test_malformed_ladder_names_field(tmp_path, capsys):
    assert cli.main(["existence", "--config", write_cfg(tmp_path, eps="[0.01, 0.02]")]) == 2
    assert "existence.eps" in capsys.readouterr().err


def test_unknown_family(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(open(write_cfg(tmp_path)).read().replace("gierer_meinhardt", "brusselator"))
    assert cli.main(["existence", "--config", str(path)]) == 2
    assert "model.family" in capsys.readouterr().err


def test_negative_tolerance(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(open(write_cfg(tmp_path)).read().replace("gamma = [1.0]", "gamma = [1.0]\nguard = -0.1"))
    assert cli.main(["spectrum", "--config", str(path), "--mode", "fast"]) == 2
    assert "spectrum.guard" in capsys.readouterr().err


def test_bad_mode(tmp_path):
    assert cli.main(["spectrum", "--config", write_cfg(tmp_path), "--mode", "sideways"]) == 2


def test_missing_config(tmp_path):
    assert cli.main(["existence", "--config", str(tmp_path / "nope.toml")]) == 3


def test_full_mode_needs_profiles(tmp_path, capsys):
    assert cli.main(["spectrum", "--config", write_cfg(tmp_path), "--mode", "full"]) == 3
    assert "existence" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path):
    # saddle with u0 = 1: the slow orbit from (1, -3) never turns
    assert cli.main(["existence", "--config", write_cfg(tmp_path, variant="mu")]) == 4


def test_existence_center_case(tmp_path, capsys):
    assert cli.main(["existence", "--config", write_cfg(tmp_path)]) == 0
    data = load(tmp_path / "out" / "singular_orbit.json")
    L0 = data["orbit"]["L0"]
    assert L0 == pytest.approx(math.pi / 2 + math.asin(1 / math.sqrt(10)), abs=1e-7)
    assert (tmp_path / "out" / "profile_eps0p04.txt").exists()
    assert data["provenance"]["model_fingerprint"] == gm().fingerprint()
    assert "L0 =" in capsys.readouterr().out


def test_weak_coupling_warns(tmp_path):
    with pytest.warns(WeakCouplingWarning):
        assert cli.main(["existence", "--config", write_cfg(tmp_path, coupling=0.0, eps="[]")]) == 0


def test_fast_mode_lists_zeros(tmp_path):
    assert cli.main(["spectrum", "--config", write_cfg(tmp_path), "--mode", "fast"]) == 0
    roots = load(tmp_path / "out" / "spectrum_fast.json")["roots"]
    zs = sorted(r["lambda"]["re"] for r in roots)
    assert zs[0] == pytest.approx(0, abs=1e-6) and zs[1] == pytest.approx(1.25, abs=1e-6)
    assert all(r["multiplicity"] == 1 for r in roots)


def test_trace_scan_bands(tmp_path):
    assert cli.main(["spectrum", "--config", write_cfg(tmp_path), "--mode", "trace-scan"]) == 0
    bands = load(tmp_path / "out" / "trace_scan.json")["bands"]
    assert bands[0][0] == pytest.approx(0.3111, abs=1e-4)
    assert bands[0][1] == pytest.approx(0.35312044918690405, abs=1e-9)
    assert (tmp_path / "out" / "trace_scan.svg").exists()


def test_cancelation_and_instability(tmp_path):
    cfg = write_cfg(tmp_path)
    assert cli.main(["cancelation", "--config", cfg]) == 0
    entries = load(tmp_path / "out" / "cancelation.json")["entries"]
    by_lam = {round(e["lambda_diamond"]["re"], 6): e for e in entries}
    assert by_lam[0.0]["verdict"] == "persists" and by_lam[1.25]["verdict"] == "cancels"
    assert all(e["consistent"] for e in entries)
    assert cli.main(["instability", "--config", cfg]) == 0
    crit = load(tmp_path / "out" / "instability.json")["criteria"]
    assert crit["verdict"] == "unstable_by_I1"
    assert crit["t0"]["re"] == pytest.approx(2 * crit["I2"], abs=1e-6)


def test_weak_coupling_commands(tmp_path):
    cfg = write_cfg(tmp_path, coupling=0.0, eps="[]")
    assert cli.main(["cancelation", "--config", cfg]) == 0
    entries = load(tmp_path / "out" / "cancelation.json")["entries"]
    assert entries and all(e["verdict"] == "persists" for e in entries)
    assert cli.main(["instability", "--config", cfg]) == 0
    assert load(tmp_path / "out" / "instability.json")["criteria"]["verdict"] == "unstable_by_I1"


def test_outputs_are_deterministic(tmp_path):
    files = {}
    for out in ("a", "b"):
        cfg = write_cfg(tmp_path, name=f"{out}.toml", out=out)
        for args in (["existence"], ["spectrum", "--mode", "reduced"], ["spectrum", "--mode", "full",
                                                                            "--workers", "2"]):
            assert cli.main(args + ["--config", cfg]) == 0
        files[out] = {p.name: p.read_bytes() for p in (tmp_path / out).iterdir() if p.suffix != ".svg"}
    assert files["a"] == files["b"] and "evans_full.csv" in files["a"]


@pytest.mark.slow
def test_reduced_and_full_counts_match(tmp_path):
    cfg = write_cfg(tmp_path, eps="[0.01]")
    assert cli.main(["existence", "--config", cfg]) == 0
    assert cli.main(["spectrum", "--config", cfg, "--mode", "full", "--workers", "4"]) == 0
    rows = load(tmp_path / "out" / "compare_full_reduced.json")["rows"]
    assert rows and all(r["count_full"] == r["count_reduced"] == 1 for r in rows)
