import json
import subprocess
import sys

import pytest

from plapeig import cli
from plapeig.fem import FEMError


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_radial_example(capsys):
    code, out, _ = run(["radial", "--p", "2", "--dim", "2", "--roots", "2"], capsys)
    assert code == 0
    assert out.strip() == "nu_1=2.40482556 nu_2=5.52007811"


def test_radial_artifacts(tmp_path, capsys):
    code, _, _ = run(["radial", "--p", "3", "--out", str(tmp_path), "--csv", "--json"], capsys)
    assert code == 0
    data = json.loads((tmp_path / "radial_p3_N2.json").read_text())
    assert data["rtol"] == 1e-10 and len(data["roots"]) == 2
    assert (tmp_path / "radial_p3_N2.csv").read_text().startswith("r,u,w\n")


def test_tau_example(tmp_path, capsys):
    code, out, _ = run(["tau", "--k", "1", "--p", "2", "--h", "0.05", "--out", str(tmp_path)], capsys)
    assert code == 0
    tau = float(out.split()[0].split("=")[1])
    assert tau == pytest.approx(14.68, rel=0.01)
    d = json.loads((tmp_path / "tau1_p2_h0p05.json").read_text())
    assert d["lambda"] == pytest.approx(tau, rel=1e-9)
    assert d["h"] == 0.05 and d["tol"] == 1e-10
    assert (tmp_path / "tau1_p2_h0p05.field.txt").exists()
    assert not list(tmp_path.glob("*.svg"))


@pytest.mark.parametrize(
    "argv, fragment",
    [
        (["radial", "--p", "0.5"], "--p=0.5 outside the valid range (1.01, 1000.0]"),
        (["tau", "--k", "1", "--p", "11"], "--p=11.0 outside the valid range [1.2, 10.0]"),
        (["tau", "--k", "0", "--p", "2"], "--k=0 must be >= 1"),
        (["eig", "--p", "2", "--h", "1.5"], "--h=1.5 must lie in (0, 1.0)"),
        (["eig", "--p", "2", "--tol", "-1"], "--tol=-1.0 must be a positive number"),
        (["radial", "--p", "2", "--dim", "1"], "--dim=1 must be >= 2"),
        (["sweep", "--p-grid", "2:1:0.1"], "need step > 0"),
        (["sweep", "--p-grid", "1:2:x"], "cannot parse grid"),
        (["sweep", "--p-grid", "0.5,2"], "--p-grid values [0.5]"),
        (["sweep", "--p-grid", "2", "--workers", "0"], "--workers=0"),
    ],
)
def test_invalid_input_exit_2(argv, fragment, capsys, tmp_path):
    code, _, err = run(argv + ["--out", str(tmp_path)], capsys)
    assert code == 2
    assert fragment in err


def test_missing_argument_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["tau", "--p", "2"])
    assert exc.value.code == 2


def test_solver_failure_exit_1(monkeypatch, capsys, tmp_path):
    def boom(*a, **k):
        raise FEMError("Newton stagnated")

    monkeypatch.setattr(cli, "solve_first_eig", boom)
    code, _, err = run(["eig", "--p", "2", "--out", str(tmp_path)], capsys)
    assert code == 1
    assert "solver failure: Newton stagnated" in err


def test_grid_syntax():
    g = cli.parse_grid("1.3:5:0.1")
    assert len(g) == 38 and g[0] == 1.3 and g[-1] == 5.0 and g[1] == 1.4
    assert cli.parse_grid("1:2:0.3") == [1.0, 1.3, 1.6, 1.9]
    assert cli.parse_grid("1:2.1:0.3") == [1.0, 1.3, 1.6, 1.9, 2.2]
    assert cli.parse_grid("2,4,8") == [2.0, 4.0, 8.0]


def test_run_config_canonical():
    a = cli.RunConfig("radial", {"p": 2.0, "dim": 2})
    b = cli.RunConfig("radial", {"dim": 2, "p": 2.0})
    assert a.canonical() == b.canonical()


def _sweep(out, cache, capsys):
    return run(
        ["sweep", "--p-grid", "1.2:1.6:0.2", "--h", "0.2", "--out", str(out), "--cache-dir", str(cache), "--json"],
        capsys,
    )


def test_sweep_csv_with_crossing(tmp_path, capsys):
    code, out, _ = _sweep(tmp_path / "o", tmp_path / "c", capsys)
    assert code == 0
    lines = (tmp_path / "o" / "sweep_h0p2.csv").read_text().splitlines()
    assert lines[0].startswith("p,tau1,tau2,mu2")
    assert [ln.split(",")[0] for ln in lines[1:4]] == ["1.2", "1.4", "1.6"]
    assert lines[4].startswith("# crossing tau2_minus_mu2 in [")
    assert lines[5] == "# h=0.2 R=1 tol=1e-10 radial_rtol=1e-10 radial_atol=1e-12"
    assert "crossing tau2_minus_mu2 in" in out


def test_sweep_without_sign_change_says_so(tmp_path, capsys):
    code, _, _ = run(["sweep", "--p-grid", "3,4", "--h", "0.2", "--out", str(tmp_path)], capsys)
    assert code == 0
    text = (tmp_path / "sweep_h0p2.csv").read_text()
    assert "# crossing tau2_minus_mu2: no sign change" in text


def test_outputs_are_deterministic(tmp_path, capsys):
    _sweep(tmp_path / "o1", tmp_path / "c1", capsys)
    _sweep(tmp_path / "o2", tmp_path / "c2", capsys)
    for name in ("sweep_h0p2.csv", "sweep_h0p2.json"):
        assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o2" / name).read_bytes()
    for d in ("p1", "p2"):
        cli.main(["psi", "--k", "2", "--p", "1.5", "--h", "0.1", "--out", str(tmp_path / d), "--json", "--svg"])
    capsys.readouterr()
    for name in ("psi2_p1p5_h0p1.json", "psi2_p1p5_h0p1.svg", "psi2_p1p5_h0p1.field.txt"):
        assert (tmp_path / "p1" / name).read_bytes() == (tmp_path / "p2" / name).read_bytes()


def test_psi_summary(tmp_path, capsys):
    code, out, _ = run(["psi", "--k", "3", "--p", "2", "--h", "0.1", "--out", str(tmp_path), "--svg"], capsys)
    assert code == 0
    assert "nodal_domains=6" in out and "antiperiodicity_defect=0" in out
    svg = (tmp_path / "psi3_p2_h0p1.svg").read_text()
    assert svg.startswith("<svg") and "<line" in svg


def test_eig_annulus(tmp_path, capsys):
    code, out, _ = run(["eig", "--p", "2", "--domain", "annulus", "--inner", "0.5", "--h", "0.1", "--out", str(tmp_path), "--json"], capsys)
    assert code == 0
    from scipy.optimize import brentq
    from scipy.special import j0, y0

    # radial Dirichlet mode of 0.5 < r < 1: J0(k/2) Y0(k) = J0(k) Y0(k/2)
    k = brentq(lambda k: j0(0.5 * k) * y0(k) - j0(k) * y0(0.5 * k), 5.0, 7.0)
    lam = float(out.split()[0].split("=")[1])
    assert lam == pytest.approx(k * k, rel=0.01)
    d = json.loads((tmp_path / "eig_annulus_p2_h0p1.json").read_text())
    assert d["domain"]["kind"] == "annulus"


def test_verify_p2_and_trend(tmp_path, capsys):
    code, out, _ = run(["verify-p2", "--h", "0.1", "--out", str(tmp_path), "--json"], capsys)
    assert code == 0 and "(1)(2,3)(4,5)(6)" in out
    code, out, _ = run(["trend", "--p-list", "2,4,8", "--h", "0.1", "--out", str(tmp_path), "--csv"], capsys)
    assert code == 0
    assert "nu1 decreasing toward 1: True" in out
    assert (tmp_path / "trend_R1.csv").read_text().startswith("p,nu1,")


def test_module_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "plapeig", "radial", "--p", "2"], capture_output=True, text=True, timeout=120
    )
    assert r.returncode == 0
    assert r.stdout.strip() == "nu_1=2.40482556 nu_2=5.52007811"
