from pathlib import Path

import pytest

from ldcontrol import cli
from ldcontrol.cli import ConfigError, load_scenario, main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_gallery_list(capsys):
    code, out = _run(["gallery", "list"], capsys)
    assert code == 0
    names = [line.split(":")[0] for line in out.out.splitlines()]
    assert {"linear2", "linear3_mult2", "triangular_ld", "chaplygin",
            "chaplygin_tracers2"} <= set(names)


def test_gallery_show(capsys):
    code, out = _run(["gallery", "show", "linear2", "--samples", "20"], capsys)
    assert code == 0
    assert "hyperbolicity = pass" in out.out
    assert "threshold.one_sided.at_origin = 1.5" in out.out
    assert _run(["gallery", "show", "nosuch"], capsys)[0] == 3
    assert _run(["gallery", "show"], capsys)[0] == 3


def test_simulate_equilibrium(tmp_path, capsys):
    code, out = _run(["simulate", "--system", "linear2", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "status = ok" in out.out
    for name in ("manifest.txt", "report.txt", "fronts.csv", "final.csv", "diagram.png",
                 "profiles.png"):
        assert (tmp_path / name).is_file(), name
    rows = (tmp_path / "fronts.csv").read_text().strip().splitlines()
    assert rows[-1].startswith("front_id,")


def test_control_two_sided(tmp_path, capsys):
    code, _ = _run(["control", str(SCENARIOS / "two_sided_linear2.toml"), "--out",
                    str(tmp_path), "--svg"], capsys)
    assert code == 0
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "package = ldcontrol" in manifest
    assert "threshold.two_sided.at_origin = 1" in manifest
    assert "chosen_T = 1.5" in manifest
    assert "phase forward" in manifest
    assert "check.final_state = pass" in (tmp_path / "report.txt").read_text()
    for name in ("controls_g1.csv", "controls_g2.csv", "interface.csv", "diagram.svg",
                 "controls.png", "final.png"):
        assert (tmp_path / name).is_file(), name


def test_control_too_short(tmp_path, capsys):
    code, out = _run(["control", str(SCENARIOS / "one_sided_linear2.toml"), "--T", "1.2",
                      "--out", str(tmp_path), "--no-figures"], capsys)
    assert code == 2
    assert "1.5" in (tmp_path / "report.txt").read_text()
    assert not (tmp_path / "diagram.png").exists()


def test_control_needs_mode(tmp_path, capsys):
    code, out = _run(["control", "--out", str(tmp_path)], capsys)
    assert code == 3 and "--mode" in out.err


def test_verify_runs(tmp_path, capsys):
    code, _ = _run(["verify", "--system", "linear2", "--oracle", "exact", "--slices", "5",
                    "--out", str(tmp_path), "--no-figures"], capsys)
    assert code == 0
    rows = (tmp_path / "profiles.csv").read_text().strip().splitlines()
    assert rows[0] == "t,tv,lipschitz" and len(rows) == 7


def test_outputs_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["control", str(SCENARIOS / "two_sided_linear2.toml"), "--out", str(d),
                     "--svg"]) == 0
    capsys.readouterr()
    for f in sorted(a.iterdir()):
        if f.name != "manifest.txt":
            assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('system = "linear2"\n\n[numerics]\neps = 1e-3\nepsilon = 2\n')
    code, out = _run(["simulate", str(cfg)], capsys)
    assert code == 3 and "line 5" in out.err
    with pytest.raises(ConfigError) as exc:
        load_scenario(cfg)
    assert exc.value.line == 5


@pytest.mark.parametrize("text", ['system = "linear2"\n[numerics\n',
                                  '[numerics]\neps = -1\n',
                                  '[data]\nubar = { jumps = 3 }\n'])
def test_invalid_configs(tmp_path, capsys, text):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    assert _run(["simulate", str(cfg)], capsys)[0] == 3


def test_invalid_control_mode(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('mode = "control:sideways"\n')
    assert _run(["control", str(cfg)], capsys)[0] == 3


def test_output_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    sc = load_scenario(SCENARIOS / "verify_chaplygin.toml")
    assert sc.output == str(tmp_path / "env")


def test_overrides_beat_file():
    sc = load_scenario(SCENARIOS / "two_sided_linear2.toml", {"numerics": {"T": 2.5}})
    assert sc.T == 2.5 and sc.eps == 1e-3 and sc.control_mode == "two_sided"
