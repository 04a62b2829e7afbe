import json
import math
import subprocess
import sys

import pytest

from annular_resonance.cli import ConfigError, load_config, main
from annular_resonance.kernel import gram_to_csv, singlelayer_gram


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_kappa_reports_target_last(capsys):
    code, out, _ = run(capsys, "kappa")
    lines = out.strip().splitlines()
    assert code == 0
    assert [ln.split(",")[0] for ln in lines[1:5]] == ["8", "16", "32", "64"]
    last = dict(kv.split("=") for kv in lines[-1].split())
    target = 1 / (2 * math.pi**2) - math.log(math.pi / 2) / math.pi**2
    assert float(last["target"]) == pytest.approx(target, rel=1e-15)
    assert float(last["abs_error_64"]) < 1e-3


def test_resonances_contains_tem_row_near_pi(capsys):
    code, out, _ = run(capsys, "resonances", "--h", "0.01", "--l", "2", "--momenta", "0", "--parities", "even")
    rows = [ln.split(",") for ln in out.strip().splitlines()[1:]]
    assert code == 0
    assert any(r[2] == "TEM" and r[10] == "refined" and abs(float(r[6]) - math.pi) < 0.1 for r in rows)
    assert all(r[9] == "true" for r in rows if r[10] == "refined")


def test_output_is_deterministic(tmp_path, capsys):
    args = ["resonances", "--h", "0.02", "--l", "2", "--momenta", "1", "--parities", "odd", "--N", "4"]
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(args + ["--path", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = {"geometry": {"h": 0.05, "l": 2.0}, "truncation": {"N": 2}, "momenta": [1], "output": {"format": "json"}}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "modes", "--config", str(path), "--N", "3")
    doc = json.loads(out)
    assert code == 0
    assert len(doc["eigenvalues"]) == 6
    assert {row["family"] for row in doc["eigenvalues"]} == {"D", "N"}


def test_modes_profiles(capsys):
    code, out, _ = run(capsys, "modes", "--h", "0.05", "--l", "2", "--momenta", "0", "--N", "1", "--profiles", "4")
    blocks = out.strip().split("\n\n")
    assert code == 0 and len(blocks) == 2
    assert blocks[1].splitlines()[0] == "family,m,n,r,value,deriv"
    assert len(blocks[1].splitlines()) == 1 + 2 * 4


@pytest.mark.parametrize(
    "argv",
    [
        ["modes", "--h", "0.5", "--l", "2"],
        ["modes", "--l", "2"],
        ["modes", "--h", "0.01", "--l", "2", "--parities", "sideways"],
        ["resonances", "--h", "0.01", "--l", "2", "--N", "0"],
        ["validate", "--only", "12"],
        ["validate", "--gram-fixture", "/nonexistent/gram.csv"],
    ],
)
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "config error" in err


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        load_config({"geometry": {"h": 0.01, "radius": 2}})
    with pytest.raises(ConfigError):
        load_config({"solver": {}})


def test_defaults():
    cfg = load_config({"geometry": {"h": 0.01, "l": 2}})
    assert (cfg.a, cfg.N, cfg.quad_radial, cfg.quad_angular) == (1.0, 8, 32, 256)
    assert cfg.band() == pytest.approx(3 * math.pi / 2 + 3)


def test_validate_with_good_fixture_passes(tmp_path, capsys):
    path = tmp_path / "gram.csv"
    path.write_text(gram_to_csv(singlelayer_gram(64)))
    code, out, _ = run(capsys, "validate", "--only", "1", "--gram-fixture", str(path))
    assert code == 0 and out.startswith("PASS [1]")


def test_validate_with_corrupted_fixture_fails(tmp_path, capsys):
    rows = gram_to_csv(singlelayer_gram(64)).splitlines()
    bad = [rows[0]] + [
        f"{a},{b},{2 * float(v)}" if b == "0" else f"{a},{b},{v}" for a, b, v in (r.split(",") for r in rows[1:])
    ]
    path = tmp_path / "gram.csv"
    path.write_text("\n".join(bad) + "\n")
    code, out, _ = run(capsys, "validate", "--only", "1", "--gram-fixture", str(path))
    assert code == 1 and out.startswith("FAIL [1]")


def test_validate_with_unreadable_fixture_contents_fails(tmp_path, capsys):
    path = tmp_path / "gram.csv"
    path.write_text("n',n,value\n1,1,oops\n")
    code, out, _ = run(capsys, "validate", "--only", "1", "--gram-fixture", str(path))
    assert code == 1 and out.startswith("FAIL [1]")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "annular_resonance", "kappa"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip().splitlines()[-1].startswith("target=")
