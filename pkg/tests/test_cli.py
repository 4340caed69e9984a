import json
import shutil
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from fpplab import events
from fpplab.cli import main
from fpplab.config import ConfigError, RunConfig, parse_distribution

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).parent / "golden"


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def unit_doc(**extra):
    doc = {"distribution": {"constant": 1}, "event": {"kind": "thm1_item1"},
           "n_list": [4], "samples": 10, "seed": 1}
    doc.update(extra)
    return doc


def svg_ns(tag):
    return "{http://www.w3.org/2000/svg}" + tag


# ---------------------------------------------------------------------------
# config


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"distribution": {"constant": 1}, "bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"distribution": {"constant": 1}, "n_list": [4, 2]})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"distribution": {"constant": 1}, "event": {"kind": "zzz"}})
    with pytest.raises(ConfigError):
        parse_distribution({"uniform": [1], "constant": 1})
    with pytest.raises(ConfigError):
        parse_distribution({"atoms": {"1": "1/2"}})


def test_fingerprint_is_stable_and_sensitive():
    a = RunConfig.from_dict(unit_doc())
    b = RunConfig.from_dict(unit_doc())
    assert a.fingerprint == b.fingerprint and len(a.fingerprint) == 16
    assert a.with_seed(2).fingerprint != a.fingerprint


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    RunConfig.load(path)


# ---------------------------------------------------------------------------
# estimate and exit codes


def test_estimate_unit(tmp_path, capsys):
    cfg = write_config(tmp_path, unit_doc())
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path)]) == 0
    text = (tmp_path / "estimate.csv").read_text()
    fp = RunConfig.load(cfg).fingerprint
    assert text.startswith(f"# config_fingerprint: {fp}\n")
    row = text.splitlines()[2].split(",")
    assert row[6] == "1" and row[9] == "1"
    doc = json.loads((tmp_path / "estimate.json").read_text())
    assert doc["config_fingerprint"] == fp
    assert "p_lo=1" in capsys.readouterr().out


def test_exit_codes(tmp_path):
    cfg = write_config(tmp_path, unit_doc())
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "missing")]) == 3
    bad = write_config(tmp_path, {"distribution": {"constant": 1}, "samples": 0}, "bad.json")
    assert main(["estimate", "--config", bad, "--out", str(tmp_path)]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["estimate", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)]) == 2
    assert main(["estimate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path), "--threads", "0"]) == 2


def test_seed_override(tmp_path):
    cfg = write_config(tmp_path, unit_doc(distribution={"uniform": [1, 2]}, samples=30))
    main(["estimate", "--config", cfg, "--out", str(tmp_path), "--seed", "99"])
    doc = json.loads((tmp_path / "estimate.json").read_text())
    assert doc["config"]["seed"] == 99
    assert doc["records"][0]["seed"] == 99


def test_golden_estimate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    cfg = str(CONFIGS / "estimate_golden.json")
    assert main(["estimate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["estimate", "--config", cfg, "--out", str(b), "--threads", "2"]) == 0
    golden = (GOLDEN / "estimate_golden.csv").read_bytes()
    assert (a / "estimate_golden.csv").read_bytes() == golden
    assert (b / "estimate_golden.csv").read_bytes() == golden
    assert (a / "estimate_golden.json").read_bytes() == (b / "estimate_golden.json").read_bytes()


def test_scan_command(tmp_path, capsys):
    cfg = write_config(tmp_path, unit_doc(n_list=[2, 4, 8]))
    assert main(["scan", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "scan.json").read_text())
    assert doc["slope"] == "0"
    assert "references -4 and -1" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# surgery


def test_surgery_unit_prop24(tmp_path):
    cfg = write_config(tmp_path, unit_doc(surgery="prop24", n_list=[2, 4], samples=3))
    assert main(["surgery", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "surgery.json").read_text())
    for t in doc["tallies"]:
        assert t["premise"] == t["samples"] == t["verified"] == 3
    lines = (tmp_path / "surgery.jsonl").read_text().splitlines()
    assert len(lines) == 6 and all(json.loads(x)["verified"] for x in lines)


def test_surgery_fault_injection_raises_alarm(tmp_path, monkeypatch):
    monkeypatch.setattr(events, "set_edge", lambda env, e, value: env)
    cfg = write_config(tmp_path, {"distribution": {"atoms": {"0": "1/5", "1": "2/5", "2": "2/5"}},
                                  "surgery": "prop24", "n_list": [2, 4], "samples": 20, "seed": 3})
    assert main(["surgery", "--config", cfg, "--out", str(tmp_path)]) == 1
    doc = json.loads((tmp_path / "surgery.json").read_text())
    assert any(t["failures"] for t in doc["tallies"])


def test_surgery_random_run_is_clean(tmp_path):
    doc = json.loads((CONFIGS / "surgery_claim33.json").read_text())
    doc.update(samples=5, n_list=[2, 3])
    cfg = write_config(tmp_path, doc)
    assert main(["surgery", "--config", cfg, "--out", str(tmp_path)]) == 0


# ---------------------------------------------------------------------------
# coexist, perc, mu, oracle-diff


def test_coexist_unit(tmp_path):
    cfg = write_config(tmp_path, {"distribution": {"constant": 1}, "n_list": [1, 3], "horizon": 4,
                                  "samples": 2, "seed": 1})
    assert main(["coexist", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "coexist.json").read_text())
    for entry in doc["by_n"]:
        assert entry["sphere_hit_rate"]["0"] == 1.0
        assert entry["upper_proxy_histogram"] == {"1": 2}
    assert (tmp_path / "coexist.csv").read_text().startswith("# config_fingerprint: ")


def test_coexist_horizon_beyond_box(tmp_path):
    cfg = write_config(tmp_path, {"distribution": {"constant": 1}, "n_list": [2], "horizon": 9,
                                  "box_radius": 5, "samples": 1})
    assert main(["coexist", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_perc_and_mu(tmp_path):
    cfg = write_config(tmp_path, {"distribution": {"constant": 1}, "M": "1", "box_radius": 4,
                                  "samples": 2, "seed": 1, "direction": [1, 0], "ladder": [1, 2],
                                  "N": 3})
    assert main(["perc", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "perc.json").read_text())["mean_largest_fraction"] == "1"
    assert main(["mu", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "mu.json").read_text())
    assert doc["mu_hat"] == "1" and doc["cesaro_fraction"] == "1"
    assert (tmp_path / "mu_ladder.csv").read_text().splitlines()[1] == "n,mean,half_width,count"


def test_oracle_diff_command(tmp_path):
    cfg = write_config(tmp_path, {"distribution": {"atoms": {"0": "1/5", "1": "2/5", "2": "2/5"}},
                                  "samples": 15, "seed": 2, "oracle": {"radius": 2, "cap": 5000}})
    assert main(["oracle-diff", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "oracle_diff.json").read_text())
    assert all(t["contradictions"] == 0 for t in doc["tallies"].values())


# ---------------------------------------------------------------------------
# plot


def make_csv(tmp_path, rows):
    from fpplab.montecarlo import EstimateRecord, records_csv

    recs = [EstimateRecord("e", n, total, t, total - t, 0, 0, 1) for n, t, total in rows]
    p = tmp_path / "in.csv"
    p.write_text(records_csv(recs, "fp"))
    return p


def test_plot_single_row(tmp_path):
    src = make_csv(tmp_path, [(4, 5, 10)])
    out = tmp_path / "p.svg"
    assert main(["plot", "--input", str(src), "--output", str(out)]) == 0
    root = ET.parse(out).getroot()
    assert root.tag == svg_ns("svg")


def test_plot_constant_series_is_horizontal(tmp_path):
    src = make_csv(tmp_path, [(2, 10, 10), (4, 10, 10), (8, 10, 10)])
    out = tmp_path / "p.svg"
    assert main(["plot", "--input", str(src), "--output", str(out)]) == 0
    root = ET.parse(out).getroot()
    line = next(e for e in root.iter(svg_ns("polyline")) if e.get("class") == "p_lo")
    ys = {pt.split(",")[1] for pt in line.get("points").split()}
    assert len(ys) == 1


def test_plot_guides_for_dimension(tmp_path):
    src = make_csv(tmp_path, [(2, 50, 100), (4, 20, 100), (8, 5, 100)])
    out = tmp_path / "p.svg"
    assert main(["plot", "--input", str(src), "--output", str(out), "--dim", "2"]) == 0
    root = ET.parse(out).getroot()
    slopes = sorted(int(e.get("data-slope")) for e in root.iter(svg_ns("line"))
                    if e.get("class") == "guide")
    assert slopes == [-4, -1]
    classes = {e.get("class") for e in root.iter(svg_ns("polygon"))}
    assert classes == {"band-p_lo", "band-p_hi"}


def test_plot_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    out = tmp_path / "p.svg"
    assert main(["plot", "--input", str(bad), "--output", str(out)]) == 2
    assert main(["plot", "--input", str(tmp_path / "missing.csv"), "--output", str(out)]) == 3
    good = make_csv(tmp_path, [(4, 5, 10)])
    assert main(["plot", "--input", str(good), "--output", str(tmp_path / "no" / "p.svg")]) == 3
