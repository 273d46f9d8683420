import csv
import io
import json

import pytest

from ndsim import __version__
from ndsim.anchors import verify_anchors
from ndsim.cli import main, parse_ms_grid
from ndsim.core import AdvertiserConfig, ModePreset, ms, validate_preset_catalog


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_grid_parsing():
    assert parse_ms_grid("20:21:0.625ms") == [20_000, 20_625]
    assert parse_ms_grid("100, 152.5,100") == [100_000, 152_500]
    assert len(parse_ms_grid("20:1300:0.625ms")) == 2049
    for bad in ("", "ms", "5:1", "10:5:1", "1:2:0", "a,b"):
        with pytest.raises(Exception):
            parse_ms_grid(bad)


def test_sweep_latency_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, stdout, err = run(["sweep-latency", "--ta0-grid", "100,250", "--trials", "30", "--seed", "42",
                             "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    assert "sweep-latency 1/2" in err
    r = rows(out.read_text())
    assert [int(x["T_a0_us"]) for x in r] == [100_000, 250_000]
    assert r[0]["tool_version"] == __version__ and r[0]["seed"] == "42"
    params = json.loads(r[0]["params"])
    assert params["trials"] == 30 and params["scan_mode"] == "SCAN_MODE_LOW_POWER"
    assert 0 < int(r[0]["max_latency_us"]) < 5_000_000


def test_outputs_identical_across_workers(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["crowd", "--ta0", "1285,1000", "--trials", "300", "--devices", "40", "--seed", "3"]
    assert run(base + ["--out", str(a)], capsys)[0] == 0
    assert run(base + ["--out", str(b), "--workers", "2"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    r = rows(a.read_text())
    assert r[0]["deadline_us"] == "10000000" and 0 <= float(r[0]["success_probability"]) <= 1
    assert float(r[0]["ci95_low"]) <= float(r[0]["success_probability"]) <= float(r[0]["ci95_high"])


def test_generic_crowd_mode(capsys):
    code, out, _ = run(["crowd", "--pi-latency-ms", "200", "--devices", "10", "--trials", "200",
                        "--rescale", "2", "--quiet"], capsys)
    assert code == 0
    r = rows(out)
    assert r[0]["config"] == "pi-k2"


def test_energy_and_wearable(capsys):
    code, out, _ = run(["energy", "--scan-mode", "SCAN_MODE_LOW_LATENCY", "--ta0", "100"], capsys)
    assert code == 0
    assert 5.2 <= float(rows(out)[0]["impact_pct"]) <= 5.25
    code, out, _ = run(["wearable", "--active-fraction", "0.5"], capsys)
    assert code == 0 and float(rows(out)[0]["runtime_days"]) >= 150
    code, out, _ = run(["energy", "--wearable", "--profile", "nrf52832-wearable"], capsys)
    assert 50 <= float(rows(out)[0]["runtime_days"]) <= 90


def test_bounds_and_distance(capsys):
    code, out, _ = run(["bounds", "--scan-mode", "SCAN_MODE_LOW_POWER", "--ta0", "100", "--latency-ms", "5000"], capsys)
    r = {x["quantity"]: x["value"] for x in rows(out)}
    assert code == 0
    assert r["worst_case_latency:SCAN_MODE_LOW_POWER:T_a0=100000us"] == "4718000"
    assert abs(float(r["equal_duty_beta"]) - 0.0028) < 1e-4
    code, out, _ = run(["bounds", "--beta", "0.5", "--gamma", "0.5", "--omega-us", "1"], capsys)
    assert rows(out)[0]["value"] == "5.0"
    code, out, _ = run(["distance", "--true-m", "0.5"], capsys)
    r = rows(out)[0]
    assert code == 0 and abs(float(r["estimate_m"]) - 4.56) < 0.05 and r["classification"] == "not_relevant"


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "distance", "true-m": 0.25, "body_db": 0}))
    code, out, _ = run(["distance", "--config", str(cfg), "--threshold-m", "0.2"], capsys)
    r = rows(out)[0]
    assert code == 0 and r["estimate_m"] == "0.25" and r["classification"] == "not_relevant"
    # the file and the equivalent flags resolve to the same record
    code, out2, _ = run(["distance", "--true-m", "0.25", "--body-db", "0", "--threshold-m", "0.2"], capsys)
    assert out2 == out


@pytest.mark.parametrize(
    "cfg, fragment",
    [
        ({"nope": 1}, "$.nope"),
        ({"true_m": "far"}, "$.true_m"),
        ({"command": "crowd"}, "$.command"),
        ([1, 2], "top level"),
    ],
)
def test_bad_config_is_rejected(tmp_path, capsys, cfg, fragment):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    code, out, err = run(["distance", "--true-m", "1", "--config", str(p)], capsys)
    assert code != 0 and out == "" and fragment in err


def test_error_exits(tmp_path, capsys):
    assert run(["sweep-latency", "--ta0-grid", ""], capsys)[0] != 0
    assert run(["distance", "--true-m", "1", "--out", str(tmp_path / "no" / "x.csv")], capsys)[0] != 0
    assert run(["distance"], capsys)[0] != 0
    assert run(["crowd", "--ta0", "5"], capsys)[0] != 0  # below the BLE range
    assert run(["bounds"], capsys)[0] != 0
    assert run(["bounds", "--beta", "0.1"], capsys)[0] != 0
    with pytest.raises(SystemExit):
        main(["sweep-latency", "--scan-mode", "SCAN_MODE_FAST"])
    capsys.readouterr()


def test_verify_report_and_negative_control(capsys):
    code, out, err = run(["verify", "--only", "catalog,1-equal-duty,2-worst-case,9-distance"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["all_passed"] and len(rep["anchors"]) == 4
    assert "[PASS] catalog" in err
    again = json.loads(run(["verify", "--only", "catalog,1-equal-duty,2-worst-case,9-distance"], capsys)[1])
    assert again == rep

    cat = validate_preset_catalog()
    cat.add(ModePreset("IOS_7", advertiser=AdvertiserConfig(T_a0=ms(850))))
    bad = verify_anchors(catalog=cat, only=["catalog", "2-worst-case"])
    by_id = {a["id"]: a for a in bad["anchors"]}
    assert not bad["all_passed"]
    assert not by_id["catalog"]["passed"] and by_id["catalog"]["measured"]["mismatched"] == ["IOS_7"]
    assert by_id["2-worst-case"]["passed"]

    broken = validate_preset_catalog()
    del broken.presets["SCAN_MODE_LOW_POWER"]
    rep = verify_anchors(catalog=broken, only=["2-worst-case"])
    assert not rep["all_passed"] and "error" in rep["anchors"][0]["measured"]
    with pytest.raises(KeyError):
        verify_anchors(only=["nope"])
