import json

import pytest
from hypothesis import given, strategies as st

from crystcm.cli import main
from crystcm.config import ConfigError, parse_config


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# -- configuration -------------------------------------------------------------

@given(st.sampled_from([(2, 1), (3, 1), (3, 2), (4, 1), (2, 2)]), st.integers(0, 2**64 - 1),
       st.sampled_from(["zero", "random"]), st.integers(1, 9))
def test_config_round_trip(mn, seed, params, samples):
    raw = {"group": {"m": mn[0], "n": mn[1]}, "parameters": params, "seed": seed,
           "samples": samples, "tolerances": {"fit": 1e-5}, "truncation": {"jet_order": 1}}
    cfg = parse_config(raw)
    again = parse_config(json.loads(cfg.to_json()))
    assert again == cfg and again.to_json() == cfg.to_json()


def test_unknown_label_rejected():
    with pytest.raises(ConfigError, match="pt:bogus:j1"):
        parse_config({"group": {"m": 3, "n": 2}, "parameters": {"pt:bogus:j1": [1, 0]}})


@pytest.mark.parametrize("raw,field", [
    ({"group": {"m": 5, "n": 1}}, "group"),
    ({"group": {"m": 3, "n": 1}, "tau": [0, 1]}, "group"),
    ({"group": {"m": 3, "n": 1}, "tolerances": {"fit": -1}}, "tolerances.fit"),
    ({"group": {"m": 3, "n": 1}, "seed": -3}, "seed"),
    ({"group": {"m": 3, "n": 1}, "samples": 0}, "samples"),
    ({"group": {"m": 3, "n": 1}, "colour": 1}, "colour"),
])
def test_field_diagnostics(raw, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(raw)


def test_tau_defaults_by_m():
    assert parse_config({"group": {"m": 4, "n": 1}}).tau == 1j


# -- exit codes ------------------------------------------------------------------

def test_verify_unknown_label_exits_2(tmp_path, capsys):
    path = write(tmp_path, {"group": {"m": 3, "n": 2}, "parameters": {"pt:bogus:j1": [1, 0]}})
    code, _, err = run(capsys, "verify", "--config", path)
    assert code == 2 and "pt:bogus:j1" in err


def test_invalid_json_reports_position(tmp_path, capsys):
    path = write(tmp_path, '{"group": {"m": 3,\n "n": 2}\n,,}')
    code, _, err = run(capsys, "verify", "--config", path)
    assert code == 2 and "line 3" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "verify", "--suite", "nonsense")[0] == 2
    assert run(capsys)[0] == 2


def test_verify_zero_coupling(tmp_path, capsys):
    path = write(tmp_path, {"group": {"m": 3, "n": 1}, "parameters": "zero"})
    code, out, _ = run(capsys, "verify", "--config", path)
    lines = [json.loads(l) for l in out.splitlines()]
    assert code == 0 and lines and all(l["pass"] for l in lines)
    assert lines[0]["check"].startswith("kernel.")


def test_verify_is_deterministic(tmp_path, capsys):
    path = write(tmp_path, {"group": {"m": 2, "n": 1}, "parameters": "random", "seed": 7})
    a = run(capsys, "verify", "--config", path, "--no-timing")[1]
    b = run(capsys, "verify", "--config", path, "--no-timing")[1]
    assert a == b and a


def test_report_fields(tmp_path, capsys):
    path = write(tmp_path, {"group": {"m": 2, "n": 1}, "parameters": "random"})
    _, out, _ = run(capsys, "verify", "--config", path, "--suite", "kernel")
    line = json.loads(out.splitlines()[0])
    for key in ("check", "config_hash", "absolute", "scale", "relative", "tolerance", "pass",
                "runtime_ms", "seed", "samples"):
        assert key in line


def test_out_flag(tmp_path, capsys):
    target = tmp_path / "report.jsonl"
    path = write(tmp_path, {"group": {"m": 2, "n": 1}})
    assert run(capsys, "verify", "--config", path, "--suite", "kernel", "--out", str(target))[0] == 0
    assert target.read_text().count("\n") >= 2


def test_g312_default_suite(capsys):
    code, out, _ = run(capsys, "verify", "--seed", "0")
    assert code == 0 and len(out.splitlines()) >= 12


# -- build -----------------------------------------------------------------------

def test_build_zero_coupling_constant_tables(tmp_path, capsys):
    path = write(tmp_path, {"group": {"m": 3, "n": 2}, "parameters": "zero"})
    code, out, _ = run(capsys, "build", "--config", path, "--generator", "2")
    doc = json.loads(out)
    assert code == 0 and doc["certificate"]["pass"]
    nonzero = [c for c in doc["coefficients"] if c["value"] != [0.0, 0.0]]
    assert nonzero == [{"beta": [0, 6], "value": [1.0, 0.0]},
                       {"beta": [6, 0], "value": [1.0, 0.0]}]


def test_build_a1_emits_fit(tmp_path, capsys):
    path = write(tmp_path, {"group": {"m": 2, "n": 1, "kind": "A1"},
                            "parameters": {"pt:0:j1": [0.7, 0.2], "pt:half:j1": 0,
                                           "pt:halftau:j1": 0, "pt:halfsum:j1": 0}})
    code, out, _ = run(capsys, "build", "--config", path)
    fit = json.loads(out)["fits"][0]
    C = complex(0.7, 0.2)
    want = -2 * C * (C + 1)
    assert code == 0 and fit["ansatz"] == "A1"
    assert abs(complex(*fit["parameters"]["potential"]) - want) < 1e-5


def test_build_rank_one_cubic_fit(tmp_path, capsys):
    path = write(tmp_path, {"group": {"m": 3, "n": 1}, "parameters": "random", "seed": 3})
    code, out, _ = run(capsys, "build", "--config", path)
    assert code == 0 and json.loads(out)["fits"][0]["ansatz"] == "cubic-rank1"


def test_build_generator_out_of_range(capsys):
    assert run(capsys, "build", "--generator", "5")[0] == 2


# -- algint ----------------------------------------------------------------------

def test_algint_lame_family(capsys):
    code, out, _ = run(capsys, "algint", "--family=-1,1,3")
    assert code == 0 and all(json.loads(l)["pass"] for l in out.splitlines())


def test_algint_obstructed(capsys):
    code, out, _ = run(capsys, "algint", "--family=-3,1,5", "--tau", "1.3i")
    frob = json.loads(out.splitlines()[-1])
    assert code == 1 and frob["obstruction"] > 1e-3


def test_algint_non_integer_table(tmp_path, capsys):
    params = {"pt:0:j1": [0.3, 0], "pt:0:j2": 0, "pt:eta1:j1": 0, "pt:eta1:j2": 0,
              "pt:eta2:j1": 0, "pt:eta2:j2": 0}
    path = write(tmp_path, {"group": {"m": 3, "n": 1}, "parameters": params})
    code, out, _ = run(capsys, "algint", "--config", path)
    first = json.loads(out.splitlines()[0])
    assert code == 1 and not first["pass"] and "not all integers" in first["reason"]


def test_algint_enumerate(capsys):
    code, out, _ = run(capsys, "algint", "--enumerate", "2")
    fams = [tuple(json.loads(l)["family"]) for l in out.splitlines()]
    assert code == 0 and (0, 1, 2) in fams and (-1, 1, 3) not in fams


# -- flow ------------------------------------------------------------------------

def test_flow_requires_m3(tmp_path, capsys):
    path = write(tmp_path, {"group": {"m": 2, "n": 2}})
    assert run(capsys, "flow", "--config", path)[0] == 2
