import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from homog_lab import cli
from homog_lab import experiments as E
from homog_lab import rng as R
from homog_lab.config import SCHEMA, default_config, load_config, parse_config
from homog_lab.fields import FieldSpec, Rademacher
from homog_lab.report import RESULTS_HEADER, VERDICTS_HEADER, emit_report

CFG_TEXT = """\
[experiment]
name = field_clt
seed = 11
workers = 1

[field]
kernel = box
a_marginal = two_point
a_lo = 1
a_hi = 4
sigma = 0.5

[evaluation]
eps = 0.4, 0.2, 0.1

[budget]
n_seeds = 600
"""


# ------------------------------------------------------------------ config

def test_parse_config_and_roundtrip():
    cfg = parse_config(CFG_TEXT)
    assert cfg.name == "field_clt" and cfg.seed == 11
    assert cfg.get("eps") == (0.4, 0.2, 0.1)
    assert cfg.get("n_seeds") == 600
    assert cfg.get("c_dt") == 0.01
    assert cfg.field_spec == FieldSpec()
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_digest_ignores_workers_and_output():
    cfg = parse_config(CFG_TEXT)
    assert cfg.with_overrides(workers=4, out="elsewhere").digest() == cfg.digest()
    assert cfg.with_overrides(seed=12).digest() != cfg.digest()


@pytest.mark.parametrize("text", [
    "[experiment]\nname = main\n[bogus]\nx = 1\n",
    "[experiment]\nname = main\nseeed = 3\n",
    "[experiment]\nname = main\n[field]\nsigmaa = 1\n",
    "[experiment]\nname = main\n[numerics]\nc_dtt = 0.1\n",
    "[budget]\nn_W = 3\n",
])
def test_unknown_keys_are_errors(text):
    with pytest.raises(KeyError):
        parse_config(text)


@pytest.mark.parametrize("text", [
    "[experiment]\nname = main\n[evaluation]\neps = 0.1, 0.2\n",
    "[experiment]\nname = main\n[evaluation]\neps = 0.1, -0.05\n",
    "[experiment]\nname = main\nworkers = 0\n",
    "[experiment]\nname = main\n[budget]\nn_W = many\n",
    "[experiment]\nname = main\n[field]\na_lo = -1\n",
])
def test_invalid_values_are_errors(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_overrides_validate_keys():
    cfg = default_config("main")
    with pytest.raises(KeyError):
        cfg.with_overrides(n_wiener=3)
    assert cfg.with_overrides(n_W=3).get("n_W") == 3


def test_budget_minimum():
    with pytest.raises(ValueError):
        E.run("field_clt", n_seeds=1)


def test_schema_keys_documented_in_readme():
    from pathlib import Path
    readme = (Path(__file__).resolve().parents[1] / "README.md").read_text()
    for sec, keys in SCHEMA.items():
        assert f"[{sec}]" in readme
        for k in keys:
            assert f"`{k}`" in readme, k


# ------------------------------------------------------------------ seeding

def test_seed_derivation_is_stable_and_separated():
    a = R.stream(5, R.FIELD_A, 0).random(3)
    b = R.stream(5, R.FIELD_A, 0).random(3)
    c = R.stream(5, R.FIELD_C, 0).random(3)
    d = R.stream(6, R.FIELD_A, 0).random(3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    assert R.derive_seed(1, R.FIELD_SEED, 3) == R.derive_seed(1, R.FIELD_SEED, 3)
    assert R.derive_seed(1, R.FIELD_SEED, 3) != R.derive_seed(1, R.FIELD_SEED, 4)


# ------------------------------------------------------------ determinism

def _csv_bytes(tmp, rep):
    emit_report(rep, tmp)
    return (tmp / "results.csv").read_bytes(), (tmp / "verdicts.csv").read_bytes()


def test_repeat_run_gives_identical_csv(tmp_path):
    cfg = parse_config(CFG_TEXT)
    a = _csv_bytes(tmp_path / "a", E.run_experiment(cfg))
    b = _csv_bytes(tmp_path / "b", E.run_experiment(cfg))
    assert a == b


def test_worker_count_does_not_change_results(tmp_path):
    cfg = parse_config(CFG_TEXT)
    one = _csv_bytes(tmp_path / "one", E.run_experiment(cfg))
    two = _csv_bytes(tmp_path / "two", E.run_experiment(cfg.with_overrides(workers=2)))
    assert one == two


def test_worker_count_quenched_paths(tmp_path):
    cfg = default_config("exponent_identity", n_paths=300, eps=(0.2,), t=0.1)
    one = E.run_experiment(cfg)
    two = E.run_experiment(cfg.with_overrides(workers=2))
    assert [r.value for r in one.rows] == [r.value for r in two.rows]


# ------------------------------------------------------------------ reports

def test_empty_report_has_headers_only(tmp_path):
    emit_report([], tmp_path)
    assert (tmp_path / "results.csv").read_text() == ",".join(RESULTS_HEADER) + "\n"
    assert (tmp_path / "verdicts.csv").read_text() == ",".join(VERDICTS_HEADER) + "\n"
    meta = json.loads((tmp_path / "report.json").read_text())
    assert meta["reports"] == []


def test_three_eps_rows_per_point(tmp_path):
    rep = E.run_experiment(parse_config(CFG_TEXT))
    emit_report(rep, tmp_path)
    with open(tmp_path / "results.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == set(RESULTS_HEADER)
    var_rows = [r for r in rows if r["statistic_name"] == "var_W_eps"]
    for x in ("0.5", "1.0", "2.0"):
        assert len([r for r in var_rows if r["x"] == x]) == 3
    with open(tmp_path / "verdicts.csv", newline="") as fh:
        verdicts = list(csv.DictReader(fh))
    assert all(v["criterion_id"].startswith("C2") for v in verdicts)
    assert {v["pass"] for v in verdicts} <= {"true", "false"}


def test_svg_is_well_formed(tmp_path):
    written = emit_report(E.run_experiment(parse_config(CFG_TEXT)), tmp_path)
    svgs = [p for p in written if p.suffix == ".svg"]
    assert svgs
    for p in svgs:
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")


def test_svg_reproducible(tmp_path):
    rep = E.run_experiment(parse_config(CFG_TEXT))
    a = [p.read_bytes() for p in emit_report(rep, tmp_path / "a") if p.suffix == ".svg"]
    b = [p.read_bytes() for p in emit_report(rep, tmp_path / "b") if p.suffix == ".svg"]
    assert a == b


def test_every_verdict_names_a_criterion():
    rep = E.run("heat_kernel")
    assert rep.verdicts and all(v.criterion_id.startswith("C11") for v in rep.verdicts)
    assert rep.provenance["experiment"] == "heat_kernel"


# ------------------------------------------------------------- experiments

def test_corrector_experiment():
    rep = E.run("exp_corrector", n_cells=20_000)
    assert rep.verdict("C1").measured <= 1e-10


def test_main_without_potential_degenerates_to_heat_value():
    spec = FieldSpec(c=Rademacher(0.0))
    cfg = default_config("main", n_fields=8, n_W=8, n_paths=50, eps=(0.4, 0.2),
                         points=((0.25, 0.0), (0.5, 0.0), (0.5, 0.5)))
    from dataclasses import replace
    cfg = replace(cfg, field_spec=spec)
    d = E.law_data(cfg)
    # no potential: every limit sample is the heat value up to inner noise
    from homog_lab.pde import heat_solution
    z = (d.u_lim[:, 1] - heat_solution(0.5, 0.0, 1.6)) / d.se_lim[:, 1]
    assert np.all(np.abs(z) < 5)
    rep = E.run_experiment(cfg)
    thr = [r.value for r in rep.rows if r.statistic_name == "ks_threshold" and r.x == 0.0
           and r.t == 0.5][0]
    assert rep.verdict("C8-final").measured <= thr


def test_unknown_experiment():
    with pytest.raises(KeyError):
        E.resolve("nonsense")
    assert E.resolve("exp_fdd") == "fdd"


def test_pmap_order_and_errors():
    assert E.pmap(abs, [-3, 2, -1], workers=2) == [3, 2, 1]
    with pytest.raises(TypeError):
        E.pmap(abs, ["a", "b"], workers=2)


# --------------------------------------------------------------------- CLI

def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for name in E.EXPERIMENTS:
        assert name in out
    for k in range(1, 13):
        assert f"C{k} " in out


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(CFG_TEXT)
    code = cli.main(["field_clt", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--seed", "3"])
    out = capsys.readouterr().out
    assert code in (0, 1)
    assert "PASS" in out or "FAIL" in out
    assert (tmp_path / "o" / "verdicts.csv").exists()
    assert json.loads((tmp_path / "o" / "report.json").read_text())["reports"][0]["seed"] == 3


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nname = main\ntypo = 1\n")
    assert cli.main(["main", "--config", str(bad)]) == 2
    assert cli.main(["nonsense"]) == 2
    assert cli.main(["main", "--workers", "0"]) == 2
    assert "typo" in capsys.readouterr().err


def test_load_config_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(CFG_TEXT)
    assert load_config(p).get("n_seeds") == 600
    assert load_config(p, "xi_diag").name == "xi_diag"
