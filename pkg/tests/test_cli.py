import csv
from decimal import Decimal
import json
import shutil
import subprocess
import sys

import pytest

from defiprofit import presets
from defiprofit.cli import main
from defiprofit.snapshot import load_snapshot


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_snapshot_reproduces_bancor_constants(tmp_path, capsys):
    out = tmp_path / "e.json"
    code, _, _ = run(["gen-snapshot", "--preset", "appendix-e-bancor", "--out", str(out)], capsys)
    assert code == 0
    s = load_snapshot(out)
    for key, venue, asset in (("bancor_eth", "bancor", "ETH"), ("bancor_bnt", "bancor", "BNT"),
                              ("uniswap_eth", "uniswap", "ETH"), ("uniswap_bnt", "uniswap", "BNT")):
        wei = presets.APPENDIX_E[key]
        assert s.venues[venue].reserves[asset] == float(Decimal(wei) / 10**18)


def test_unknown_subcommand(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 2 and "usage" in err.lower()


def test_missing_file_is_usage_error(tmp_path, capsys):
    code, _, _ = run(["arb", "--snapshot", str(tmp_path / "nope.json"), "--catalog", "fig2"], capsys)
    assert code == 2


def test_domain_error_exit_code(capsys):
    code, _, err = run(["mdp", "--alpha", "0.7"], capsys)
    assert code == 1 and err


def test_same_seed_same_bytes(tmp_path, capsys):
    # identical arguments both times; paths are part of the config hash
    outs = []
    d, report = tmp_path / "series", tmp_path / "r.csv"
    for _ in range(2):
        assert main(["gen-snapshot", "--preset", "fig2", "--blocks", "6", "--touched", "3",
                     "--seed", "5", "--out", str(d)]) == 0
        assert main(["replay", "--series", str(d), "--catalog", str(d) + ".catalog.json",
                     "--no-timing", "--out", str(report)]) == 0
        outs.append((d / "block_10001087.json").read_bytes() + report.read_bytes())
        shutil.rmtree(d)
    capsys.readouterr()
    assert outs[0] == outs[1]
    assert report.read_bytes().startswith(b"# tool=")


def test_arb_json(capsys):
    code, out, _ = run(["arb", "--snapshot", "block-9819643-style", "--catalog", "block-9819643-style"],
                       capsys)
    assert code == 0
    d = json.loads(out)
    assert len(d["strategies"]) == 1 and d["strategies"][0]["revenue"] > 0.1


def test_paths_stats(capsys):
    code, out, _ = run(["paths", "--catalog", "appendix-b-96", "--max-len", "3", "--stats"], capsys)
    assert code == 0 and "9120" in out


def test_mdp_sweep_csv(capsys):
    code, out, _ = run(["mdp", "--cutoff", "8", "--sweep", "alpha=0.2:0.4:0.1"], capsys)
    assert code == 0
    rows = [r for r in csv.reader(line for line in out.splitlines() if not line.startswith("#"))]
    assert rows[0] == ["alpha", "r_s", "mev_v"] and len(rows) == 4


def test_search_exports_smt(tmp_path, capsys):
    code, _, _ = run(["search", "--snapshot", "fig2", "--catalog", "fig2", "--max-len", "3",
                      "--export-smt", str(tmp_path)], capsys)
    assert code == 0
    assert list(tmp_path.glob("*.smt2"))


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "defiprofit", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
