import csv
import os

import pytest

from finch.cli import CampaignConfig, main, parse_config_text, read_stats
from finch.engine import STATS_FIELDS


@pytest.fixture
def seeds_dir(tmp_path):
    d = tmp_path / "seeds"
    d.mkdir()
    (d / "a").write_bytes(bytes([1, 1, 1, 0x0A, 0, 0, 0, 0]))
    (d / "b").write_bytes(bytes(8))
    return d


def run_fig1(seeds_dir, out, *extra):
    return main(["run", "--target", "fig1", "--seeds", str(seeds_dir), "--out", str(out),
                 "--execs", "10000", "--hidden", "32", "--epochs", "20", *extra])


def test_run_writes_layout(seeds_dir, tmp_path):
    out = tmp_path / "out"
    assert run_fig1(seeds_dir, out) == 0
    assert {p.name for p in out.iterdir()} >= {"pareto", "crashes", "stats.csv", "config.resolved"}
    assert any((out / "pareto").iterdir())
    with open(out / "stats.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == STATS_FIELDS
    assert len(rows) >= 2
    walls = [float(r[0]) for r in rows[1:]]
    execs = [int(r[1]) for r in rows[1:]]
    assert walls == sorted(set(walls)) and execs == sorted(set(execs))
    for name in os.listdir(out / "crashes"):
        assert name.startswith("bug_")


def test_stats_byte_identical_across_runs(seeds_dir, tmp_path):
    assert run_fig1(seeds_dir, tmp_path / "x", "--seed", "3") == 0
    assert run_fig1(seeds_dir, tmp_path / "y", "--seed", "3") == 0
    assert (tmp_path / "x" / "stats.csv").read_bytes() == (tmp_path / "y" / "stats.csv").read_bytes()
    assert sorted(os.listdir(tmp_path / "x" / "crashes")) == sorted(os.listdir(tmp_path / "y" / "crashes"))


def test_unknown_target_exits_2(seeds_dir, tmp_path, capsys):
    rc = main(["run", "--target", "nope", "--seeds", str(seeds_dir), "--out", str(tmp_path / "o"),
               "--execs", "10"])
    assert rc == 2
    assert "fig1" in capsys.readouterr().err


def test_empty_seeds_exits_2_without_touching_out(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    out = tmp_path / "o"
    rc = main(["run", "--target", "fig1", "--seeds", str(empty), "--out", str(out), "--execs", "10"])
    assert rc == 2
    assert not out.exists()


def test_unwritable_out_exits_3(seeds_dir, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert run_fig1(seeds_dir, blocker / "sub") == 3


def test_config_round_trip():
    cfg = CampaignConfig(target="lava8", seeds="s", out="o", execs=123, mode="baseline", seed=2**64 - 1,
                         k=1000, distance="xor", norm="log", hidden=7, epochs=3, havoc_ratio=0.1,
                         mutant_budget=99, map_size=1024, clock="wall")
    assert CampaignConfig.from_text(cfg.to_text()) == cfg
    assert CampaignConfig.from_text(CampaignConfig().to_text()) == CampaignConfig()
    with pytest.raises(ValueError):
        parse_config_text("bogus=1")


def test_config_file_with_flag_override(seeds_dir, tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text(f"# campaign\ntarget=fig1\nseeds={seeds_dir}\nexecs=2000\nhidden=16\nepochs=5\nseed=4\n")
    out = tmp_path / "o"
    assert main(["run", "--config", str(conf), "--out", str(out), "--seed", "9"]) == 0
    resolved = CampaignConfig.from_text((out / "config.resolved").read_text())
    assert resolved.seed == 9 and resolved.hidden == 16 and resolved.execs == 2000


def test_report_outputs(seeds_dir, tmp_path, capsys):
    out = tmp_path / "out"
    run_fig1(seeds_dir, out)
    capsys.readouterr()
    assert main(["report", str(out), "--verify"]) == 0
    text = capsys.readouterr().out
    assert "unique bugs" in text and "edges covered" in text
    n_rows = len(read_stats(out / "stats.csv"))
    cov = (out / "coverage_over_time.tsv").read_text().splitlines()
    assert cov[0] == "wall_seconds\tedges_covered" and len(cov) == n_rows + 1
    assert len((out / "training_time.tsv").read_text().splitlines()) == n_rows + 1


def test_report_single_row_and_tolerates_bad_rows(tmp_path, caplog):
    out = tmp_path / "o"
    out.mkdir()
    header = ",".join(STATS_FIELDS)
    (out / "stats.csv").write_text(f"{header}\n0.1,10,3,1,2,0.0,0\n")
    assert main(["report", str(out)]) == 0
    assert len((out / "coverage_over_time.tsv").read_text().splitlines()) == 2
    (out / "stats.csv").write_text(f"{header}\n0.1,10,3,1,2,0.0,0\n0.2,20,x,1,2,0.0,0\n0.3,30\n")
    assert main(["report", str(out)]) == 0
    assert len((out / "coverage_over_time.tsv").read_text().splitlines()) == 2
    assert "skipped" in caplog.text


def test_report_missing_stats(tmp_path):
    assert main(["report", str(tmp_path)]) == 2


def test_targets_lists_builtins(capsys):
    assert main(["targets"]) == 0
    out = capsys.readouterr().out
    for name in ("fig1", "lava8", "nested", "lenfield"):
        assert name in out


def test_dump_tmp(seeds_dir, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--target", "fig1", "--seeds", str(seeds_dir), "--out", str(out),
                 "--execs", "500", "--hidden", "8", "--epochs", "2", "--dump-tmp"]) == 0
    assert any((out / "tmp").iterdir())
