import pytest

from conftest import validated
from fogbench.model import DeploymentMode as M, Profile
from fogbench.orchestrator import run_benchmark
from fogbench.report import (CSV_COLUMNS, best_modes, read_csv, record_row, render_agg_csv, render_csv,
                             render_verbose, write_outputs)
from fogbench.stress import StressLevel as S


@pytest.fixture(scope="module")
def results():
    return run_benchmark(validated(profiles=[Profile.SPHINX_LIKE, Profile.POKEMON_LIKE], repetitions=3,
                                   user_counts=(1, 3)))


def test_csv_shape(results):
    lines = render_csv(results).splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 1 + len(results.records)


def test_seventy_five_rows(tmp_path):
    from dataclasses import replace
    from fogbench.model import validate_run_config
    from fogbench.presets import default_run_config
    from fogbench.workloads import make_profile
    w = make_profile(Profile.AENEAS_LIKE, {"asset_count": 3})
    cfg = validate_run_config(replace(default_run_config(profiles=[], modes=[M.EDGE_ONLY]), workloads=(w,)))
    paths = write_outputs(run_benchmark(cfg), tmp_path)
    assert len(paths["csv"].read_text().splitlines()) == 76


def test_empty_optional_fields(results, tmp_path):
    rows = read_csv(write_outputs(results, tmp_path)["csv"])
    assert all(r["rtf"] is None for r in rows if r["workload"] == "pokemon")
    assert all(r["rtf"] is not None for r in rows if r["workload"] == "sphinx")
    assert all(r["throughput"] is None for r in rows if r["users"] == 1)
    assert all(r["throughput"] == 15 for r in rows if r["users"] == 3)


def test_round_trip(results, tmp_path):
    paths = write_outputs(results, tmp_path, run_id="r")
    rows = read_csv(paths["csv"])
    for rec, row in zip(results.records, rows):
        want = record_row(rec)
        for col in CSV_COLUMNS:
            v = want[col]
            if hasattr(v, "value"):
                v = v.value
            if col == "placement":
                v = rec.key.placement.label()
            assert row[col] == v, col


def test_outputs_do_not_collide(results, tmp_path):
    a = write_outputs(results, tmp_path, run_id="same")
    b = write_outputs(results, tmp_path, run_id="same")
    assert a["csv"] != b["csv"] and a["csv"].exists() and b["csv"].exists()


def test_byte_stable(results):
    assert render_csv(results) == render_csv(results)
    assert render_verbose(results) == render_verbose(results)
    assert render_agg_csv(results) == render_agg_csv(results)


def test_verbose_sections(results):
    text = render_verbose(results)
    for head in ("== configuration ==", "== platform metrics ==", "== per-cell latency",
                 "== concurrent users ==", "== deployment mode comparison"):
        assert head in text
    assert "<- min RTT" in text
    assert "[cloud-1]" in text and "cpu_model" in text


def test_no_concurrency_section_for_single_user():
    res = run_benchmark(validated(profiles=[Profile.POKEMON_LIKE], repetitions=2))
    assert "== concurrent users ==" not in render_verbose(res)


def test_best_modes(results):
    best = best_modes(results)
    assert best["sphinx"] is M.CLOUD_ONLY
    assert best["pokemon"] in (M.EDGE_ONLY, M.CLOUD_EDGE)


def test_agg_one_row_per_cell(results):
    lines = render_agg_csv(results).splitlines()
    cells = {r.key.cell for r in results.records}
    assert len(lines) == 1 + len(cells)
    assert "rtt_mean" in lines[0] and "rtt_stddev" in lines[0]


def test_failed_cell_reported():
    from fogbench.orchestrator import ResultSet
    res = run_benchmark(validated(profiles=[Profile.POKEMON_LIKE], modes=[M.EDGE_ONLY], repetitions=1))
    for r in res.records:
        r.success = False
    assert "all 1 records failed" in render_verbose(ResultSet(res.records, res.config_snapshot, res.seed))
