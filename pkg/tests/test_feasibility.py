import csv
import io
import json
import math

import numpy as np
import pytest

from cfsqueezer.errors import BudgetExceeded, InternallyUnstablePlant
from cfsqueezer.feasibility import (
    CONDITIONAL,
    CSV_COLUMNS,
    STABLE,
    UNSTABLE,
    SearchOptions,
    allowable_mismatch,
    sweep_map,
)
from cfsqueezer.stability import NyquistOptions, nyquist_verdict

from conftest import FS_GRID, freespace_cfg

FS_SEARCH = SearchOptions.free_space()


def test_zero_feedback_is_stable():
    for xi in (0.0, 0.5, 0.99):
        c = allowable_mismatch(freespace_cfg(), 0.0, xi, FS_SEARCH)
        assert c.status == STABLE and c.certificate == "zero-loop"


def test_small_gain_certificate():
    c = allowable_mismatch(freespace_cfg(), 0.05, 0.3, FS_SEARCH)
    assert c.status == STABLE and c.certificate == "small-gain"


def test_high_corner_unstable_dense_oracle():
    # oracle: a dense-grid Nyquist verdict at zero mismatch
    dense = nyquist_verdict(freespace_cfg(0.95, 0.95, 0.0), NyquistOptions(points_per_fsr=256))
    assert not dense.stable
    c = allowable_mismatch(freespace_cfg(), 0.95, 0.95, FS_SEARCH)
    assert c.status == UNSTABLE and c.allowable == 0.0


def test_above_threshold_rejected():
    with pytest.raises(InternallyUnstablePlant):
        allowable_mismatch(freespace_cfg(), 0.3, 1.0, FS_SEARCH)


def test_conditional_interval_validity():
    c = allowable_mismatch(freespace_cfg(), 0.3, 0.6, FS_SEARCH)
    assert c.status == CONDITIONAL
    assert c.delta_minus <= 0 <= c.delta_plus
    assert c.allowable == pytest.approx((c.delta_plus - c.delta_minus) / 2)
    eps = FS_SEARCH.bisect_tol
    base = freespace_cfg(0.3, 0.6)

    def stable(d):
        return nyquist_verdict(base.with_(delta_l_f=d)).stable

    assert stable(0.0) and stable(c.delta_minus + eps) and stable(c.delta_plus - eps)
    assert not stable(c.delta_minus - 10 * eps) and not stable(c.delta_plus + 10 * eps)


def test_bisection_budget():
    s = SearchOptions(5e-3, 50e-6, 1e-9, max_bisections=3)
    with pytest.raises(BudgetExceeded):
        allowable_mismatch(freespace_cfg(), 0.3, 0.6, s)


def test_one_by_one_map_equals_cell():
    cfg = freespace_cfg()
    m = sweep_map(cfg, [0.3], [0.6], FS_SEARCH)
    c = allowable_mismatch(cfg, 0.3, 0.6, FS_SEARCH)
    assert len(m.cells) == 1
    got = m.cells[0]
    assert (got.status, got.delta_minus, got.delta_plus, got.allowable) == \
        (c.status, c.delta_minus, c.delta_plus, c.allowable)


def test_map_complete_and_invariants(fs_map):
    assert len(fs_map.cells) == len(FS_GRID) ** 2
    assert {(c.R_f, c.xi) for c in fs_map.cells} == {(r, x) for r in FS_GRID for x in FS_GRID}
    for c in fs_map.cells:
        if c.status == CONDITIONAL:
            assert c.delta_minus <= 0 <= c.delta_plus and c.allowable >= 0
        assert c.dispersion_model_id.startswith("constant:1")


def test_map_rows_nonincreasing_in_rf(fs_map):
    a = fs_map.allowable_matrix()
    violations = [(fs_map.xi_grid[i], fs_map.rf_grid[j]) for i in range(a.shape[0])
                  for j in range(a.shape[1] - 1) if a[i, j + 1] > a[i, j] + 1e-12]
    assert violations == []


def test_boundary_consistency(fs_map, fs_run):
    st = fs_map.status_matrix()
    cfg = fs_run.build()
    for i in range(len(fs_map.xi_grid)):
        for j in range(len(fs_map.rf_grid) - 1):
            pair = {st[i][j], st[i][j + 1]}
            if pair == {CONDITIONAL, UNSTABLE}:
                for jj in (j, j + 1):
                    v = nyquist_verdict(cfg.with_(R_f=fs_map.rf_grid[jj], xi=fs_map.xi_grid[i], delta_l_f=0.0))
                    assert v.stable == (st[i][jj] == CONDITIONAL)


def test_determinism_and_workers():
    cfg = freespace_cfg()
    grid_r, grid_x = [0.0, 0.3, 0.7], [0.3, 0.6]
    a = sweep_map(cfg, grid_r, grid_x, FS_SEARCH)
    b = sweep_map(cfg, grid_r, grid_x, FS_SEARCH, workers=2)
    assert a.to_csv() == b.to_csv()
    assert a.provenance["config_hash"] == b.provenance["config_hash"]


def test_csv_and_summary(fs_map):
    text = fs_map.to_csv()
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    rows = list(csv.DictReader(io.StringIO(body)))
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert CSV_COLUMNS[:7] == ("R_f", "xi", "status", "delta_minus", "delta_plus", "allowable", "flags")
    assert len(rows) == 64
    assert "# config_hash:" in text and "# nyquist:" in text
    doc = json.loads(json.dumps(fs_map.summary()))
    assert doc["family"] == "FreeSpace" and sum(doc["status_counts"].values()) == 64


def test_sweep_records_cell_errors():
    cfg = freespace_cfg()
    m = sweep_map(cfg, [0.3], [0.6, 1.2], FS_SEARCH)
    bad = m.cell(0.3, 1.2)
    assert bad.status == "Error" and "InternallyUnstablePlant" in bad.error
    assert m.cell(0.3, 0.6).status == CONDITIONAL
    assert math.isnan(bad.allowable)


def test_islands_are_diagnostic_only():
    s = SearchOptions(1e-3, 50e-6, 1e-6, record_islands=True)
    a = allowable_mismatch(freespace_cfg(), 0.3, 0.6, s)
    b = allowable_mismatch(freespace_cfg(), 0.3, 0.6, SearchOptions(1e-3, 50e-6, 1e-6))
    assert (a.delta_minus, a.delta_plus) == (b.delta_minus, b.delta_plus)
    assert all(d < a.delta_minus or d > a.delta_plus for d in a.islands)
    assert np.all(np.isfinite(a.islands))
