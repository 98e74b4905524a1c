"""Allowable feedback-length mismatch and (R_f, xi) feasibility maps.

For each (R_f, xi) the search walks outward from delta_l_f = 0 in coarse
steps until the first unstable verdict on each side, then bisects that
bracket.  The result is the maximal stable interval containing zero.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .errors import BudgetExceeded, CFSError, MarginalCase
from .network import CFSConfig
from .plants import CavityDOPOParams, LangevinDOPOParams, cavity_peak_gain, dopo_internal_stability
from .stability import NyquistOptions, _langevin_gmax, make_locus

STABLE = "UnconditionallyStable"
UNSTABLE = "UnconditionallyUnstable"
CONDITIONAL = "Conditional"
ERROR = "Error"

CSV_COLUMNS = ("R_f", "xi", "status", "delta_minus", "delta_plus", "allowable", "flags",
               "certificate", "dispersion_model_id", "error")


@dataclass(frozen=True)
class SearchOptions:
    scan_halfwidth: float
    coarse_step: float
    bisect_tol: float
    record_islands: bool = False
    max_bisections: int = 200

    @classmethod
    def free_space(cls, **kw):
        return cls(5e-3, 50e-6, 1e-6, **kw)

    @classmethod
    def waveguide(cls, **kw):
        return cls(500e-6, 5e-6, 0.1e-6, **kw)


@dataclass(frozen=True)
class FeasibilityCell:
    R_f: float
    xi: float
    status: str
    delta_minus: float
    delta_plus: float
    allowable: float
    dispersion_model_id: str
    certificate: str = ""
    flags: tuple = ()
    islands: tuple = ()
    error: str = ""
    n_verdicts: int = 0

    def as_row(self):
        return {
            "R_f": repr(float(self.R_f)),
            "xi": repr(float(self.xi)),
            "status": self.status,
            "delta_minus": _num(self.delta_minus),
            "delta_plus": _num(self.delta_plus),
            "allowable": _num(self.allowable),
            "flags": ";".join(self.flags),
            "certificate": self.certificate,
            "dispersion_model_id": self.dispersion_model_id,
            "error": self.error,
        }


def _num(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def dispersion_id(cfg: CFSConfig) -> str:
    p = cfg.plant
    if isinstance(p, LangevinDOPOParams):
        return "langevin:none"
    sp = p.single_pass
    tag = sp.dispersion.model_id
    return tag + (";flat-gain" if sp.flat_gain else "")


def loop_gain_bound(cfg: CFSConfig) -> float:
    """Upper bound on the loop-gain norm over all frequencies and mismatches."""
    p = cfg.plant
    if isinstance(p, LangevinDOPOParams):
        return cfg.loop_scale * _langevin_gmax(p)
    return cfg.loop_scale * cavity_peak_gain(p)


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        out = {"__type__": type(obj).__name__}
        for f in dataclasses.fields(obj):
            if not f.name.startswith("_"):
                out[f.name] = _plain(getattr(obj, f.name))
        return out
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, float):
        return repr(obj)
    return obj


def fingerprint(*objs) -> str:
    text = json.dumps([_plain(o) for o in objs], sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class _CellSearch:
    def __init__(self, cfg, search, opts, locus=None):
        self.cfg = cfg
        self.search = search
        self.opts = opts
        self.locus = locus
        self.count = 0
        self.marginal = False
        self.uncertified = False

    def stable(self, delta):
        if self.locus is None:
            self.locus = make_locus(self.cfg, self.opts)
        self.count += 1
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", MarginalCase)
            v = self.locus.verdict(self.cfg.loop_scale, delta)
        if caught or v.marginal:
            self.marginal = True
        if not v.certified:
            self.uncertified = True
        return v.stable

    def edge(self, side):
        """Last stable offset on one side and whether the window limited it."""
        s = self.search
        n = int(math.floor(s.scan_halfwidth / s.coarse_step + 1e-9))
        good = 0.0
        for i in range(1, n + 1):
            d = side * i * s.coarse_step
            if self.stable(d):
                good = d
                continue
            return self._bisect(good, d), False
        return side * n * s.coarse_step, True

    def _bisect(self, good, bad):
        s = self.search
        for _ in range(s.max_bisections):
            if abs(bad - good) <= s.bisect_tol:
                return good
            mid = 0.5 * (good + bad)
            if self.stable(mid):
                good = mid
            else:
                bad = mid
        raise BudgetExceeded("boundary bisection did not converge")

    def islands(self, lo, hi):
        s = self.search
        n = int(math.floor(s.scan_halfwidth / s.coarse_step + 1e-9))
        found = []
        for i in range(-n, n + 1):
            d = i * s.coarse_step
            if (d < lo or d > hi) and self.stable(d):
                found.append(d)
        return tuple(found)


def allowable_mismatch(cfg: CFSConfig, R_f: float, xi: float, search: SearchOptions,
                       opts: NyquistOptions | None = None, locus=None) -> FeasibilityCell:
    """Classify one (R_f, xi) point by its stable length-mismatch interval."""
    opts = opts or NyquistOptions()
    c = cfg.with_(R_f=R_f, xi=xi, delta_l_f=0.0)
    did = dispersion_id(c)
    if isinstance(c.plant, CavityDOPOParams) and not dopo_internal_stability(c.plant):
        from .errors import InternallyUnstablePlant
        raise InternallyUnstablePlant(f"DOPO above threshold at xi={xi}")
    hw = search.scan_halfwidth
    if R_f == 0 or loop_gain_bound(c) < 1.0:
        cert = "zero-loop" if R_f == 0 else "small-gain"
        return FeasibilityCell(R_f, xi, STABLE, -hw, hw, hw, did, cert)
    cs = _CellSearch(c, search, opts, locus)
    if not cs.stable(0.0):
        flags = ("marginal",) if cs.marginal else ()
        return FeasibilityCell(R_f, xi, UNSTABLE, math.nan, math.nan, 0.0, did, "nyquist@0",
                               flags, n_verdicts=cs.count)
    plus, plus_open = cs.edge(+1)
    minus, minus_open = cs.edge(-1)
    flags = []
    if cs.marginal:
        flags.append("marginal")
    if cs.uncertified:
        flags.append("uncertified-tail")
    islands = cs.islands(minus, plus) if search.record_islands else ()
    if islands:
        flags.append(f"islands={len(islands)}")
    if plus_open and minus_open:
        return FeasibilityCell(R_f, xi, STABLE, minus, plus, (plus - minus) / 2, did, "window",
                               tuple(flags), islands, n_verdicts=cs.count)
    if plus_open:
        flags.append("window-limited-plus")
    if minus_open:
        flags.append("window-limited-minus")
    return FeasibilityCell(R_f, xi, CONDITIONAL, minus, plus, (plus - minus) / 2, did, "nyquist",
                           tuple(flags), islands, n_verdicts=cs.count)


@dataclass(frozen=True)
class FeasibilityMap:
    rf_grid: tuple
    xi_grid: tuple
    cells: tuple
    family: str
    provenance: dict = field(default_factory=dict)

    def cell(self, R_f, xi) -> FeasibilityCell:
        for c in self.cells:
            if c.R_f == R_f and c.xi == xi:
                return c
        raise KeyError((R_f, xi))

    def allowable_matrix(self):
        """Allowable mismatch as an array indexed [xi, R_f]."""
        a = np.full((len(self.xi_grid), len(self.rf_grid)), np.nan)
        for c in self.cells:
            a[self.xi_grid.index(c.xi), self.rf_grid.index(c.R_f)] = c.allowable
        return a

    def status_matrix(self):
        out = [["" for _ in self.rf_grid] for _ in self.xi_grid]
        for c in self.cells:
            out[self.xi_grid.index(c.xi)][self.rf_grid.index(c.R_f)] = c.status
        return out

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        if header:
            for k, v in self.provenance.items():
                buf.write(f"# {k}: {json.dumps(v, sort_keys=True)}\n")
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for c in self.cells:
            w.writerow(c.as_row())
        return buf.getvalue()

    def summary(self) -> dict:
        counts = {}
        for c in self.cells:
            counts[c.status] = counts.get(c.status, 0) + 1
        return {
            "family": self.family,
            "rf_grid": list(self.rf_grid),
            "xi_grid": list(self.xi_grid),
            "status_counts": counts,
            "provenance": self.provenance,
            "columns": list(CSV_COLUMNS),
            "units": {"delta_minus": "m", "delta_plus": "m", "allowable": "m"},
            "cells": [dict(c.as_row(), islands=list(c.islands), n_verdicts=c.n_verdicts)
                      for c in self.cells],
        }


def family_of(cfg: CFSConfig) -> str:
    p = cfg.plant
    if isinstance(p, CavityDOPOParams) and not p.single_pass.dispersion.is_constant:
        return "Waveguide"
    return "FreeSpace"


def _row_task(args):
    base, rf_grid, xi, search, opts = args
    cells = []
    locus = None
    row_cfg = base.with_(xi=xi, delta_l_f=0.0)
    for rf in rf_grid:
        try:
            c = row_cfg.with_(R_f=rf)
            if locus is None and rf > 0 and loop_gain_bound(c) >= 1.0:
                k_max = math.sqrt(max(rf_grid) * (1 - c.L_f))
                locus = make_locus(c, opts, k_max=k_max)
            use = locus if (locus is not None and rf > 0) else None
            if use is not None:
                use.cfg = c
            cells.append(allowable_mismatch(base, rf, xi, search, opts, locus=use))
        except CFSError as exc:
            cells.append(FeasibilityCell(rf, xi, ERROR, math.nan, math.nan, math.nan,
                                         _safe_id(base), error=f"{type(exc).__name__}: {exc}"))
    return cells


def _safe_id(cfg):
    try:
        return dispersion_id(cfg)
    except Exception:  # noqa: BLE001
        return "unknown"


def sweep_map(base_cfg: CFSConfig, rf_grid, xi_grid, search: SearchOptions,
              opts: NyquistOptions | None = None, workers: int = 1) -> FeasibilityMap:
    """Feasibility cells on the (R_f, xi) grid; rows of constant xi share a cache."""
    opts = opts or NyquistOptions()
    rf_grid = tuple(float(r) for r in rf_grid)
    xi_grid = tuple(float(x) for x in xi_grid)
    if not rf_grid or not xi_grid:
        raise ValueError("grids must be non-empty")
    tasks = [(base_cfg, tuple(sorted(rf_grid)), xi, search, opts) for xi in xi_grid]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row_task, tasks))
    else:
        rows = [_row_task(t) for t in tasks]
    by_key = {(c.xi, c.R_f): c for row in rows for c in row}
    cells = tuple(by_key[(x, r)] for x in xi_grid for r in rf_grid)
    prov = {
        "config_hash": fingerprint(base_cfg),
        "search": dataclasses.asdict(search),
        "nyquist": opts.as_dict(),
        "dispersion_model_id": _safe_id(base_cfg),
        "version": __version__,
        "kernels": kernels.BACKEND,
    }
    return FeasibilityMap(rf_grid, xi_grid, cells, family_of(base_cfg), prov)
