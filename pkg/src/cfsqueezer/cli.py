"""Command-line entry point: ``cfs <command> --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 numerical budget exceeded
(including sweeps with failed cells), 4 plant above threshold.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import RunConfig
from .errors import (
    AsymmetricConfiguration,
    BudgetExceeded,
    ConfigError,
    DispersionRangeExceeded,
    DomainError,
    InternallyUnstablePlant,
    MarginallyUnstableEvaluation,
    RefinementBudgetExceeded,
    RefinementRequired,
    UnsupportedConfiguration,
)
from .feasibility import ERROR, sweep_map
from .network import vacuum_output_spectrum
from .plants import CavityDOPOParams, gain_spectrum_db, langevin_dopo_response
from .stability import bode_trace, nyquist_trace, nyquist_verdict, sensitivity_bound

log = logging.getLogger("cfsqueezer")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_PLANT = 0, 2, 3, 4
TWO_PI = 2 * math.pi

COMMANDS = ("spectrum", "bode", "nyquist", "feasibility", "gainspec", "sensitivity")


class Emitter:
    """Writes provenance-stamped CSV or JSON files into one directory."""

    def __init__(self, rc: RunConfig, out_dir: Path, fmt: str, command: str):
        self.rc = rc
        self.dir = out_dir
        self.fmt = fmt
        self.provenance = {
            "command": command,
            "config_hash": rc.config_hash,
            "version": __version__,
            "kernels": kernels.BACKEND,
            "nyquist": {k: v for k, v in rc.nyquist_options().as_dict().items()},
        }
        self.written: list[Path] = []

    def table(self, stem: str, columns, rows, extra=None):
        self.dir.mkdir(parents=True, exist_ok=True)
        prov = dict(self.provenance, **(extra or {}))
        if self.fmt == "json":
            path = self.dir / f"{stem}.json"
            doc = {"provenance": prov, "columns": list(columns),
                   "rows": [[_jsonable(v) for v in r] for r in rows]}
            path.write_text(json.dumps(doc, indent=1))
        else:
            path = self.dir / f"{stem}.csv"
            with path.open("w", newline="") as fh:
                for k, v in prov.items():
                    fh.write(f"# {k}: {json.dumps(v, sort_keys=True, default=str)}\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(columns)
                for r in rows:
                    w.writerow([_fmt(v) for v in r])
        self.written.append(path)
        return path

    def document(self, stem: str, doc: dict):
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / f"{stem}.json"
        path.write_text(json.dumps({"provenance": self.provenance, **doc}, indent=1, default=_jsonable))
        self.written.append(path)
        return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _db10(s):
    with np.errstate(divide="ignore"):
        return 10 * np.log10(s)


def run_spectrum(rc: RunConfig, em: Emitter) -> int:
    if rc.data["family"] != "FreeSpace":
        raise UnsupportedConfiguration("output spectra are only defined for the free-space Langevin model")
    f = rc.freq_grid_hz()
    w = TWO_PI * f
    for rf in rc.rf_grid():
        cfg = rc.spectrum_config(rf)
        sx = _db10(vacuum_output_spectrum(cfg, w, "x"))
        sp = _db10(vacuum_output_spectrum(cfg, w, "p"))
        rows = zip(f.tolist(), sx.tolist(), sp.tolist())
        em.table(f"spectrum_Rf{rf:g}", ("freq_hz", "S_x_db", "S_p_db"), rows, {"R_f": rf})
    return EXIT_OK


def _default_bode_stop(rc):
    return 4 * 299792458.0 / (rc.data["plant"]["l_o_mm"] * 1e-3)


def run_bode(rc: RunConfig, em: Emitter) -> int:
    f = rc.freq_grid_hz(_default_bode_stop(rc), key="bode_freq_hz")
    cfg = rc.build()
    rows = [(r[0] / TWO_PI,) + r[1:] for r in bode_trace(cfg, TWO_PI * f, components=True)]
    em.table("bode", ("freq_hz", "loop_gain_db", "phase_deg", "path_phase_deg", "plant_phase_deg"),
             rows, {"R_f": cfg.R_f, "xi": cfg.xi, "delta_l_f_m": cfg.delta_l_f})
    return EXIT_OK


def run_nyquist(rc: RunConfig, em: Emitter) -> int:
    cfg = rc.build()
    opts = rc.nyquist_options()
    verdict = nyquist_verdict(cfg, opts)
    extra = {"R_f": cfg.R_f, "xi": cfg.xi, "delta_l_f_m": cfg.delta_l_f}
    if cfg.R_f > 0:
        tr = nyquist_trace(cfg, opts)
        rows = zip((tr.omega / TWO_PI).tolist(), tr.values.real.tolist(), tr.values.imag.tolist())
        em.table("nyquist_trace", ("freq_hz", "re", "im"), rows,
                 dict(extra, critical_point=str(tr.metadata["critical_point"])))
    em.document("nyquist_verdict", dict(extra, verdict=verdict.as_dict()))
    print(f"stable={verdict.stable} winding={verdict.winding} "
          f"min_distance={verdict.min_distance_to_critical:.4g}")
    return EXIT_OK


def run_feasibility(rc: RunConfig, em: Emitter, workers: int) -> int:
    cfg = rc.build()
    fmap = sweep_map(cfg, rc.rf_grid(), rc.xi_grid(), rc.search_options(), rc.nyquist_options(), workers)
    em.dir.mkdir(parents=True, exist_ok=True)
    summary = fmap.summary()
    model_prov = dict(summary["provenance"])
    model_prov["model_hash"] = model_prov.pop("config_hash")
    summary["provenance"] = dict(em.provenance, **model_prov)
    if em.fmt == "csv":
        path = em.dir / "feasibility.csv"
        head = "".join(f"# {k}: {json.dumps(v, sort_keys=True, default=str)}\n"
                       for k, v in summary["provenance"].items())
        path.write_text(head + fmap.to_csv(header=False))
        em.written.append(path)
    path = em.dir / "feasibility_summary.json"
    path.write_text(json.dumps(summary, indent=1, default=_jsonable))
    em.written.append(path)
    failed = [c for c in fmap.cells if c.status == ERROR]
    for c in failed:
        log.error("cell R_f=%g xi=%g failed: %s", c.R_f, c.xi, c.error)
    return EXIT_BUDGET if failed else EXIT_OK


def run_gainspec(rc: RunConfig, em: Emitter) -> int:
    p = rc.plant()
    if not isinstance(p, CavityDOPOParams):
        raise ConfigError("gain spectra need plant.model: cavity")
    f = rc.freq_grid_hz()
    sp_db, dopo_db = gain_spectrum_db(p, TWO_PI * f)
    rows = zip(f.tolist(), np.asarray(sp_db).tolist(), np.asarray(dopo_db).tolist())
    em.table("gainspec", ("freq_hz", "single_pass_db", "dopo_db"), rows,
             {"xi": p.xi, "dispersion_model_id": p.single_pass.dispersion.model_id})
    return EXIT_OK


def run_sensitivity(rc: RunConfig, em: Emitter) -> int:
    plant = rc.langevin_plant()
    G = float(abs(langevin_dopo_response(plant, 0.0, "x")[0]))
    dg = rc.delta_g_rel
    rows = []
    for rf in rc.rf_grid():
        tight, loose = sensitivity_bound(G, rf, dg)
        rows.append((rf, G, tight, loose))
    em.table("sensitivity", ("R_f", "G", "tight", "loose"), rows, {"delta_g_rel": dg})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfs", description="Coherent-feedback squeezer analysis.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="YAML file, or the name of a bundled config")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--format", choices=("csv", "json"), help="overrides output.format")
        sp.add_argument("--workers", type=int, help="worker processes for sweeps")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        rc = RunConfig.load(args.config)
        out = Path(args.out or rc.data["output"]["dir"])
        fmt = args.format or rc.data["output"]["format"]
        workers = args.workers if args.workers is not None else rc.data["workers"]
        if workers < 1:
            raise ConfigError("--workers must be positive")
        em = Emitter(rc, out, fmt, args.command)
        if args.command == "feasibility":
            code = run_feasibility(rc, em, workers)
        else:
            code = globals()[f"run_{args.command}"](rc, em)
        for p in em.written:
            log.info("wrote %s", p)
        return code
    except InternallyUnstablePlant as exc:
        print(f"error: plant above threshold: {exc}", file=sys.stderr)
        return EXIT_PLANT
    except (ConfigError, UnsupportedConfiguration, AsymmetricConfiguration,
            DispersionRangeExceeded, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceeded, RefinementBudgetExceeded, RefinementRequired,
            MarginallyUnstableEvaluation) as exc:
        print(f"error: numerical budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
