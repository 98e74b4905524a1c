"""YAML run configuration.

Boundary units are Hz, mm and percent; everything returned by the builders is
in rad/s, m and fractions.  Unknown keys are rejected before any computation.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dispersion import (
    BULK_LN,
    ConstantIndex,
    Tabulated,
    TwoMaterial,
    load_model,
    single_pass_gain_constant,
)
from .errors import CFSError, ConfigError, InternallyUnstablePlant
from .feasibility import SearchOptions, fingerprint
from .network import CFSConfig, ControllerBS, PropagationSegment, propagation_loss
from .plants import ButterworthBPF, CavityDOPOParams, LangevinDOPOParams, SinglePassParams
from .stability import NyquistOptions

C_LIGHT = 299792458.0
TWO_PI = 2 * math.pi

# key -> (type check, default); None default means required
SCHEMA = {
    "family": (str, None),
    "plant": {
        "model": (str, "cavity"),
        "T_o_percent": ((int, float), None),
        "L_o_percent": ((int, float), "optional"),
        "loss_db_per_cm": ((int, float), "optional"),
        "l_o_mm": ((int, float), None),
        "l_c_mm": ((int, float), "optional"),
        "xi": ((int, float), None),
        "flat_gain": (bool, False),
        "normalization": (str, "photon_flux"),
    },
    "feedback": {
        "R_f": ((int, float), 0.0),
        "L_f_percent": ((int, float), "optional"),
        "loss_db_per_cm": ((int, float), "optional"),
        "l_f_mm": ((int, float), "optional"),
        "delta_l_f_mm": ((int, float), 0.0),
        "split": ((int, float), 0.5),
        "medium": (str, "vacuum"),
    },
    "bpf": {
        "hwhm_hz": ((int, float), None),
        "convention": (str, "causal"),
        "in_spectrum": (bool, False),
    },
    "dispersion": {
        "model": (str, "constant"),
        "n": ((int, float), 1.0),
        "name": (str, BULK_LN),
        "temperature_c": ((int, float), 25.0),
        "table": (list, "optional"),
        "rule": (str, "cubic"),
        "core": (str, BULK_LN),
        "cladding": (str, "sio2_malitson1965"),
        "confinement": ((int, float), 0.9),
        "slope_per_um": ((int, float), 0.0),
    },
    "carrier_wavelength_nm": ((int, float), 1550.0),
    "grids": {
        "rf": (list, "optional"),
        "xi": (list, "optional"),
        "freq_hz": {
            "start": ((int, float), 0.0),
            "stop": ((int, float), None),
            "num": (int, 2001),
        },
        "bode_freq_hz": {
            "start": ((int, float), 0.0),
            "stop": ((int, float), None),
            "num": (int, 4001),
        },
    },
    "sensitivity": {
        "delta_g_rel": ((int, float), 1.0),
    },
    "search": {
        "scan_halfwidth_mm": ((int, float), "optional"),
        "coarse_step_mm": ((int, float), "optional"),
        "bisect_tol_mm": ((int, float), "optional"),
        "record_islands": (bool, False),
    },
    "nyquist": {
        "points_per_fsr": (int, 64),
        "max_db_step": ((int, float), 6.0),
        "budget": (int, 2 ** 24),
        "tail_margin": ((int, float), 0.02),
        "omega_cap_hz": ((int, float), 60e12),
        "omega_max_hz": ((int, float), "optional"),
    },
    "output": {
        "dir": (str, "."),
        "format": (str, "csv"),
    },
    "workers": (int, 1),
}

FAMILIES = ("FreeSpace", "Waveguide")
REQUIRED_SECTIONS = ("plant", "feedback")
DEFAULTED_SECTIONS = ("output",)


def _check(doc, schema, path):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    for key in doc:
        if key not in schema:
            raise ConfigError(f"unknown key {path + key!r}")
    out = {}
    for key, spec in schema.items():
        if isinstance(spec, dict):
            if key in doc and doc[key] is not None:
                out[key] = _check(doc[key], spec, f"{path}{key}.")
            elif not path and key in REQUIRED_SECTIONS:
                raise ConfigError(f"missing required section {key!r}")
            elif not path and key in DEFAULTED_SECTIONS:
                out[key] = _check({}, spec, f"{key}.")
            continue
        typ, default = spec
        if key not in doc:
            if default is None:
                raise ConfigError(f"missing required key {path + key!r}")
            if default != "optional":
                out[key] = default
            continue
        val = doc[key]
        if typ is not bool and isinstance(val, bool) or not isinstance(val, typ):
            raise ConfigError(f"{path + key}: bad type {type(val).__name__}")
        out[key] = val
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration document.  ``data`` keeps boundary units."""

    data: dict

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        data = _check(copy.deepcopy(doc), SCHEMA, "")
        rc = cls(data)
        rc.validate()
        return rc

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"YAML parse error: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            bundled = resources.files("cfsqueezer").joinpath("configs", f"{path}.yaml")
            if bundled.is_file():
                return cls.from_yaml(bundled.read_text())
            raise ConfigError(f"config file {path} not found")
        return cls.from_yaml(p.read_text())

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)

    @property
    def config_hash(self) -> str:
        return fingerprint(self.data)

    def validate(self):
        d = self.data
        if d["family"] not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        pl = d["plant"]
        if pl["model"] not in ("cavity", "langevin"):
            raise ConfigError("plant.model must be cavity or langevin")
        if ("L_o_percent" in pl) == ("loss_db_per_cm" in pl):
            raise ConfigError("give exactly one of plant.L_o_percent, plant.loss_db_per_cm")
        fb = d["feedback"]
        if ("L_f_percent" in fb) == ("loss_db_per_cm" in fb):
            raise ConfigError("give exactly one of feedback.L_f_percent, feedback.loss_db_per_cm")
        if fb["medium"] not in ("vacuum", "device"):
            raise ConfigError("feedback.medium must be vacuum or device")
        if not 0 <= fb["split"] <= 1:
            raise ConfigError("feedback.split must lie in [0, 1]")
        if d["output"]["format"] not in ("csv", "json"):
            raise ConfigError("output.format must be csv or json")
        if d["workers"] < 1:
            raise ConfigError("workers must be positive")
        if pl["model"] == "cavity" and "l_c_mm" not in pl:
            raise ConfigError("plant.l_c_mm is required for the cavity model")
        if "dispersion" in d and d["dispersion"]["model"] not in (
                "constant", "sellmeier", "tabulated", "two_material"):
            raise ConfigError("dispersion.model must be constant, sellmeier, tabulated or two_material")
        for key in ("rf", "xi"):
            vals = d.get("grids", {}).get(key)
            if vals is not None and (not vals or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals)):
                raise ConfigError(f"grids.{key} must be a non-empty list of numbers")
        xis = [pl["xi"], *d.get("grids", {}).get("xi", [])]
        if any(x < 0 for x in xis):
            raise ConfigError("pump amplitude xi must be non-negative")
        bad = [x for x in xis if x >= 1]
        if bad:
            raise InternallyUnstablePlant(f"pump amplitude xi={bad[0]} is at or above threshold")
        try:
            self.build()
            self.nyquist_options()
        except (ConfigError, InternallyUnstablePlant):
            raise
        except CFSError as exc:
            raise ConfigError(str(exc)) from None
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None

    # builders

    @property
    def omega_c(self) -> float:
        return TWO_PI * C_LIGHT / (self.data["carrier_wavelength_nm"] * 1e-9)

    def dispersion_model(self):
        d = self.data.get("dispersion", {"model": "constant", "n": 1.0})
        m = d["model"]
        if m == "constant":
            return ConstantIndex(float(d.get("n", 1.0)))
        if m == "sellmeier":
            return load_model(d["name"], d.get("temperature_c", 25.0))
        if m == "tabulated":
            tab = d.get("table")
            if not tab:
                raise ConfigError("dispersion.table is required for the tabulated model")
            arr = np.asarray(tab, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ConfigError("dispersion.table rows must be [wavelength_nm, index]")
            return Tabulated(tuple(arr[:, 0] * 1e-9), tuple(arr[:, 1]), d["rule"], "config")
        core = load_model(d["core"], d.get("temperature_c", 25.0))
        clad = load_model(d["cladding"], d.get("temperature_c", 25.0))
        return TwoMaterial(core, clad, d["confinement"], d["slope_per_um"] * 1e6,
                           self.data["carrier_wavelength_nm"] * 1e-9)

    def _losses(self):
        pl, fb = self.data["plant"], self.data["feedback"]
        l_o = pl["l_o_mm"] * 1e-3
        l_f = fb.get("l_f_mm", pl["l_o_mm"]) * 1e-3
        L_o = pl["L_o_percent"] / 100 if "L_o_percent" in pl else propagation_loss(pl["loss_db_per_cm"], l_o)
        L_f = fb["L_f_percent"] / 100 if "L_f_percent" in fb else propagation_loss(fb["loss_db_per_cm"], l_f)
        return l_o, l_f, L_o, L_f

    def plant(self, xi=None):
        pl = self.data["plant"]
        xi = pl["xi"] if xi is None else xi
        l_o, _, L_o, _ = self._losses()
        T_o = pl["T_o_percent"] / 100
        if pl["model"] == "langevin":
            return LangevinDOPOParams(T_o, L_o, l_o, xi)
        return CavityDOPOParams.calibrated(
            1 - T_o, L_o, l_o, pl["l_c_mm"] * 1e-3, xi,
            dispersion=self.dispersion_model(),
            omega_c=self.omega_c,
            flat_gain=pl["flat_gain"],
            normalization=pl["normalization"],
        )

    def langevin_plant(self, xi=None):
        pl = self.data["plant"]
        l_o, _, L_o, _ = self._losses()
        return LangevinDOPOParams(pl["T_o_percent"] / 100, L_o, l_o, pl["xi"] if xi is None else xi)

    def build(self, plant=None, with_bpf=True) -> CFSConfig:
        """CFSConfig for the configured plant (or the one passed in)."""
        fb = self.data["feedback"]
        _, l_f, _, L_f = self._losses()
        medium = self.dispersion_model() if fb["medium"] == "device" else ConstantIndex(1.0)
        split = fb["split"]
        seg_t = math.sqrt(1 - L_f)
        seg1 = PropagationSegment(1 - seg_t, l_f * split, medium)
        seg2 = PropagationSegment(1 - seg_t, l_f * (1 - split), medium)
        bpf = None
        if with_bpf and "bpf" in self.data:
            b = self.data["bpf"]
            bpf = ButterworthBPF(TWO_PI * b["hwhm_hz"], b["convention"])
        return CFSConfig(plant if plant is not None else self.plant(), ControllerBS(fb["R_f"]),
                         seg1, seg2, bpf, fb["delta_l_f_mm"] * 1e-3, self.omega_c)

    def spectrum_config(self, R_f=None) -> CFSConfig:
        bpf_in = self.data.get("bpf", {}).get("in_spectrum", False)
        cfg = self.build(self.langevin_plant(), with_bpf=bpf_in)
        return cfg if R_f is None else cfg.with_(R_f=R_f)

    def single_pass(self, xi=None) -> SinglePassParams:
        p = self.plant(xi)
        if not isinstance(p, CavityDOPOParams):
            raise ConfigError("single-pass gain needs the cavity plant model")
        return p.single_pass

    def gain_constant(self) -> float:
        _, _, L_o, _ = self._losses()
        return single_pass_gain_constant(1 - self.data["plant"]["T_o_percent"] / 100, L_o)

    def rf_grid(self):
        g = self.data.get("grids", {}).get("rf")
        return [float(v) for v in g] if g else [float(self.data["feedback"]["R_f"])]

    def xi_grid(self):
        g = self.data.get("grids", {}).get("xi")
        return [float(v) for v in g] if g else [float(self.data["plant"]["xi"])]

    def freq_grid_hz(self, default_stop=None, key="freq_hz"):
        f = self.data.get("grids", {}).get(key)
        if f is None:
            if default_stop is None:
                raise ConfigError(f"grids.{key} is required for this command")
            return np.linspace(0.0, default_stop, 2001)
        if f["num"] < 2 or not f["stop"] > f["start"]:
            raise ConfigError(f"grids.{key} needs stop > start and num >= 2")
        return np.linspace(f["start"], f["stop"], f["num"])

    @property
    def delta_g_rel(self) -> float:
        return float(self.data.get("sensitivity", {}).get("delta_g_rel", 1.0))

    def search_options(self) -> SearchOptions:
        base = SearchOptions.waveguide() if self.data["family"] == "Waveguide" else SearchOptions.free_space()
        s = self.data.get("search", {})
        return SearchOptions(
            s.get("scan_halfwidth_mm", base.scan_halfwidth * 1e3) * 1e-3,
            s.get("coarse_step_mm", base.coarse_step * 1e3) * 1e-3,
            s.get("bisect_tol_mm", base.bisect_tol * 1e3) * 1e-3,
            s.get("record_islands", False),
        )

    def nyquist_options(self) -> NyquistOptions:
        n = self.data.get("nyquist", {})
        om = n.get("omega_max_hz")
        return NyquistOptions(
            points_per_fsr=n.get("points_per_fsr", 64),
            max_db_step=float(n.get("max_db_step", 6.0)),
            budget=n.get("budget", 2 ** 24),
            tail_margin=float(n.get("tail_margin", 0.02)),
            omega_cap=TWO_PI * float(n.get("omega_cap_hz", 60e12)),
            omega_max=None if om is None else TWO_PI * float(om),
        )


def bundled_configs():
    root = resources.files("cfsqueezer").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))
