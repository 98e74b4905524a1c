"""Refractive-index models and phase-matching quantities.

All frequencies are angular (rad/s).  ``omega_abs`` is an absolute optical
frequency; ``omega`` is an offset from the carrier ``omega_c``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.interpolate import CubicSpline

from .errors import DispersionRangeExceeded, DomainError

DATA_FILE = "dispersion_models.json"


def wavelength_to_omega(lam):
    return 2 * math.pi * C_LIGHT / np.asarray(lam, dtype=float)


def omega_to_wavelength(omega_abs):
    return 2 * math.pi * C_LIGHT / np.asarray(omega_abs, dtype=float)


class DispersionModel:
    """Base class: subclasses implement ``_index(lam_m)`` on in-range wavelengths."""

    lam_min: float = 0.0
    lam_max: float = math.inf

    @property
    def model_id(self) -> str:
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return False

    def index(self, omega_abs):
        w = np.asarray(omega_abs, dtype=float)
        if np.any(w <= 0):
            raise DispersionRangeExceeded("absolute optical frequency must be positive")
        lam = 2 * math.pi * C_LIGHT / w
        lo, hi = np.min(lam), np.max(lam)
        if lo < self.lam_min * (1 - 1e-12) or hi > self.lam_max * (1 + 1e-12):
            raise DispersionRangeExceeded(
                f"{self.model_id}: wavelength range [{lo * 1e6:.4g}, {hi * 1e6:.4g}] um "
                f"outside validity [{self.lam_min * 1e6:.4g}, {self.lam_max * 1e6:.4g}] um"
            )
        n = self._index(lam)
        return float(n) if np.ndim(n) == 0 else n

    def _index(self, lam):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantIndex(DispersionModel):
    n: float = 1.0

    def __post_init__(self):
        if not self.n > 0:
            raise DomainError("index must be positive")

    @property
    def model_id(self):
        return f"constant:{self.n:g}"

    @property
    def is_constant(self):
        return True

    def _index(self, lam):
        return np.full(np.shape(lam), self.n) if np.ndim(lam) else self.n


@dataclass(frozen=True)
class SellmeierSet(DispersionModel):
    """Named coefficient set loaded from the bundled data file.

    ``temperature_c`` only matters for temperature-dependent forms; for the
    others the set is used at the temperature it was measured at.
    """

    name: str
    form: str
    coefficients: tuple
    lam_min: float
    lam_max: float
    temperature_c: float = 25.0
    citation: str = ""

    @property
    def model_id(self):
        if self.form == "gayer":
            return f"sellmeier:{self.name}@{self.temperature_c:g}C"
        return f"sellmeier:{self.name}"

    def _index(self, lam):
        x2 = (np.asarray(lam) * 1e6) ** 2
        if self.form == "sellmeier":
            B, Cs = self.coefficients
            n2 = 1.0 + sum(b * x2 / (x2 - cc) for b, cc in zip(B, Cs))
        elif self.form == "gayer":
            (a1, a2, a3, a4, a5, a6), (b1, b2, b3, b4) = self.coefficients
            T = self.temperature_c
            f = (T - 24.5) * (T + 570.82)
            n2 = (a1 + b1 * f) + (a2 + b2 * f) / (x2 - (a3 + b3 * f) ** 2) \
                + (a4 + b4 * f) / (x2 - a5 ** 2) - a6 * x2
        else:
            raise ValueError(f"unknown Sellmeier form {self.form!r}")
        return np.sqrt(n2)


@dataclass(frozen=True)
class Tabulated(DispersionModel):
    """User-supplied n(lambda) table, wavelengths in metres, strictly increasing."""

    wavelengths: tuple
    indices: tuple
    rule: str = "cubic"
    label: str = "table"
    _interp: object = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        lam = np.asarray(self.wavelengths, dtype=float)
        n = np.asarray(self.indices, dtype=float)
        if lam.ndim != 1 or lam.shape != n.shape or lam.size < 2:
            raise DomainError("table needs at least two (wavelength, index) pairs")
        if not np.all(np.diff(lam) > 0):
            raise DomainError("tabulated wavelengths must be strictly increasing")
        if self.rule not in ("linear", "cubic"):
            raise DomainError(f"unknown interpolation rule {self.rule!r}")
        object.__setattr__(self, "wavelengths", tuple(lam))
        object.__setattr__(self, "indices", tuple(n))
        object.__setattr__(self, "lam_min", float(lam[0]))
        object.__setattr__(self, "lam_max", float(lam[-1]))
        if self.rule == "cubic" and lam.size >= 4:
            object.__setattr__(self, "_interp", CubicSpline(lam, n))

    @property
    def model_id(self):
        return f"tabulated:{self.label}:{self.rule}:{len(self.wavelengths)}"

    def _index(self, lam):
        if self._interp is not None:
            return self._interp(lam)
        return np.interp(lam, self.wavelengths, self.indices)


@dataclass(frozen=True)
class TwoMaterial(DispersionModel):
    """Crude effective index: confinement-weighted mix of core and cladding.

    n_eff = G n_core + (1 - G) n_clad with G = confinement + slope (lam - lam_ref).
    No mode solving is done; the weighting is an input.
    """

    core: DispersionModel
    cladding: DispersionModel
    confinement: float = 0.9
    slope_per_m: float = 0.0
    lam_ref: float = 1.55e-6

    def __post_init__(self):
        if not 0.0 < self.confinement <= 1.0:
            raise DomainError("confinement factor must lie in (0, 1]")
        object.__setattr__(self, "lam_min", max(self.core.lam_min, self.cladding.lam_min))
        object.__setattr__(self, "lam_max", min(self.core.lam_max, self.cladding.lam_max))

    @property
    def model_id(self):
        return (f"two-material:{self.core.model_id}|{self.cladding.model_id}"
                f"|G={self.confinement:g}|dG={self.slope_per_m:g}/m")

    def _index(self, lam):
        g = np.clip(self.confinement + self.slope_per_m * (np.asarray(lam) - self.lam_ref), 0.0, 1.0)
        return g * self.core._index(lam) + (1 - g) * self.cladding._index(lam)


@lru_cache(maxsize=1)
def _catalog():
    text = resources.files("cfsqueezer").joinpath("data", DATA_FILE).read_text()
    doc = json.loads(text)
    return doc["version"], {m["name"]: m for m in doc["models"]}


def available_models():
    return sorted(_catalog()[1])


def load_model(name: str, temperature_c: float = 25.0) -> SellmeierSet:
    """Return a named Sellmeier set from the bundled data file."""
    try:
        entry = _catalog()[1][name]
    except KeyError:
        raise KeyError(f"unknown dispersion model {name!r}; have {available_models()}") from None
    lo, hi = entry["validity_um"]
    if entry["type"] == "sellmeier":
        coeffs = (tuple(entry["B"]), tuple(entry["C"]))
        temp = float(entry.get("temperature_c", temperature_c))
    elif entry["type"] == "gayer":
        coeffs = (tuple(entry["a"]), tuple(entry["b"]))
        tlo, thi = entry["temperature_range_c"]
        if not tlo <= temperature_c <= thi:
            raise DomainError(f"{name}: temperature {temperature_c} C outside [{tlo}, {thi}]")
        temp = float(temperature_c)
    else:
        raise ValueError(f"unknown model type {entry['type']!r}")
    return SellmeierSet(name, entry["type"], coeffs, lo * 1e-6, hi * 1e-6, temp, entry["citation"])


BULK_LN = "mgo_ln_e_zelmon1997"


def refractive_index(m: DispersionModel, omega_abs):
    return m.index(omega_abs)


def wavevector_mismatch(m: DispersionModel, omega_c: float, omega):
    """Delta k = [2 w_c n(w_c) - (w_c + w) n(w_c + w) - (w_c - w) n(w_c - w)] / c.

    Zero at w = 0 by construction and even in w.
    """
    w = np.asarray(omega, dtype=float)
    if m.is_constant:
        out = np.zeros_like(w)
        return float(out) if out.ndim == 0 else out
    n0 = m.index(omega_c)
    up = (omega_c + w) * m.index(omega_c + w)
    dn = (omega_c - w) * m.index(omega_c - w)
    dk = (2 * omega_c * n0 - up - dn) / C_LIGHT
    return float(dk) if np.ndim(dk) == 0 else dk


def single_pass_gain_constant(R_o: float, L_o: float) -> float:
    """C = ln(1/sqrt(R_o (1 - L_o))), the single-pass gain at threshold."""
    r = R_o * (1 - L_o)
    if not 0 < r < 1:
        raise DomainError(f"need 0 < R_o (1 - L_o) < 1, got {r}")
    return -0.5 * math.log(r)


def coupling_kappa(m: DispersionModel, omega_c: float, omega, C: float, xi: float):
    w = np.asarray(omega, dtype=float)
    ratio = m.index(omega_c) / m.index(omega_c + w)
    k = (omega_c + w) / omega_c * ratio * C * xi
    return float(k) if np.ndim(k) == 0 else k


def parametric_g(kappa_plus, kappa_minus, delta_k, l_c):
    """Principal square root of kappa_+ kappa_- - (delta_k l_c / 2)^2."""
    rad = np.asarray(kappa_plus) * np.asarray(kappa_minus) - (np.asarray(delta_k) * l_c / 2) ** 2
    g = np.sqrt(np.asarray(rad, dtype=complex))
    return complex(g) if np.ndim(g) == 0 else g
