"""Coherent-feedback squeezer assembly.

Topology: the input hits the controller beamsplitter K; its feedback port goes
through segment 1 (and the optional bandpass filter) into the DOPO, and the
DOPO output returns through segment 2 to the beamsplitter.  The total feedback
length is ``seg1.l + seg2.l + delta_l_f``; the offset is booked on segment 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.constants import c as C_LIGHT

from .dispersion import ConstantIndex, DispersionModel
from .errors import (
    AsymmetricConfiguration,
    DomainError,
    MarginallyUnstableEvaluation,
    SingularController,
    UnsupportedConfiguration,
)
from .linsys import ACMatrix, check_symmetry
from .plants import (
    ButterworthBPF,
    CavityDOPOParams,
    LangevinDOPOParams,
    bpf_response,
    cavity_dopo_ac,
    cavity_quadrature_gain,
    cavity_responses,
    langevin_dopo_ac,
    langevin_dopo_response,
    quad_sign,
)

OMEGA_C_1550 = 2 * math.pi * C_LIGHT / 1.55e-6


def propagation_loss(db_per_cm: float, length_m: float) -> float:
    """Energy loss fraction of a guide with the given attenuation."""
    return 1.0 - 10 ** (-db_per_cm * length_m * 100 / 10)


@dataclass(frozen=True)
class ControllerBS:
    R_f: float

    def __post_init__(self):
        if not 0.0 <= self.R_f < 1.0:
            raise DomainError(f"R_f must lie in [0, 1), got {self.R_f}")

    @property
    def K(self) -> np.ndarray:
        r, t = math.sqrt(self.R_f), math.sqrt(1 - self.R_f)
        return np.array([[r, t], [t, -r]])


@dataclass(frozen=True)
class PropagationSegment:
    L: float
    l: float
    dispersion: DispersionModel = field(default_factory=lambda: ConstantIndex(1.0))

    def __post_init__(self):
        if not 0.0 <= self.L < 1.0:
            raise DomainError("segment loss must lie in [0, 1)")
        if self.l < 0:
            raise DomainError("segment length must be non-negative")

    def phase_rate(self, omega, omega_c):
        """w n(w_c + w) / c in rad/m."""
        w = np.asarray(omega, dtype=float)
        m = self.dispersion
        n = m.index(omega_c) if m.is_constant else m.index(omega_c + w)
        return w * n / C_LIGHT

    def transfer(self, omega, omega_c=OMEGA_C_1550, extra_length=0.0):
        ph = self.phase_rate(omega, omega_c) * (self.l + extra_length)
        return math.sqrt(1 - self.L) * np.exp(1j * ph)


Plant = Union[LangevinDOPOParams, CavityDOPOParams]


@dataclass(frozen=True)
class CFSConfig:
    plant: Plant
    controller: ControllerBS
    seg1: PropagationSegment
    seg2: PropagationSegment
    bpf: ButterworthBPF | None = None
    delta_l_f: float = 0.0
    omega_c: float = OMEGA_C_1550

    def __post_init__(self):
        if self.seg1.l + self.delta_l_f < 0:
            raise DomainError("delta_l_f makes the first segment negative")

    @property
    def R_f(self):
        return self.controller.R_f

    @property
    def L_f(self):
        return 1 - (1 - self.seg1.L) * (1 - self.seg2.L)

    @property
    def l_f(self):
        return self.seg1.l + self.seg2.l + self.delta_l_f

    @property
    def loop_scale(self):
        """sqrt(R_f (1 - L_f)), the frequency-independent part of the loop."""
        return math.sqrt(self.R_f * (1 - self.L_f))

    @property
    def tau_f(self):
        """Feedback delay for non-dispersive segments."""
        n1 = self.seg1.dispersion.index(self.omega_c)
        n2 = self.seg2.dispersion.index(self.omega_c)
        return (n1 * (self.seg1.l + self.delta_l_f) + n2 * self.seg2.l) / C_LIGHT

    @property
    def xi(self):
        return self.plant.xi if isinstance(self.plant, LangevinDOPOParams) else self.plant.single_pass.xi

    def with_(self, R_f=None, xi=None, delta_l_f=None) -> "CFSConfig":
        """Copy with a new reflectivity, pump amplitude or length offset."""
        cfg = self
        if R_f is not None:
            cfg = replace(cfg, controller=ControllerBS(R_f))
        if xi is not None:
            p = cfg.plant
            if isinstance(p, LangevinDOPOParams):
                p = replace(p, xi=xi)
            else:
                p = replace(p, single_pass=replace(p.single_pass, xi=xi))
            cfg = replace(cfg, plant=p)
        if delta_l_f is not None:
            cfg = replace(cfg, delta_l_f=delta_l_f)
        return cfg


def feedback_phase_rates(cfg: CFSConfig, omega):
    """Per-metre phase of segment 1 and the fixed loop phase, at +w and mirrored -w.

    Returns ``(r1_p, fixed_p, r1_m, fixed_m)`` such that the loop propagation
    phase at +w is ``fixed_p + r1_p * delta`` and the conjugated -w phase is
    ``fixed_m + r1_m * delta``.
    """
    w = np.asarray(omega, dtype=float)
    r1_p = cfg.seg1.phase_rate(w, cfg.omega_c)
    r2_p = cfg.seg2.phase_rate(w, cfg.omega_c)
    r1_m = -cfg.seg1.phase_rate(-w, cfg.omega_c)
    r2_m = -cfg.seg2.phase_rate(-w, cfg.omega_c)
    fixed_p = r1_p * cfg.seg1.l + r2_p * cfg.seg2.l
    fixed_m = r1_m * cfg.seg1.l + r2_m * cfg.seg2.l
    return r1_p, fixed_p, r1_m, fixed_m


def filter_response(cfg: CFSConfig, omega):
    if cfg.bpf is None:
        return np.ones_like(np.asarray(omega, dtype=float), dtype=complex)
    return np.asarray(bpf_response(cfg.bpf, omega), dtype=complex)


def _probe_grid(cfg):
    if isinstance(cfg.plant, LangevinDOPOParams):
        scale = cfg.plant.gamma
    else:
        scale = 2 * math.pi * C_LIGHT / cfg.plant.l_o
    return np.array([0.013, 0.37, 1.0, 2.9, 11.3, 47.0, 310.0]) * scale


@lru_cache(maxsize=256)
def is_symmetric(cfg: CFSConfig, tol: float = 1e-9) -> bool:
    """Carrier symmetry of every element, probed with ``check_symmetry``."""
    grid = _probe_grid(cfg)
    checks = [
        lambda w: cfg.seg1.transfer(w, cfg.omega_c, cfg.delta_l_f),
        lambda w: cfg.seg2.transfer(w, cfg.omega_c),
        lambda w: filter_response(cfg, w),
    ]
    if isinstance(cfg.plant, CavityDOPOParams):
        sp = cfg.plant.single_pass
        if not (sp.flat_gain or sp.dispersion.is_constant):
            return False
        checks += [
            lambda w: cavity_dopo_ac(cfg.plant, w).aa,
            lambda w: cavity_dopo_ac(cfg.plant, w).ac,
        ]
    return all(check_symmetry(f, grid, tol) for f in checks)


def _require_symmetric(cfg):
    if not is_symmetric(cfg):
        raise AsymmetricConfiguration("configuration is not symmetric about the carrier")


def plant_quadrature_gain(cfg: CFSConfig, omega, q: str):
    if isinstance(cfg.plant, LangevinDOPOParams):
        return langevin_dopo_response(cfg.plant, omega, q)[0]
    return cavity_quadrature_gain(cfg.plant, omega, q)


def _loop_factor(cfg, omega):
    """-sqrt(R_f (1 - L_f)) exp(i w tau_f) H(w) for symmetric configurations."""
    w = np.asarray(omega, dtype=float)
    return -cfg.loop_scale * np.exp(1j * w * cfg.tau_f) * filter_response(cfg, w)


def _out(z):
    return complex(z) if np.ndim(z) == 0 else z


def cfs_loop_gain_symmetric(cfg: CFSConfig, omega, q: str):
    _require_symmetric(cfg)
    return _out(_loop_factor(cfg, omega) * plant_quadrature_gain(cfg, omega, q))


def plant_ac_pm(cfg: CFSConfig, omega):
    """Plant G_a, G_c at +w and -w."""
    w = np.asarray(omega, dtype=float)
    if isinstance(cfg.plant, CavityDOPOParams):
        ga_p, gc_p, ga_m, gc_m, _, _ = cavity_responses(cfg.plant, w)
        return ga_p, gc_p, ga_m, gc_m
    m = langevin_dopo_ac(cfg.plant, w)
    return (np.asarray(m.aa), np.asarray(m.ac), np.conj(m.cc), np.conj(m.ca))


def loop_gains_ac_pm(cfg: CFSConfig, omega):
    """Lambda_a(w), Lambda_c(w), conj(Lambda_a(-w)), conj(Lambda_c(-w))."""
    w = np.asarray(omega, dtype=float)
    ga_p, gc_p, ga_m, gc_m = plant_ac_pm(cfg, w)
    r1_p, fixed_p, r1_m, fixed_m = feedback_phase_rates(cfg, w)
    k = cfg.loop_scale
    hp = filter_response(cfg, w)
    hm = np.conj(filter_response(cfg, -w))
    ep = -k * np.exp(1j * (fixed_p + r1_p * cfg.delta_l_f)) * hp
    em = -k * np.exp(1j * (fixed_m + r1_m * cfg.delta_l_f)) * hm
    return ep * ga_p, ep * gc_p, em * np.conj(ga_m), em * np.conj(gc_m)


def cfs_loop_gain_ac(cfg: CFSConfig, omega):
    """(Lambda_a, Lambda_c) of the feedback loop, dispersion included."""
    la, lc, _, _ = loop_gains_ac_pm(cfg, omega)
    return _out(la), _out(lc)


def characteristic_ac(cfg: CFSConfig, omega):
    la, lc, lam, lcm = loop_gains_ac_pm(cfg, omega)
    return _out((1 - la) * (1 - lam) - lc * lcm)


def _guard(den):
    if np.any(np.abs(den) < 1e-14):
        raise MarginallyUnstableEvaluation("|1 - Lambda_q| < 1e-14 at a sampled frequency")


def cfs_transfer_symmetric(cfg: CFSConfig, omega, q: str):
    """(G_q, G_Gq, G_Gamma1q, G_Gamma2q) of the closed loop for the Langevin plant.

    The signal coefficient is evaluated as
    (sqrt(R_f) + sqrt(1 - L_f) e^{i w tau_f} H G_q) / (1 - Lambda_q), which is
    the same expression with the 1/sqrt(R_f) cancelled, so R_f = 0 is regular.
    The filter, if any, sits in segment 1 ahead of that segment's loss.
    """
    if not isinstance(cfg.plant, LangevinDOPOParams):
        raise UnsupportedConfiguration("output spectra are only defined for the Langevin plant")
    _require_symmetric(cfg)
    w = np.asarray(omega, dtype=float)
    gq, gd = langevin_dopo_response(cfg.plant, w, q)
    fwd = np.exp(1j * w * cfg.tau_f) * filter_response(cfg, w) * gq
    lam = -cfg.loop_scale * fwd
    den = 1 - lam
    _guard(den)
    R_f, L1, L2 = cfg.R_f, cfg.seg1.L, cfg.seg2.L
    tau2 = cfg.seg2.dispersion.index(cfg.omega_c) * cfg.seg2.l / C_LIGHT
    e2 = np.exp(1j * w * tau2)
    g_sig = (math.sqrt(R_f) + math.sqrt(1 - cfg.L_f) * fwd) / den
    g_G = math.sqrt((1 - R_f) * (1 - L2)) * e2 * gd / den
    g_1 = math.sqrt((1 - R_f) * L1 * (1 - L2)) * e2 * gq / den
    g_2 = math.sqrt((1 - R_f) * L2) / den
    return _out(g_sig), _out(g_G), _out(g_1), _out(g_2)


def filter_noise_coefficient(cfg: CFSConfig, omega, q: str):
    """Coefficient of the vacuum admitted by the filter's rejection port.

    A passive filter with transmission H couples in vacuum with amplitude
    sqrt(1 - |H|^2); it then follows the same path as the segment-1 signal.
    Zero without a filter.
    """
    w = np.asarray(omega, dtype=float)
    if cfg.bpf is None:
        return _out(np.zeros_like(w, dtype=complex))
    gq, _ = langevin_dopo_response(cfg.plant, w, q)
    h = filter_response(cfg, w)
    lam = -cfg.loop_scale * np.exp(1j * w * cfg.tau_f) * h * gq
    den = 1 - lam
    _guard(den)
    amp = np.sqrt(np.clip(1 - np.abs(h) ** 2, 0.0, None))
    tau2 = cfg.seg2.dispersion.index(cfg.omega_c) * cfg.seg2.l / C_LIGHT
    k = math.sqrt((1 - cfg.R_f) * (1 - cfg.seg1.L) * (1 - cfg.seg2.L))
    return _out(k * amp * np.exp(1j * w * tau2) * gq / den)


def vacuum_output_spectrum(cfg: CFSConfig, omega, q: str):
    """Output quadrature noise relative to vacuum: incoherent sum over inputs.

    Includes the filter's rejection port when a filter is present.
    """
    coeffs = cfs_transfer_symmetric(cfg, omega, q)
    s = sum(np.abs(c) ** 2 for c in coeffs) + np.abs(filter_noise_coefficient(cfg, omega, q)) ** 2
    return float(s) if np.ndim(s) == 0 else s


def general_feedback_transfer(
    plant: Callable, K: Callable, gamma1: Callable, gamma2: Callable, omega
) -> dict:
    """Closed-loop coefficients of a single-loop network with arbitrary elements.

    ``plant(w)`` returns an :class:`ACMatrix`; ``K(w)`` a 2x2 complex array;
    ``gamma1(w)``, ``gamma2(w)`` complex scalars.  Returns a dict mapping each
    input channel ("in", "G", "Gamma1", "Gamma2", "K1", "K2") to its
    (a, c) coefficient pair, plus the loop gains under "loop".
    """
    w = float(omega)
    P = plant(w)
    Kp = np.asarray(K(w), dtype=complex)
    Km = np.conj(np.asarray(K(-w), dtype=complex))
    g1p, g2p = complex(gamma1(w)), complex(gamma2(w))
    g1m, g2m = np.conj(complex(gamma1(-w))), np.conj(complex(gamma2(-w)))
    k11, k12, k21, k22 = Kp[0, 0], Kp[0, 1], Kp[1, 0], Kp[1, 1]
    if abs(k22) == 0 or abs(g1p) == 0:
        raise SingularController("K_22 or Gamma_1 vanishes")
    la = k22 * g1p * g2p * P.aa
    lc = k22 * g1p * g2p * P.ac
    la_m = Km[1, 1] * g1m * g2m * P.cc
    lc_m = Km[1, 1] * g1m * g2m * P.ca
    dd = (1 - la) * (1 - la_m) - lc * lc_m
    detK = k11 * k22 - k12 * k21
    ra = (1 - la_m) / dd
    rc = lc / dd
    ratio1 = g1m / g1p
    out = {
        "in": (
            (detK + ra * k12 * k21) / k22,
            rc * k12 * Km[1, 0] / k22 * ratio1,
        ),
        "Gamma1": ((ra - 1) * k12 / (k22 * g1p), rc * k12 / (k22 * g1p)),
        "K2": ((ra - 1) * k12 / k22, rc * k12 / k22 * ratio1),
        "Gamma2": (ra * k12, rc * k12 * Km[1, 1] / k22 * ratio1),
        "G": (ra * k12 * g2p, rc * k12 * Km[1, 1] / k22 * ratio1 * g2m),
        "K1": (1.0 + 0j, 0j),
        "loop": (la, lc, dd),
    }
    return out


def langevin_oracle(cfg: CFSConfig, omega, q: str):
    """Closed-loop quadrature coefficients of a symmetric Langevin CFS via the
    general composition, in the same order as :func:`cfs_transfer_symmetric`."""
    p = cfg.plant
    s = quad_sign(q)
    k_bs = cfg.controller.K
    L1, L2 = cfg.seg1.L, cfg.seg2.L

    def g1(w):
        return complex(cfg.seg1.transfer(w, cfg.omega_c, cfg.delta_l_f) * filter_response(cfg, w))

    def g2(w):
        return complex(cfg.seg2.transfer(w, cfg.omega_c))

    res = general_feedback_transfer(lambda w: langevin_dopo_ac(p, w), lambda w: k_bs, g1, g2, omega)
    _, gd = langevin_dopo_response(p, omega, q)

    def quad(pair):
        return pair[0] + s * pair[1]

    return (
        quad(res["in"]),
        quad(res["G"]) * gd,
        quad(res["Gamma1"]) * math.sqrt(L1),
        quad(res["Gamma2"]) * math.sqrt(L2),
    )
