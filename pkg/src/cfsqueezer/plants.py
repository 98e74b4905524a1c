"""Amplifier and filter models.

Sign conventions: a field travelling a length l picks up exp(+i w n l / c), so
causal responses are analytic in the upper half of the complex w-plane.  The
quadrature selector ``q`` is ``"x"`` (amplified) or ``"p"`` (squeezed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_LIGHT

from .dispersion import (
    ConstantIndex,
    DispersionModel,
    coupling_kappa,
    single_pass_gain_constant,
    wavevector_mismatch,
)
from .errors import DomainError, InternallyUnstablePlant
from .linsys import ACMatrix, svd_gain, to_quadrature_basis


def quad_sign(q: str) -> int:
    if q == "x":
        return 1
    if q == "p":
        return -1
    raise ValueError(f"quadrature must be 'x' or 'p', got {q!r}")


def _out(z):
    return complex(z) if np.ndim(z) == 0 else z


@dataclass(frozen=True)
class IdealDOPOGain:
    G: float

    def __post_init__(self):
        if not self.G > 0:
            raise DomainError("ideal gain must be positive")

    def quadrature(self, q: str) -> float:
        return self.G if quad_sign(q) > 0 else 1.0 / self.G


def ideal_feedback_gain(G: float, R_f: float, q: str) -> float:
    """Closed-loop DC gain (sqrt(R_f) + G_q) / (1 + G_q sqrt(R_f))."""
    if not 0.0 <= R_f < 1.0:
        raise DomainError(f"R_f must lie in [0, 1), got {R_f}")
    gq = IdealDOPOGain(G).quadrature(q)
    s = math.sqrt(R_f)
    return (s + gq) / (1.0 + gq * s)


@dataclass(frozen=True)
class LangevinDOPOParams:
    T_o: float
    L_o: float
    l_o: float
    xi: float

    def __post_init__(self):
        if not 0 < self.T_o <= 1:
            raise DomainError("T_o must lie in (0, 1]")
        if not 0 <= self.L_o < 1:
            raise DomainError("L_o must lie in [0, 1)")
        if not self.l_o > 0:
            raise DomainError("l_o must be positive")
        if not 0 <= self.xi < 1:
            raise DomainError("xi must lie in [0, 1)")

    @property
    def gamma_T(self):
        return C_LIGHT * self.T_o / self.l_o

    @property
    def gamma_L(self):
        return C_LIGHT * self.L_o / self.l_o

    @property
    def gamma(self):
        return 0.5 * (self.gamma_T + self.gamma_L)

    @property
    def fsr_hz(self):
        return C_LIGHT / self.l_o


def langevin_dopo_response(p: LangevinDOPOParams, omega, q: str):
    """(G_q, G_dq): signal and internal-loss-noise transfer of the DOPO."""
    s = quad_sign(q)
    u = np.asarray(omega, dtype=float) / p.gamma
    a = (p.gamma_T - p.gamma_L) / (2 * p.gamma)
    den = 1 - 1j * u - s * p.xi
    gq = (a + 1j * u + s * p.xi) / den
    gd = (math.sqrt(p.gamma_T * p.gamma_L) / p.gamma) / den
    return _out(gq), _out(gd)


def langevin_dopo_ac(p: LangevinDOPOParams, omega) -> ACMatrix:
    gT, gL, g = p.gamma_T, p.gamma_L, p.gamma
    eps = p.xi * g

    def den(w):
        return (g - 1j * w) ** 2 - eps ** 2

    def g_a(w):
        return ((gT / 2) ** 2 - (gL / 2 - 1j * w) ** 2 + eps ** 2) / den(w)

    def g_c(w):
        return eps * gT / den(w)

    return ACMatrix.from_pair(g_a, g_c, omega)


@dataclass(frozen=True)
class SinglePassParams:
    """Single-pass degenerate parametric amplifier.

    ``normalization`` selects the off-diagonal coupling.  ``"photon_flux"``
    uses sqrt(k(w) k(-w)), which keeps |G_a|^2 - |G_c|^2 = 1 exactly;
    ``"field"`` uses k(w) itself, as written for classical field amplitudes,
    which breaks that identity by k(w)(k(-w) - k(w)) |sinh g / g|^2.
    ``flat_gain`` freezes the response at its w = 0 value for every w.
    """

    l_c: float
    xi: float
    C: float
    dispersion: DispersionModel = field(default_factory=ConstantIndex)
    omega_c: float = 2 * math.pi * C_LIGHT / 1.55e-6
    flat_gain: bool = False
    normalization: str = "photon_flux"

    def __post_init__(self):
        if not self.l_c > 0:
            raise DomainError("l_c must be positive")
        if not self.C > 0:
            raise DomainError("C must be positive")
        if not self.xi >= 0:
            raise DomainError("xi must be non-negative")
        if self.normalization not in ("photon_flux", "field"):
            raise DomainError(f"unknown normalization {self.normalization!r}")


def _cosh_sinhc(g2):
    """cosh(g) and sinh(g)/g as entire functions of g^2."""
    g2 = np.asarray(g2, dtype=complex)
    g = np.sqrt(g2)
    small = np.abs(g) < 1e-6
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = np.where(small, 1 + g2 / 2 + g2 * g2 / 24, np.cosh(g))
        sc = np.where(small, 1 + g2 / 6 + g2 * g2 / 120, np.sinh(g) / np.where(small, 1.0, g))
    return ch, sc


def single_pass_coefficients(kappa_plus, kappa_minus, delta_k, l_c, normalization="photon_flux"):
    """(G_a, G_c) of a single pass for given couplings and phase mismatch."""
    kp = np.asarray(kappa_plus, dtype=float)
    km = np.asarray(kappa_minus, dtype=float)
    d = np.asarray(delta_k, dtype=float) * l_c / 2
    ch, sc = _cosh_sinhc(kp * km - d * d)
    phase = np.exp(1j * d)
    coupling = np.sqrt(kp * km) if normalization == "photon_flux" else kp
    return phase * (ch - 1j * d * sc), phase * coupling * sc


def _single_pass_pm(sp: SinglePassParams, w):
    """G_a, G_c at +w and -w in one pass over the dispersion model."""
    w = np.asarray(w, dtype=float)
    if sp.flat_gain:
        r = sp.C * sp.xi
        ga = np.full(w.shape, math.cosh(r), dtype=complex)
        gc = np.full(w.shape, math.sinh(r), dtype=complex)
        return ga, gc, ga, gc
    kp = coupling_kappa(sp.dispersion, sp.omega_c, w, sp.C, sp.xi)
    km = coupling_kappa(sp.dispersion, sp.omega_c, -w, sp.C, sp.xi)
    dk = wavevector_mismatch(sp.dispersion, sp.omega_c, w)
    ga_p, gc_p = single_pass_coefficients(kp, km, dk, sp.l_c, sp.normalization)
    ga_m, gc_m = single_pass_coefficients(km, kp, dk, sp.l_c, sp.normalization)
    return ga_p, gc_p, ga_m, gc_m


def single_pass_ac(p: SinglePassParams, omega) -> ACMatrix:
    ga_p, gc_p, ga_m, gc_m = _single_pass_pm(p, omega)
    return ACMatrix(_out(ga_p), _out(gc_p), _out(np.conj(gc_m)), _out(np.conj(ga_m)), omega)


@dataclass(frozen=True)
class CavityDOPOParams:
    """Ring DOPO: single-pass amplifier closed by an output coupler R_o.

    The round-trip propagation index is taken from the single-pass dispersion
    model (the same guided mode fills the cavity).
    """

    R_o: float
    L_o: float
    l_o: float
    single_pass: SinglePassParams

    def __post_init__(self):
        if not 0 < self.R_o < 1:
            raise DomainError("R_o must lie in (0, 1)")
        if not 0 <= self.L_o < 1:
            raise DomainError("L_o must lie in [0, 1)")
        if not self.l_o > 0:
            raise DomainError("l_o must be positive")

    @property
    def rho(self):
        """Passive round-trip amplitude sqrt(R_o (1 - L_o))."""
        return math.sqrt(self.R_o * (1 - self.L_o))

    @property
    def xi(self):
        return self.single_pass.xi

    @classmethod
    def calibrated(cls, R_o, L_o, l_o, l_c, xi, dispersion=None, **kw):
        """Build with C set by the bare-cavity threshold condition."""
        sp = SinglePassParams(l_c=l_c, xi=xi, C=single_pass_gain_constant(R_o, L_o),
                              dispersion=dispersion or ConstantIndex(1.0), **kw)
        return cls(R_o, L_o, l_o, sp)


def dopo_internal_stability(p: CavityDOPOParams) -> bool:
    return math.exp(p.single_pass.C * p.single_pass.xi) * p.rho < 1.0


def _require_stable(p):
    if not dopo_internal_stability(p):
        raise InternallyUnstablePlant(
            f"exp(C xi) sqrt(R_o (1 - L_o)) = "
            f"{math.exp(p.single_pass.C * p.single_pass.xi) * p.rho:.6g} >= 1")


def cavity_phase_rates(p: CavityDOPOParams, omega):
    """Propagation phase per metre, w n(w_c + w) / c, at +w and the mirrored -w."""
    w = np.asarray(omega, dtype=float)
    m = p.single_pass.dispersion
    wc = p.single_pass.omega_c
    if m.is_constant:
        n = m.index(wc)
        return w * n / C_LIGHT, w * n / C_LIGHT
    return w * m.index(wc + w) / C_LIGHT, w * m.index(wc - w) / C_LIGHT


def cavity_responses(p: CavityDOPOParams, omega):
    """Cavity G_a, G_c at +w and -w plus the phase rates used for them.

    Returns ``(ga_p, gc_p, ga_m, gc_m, rate_p, rate_m)`` where ``rate_m`` is
    w n(w_c - w)/c, so exp(i rate_m l) = conj of the -w propagation phase.
    """
    _require_stable(p)
    w = np.asarray(omega, dtype=float)
    sga_p, sgc_p, sga_m, sgc_m = _single_pass_pm(p.single_pass, w)
    rate_p, rate_m = cavity_phase_rates(p, w)
    ep = p.rho * np.exp(1j * rate_p * p.l_o)
    em = p.rho * np.exp(-1j * rate_m * p.l_o)
    la_p, lc_p = ep * sga_p, ep * sgc_p
    la_m, lc_m = em * sga_m, em * sgc_m
    dd = (1 - la_p) * (1 - np.conj(la_m)) - lc_p * np.conj(lc_m)
    s = math.sqrt(p.R_o)
    t = 1 - p.R_o
    ga_p = (-1 + (1 - np.conj(la_m)) * t / dd) / s
    gc_p = t / s * lc_p / dd
    ddm = np.conj(dd)
    ga_m = (-1 + (1 - np.conj(la_p)) * t / ddm) / s
    gc_m = t / s * lc_m / ddm
    return ga_p, gc_p, ga_m, gc_m, rate_p, rate_m


def cavity_loop_gains(p: CavityDOPOParams, omega):
    """Internal loop gains (Lambda_a, Lambda_c, Lambda_D) of the DOPO cavity."""
    w = np.asarray(omega, dtype=float)
    sga_p, sgc_p, sga_m, sgc_m = _single_pass_pm(p.single_pass, w)
    rate_p, rate_m = cavity_phase_rates(p, w)
    ep = p.rho * np.exp(1j * rate_p * p.l_o)
    em = p.rho * np.exp(-1j * rate_m * p.l_o)
    la, lc = ep * sga_p, ep * sgc_p
    dd = (1 - la) * (1 - np.conj(em * sga_m)) - lc * np.conj(em * sgc_m)
    return _out(la), _out(lc), _out(dd)


def cavity_dopo_ac(p: CavityDOPOParams, omega) -> ACMatrix:
    ga_p, gc_p, ga_m, gc_m, _, _ = cavity_responses(p, omega)
    return ACMatrix(_out(ga_p), _out(gc_p), _out(np.conj(gc_m)), _out(np.conj(ga_m)), omega)


def cavity_quadrature_gain(p: CavityDOPOParams, omega, q: str):
    """Quadrature gain of a carrier-symmetric cavity DOPO.

    Uses (Lambda_q - R_o) / (sqrt(R_o) (1 - Lambda_q)) with
    Lambda_q = rho exp(i w n l_o / c) (G_a + s_q G_c) of the single pass.
    Only meaningful when the single-pass response is symmetric about the
    carrier (flat gain, or constant index with photon-flux coupling).
    """
    _require_stable(p)
    s = quad_sign(q)
    w = np.asarray(omega, dtype=float)
    sga, sgc, _, _ = _single_pass_pm(p.single_pass, w)
    rate, _ = cavity_phase_rates(p, w)
    lam = p.rho * np.exp(1j * rate * p.l_o) * (sga + s * sgc)
    return _out((lam - p.R_o) / (math.sqrt(p.R_o) * (1 - lam)))


def cavity_peak_gain(p: CavityDOPOParams) -> float:
    """Largest quadrature gain magnitude of the flat-gain cavity over all w.

    The round-trip map is a Moebius transform of a circle symmetric about the
    real axis, so the extremes sit at round-trip phase 0 or pi.
    """
    r = p.single_pass.C * p.single_pass.xi
    s = math.sqrt(p.R_o)
    best = 0.0
    for rho_q in (p.rho * math.exp(r), p.rho * math.exp(-r)):
        best = max(best, abs(rho_q - p.R_o) / ((1 - rho_q) * s), (rho_q + p.R_o) / ((1 + rho_q) * s))
    return best


def max_gain_db(m: ACMatrix):
    """20 log10 of the larger singular value of a response matrix."""
    g_x = svd_gain(to_quadrature_basis(m))[1]
    with np.errstate(divide="ignore"):
        return 20 * np.log10(g_x)


def gain_spectrum_db(p: CavityDOPOParams, omega):
    """(single-pass, cavity) maximum amplitude gain in dB on ``omega``."""
    w = np.asarray(omega, dtype=float)
    return max_gain_db(single_pass_ac(p.single_pass, w)), max_gain_db(cavity_dopo_ac(p, w))


@dataclass(frozen=True)
class ButterworthBPF:
    """Second-order Butterworth low-pass shape about the carrier.

    ``convention="causal"`` (default) places both poles in the lower half
    w-plane, so the filter lags like a delay exp(+i w t).  ``"literal"``
    evaluates w_h^2 / ((i w - w_1)(i w - w_2)) as written, whose poles are in
    the upper half-plane under this package's Fourier sign; it has the same
    magnitude and the mirrored phase.
    """

    omega_hwhm: float
    convention: str = "causal"

    def __post_init__(self):
        if not self.omega_hwhm > 0:
            raise DomainError("omega_hwhm must be positive")
        if self.convention not in ("causal", "literal"):
            raise DomainError(f"unknown BPF convention {self.convention!r}")

    @property
    def poles(self):
        wh = self.omega_hwhm
        return wh * np.exp(1j * 3 * math.pi / 4), wh * np.exp(1j * 5 * math.pi / 4)

    @property
    def omega_poles(self):
        """Complex frequencies where the response diverges."""
        rot = 1j if self.convention == "causal" else -1j
        return tuple(rot * w for w in self.poles)


def bpf_response(f: ButterworthBPF, omega):
    w1, w2 = f.poles
    s = 1j * np.asarray(omega, dtype=float)
    if f.convention == "causal":
        s = -s
    return _out(f.omega_hwhm ** 2 / ((s - w1) * (s - w2)))
