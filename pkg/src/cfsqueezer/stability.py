"""Nyquist stability verdicts, Bode traces and the closed-loop sensitivity bound.

The closed loop is unstable iff its characteristic function has zeros in the
upper half of the complex w-plane (the right half s-plane with s = -i w).
With no open-loop poles there (the DOPO precheck), that count equals the
counter-clockwise winding of the characteristic function about zero as w runs
from -Omega to +Omega, provided the closing arc at |w| > Omega is certified
not to wind.  Two paths exist:

* symmetric: the characteristic function factorizes into 1 - Lambda_x and
  1 - Lambda_p, each wound about zero (equivalently -Lambda_q about -1);
* general: Lambda_D of the (a,c) loop is wound about zero.

The frequency axis is sampled on a resonance-warped base grid and refined by
bisection until every segment subtends less than ``max_angle`` at the
critical point.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_LIGHT

from . import kernels
from .errors import (
    DomainError,
    InternallyUnstablePlant,
    MarginalCase,
    RefinementBudgetExceeded,
    UnsupportedConfiguration,
)
from .linsys import ComplexTrace, closure_angle
from .network import (
    CFSConfig,
    feedback_phase_rates,
    filter_response,
    is_symmetric,
    plant_ac_pm,
    plant_quadrature_gain,
)
from .plants import (
    CavityDOPOParams,
    LangevinDOPOParams,
    _single_pass_pm,
    cavity_peak_gain,
    dopo_internal_stability,
)

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class NyquistOptions:
    """Sampling and truncation settings for Nyquist verdicts.

    ``omega_cap`` is the hard limit on the truncation frequency; a tail that
    cannot be certified below it raises :class:`RefinementBudgetExceeded`.
    ``omega_max`` forces a truncation frequency (the verdict is then flagged
    as uncertified unless the certificate also holds there).
    """

    points_per_fsr: int = 64
    max_angle: float = math.pi / 4
    max_db_step: float = 6.0
    budget: int = 2 ** 24
    margin: float = 1e-6
    tail_margin: float = 0.02
    bpf_min_factor: float = 2.0
    omega_cap: float = TWO_PI * 60e12
    omega_max: float | None = None
    force_general: bool = False

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    winding: int
    precheck_dopo: bool
    min_distance_to_critical: float
    refinement_depth: int
    truncation_omega: float
    marginal: bool = False
    certified: bool = True
    path: str = "symmetric"
    windings: tuple = ()
    n_samples: int = 0

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------- grids


def warped_offsets(n: int, rho: float) -> np.ndarray:
    """n round-trip phases in (-pi, pi] crowded around 0 for a pole of modulus rho.

    Uniform theta is pushed through tan(phi/2) = (1-rho)/(1+rho) tan(theta/2),
    which spaces samples evenly in the argument of 1/(1 - rho e^{i phi}).
    """
    rho = min(max(rho, 0.0), 1 - 1e-12)
    theta = -math.pi + TWO_PI * (np.arange(n) + 0.5) / n
    return 2 * np.arctan((1 - rho) / (1 + rho) * np.tan(theta / 2))


def comb_grid(omega_max, fsr, n_warp, n_uniform, rho):
    """Warped points around every resonance k*fsr plus a uniform grid, in [-W, W]."""
    m = int(math.ceil(omega_max / fsr))
    centres = np.arange(-m, m + 1) * fsr
    warped = (centres[:, None] + warped_offsets(n_warp, rho)[None, :] / TWO_PI * fsr).ravel()
    uniform = np.linspace(-m * fsr, m * fsr, 2 * m * n_uniform + 1)
    w = np.union1d(warped, uniform)
    return w[np.abs(w) <= omega_max * (1 + 1e-12)]


def _finish_grid(w, omega_max):
    w = np.union1d(np.asarray(w, dtype=float), [-omega_max, 0.0, omega_max])
    w = w[np.abs(w) <= omega_max]
    keep = np.concatenate([[True], np.diff(w) > 1e-12 * max(omega_max, 1.0)])
    return w[keep]


# ---------------------------------------------------------------- tails


def _moebius_peak(r, R_o):
    s = math.sqrt(R_o)
    return max((r + R_o) / ((1 + r) * s), abs(r - R_o) / ((1 - r) * s))


def _langevin_gmax(p: LangevinDOPOParams):
    a = (p.gamma_T - p.gamma_L) / (2 * p.gamma)
    return max(abs(a + p.xi) / (1 - p.xi), abs(a - p.xi) / (1 + p.xi), 1.0)


def _langevin_tail(p: LangevinDOPOParams, k: float, target: float):
    """Smallest W with k |G_q(w)| <= target for |w| >= W, both quadratures."""
    if k >= target:
        return math.inf
    a = (p.gamma_T - p.gamma_L) / (2 * p.gamma)
    u2 = 0.0
    for s in (1, -1):
        num = k * k * (a + s * p.xi) ** 2 - target ** 2 * (1 - s * p.xi) ** 2
        u2 = max(u2, num / (target ** 2 - k * k))
    return p.gamma * math.sqrt(max(u2, 0.0))


def _bpf_tail(omega_hwhm, gain_bound, target):
    if gain_bound <= target:
        return 0.0
    return omega_hwhm * ((gain_bound / target) ** 2 - 1) ** 0.25


def _single_pass_tail(cfg: CFSConfig, k: float, target: float, cap: float):
    """Frequency beyond which the single-pass sidelobes keep the loop contracting.

    Returns inf if no such frequency below ``cap`` exists.
    """
    p = cfg.plant
    sp = p.single_pass
    if sp.flat_gain or sp.xi == 0:
        return 0.0 if k * _moebius_peak(p.rho * math.exp(sp.C * sp.xi), p.R_o) <= target else math.inf
    # largest single-pass norm the loop tolerates
    lo, hi = p.rho, 1 - 1e-12
    if k * _moebius_peak(lo, p.R_o) > target:
        return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if k * _moebius_peak(mid, p.R_o) <= target:
            lo = mid
        else:
            hi = mid
    s_allow = lo / p.rho
    w = np.linspace(0.0, cap, 40001)[1:]
    from .dispersion import coupling_kappa, wavevector_mismatch

    kp = coupling_kappa(sp.dispersion, sp.omega_c, w, sp.C, sp.xi)
    km = coupling_kappa(sp.dispersion, sp.omega_c, -w, sp.C, sp.xi)
    d = np.abs(wavevector_mismatch(sp.dispersion, sp.omega_c, w)) * sp.l_c / 2
    b2 = d * d - kp * km
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.sqrt(np.where(b2 > 0, b2, np.nan))
        coupling = np.sqrt(kp * km) if sp.normalization == "photon_flux" else np.maximum(kp, km)
        diag = np.sqrt(1 + kp * km / b2)
        off = coupling / b
        bound = np.where(b2 > 1.0, diag + off, np.inf)
    bad = ~(bound <= s_allow)
    if bad[-1]:
        return math.inf
    if not bad.any():
        return 0.0
    last = np.nonzero(bad)[0][-1]
    return float(w[last + 1])


# ---------------------------------------------------------------- loci


class _Locus:
    """Cached open-loop data for one plant; evaluates verdicts for (k, delta)."""

    path = "symmetric"

    def __init__(self, cfg: CFSConfig, opts: NyquistOptions, k_max: float | None = None):
        self.cfg = cfg
        self.opts = opts
        self.k_max = cfg.loop_scale if k_max is None else k_max
        self.precheck = True
        if isinstance(cfg.plant, CavityDOPOParams) and not dopo_internal_stability(cfg.plant):
            raise InternallyUnstablePlant("DOPO cavity is above threshold")
        self.omega_max, self.certified = self._truncation(self.k_max)
        self.grid = self._base_grid(self.omega_max)
        if self.grid.size > opts.budget:
            raise RefinementBudgetExceeded(f"base grid of {self.grid.size} samples exceeds budget")
        self.cache = self._cache(self.grid)

    # subclasses fill these in
    def _tail(self, k):
        raise NotImplementedError

    def _base_grid(self, omega_max):
        raise NotImplementedError

    def _cache(self, w):
        raise NotImplementedError

    def _critical(self, w, cache, k, delta):
        raise NotImplementedError

    def _truncation(self, k):
        if self.opts.omega_max is not None:
            tail = self._tail(k)
            return float(self.opts.omega_max), tail <= self.opts.omega_max
        tail = self._tail(k)
        if not math.isfinite(tail) or tail > self.opts.omega_cap:
            raise RefinementBudgetExceeded(
                f"loop tail cannot be certified below {self.opts.omega_cap / TWO_PI:.3g} Hz")
        return max(tail * 1.02, self._min_span()), True

    def _min_span(self):
        return 0.0

    def _slice(self, k):
        """Indices of the base grid covering the certified span for scale k."""
        if self.opts.omega_max is not None or k >= self.k_max:
            return slice(None), self.omega_max
        tail = max(self._tail(k) * 1.02, self._min_span())
        lo = np.searchsorted(self.grid, -tail, side="right") - 1
        hi = np.searchsorted(self.grid, tail, side="left") + 1
        return slice(max(lo, 0), min(hi, self.grid.size)), tail

    def traces(self, k, delta):
        """Refined critical-function samples, one array per factor."""
        sl, om = self._slice(k)
        w0 = self.grid[sl]
        out = []
        depth = 0
        for part in self._parts():
            cache = self._cache_part(sl, part)
            f = self._critical(w0, cache, k, delta, part)
            w, f, d = self._refine_part(w0, f, k, delta, part)
            depth = max(depth, d)
            out.append((w, f))
        return out, depth, om

    def _parts(self):
        return (None,)

    def _cache_part(self, sl, part):
        return self.cache[part][..., sl] if part is not None else self.cache[..., sl]

    def _refine_part(self, w, f, k, delta, part):
        opts = self.opts
        depth = 0
        db = opts.max_db_step / 20 * math.log(10)
        while True:
            ang = np.abs(kernels.segment_angles(f, 0j))
            mag = np.abs(f)
            near = np.minimum(mag[1:], mag[:-1]) < 4.0
            with np.errstate(divide="ignore"):
                jump = near & (np.abs(np.log(mag[1:] / mag[:-1])) > db)
            tiny = np.diff(w) <= 1e-13 * np.maximum(np.abs(w[1:]), 1.0)
            bad = ((ang > opts.max_angle) | jump) & ~tiny
            if not bad.any():
                return w, f, depth
            idx = np.nonzero(bad)[0]
            mid = 0.5 * (w[idx] + w[idx + 1])
            if w.size + mid.size > opts.budget:
                raise RefinementBudgetExceeded(f"refinement needs more than {opts.budget} samples")
            fm = self._critical(mid, self._cache_new(mid, part), k, delta, part)
            w = np.insert(w, idx + 1, mid)
            f = np.insert(f, idx + 1, fm)
            depth += 1
            if depth > 200:
                raise RefinementBudgetExceeded("refinement depth exceeded 200")

    def verdict(self, k: float, delta: float) -> StabilityVerdict:
        parts, depth, om = self.traces(k, delta)
        windings = []
        dmin = math.inf
        n = 0
        for w, f in parts:
            total, _, dm = kernels.winding_stats(f, 0j)
            total += closure_angle(f[0], f[-1], "principal")
            windings.append(int(round(total / TWO_PI)))
            dmin = min(dmin, dm)
            n += w.size
        winding = int(sum(windings))
        marginal = dmin < self.opts.margin
        if marginal:
            warnings.warn(MarginalCase(
                f"locus passes within {dmin:.3g} of the critical point"), stacklevel=2)
        certified = self.certified and (self.opts.omega_max is None or self._tail(k) <= om)
        stable = all(v == 0 for v in windings) and self.precheck
        return StabilityVerdict(
            stable=bool(stable), winding=winding, precheck_dopo=self.precheck,
            min_distance_to_critical=float(dmin), refinement_depth=depth,
            truncation_omega=float(om), marginal=bool(marginal), certified=bool(certified),
            path=self.path, windings=tuple(windings), n_samples=n)


class SymmetricLocus(_Locus):
    """1 - Lambda_q = 1 + k e^{i w tau} H(w) G_q(w) for q = x, p."""

    path = "symmetric"

    def _parts(self):
        return ("x", "p")

    def _gain_bound(self):
        p = self.cfg.plant
        if isinstance(p, LangevinDOPOParams):
            return _langevin_gmax(p)
        return cavity_peak_gain(p)

    def _tail(self, k):
        target = 1 - self.opts.tail_margin
        gb = k * self._gain_bound()
        if gb <= target:
            return 0.0
        tails = []
        if self.cfg.bpf is not None:
            tails.append(_bpf_tail(self.cfg.bpf.omega_hwhm, gb, target))
        if isinstance(self.cfg.plant, LangevinDOPOParams):
            tails.append(_langevin_tail(self.cfg.plant, k, target))
        if not tails:
            raise UnsupportedConfiguration(
                "a cavity plant without a bandpass filter has no certified truncation; "
                "add a filter or pass omega_max")
        t = min(tails)
        if self.cfg.bpf is not None and math.isfinite(t):
            t = max(t, self.opts.bpf_min_factor * self.cfg.bpf.omega_hwhm) if gb > target else t
        return t

    def _min_span(self):
        p = self.cfg.plant
        if isinstance(p, LangevinDOPOParams):
            return 20 * p.gamma
        return 4 * TWO_PI * C_LIGHT / (p.l_o * p.single_pass.dispersion.index(p.single_pass.omega_c))

    def _base_grid(self, omega_max):
        p = self.cfg.plant
        n = self.opts.points_per_fsr
        if isinstance(p, LangevinDOPOParams):
            w0 = p.gamma * max(1 - p.xi, 1e-6)
            span = math.atan(omega_max / w0)
            theta = np.linspace(-span, span, 8 * n + 1)
            lorentz = w0 * np.tan(theta)
            period = TWO_PI / max(self.cfg.tau_f, 1e-300)
            m = int(min(omega_max / period * n, 2 ** 20))
            uniform = np.linspace(-omega_max, omega_max, 2 * m + 1)
            return _finish_grid(np.union1d(lorentz, uniform), omega_max)
        n_o = p.single_pass.dispersion.index(p.single_pass.omega_c)
        fsr = TWO_PI * C_LIGHT / (n_o * p.l_o)
        rho_x = p.rho * math.exp(p.single_pass.C * p.single_pass.xi)
        return _finish_grid(comb_grid(omega_max, fsr, n // 2, n // 2, rho_x), omega_max)

    def _plant(self, w, q):
        return filter_response(self.cfg, w) * np.asarray(plant_quadrature_gain(self.cfg, w, q))

    def _cache(self, w):
        return {q: self._plant(w, q) for q in ("x", "p")}

    def _cache_new(self, w, q):
        return self._plant(w, q)

    def _critical(self, w, cache, k, delta, part=None):
        tau = self.cfg.with_(delta_l_f=delta).tau_f
        return kernels.symmetric_critical(w, cache, k, tau)


class GeneralLocus(_Locus):
    """Lambda_D(w) of the (a,c) loop, with the segment-1 length as the variable."""

    path = "general"

    def _tail(self, k):
        target = 1 - self.opts.tail_margin
        p = self.cfg.plant
        if isinstance(p, LangevinDOPOParams):
            gb = k * _langevin_gmax(p)
            if gb <= target:
                return 0.0
            tails = [_langevin_tail(p, k, target)]
            if self.cfg.bpf is not None:
                tails.append(_bpf_tail(self.cfg.bpf.omega_hwhm, gb, target))
            return min(tails)
        sp = p.single_pass
        flat_bound = k * _moebius_peak(p.rho * math.exp(sp.C * sp.xi), p.R_o)
        if flat_bound <= target:
            return 0.0
        tails = [_single_pass_tail(self.cfg, k, target, self.opts.omega_cap)]
        if self.cfg.bpf is not None:
            tails.append(_bpf_tail(self.cfg.bpf.omega_hwhm, flat_bound, target))
        return min(tails)

    def _min_span(self):
        p = self.cfg.plant
        if isinstance(p, LangevinDOPOParams):
            return 20 * p.gamma
        return 4 * self._fsr()

    def _fsr(self):
        sp = self.cfg.plant.single_pass
        return TWO_PI * C_LIGHT / (self.cfg.plant.l_o * sp.dispersion.index(sp.omega_c))

    def _base_grid(self, omega_max):
        p = self.cfg.plant
        n = self.opts.points_per_fsr
        if isinstance(p, LangevinDOPOParams):
            return SymmetricLocus._base_grid(self, omega_max)
        sp = p.single_pass
        fsr = self._fsr()
        rho_x = p.rho * math.exp(sp.C * sp.xi)
        m = sp.dispersion
        if m.is_constant:
            return _finish_grid(comb_grid(omega_max, fsr, n // 2, n // 2, rho_x), omega_max)
        pts = [np.linspace(-omega_max, omega_max, 2 * int(math.ceil(omega_max / fsr)) * (n // 4) + 1)]
        offs = warped_offsets(n // 4, rho_x)
        for sign in (1, -1):
            pts.append(self._comb(omega_max, sign, offs))
        return _finish_grid(np.concatenate(pts), omega_max)

    def _comb(self, omega_max, sign, offs):
        """Frequencies where w n(w_c + sign w) l_o / c hits 2 pi m + offs."""
        p = self.cfg.plant
        sp = p.single_pass
        m = sp.dispersion

        def phase(w):
            return w * m.index(sp.omega_c + sign * w) * p.l_o / C_LIGHT

        lo, hi = phase(-omega_max), phase(omega_max)
        ks = np.arange(math.floor(lo / TWO_PI), math.ceil(hi / TWO_PI) + 1)
        target = (TWO_PI * ks[:, None] + offs[None, :]).ravel()
        n0 = m.index(sp.omega_c)
        w = target * C_LIGHT / (n0 * p.l_o)
        w = np.clip(w, -omega_max, omega_max)
        for _ in range(12):
            w = target * C_LIGHT / (m.index(sp.omega_c + sign * w) * p.l_o)
            w = np.clip(w, -omega_max, omega_max)
        return w

    def _cache(self, w):
        cfg = self.cfg
        ga_p, gc_p, ga_m, gc_m = plant_ac_pm(cfg, w)
        r1_p, fixed_p, r1_m, fixed_m = feedback_phase_rates(cfg, w)
        hp = filter_response(cfg, w)
        hm = np.conj(filter_response(cfg, -w))
        ep = np.exp(1j * fixed_p) * hp
        em = np.exp(1j * fixed_m) * hm
        A = ep * ga_p
        B = em * np.conj(ga_m)
        P = ep * gc_p * em * np.conj(gc_m)
        return {"r1p": r1_p, "r1m": r1_m, "A": A, "B": B, "P": P}

    def _parts(self):
        return ("D",)

    def _cache_part(self, sl, part):
        return {key: v[sl] for key, v in self.cache.items()}

    def _cache_new(self, w, part):
        return self._cache(w)

    def _critical(self, w, cache, k, delta, part=None):
        return kernels.general_critical(cache["r1p"], cache["r1m"], cache["A"], cache["B"],
                                        cache["P"], k, delta)


def make_locus(cfg: CFSConfig, opts: NyquistOptions | None = None, k_max=None) -> _Locus:
    opts = opts or NyquistOptions()
    if not opts.force_general and is_symmetric(cfg):
        return SymmetricLocus(cfg, opts, k_max)
    return GeneralLocus(cfg, opts, k_max)


def nyquist_verdict(cfg: CFSConfig, options: NyquistOptions | None = None) -> StabilityVerdict:
    if isinstance(cfg.plant, CavityDOPOParams) and not dopo_internal_stability(cfg.plant):
        raise InternallyUnstablePlant("DOPO cavity is above threshold; no open-loop pole count")
    if cfg.R_f == 0:
        return StabilityVerdict(True, 0, True, 1.0, 0, 0.0, path="trivial", windings=(0,))
    locus = make_locus(cfg, options)
    return locus.verdict(cfg.loop_scale, cfg.delta_l_f)


def nyquist_trace(cfg: CFSConfig, options: NyquistOptions | None = None) -> ComplexTrace:
    """Refined locus: -Lambda_x (symmetric path) or Lambda_D (general path)."""
    locus = make_locus(cfg, options)
    parts, depth, om = locus.traces(cfg.loop_scale, cfg.delta_l_f)
    w, f = parts[0]
    vals = f - 1 if locus.path == "symmetric" else f
    meta = {"path": locus.path, "critical_point": -1 + 0j if locus.path == "symmetric" else 0j,
            "refinement_depth": depth, "truncation_omega": om}
    return ComplexTrace(w, vals, meta)


def characteristic_samples(cfg: CFSConfig, grid) -> ComplexTrace:
    """Characteristic function on ``grid``.

    Symmetric configurations also carry the factors 1 - Lambda_x and
    1 - Lambda_p in ``metadata``; the values are their product.
    """
    if isinstance(cfg.plant, CavityDOPOParams) and not dopo_internal_stability(cfg.plant):
        raise InternallyUnstablePlant("DOPO cavity is above threshold")
    w = np.asarray(grid, dtype=float)
    if is_symmetric(cfg):
        fac = {}
        for q in ("x", "p"):
            g = filter_response(cfg, w) * np.asarray(plant_quadrature_gain(cfg, w, q))
            fac[q] = kernels.symmetric_critical(w, g, cfg.loop_scale, cfg.tau_f)
        return ComplexTrace(w, fac["x"] * fac["p"], {"factor_x": fac["x"], "factor_p": fac["p"],
                                                     "path": "symmetric"})
    loc = GeneralLocus.__new__(GeneralLocus)
    loc.cfg = cfg
    cache = GeneralLocus._cache(loc, w)
    vals = GeneralLocus._critical(loc, w, cache, cfg.loop_scale, cfg.delta_l_f)
    return ComplexTrace(w, vals, {"path": "general"})


def bode_trace(cfg: CFSConfig, grid, components: bool = False):
    """(w, 20 log10 |Lambda|, arg(-Lambda) in degrees) rows for the x loop.

    For non-symmetric configurations Lambda_a stands in for Lambda_x.  With
    ``components`` each row also carries the feedback-path phase and the
    plant phase, both as arguments in (-180, 180].
    """
    w = np.asarray(grid, dtype=float)
    if is_symmetric(cfg):
        plant = np.asarray(plant_quadrature_gain(cfg, w, "x"))
        path = -cfg.loop_scale * np.exp(1j * w * cfg.tau_f) * filter_response(cfg, w)
    else:
        ga_p, _, _, _ = plant_ac_pm(cfg, w)
        plant = ga_p
        r1_p, fixed_p, _, _ = feedback_phase_rates(cfg, w)
        path = -cfg.loop_scale * np.exp(1j * (fixed_p + r1_p * cfg.delta_l_f)) * filter_response(cfg, w)
    lam = path * plant
    with np.errstate(divide="ignore"):
        mag = 20 * np.log10(np.abs(lam))
    rows = []
    for i in range(w.size):
        row = (float(w[i]), float(mag[i]), _deg(-lam[i]))
        if components:
            row += (_deg(-path[i]), _deg(plant[i]))
        rows.append(row)
    return rows


def _deg(z):
    a = math.degrees(math.atan2(z.imag, z.real))
    return 180.0 if a == -180.0 else a


def sensitivity_bound(G_q: float, R_f: float, delta_G_rel: float):
    """(tight, loose) bounds on the relative output-gain fluctuation."""
    if not G_q > 0:
        raise DomainError("G_q must be positive")
    if not 0 <= R_f < 1:
        raise DomainError("R_f must lie in [0, 1)")
    if not delta_G_rel >= 0:
        raise DomainError("delta_G_rel must be non-negative")
    s = math.sqrt(R_f)
    tight = (1 - R_f) / (1 + R_f + s * (G_q + 1 / G_q)) * delta_G_rel
    loose = (1 - R_f) / (1 + s) ** 2 * delta_G_rel
    return tight, loose
