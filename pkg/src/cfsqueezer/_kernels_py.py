"""Numpy implementations of the hot loops.

These are the reference versions; ``_kernels.pyx`` mirrors them one for one.
"""
import numpy as np


def segment_angles(values, point=0j):
    """Signed angle subtended at ``point`` by each consecutive pair of samples."""
    v = np.asarray(values, dtype=complex) - point
    return np.angle(v[1:] * np.conj(v[:-1]))


def winding_stats(values, point=0j):
    """Return (sum of segment angles, largest |segment angle|, min distance to point)."""
    v = np.asarray(values, dtype=complex) - point
    if v.size < 2:
        return 0.0, 0.0, float(np.min(np.abs(v))) if v.size else np.inf
    ang = np.angle(v[1:] * np.conj(v[:-1]))
    return float(ang.sum()), float(np.max(np.abs(ang))), float(np.min(np.abs(v)))


def symmetric_critical(omega, plant, k, tau):
    """1 - Lambda_q for the factorized loop: 1 + k exp(i w tau) plant."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 + k * np.exp(1j * omega * tau) * np.asarray(plant, dtype=complex)


def general_critical(rate_plus, rate_minus, A, B, P, k, lf):
    """Characteristic function of the (a,c) loop for a feedback length ``lf``.

    ``rate_plus``/``rate_minus`` are the propagation phases per metre at the
    upper and mirrored lower sideband, ``A = G_a(w)``, ``B = conj(G_a(-w))`` and
    ``P = G_c(w) conj(G_c(-w))``, all already multiplied by any filter response.
    """
    ep = np.exp(1j * np.asarray(rate_plus, dtype=float) * lf)
    em = np.exp(1j * np.asarray(rate_minus, dtype=float) * lf)
    return (1.0 + k * ep * A) * (1.0 + k * em * B) - (k * k) * ep * em * P
