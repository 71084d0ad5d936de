"""TVB troubled-cell detection and the Krivodonova hierarchical moment limiter.

Both work on modal coefficient arrays of shape ``(..., N, p+1)`` in the scaled basis of
:mod:`hybridfilter.dg`, so a system can be processed in one call.  Boundaries are given
by ``boundary``: ``"periodic"``, ``"copy"`` (zero-gradient), or a pair
``(left_ghost, right_ghost)`` of coefficient rows (or of per-component rows for a system;
scalars mean constant ghost states).
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..dg import DGField, mode_scale


def minmod(*args):
    """Elementwise minmod of any number of equally shaped arrays."""
    a = np.asarray(args[0], dtype=float)
    sign = np.sign(a)
    mag = np.abs(a)
    agree = sign != 0
    for b in args[1:]:
        b = np.asarray(b, dtype=float)
        agree = agree & (np.sign(b) == sign)
        mag = np.minimum(mag, np.abs(b))
    return np.where(agree, sign * mag, 0.0)


def tvb_minmod(a1, a2, a3, threshold):
    a1 = np.asarray(a1, dtype=float)
    return np.where(np.abs(a1) <= threshold, a1, minmod(a1, a2, a3))


def _ghost_rows(ghost, lead_shape, width) -> np.ndarray:
    g = np.asarray(ghost, dtype=float)
    if g.ndim != len(lead_shape) + 1 or g.shape[-1] != width:
        # scalars or per-component means become constant states
        mean = np.broadcast_to(g, lead_shape)
        g = np.zeros(lead_shape + (width,))
        g[..., 0] = mean
    return np.broadcast_to(g, lead_shape + (width,))[..., None, :]


def with_ghosts(coeffs: np.ndarray, boundary) -> np.ndarray:
    """Coefficients padded with one ghost element on each side of the element axis."""
    if isinstance(boundary, str):
        if boundary == "periodic":
            return np.concatenate([coeffs[..., -1:, :], coeffs, coeffs[..., :1, :]], axis=-2)
        if boundary == "copy":
            return np.concatenate([coeffs[..., :1, :], coeffs, coeffs[..., -1:, :]], axis=-2)
        raise ValueError(f"unknown boundary {boundary!r}")
    lead, width = coeffs.shape[:-2], coeffs.shape[-1]
    left = _ghost_rows(boundary[0], lead, width)
    right = _ghost_rows(boundary[1], lead, width)
    return np.concatenate([left, coeffs, right], axis=-2)


def tvb_flags(coeffs: np.ndarray, M: float, h: float, boundary="periodic") -> np.ndarray:
    """Mask of elements whose interface deviations are modified by the TVB minmod.

    For a stacked system the mask is the union over components.
    """
    if M < 0:
        raise ValueError("TVB parameter must be non-negative")
    coeffs = np.asarray(coeffs, dtype=float)
    p = coeffs.shape[-1] - 1
    if p == 0:
        return np.zeros(coeffs.shape[-2], dtype=bool)
    s = mode_scale(p)
    mean = coeffs[..., 0]
    dev_r = coeffs @ s - mean
    dev_l = mean - coeffs @ (s * (-1.0) ** np.arange(p + 1))
    padded = with_ghosts(coeffs, boundary)[..., 0]
    d_plus = padded[..., 2:] - mean
    d_minus = mean - padded[..., :-2]
    thr = M * h * h
    flagged = ((tvb_minmod(dev_r, d_plus, d_minus, thr) != dev_r)
               | (tvb_minmod(dev_l, d_plus, d_minus, thr) != dev_l))
    return flagged.reshape(-1, coeffs.shape[-2]).any(axis=0)


def tvb_detect(fields: DGField | Sequence[DGField], M: float, boundary="periodic") -> np.ndarray:
    """Sorted indices of troubled elements; a system is flagged where any component is."""
    if isinstance(fields, DGField):
        fields = [fields]
    coeffs = np.stack([f.coeffs for f in fields])
    return np.flatnonzero(tvb_flags(coeffs, M, fields[0].mesh.h, boundary))


def limit_triples(left: np.ndarray, centre: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Hierarchical minmod on plain Legendre coefficients of (left, centre, right) elements.

    Starting from the highest mode,
    ``c_i <- minmod(c_i, a_i (c_{i-1}^+ - c_{i-1}), a_i (c_{i-1} - c_{i-1}^-))`` with
    ``a_i = 1/(2(2i-1))``; each row stops at the first mode the minmod leaves unchanged.
    """
    p = centre.shape[-1] - 1
    fwd = right[..., :-1] - centre[..., :-1]
    bwd = centre[..., :-1] - left[..., :-1]
    new = centre.copy()
    active = np.ones(centre.shape[:-1], dtype=bool)
    for i in range(p, 0, -1):
        alpha = 1.0 / (2.0 * (2 * i - 1))
        limited = minmod(centre[..., i], alpha * fwd[..., i - 1], alpha * bwd[..., i - 1])
        new[..., i] = np.where(active, limited, centre[..., i])
        active &= limited != centre[..., i]
        if not active.any():
            break
    return new


def moment_limit_coeffs(coeffs: np.ndarray, flagged, boundary="periodic") -> np.ndarray:
    """Krivodonova limiter on the flagged elements, componentwise.

    Neighbour differences use the unlimited coefficients.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    p = coeffs.shape[-1] - 1
    out = coeffs.copy()
    flagged = np.asarray(flagged, dtype=int).reshape(-1)
    if p == 0 or flagged.size == 0:
        return out
    s = mode_scale(p)
    plain = with_ghosts(coeffs, boundary) / s
    rows = flagged + 1
    new = limit_triples(plain[..., rows - 1, :], plain[..., rows, :], plain[..., rows + 1, :])
    out[..., flagged, :] = new * s
    return out


def moment_limit(fields: DGField | Sequence[DGField], flagged, boundary="periodic"):
    """Apply the moment limiter componentwise; returns the same container shape."""
    if isinstance(fields, DGField):
        return fields.with_coeffs(moment_limit_coeffs(fields.coeffs, flagged, boundary))
    coeffs = moment_limit_coeffs(np.stack([f.coeffs for f in fields]), flagged, boundary)
    return [f.with_coeffs(c) for f, c in zip(fields, coeffs)]
