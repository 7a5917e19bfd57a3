"""Modulation constellations, payload symbol blocks, and moment statistics.

All downstream closed-form expressions are driven by three scalar statistics
of the symbol alphabet: the fourth-order moment ``mu4 = E[|x|^4]``, the
inverse second-order moment ``nu_minus2 = E[|x|^-2]``, and the centered
power moment ``kappa2 = E[(|x|^2 - 1)^2]``.  Moments here are exact
enumerations over the point set under uniform symbol probabilities; no
sampling is involved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CONSTELLATION_KINDS",
    "Constellation",
    "ConstellationError",
    "ConstellationMoments",
    "SymbolBlock",
    "draw_block",
    "make_constellation",
    "moments",
    "parse_constellation",
]

CONSTELLATION_KINDS = ("qpsk", "16qam", "32qam", "64qam", "128qam", "256qam", "apsk")

_SQUARE_ORDERS = {"16qam": 16, "64qam": 64, "256qam": 256}
_CROSS_ORDERS = {"32qam": 32, "128qam": 128}

_MEAN_TOL = 1e-12
_POWER_TOL = 1e-12
_MIN_POINT_POWER = 1e-9
_BLOCK_NORM_TOL = 1e-9


class ConstellationError(ValueError):
    """Unknown constellation kind, bad ring spec, or a normalization violation."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Constellation:
    """A zero-mean, unit-average-power complex symbol alphabet.

    Attributes:
        kind: one of ``CONSTELLATION_KINDS``.
        points: ordered complex points, mean 0 and mean ``|p|^2`` of 1.
        is_constant_modulus: True iff every point has the same magnitude.
    """

    kind: str
    points: np.ndarray
    is_constant_modulus: bool

    def __post_init__(self):
        pts = _readonly(np.asarray(self.points, dtype=np.complex128))
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ConstellationError("constellation needs at least two points")
        if abs(pts.mean()) > _MEAN_TOL:
            raise ConstellationError(f"points are not zero-mean: |mean| = {abs(pts.mean()):.3e}")
        power = np.abs(pts) ** 2
        if abs(power.mean() - 1.0) > _POWER_TOL:
            raise ConstellationError(f"average power is {power.mean():.15f}, expected 1")
        if power.min() < _MIN_POINT_POWER:
            raise ConstellationError("constellation contains a (near-)zero-amplitude point")
        cm = np.ptp(power) <= _POWER_TOL
        if cm != self.is_constant_modulus:
            raise ConstellationError("is_constant_modulus flag inconsistent with the point set")

    @property
    def order(self) -> int:
        return int(self.points.size)


@dataclass(frozen=True)
class ConstellationMoments:
    """Scalar statistics of a unit-power alphabet: mu4, nu_minus2, kappa2."""

    mu4: float
    nu_minus2: float
    kappa2: float

    def __post_init__(self):
        # Jensen lower bounds given E[|x|^2] = 1.
        if self.mu4 < 1.0 - 1e-12 or self.nu_minus2 < 1.0 - 1e-12:
            raise ConstellationError("moments below the unit-power Jensen bounds")
        if self.kappa2 < -1e-12:
            raise ConstellationError("kappa2 must be nonnegative")


@dataclass(frozen=True)
class SymbolBlock:
    """One OFDM symbol's worth of payload symbols.

    When ``block_normalized`` the symbol energy satisfies ``sum |x_n|^2 = N``
    exactly, so the matched filter meets the mainlobe gain constraint without
    rescaling.
    """

    symbols: np.ndarray
    block_normalized: bool

    def __post_init__(self):
        sym = _readonly(np.asarray(self.symbols, dtype=np.complex128))
        object.__setattr__(self, "symbols", sym)
        if sym.ndim != 1 or sym.size < 1:
            raise ValueError("symbol block must be a nonempty 1-D vector")
        if self.block_normalized:
            n = sym.size
            energy = float(np.sum(np.abs(sym) ** 2))
            if abs(energy - n) > _BLOCK_NORM_TOL * max(1.0, n):
                raise ValueError(f"block flagged normalized but sum|x|^2 = {energy} != {n}")

    def __len__(self) -> int:
        return int(self.symbols.size)


def _square_grid(order: int) -> np.ndarray:
    side = int(round(np.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    re, im = np.meshgrid(levels, levels)
    return (re + 1j * im).ravel()


def _cross_grid(order: int) -> np.ndarray:
    # Standard cross constellations: corner points removed from the
    # 6x6 (32-QAM) and 12x12 (128-QAM) odd-integer grids.
    if order == 32:
        levels = np.arange(-5, 6, 2, dtype=float)
        corner = 5
    else:
        levels = np.arange(-11, 12, 2, dtype=float)
        corner = 9
    re, im = np.meshgrid(levels, levels)
    pts = (re + 1j * im).ravel()
    keep = ~((np.abs(pts.real) >= corner) & (np.abs(pts.imag) >= corner))
    return pts[keep]


def _apsk_points(rings) -> np.ndarray:
    arcs = []
    for ring in rings:
        try:
            radius, count, phase_deg = ring
        except (TypeError, ValueError) as exc:
            raise ConstellationError(f"bad APSK ring {ring!r}: expected (radius, count, phase_deg)") from exc
        radius = float(radius)
        count = int(count)
        if radius <= 0.0:
            raise ConstellationError("APSK ring radius must be positive")
        if count < 1:
            raise ConstellationError("APSK ring needs at least one point")
        angles = 2.0 * np.pi * np.arange(count) / count + np.deg2rad(float(phase_deg))
        arcs.append(radius * np.exp(1j * angles))
    if not arcs:
        raise ConstellationError("APSK spec needs at least one ring")
    return np.concatenate(arcs)


def make_constellation(kind: str, apsk_rings=None) -> Constellation:
    """Build a normalized constellation of the given kind.

    ``apsk_rings`` is a sequence of (radius, point_count, phase_offset_deg)
    triples, required when ``kind == "apsk"``.  Square QAM uses the regular
    odd-integer grid; 32/128-QAM use the standard cross grids.
    """
    kind = kind.lower()
    if kind == "qpsk":
        raw = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    elif kind in _SQUARE_ORDERS:
        raw = _square_grid(_SQUARE_ORDERS[kind])
    elif kind in _CROSS_ORDERS:
        raw = _cross_grid(_CROSS_ORDERS[kind])
    elif kind == "apsk":
        if apsk_rings is None:
            raise ConstellationError("kind 'apsk' requires a ring spec")
        raw = _apsk_points(apsk_rings)
    else:
        raise ConstellationError(f"unknown constellation kind {kind!r}")

    pts = raw / np.sqrt(np.mean(np.abs(raw) ** 2))
    power = np.abs(pts) ** 2
    return Constellation(kind=kind, points=pts, is_constant_modulus=bool(np.ptp(power) <= _POWER_TOL))


def parse_constellation(label: str) -> Constellation:
    """Parse a CLI constellation label.

    Accepts the named kinds plus the APSK grammar
    ``apsk:r1xn1@p1,r2xn2@p2,...`` where ``r`` is the ring radius, ``n`` the
    point count, and the optional ``@p`` a phase offset in degrees.
    """
    label = label.strip().lower()
    if not label.startswith("apsk"):
        return make_constellation(label)
    _, _, spec = label.partition(":")
    if not spec:
        raise ConstellationError("APSK label must look like 'apsk:r1xn1@p1,...'")
    rings = []
    for part in spec.split(","):
        body, _, phase = part.partition("@")
        radius, sep, count = body.partition("x")
        if not sep:
            raise ConstellationError(f"bad APSK ring {part!r} in {label!r}")
        try:
            rings.append((float(radius), int(count), float(phase) if phase else 0.0))
        except ValueError as exc:
            raise ConstellationError(f"bad APSK ring {part!r} in {label!r}") from exc
    return make_constellation("apsk", apsk_rings=rings)


def moments(c: Constellation) -> ConstellationMoments:
    """Exact alphabet moments under uniform symbol probabilities."""
    power = np.abs(c.points) ** 2
    return ConstellationMoments(
        mu4=float(np.mean(power**2)),
        nu_minus2=float(np.mean(1.0 / power)),
        kappa2=float(np.mean((power - 1.0) ** 2)),
    )


def draw_block(
    c: Constellation,
    n: int,
    rng: np.random.Generator,
    block_normalize: bool = True,
) -> SymbolBlock:
    """Draw ``n`` i.i.d. uniform payload symbols from the alphabet.

    With ``block_normalize`` the block is rescaled so that
    ``sum |x_n|^2 = n`` exactly.
    """
    if n < 1:
        raise ValueError("block length must be at least 1")
    idx = rng.integers(0, c.order, size=n)
    sym = c.points[idx].copy()
    if block_normalize:
        sym *= np.sqrt(n / np.sum(np.abs(sym) ** 2))
    return SymbolBlock(symbols=sym, block_normalized=block_normalize)
