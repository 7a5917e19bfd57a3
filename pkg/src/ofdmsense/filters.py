"""Receive filters for payload-based sensing: matched, reciprocal, and the
region-of-interest mismatched filter (ROI-MMF).

Notation: ``x`` is one OFDM symbol's transmit vector of length N,
``e_m[n] = exp(+j 2 pi m n / N)`` the m-bin delay-shift phasor, and
``z_m = x * e_m`` the transmit replica shifted by m range bins.  Stacking the
replicas over the bilateral shift set S gives ``Z``, and the ROI-MMF solves

    min_w  ||Z^H w||^2 + lam * ||w||^2    s.t.  w^H x = N,

i.e. it minimizes the sidelobe energy across the region of interest under a
fixed mainlobe gain, with a ridge term that caps noise enhancement.  The
unique solution is

    w = N / (wt^H x) * wt,
    wt = (x - Z (lam*I + Z^H Z)^{-1} Z^H x) / lam,

which only requires factoring the |S| x |S| Gram system.  Because
``[Z^H Z]_{ij}`` and ``[Z^H x]_m`` are DFT values of the power sequence
``|x_n|^2``, the Gram system is assembled from a single length-N FFT;
``roi_mmf_direct`` solves the equivalent N x N system and serves as the
test oracle for that reduction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ofdmsense.channel import SymbolFrame
from ofdmsense.constellation import SymbolBlock

__all__ = [
    "FilterDesignError",
    "DegenerateGainError",
    "FilterDiagnostics",
    "NearZeroSymbolError",
    "ReceiveFilter",
    "ShiftSet",
    "SingularSystemError",
    "apply_filter",
    "mf_filter",
    "rf_filter",
    "roi_mmf",
    "roi_mmf_direct",
    "sidelobe_coeffs",
]

FILTER_KINDS = ("mf", "rf", "roi")

_RF_MIN_AMPLITUDE = 1e-6
_GAIN_EPS = 1e-9


class FilterDesignError(RuntimeError):
    """Base class for filter design failures."""


class NearZeroSymbolError(FilterDesignError):
    """Reciprocal filter requested on a block with a (near-)zero symbol."""


class DegenerateGainError(FilterDesignError):
    """Gain normalization undefined: |wt^H x| vanished."""


class SingularSystemError(FilterDesignError):
    """The Hermitian design system could not be factored."""


@dataclass(frozen=True)
class ShiftSet:
    """Bilateral set of integer bin shifts {-m_max..-1, 1..m_max} (0 excluded)."""

    m_max: int

    def __post_init__(self):
        if self.m_max < 1:
            raise ValueError("m_max must be at least 1")

    @property
    def shifts(self) -> np.ndarray:
        return np.concatenate(
            [np.arange(-self.m_max, 0), np.arange(1, self.m_max + 1)]
        )

    @property
    def cardinality(self) -> int:
        return 2 * self.m_max

    def validate_for(self, n: int) -> None:
        # shifts must stay distinct modulo N
        if self.m_max >= n / 2:
            raise ValueError(f"m_max = {self.m_max} must be < N/2 = {n / 2}")


@dataclass(frozen=True)
class FilterDiagnostics:
    """Design-time quantities of a ROI-MMF.

    ``rho_s`` is the normalized quadratic form
    ``x^H Z (lam*I + Z^H Z)^{-1} Z^H x / N`` in [0, 1); it jointly controls the
    residual sidelobe energy ``||Z^H w||^2`` and the squared filter norm via

        ||Z^H w||^2 + lam * ||w||^2 = N * lam / (1 - rho_s).
    """

    rho_s: float
    sidelobe_energy: float
    filter_norm_sq: float
    lam: float


@dataclass(frozen=True)
class ReceiveFilter:
    """Length-N receive taps with a kind tag and optional design diagnostics."""

    taps: np.ndarray
    kind: str
    diagnostics: FilterDiagnostics = None  # type: ignore[assignment]

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128)
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")

    def __len__(self) -> int:
        return int(self.taps.size)


def mf_filter(x: SymbolBlock) -> ReceiveFilter:
    """Matched filter: taps equal the transmit symbols.

    Meets the mainlobe gain constraint w^H x = N exactly for
    block-normalized symbols.
    """
    return ReceiveFilter(taps=x.symbols.copy(), kind="mf")


def rf_filter(x: SymbolBlock) -> ReceiveFilter:
    """Reciprocal filter: taps[n] = 1 / conj(x[n]).

    Removes the payload modulation entirely (w^H x = N by construction) at
    the price of amplifying noise on weak symbols.
    """
    mag = np.abs(x.symbols)
    if np.any(mag <= _RF_MIN_AMPLITUDE):
        raise NearZeroSymbolError(
            f"reciprocal filter undefined: min |x_n| = {mag.min():.3e}"
        )
    return ReceiveFilter(taps=1.0 / np.conj(x.symbols), kind="rf")


def _power_spectrum(x: np.ndarray) -> np.ndarray:
    """DFT of the symbol power sequence |x_n|^2.

    Entry k equals ``sum_n |x_n|^2 exp(-j 2 pi k n / N)``, from which both
    ``Z^H x`` (entries at the shift frequencies) and ``Z^H Z`` (entries at
    shift differences) are read off directly.
    """
    return np.fft.fft(np.abs(x) ** 2)


def _gram_system(x: np.ndarray, shifts: np.ndarray):
    """Return (q, gram) = (Z^H x, Z^H Z) assembled from one length-N FFT."""
    n = x.size
    spec = _power_spectrum(x)
    q = spec[np.mod(shifts, n)]
    diff = np.mod(shifts[:, None] - shifts[None, :], n)
    gram = spec[diff]
    return q, gram


def _normalize_and_diagnose(wt: np.ndarray, x: np.ndarray, lam: float):
    """Gain-normalize w = N/(wt^H x) * wt; return (w, rho_s, fft(conj(x)*w))."""
    n = x.size
    gain = np.vdot(wt, x)
    if abs(gain) < _GAIN_EPS * n:
        raise DegenerateGainError(f"|wt^H x| = {abs(gain):.3e} too small to normalize")
    w = (n / gain) * wt
    # rho_s via the exact identity wt^H x = (||x||^2 - N rho_s) / lam
    energy_x = float(np.sum(np.abs(x) ** 2))
    rho_s = (energy_x - lam * gain.real) / n
    sw = np.fft.fft(np.conj(x) * w)
    return w, rho_s, sw


def roi_mmf(x: SymbolBlock, shift_set: ShiftSet, lam: float = 0.1) -> ReceiveFilter:
    """Design the ROI mismatched filter from the small Gram system.

    Solves the |S| x |S| Hermitian positive-definite normal equations
    (guaranteed nonsingular for lam > 0) and reconstructs the taps with two
    FFTs; cost scales with |S| rather than N.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    sym = x.symbols
    n = sym.size
    shift_set.validate_for(n)
    shifts = shift_set.shifts

    q, gram = _gram_system(sym, shifts)
    a = gram + lam * np.eye(shifts.size)
    try:
        factor = scipy.linalg.cho_factor(a, lower=False, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"Gram system not positive definite: {exc}") from exc
    u = scipy.linalg.cho_solve(factor, q, check_finite=False)

    # Z u = x * (V u) with (V u)[n] = sum_m u_m e^{+j 2 pi m n / N}
    spectrum = np.zeros(n, dtype=np.complex128)
    spectrum[np.mod(shifts, n)] = u
    vu = n * np.fft.ifft(spectrum)
    wt = (sym - sym * vu) / lam

    w, rho_s, sw = _normalize_and_diagnose(wt, sym, lam)
    sidelobe_energy = float(np.sum(np.abs(sw[np.mod(shifts, n)]) ** 2))
    diag = FilterDiagnostics(
        rho_s=rho_s,
        sidelobe_energy=sidelobe_energy,
        filter_norm_sq=float(np.sum(np.abs(w) ** 2)),
        lam=float(lam),
    )
    return ReceiveFilter(taps=w, kind="roi", diagnostics=diag)


def roi_mmf_direct(x: SymbolBlock, shift_set: ShiftSet, lam: float = 0.1) -> ReceiveFilter:
    """Reference ROI-MMF solver working on the full N x N system.

    Builds Z explicitly and solves (Z Z^H + lam*I_N) wt = x.  Algebraically
    identical to :func:`roi_mmf`; kept as the oracle for the Gram reduction
    and for complexity comparisons.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    sym = x.symbols
    n = sym.size
    shift_set.validate_for(n)
    shifts = shift_set.shifts

    v = np.exp(2j * np.pi * np.outer(np.arange(n), shifts) / n)
    z = sym[:, None] * v
    a = z @ z.conj().T + lam * np.eye(n)
    try:
        wt = scipy.linalg.solve(a, sym, assume_a="pos", check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"full design system not positive definite: {exc}") from exc

    w, rho_s, _ = _normalize_and_diagnose(wt, sym, lam)
    diag = FilterDiagnostics(
        rho_s=rho_s,
        sidelobe_energy=float(np.sum(np.abs(z.conj().T @ w) ** 2)),
        filter_norm_sq=float(np.sum(np.abs(w) ** 2)),
        lam=float(lam),
    )
    return ReceiveFilter(taps=w, kind="roi", diagnostics=diag)


def apply_filter(w: ReceiveFilter, frame: SymbolFrame) -> np.ndarray:
    """Element-wise filtering: output[n] = conj(w[n]) * rx[n]."""
    if len(w) != frame.rx.size:
        raise ValueError(f"filter length {len(w)} != frame length {frame.rx.size}")
    return np.conj(w.taps) * frame.rx


def sidelobe_coeffs(w: ReceiveFilter, x: SymbolBlock, m_values) -> np.ndarray:
    """Sidelobe coefficients c_m = (1/N) sum_n conj(w_n) x_n e^{+j 2 pi m n / N}.

    ``c_0`` equals 1 for any gain-normalized filter; ``N^2 sum_{m in S} |c_m|^2``
    equals the design-time sidelobe energy ``||Z^H w||^2``.
    """
    sym = x.symbols
    n = sym.size
    m_values = np.atleast_1d(np.asarray(m_values, dtype=int))
    if np.any(np.abs(m_values) >= n / 2):
        raise ValueError("shift indices must lie strictly inside (-N/2, N/2)")
    if len(w) != n:
        raise ValueError("filter and block length mismatch")
    gains = np.fft.ifft(np.conj(w.taps) * sym)
    return gains[np.mod(m_values, n)]
