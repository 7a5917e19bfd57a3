"""Frequency-domain OFDM sensing channel.

Operates directly on the post-FFT subcarrier model: a scatterer with complex
amplitude ``alpha`` and round-trip delay ``tau`` multiplies subcarrier ``n``
by ``alpha * exp(-j 2 pi n df tau)``; the receive vector is the scatterer sum
times the payload symbols plus circular complex Gaussian noise.  Delays are
continuous (off-grid); nothing is quantized to bins at generation time.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ofdmsense.constellation import Constellation, SymbolBlock, draw_block

__all__ = [
    "SPEED_OF_LIGHT",
    "OfdmNumerology",
    "Scatterer",
    "SceneConfig",
    "SceneError",
    "SymbolFrame",
    "delay_to_range",
    "make_frame_sequence",
    "range_to_delay",
    "simulate_rx",
    "steering",
]

SPEED_OF_LIGHT = 299792458.0


class SceneError(ValueError):
    """Inconsistent numerology or scene configuration."""


def delay_to_range(tau) :
    """Round-trip delay (s) to monostatic range (m)."""
    return np.asarray(tau, dtype=float) * (SPEED_OF_LIGHT / 2.0)


def range_to_delay(range_m):
    """Monostatic range (m) to round-trip delay (s)."""
    return np.asarray(range_m, dtype=float) * (2.0 / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class OfdmNumerology:
    """OFDM system parameters.

    ``bandwidth`` defaults to ``n_subcarriers * subcarrier_spacing`` and is
    validated against it when given explicitly.  ``carrier_freq`` is carried
    as metadata only; the sensing model is baseband.
    """

    n_subcarriers: int
    subcarrier_spacing: float
    cp_duration: float
    n_symbols: int = 1
    carrier_freq: float = 2.4e9
    bandwidth: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.n_subcarriers < 2:
            raise SceneError("need at least 2 subcarriers")
        if self.subcarrier_spacing <= 0.0:
            raise SceneError("subcarrier spacing must be positive")
        if self.n_symbols < 1:
            raise SceneError("need at least 1 OFDM symbol")
        nominal = self.n_subcarriers * self.subcarrier_spacing
        if self.bandwidth is None:
            object.__setattr__(self, "bandwidth", nominal)
        elif abs(self.bandwidth - nominal) > 1e-6 * nominal:
            raise SceneError(
                f"bandwidth {self.bandwidth} inconsistent with N*df = {nominal}"
            )

    @classmethod
    def from_bandwidth(cls, n_subcarriers: int, bandwidth: float, cp_duration: float,
                       n_symbols: int = 1, carrier_freq: float = 2.4e9) -> "OfdmNumerology":
        return cls(
            n_subcarriers=n_subcarriers,
            subcarrier_spacing=bandwidth / n_subcarriers,
            cp_duration=cp_duration,
            n_symbols=n_symbols,
            carrier_freq=carrier_freq,
        )

    @property
    def delay_bin(self) -> float:
        """Nominal delay resolution cell 1/B in seconds."""
        return 1.0 / self.bandwidth

    @property
    def range_bin_m(self) -> float:
        """Nominal range resolution cell c/(2B) in meters."""
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)

    @property
    def unambiguous_delay(self) -> float:
        """Delay ambiguity interval 1/df in seconds."""
        return 1.0 / self.subcarrier_spacing


@dataclass(frozen=True)
class Scatterer:
    """Point scatterer: complex amplitude (path loss + RCS) and round-trip delay."""

    amplitude: complex
    delay: float

    @property
    def range_m(self) -> float:
        return float(delay_to_range(self.delay))

    @classmethod
    def from_range(cls, range_m: float, amplitude_db: float = 0.0,
                   phase_deg: float = 0.0) -> "Scatterer":
        amp = 10.0 ** (amplitude_db / 20.0) * np.exp(1j * np.deg2rad(phase_deg))
        return cls(amplitude=complex(amp), delay=float(range_to_delay(range_m)))


@dataclass(frozen=True)
class SceneConfig:
    """Numerology + scatterers + noise level + delay region of interest.

    ``roi_bounds`` is the (tau_min, tau_max) interval that all scatterer
    delays must lie in; tau_min may be negative when the region is expressed
    as a bilateral window around zero relative delay.
    """

    numerology: OfdmNumerology
    scatterers: tuple
    noise_var: float
    roi_bounds: tuple

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        object.__setattr__(self, "roi_bounds", (float(self.roi_bounds[0]), float(self.roi_bounds[1])))
        if self.noise_var < 0.0:
            raise SceneError("noise variance must be nonnegative")
        lo, hi = self.roi_bounds
        if not lo < hi:
            raise SceneError("roi_bounds must satisfy tau_min < tau_max")
        for s in self.scatterers:
            if not 0.0 <= s.delay < self.numerology.cp_duration:
                raise SceneError(
                    f"scatterer delay {s.delay} outside the CP-induced window "
                    f"[0, {self.numerology.cp_duration})"
                )
            if not lo <= s.delay <= hi:
                raise SceneError(f"scatterer delay {s.delay} outside roi {self.roi_bounds}")

    @property
    def n_scatterers(self) -> int:
        return len(self.scatterers)

    def truth_delays(self) -> np.ndarray:
        return np.array([s.delay for s in self.scatterers], dtype=float)

    def truth_ranges(self) -> np.ndarray:
        return delay_to_range(self.truth_delays())

    def snr_linear(self, k: int = 0) -> float:
        """Per-scatterer sensing SNR |alpha_k|^2 / sigma^2."""
        if self.noise_var == 0.0:
            return np.inf
        return abs(self.scatterers[k].amplitude) ** 2 / self.noise_var

    def with_noise_var(self, noise_var: float) -> "SceneConfig":
        return replace(self, noise_var=float(noise_var))

    def with_random_phases(self, rng: np.random.Generator) -> "SceneConfig":
        """Redraw each scatterer's phase uniformly, keeping magnitudes and delays."""
        newsc = []
        for s in self.scatterers:
            phase = rng.uniform(0.0, 2.0 * np.pi)
            newsc.append(Scatterer(amplitude=abs(s.amplitude) * np.exp(1j * phase), delay=s.delay))
        return replace(self, scatterers=tuple(newsc))


@dataclass(frozen=True)
class SymbolFrame:
    """One OFDM symbol: transmitted payload block and received subcarrier vector."""

    tx: SymbolBlock
    rx: np.ndarray

    def __post_init__(self):
        rx = np.asarray(self.rx, dtype=np.complex128)
        rx.setflags(write=False)
        object.__setattr__(self, "rx", rx)
        if rx.shape != self.tx.symbols.shape:
            raise ValueError("tx and rx must have identical length")


def steering(tau: float, n_subcarriers: int, spacing: float) -> np.ndarray:
    """Delay steering vector: entry n is exp(-j 2 pi n df tau)."""
    n = np.arange(n_subcarriers)
    return np.exp(-2j * np.pi * spacing * tau * n)


def simulate_rx(scene: SceneConfig, tx: SymbolBlock, rng: np.random.Generator) -> SymbolFrame:
    """Propagate one symbol block through the scene and add receiver noise.

    Noise is i.i.d. circular complex Gaussian with total variance
    ``scene.noise_var`` per subcarrier (split evenly between real and
    imaginary parts).
    """
    num = scene.numerology
    n = num.n_subcarriers
    if len(tx) != n:
        raise SceneError(f"block length {len(tx)} != {n} subcarriers")
    channel = np.zeros(n, dtype=np.complex128)
    for s in scene.scatterers:
        channel += s.amplitude * steering(s.delay, n, num.subcarrier_spacing)
    rx = channel * tx.symbols
    if scene.noise_var > 0.0:
        scale = np.sqrt(scene.noise_var / 2.0)
        rx = rx + scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return SymbolFrame(tx=tx, rx=rx)


def make_frame_sequence(
    scene: SceneConfig,
    constellation: Constellation,
    n_symbols: int,
    rng: np.random.Generator,
    block_normalize: bool = True,
) -> list:
    """Simulate a coherent processing interval of ``n_symbols`` OFDM symbols.

    Each symbol carries an independent payload block and independent noise;
    the channel is identical across the interval (negligible Doppler).
    """
    if n_symbols < 1:
        raise SceneError("need at least 1 symbol")
    frames = []
    for _ in range(n_symbols):
        tx = draw_block(constellation, scene.numerology.n_subcarriers, rng,
                        block_normalize=block_normalize)
        frames.append(simulate_rx(scene, tx, rng))
    return frames
