"""Scene and run configuration: JSON files, defaults, and unit conversions.

A scene file is a JSON object; every field has a CLI override::

    {
      "numerology": {"n_subcarriers": 256, "bandwidth_hz": 50e6,
                     "cp_duration_s": 0.64e-6, "n_symbols": 8,
                     "carrier_freq_hz": 2.4e9},
      "scatterers": [[60.9, 0.0, 0.0], [90.9, 0.0, 0.0]],
      "roi_m": [-150.0, 150.0],
      "snr_db": [10.0],
      "constellations": ["16qam"],
      "filters": ["mf", "rf", "roi"],
      "trials": 500, "seed": 12345, "lambda": 0.1, "order": "known"
    }

Scatterers are (range_m, amplitude_db, phase_deg) triples.  The region of
interest is given in meters and may extend to negative values (a bilateral
window in relative delay).
"""
from __future__ import annotations

import json
import math

from ofdmsense.channel import OfdmNumerology, Scatterer, SceneConfig, range_to_delay

__all__ = [
    "ConfigError",
    "default_numerology",
    "default_scene",
    "load_config_file",
    "roi_meters_to_delay",
    "roi_to_m_max",
    "scene_from_dict",
]

DEFAULT_SEED = 12345


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def default_numerology(n_symbols: int = 8) -> OfdmNumerology:
    """Simulation default: N = 256 subcarriers over 50 MHz, 0.64 us CP."""
    return OfdmNumerology.from_bandwidth(
        n_subcarriers=256,
        bandwidth=50e6,
        cp_duration=0.64e-6,
        n_symbols=n_symbols,
        carrier_freq=2.4e9,
    )


def default_scene(n_targets: int = 2, numerology: OfdmNumerology = None,
                  roi_m=(-150.0, 150.0)) -> SceneConfig:
    """Equal-power targets at 60.9 m (and 90.9 m) inside a +/-150 m region."""
    num = numerology or default_numerology()
    ranges = [60.9, 90.9][:n_targets]
    scatterers = tuple(Scatterer.from_range(r) for r in ranges)
    return SceneConfig(
        numerology=num,
        scatterers=scatterers,
        noise_var=0.1,
        roi_bounds=roi_meters_to_delay(roi_m),
    )


def roi_meters_to_delay(roi_m) -> tuple:
    lo, hi = float(roi_m[0]), float(roi_m[1])
    if not lo < hi:
        raise ConfigError(f"roi {roi_m} must satisfy min < max")
    return (float(range_to_delay(lo)), float(range_to_delay(hi)))


def roi_to_m_max(roi_m, bandwidth: float) -> int:
    """Largest bin shift covering a region of interest given in meters.

    One bin spans c/(2B) meters; the bilateral shift set must reach the
    outermost ROI boundary.
    """
    from ofdmsense.channel import SPEED_OF_LIGHT

    bin_m = SPEED_OF_LIGHT / (2.0 * bandwidth)
    extent = max(abs(float(roi_m[0])), abs(float(roi_m[1])))
    m_max = int(math.ceil(extent / bin_m))
    if m_max < 1:
        raise ConfigError(f"roi {roi_m} narrower than one range bin ({bin_m:.3f} m)")
    return m_max


def _numerology_from_dict(d: dict, n_symbols_override: int = None) -> OfdmNumerology:
    try:
        n = int(d["n_subcarriers"])
        cp = float(d["cp_duration_s"])
    except KeyError as exc:
        raise ConfigError(f"numerology missing field {exc}") from exc
    n_symbols = int(n_symbols_override or d.get("n_symbols", 1))
    carrier = float(d.get("carrier_freq_hz", 2.4e9))
    if "subcarrier_spacing_hz" in d:
        spacing = float(d["subcarrier_spacing_hz"])
        num = OfdmNumerology(n, spacing, cp, n_symbols, carrier,
                             bandwidth=float(d["bandwidth_hz"]) if "bandwidth_hz" in d else None)
    elif "bandwidth_hz" in d:
        num = OfdmNumerology.from_bandwidth(n, float(d["bandwidth_hz"]), cp,
                                            n_symbols, carrier)
    else:
        raise ConfigError("numerology needs bandwidth_hz or subcarrier_spacing_hz")
    return num


def scene_from_dict(d: dict) -> SceneConfig:
    """Build a SceneConfig from a parsed scene/run dictionary."""
    if "numerology" not in d:
        raise ConfigError("config missing 'numerology'")
    num = _numerology_from_dict(d["numerology"])
    raw = d.get("scatterers")
    if not raw:
        raise ConfigError("config missing 'scatterers'")
    scatterers = []
    for entry in raw:
        try:
            range_m, amp_db, phase_deg = entry
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"scatterer {entry!r} must be [range_m, amplitude_db, phase_deg]"
            ) from exc
        scatterers.append(Scatterer.from_range(float(range_m), float(amp_db), float(phase_deg)))
    roi_m = d.get("roi_m", (-150.0, 150.0))
    noise_var = float(d.get("noise_var", 0.1))
    try:
        return SceneConfig(
            numerology=num,
            scatterers=tuple(scatterers),
            noise_var=noise_var,
            roi_bounds=roi_meters_to_delay(roi_m),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path) -> dict:
    """Load a JSON run configuration; raises ConfigError on malformed input."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data
