"""Command-line interface.

Subcommands:
    theory    closed-form efficiency grid (constellation x filter)
    profile   simulated range profiles for the three filters, side by side
    simulate  Monte Carlo RMSE/efficiency sweep over SNR cells
    ingest    offline processing of recorded tx/rx frame files

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from ofdmsense import theory
from ofdmsense.channel import OfdmNumerology, Scatterer, SceneConfig, SceneError
from ofdmsense.constellation import (
    ConstellationError,
    moments,
    parse_constellation,
)
from ofdmsense.estimator import (
    InvalidPencilParamError,
    RangeProfile,
    RankDeficientError,
    average_cpi,
    range_profile,
)
from ofdmsense.filters import (
    FilterDesignError,
    ShiftSet,
    apply_filter,
    mf_filter,
    rf_filter,
    roi_mmf,
)
from ofdmsense.frameio import FrameFormatError, NumerologyMismatchError, read_frames
from ofdmsense.montecarlo import McConfig, emit_results, render_results, run_sweep
from ofdmsense.scenes import (
    DEFAULT_SEED,
    ConfigError,
    default_numerology,
    load_config_file,
    roi_meters_to_delay,
    roi_to_m_max,
    scene_from_dict,
)

PROFILE_COLUMNS = ("range_m", "mag_db_mf", "mag_db_rf", "mag_db_roi")
THEORY_CONSTELLATIONS = ("qpsk", "16qam", "32qam", "64qam", "128qam", "256qam")


def _parse_float_list(text: str):
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _parse_range_pair(text: str):
    vals = _parse_float_list(text)
    if len(vals) != 2:
        raise ConfigError(f"expected MIN,MAX but got {text!r}")
    return vals


def _write_or_print(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# scene assembly shared by profile/simulate


def _scene_from_args(args, default_targets):
    if args.config:
        cfg = load_config_file(args.config)
        scene = scene_from_dict(cfg)
        roi_m = tuple(cfg.get("roi_m", (-150.0, 150.0)))
        return scene, roi_m, cfg
    num = OfdmNumerology.from_bandwidth(
        n_subcarriers=args.n,
        bandwidth=args.bandwidth,
        cp_duration=args.cp_us * 1e-6,
        n_symbols=args.symbols,
    )
    targets = _parse_float_list(args.targets) if args.targets else default_targets
    if args.roi_bins is not None:
        half = args.roi_bins * num.range_bin_m
        roi_m = (-half, half)
    else:
        roi_m = _parse_range_pair(args.roi_meters)
    scene = SceneConfig(
        numerology=num,
        scatterers=tuple(Scatterer.from_range(r) for r in targets),
        noise_var=1.0,  # overridden per SNR below
        roi_bounds=roi_meters_to_delay(roi_m),
    )
    return scene, roi_m, {}


def _m_max_from_args(args, roi_m, bandwidth: float) -> int:
    if args.roi_bins is not None:
        if args.roi_bins < 1:
            raise ConfigError("--roi-bins must be at least 1")
        return args.roi_bins
    return roi_to_m_max(roi_m, bandwidth)


# ---------------------------------------------------------------------------
# subcommands


def cmd_theory(args) -> int:
    labels = (
        tuple(args.constellation.split(","))
        if args.constellation
        else THEORY_CONSTELLATIONS
    )
    s_card = 2 * args.roi_bins
    rows = []
    for label in labels:
        m = moments(parse_constellation(label))
        rows.append(
            (
                label,
                theory.eta_mf(m, args.rho_tot),
                theory.eta_rf(m),
                theory.eta_roi(m, args.n, s_card),
            )
        )
    columns = ("constellation", "eta_mf", "eta_rf", "eta_roi")
    if args.format == "csv":
        _write_or_print(_csv_text(columns, rows), args.out)
    else:
        lines = ["{:>14} {:>8} {:>8} {:>8}".format(*columns)]
        for label, emf, erf, eroi in rows:
            lines.append(f"{label:>14} {emf:8.3f} {erf:8.3f} {eroi:8.3f}")
        _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def _profiles_for_frames(frames, numerology, m_max, lam, zero_pad, coherent):
    """Range profiles of the three filters for one frame sequence.

    ``coherent`` averages the filtered subcarrier vectors before the
    transform (simulation path); otherwise per-symbol transform magnitudes
    are averaged (measured path, where frame-to-frame phase coherence is not
    guaranteed).
    """
    shift_set = ShiftSet(m_max)
    designs = {
        "mf": mf_filter,
        "rf": rf_filter,
        "roi": lambda b: roi_mmf(b, shift_set, lam),
    }
    n_fft = zero_pad * numerology.n_subcarriers
    out = {}
    for kind, design in designs.items():
        if coherent:
            v = average_cpi([apply_filter(design(f.tx), f) for f in frames])
            out[kind] = range_profile(v, numerology, zero_pad)
        else:
            acc = np.zeros(n_fft)
            for f in frames:
                acc += np.abs(np.fft.ifft(apply_filter(design(f.tx), f), n=n_fft))
            acc /= len(frames)
            peak = acc.max()
            if peak == 0.0:
                raise ValueError("all-zero frames have no range profile")
            with np.errstate(divide="ignore"):
                mag_db = 20.0 * np.log10(acc / peak)
            step = numerology.range_bin_m / zero_pad
            out[kind] = RangeProfile(
                ranges=step * np.arange(n_fft),
                magnitude_db=mag_db,
                zero_pad_factor=zero_pad,
            )
    return out


def ingest_profiles(frames, numerology, m_max, lam=0.1, zero_pad=8):
    """Measured-data pipeline: per-record filter design, magnitude-averaged
    profiles across all records."""
    return _profiles_for_frames(frames, numerology, m_max, lam, zero_pad, coherent=False)


def _profile_csv(profiles) -> str:
    ranges = profiles["mf"].ranges
    rows = zip(
        ranges,
        profiles["mf"].magnitude_db,
        profiles["rf"].magnitude_db,
        profiles["roi"].magnitude_db,
    )
    return _csv_text(PROFILE_COLUMNS, rows)


def cmd_profile(args) -> int:
    from ofdmsense.channel import make_frame_sequence

    scene, roi_m, _ = _scene_from_args(args, default_targets=(60.9,))
    ref = abs(scene.scatterers[0].amplitude) ** 2
    scene = scene.with_noise_var(ref / 10.0 ** (args.snr_db / 10.0))
    m_max = _m_max_from_args(args, roi_m, scene.numerology.bandwidth)
    const = parse_constellation(args.constellation)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0x70726F66]))
    frames = make_frame_sequence(scene, const, scene.numerology.n_symbols, rng)
    profiles = _profiles_for_frames(
        frames, scene.numerology, m_max, args.lam, args.zero_pad, coherent=True
    )
    _write_or_print(_profile_csv(profiles), args.out)
    return 0


def cmd_simulate(args) -> int:
    scene, roi_m, cfg = _scene_from_args(args, default_targets=(60.9, 90.9))
    m_max = _m_max_from_args(args, roi_m, scene.numerology.bandwidth)
    constellations = tuple(
        (args.constellation or ",".join(cfg.get("constellations", ["16qam"]))).split(",")
    )
    filters = tuple((args.filter or ",".join(cfg.get("filters", ["mf", "rf", "roi"]))).split(","))
    snr_grid = (
        _parse_float_list(args.snr_db)
        if args.snr_db
        else tuple(cfg.get("snr_db", (10.0,)))
    )
    order = args.order or cfg.get("order", "known")
    if order == "known":
        known_k, threshold = True, 20.0
    elif order.startswith("threshold:"):
        known_k = False
        try:
            threshold = float(order.partition(":")[2])
        except ValueError as exc:
            raise ConfigError(f"bad --order {order!r}") from exc
    else:
        raise ConfigError(f"bad --order {order!r}; use 'known' or 'threshold:<db>'")
    config = McConfig(
        scene=scene,
        constellations=constellations,
        filters=filters,
        snr_db_grid=snr_grid,
        n_trials=args.trials if args.trials is not None else int(cfg.get("trials", 100)),
        base_seed=args.seed,
        known_k=known_k,
        m_max=m_max,
        lam=args.lam,
        pencil_param=args.pencil_l,
        order_threshold_db=threshold,
        n_workers=args.workers,
    )
    summary = run_sweep(config)
    if args.out:
        emit_results(summary, args.format, args.out)
    else:
        sys.stdout.write(render_results(summary, args.format))
    return 0


def cmd_ingest(args) -> int:
    header, frames = read_frames(args.path)
    numerology = OfdmNumerology(
        n_subcarriers=header.n_subcarriers,
        subcarrier_spacing=header.subcarrier_spacing,
        cp_duration=1.0 / header.subcarrier_spacing,
        n_symbols=max(1, header.n_records),
        carrier_freq=header.carrier_freq,
    )
    if args.roi_bins is not None:
        m_max = args.roi_bins
    else:
        m_max = roi_to_m_max(
            _parse_range_pair(args.roi_meters), numerology.bandwidth
        )
    if m_max >= header.n_subcarriers / 2:
        raise NumerologyMismatchError(
            f"shift extent {m_max} incompatible with N = {header.n_subcarriers} "
            f"from the frame header (must be < N/2)"
        )
    profiles = ingest_profiles(frames, numerology, m_max, args.lam, args.zero_pad)
    _write_or_print(_profile_csv(profiles), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_scene_flags(p: argparse.ArgumentParser, default_targets: str):
    p.add_argument("--config", help="JSON scene/run configuration file")
    p.add_argument("--n", type=int, default=256, help="subcarrier count")
    p.add_argument("--bandwidth", type=float, default=50e6, help="bandwidth in Hz")
    p.add_argument("--cp-us", type=float, default=0.64, help="cyclic prefix in microseconds")
    p.add_argument("--symbols", type=int, default=8, help="OFDM symbols per CPI")
    p.add_argument("--targets", default=default_targets,
                   help="comma list of target ranges in meters")
    p.add_argument("--roi-meters", default="-150,150",
                   help="region of interest MIN,MAX in meters")
    p.add_argument("--roi-bins", type=int, default=None,
                   help="largest bin shift of the bilateral suppression set "
                        "(overrides --roi-meters)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1,
                   help="ridge weight of the ROI filter design")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"base seed (default {DEFAULT_SEED})")
    p.add_argument("--out", help="output path (stdout when omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofdmsense",
        description="Payload-based OFDM sensing: filter design, range estimation, theory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="closed-form efficiency grid")
    p.add_argument("--rho-tot", type=float, default=10.0,
                   help="aggregate interference SNR (linear)")
    p.add_argument("--n", type=int, default=256, help="subcarrier count")
    p.add_argument("--roi-bins", type=int, default=50,
                   help="largest bin shift of the bilateral suppression set")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--constellation", help="comma list (default: the six built-ins)")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("profile", help="range profiles of the three filters")
    _add_scene_flags(p, default_targets="60.9")
    p.add_argument("--constellation", default="16qam")
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--zero-pad", type=int, default=8)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("simulate", help="Monte Carlo RMSE/efficiency sweep")
    _add_scene_flags(p, default_targets="60.9,90.9")
    p.add_argument("--constellation", help="comma list of constellation labels")
    p.add_argument("--filter", help="comma list out of mf,rf,roi")
    p.add_argument("--snr-db", help="comma list of per-target SNRs in dB")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--order", help="'known' or 'threshold:<db>'")
    p.add_argument("--pencil-l", type=int, default=None,
                   help="matrix pencil parameter (default round(N/3))")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json", "text"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="process a recorded frame file")
    p.add_argument("path")
    p.add_argument("--roi-meters", default="-150,150")
    p.add_argument("--roi-bins", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--zero-pad", type=int, default=8)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.set_defaults(func=cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConstellationError, ConfigError, SceneError, InvalidPencilParamError,
            theory.ParameterOutOfRegimeError) as exc:
        print(f"ofdmsense: configuration error: {exc}", file=sys.stderr)
        return 2
    except FrameFormatError as exc:
        print(f"ofdmsense: data format error: {exc}", file=sys.stderr)
        return 3
    except (FilterDesignError, RankDeficientError, np.linalg.LinAlgError) as exc:
        print(f"ofdmsense: numerical failure: {exc}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
