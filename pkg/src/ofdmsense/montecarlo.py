"""Seeded Monte Carlo harness for RMSE and efficiency sweeps.

Every trial is a pure function of (base_seed, constellation, SNR cell,
trial index): the per-trial bit stream is derived with a counter-based seed
sequence, so sweeps reproduce bit-for-bit regardless of execution order or
worker count.  The filter kind is deliberately excluded from the seed
derivation: all filters of a cell see the same payloads, channel phases, and
noise, which keeps filter comparisons paired.
"""
from __future__ import annotations

import csv
import io
import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ofdmsense import theory
from ofdmsense.channel import SceneConfig, delay_to_range, make_frame_sequence
from ofdmsense.constellation import moments, parse_constellation
from ofdmsense.estimator import (
    RankDeficientError,
    associate_and_score,
    average_cpi,
    default_pencil_param,
    hankel_singular_values,
    matrix_pencil,
    select_order,
)
from ofdmsense.filters import ShiftSet, apply_filter, mf_filter, rf_filter, roi_mmf

__all__ = [
    "CellSummary",
    "McCell",
    "McConfig",
    "McSummary",
    "TrialResult",
    "RESULT_COLUMNS",
    "emit_results",
    "read_results",
    "run_sweep",
    "run_trial",
    "trial_seed",
]

RESULT_COLUMNS = (
    "constellation",
    "filter",
    "snr_db",
    "rmse_m",
    "eta_num",
    "eta_theory",
    "crb_sqrt_m",
    "miss_rate",
    "trials",
)


@dataclass(frozen=True)
class McCell:
    """One sweep cell: (constellation, filter, per-target SNR)."""

    constellation: str
    filter_kind: str
    snr_db: float


@dataclass(frozen=True)
class McConfig:
    """Sweep configuration over a fixed scene."""

    scene: SceneConfig
    constellations: tuple
    filters: tuple
    snr_db_grid: tuple
    n_trials: int
    base_seed: int = 12345
    known_k: bool = True
    m_max: int = 50
    lam: float = 0.1
    pencil_param: int = None  # type: ignore[assignment]
    order_threshold_db: float = 20.0
    n_workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "constellations", tuple(self.constellations))
        object.__setattr__(self, "filters", tuple(self.filters))
        object.__setattr__(self, "snr_db_grid", tuple(float(s) for s in self.snr_db_grid))
        if self.n_trials < 1:
            raise ValueError("need at least one trial")
        if not self.constellations or not self.filters or not self.snr_db_grid:
            raise ValueError("constellation, filter, and SNR grids must be nonempty")
        for f in self.filters:
            if f not in ("mf", "rf", "roi"):
                raise ValueError(f"unknown filter kind {f!r}")

    def cells(self):
        return [
            McCell(c, f, s)
            for c in self.constellations
            for f in self.filters
            for s in self.snr_db_grid
        ]


@dataclass(frozen=True)
class TrialResult:
    """Per-trial association outcome: one squared range error (m^2) per target,
    NaN marking a miss."""

    cell: McCell
    trial_index: int
    sq_errors_m2: tuple
    mean_rho_s: float


@dataclass(frozen=True)
class CellSummary:
    constellation: str
    filter: str
    snr_db: float
    rmse_m: float
    eta_num: float
    eta_theory: float
    crb_sqrt_m: float
    miss_rate: float
    trials: int
    mean_rho_s: float
    n_effective: int

    def row(self) -> dict:
        return {c: getattr(self, c) for c in RESULT_COLUMNS}


@dataclass(frozen=True)
class McSummary:
    cells: tuple

    def find(self, constellation: str, filter_kind: str, snr_db: float) -> CellSummary:
        for c in self.cells:
            if (
                c.constellation == constellation
                and c.filter == filter_kind
                and c.snr_db == snr_db
            ):
                return c
        raise KeyError((constellation, filter_kind, snr_db))


def trial_seed(base_seed: int, cell: McCell, trial_index: int) -> np.random.SeedSequence:
    """Counter-based seed: filter kind excluded so filters share randomness."""
    key = f"{cell.constellation}|{cell.snr_db:.8g}".encode()
    return np.random.SeedSequence([int(base_seed), zlib.crc32(key), int(trial_index)])


def _design(filter_kind: str, block, shift_set: ShiftSet, lam: float):
    if filter_kind == "mf":
        return mf_filter(block)
    if filter_kind == "rf":
        return rf_filter(block)
    return roi_mmf(block, shift_set, lam)


def run_trial(config: McConfig, cell: McCell, trial_index: int) -> TrialResult:
    """Simulate, filter, combine, and estimate one CPI; score against truth.

    Estimator failures (rank-deficient data, zero selected order) are scored
    as misses rather than aborting the sweep.
    """
    rng = np.random.default_rng(trial_seed(config.base_seed, cell, trial_index))
    const = parse_constellation(cell.constellation)

    snr_lin = 10.0 ** (cell.snr_db / 10.0)
    ref_power = abs(config.scene.scatterers[0].amplitude) ** 2
    scene = config.scene.with_noise_var(ref_power / snr_lin).with_random_phases(rng)
    num = scene.numerology

    frames = make_frame_sequence(scene, const, num.n_symbols, rng)
    shift_set = ShiftSet(config.m_max)
    outs = []
    rhos = []
    for fr in frames:
        w = _design(cell.filter_kind, fr.tx, shift_set, config.lam)
        outs.append(apply_filter(w, fr))
        if w.diagnostics is not None:
            rhos.append(w.diagnostics.rho_s)
    v = average_cpi(outs)

    pencil = config.pencil_param or default_pencil_param(num.n_subcarriers)
    truth_r = scene.truth_ranges()
    if config.known_k:
        k = scene.n_scatterers
    else:
        k = select_order(hankel_singular_values(v, pencil), config.order_threshold_db)
        k = min(k, pencil, num.n_subcarriers - pencil)
    est_r = np.array([])
    if k >= 1:
        try:
            est = matrix_pencil(v, num.subcarrier_spacing, k, pencil,
                                roi_bounds=scene.roi_bounds)
            est_r = est.ranges_m()
        except RankDeficientError:
            pass
    sq = associate_and_score(est_r, truth_r)
    mean_rho = float(np.mean(rhos)) if rhos else float("nan")
    return TrialResult(
        cell=cell,
        trial_index=trial_index,
        sq_errors_m2=tuple(float(e) for e in sq),
        mean_rho_s=mean_rho,
    )


def _run_chunk(config: McConfig, cell: McCell, lo: int, hi: int):
    return [run_trial(config, cell, t) for t in range(lo, hi)]


def _summarize_cell(config: McConfig, cell: McCell, results) -> CellSummary:
    results = sorted(results, key=lambda r: r.trial_index)
    num = config.scene.numerology
    snr_lin = 10.0 ** (cell.snr_db / 10.0)
    sigma2 = abs(config.scene.scatterers[0].amplitude) ** 2 / snr_lin
    mom = moments(parse_constellation(cell.constellation))

    per_target = np.array([r.sq_errors_m2 for r in results], dtype=float)
    scored = per_target[~np.isnan(per_target)]
    n_total = per_target.size
    n_eff = int(scored.size)
    rmse = float(np.sqrt(scored.mean())) if n_eff else float("nan")

    etas, eta_theories, crb_sqrts = [], [], []
    powers = np.array([abs(s.amplitude) ** 2 for s in config.scene.scatterers])
    for k in range(config.scene.n_scatterers):
        snr_k = powers[k] / sigma2
        crb_k = theory.crb_range(snr_k, num.n_subcarriers, num.subcarrier_spacing,
                                 num.n_symbols)
        crb_sqrts.append(np.sqrt(crb_k))
        rho_k = (powers.sum() - powers[k]) / sigma2
        if cell.filter_kind == "mf":
            eta_theories.append(theory.eta_mf(mom, rho_k))
        elif cell.filter_kind == "rf":
            eta_theories.append(theory.eta_rf(mom))
        else:
            eta_theories.append(theory.eta_roi(mom, num.n_subcarriers, 2 * config.m_max))
        errs_k = per_target[:, k]
        errs_k = errs_k[~np.isnan(errs_k)]
        if errs_k.size:
            etas.append(np.sqrt(errs_k.mean() / crb_k))

    rho_means = np.array([r.mean_rho_s for r in results], dtype=float)
    rho_means = rho_means[~np.isnan(rho_means)]
    return CellSummary(
        constellation=cell.constellation,
        filter=cell.filter_kind,
        snr_db=cell.snr_db,
        rmse_m=rmse,
        eta_num=float(np.mean(etas)) if etas else float("nan"),
        eta_theory=float(np.mean(eta_theories)),
        crb_sqrt_m=float(np.mean(crb_sqrts)),
        miss_rate=float(1.0 - n_eff / n_total),
        trials=len(results),
        mean_rho_s=float(rho_means.mean()) if rho_means.size else float("nan"),
        n_effective=n_eff,
    )


def run_sweep(config: McConfig) -> McSummary:
    """Execute all cells x trials and aggregate deterministically.

    The fold is keyed by trial index, so serial and multi-worker runs give
    bit-identical summaries.
    """
    cells = config.cells()
    per_cell = {cell: [] for cell in cells}
    if config.n_workers <= 1:
        for cell in cells:
            per_cell[cell] = [run_trial(config, cell, t) for t in range(config.n_trials)]
    else:
        chunk = max(1, config.n_trials // (4 * config.n_workers))
        jobs = []
        with ProcessPoolExecutor(max_workers=config.n_workers) as pool:
            for cell in cells:
                for lo in range(0, config.n_trials, chunk):
                    hi = min(lo + chunk, config.n_trials)
                    jobs.append((cell, pool.submit(_run_chunk, config, cell, lo, hi)))
            for cell, fut in jobs:
                per_cell[cell].extend(fut.result())
    return McSummary(
        cells=tuple(_summarize_cell(config, cell, per_cell[cell]) for cell in cells)
    )


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(summary: McSummary, fmt: str, path) -> None:
    """Write the sweep summary as 'csv', 'json', or 'text' (fixed schema)."""
    text = render_results(summary, fmt)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def render_results(summary: McSummary, fmt: str) -> str:
    rows = [c.row() for c in summary.cells]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_value(v) for k, v in row.items()})
        return buf.getvalue()
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt == "text":
        widths = {c: max(len(c), 14) for c in RESULT_COLUMNS}
        lines = ["  ".join(c.ljust(widths[c]) for c in RESULT_COLUMNS)]
        for row in rows:
            lines.append(
                "  ".join(_format_value(row[c]).ljust(widths[c]) for c in RESULT_COLUMNS)
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown results format {fmt!r}")


def read_results(path, fmt: str):
    """Read back an emitted results file as a list of row dicts (typed)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    elif fmt == "json":
        rows = json.loads(text)
    elif fmt == "text":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split()
        rows = [dict(zip(header, ln.split())) for ln in lines[1:]]
    else:
        raise ValueError(f"unknown results format {fmt!r}")
    typed = []
    for row in rows:
        out = dict(row)
        for key in ("snr_db", "rmse_m", "eta_num", "eta_theory", "crb_sqrt_m", "miss_rate"):
            out[key] = float(row[key])
        out["trials"] = int(row["trials"])
        typed.append(out)
    return typed
