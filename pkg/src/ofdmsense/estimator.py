"""Range profiles and off-grid multi-target delay estimation.

The filtered subcarrier vector of a K-scatterer scene is a sum of K complex
exponentials in the subcarrier index; delays are recovered off-grid with the
matrix pencil method (Sarkar & Pereira, IEEE Antennas Propag. Mag., 1995):
Hankel-structure the data, truncate to the dominant singular subspace, and
read the exponential poles off the shifted-subspace eigenvalue problem.
Model order comes either from a known scatterer count or from a singular
value threshold rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ofdmsense.channel import SPEED_OF_LIGHT, OfdmNumerology, delay_to_range

__all__ = [
    "DelayEstimates",
    "InvalidPencilParamError",
    "RangeProfile",
    "RankDeficientError",
    "associate_and_score",
    "average_cpi",
    "default_pencil_param",
    "hankel_singular_values",
    "matrix_pencil",
    "range_profile",
    "select_order",
]

_RANK_EPS = 1e-12


class RankDeficientError(RuntimeError):
    """Fewer significant singular values than the requested model order."""


class InvalidPencilParamError(ValueError):
    """Pencil parameter outside the admissible window."""


@dataclass(frozen=True)
class RangeProfile:
    """Zero-padded range response, normalized so the peak sits at 0 dB."""

    ranges: np.ndarray
    magnitude_db: np.ndarray
    zero_pad_factor: int

    def __post_init__(self):
        for name in ("ranges", "magnitude_db"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class DelayEstimates:
    """Sorted off-grid delay estimates plus the model order that produced them."""

    k_hat: int
    delays: np.ndarray
    pencil_param: int

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "delays", d)

    def ranges_m(self) -> np.ndarray:
        return delay_to_range(self.delays)


def average_cpi(filtered) -> np.ndarray:
    """Coherent combination: entry-wise mean of the per-symbol filter outputs."""
    vecs = [np.asarray(v) for v in filtered]
    if not vecs:
        raise ValueError("need at least one filtered symbol")
    n = vecs[0].size
    if any(v.size != n for v in vecs):
        raise ValueError("filtered vectors must share one length")
    return np.mean(np.stack(vecs, axis=0), axis=0)


def range_profile(v: np.ndarray, numerology: OfdmNumerology,
                  zero_pad_factor: int = 8) -> RangeProfile:
    """Magnitude range response of a filtered subcarrier vector.

    Inverse DFT of ``v`` zero-padded by ``zero_pad_factor``, in dB normalized
    to the peak; grid point i maps to range ``i * c / (2 B zero_pad_factor)``.
    """
    if zero_pad_factor < 1:
        raise ValueError("zero_pad_factor must be >= 1")
    v = np.asarray(v, dtype=np.complex128)
    n_fft = zero_pad_factor * v.size
    response = np.abs(np.fft.ifft(v, n=n_fft))
    peak = response.max()
    if peak == 0.0:
        raise ValueError("all-zero vector has no range profile")
    step = SPEED_OF_LIGHT / (2.0 * numerology.bandwidth * zero_pad_factor)
    with np.errstate(divide="ignore"):
        mag_db = 20.0 * np.log10(response / peak)
    return RangeProfile(
        ranges=step * np.arange(n_fft),
        magnitude_db=mag_db,
        zero_pad_factor=int(zero_pad_factor),
    )


def default_pencil_param(n: int) -> int:
    return int(round(n / 3.0))


def _validate_pencil(n: int, k: int, pencil_param: int) -> None:
    lo = int(np.floor(n / 3.0))
    hi = int(np.ceil(n / 2.0))
    if not lo <= pencil_param <= hi:
        raise InvalidPencilParamError(
            f"pencil parameter {pencil_param} outside [{lo}, {hi}] for N = {n}"
        )
    if k < 1:
        raise InvalidPencilParamError("model order must be at least 1")
    if k > min(pencil_param, n - pencil_param):
        raise InvalidPencilParamError(
            f"model order {k} exceeds the pencil rank bound "
            f"{min(pencil_param, n - pencil_param)}"
        )


def _hankel(v: np.ndarray, pencil_param: int) -> np.ndarray:
    # (N - P) x (P + 1) with Y[i, j] = v[i + j]
    return scipy.linalg.hankel(v[: v.size - pencil_param], v[v.size - pencil_param - 1 :])


def _hankel_right_svd(v: np.ndarray, pencil_param: int):
    """Singular values and right singular vectors of the Hankel matrix.

    Computed from the Hermitian eigendecomposition of the (P+1) x (P+1)
    Gram matrix, which is cheaper than a full SVD and identical for the
    dominant subspace.  Returns (descending values, Vh rows).
    """
    y = _hankel(v, pencil_param)
    ew, evec = scipy.linalg.eigh(y.conj().T @ y)
    s = np.sqrt(np.clip(ew[::-1], 0.0, None))
    return s, evec[:, ::-1].conj().T


def hankel_singular_values(v: np.ndarray, pencil_param: int = None) -> np.ndarray:
    """Descending singular values of the Hankel data matrix."""
    v = np.asarray(v, dtype=np.complex128)
    if pencil_param is None:
        pencil_param = default_pencil_param(v.size)
    _validate_pencil(v.size, 1, pencil_param)
    s, _ = _hankel_right_svd(v, pencil_param)
    return s


def select_order(singular_values, threshold_db: float = 20.0) -> int:
    """Count the singular values within ``threshold_db`` of the largest."""
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0:
        raise ValueError("need at least one singular value")
    if s[0] <= 0.0:
        return 0
    return int(np.sum(s >= s[0] * 10.0 ** (-threshold_db / 20.0)))


def matrix_pencil(
    v: np.ndarray,
    spacing: float,
    k: int,
    pencil_param: int = None,
    roi_bounds=None,
    refine_iters: int = 4,
) -> DelayEstimates:
    """Off-grid delay estimation of k superposed exponentials.

    The pole z_i of each exponential maps to a delay through
    ``tau_i = -angle(z_i) / (2 pi df)``, wrapped into [0, 1/df).  The pencil
    estimates seed ``refine_iters`` damped Gauss-Newton iterations on the
    nonlinear least-squares tone-fit cost, which removes the pencil's small
    excess variance over the delay CRB (set ``refine_iters=0`` for the raw
    pencil).  Estimates closer than half a delay bin are merged, and when
    ``roi_bounds`` is given only delays inside the region of interest
    (allowing for the wrap of a negative lower bound) are returned.
    """
    v = np.asarray(v, dtype=np.complex128)
    n = v.size
    if pencil_param is None:
        pencil_param = default_pencil_param(n)
    _validate_pencil(n, k, pencil_param)

    s, vh = _hankel_right_svd(v, pencil_param)
    if s[0] == 0.0 or s[k - 1] / s[0] < _RANK_EPS:
        raise RankDeficientError(
            f"only {select_order(s, -20.0 * np.log10(_RANK_EPS))} significant "
            f"singular values for requested order {k}"
        )

    # Shifted-subspace pencil on the dominant right singular vectors: the
    # eigenvalues of pinv(V1) V2 are the exponential poles.
    vt = vh[:k, :]
    v1 = vt[:, :-1].T
    v2 = vt[:, 1:].T
    poles = np.linalg.eigvals(np.linalg.pinv(v1) @ v2)

    omegas = -np.angle(poles)
    if refine_iters > 0:
        omegas = _refine_tones(v, omegas, refine_iters)

    ambiguity = 1.0 / spacing
    delays = np.mod(omegas / (2.0 * np.pi * spacing), ambiguity)
    delays = _merge_close(np.sort(delays), half_bin=0.5 / (n * spacing))
    if roi_bounds is not None:
        delays = _clip_to_roi(delays, roi_bounds, ambiguity)
    return DelayEstimates(k_hat=int(k), delays=delays, pencil_param=int(pencil_param))


def _refine_tones(v: np.ndarray, omegas: np.ndarray, iters: int) -> np.ndarray:
    """Damped Gauss-Newton on the tone model sum_k a_k exp(-j w_k n).

    Amplitudes are projected out by least squares each step; a step is only
    accepted when it lowers the residual, so the refinement can never leave
    the pencil solution worse than it started.
    """
    n_idx = np.arange(v.size)

    def fit(om):
        basis = np.exp(-1j * np.outer(n_idx, om))
        amp, *_ = np.linalg.lstsq(basis, v, rcond=None)
        resid = v - basis @ amp
        return basis, amp, resid, float(np.sum(np.abs(resid) ** 2))

    om = np.asarray(omegas, dtype=float)
    basis, amp, resid, cost = fit(om)
    for _ in range(iters):
        jac = (-1j * n_idx[:, None]) * basis * amp[None, :]
        gram = np.real(jac.conj().T @ jac)
        grad = np.real(jac.conj().T @ resid)
        try:
            step = np.linalg.solve(gram, grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.max(np.abs(step)) < 1e-15:
            break
        accepted = False
        for _ in range(6):
            cand = om + step
            b2, a2, r2, c2 = fit(cand)
            if c2 < cost:
                om, basis, amp, resid, cost = cand, b2, a2, r2, c2
                accepted = True
                break
            step = step / 2.0
        if not accepted:
            break
    return om


def _merge_close(delays: np.ndarray, half_bin: float) -> np.ndarray:
    """Average runs of sorted delays spaced closer than half a bin."""
    if delays.size <= 1:
        return delays
    merged = []
    cluster = [delays[0]]
    for d in delays[1:]:
        if d - cluster[-1] < half_bin:
            cluster.append(d)
        else:
            merged.append(np.mean(cluster))
            cluster = [d]
    merged.append(np.mean(cluster))
    return np.asarray(merged)


def _clip_to_roi(delays: np.ndarray, roi_bounds, ambiguity: float) -> np.ndarray:
    """Keep delays inside [tau_min, tau_max], unwrapping once for negative bounds."""
    lo, hi = roi_bounds
    kept = []
    for d in delays:
        if lo <= d <= hi:
            kept.append(d)
        elif lo <= d - ambiguity <= hi:
            kept.append(d - ambiguity)
    return np.sort(np.asarray(kept))


def associate_and_score(estimated, truth) -> np.ndarray:
    """Greedy nearest-neighbor assignment of estimates to truth without reuse.

    Returns one squared error per truth entry (same units squared as the
    inputs); truths left without an estimate are marked NaN and count as
    misses.
    """
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(truth, dtype=float)
    errors = np.full(tru.size, np.nan)
    if est.size == 0 or tru.size == 0:
        return errors
    pairs = sorted(
        ((abs(t - e), ti, ei) for ti, t in enumerate(tru) for ei, e in enumerate(est)),
        key=lambda p: (p[0], p[1], p[2]),
    )
    used_t, used_e = set(), set()
    for dist, ti, ei in pairs:
        if ti in used_t or ei in used_e:
            continue
        errors[ti] = dist**2
        used_t.add(ti)
        used_e.add(ei)
    return errors
