import numpy as np
import pytest

from ofdmsense.channel import (
    Scatterer,
    SceneConfig,
    delay_to_range,
    make_frame_sequence,
    range_to_delay,
    steering,
)
from ofdmsense.constellation import draw_block, make_constellation
from ofdmsense.estimator import (
    InvalidPencilParamError,
    RankDeficientError,
    associate_and_score,
    average_cpi,
    default_pencil_param,
    hankel_singular_values,
    matrix_pencil,
    range_profile,
    select_order,
)
from ofdmsense.filters import apply_filter, rf_filter
from ofdmsense.scenes import roi_meters_to_delay


def tone_sum(amplitudes, delays, n, spacing):
    v = np.zeros(n, dtype=complex)
    for a, tau in zip(amplitudes, delays):
        v += a * steering(tau, n, spacing)
    return v


def test_average_cpi_identity():
    v = np.arange(8, dtype=complex)
    assert np.array_equal(average_cpi([v]), v)


def test_average_cpi_equal_vectors():
    v = np.exp(1j * np.arange(16))
    assert np.allclose(average_cpi([v] * 8), v, atol=1e-15)


def test_average_cpi_rf_noise_free_multitone(two_target_scene):
    frames = make_frame_sequence(
        two_target_scene.with_noise_var(0.0),
        make_constellation("64qam"), 8, np.random.default_rng(0))
    outs = [apply_filter(rf_filter(f.tx), f) for f in frames]
    avg = average_cpi(outs)
    num = two_target_scene.numerology
    expected = tone_sum([s.amplitude for s in two_target_scene.scatterers],
                        two_target_scene.truth_delays(), 256, num.subcarrier_spacing)
    assert np.allclose(avg, expected, atol=1e-9)


def test_average_cpi_rejects_empty_and_ragged():
    with pytest.raises(ValueError):
        average_cpi([])
    with pytest.raises(ValueError):
        average_cpi([np.ones(4), np.ones(5)])


def test_range_profile_constant_vector(numerology):
    prof = range_profile(np.ones(256, dtype=complex), numerology, zero_pad_factor=4)
    assert prof.ranges.size == 4 * 256
    assert prof.magnitude_db[0] == pytest.approx(0.0, abs=1e-9)
    assert np.max(prof.magnitude_db) == pytest.approx(0.0, abs=1e-9)
    # Dirichlet: every fourth sample away from the peak is a transform zero
    assert prof.magnitude_db[4] < -200


def test_range_profile_peak_location(numerology):
    tau = range_to_delay(60.9)
    v = steering(tau, 256, numerology.subcarrier_spacing)
    prof = range_profile(v, numerology, zero_pad_factor=8)
    peak_r = prof.ranges[np.argmax(prof.magnitude_db)]
    half_bin = numerology.range_bin_m / (2 * 8)
    assert abs(peak_r - 60.9) <= half_bin


def test_range_profile_scale_invariance(numerology, rng):
    v = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    p1 = range_profile(v, numerology)
    p2 = range_profile(10.0 * v, numerology)
    assert np.allclose(p1.magnitude_db, p2.magnitude_db, atol=1e-12)


def test_range_profile_rejects_zero_vector(numerology):
    with pytest.raises(ValueError):
        range_profile(np.zeros(16, dtype=complex), numerology)


def test_matrix_pencil_single_tone_zero_delay(numerology):
    v = np.ones(256, dtype=complex)
    est = matrix_pencil(v, numerology.subcarrier_spacing, 1)
    assert est.delays[0] == pytest.approx(0.0, abs=1e-15)
    assert est.k_hat == 1
    assert est.pencil_param == default_pencil_param(256)


def test_matrix_pencil_two_tone_noiseless_exact(numerology):
    spacing = numerology.subcarrier_spacing
    truth = [range_to_delay(60.9), range_to_delay(90.9)]
    v = tone_sum([1.0, 0.7j], truth, 256, spacing)
    est = matrix_pencil(v, spacing, 2)
    assert np.allclose(delay_to_range(est.delays), [60.9, 90.9], atol=1e-6)


def test_matrix_pencil_exactness_up_to_five_tones(numerology):
    spacing = numerology.subcarrier_spacing
    rng = np.random.default_rng(123)
    bin_delay = 1.0 / (256 * spacing)
    for k in (1, 2, 3, 4, 5):
        delays = np.sort(rng.uniform(2, 60, size=k)) * bin_delay
        while k > 1 and np.min(np.diff(delays)) < bin_delay:
            delays = np.sort(rng.uniform(2, 60, size=k)) * bin_delay
        amps = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        v = tone_sum(amps, delays, 256, spacing)
        est = matrix_pencil(v, spacing, k)
        assert np.max(np.abs(est.delays - delays) / delays) < 1e-9


def test_matrix_pencil_shift_invariance(numerology):
    spacing = numerology.subcarrier_spacing
    bin_delay = 1.0 / (256 * spacing)
    base = np.array([10.3, 20.8]) * bin_delay
    shift = 5.5 * bin_delay
    v1 = tone_sum([1.0, 1.0], base, 256, spacing)
    v2 = tone_sum([1.0, 1.0], base + shift, 256, spacing)
    e1 = matrix_pencil(v1, spacing, 2)
    e2 = matrix_pencil(v2, spacing, 2)
    assert np.allclose(e2.delays - e1.delays, shift, rtol=1e-9)


def test_matrix_pencil_rank_deficient(numerology):
    v = steering(2e-7, 256, numerology.subcarrier_spacing)
    with pytest.raises(RankDeficientError):
        matrix_pencil(v, numerology.subcarrier_spacing, 3)


def test_matrix_pencil_parameter_validation(numerology):
    v = np.ones(256, dtype=complex)
    spacing = numerology.subcarrier_spacing
    with pytest.raises(InvalidPencilParamError):
        matrix_pencil(v, spacing, 1, pencil_param=20)
    with pytest.raises(InvalidPencilParamError):
        matrix_pencil(v, spacing, 1, pencil_param=200)
    with pytest.raises(InvalidPencilParamError):
        matrix_pencil(v, spacing, 0)
    with pytest.raises(InvalidPencilParamError):
        matrix_pencil(v, spacing, 100, pencil_param=90)


def test_matrix_pencil_roi_filtering(numerology):
    spacing = numerology.subcarrier_spacing
    truth = [range_to_delay(60.9), range_to_delay(400.0)]
    v = tone_sum([1.0, 1.0], truth, 256, spacing)
    roi = roi_meters_to_delay((-150, 150))
    est = matrix_pencil(v, spacing, 2, roi_bounds=roi)
    assert est.delays.size == 1
    assert delay_to_range(est.delays[0]) == pytest.approx(60.9, abs=1e-6)


def test_matrix_pencil_negative_roi_wrap(numerology):
    # a tone just before the reference wraps to the top of the ambiguity
    # interval and must come back as a small negative delay
    spacing = numerology.subcarrier_spacing
    tau = -2.0 / (256 * spacing)
    v = steering(np.mod(tau, 1 / spacing), 256, spacing)
    est = matrix_pencil(v, spacing, 1, roi_bounds=roi_meters_to_delay((-150, 150)))
    assert est.delays[0] == pytest.approx(tau, rel=1e-9)


def test_select_order_threshold_rule():
    assert select_order([1.0, 0.5, 1e-6], 20.0) == 2
    assert select_order([3.0, 3.0, 3.0], 20.0) == 3
    assert select_order([0.0, 0.0], 20.0) == 0


def test_select_order_noiseless_two_targets(two_target_scene):
    frames = make_frame_sequence(
        two_target_scene.with_noise_var(0.0),
        make_constellation("qpsk"), 8, np.random.default_rng(0))
    v = average_cpi([apply_filter(rf_filter(f.tx), f) for f in frames])
    sv = hankel_singular_values(v)
    for th in (1.0, 20.0, 60.0, 99.0):
        assert select_order(sv, th) == 2


def test_associate_exact_match():
    errs = associate_and_score([60.9, 90.9], [60.9, 90.9])
    assert np.allclose(errs, 0.0)


def test_associate_squared_error():
    errs = associate_and_score([61.0], [60.9])
    assert errs[0] == pytest.approx(0.01, abs=1e-12)


def test_associate_miss_handling():
    errs = associate_and_score([60.9], [60.9, 90.9])
    assert errs[0] == pytest.approx(0.0)
    assert np.isnan(errs[1])
    assert np.all(np.isnan(associate_and_score([], [1.0, 2.0])))


def test_associate_no_reuse():
    # one estimate sits between two truths: only the nearer truth claims it
    errs = associate_and_score([10.4], [10.0, 11.0])
    assert errs[0] == pytest.approx(0.16, abs=1e-12)
    assert np.isnan(errs[1])


def test_profile_pencil_consistency(two_target_scene):
    # pencil estimates fall within one padded profile bin of the profile's
    # two dominant local peaks in nearly every 10 dB trial
    num = two_target_scene.numerology
    scene = two_target_scene.with_noise_var(0.1)
    const = make_constellation("16qam")
    hits = 0
    trials = 60
    pad = 8
    for t in range(trials):
        rng = np.random.default_rng(1000 + t)
        scene_t = scene.with_random_phases(rng)
        frames = make_frame_sequence(scene_t, const, 8, rng)
        v = average_cpi([apply_filter(rf_filter(f.tx), f) for f in frames])
        est = matrix_pencil(v, num.subcarrier_spacing, 2,
                            roi_bounds=scene.roi_bounds)
        prof = range_profile(v, num, pad)
        mags = prof.magnitude_db
        order = np.argsort(mags)[::-1]
        peaks = []
        for idx in order:
            r = prof.ranges[idx]
            if all(abs(r - p) > num.range_bin_m for p in peaks):
                peaks.append(r)
            if len(peaks) == 2:
                break
        bin_width = num.range_bin_m / pad
        est_r = delay_to_range(est.delays)
        ok = all(min(abs(r - p) for p in peaks) <= bin_width for r in est_r)
        hits += ok
    assert hits / trials >= 0.95


def test_known_k_never_returns_more(two_target_scene, rng):
    scene = two_target_scene.with_noise_var(1.0).with_random_phases(rng)
    frames = make_frame_sequence(scene, make_constellation("qpsk"), 8, rng)
    v = average_cpi([apply_filter(rf_filter(f.tx), f) for f in frames])
    est = matrix_pencil(v, scene.numerology.subcarrier_spacing, 2,
                        roi_bounds=scene.roi_bounds)
    assert est.delays.size <= 2
