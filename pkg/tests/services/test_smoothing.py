import numpy as np
import pytest
from scipy import signal

from posecap.core.errors import LengthError, SpecError
from posecap.core.types import PoseSequence
from posecap.schemas.pipeline import FilterSpec
from posecap.schemas.synth import MotionKind, MotionSpec
from posecap.services.smoothing import (design_butterworth, filter_single_pass, filter_zero_phase,
                                        make_filter_spec, smooth_sequence)
from posecap.services.synth import gen_motion

RATE = 90.0


@pytest.fixture(scope="module")
def chain():
    return design_butterworth(FilterSpec(order=4, cutoff_hz=6.0, sample_rate_hz=RATE))


def test_response_at_cutoff(chain):
    assert chain.frequency_response(6.0)[0] == pytest.approx(1 / np.sqrt(2), abs=1e-4)


def test_unit_dc_gain(chain):
    assert chain.dc_gain == pytest.approx(1.0, abs=1e-12)
    assert chain.frequency_response(0.0)[0] == pytest.approx(1.0, abs=1e-12)


def test_stopband_attenuation(chain):
    attenuation_db = -20 * np.log10(chain.frequency_response(30.0)[0])
    assert attenuation_db >= 55.0


def test_stable(chain):
    assert np.all(np.abs(chain.poles) < 1.0)
    assert chain.padlen == 12


@pytest.mark.parametrize("order", [2, 4, 6, 8])
def test_every_order_has_cutoff_at_half_power(order):
    chain = design_butterworth(FilterSpec(order=order, cutoff_hz=10.0, sample_rate_hz=100.0))
    assert len(chain.sections) == order // 2
    assert chain.frequency_response(10.0)[0] == pytest.approx(1 / np.sqrt(2), abs=1e-4)


def _peak_lag(x, y):
    xc = np.correlate(y - y.mean(), x - x.mean(), mode="full")
    return int(np.argmax(xc)) - (len(x) - 1)


def test_zero_phase_keeps_slow_signal(chain):
    t = np.arange(900) / RATE
    x = np.sin(2 * np.pi * 1.0 * t)
    y = filter_zero_phase(chain, x)

    assert np.max(np.abs(y[90:-90])) == pytest.approx(1.0, rel=0.01)
    assert np.max(np.abs(y[90:-90] - x[90:-90])) < 0.01
    assert _peak_lag(x, y) == 0


def test_fast_sinusoid_is_removed(chain):
    t = np.arange(900) / RATE
    x = np.cos(2 * np.pi * 30.0 * t)
    y = filter_zero_phase(chain, x)

    # edge transients of the padding aside
    rms_in = np.sqrt(np.mean(x[90:-90] ** 2))
    rms_out = np.sqrt(np.mean(y[90:-90] ** 2))
    assert rms_out < 1e-5 * rms_in


def test_band_limited_input_has_no_lag(chain):
    t = np.arange(900) / RATE
    x = np.sin(2 * np.pi * 0.5 * t) + 0.6 * np.sin(2 * np.pi * 1.3 * t + 0.4) + 0.3 * np.cos(2 * np.pi * 2.7 * t)
    assert _peak_lag(x, filter_zero_phase(chain, x)) == 0


def test_linearity(chain):
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=200), rng.normal(size=200)
    a, b = 2.5, -0.7

    combined = filter_zero_phase(chain, a * x + b * y)
    separate = a * filter_zero_phase(chain, x) + b * filter_zero_phase(chain, y)
    np.testing.assert_allclose(combined, separate, rtol=1e-9, atol=1e-12)


def test_single_pass_lags(chain):
    t = np.arange(360) / RATE
    x = np.sin(2 * np.pi * 1.0 * t)
    y = filter_single_pass(chain, x)

    # the causal filter delays the peak
    assert np.argmax(y[:90]) > np.argmax(x[:90])


def test_constant_is_preserved(chain):
    x = np.full(40, 1.25)
    np.testing.assert_allclose(filter_zero_phase(chain, x), x, atol=1e-12)
    np.testing.assert_allclose(filter_single_pass(chain, x), x, atol=1e-12)


def test_short_signal(chain):
    with pytest.raises(LengthError):
        filter_zero_phase(chain, np.zeros(12))
    assert filter_zero_phase(chain, np.zeros(13)).shape == (13,)


def test_short_sequence_names_channel():
    seq = PoseSequence(RATE, np.zeros((10, 17, 3)))
    with pytest.raises(LengthError) as exc:
        smooth_sequence(seq, FilterSpec())
    assert exc.value.channel == "nose.x"


def test_invalid_order():
    with pytest.raises(SpecError) as exc:
        make_filter_spec(order=3)
    assert exc.value.field == "order"


def test_cutoff_above_nyquist():
    with pytest.raises(SpecError):
        make_filter_spec(cutoff_hz=45.0, sample_rate_hz=RATE)


def test_static_sequence_unchanged(static):
    smoothed = smooth_sequence(static, FilterSpec())
    np.testing.assert_allclose(smoothed.frames, static.frames, atol=1e-12)
    assert smoothed.sample_rate_hz == static.sample_rate_hz


def test_spike_is_suppressed(static):
    wrist = static.skeleton.joint_index("left_wrist")
    frames = static.frames.copy()
    frames[22, wrist, 0] += 0.10
    smoothed = smooth_sequence(static.replace_frames(frames), FilterSpec())

    residual = abs(smoothed.frames[22, wrist, 0] - static.frames[22, wrist, 0])
    assert residual <= 0.2 * 0.10


def test_jitter_is_reduced():
    gt = gen_motion(MotionSpec(kind=MotionKind.SWING, duration_s=2.0))
    rng = np.random.default_rng(5)
    noisy = gt.replace_frames(gt.frames + rng.normal(0.0, 0.005, gt.frames.shape))
    smoothed = smooth_sequence(noisy, FilterSpec())

    before = np.sqrt(np.mean((noisy.frames - gt.frames) ** 2))
    after = np.sqrt(np.mean((smoothed.frames - gt.frames) ** 2))
    assert after < before


def test_edges_use_point_reflection(chain):
    x = np.linspace(0.0, 1.0, 60) ** 2
    y = filter_zero_phase(chain, x)

    np.testing.assert_array_equal(y, signal.sosfiltfilt(chain.sections, x, padtype="odd", padlen=12))
    assert not np.allclose(y, signal.sosfiltfilt(chain.sections, x, padtype="even", padlen=12))
