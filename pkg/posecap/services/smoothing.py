"""
Butterworth low-pass design and application to joint trajectories.

The designed order and cutoff apply to one pass; zero-phase application runs
the chain forward and backward, doubling the effective order.
"""
import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import ValidationError
from scipy import signal

from posecap.core.errors import LengthError, SpecError, spec_error_from
from posecap.core.types import PoseSequence
from posecap.schemas.pipeline import FilterSpec

logger = logging.getLogger(__name__)

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class SosChain:
    """
    Cascaded second-order sections, rows ``(b0, b1, b2, 1, a1, a2)``.
    """
    sections: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        sos = np.array(self.sections, dtype=float).reshape(-1, 6)
        sos.setflags(write=False)
        object.__setattr__(self, "sections", sos)
        if np.any(np.abs(self.poles) >= 1.0):
            raise SpecError("filter has poles on or outside the unit circle")

    @property
    def state_order(self) -> int:
        return 2 * len(self.sections)

    @property
    def padlen(self) -> int:
        return 3 * self.state_order

    @property
    def poles(self) -> np.ndarray:
        _, p, _ = signal.sos2zpk(self.sections)
        return p

    @property
    def dc_gain(self) -> float:
        return float(np.prod(self.sections[:, :3].sum(axis=1) / self.sections[:, 3:].sum(axis=1)))

    def frequency_response(self, freqs_hz) -> np.ndarray:
        """Single-pass magnitude at the given frequencies."""
        freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
        _, h = signal.sosfreqz(self.sections, worN=freqs, fs=self.sample_rate_hz)
        return np.abs(h)


def make_filter_spec(**kwargs: Any) -> FilterSpec:
    """Build a FilterSpec, raising SpecError (with the field) on invalid values."""
    try:
        return FilterSpec(**kwargs)
    except ValidationError as e:
        raise spec_error_from(e)


def design_butterworth(spec: FilterSpec) -> SosChain:
    """
    Digital Butterworth low-pass by the bilinear transform with cutoff prewarping.

    The magnitude is 1 at DC and 1/sqrt(2) at ``spec.cutoff_hz`` for a single pass.
    """
    if spec.cutoff_hz >= spec.sample_rate_hz / 2:
        raise SpecError("cutoff must be below Nyquist", field="cutoff_hz")
    sos = signal.butter(spec.order, spec.cutoff_hz, btype="lowpass", output="sos", fs=spec.sample_rate_hz)
    return SosChain(sos, spec.sample_rate_hz)


def _check_length(chain: SosChain, x: np.ndarray, channel: str | None) -> None:
    if x.ndim != 1:
        raise LengthError(f"expected a 1-D signal, got shape {x.shape}", channel)
    if len(x) <= chain.padlen:
        raise LengthError(f"signal of {len(x)} samples is too short; need more than {chain.padlen}", channel)


def filter_zero_phase(chain: SosChain, x, channel: str | None = None) -> np.ndarray:
    """
    Forward-backward filtering with zero net phase.

    Both ends are extended by ``3 x state order`` samples of odd reflection
    about the end sample (``padtype="odd"``, the point reflection ``2 x[0] - x[k]``)
    rather than a plain mirror, so linear trends stay continuous; the extension
    is stripped from the output.

    Raises:
        LengthError: If the signal is not longer than the padding
    """
    x = np.asarray(x, dtype=float)
    _check_length(chain, x, channel)
    return signal.sosfiltfilt(chain.sections.copy(), x, padtype="odd", padlen=chain.padlen)


def filter_single_pass(chain: SosChain, x, channel: str | None = None) -> np.ndarray:
    """Causal single pass, initial state at steady state for the first sample."""
    x = np.asarray(x, dtype=float)
    _check_length(chain, x, channel)
    zi = signal.sosfilt_zi(chain.sections) * x[0]
    y, _ = signal.sosfilt(chain.sections.copy(), x, zi=zi)
    return y


def smooth_sequence(seq: PoseSequence, spec: FilterSpec, single_pass: bool = False) -> PoseSequence:
    """
    Filter each of the 51 coordinate channels independently.

    Raises:
        LengthError: If the sequence is too short (first channel named)
    """
    chain = design_butterworth(spec)
    apply = filter_single_pass if single_pass else filter_zero_phase
    out = np.empty_like(seq.frames)
    for j, joint in enumerate(seq.skeleton.joint_names):
        for axis, axis_name in enumerate(AXES):
            out[:, j, axis] = apply(chain, seq.frames[:, j, axis], channel=f"{joint}.{axis_name}")
    logger.info(
        f"Smoothed {seq.n_frames} frames: order {spec.order}, cutoff {spec.cutoff_hz} Hz, "
        f"{'single pass' if single_pass else 'zero phase'}"
    )
    return seq.replace_frames(out)
