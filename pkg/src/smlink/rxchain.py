"""Receiver chain: sync, SNR estimation, matched filtering, frequency
offset correction, least-squares channel estimation and demodulation.

The decode pipeline mirrors the transmit structure: locate the 20
synchronization pulses (relative threshold, reject the capture if fewer
are found), measure SNR from the on/off section, matched-filter and
downsample the data section, then per frame estimate the carrier
frequency offset from the constant-symbol preamble, derotate, estimate
the channel from both pilot signals and detect each half of the data
symbols with its nearer estimate.

Channel estimates are formed per pilot sequence as (1/N) Theta^H Y,
averaged over the interior sequences of a pilot signal (their
neighborhoods are still pilot-periodic despite pulse-shaping memory),
and divided by the known combined transmit+receive filter response
sampled at symbol lags -- which makes the noiseless estimate exact to
machine precision instead of plateauing at the filter sidelobe level.
"""

from dataclasses import dataclass, field

import numpy as np

from . import modem
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DimensionError,
    SyncRejection,
)
from .txchain import FrameLayout, TransmissionLayout, pilot_matrix, rrc_taps

__all__ = [
    "SyncResult",
    "SnrEstimate",
    "ChannelEstimate",
    "DecodeResult",
    "detect_sync",
    "estimate_snr",
    "matched_filter_downsample",
    "estimate_fo",
    "correct_fo",
    "pulse_gain_compensation",
    "ls_channel_estimate",
    "demodulate_frame",
    "decode_transmission",
]

FO_EDGE_MARGIN = 12


@dataclass(frozen=True)
class SyncResult:
    """Located sync pulses and the derived transmission start."""

    peak_indices: np.ndarray
    tx_start_index: int
    data_start_index: int


@dataclass(frozen=True)
class SnrEstimate:
    """Aggregate SNR estimate plus the per-antenna, per-block raw values."""

    snr_db: float
    per_antenna_per_block: np.ndarray
    valid: bool = True


@dataclass(frozen=True)
class ChannelEstimate:
    """LS channel estimate from one pilot signal."""

    h_hat: np.ndarray
    which_half: str


@dataclass(frozen=True)
class DecodeResult:
    """Everything recovered from one captured transmission."""

    bits: np.ndarray
    snr: SnrEstimate
    fo_cycles_per_sample: np.ndarray
    channel_estimates: list
    sync: SyncResult
    symbol_scale: float = field(default=1.0)


def detect_sync(waveform, pulse_period_samples, n_pulses=20, threshold_fraction=0.70,
                data_offset_samples=0):
    """Find the sync pulses by relative-threshold peak search.

    Samples above ``threshold_fraction`` of the maximum magnitude are
    grouped (gaps beyond half the pulse period split groups) and each
    group contributes its strongest sample. Fewer than ``n_pulses``
    groups raise :class:`SyncRejection`. The transmission start is
    anchored on the ``n_pulses``-th peak counted from the front.
    """
    w = np.abs(np.asarray(waveform)).reshape(-1)
    if w.size == 0:
        raise DegenerateInputError("empty waveform")
    peak = float(w.max())
    if peak == 0.0:
        raise SyncRejection("all-zero capture: found 0 of the expected pulses")
    above = np.flatnonzero(w >= threshold_fraction * peak)
    merge = max(pulse_period_samples // 2, 1)
    splits = np.flatnonzero(np.diff(above) > merge) + 1
    groups = np.split(above, splits)
    peaks = np.array([g[np.argmax(w[g])] for g in groups], dtype=np.int64)
    if peaks.size < n_pulses:
        raise SyncRejection(
            f"found {peaks.size} sync peaks, need {n_pulses}; capture discarded"
        )
    anchor = int(peaks[n_pulses - 1])
    tx_start = anchor - (n_pulses - 1) * pulse_period_samples
    return SyncResult(
        peak_indices=peaks[:n_pulses],
        tx_start_index=tx_start,
        data_start_index=tx_start + int(data_offset_samples),
    )


def estimate_snr(snr_section, nt, n_blocks, block_len_samples):
    """On/off power-difference SNR estimate over the sounding section.

    ``snr_section`` is (nr, n_samples) laid out as ``nt`` sequential
    per-antenna runs of ``n_blocks`` alternating on/off blocks. Per
    block: signal power = max(mean on-power - mean off-power, 0) where
    powers sum over receive antennas; the noise variance is the
    per-component variance of the mean-removed off samples; their ratio
    (divided by nr) is one raw estimate. Estimates are averaged in the
    linear domain over all blocks and antennas.
    """
    y = np.atleast_2d(np.asarray(snr_section))
    nr = y.shape[0]
    need = nt * n_blocks * 2 * block_len_samples
    if y.shape[1] < need:
        raise DimensionError(
            f"SNR section has {y.shape[1]} samples, layout wants {need}"
        )
    if not np.abs(y).any():
        raise DegenerateInputError("SNR section is identically zero")
    raw = np.empty((nt, n_blocks))
    saturated = False
    for t in range(nt):
        base = t * 2 * n_blocks * block_len_samples
        for b in range(n_blocks):
            on = y[:, base + 2 * b * block_len_samples :][:, :block_len_samples]
            off = y[:, base + (2 * b + 1) * block_len_samples :][:, :block_len_samples]
            p_on = float(np.mean(np.sum(np.abs(on) ** 2, axis=0)))
            p_off = float(np.mean(np.sum(np.abs(off) ** 2, axis=0)))
            centered = off - off.mean(axis=1, keepdims=True)
            noise_var = float(np.mean(np.abs(centered) ** 2))
            signal = max(p_on - p_off, 0.0)
            if noise_var == 0.0:
                if signal == 0.0:
                    raise DegenerateInputError("on/off blocks are both silent")
                raw[t, b] = np.inf
                saturated = True
            else:
                raw[t, b] = signal / (nr * noise_var)
    mean = float(np.mean(raw))
    if saturated or not np.isfinite(mean):
        return SnrEstimate(snr_db=float("inf"), per_antenna_per_block=raw, valid=False)
    return SnrEstimate(
        snr_db=float(10.0 * np.log10(mean)) if mean > 0 else float("-inf"),
        per_antenna_per_block=raw,
        valid=mean > 0,
    )


def matched_filter_downsample(samples, taps, upsample_factor, n_symbols=None):
    """Receive filter plus symbol-rate sampling.

    Convolves each stream with ``taps`` and samples every
    ``upsample_factor``-th output starting at offset len(taps)-1, which
    compensates the combined transmit+receive group delay.
    """
    y = np.atleast_2d(np.asarray(samples, dtype=np.complex128))
    if y.shape[1] < len(taps):
        raise DimensionError("input shorter than the receive filter")
    z = np.stack([np.convolve(row, taps) for row in y])
    sym = z[:, len(taps) - 1 :: upsample_factor]
    if n_symbols is not None:
        sym = sym[:, :n_symbols]
    return sym


def estimate_fo(section):
    """Frequency offset of a constant-modulus run, in cycles per index.

    Unwraps the instantaneous phase and divides the total phase travel
    by the index span: (phi_last - phi_first) / (2*pi*(n-1)).
    """
    x = np.asarray(section).reshape(-1)
    if x.size < 2:
        raise DegenerateInputError("need at least two samples to estimate a slope")
    if (np.abs(x) == 0).any():
        raise DegenerateInputError("zero-valued samples carry no phase")
    phase = np.unwrap(np.angle(x))
    return float((phase[-1] - phase[0]) / (2.0 * np.pi * (x.size - 1)))


def correct_fo(frame, delta_per_index):
    """Counter-rotate by exp(-2j*pi*delta*i), i counted along the last axis."""
    x = np.asarray(frame, dtype=np.complex128)
    ramp = np.exp(-2j * np.pi * delta_per_index * np.arange(x.shape[-1]))
    return x * ramp


def pulse_gain_compensation(taps, upsample_factor, fo_cycles_per_symbol, n_theta, nt):
    """Per-antenna gain of the combined Tx+Rx filter on periodic pilots.

    The matched filter of an offset-rotated stream equals filtering with
    phase-rotated taps, so the effective symbol-spaced response is
    g(d) = (taps * conv * rotated taps) sampled at symbol lags around
    the sampling instant. On a pilot train of period ``n_theta`` the
    whole response collapses to one complex gain per antenna:
    G_t = sum_d g(d) exp(-2j*pi*t*d/n_theta).
    """
    taps = np.asarray(taps)
    rot = taps * np.exp(
        -2j * np.pi * (fo_cycles_per_symbol / upsample_factor) * np.arange(len(taps))
    )
    gtil = np.convolve(taps, rot)
    center = len(taps) - 1
    lo = -(center // upsample_factor)
    hi = (len(gtil) - 1 - center) // upsample_factor
    lags = np.arange(lo, hi + 1)
    g_sym = gtil[center + lags * upsample_factor]
    ants = np.arange(1, nt + 1)
    return np.exp(-2j * np.pi * np.outer(ants, lags) / n_theta) @ g_sym


def ls_channel_estimate(pilot_block, pilots, gain=None, which_half="first"):
    """Least-squares channel estimate from one received pilot signal.

    ``pilot_block`` is (nr, n_seq * n_theta); ``pilots`` the (n_theta,
    nt) transmitted matrix with orthogonal columns. Each sequence gives
    (1/n_theta) Theta^H Y; sequences whose filter-memory neighborhood
    stays pilot-periodic (all but the first and last when there are at
    least three) are averaged. ``gain`` optionally divides per transmit
    antenna to undo the combined pulse-shaping response.
    """
    theta = np.asarray(pilots)
    n_theta, nt = theta.shape
    gram = theta.conj().T @ theta
    if not np.allclose(gram, n_theta * np.eye(nt), atol=1e-9 * n_theta):
        raise ConfigurationError("pilot columns must be orthogonal")
    y = np.atleast_2d(np.asarray(pilot_block))
    if y.shape[1] % n_theta:
        raise DimensionError("pilot block length must be a multiple of the sequence length")
    n_seq = y.shape[1] // n_theta
    seqs = range(1, n_seq - 1) if n_seq >= 3 else range(n_seq)
    h_sum = np.zeros((y.shape[0], nt), dtype=np.complex128)
    for s in seqs:
        block = y[:, s * n_theta : (s + 1) * n_theta]
        h_sum += (theta.conj().T @ block.T).T / n_theta
    h_hat = h_sum / len(list(seqs))
    if gain is not None:
        h_hat = h_hat / np.asarray(gain)[None, :]
    return ChannelEstimate(h_hat=h_hat, which_half=which_half)


def demodulate_frame(data_symbols, h_first, h_second, scheme, constellation):
    """ML-detect a frame's data block, first half with the first estimate.

    ``data_symbols`` is (nr, n); both channel estimates must carry the
    same amplitude scale as the symbols. Returns the demapped bits.
    """
    y = np.asarray(data_symbols)
    n = y.shape[1]
    split = n // 2
    parts = []
    for y_half, h in ((y[:, :split], h_first), (y[:, split:], h_second)):
        if y_half.shape[1] == 0:
            continue
        if scheme == "sm":
            idx = modem.sm_ml_detect_batch(y_half.T, h, constellation)
            m = modem.bits_per_vector("sm", h.shape[1], constellation.order)
        elif scheme == "smx":
            cands = modem.candidate_vectors("smx", h.shape[1], constellation)
            idx = modem.ml_detect_batch(y_half.T, h, cands)
            m = modem.bits_per_vector("smx", h.shape[1], constellation.order)
        else:
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        parts.append(modem.indices_to_bits(idx, m))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)


def decode_transmission(rx_samples, frame_layout, tx_layout, nt, scheme,
                        constellation, symbol_scale=None, fo_margin=FO_EDGE_MARGIN):
    """Run the full receive pipeline on captured per-antenna streams.

    Returns a :class:`DecodeResult`; raises :class:`SyncRejection` when
    the synchronization search fails. ``symbol_scale``, when given (from
    the transmission sidecar), converts the reported channel estimates
    to the true channel's amplitude scale; detection is unaffected.
    """
    y = np.atleast_2d(np.asarray(rx_samples, dtype=np.complex128))
    u = frame_layout.upsample_factor
    taps = rrc_taps(frame_layout.rrc_num_taps, frame_layout.rrc_rolloff, u)
    sync_len = tx_layout.sync_samples(u)
    snr_len = tx_layout.snr_samples(nt, u)
    period = (1 + tx_layout.sync_gap_symbols) * u

    combined = np.sqrt(np.sum(np.abs(y) ** 2, axis=0))
    sync = detect_sync(
        combined,
        period,
        n_pulses=tx_layout.sync_pulses,
        data_offset_samples=sync_len + snr_len,
    )

    snr_section = y[:, sync.tx_start_index + sync_len :][:, :snr_len]
    snr = estimate_snr(snr_section, nt, tx_layout.snr_blocks,
                       tx_layout.snr_block_symbols * u)

    f_syms = frame_layout.frame_symbols
    n_sym = tx_layout.n_frames * f_syms
    data = y[:, sync.data_start_index :][:, : n_sym * u + len(taps) - 1]
    if data.shape[1] < n_sym * u:
        raise DimensionError("capture truncated before the end of the data section")
    symbols = matched_filter_downsample(data, taps, u, n_symbols=n_sym)

    sections = frame_layout.sections()
    pilots = pilot_matrix(nt, frame_layout.pilot_seq_len)
    bits = []
    fo_per_frame = np.empty(tx_layout.n_frames)
    estimates = []
    for f in range(tx_layout.n_frames):
        frame = symbols[:, f * f_syms : (f + 1) * f_syms]
        fo_sec = frame[:, sections["fo"]][:, fo_margin:-fo_margin]
        usable = [r for r in range(y.shape[0]) if np.abs(fo_sec[r]).min() > 0]
        if not usable:
            raise DegenerateInputError("frequency-offset preamble carries no phase")
        per_ant = np.array([estimate_fo(fo_sec[r]) for r in usable])
        power = np.mean(np.abs(fo_sec[usable]) ** 2, axis=1)
        d_sym = float(np.average(per_ant, weights=power))
        fo_per_frame[f] = d_sym / u
        corrected = correct_fo(frame, d_sym)
        # Unwind the offset's phase accumulated before this frame's first
        # sampling instant (it sits a filter group delay past the frame
        # start), referencing the estimates to the transmission start.
        first_instant = (
            sync.data_start_index - sync.tx_start_index
            + f * f_syms * u + len(taps) - 1
        )
        corrected = corrected * np.exp(-2j * np.pi * (d_sym / u) * first_instant)
        gain = pulse_gain_compensation(taps, u, d_sym, frame_layout.pilot_seq_len, nt)
        est = [
            ls_channel_estimate(corrected[:, sections[sec]], pilots, gain, half)
            for sec, half in (("pilot_first", "first"), ("pilot_second", "second"))
        ]
        bits.append(
            demodulate_frame(
                corrected[:, sections["data"]],
                est[0].h_hat,
                est[1].h_hat,
                scheme,
                constellation,
            )
        )
        if symbol_scale:
            est = [
                ChannelEstimate(e.h_hat / symbol_scale, e.which_half) for e in est
            ]
        estimates.append(tuple(est))
    return DecodeResult(
        bits=np.concatenate(bits) if bits else np.zeros(0, dtype=np.uint8),
        snr=snr,
        fo_cycles_per_sample=fo_per_frame,
        channel_estimates=estimates,
        sync=sync,
        symbol_scale=symbol_scale if symbol_scale else 1.0,
    )
