"""Transmitter chain: frames, pulse shaping and the on-air transmission.

Symbol-domain frames carry, in order: a zero pad, a pilot signal (ten
repetitions of length-10 orthogonal pilot sequences, all antennas
simultaneously), a constant-valued frequency-offset preamble on antenna
1 only, the data vectors, a second pilot signal and a trailing zero pad.

Frames are upsampled, root-raised-cosine shaped and concatenated into
the data section of a transmission that is prefixed by a synchronization
section (20 full-scale single-sample pulses on antenna 1, spaced 51
symbol durations apart) and an SNR-estimation section (per antenna in
turn, 5 alternating on/off constant-amplitude blocks). The shaped data
stream is scaled so its peak amplitude equals ``power_factor``; the
sync pulses stay at the quantizer full scale, which pins the
peak-to-data amplitude ratio (about 21.1 dB at the default factor).
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DimensionError,
    FramingError,
    RangeError,
)

__all__ = [
    "FrameLayout",
    "TransmissionLayout",
    "Frame",
    "TransmissionVector",
    "pilot_sequence",
    "pilot_matrix",
    "rrc_taps",
    "build_frame",
    "pulse_shape",
    "assemble_transmission",
    "quantize_i16",
    "dequantize_i16",
    "write_waveform",
    "read_waveform",
]

FULL_SCALE = 32767
SIDECAR_SCHEMA_VERSION = "1"
_COHERENCE_LIMIT_S = 7e-3


@dataclass(frozen=True)
class FrameLayout:
    """Symbol-domain frame sectioning and shaping parameters."""

    zero_pad_len: int = 50
    pilot_sequences_per_signal: int = 10
    pilot_seq_len: int = 10
    fo_seq_len: int = 1000
    data_symbols_per_frame: int = 1000
    upsample_factor: int = 4
    rrc_num_taps: int = 40
    rrc_rolloff: float = 0.75

    def __post_init__(self):
        if min(self.zero_pad_len, self.fo_seq_len, self.data_symbols_per_frame) < 0:
            raise ConfigurationError("section lengths must be nonnegative")
        if self.pilot_sequences_per_signal < 1 or self.pilot_seq_len < 1:
            raise ConfigurationError("pilot signal needs at least one sequence")
        if self.upsample_factor < 1:
            raise ConfigurationError("upsample factor must be >= 1")
        if self.rrc_num_taps < 2:
            raise ConfigurationError("need at least 2 filter taps")
        if not 0.0 < self.rrc_rolloff <= 1.0:
            raise ConfigurationError("roll-off must be in (0, 1]")
        duration = self.frame_symbols * self.upsample_factor / 1e7
        if duration >= _COHERENCE_LIMIT_S:
            raise ConfigurationError(
                f"frame duration {duration * 1e3:.3f} ms exceeds the "
                f"{_COHERENCE_LIMIT_S * 1e3:.0f} ms coherence budget at 10 Ms/s"
            )

    @property
    def pilot_signal_len(self):
        return self.pilot_sequences_per_signal * self.pilot_seq_len

    @property
    def frame_symbols(self):
        """Symbols per antenna: zeros | pilot | FO | data | pilot | zeros."""
        return (
            2 * self.zero_pad_len
            + 2 * self.pilot_signal_len
            + self.fo_seq_len
            + self.data_symbols_per_frame
        )

    def sections(self):
        """Symbol-index slices of each frame section."""
        z, p = self.zero_pad_len, self.pilot_signal_len
        f, d = self.fo_seq_len, self.data_symbols_per_frame
        bounds = np.cumsum([0, z, p, f, d, p, z])
        names = ("zeros_head", "pilot_first", "fo", "data", "pilot_second", "zeros_tail")
        return {n: slice(int(a), int(b)) for n, a, b in zip(names, bounds, bounds[1:])}


@dataclass(frozen=True)
class TransmissionLayout:
    """Sample-domain transmission sectioning."""

    n_frames: int = 50
    sync_pulses: int = 20
    sync_gap_symbols: int = 50
    snr_blocks: int = 5
    snr_block_symbols: int = 50_000
    power_factor: float = 2896 / FULL_SCALE
    sample_rate: float = 10e6

    def __post_init__(self):
        if self.n_frames < 1:
            raise ConfigurationError("need at least one frame")
        if self.sync_pulses < 1 or self.sync_gap_symbols < 1:
            raise ConfigurationError("sync section needs pulses and gaps")
        if self.snr_blocks < 1 or self.snr_block_symbols < 1:
            raise ConfigurationError("SNR section needs at least one on/off block")
        if self.power_factor < 0:
            raise ConfigurationError("power factor must be >= 0")
        if self.sample_rate <= 0:
            raise ConfigurationError("sample rate must be positive")

    def sync_samples(self, upsample_factor):
        period = (1 + self.sync_gap_symbols) * upsample_factor
        return self.sync_pulses * period

    def snr_samples(self, nt, upsample_factor):
        per_antenna = 2 * self.snr_blocks * self.snr_block_symbols * upsample_factor
        return nt * per_antenna


@dataclass(frozen=True)
class Frame:
    """One symbol-domain frame: (nt, frame_symbols) complex matrix."""

    symbols: np.ndarray
    layout: FrameLayout

    @property
    def nt(self):
        return self.symbols.shape[0]


@dataclass(frozen=True)
class TransmissionVector:
    """Per-antenna sample streams plus the bookkeeping to parse them back.

    ``sections`` maps section name -> (start, length) in samples;
    ``symbol_scale`` is the factor applied to the shaped frame stream so
    that its peak equals ``power_factor`` (the quantized data maximum).
    """

    samples: np.ndarray
    sections: dict
    frame_layout: FrameLayout
    layout: TransmissionLayout
    symbol_scale: float
    x_max: float

    @property
    def nt(self):
        return self.samples.shape[0]


def pilot_sequence(n_t, n_theta):
    """Orthogonal pilot sequence exp(2j*pi*n_t*l/n_theta), l = 0..n_theta-1."""
    if not 1 <= n_t <= n_theta:
        raise ConfigurationError(f"antenna index {n_t} outside 1..{n_theta}")
    return np.exp(2j * np.pi * n_t * np.arange(n_theta) / n_theta)


def pilot_matrix(nt, n_theta):
    """(n_theta, nt) matrix whose column t-1 is the antenna-t sequence."""
    if nt > n_theta:
        raise ConfigurationError(
            f"pilot length {n_theta} cannot separate {nt} antennas"
        )
    return np.stack([pilot_sequence(t, n_theta) for t in range(1, nt + 1)], axis=1)


def rrc_taps(num_taps=40, rolloff=0.75, upsample_factor=4):
    """Unit-energy root-raised-cosine taps at ``upsample_factor`` samples/symbol.

    The impulse response is centered on the tap grid; the removable
    singularities at t = 0 and |t| = 1/(4*rolloff) symbol durations use
    their analytic limits.
    """
    if num_taps < 2:
        raise ConfigurationError("need at least 2 filter taps")
    if not 0.0 < rolloff <= 1.0:
        raise ConfigurationError("roll-off must be in (0, 1]")
    if upsample_factor < 1:
        raise ConfigurationError("upsample factor must be >= 1")
    beta = float(rolloff)
    t = (np.arange(num_taps) - (num_taps - 1) / 2.0) / upsample_factor
    h = np.empty(num_taps)
    for k, tk in enumerate(t):
        if abs(tk) < 1e-12:
            h[k] = 1.0 - beta + 4.0 * beta / np.pi
        elif abs(abs(tk) - 1.0 / (4.0 * beta)) < 1e-12:
            h[k] = (beta / np.sqrt(2.0)) * (
                (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
                + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
            )
        else:
            num = np.sin(np.pi * tk * (1.0 - beta)) + 4.0 * beta * tk * np.cos(
                np.pi * tk * (1.0 + beta)
            )
            h[k] = num / (np.pi * tk * (1.0 - (4.0 * beta * tk) ** 2))
    return h / np.sqrt(np.sum(h**2))


def build_frame(data_vectors, layout, nt=None):
    """Assemble one frame around a block of (n, nt) data vectors."""
    x = np.asarray(data_vectors, dtype=np.complex128)
    if x.ndim != 2:
        raise DimensionError("data vectors must form an (n, nt) matrix")
    if nt is None:
        nt = x.shape[1]
    elif x.shape[1] != nt:
        raise DimensionError(f"data vectors have {x.shape[1]} antennas, expected {nt}")
    if x.shape[0] != layout.data_symbols_per_frame:
        raise FramingError(
            f"got {x.shape[0]} data vectors, layout wants {layout.data_symbols_per_frame}"
        )
    symbols = np.zeros((nt, layout.frame_symbols), dtype=np.complex128)
    sections = layout.sections()
    pilots = np.tile(
        pilot_matrix(nt, layout.pilot_seq_len).T, (1, layout.pilot_sequences_per_signal)
    )
    symbols[:, sections["pilot_first"]] = pilots
    symbols[:, sections["pilot_second"]] = pilots
    symbols[0, sections["fo"]] = 1.0
    symbols[:, sections["data"]] = x.T
    return Frame(symbols=symbols, layout=layout)


def pulse_shape(symbols, taps, upsample_factor):
    """Upsample (insert zeros) and filter; full convolution per antenna.

    Accepts an (nt, n_symbols) matrix and returns
    (nt, n_symbols*U + len(taps) - 1).
    """
    s = np.atleast_2d(np.asarray(symbols, dtype=np.complex128))
    up = np.zeros((s.shape[0], s.shape[1] * upsample_factor), dtype=np.complex128)
    up[:, ::upsample_factor] = s
    return np.stack([np.convolve(row, taps) for row in up])


def assemble_transmission(frames, layout):
    """Concatenate frames into the full per-antenna sample streams.

    ``frames`` is a nonempty sequence of equal-layout :class:`Frame`;
    ``layout`` a :class:`TransmissionLayout`. The shaped frame stream is
    scaled by symbol_scale = power_factor / (its peak amplitude); SNR
    on-blocks run at the resulting data maximum; sync pulses stay at
    amplitude 1 (full scale). Any sample magnitude above full scale
    raises :class:`RangeError`.
    """
    if not frames:
        raise FramingError("need at least one frame")
    if len(frames) != layout.n_frames:
        raise FramingError(f"got {len(frames)} frames, layout wants {layout.n_frames}")
    frame_layout = frames[0].layout
    nt = frames[0].nt
    for f in frames:
        if f.layout != frame_layout or f.nt != nt:
            raise FramingError("all frames must share one layout and antenna count")
    u = frame_layout.upsample_factor
    taps = rrc_taps(frame_layout.rrc_num_taps, frame_layout.rrc_rolloff, u)

    stream = np.concatenate([f.symbols for f in frames], axis=1)
    data_wave = pulse_shape(stream, taps, u)
    peak = float(np.max(np.abs(data_wave)))
    if layout.power_factor > 0 and peak == 0.0:
        raise DegenerateInputError("all-zero frame stream cannot be power-scaled")
    symbol_scale = layout.power_factor / peak if peak > 0 else 0.0
    data_wave *= symbol_scale
    x_max = layout.power_factor if peak > 0 else 0.0

    sync_len = layout.sync_samples(u)
    snr_len = layout.snr_samples(nt, u)
    data_len = data_wave.shape[1]
    total = sync_len + snr_len + data_len
    samples = np.zeros((nt, total), dtype=np.complex128)

    period = (1 + layout.sync_gap_symbols) * u
    samples[0, 0 : layout.sync_pulses * period : period] = 1.0

    block = layout.snr_block_symbols * u
    for t in range(nt):
        base = sync_len + t * 2 * layout.snr_blocks * block
        for b in range(layout.snr_blocks):
            start = base + 2 * b * block
            samples[t, start : start + block] = x_max

    samples[:, sync_len + snr_len :] = data_wave

    if np.max(np.abs(samples.real)) > 1.0 or np.max(np.abs(samples.imag)) > 1.0:
        raise RangeError("scaled transmission exceeds quantizer full scale")

    sections = {
        "sync": (0, sync_len),
        "snr": (sync_len, snr_len),
        "data": (sync_len + snr_len, data_len),
    }
    return TransmissionVector(
        samples=samples,
        sections=sections,
        frame_layout=frame_layout,
        layout=layout,
        symbol_scale=symbol_scale,
        x_max=x_max,
    )


def quantize_i16(waveform):
    """Map complex samples to interleaved I,Q int16 at full scale 32767.

    Rounds to nearest; magnitudes above 1.0 raise :class:`RangeError`.
    """
    w = np.asarray(waveform, dtype=np.complex128).reshape(-1)
    flat = np.empty(2 * w.size)
    flat[0::2] = w.real
    flat[1::2] = w.imag
    if flat.size and np.max(np.abs(flat)) > 1.0:
        raise RangeError("sample magnitude above full scale; rescale before quantizing")
    return np.round(flat * FULL_SCALE).astype(np.int16)


def dequantize_i16(codes):
    """Inverse of :func:`quantize_i16` (up to the 0.5 LSB rounding)."""
    c = np.asarray(codes)
    if c.size % 2:
        raise FramingError("interleaved I,Q buffer must have even length")
    flat = c.astype(np.float64) / FULL_SCALE
    return flat[0::2] + 1j * flat[1::2]


def write_waveform(prefix, tx, extra_meta=None):
    """Write per-antenna I16 files plus a JSON sidecar; returns sidecar path.

    Files: ``<prefix>_ant<k>.bin`` (little-endian int16, interleaved I,Q)
    and ``<prefix>_meta.json``.
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    files = []
    for t in range(tx.nt):
        path = prefix.parent / f"{prefix.name}_ant{t + 1}.bin"
        quantize_i16(tx.samples[t]).astype("<i2").tofile(path)
        files.append(path.name)
    meta = {
        "schema_version": SIDECAR_SCHEMA_VERSION,
        "sample_rate": tx.layout.sample_rate,
        "nt": tx.nt,
        "full_scale": FULL_SCALE,
        "power_factor": tx.layout.power_factor,
        "symbol_scale": tx.symbol_scale,
        "x_max": tx.x_max,
        "sections": {k: list(v) for k, v in tx.sections.items()},
        "frame_layout": asdict(tx.frame_layout),
        "transmission_layout": asdict(tx.layout),
        "files": files,
    }
    if extra_meta:
        meta.update(extra_meta)
    sidecar = prefix.parent / f"{prefix.name}_meta.json"
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return sidecar


def read_waveform(sidecar_path):
    """Load a sidecar plus its I16 files back into complex streams."""
    sidecar_path = Path(sidecar_path)
    meta = json.loads(sidecar_path.read_text())
    if meta.get("schema_version") != SIDECAR_SCHEMA_VERSION:
        raise ConfigurationError(
            f"unsupported sidecar schema {meta.get('schema_version')!r}"
        )
    streams = []
    for name in meta["files"]:
        codes = np.fromfile(sidecar_path.parent / name, dtype="<i2")
        streams.append(dequantize_i16(codes))
    return np.stack(streams), meta
