"""Bit mapping, constellations and maximum-likelihood detection.

Two transmit schemes are implemented:

* ``sm`` -- spatial modulation: per symbol, the first log2(nt) bits pick
  the single active antenna (natural binary, ``00...0`` -> antenna 1) and
  the remaining log2(M) bits pick a Gray-labelled constellation point.
* ``smx`` -- spatial multiplexing: nt * log2(M) bits per symbol, one
  constellation point per antenna, scaled by 1/sqrt(nt) so the transmit
  vector has unit average energy in both schemes.

Candidate sets are always enumerated by the integer value of the bit
block (MSB first), which also defines the detector tie-break order.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import ConfigurationError, DimensionError, FramingError

__all__ = [
    "Constellation",
    "SmSymbol",
    "ComplexityReport",
    "build_constellation",
    "bits_to_indices",
    "indices_to_bits",
    "bits_per_vector",
    "sm_modulate",
    "sm_demap",
    "smx_modulate",
    "smx_demap",
    "candidate_vectors",
    "ml_detect",
    "ml_detect_batch",
    "sm_ml_detect",
    "sm_ml_detect_batch",
    "receiver_complexity",
    "complexity_report",
]

SUPPORTED_ORDERS = (2, 4, 16, 64, 256)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy constellation with Gray bit labels.

    ``points[i]`` is the point whose bit label is the binary word ``i``
    (MSB first); the Gray structure lives in the point geometry, so
    adjacent points differ in exactly one label bit.
    """

    order: int
    points: np.ndarray
    labels: tuple

    @property
    def bits_per_symbol(self):
        return self.order.bit_length() - 1


@dataclass(frozen=True)
class SmSymbol:
    """One spatial-modulation symbol: active antenna plus drawn point.

    Indices are 1-based: ``antenna_index`` in 1..nt, ``constellation_index``
    in 1..M.
    """

    antenna_index: int
    constellation_index: int
    value: complex


@dataclass(frozen=True)
class ComplexityReport:
    """Real-multiplication counts of the two ML receivers and their gap."""

    nt: int
    nr: int
    bits_per_symbol: int
    sm_real_multiplications: int
    smx_real_multiplications: int
    relative_reduction_percent: Fraction


def _gray_decode(g):
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


def build_constellation(order):
    """Build the Gray-labelled constellation for a supported order."""
    if order not in SUPPORTED_ORDERS:
        raise ConfigurationError(
            f"unsupported modulation order {order}; choose from {SUPPORTED_ORDERS}"
        )
    k = order.bit_length() - 1
    if order == 2:
        points = np.array([1.0 + 0.0j, -1.0 + 0.0j])
    else:
        half = k // 2
        levels = 2**half
        points = np.empty(order, dtype=np.complex128)
        for label in range(order):
            i_idx = _gray_decode(label >> half)
            q_idx = _gray_decode(label & (levels - 1))
            points[label] = ((levels - 1) - 2 * i_idx) + 1j * ((levels - 1) - 2 * q_idx)
        points /= np.sqrt(2.0 * (order - 1) / 3.0)
    labels = tuple(format(i, f"0{k}b") for i in range(order))
    return Constellation(order=order, points=points, labels=labels)


def _as_bits(bits):
    b = np.asarray(bits)
    if b.ndim != 1:
        raise DimensionError("bit array must be one-dimensional")
    if b.size and not np.isin(b, (0, 1)).all():
        raise FramingError("bit array may only contain 0 and 1")
    return b.astype(np.uint8)


def bits_to_indices(bits, m):
    """Pack a flat 0/1 array into m-bit block indices, MSB first."""
    b = _as_bits(bits)
    if b.size % m:
        raise FramingError(f"bit count {b.size} is not a multiple of block size {m}")
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    return b.reshape(-1, m).astype(np.int64) @ weights


def indices_to_bits(indices, m):
    """Inverse of :func:`bits_to_indices`."""
    idx = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def bits_per_vector(scheme, nt, order):
    """Bits carried by one transmit vector."""
    if nt < 1 or nt & (nt - 1):
        raise ConfigurationError(f"antenna count {nt} must be a power of two")
    k = order.bit_length() - 1
    if scheme == "sm":
        return (nt.bit_length() - 1) + k
    if scheme == "smx":
        return nt * k
    raise ConfigurationError(f"unknown scheme {scheme!r}")


def sm_modulate(bits, nt, constellation):
    """Map bits to spatial-modulation symbols.

    Returns ``(symbols, vectors)`` where ``symbols`` is a list of
    :class:`SmSymbol` and ``vectors`` is the (n, nt) complex array with a
    single nonzero entry per row.
    """
    ant_idx, sym_idx = sm_map_indices(bits, nt, constellation)
    vectors = sm_vectors(ant_idx, sym_idx, nt, constellation)
    symbols = [
        SmSymbol(int(a) + 1, int(s) + 1, complex(constellation.points[s]))
        for a, s in zip(ant_idx, sym_idx)
    ]
    return symbols, vectors


def sm_map_indices(bits, nt, constellation):
    """Bit blocks -> (antenna index, point index), both 0-based arrays."""
    m = bits_per_vector("sm", nt, constellation.order)
    blocks = bits_to_indices(bits, m)
    k = constellation.bits_per_symbol
    return blocks >> k, blocks & (constellation.order - 1)


def sm_vectors(ant_idx, sym_idx, nt, constellation):
    n = len(ant_idx)
    vectors = np.zeros((n, nt), dtype=np.complex128)
    vectors[np.arange(n), ant_idx] = constellation.points[sym_idx]
    return vectors


def sm_demap(symbols, nt, constellation):
    """Bits back out of a sequence of :class:`SmSymbol`."""
    m = bits_per_vector("sm", nt, constellation.order)
    k = constellation.bits_per_symbol
    blocks = np.array(
        [((s.antenna_index - 1) << k) | (s.constellation_index - 1) for s in symbols],
        dtype=np.int64,
    )
    return indices_to_bits(blocks, m)


def smx_modulate(bits, nt, constellation):
    """Map bits to (n, nt) spatial-multiplexing vectors, unit total energy."""
    idx = smx_map_indices(bits, nt, constellation)
    return constellation.points[idx] / np.sqrt(nt)


def smx_map_indices(bits, nt, constellation):
    """Bit blocks -> (n, nt) per-antenna point indices (antenna 1 first)."""
    k = constellation.bits_per_symbol
    b = _as_bits(bits)
    if b.size % (nt * k):
        raise FramingError(
            f"bit count {b.size} is not a multiple of {nt * k} (nt*log2(M))"
        )
    weights = 1 << np.arange(k - 1, -1, -1, dtype=np.int64)
    return b.reshape(-1, nt, k).astype(np.int64) @ weights


def smx_demap(vectors, constellation):
    """Nearest-point demapping per antenna; exact inverse of smx_modulate."""
    v = np.asarray(vectors)
    nt = v.shape[1]
    d = v[:, :, None] * np.sqrt(nt) - constellation.points[None, None, :]
    idx = np.argmin(d.real**2 + d.imag**2, axis=2)
    k = constellation.bits_per_symbol
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
    bits = ((idx[:, :, None] >> shifts) & 1).astype(np.uint8)
    return bits.reshape(-1)


def candidate_vectors(scheme, nt, constellation):
    """All 2**m transmit vectors in bit-block enumeration order.

    Row ``b`` is the vector produced by the m-bit block with integer value
    ``b``; detectors and the union bound all share this ordering.
    """
    m = bits_per_vector(scheme, nt, constellation.order)
    blocks = indices_to_bits(np.arange(2**m), m)
    if scheme == "sm":
        _, vectors = sm_modulate(blocks, nt, constellation)
        return vectors
    return smx_modulate(blocks, nt, constellation)


def ml_detect(y, h, candidates):
    """Brute-force ML over an explicit candidate set.

    Returns ``(index, vector)`` minimizing ||y - H x||^2; ties go to the
    lowest candidate index.
    """
    idx = int(ml_detect_batch(np.asarray(y)[None, :], h, candidates)[0])
    return idx, candidates[idx]


def ml_detect_batch(y, h, candidates):
    """Vectorized :func:`ml_detect` over (n, nr) received rows."""
    y = np.asarray(y, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    x = np.asarray(candidates, dtype=np.complex128)
    if y.ndim != 2 or y.shape[1] != h.shape[0]:
        raise DimensionError("received block must be (n, nr) matching H")
    if x.shape[1] != h.shape[1]:
        raise DimensionError("candidate set must be (n_cand, nt) matching H")
    hx = x @ h.T  # (n_cand, nr)
    return kernels.detect_min_indices(y, hx)


def sm_ml_detect(y, h, constellation):
    """Single-stream ML detector specialised to one active antenna.

    Scans metric sum_r |y_r - h[r, a] s|^2 over antennas (outer) and
    points (inner); ties resolve to the lowest (antenna, point) pair.
    Returns an :class:`SmSymbol`.
    """
    flat = int(sm_ml_detect_batch(np.asarray(y)[None, :], h, constellation)[0])
    m_ord = constellation.order
    a, p = divmod(flat, m_ord)
    return SmSymbol(a + 1, p + 1, complex(constellation.points[p]))


def sm_ml_detect_batch(y, h, constellation):
    """Vectorized :func:`sm_ml_detect`; returns flat antenna*M+point indices."""
    y = np.asarray(y, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if y.ndim != 2 or y.shape[1] != h.shape[0]:
        raise DimensionError("received block must be (n, nr) matching H")
    return kernels.sm_detect_min_indices(y, h, constellation.points)


def receiver_complexity(scheme, nt, nr, bits_per_symbol):
    """Real multiplications per detected symbol of the ML receiver."""
    if scheme == "sm":
        return 8 * nr * 2**bits_per_symbol
    if scheme == "smx":
        return 4 * (nt + 1) * nr * 2**bits_per_symbol
    raise ConfigurationError(f"unknown scheme {scheme!r}")


def complexity_report(nt, nr, bits_per_symbol):
    """Compare both receivers at equal spectral efficiency.

    The relative reduction is exact rational arithmetic:
    100 * (1 - 2/(nt + 1)).
    """
    sm = receiver_complexity("sm", nt, nr, bits_per_symbol)
    smx = receiver_complexity("smx", nt, nr, bits_per_symbol)
    reduction = Fraction(100) * (1 - Fraction(sm, smx))
    return ComplexityReport(
        nt=nt,
        nr=nr,
        bits_per_symbol=bits_per_symbol,
        sm_real_multiplications=sm,
        smx_real_multiplications=smx,
        relative_reduction_percent=reduction,
    )
