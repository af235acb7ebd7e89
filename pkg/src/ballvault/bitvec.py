"""Rank-supported bit vectors.

The payload is packed into w-bit cells (w = 32 or 64, default 64) followed
by a rank directory holding one cumulative set-bit count per payload word,
packed two w/2-bit counts per cell.  Any rank costs at most two cell reads
(one directory cell, one payload word) and an access costs one, which keeps
downstream probe accounting tight.  Total footprint stays below
1.5 * length bits plus a constant.

Instances are immutable after construction and safe to query concurrently.
"""

import numpy as np

from . import _kernels as K

_SUPPORTED_WIDTHS = (32, 64)


def _pack_bits_to_cells(bits, width):
    """Pack a 0/1 uint8 array into uint64 slots of `width` low bits each."""
    if bits.size == 0:
        return np.zeros(0, dtype=np.uint64)
    nbytes_per_cell = width // 8
    raw = np.packbits(bits, bitorder="little").tobytes()
    pad = (-len(raw)) % nbytes_per_cell
    raw += b"\x00" * pad
    if width == 64:
        return np.frombuffer(raw, dtype="<u8").copy()
    return np.frombuffer(raw, dtype="<u4").astype(np.uint64)


def _pack_count_pairs(counts, width):
    """Pack consecutive counts (each < 2**(width/2)) two per uint64 cell."""
    half = width // 2
    counts = np.asarray(counts, dtype=np.uint64)
    if counts.size % 2:
        counts = np.concatenate([counts, np.zeros(1, dtype=np.uint64)])
    return counts[0::2] | (counts[1::2] << np.uint64(half))


class BitVector:
    """Immutable bit sequence with constant-probe rank."""

    def __init__(self, bits, cell_width=64):
        if cell_width not in _SUPPORTED_WIDTHS:
            raise ValueError("cell_width must be one of %r" % (_SUPPORTED_WIDTHS,))
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if bits.size and bits.max() > 1:
            raise ValueError("bits must contain only 0 and 1")
        if bits.size >= 1 << (cell_width // 2):
            raise ValueError("length %d too large for %d-bit cells"
                             % (bits.size, cell_width))
        self.length = int(bits.size)
        self.cell_width = cell_width
        self._w_log = cell_width.bit_length() - 1
        payload = _pack_bits_to_cells(bits, cell_width)
        # cumulative count of set bits before each payload word
        word_pops = np.bitwise_count(payload)
        cum = np.zeros(payload.size, dtype=np.uint64)
        if payload.size > 1:
            cum[1:] = np.cumsum(word_pops)[:-1]
        directory = _pack_count_pairs(cum, cell_width)
        self.payload_cells = int(payload.size)
        self.directory_cells = int(directory.size)
        self.cells = np.concatenate([payload, directory])
        self.cells.setflags(write=False)

    def __len__(self):
        return self.length

    def _check(self, i, upper):
        if not 0 <= i <= upper:
            raise IndexError("position %d out of range [0, %d]" % (i, upper))

    def access(self, i):
        """The i-th bit (one payload probe)."""
        self._check(i, self.length - 1)
        return K._bv_access(self.cells, self._w_log, i)

    def rank1(self, i):
        """Number of set bits in positions [0, i) (at most two probes)."""
        self._check(i, self.length)
        return K._bv_rank1(self.cells, self.payload_cells, self._w_log, i)

    def rank0(self, i):
        self._check(i, self.length)
        return i - self.rank1(i)

    def space_bits(self):
        """Exact footprint of payload plus directory in bits."""
        return (self.payload_cells + self.directory_cells) * self.cell_width


def build_bitvector(bits, cell_width=64):
    """Build a BitVector from an iterable or array of 0/1 values."""
    return BitVector(np.fromiter(iter(bits), dtype=np.uint8)
                     if not isinstance(bits, np.ndarray) else bits,
                     cell_width=cell_width)
