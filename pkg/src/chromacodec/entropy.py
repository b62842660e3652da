"""DPCM + canonical Huffman coding of branch-index streams.

Branch indices are DPCM-transformed, the signed deltas zigzag-mapped to a
compact non-negative alphabet, and Huffman-coded with a canonical code that
serializes as one length byte per symbol. A stream with a single distinct
symbol is coded as zero payload bits: all lengths are zero and the symbol is
recoverable because the alphabet is always sized max_used_symbol + 1.
"""

import heapq
from dataclasses import dataclass

import numpy as np

from chromacodec.errors import (
    EmptyAlphabet,
    MalformedBitstream,
    SymbolOutOfAlphabet,
)

MAX_CODE_LENGTH = 32


def dpcm_transform(symbols, direction="forward"):
    """forward: d[0]=s[0], d[i]=s[i]-s[i-1]; inverse is the exact cumsum."""
    arr = np.asarray(symbols, dtype=np.int64)
    if arr.size == 0:
        return arr.copy()
    if direction == "forward":
        return np.diff(arr, prepend=0)
    if direction == "inverse":
        return np.cumsum(arr)
    raise ValueError(f"direction must be forward or inverse, got {direction!r}")


def zigzag(deltas):
    """Map signed deltas to non-negative symbols: 0,-1,1,-2,2 -> 0,1,2,3,4."""
    arr = np.asarray(deltas, dtype=np.int64)
    return np.where(arr >= 0, 2 * arr, -2 * arr - 1)


def unzigzag(symbols):
    arr = np.asarray(symbols, dtype=np.int64)
    return np.where(arr % 2 == 0, arr // 2, -(arr + 1) // 2)


@dataclass(frozen=True)
class HuffmanTable:
    """Code length per symbol over the alphabet [0, len(lengths)).

    Length 0 marks an unused symbol, except when every length is zero: then
    the stream consists solely of symbol len(lengths)-1 and carries no bits.
    """

    lengths: tuple

    @property
    def alphabet_size(self):
        return len(self.lengths)

    def is_degenerate(self):
        return all(l == 0 for l in self.lengths)

    def validate(self):
        used = [l for l in self.lengths if l > 0]
        if any(l < 0 or l > MAX_CODE_LENGTH for l in self.lengths):
            raise MalformedBitstream("code length out of range")
        if not used:
            return  # single-symbol convention
        if len(used) == 1:
            raise MalformedBitstream("a lone used symbol must use the zero-length convention")
        kraft = sum(1 << (MAX_CODE_LENGTH - l) for l in used)
        if kraft != 1 << MAX_CODE_LENGTH:
            raise MalformedBitstream("code lengths violate the Kraft equality")


def build_huffman(freqs):
    """Optimal prefix code lengths by pairwise merging.

    freqs maps symbol -> count (dict or array). Ties merge the lowest total
    weight first, then the tree containing the lowest symbol. The alphabet is
    sized to the largest used symbol + 1.
    """
    if isinstance(freqs, dict):
        items = [(s, c) for s, c in freqs.items() if c > 0]
    else:
        items = [(s, int(c)) for s, c in enumerate(np.asarray(freqs)) if c > 0]
    if not items:
        raise EmptyAlphabet("no symbols with nonzero frequency")
    if any(s < 0 for s, _ in items):
        raise SymbolOutOfAlphabet("symbols must be non-negative")
    alphabet = max(s for s, _ in items) + 1
    lengths = [0] * alphabet
    if len(items) == 1:
        return HuffmanTable(lengths=tuple(lengths))  # zero bits per symbol

    # heap entries: (weight, lowest symbol in tree, [symbols])
    heap = [(c, s, [s]) for s, c in sorted(items)]
    heapq.heapify(heap)
    while len(heap) > 1:
        w1, m1, s1 = heapq.heappop(heap)
        w2, m2, s2 = heapq.heappop(heap)
        for s in s1 + s2:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, min(m1, m2), s1 + s2))
    table = HuffmanTable(lengths=tuple(lengths))
    table.validate()
    return table


def canonical_codes(table):
    """Symbol -> (code, length) with shorter codes first, then symbol order."""
    ordered = sorted((l, s) for s, l in enumerate(table.lengths) if l > 0)
    codes = {}
    code = 0
    prev_len = ordered[0][0] if ordered else 0
    for length, sym in ordered:
        code <<= length - prev_len
        prev_len = length
        codes[sym] = (code, length)
        code += 1
    return codes


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.nbits = 0
        self.total = 0

    def write(self, code, length):
        if length == 0:
            return
        self.acc = (self.acc << length) | code
        self.nbits += length
        self.total += length
        while self.nbits >= 8:
            self.nbits -= 8
            self.out.append((self.acc >> self.nbits) & 0xFF)
            self.acc &= (1 << self.nbits) - 1

    def getvalue(self):
        data = bytes(self.out)
        if self.nbits:
            data += bytes([(self.acc << (8 - self.nbits)) & 0xFF])
        return data, self.total


class _BitReader:
    def __init__(self, data, bit_length):
        self.data = data
        self.bit_length = bit_length
        self.pos = 0
        if bit_length > len(data) * 8:
            raise MalformedBitstream("declared bit length exceeds payload size")

    def read_bit(self):
        if self.pos >= self.bit_length:
            raise MalformedBitstream("bitstream exhausted mid-symbol")
        byte = self.data[self.pos >> 3]
        bit = (byte >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit


def huffman_encode(table, symbols):
    """MSB-first packed bitstream; returns (payload bytes, bit length)."""
    codes = canonical_codes(table)
    writer = _BitWriter()
    degenerate = table.is_degenerate()
    only = table.alphabet_size - 1
    for s in np.asarray(symbols).tolist():
        if degenerate:
            if s != only:
                raise SymbolOutOfAlphabet(f"symbol {s} not in degenerate alphabet {{{only}}}")
            continue
        entry = codes.get(s)
        if entry is None:
            raise SymbolOutOfAlphabet(f"symbol {s} has no code")
        writer.write(*entry)
    return writer.getvalue()


def huffman_decode(table, payload, bit_length, count):
    """Decode exactly `count` symbols; the stream must use every declared bit."""
    table.validate()
    if table.is_degenerate():
        if bit_length != 0:
            raise MalformedBitstream("degenerate table with nonzero payload")
        return np.full(count, table.alphabet_size - 1, dtype=np.int64)

    by_length = {}
    for sym, length in enumerate(table.lengths):
        if length > 0:
            by_length.setdefault(length, []).append(sym)
    max_len = max(by_length)
    first_code = {}
    code = 0
    prev = min(by_length)
    for length in sorted(by_length):
        code <<= length - prev
        prev = length
        first_code[length] = code
        code += len(by_length[length])

    reader = _BitReader(payload, bit_length)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        code = 0
        length = 0
        while True:
            code = (code << 1) | reader.read_bit()
            length += 1
            if length > max_len:
                raise MalformedBitstream("code longer than any table entry")
            if length in first_code:
                offset = code - first_code[length]
                if 0 <= offset < len(by_length[length]):
                    out[i] = by_length[length][offset]
                    break
    if reader.pos != bit_length:
        raise MalformedBitstream(
            f"{bit_length - reader.pos} unread payload bits after the declared symbol count"
        )
    return out


def pack_fixed(symbols, bits):
    """Raw fixed-width packing, MSB-first; bits == 0 yields an empty payload."""
    writer = _BitWriter()
    limit = 1 << bits if bits else 1
    for s in np.asarray(symbols).tolist():
        if s < 0 or s >= limit:
            raise SymbolOutOfAlphabet(f"symbol {s} does not fit in {bits} bits")
        writer.write(s, bits)
    return writer.getvalue()


def unpack_fixed(payload, bits, count, bit_length):
    if bits == 0:
        if bit_length != 0:
            raise MalformedBitstream("zero-width packing with nonzero payload")
        return np.zeros(count, dtype=np.int64)
    if bit_length != bits * count:
        raise MalformedBitstream("payload bit length disagrees with symbol count")
    reader = _BitReader(payload, bit_length)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        value = 0
        for _ in range(bits):
            value = (value << 1) | reader.read_bit()
        out[i] = value
    return out
