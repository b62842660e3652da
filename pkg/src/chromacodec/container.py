"""Bit-exact container format (magic "CHC1").

Layout, all little-endian:

    magic "CHC1" | version u8 | width u32 | height u32 | K u8 |
    model_hash u64 | method u8 | method params | correction 4 x i16 |
    packing u8 (0=raw, 1=huffman) | symbol_count u32 |
    [huffman only: alphabet_size u8, lengths u8 x alphabet] |
    payload_bit_length u32 | payload bytes | FNV-1a-64 checksum u64

Method params: Grid -> cell u16; Slic -> S u16, m Q8.8; QuickShift -> ratio
Q0.16, kernel Q8.8, max_dist Q8.8; PerPixel -> none. Correction scale is
signed Q4.12, offset signed Q1.14. Both sides of the codec use the
dequantized values, so quantization cannot cause encoder/decoder drift.
"""

import struct
from dataclasses import dataclass

from chromacodec.errors import (
    ChecksumMismatch,
    InvalidParams,
    MalformedBitstream,
)
from chromacodec.oracle import CorrectionParams
from chromacodec.pixelio import fnv1a64
from chromacodec.regions import GridParams, QuickShiftParams, SlicParams

MAGIC = b"CHC1"
VERSION = 1

METHOD_PER_PIXEL = 0
METHOD_GRID = 1
METHOD_SLIC = 2
METHOD_QUICKSHIFT = 3

PACKING_RAW = 0
PACKING_HUFFMAN = 1

SCALE_FRAC_BITS = 12  # Q4.12
OFFSET_FRAC_BITS = 14  # Q1.14


def _round_half_away(v):
    return int(v + 0.5) if v >= 0 else -int(-v + 0.5)


def _quant_i16(value, frac_bits):
    q = _round_half_away(value * (1 << frac_bits))
    return max(-32768, min(32767, q))


def _quant_u16(value, frac_bits):
    q = _round_half_away(value * (1 << frac_bits))
    return max(0, min(65535, q))


@dataclass(frozen=True)
class QuantizedCorrection:
    scale_cb: int
    offset_cb: int
    scale_cr: int
    offset_cr: int

    def dequantize(self):
        return CorrectionParams(
            scale_cb=self.scale_cb / (1 << SCALE_FRAC_BITS),
            offset_cb=self.offset_cb / (1 << OFFSET_FRAC_BITS),
            scale_cr=self.scale_cr / (1 << SCALE_FRAC_BITS),
            offset_cr=self.offset_cr / (1 << OFFSET_FRAC_BITS),
        )


def quantize_correction(params):
    return QuantizedCorrection(
        scale_cb=_quant_i16(params.scale_cb, SCALE_FRAC_BITS),
        offset_cb=_quant_i16(params.offset_cb, OFFSET_FRAC_BITS),
        scale_cr=_quant_i16(params.scale_cr, SCALE_FRAC_BITS),
        offset_cr=_quant_i16(params.offset_cr, OFFSET_FRAC_BITS),
    )


def canonical_method_params(method, params):
    """Round params onto the wire grid; segmentation must run on these values."""
    if method == METHOD_PER_PIXEL:
        return None
    if method == METHOD_GRID:
        cell = int(params.cell_size)
        if not 1 <= cell <= 65535:
            raise InvalidParams(f"grid cell {cell} not storable")
        return GridParams(cell_size=cell)
    if method == METHOD_SLIC:
        s = int(params.region_size)
        if not 1 <= s <= 65535:
            raise InvalidParams(f"slic region size {s} not storable")
        m_q = _quant_u16(params.compactness, 8)
        if m_q == 0:
            raise InvalidParams("slic compactness quantizes to zero")
        return SlicParams(region_size=s, compactness=m_q / 256.0)
    if method == METHOD_QUICKSHIFT:
        ratio_q = min(65535, max(1, _round_half_away(params.ratio * 65536)))
        kernel_q = _quant_u16(params.kernel_size, 8)
        dist_q = _quant_u16(params.max_dist, 8)
        if kernel_q == 0 or dist_q == 0:
            raise InvalidParams("quickshift params quantize to zero")
        return QuickShiftParams(
            ratio=ratio_q / 65536.0, kernel_size=kernel_q / 256.0, max_dist=dist_q / 256.0
        )
    raise InvalidParams(f"unknown method {method}")


def _pack_method_params(method, params):
    if method == METHOD_PER_PIXEL:
        return b""
    if method == METHOD_GRID:
        return struct.pack("<H", params.cell_size)
    if method == METHOD_SLIC:
        return struct.pack("<HH", params.region_size, _quant_u16(params.compactness, 8))
    if method == METHOD_QUICKSHIFT:
        return struct.pack(
            "<HHH",
            _round_half_away(params.ratio * 65536),
            _quant_u16(params.kernel_size, 8),
            _quant_u16(params.max_dist, 8),
        )
    raise InvalidParams(f"unknown method {method}")


@dataclass
class ParsedContainer:
    version: int
    width: int
    height: int
    k: int
    model_hash: int
    method: int
    params: object
    correction: QuantizedCorrection
    packing: int
    symbol_count: int
    huffman_lengths: tuple  # empty for raw packing
    payload_bit_length: int
    payload: bytes


def build_container(width, height, k, model_hash, method, params, correction_q,
                    packing, symbol_count, huffman_lengths, payload, payload_bit_length):
    """Serialize the container; params must already be canonical (quantized)."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<BIIBQ", VERSION, width, height, k, model_hash)
    out += struct.pack("<B", method)
    out += _pack_method_params(method, params)
    out += struct.pack(
        "<hhhh",
        correction_q.scale_cb,
        correction_q.offset_cb,
        correction_q.scale_cr,
        correction_q.offset_cr,
    )
    out += struct.pack("<BI", packing, symbol_count)
    if packing == PACKING_HUFFMAN:
        if not 1 <= len(huffman_lengths) <= 255:
            raise InvalidParams(f"alphabet size {len(huffman_lengths)} not storable")
        out += struct.pack("<B", len(huffman_lengths))
        out += bytes(huffman_lengths)
    out += struct.pack("<I", payload_bit_length)
    out += payload
    out += struct.pack("<Q", fnv1a64(bytes(out)))
    return bytes(out)


def parse_container(data):
    """Verify the checksum first, then decode the header fields."""
    if len(data) < len(MAGIC) + 8:
        raise MalformedBitstream("container too short")
    body, stored = data[:-8], struct.unpack("<Q", data[-8:])[0]
    if fnv1a64(body) != stored:
        raise ChecksumMismatch("container checksum does not validate")
    if body[:4] != MAGIC:
        raise MalformedBitstream("bad container magic")
    try:
        off = 4
        version, width, height, k, model_hash = struct.unpack_from("<BIIBQ", body, off)
        off += struct.calcsize("<BIIBQ")
        if version != VERSION:
            raise MalformedBitstream(f"unknown container version {version}")
        (method,) = struct.unpack_from("<B", body, off)
        off += 1
        if method == METHOD_PER_PIXEL:
            params = None
        elif method == METHOD_GRID:
            (cell,) = struct.unpack_from("<H", body, off)
            off += 2
            params = GridParams(cell_size=cell)
        elif method == METHOD_SLIC:
            s, m_q = struct.unpack_from("<HH", body, off)
            off += 4
            params = SlicParams(region_size=s, compactness=m_q / 256.0)
        elif method == METHOD_QUICKSHIFT:
            ratio_q, kernel_q, dist_q = struct.unpack_from("<HHH", body, off)
            off += 6
            params = QuickShiftParams(
                ratio=ratio_q / 65536.0, kernel_size=kernel_q / 256.0, max_dist=dist_q / 256.0
            )
        else:
            raise MalformedBitstream(f"unknown method id {method}")
        sc_cb, of_cb, sc_cr, of_cr = struct.unpack_from("<hhhh", body, off)
        off += 8
        correction = QuantizedCorrection(sc_cb, of_cb, sc_cr, of_cr)
        packing, symbol_count = struct.unpack_from("<BI", body, off)
        off += struct.calcsize("<BI")
        if packing not in (PACKING_RAW, PACKING_HUFFMAN):
            raise MalformedBitstream(f"unknown packing mode {packing}")
        lengths = ()
        if packing == PACKING_HUFFMAN:
            (alphabet,) = struct.unpack_from("<B", body, off)
            off += 1
            if alphabet < 1:
                raise MalformedBitstream("empty huffman alphabet")
            lengths = tuple(body[off:off + alphabet])
            if len(lengths) != alphabet:
                raise MalformedBitstream("truncated huffman table")
            off += alphabet
        (payload_bits,) = struct.unpack_from("<I", body, off)
        off += 4
        payload = body[off:]
        if len(payload) != (payload_bits + 7) // 8:
            raise MalformedBitstream(
                f"payload holds {len(payload)} bytes, bit length implies {(payload_bits + 7) // 8}"
            )
    except struct.error as exc:
        raise MalformedBitstream(f"truncated container ({exc})") from exc
    return ParsedContainer(
        version=version,
        width=width,
        height=height,
        k=k,
        model_hash=model_hash,
        method=method,
        params=params,
        correction=correction,
        packing=packing,
        symbol_count=symbol_count,
        huffman_lengths=lengths,
        payload_bit_length=payload_bits,
        payload=payload,
    )
