import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chromacodec.entropy import (
    HuffmanTable,
    build_huffman,
    canonical_codes,
    dpcm_transform,
    huffman_decode,
    huffman_encode,
    pack_fixed,
    unpack_fixed,
    unzigzag,
    zigzag,
)
from chromacodec.errors import EmptyAlphabet, MalformedBitstream, SymbolOutOfAlphabet


def test_dpcm_example():
    assert dpcm_transform([5, 5, 7, 6]).tolist() == [5, 0, 2, -1]


def test_dpcm_empty():
    assert dpcm_transform([]).tolist() == []


@given(st.lists(st.integers(0, 15), max_size=200))
@settings(max_examples=50, deadline=None)
def test_dpcm_bijection(seq):
    arr = np.array(seq, dtype=np.int64)
    back = dpcm_transform(dpcm_transform(arr, "forward"), "inverse")
    assert np.array_equal(back, arr)


@given(st.lists(st.integers(-20, 20), max_size=100))
@settings(max_examples=50, deadline=None)
def test_zigzag_bijection(deltas):
    arr = np.array(deltas, dtype=np.int64)
    mapped = zigzag(arr)
    assert np.all(mapped >= 0)
    assert np.array_equal(unzigzag(mapped), arr)


def test_build_huffman_textbook_example():
    # {a:5, b:2, c:1, d:1} -> lengths 1,2,3,3; "aaaaabbcd" costs 15 bits
    table = build_huffman({0: 5, 1: 2, 2: 1, 3: 1})
    assert table.lengths == (1, 2, 3, 3)
    stream = [0] * 5 + [1] * 2 + [2, 3]
    _, bits = huffman_encode(table, stream)
    assert bits == 15


def test_build_huffman_uniform_four():
    table = build_huffman({0: 3, 1: 3, 2: 3, 3: 3})
    assert table.lengths == (2, 2, 2, 2)


def test_build_huffman_single_symbol():
    table = build_huffman({2: 10})
    assert table.lengths == (0, 0, 0)
    payload, bits = huffman_encode(table, [2, 2, 2])
    assert bits == 0 and payload == b""
    decoded = huffman_decode(table, payload, 0, 3)
    assert decoded.tolist() == [2, 2, 2]


def test_build_huffman_empty():
    with pytest.raises(EmptyAlphabet):
        build_huffman({})


def test_canonical_assignment():
    table = build_huffman({0: 5, 1: 2, 2: 1, 3: 1})
    codes = canonical_codes(table)
    assert codes[0] == (0b0, 1)
    assert codes[1] == (0b10, 2)
    assert codes[2] == (0b110, 3)
    assert codes[3] == (0b111, 3)


def test_kraft_equality():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 20))
        counts = rng.integers(1, 100, n)
        table = build_huffman({i: int(c) for i, c in enumerate(counts)})
        used = [l for l in table.lengths if l > 0]
        assert sum(2.0 ** -l for l in used) == 1.0
        table.validate()


@given(
    st.lists(st.integers(0, 12), min_size=1, max_size=300),
    st.integers(0, 2**31 - 1),
)
@settings(max_examples=60, deadline=None)
def test_huffman_roundtrip(seq, _seed):
    arr = np.array(seq, dtype=np.int64)
    table = build_huffman(np.bincount(arr))
    payload, bits = huffman_encode(table, arr)
    back = huffman_decode(table, payload, bits, len(arr))
    assert np.array_equal(back, arr)


def test_huffman_truncated_rejected():
    arr = np.array([0, 1, 2, 0, 1, 2, 2, 2], dtype=np.int64)
    table = build_huffman(np.bincount(arr))
    payload, bits = huffman_encode(table, arr)
    with pytest.raises(MalformedBitstream):
        huffman_decode(table, payload, bits - 2, len(arr))


def test_huffman_trailing_garbage_rejected():
    arr = np.array([0, 1, 0, 1, 1], dtype=np.int64)
    table = build_huffman(np.bincount(arr))
    payload, bits = huffman_encode(table, arr)
    # declare more bits than the symbols consume
    with pytest.raises(MalformedBitstream):
        huffman_decode(table, payload + b"\x00", bits + 8, len(arr))


def test_huffman_symbol_out_of_alphabet():
    table = build_huffman({0: 1, 1: 1})
    with pytest.raises(SymbolOutOfAlphabet):
        huffman_encode(table, [0, 1, 5])


def test_huffman_rejects_lone_nonzero_length():
    with pytest.raises(MalformedBitstream):
        huffman_decode(HuffmanTable(lengths=(0, 3)), b"\x00", 3, 1)


def test_mean_code_length_below_entropy_plus_one():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 10))
        probs = rng.dirichlet(np.ones(n) * rng.uniform(0.2, 3.0))
        seq = rng.choice(n, size=400, p=probs)
        counts = np.bincount(seq, minlength=n)
        table = build_huffman(counts)
        _, bits = huffman_encode(table, seq)
        p = counts[counts > 0] / len(seq)
        entropy_bits = float(-(p * np.log2(p)).sum())
        assert bits / len(seq) < entropy_bits + 1.0


@given(st.lists(st.integers(0, 7), min_size=1, max_size=100), st.integers(1, 4))
@settings(max_examples=50, deadline=None)
def test_pack_fixed_roundtrip(seq, bits):
    arr = np.array(seq, dtype=np.int64) % (1 << bits)
    payload, total = pack_fixed(arr, bits)
    assert total == bits * len(arr)
    back = unpack_fixed(payload, bits, len(arr), total)
    assert np.array_equal(back, arr)


def test_pack_fixed_zero_width():
    payload, total = pack_fixed([0, 0, 0], 0)
    assert payload == b"" and total == 0
    assert unpack_fixed(b"", 0, 3, 0).tolist() == [0, 0, 0]
