import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chainvit.disasm import (
    OPCODE_TABLE,
    BytecodeParseError,
    assemble,
    disassemble,
    input_length,
)
from oracles import reference_disassemble, reference_table


@pytest.mark.parametrize(
    "hex_in, tokens, truncated",
    [
        ("0x6001600201", ["PUSH1", "PUSH1", "ADD"], False),
        ("", [], False),
        ("0x", [], False),
        ("0x60", ["PUSH1"], True),
        ("0x0c", ["INVALID_0c"], False),
        ("0x5f", ["PUSH0"], False),
        ("0x7f" + "00" * 31, ["PUSH32"], True),
        ("0x7f" + "00" * 32, ["PUSH32"], False),
        ("0xfe", ["INVALID"], False),
        ("0xF4", ["DELEGATECALL"], False),
    ],
)
def test_disassemble_examples(hex_in, tokens, truncated):
    seq = disassemble(hex_in)
    assert seq.tokens == tokens
    assert seq.truncated is truncated


def test_push_immediates_are_skipped():
    # PUSH2 0x6001 hides what would otherwise be PUSH1 0x01
    assert disassemble("0x61600101").tokens == ["PUSH2", "ADD"]


@pytest.mark.parametrize(
    "bad, offset", [("0x123", 4), ("0x12zz", 4), ("0xg0", 2), ("abc", 2), ("0x 1", 2)]
)
def test_parse_errors_name_offset(bad, offset):
    with pytest.raises(BytecodeParseError) as exc:
        disassemble(bad)
    assert exc.value.offset == offset
    assert f"offset {offset}" in str(exc.value)


@pytest.mark.parametrize("hex_in, n", [("0x6001", 2), ("0x", 0), ("ab" * 32, 32)])
def test_input_length(hex_in, n):
    assert input_length(hex_in) == n


def test_input_length_rejects_bad_hex():
    with pytest.raises(BytecodeParseError):
        input_length("0x6")


def test_table_matches_reference_listing():
    ref = reference_table()
    for byte, (name, width) in enumerate(OPCODE_TABLE):
        assert (name, width) == ref.get(byte, (f"INVALID_{byte:02x}", 0))


def test_matches_reference_decoder_on_random_bytes():
    rng = random.Random(1234)
    for _ in range(300):
        code = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
        seq = disassemble(code)
        assert (seq.tokens, seq.truncated) == reference_disassemble(code)


@given(st.binary(max_size=200))
def test_deterministic_and_bounded(code):
    a, b = disassemble(code), disassemble(code)
    assert a == b
    assert len(a) <= len(code)


@given(st.lists(st.sampled_from(sorted({n for n, _ in OPCODE_TABLE if not n.startswith("INVALID_")})),
                max_size=30), st.binary(max_size=40))
def test_concatenation_locality(names, tail):
    head = assemble(names)  # ends on an instruction boundary
    assert disassemble(head + tail).tokens == disassemble(head).tokens + disassemble(tail).tokens


def test_assemble_roundtrip():
    code = assemble(["PUSH1", ("PUSH2", b"\x12\x34"), "ADD", "DELEGATECALL"])
    assert code.hex() == "6000611234" + "01f4"
    assert disassemble(code).tokens == ["PUSH1", "PUSH2", "ADD", "DELEGATECALL"]
