"""Linear-sweep EVM disassembler producing opcode mnemonic sequences.

Only mnemonics are emitted: PUSH immediates are consumed and dropped, since the
token stream feeds a bag-of-opcodes model. The table is the Shanghai fork
(PUSH0 included). Bytes with no assignment decode to ``INVALID_xx``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

_BASE_OPCODES = {
    0x00: "STOP",
    0x01: "ADD",
    0x02: "MUL",
    0x03: "SUB",
    0x04: "DIV",
    0x05: "SDIV",
    0x06: "MOD",
    0x07: "SMOD",
    0x08: "ADDMOD",
    0x09: "MULMOD",
    0x0A: "EXP",
    0x0B: "SIGNEXTEND",
    0x10: "LT",
    0x11: "GT",
    0x12: "SLT",
    0x13: "SGT",
    0x14: "EQ",
    0x15: "ISZERO",
    0x16: "AND",
    0x17: "OR",
    0x18: "XOR",
    0x19: "NOT",
    0x1A: "BYTE",
    0x1B: "SHL",
    0x1C: "SHR",
    0x1D: "SAR",
    0x20: "SHA3",
    0x30: "ADDRESS",
    0x31: "BALANCE",
    0x32: "ORIGIN",
    0x33: "CALLER",
    0x34: "CALLVALUE",
    0x35: "CALLDATALOAD",
    0x36: "CALLDATASIZE",
    0x37: "CALLDATACOPY",
    0x38: "CODESIZE",
    0x39: "CODECOPY",
    0x3A: "GASPRICE",
    0x3B: "EXTCODESIZE",
    0x3C: "EXTCODECOPY",
    0x3D: "RETURNDATASIZE",
    0x3E: "RETURNDATACOPY",
    0x3F: "EXTCODEHASH",
    0x40: "BLOCKHASH",
    0x41: "COINBASE",
    0x42: "TIMESTAMP",
    0x43: "NUMBER",
    0x44: "PREVRANDAO",
    0x45: "GASLIMIT",
    0x46: "CHAINID",
    0x47: "SELFBALANCE",
    0x48: "BASEFEE",
    0x50: "POP",
    0x51: "MLOAD",
    0x52: "MSTORE",
    0x53: "MSTORE8",
    0x54: "SLOAD",
    0x55: "SSTORE",
    0x56: "JUMP",
    0x57: "JUMPI",
    0x58: "PC",
    0x59: "MSIZE",
    0x5A: "GAS",
    0x5B: "JUMPDEST",
    0x5F: "PUSH0",
    0xF0: "CREATE",
    0xF1: "CALL",
    0xF2: "CALLCODE",
    0xF3: "RETURN",
    0xF4: "DELEGATECALL",
    0xF5: "CREATE2",
    0xFA: "STATICCALL",
    0xFD: "REVERT",
    0xFE: "INVALID",
    0xFF: "SELFDESTRUCT",
}


def _build_table() -> tuple[tuple[str, int], ...]:
    table: list[tuple[str, int]] = [(f"INVALID_{b:02x}", 0) for b in range(256)]
    for byte, name in _BASE_OPCODES.items():
        table[byte] = (name, 0)
    for n in range(1, 33):
        table[0x5F + n] = (f"PUSH{n}", n)
    for n in range(1, 17):
        table[0x7F + n] = (f"DUP{n}", 0)
        table[0x8F + n] = (f"SWAP{n}", 0)
    for n in range(5):
        table[0xA0 + n] = (f"LOG{n}", 0)
    return tuple(table)


#: ``OPCODE_TABLE[byte] == (mnemonic, immediate_width)`` for all 256 bytes.
OPCODE_TABLE = _build_table()

#: Mnemonic -> byte value for every assigned opcode.
MNEMONIC_TO_BYTE = {
    name: byte for byte, (name, _) in enumerate(OPCODE_TABLE) if not name.startswith("INVALID_")
}

_HEX_DIGITS = frozenset(string.hexdigits)


class BytecodeParseError(ValueError):
    """Malformed hex bytecode. ``offset`` is the character index into the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class OpcodeSequence:
    tokens: list[str] = field(default_factory=list)
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def parse_hex(hex_string: str) -> bytes:
    """Decode bytecode hex (optional ``0x`` prefix, either case) into bytes."""
    prefix = 2 if hex_string[:2] in ("0x", "0X") else 0
    body = hex_string[prefix:]
    for i, ch in enumerate(body):
        if ch not in _HEX_DIGITS:
            raise BytecodeParseError(f"non-hex character {ch!r}", prefix + i)
    if len(body) % 2:
        raise BytecodeParseError("odd-length hex payload", prefix + len(body) - 1)
    return bytes.fromhex(body)


def input_length(bytecode: str | bytes) -> int:
    """Number of bytes in the bytecode payload."""
    if isinstance(bytecode, str):
        bytecode = parse_hex(bytecode)
    return len(bytecode)


def disassemble(bytecode: str | bytes) -> OpcodeSequence:
    """Decode bytecode into its mnemonic stream.

    >>> disassemble("0x6001600201").tokens
    ['PUSH1', 'PUSH1', 'ADD']
    """
    code = parse_hex(bytecode) if isinstance(bytecode, str) else bytes(bytecode)
    tokens = []
    pc = 0
    n = len(code)
    truncated = False
    while pc < n:
        name, width = OPCODE_TABLE[code[pc]]
        tokens.append(name)
        pc += 1 + width
        if pc > n:
            truncated = True
    return OpcodeSequence(tokens, truncated)


def assemble(tokens: list[str | tuple[str, bytes]]) -> bytes:
    """Inverse helper: encode mnemonics (with optional PUSH immediates) to bytes.

    Bare ``PUSHn`` tokens get zero-filled immediates.
    """
    out = bytearray()
    for tok in tokens:
        name, imm = (tok, None) if isinstance(tok, str) else tok
        byte = MNEMONIC_TO_BYTE[name]
        width = OPCODE_TABLE[byte][1]
        if imm is None:
            imm = bytes(width)
        if len(imm) != width:
            raise ValueError(f"{name} takes {width} immediate bytes, got {len(imm)}")
        out.append(byte)
        out += imm
    return bytes(out)
