"""Transaction corpora: CSV ingestion, synthetic generation, stratified split.

CSV schema (header required; extra columns ignored)::

    input_hex,gas,value,label[,tx_id]

``value`` is a decimal wei amount of any size. ``label`` is a class id 0..6
or a class name (case-insensitive), and may be blank for unlabeled data.

Synthetic corpus
----------------
``synth_generate`` stands in for BTAT when it is unavailable. Each record is a
stream of common filler opcodes with a class motif spliced in, plus gas/value
drawn from class-specific ranges:

======  ====================================================  ===============  ==========
class   motif                                                 gas              value (wei)
======  ====================================================  ===============  ==========
NORMAL  token transfer: CALLER SLOAD SUB SSTORE LOG3          21k - 200k       1e14 - 1e19
DoS     unbounded loop: JUMPDEST SLOAD GAS LT JUMPI SSTORE    28M - 30M        0
OaU     unchecked arithmetic: ADD MUL SUB EXP ADDMOD MULMOD   50k - 150k       1 - 1e6
FoT     none, 0-4 random bytes of input                       21000            0
Re      external call before state write: CALL ... SSTORE     100k - 500k      1e16 - 1e18
DeC     proxy forwarding with DELEGATECALL                    60k - 300k       0
FDV     bare selector dispatch into SELFDESTRUCT/owner write  30k - 100k       0 - 1e3
======  ====================================================  ===============  ==========
"""

from __future__ import annotations

import csv
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .disasm import BytecodeParseError, MNEMONIC_TO_BYTE, OPCODE_TABLE, parse_hex

CLASS_NAMES = ("NORMAL", "DoS", "OaU", "FoT", "Re", "DeC", "FDV")
NUM_CLASSES = len(CLASS_NAMES)

#: Per-class sample counts of the full BTAT corpus.
BTAT_CLASS_COUNTS = (152423, 22994, 29254, 41732, 22682, 22455, 11209)
BTAT_TOTAL = 302749

REQUIRED_COLUMNS = ("input_hex", "gas", "value", "label")
_NAME_TO_ID = {name.lower(): i for i, name in enumerate(CLASS_NAMES)}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class TxRecord:
    input_hex: str
    gas: int
    value: int
    label: int | None = None
    tx_id: str | None = None

    def __post_init__(self):
        if self.gas < 0:
            raise ValueError("gas must be non-negative")
        if self.value < 0:
            raise ValueError("value must be non-negative")
        if self.label is not None and not 0 <= self.label < NUM_CLASSES:
            raise ValueError(f"label {self.label} out of range")

    @property
    def code(self) -> bytes:
        return parse_hex(self.input_hex)


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass(frozen=True)
class LabeledDataset:
    records: tuple[TxRecord, ...]
    split_tag: str = "unsplit"
    errors: tuple[RowError, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.records)

    @property
    def class_counts(self) -> tuple[int, ...]:
        counts = Counter(r.label for r in self.records if r.label is not None)
        return tuple(counts.get(c, 0) for c in range(NUM_CLASSES))

    @property
    def labels(self) -> list[int | None]:
        return [r.label for r in self.records]


def parse_label(text: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    if text.isdigit():
        label = int(text)
        if not 0 <= label < NUM_CLASSES:
            raise ValueError(f"label {label} out of range 0..{NUM_CLASSES - 1}")
        return label
    try:
        return _NAME_TO_ID[text.lower()]
    except KeyError:
        raise ValueError(f"unknown class name {text!r}") from None


def _parse_row(row: dict[str, str], line: int) -> TxRecord:
    hex_text = row["input_hex"].strip().lower()
    parse_hex(hex_text)
    if not hex_text.startswith("0x"):
        hex_text = "0x" + hex_text
    return TxRecord(
        input_hex=hex_text,
        gas=int(row["gas"]),
        value=int(row["value"]),
        label=parse_label(row["label"] or ""),
        tx_id=(row.get("tx_id") or "").strip() or f"line-{line}",
    )


def load_csv(
    path: str | os.PathLike, expected_counts: Sequence[int] | None = None
) -> LabeledDataset:
    """Parse a transaction CSV. Bad rows are reported in ``errors``, not dropped silently.

    If ``expected_counts`` is given, the per-class totals must match exactly.
    """
    records = []
    errors = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DatasetError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            try:
                records.append(_parse_row(row, line))
            except (BytecodeParseError, ValueError, TypeError) as exc:
                errors.append(RowError(line, str(exc)))
    ds = LabeledDataset(tuple(records), errors=tuple(errors))
    if expected_counts is not None and ds.class_counts != tuple(expected_counts):
        raise DatasetError(
            f"{path}: class totals {ds.class_counts} (sum {sum(ds.class_counts)}) "
            f"do not match expected {tuple(expected_counts)}"
        )
    return ds


def load_btat(path: str | os.PathLike) -> LabeledDataset:
    """Load the full BTAT corpus, asserting its published class totals."""
    assert sum(BTAT_CLASS_COUNTS) == BTAT_TOTAL
    return load_csv(path, expected_counts=BTAT_CLASS_COUNTS)


def write_csv(dataset: LabeledDataset | Iterable[TxRecord], path: str | os.PathLike) -> None:
    records = dataset.records if isinstance(dataset, LabeledDataset) else dataset
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tx_id", *REQUIRED_COLUMNS])
        for r in records:
            label = "" if r.label is None else str(r.label)
            writer.writerow([r.tx_id or "", r.input_hex, r.gas, r.value, label])


# --- synthetic generation -------------------------------------------------

_FILLER = (
    "PUSH1", "PUSH1", "PUSH1", "PUSH2", "PUSH4", "PUSH32", "DUP1", "DUP2", "DUP3",
    "SWAP1", "SWAP2", "POP", "MSTORE", "MLOAD", "JUMPDEST", "JUMP", "JUMPI",
    "ISZERO", "AND", "OR", "CALLDATALOAD", "CALLDATASIZE", "CALLVALUE", "RETURN",
    "REVERT", "STOP", "SHA3", "SHL",
)  # fmt: skip

_MOTIFS = {
    0: ("CALLER", "PUSH1", "SLOAD", "DUP2", "SUB", "SSTORE", "PUSH32", "LOG3"),
    1: ("JUMPDEST", "PUSH1", "SLOAD", "GAS", "PUSH2", "LT", "PUSH2", "JUMPI", "SSTORE"),
    2: ("ADD", "MUL", "DUP1", "SUB", "EXP", "ADDMOD", "MULMOD", "ADD", "MUL"),
    4: ("CALLER", "GAS", "CALL", "ISZERO", "PUSH1", "SLOAD", "SSTORE", "BALANCE", "CALL"),
    5: ("CALLDATASIZE", "PUSH1", "DUP1", "CALLDATACOPY", "GAS", "PUSH20", "DELEGATECALL",
        "RETURNDATASIZE", "RETURNDATACOPY"),
    6: ("PUSH1", "CALLDATALOAD", "PUSH1", "SHR", "DUP1", "PUSH4", "EQ", "PUSH2", "JUMPI",
        "CALLER", "SELFDESTRUCT"),
}  # fmt: skip

# class -> ((gas_lo, gas_hi), (log10 value lo, hi) or None for zero, motif repeats lo/hi,
#           filler length lo/hi)
_PROFILES = {
    0: ((21_000, 200_000), (14.0, 19.0), (1, 3), (30, 120)),
    1: ((28_000_000, 30_000_000), None, (4, 10), (20, 60)),
    2: ((50_000, 150_000), (0.0, 6.0), (3, 8), (20, 80)),
    4: ((100_000, 500_000), (16.0, 18.0), (2, 5), (30, 100)),
    5: ((60_000, 300_000), None, (1, 3), (10, 50)),
    6: ((30_000, 100_000), (0.0, 3.0), (3, 7), (10, 40)),
}


def _emit(rng: np.random.Generator, tokens: Iterable[str]) -> bytes:
    out = bytearray()
    for name in tokens:
        byte = MNEMONIC_TO_BYTE[name]
        out.append(byte)
        out += rng.bytes(OPCODE_TABLE[byte][1])
    return bytes(out)


def _synth_one(rng: np.random.Generator, label: int) -> tuple[bytes, int, int]:
    if label == 3:  # FoT: near-empty plain transfers
        return rng.bytes(int(rng.integers(0, 5))), 21_000, 0
    (g_lo, g_hi), value_range, (r_lo, r_hi), (f_lo, f_hi) = _PROFILES[label]
    filler = list(rng.choice(_FILLER, size=int(rng.integers(f_lo, f_hi + 1))))
    prologue = ["PUSH1", "PUSH1", "MSTORE"]
    motif = list(_MOTIFS[label])
    tokens = list(prologue)
    for _ in range(int(rng.integers(r_lo, r_hi + 1))):
        cut = int(rng.integers(0, len(filler) + 1))
        tokens += filler[:cut] + motif
        filler = filler[cut:]
    tokens += filler
    gas = int(rng.integers(g_lo, g_hi + 1))
    if value_range is None:
        value = 0
    else:
        value = int(10 ** rng.uniform(*value_range))
    return _emit(rng, tokens), gas, value


def synth_generate(per_class: int, seed: int = 0) -> LabeledDataset:
    """Seeded desk-scale corpus with ``per_class`` records of each of the 7 classes."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    records = []
    for label in range(NUM_CLASSES):
        for i in range(per_class):
            code, gas, value = _synth_one(rng, label)
            records.append(
                TxRecord("0x" + code.hex(), gas, value, label, f"synth-{seed}-{label}-{i}")
            )
    order = rng.permutation(len(records))
    return LabeledDataset(tuple(records[i] for i in order))


def split(
    dataset: LabeledDataset, test_fraction: float = 0.2, seed: int = 0
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified, seeded train/test split preserving record order within each side."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    by_class: dict[int, list[int]] = {}
    for i, r in enumerate(dataset.records):
        if r.label is None:
            raise DatasetError("cannot stratify unlabeled records")
        by_class.setdefault(r.label, []).append(i)
    rng = np.random.default_rng(seed)
    test_idx: set[int] = set()
    for label in sorted(by_class):
        idx = by_class[label]
        if len(idx) < 2:
            raise DatasetError(f"class {CLASS_NAMES[label]} has fewer than 2 records")
        n_test = min(len(idx) - 1, max(1, int(round(len(idx) * test_fraction))))
        test_idx.update(int(j) for j in rng.permutation(idx)[:n_test])
    train = tuple(r for i, r in enumerate(dataset.records) if i not in test_idx)
    test = tuple(r for i, r in enumerate(dataset.records) if i in test_idx)
    return replace(dataset, records=train, split_tag="train"), replace(
        dataset, records=test, split_tag="test"
    )
