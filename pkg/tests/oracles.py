"""Independent reference implementations used as test oracles.

Nothing here imports the code under test.
"""

from __future__ import annotations

import math

import numpy as np

# Shanghai opcode listing, written out by hand: "byte mnemonic".
_REFERENCE_LISTING = """
00 STOP       01 ADD        02 MUL        03 SUB        04 DIV        05 SDIV
06 MOD        07 SMOD       08 ADDMOD     09 MULMOD     0a EXP        0b SIGNEXTEND
10 LT         11 GT         12 SLT        13 SGT        14 EQ         15 ISZERO
16 AND        17 OR         18 XOR        19 NOT        1a BYTE       1b SHL
1c SHR        1d SAR        20 SHA3
30 ADDRESS    31 BALANCE    32 ORIGIN     33 CALLER     34 CALLVALUE  35 CALLDATALOAD
36 CALLDATASIZE 37 CALLDATACOPY 38 CODESIZE 39 CODECOPY 3a GASPRICE  3b EXTCODESIZE
3c EXTCODECOPY 3d RETURNDATASIZE 3e RETURNDATACOPY 3f EXTCODEHASH
40 BLOCKHASH  41 COINBASE   42 TIMESTAMP  43 NUMBER     44 PREVRANDAO 45 GASLIMIT
46 CHAINID    47 SELFBALANCE 48 BASEFEE
50 POP        51 MLOAD      52 MSTORE     53 MSTORE8    54 SLOAD      55 SSTORE
56 JUMP       57 JUMPI      58 PC         59 MSIZE      5a GAS        5b JUMPDEST
5f PUSH0
f0 CREATE     f1 CALL       f2 CALLCODE   f3 RETURN     f4 DELEGATECALL f5 CREATE2
fa STATICCALL fd REVERT     fe INVALID    ff SELFDESTRUCT
"""


def reference_table() -> dict[int, tuple[str, int]]:
    """byte -> (mnemonic, immediate width); unassigned bytes are absent."""
    toks = _REFERENCE_LISTING.split()
    table = {int(toks[i], 16): (toks[i + 1], 0) for i in range(0, len(toks), 2)}
    for b in range(0x60, 0x80):
        table[b] = ("PUSH" + str(b - 0x5F), b - 0x5F)
    for b in range(0x80, 0x90):
        table[b] = ("DUP" + str(b - 0x7F), 0)
    for b in range(0x90, 0xA0):
        table[b] = ("SWAP" + str(b - 0x8F), 0)
    for b in range(0xA0, 0xA5):
        table[b] = ("LOG" + str(b - 0xA0), 0)
    return table


_TABLE = reference_table()


def reference_disassemble(code: bytes) -> tuple[list[str], bool]:
    out = []
    i = 0
    truncated = False
    while i < len(code):
        name, width = _TABLE.get(code[i], ("INVALID_%02x" % code[i], 0))
        out.append(name)
        if i + 1 + width > len(code):
            truncated = True
        i += width + 1
    return out, truncated


def naive_tfidf(corpus: list[list[str]], doc: list[str]) -> tuple[list[str], list[float]]:
    """Direct evaluation: count(t, doc) * ln(N / (df(t) + 1)), sorted vocabulary."""
    vocab = sorted({t for d in corpus for t in d})
    out = []
    for t in vocab:
        tf = 0
        for tok in doc:
            if tok == t:
                tf += 1
        df = 0
        for d in corpus:
            if t in d:
                df += 1
        out.append(tf * math.log(len(corpus) / (df + 1)))
    return vocab, out


def closed_form_param_count(D: int, K: int, H: int, W: int, C: int, mlp_ratio: int = 4) -> int:
    conv = (1 * (D // 4) * 9 + D // 4) + ((D // 4) * (D // 2) * 9 + D // 2) + ((D // 2) * D * 9 + D)
    tokens = H * W // 16 + 1
    embed = D + tokens * D
    attn = 3 * (D * D + D) + (D * D + D)
    mlp = (D * mlp_ratio * D + mlp_ratio * D) + (mlp_ratio * D * D + D)
    block = 2 * (2 * D) + attn + mlp
    return conv + embed + K * block + 2 * D + (D * C + C)


def naive_macro(preds, labels, num_classes):
    """Per-class loops; zero-denominator classes score 0."""
    precs, recs = [], []
    for c in range(num_classes):
        tp = sum(1 for p, y in zip(preds, labels) if p == c and y == c)
        pred_c = sum(1 for p in preds if p == c)
        true_c = sum(1 for y in labels if y == c)
        precs.append(tp / pred_c if pred_c else 0.0)
        recs.append(tp / true_c if true_c else 0.0)
    acc = sum(1 for p, y in zip(preds, labels) if p == y) / len(labels)
    return acc, sum(precs) / num_classes, sum(recs) / num_classes


def direct_conv2d(x: np.ndarray, k: np.ndarray, bias: float, stride: int, pad: int) -> np.ndarray:
    """Single-channel cross-correlation by explicit loops."""
    xp = np.pad(x, pad)
    kh, kw = k.shape
    oh = (xp.shape[0] - kh) // stride + 1
    ow = (xp.shape[1] - kw) // stride + 1
    out = np.zeros((oh, ow))
    for i in range(oh):
        for j in range(ow):
            s = bias
            for a in range(kh):
                for b in range(kw):
                    s += xp[i * stride + a, j * stride + b] * k[a, b]
            out[i, j] = s
    return out


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


def gelu(x: np.ndarray) -> np.ndarray:
    return np.vectorize(lambda v: 0.5 * v * (1 + math.erf(v / math.sqrt(2))))(x)


def softmax_rows(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def central_differences(loss_fn, params, eps: float = 1e-4):
    """Central finite-difference gradient of ``loss_fn()`` w.r.t. each tensor in ``params``.

    ``params`` maps names to float64 torch tensors that ``loss_fn`` reads; they are
    perturbed in place and restored.
    """
    import torch

    grads = {}
    with torch.no_grad():
        for name, p in params.items():
            flat = p.view(-1)
            g = torch.zeros_like(flat)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = loss_fn().item()
                flat[i] = orig - eps
                down = loss_fn().item()
                flat[i] = orig
                g[i] = (up - down) / (2 * eps)
            grads[name] = g.view_as(p)
    return grads
