"""Cyberattack detection for Ethereum transactions.

Transactions are disassembled into opcode sequences, vectorised with TF-IDF,
fused with gas / input-length / value attributes into a grayscale image, and
classified by a Vision Transformer with a convolutional patch embedding.
"""

__version__ = "0.1.0"
