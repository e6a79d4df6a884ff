"""Vision Transformer with a three-stage convolutional patch embedding.

Image (1 x H x W) -> conv 3x3/1 -> ReLU -> conv 3x3/2 -> ReLU -> conv 3x3/2
gives a D x H/4 x W/4 map whose spatial positions become N = HW/16 tokens.
A class token is prepended, positional embeddings added, and the sequence runs
through K pre-norm encoder blocks. The head reads the normalised class token.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

LN_EPS = 1e-5
INIT_STD = 0.02


@dataclass(frozen=True)
class VitConfig:
    dim: int = 128
    depth: int = 4
    heads: int = 4
    height: int = 24
    width: int = 24
    num_classes: int = 7
    mlp_ratio: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.dim % 4:
            raise ValueError("dim must be divisible by 4 for the conv embedding")
        if self.height % 4 or self.width % 4:
            raise ValueError("image height and width must be divisible by 4")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")

    @property
    def num_patches(self) -> int:
        return self.height * self.width // 16

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    def to_dict(self) -> dict:
        return asdict(self)


class ShapeError(ValueError):
    pass


class ConvEmbedding(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(1, dim // 4, 3, stride=1, padding=1)
        self.conv2 = nn.Conv2d(dim // 4, dim // 2, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(dim // 2, dim, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.conv1(x))
        x = F.relu(self.conv2(x))
        return self.conv3(x)


class MultiHeadSelfAttention(nn.Module):
    """Scaled dot-product attention over ``heads`` slices of width D/L.

    The q/k/v projections are stored as D x D matrices whose column blocks are
    the per-head D x D/L matrices.
    """

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.proj = nn.Linear(dim, dim)

    def _split(self, t: torch.Tensor) -> torch.Tensor:
        b, n, _ = t.shape
        return t.view(b, n, self.heads, self.head_dim).transpose(1, 2)

    def attention_weights(self, x: torch.Tensor) -> torch.Tensor:
        """Softmax over keys, shape (B, heads, tokens, tokens)."""
        q, k = self._split(self.q(x)), self._split(self.k(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        return softmax(scores, dim=-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        attn = self.attention_weights(x)
        out = attn @ self._split(self.v(x))
        b, _, n, _ = out.shape
        return self.proj(out.transpose(1, 2).reshape(b, n, -1))


class EncoderBlock(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=LN_EPS)
        self.attn = MultiHeadSelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim, eps=LN_EPS)
        self.fc1 = nn.Linear(dim, mlp_ratio * dim)
        self.fc2 = nn.Linear(mlp_ratio * dim, dim)

    def attention_sublayer(self, z: torch.Tensor) -> torch.Tensor:
        return self.attn(self.norm1(z)) + z

    def mlp(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(F.gelu(self.fc1(x)))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        z = self.attention_sublayer(z)
        return self.mlp(self.norm2(z)) + z


class VitModel(nn.Module):
    def __init__(self, config: VitConfig):
        super().__init__()
        self.config = config
        d = config.dim
        self.embed = ConvEmbedding(d)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, d))
        self.pos_embed = nn.Parameter(torch.zeros(1, config.num_patches + 1, d))
        self.blocks = nn.ModuleList(
            EncoderBlock(d, config.heads, config.mlp_ratio) for _ in range(config.depth)
        )
        self.norm = nn.LayerNorm(d, eps=LN_EPS)
        self.head = nn.Linear(d, config.num_classes)
        self.reset_parameters(config.seed)

    @torch.no_grad()
    def reset_parameters(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        for name, p in self.named_parameters():
            if name.endswith("bias"):
                p.zero_()
            elif ".norm" in name or name.startswith("norm"):
                p.fill_(1.0)
            elif name.startswith("embed."):
                fan_in = p.shape[1] * p.shape[2] * p.shape[3]
                bound = math.sqrt(6.0 / fan_in)  # Kaiming-uniform, ReLU gain
                p.uniform_(-bound, bound, generator=gen)
            else:
                _trunc_normal_(p, INIT_STD, gen)

    def _check_input(self, images: torch.Tensor) -> torch.Tensor:
        c = self.config
        if images.dim() == 2:
            images = images.unsqueeze(0)
        if images.dim() == 3:
            images = images.unsqueeze(1)
        if images.dim() != 4 or tuple(images.shape[1:]) != (1, c.height, c.width):
            raise ShapeError(
                f"expected images of shape (B, {c.height}, {c.width}), got {tuple(images.shape)}"
            )
        return images

    def conv_embed(self, images: torch.Tensor) -> torch.Tensor:
        """(B, H, W) images -> (B, D, H/4, W/4) patch map."""
        return self.embed(self._check_input(images))

    def embed_sequence(self, patches: torch.Tensor) -> torch.Tensor:
        """(B, D, h, w) -> (B, N+1, D): class token, row-major patches, plus positions."""
        b = patches.shape[0]
        tokens = patches.flatten(2).transpose(1, 2)
        cls = self.cls_token.expand(b, -1, -1)
        return torch.cat([cls, tokens], dim=1) + self.pos_embed

    def encode(self, images: torch.Tensor) -> torch.Tensor:
        z = self.embed_sequence(self.conv_embed(images))
        for block in self.blocks:
            z = block(z)
        return z

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        z = self.encode(images)
        return self.head(self.norm(z[:, 0]))

    @torch.no_grad()
    def predict(self, images: torch.Tensor) -> torch.Tensor:
        return self.forward(images).argmax(dim=-1)


def _trunc_normal_(p: torch.Tensor, std: float, gen: torch.Generator) -> None:
    # resample anything beyond 2 sigma
    p.normal_(0.0, std, generator=gen)
    while True:
        bad = p.abs() > 2 * std
        if not bad.any():
            return
        fresh = torch.empty_like(p).normal_(0.0, std, generator=gen)
        p[bad] = fresh[bad]


def softmax(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    e = torch.exp(x - x.amax(dim=dim, keepdim=True))
    return e / e.sum(dim=dim, keepdim=True)


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean of ``-log softmax(logits)[label]``, max-shifted for stability."""
    if logits.dim() == 1:
        logits, labels = logits.unsqueeze(0), torch.as_tensor(labels).reshape(1)
    labels = torch.as_tensor(labels, dtype=torch.long)
    c = logits.shape[-1]
    if labels.numel() and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in 0..{c - 1}")
    shifted = logits - logits.amax(dim=-1, keepdim=True)
    log_z = torch.log(torch.exp(shifted).sum(dim=-1))
    picked = shifted.gather(-1, labels.unsqueeze(-1)).squeeze(-1)
    return (log_z - picked).mean()


class NonFiniteError(FloatingPointError):
    pass


def backward(
    model: VitModel, images: torch.Tensor, labels: torch.Tensor
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Mean batch loss and its gradient w.r.t. every named parameter."""
    model.zero_grad(set_to_none=True)
    loss = cross_entropy(model(images), labels)
    if not torch.isfinite(loss):
        raise NonFiniteError(f"non-finite loss {loss.item()}")
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        if not torch.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient in {name}")
        grads[name] = g
    return loss.detach(), grads


def param_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
