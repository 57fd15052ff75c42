"""Inception-ResNet image network over 80x80 single-channel molecule images.

Layout: stem -> A x T -> reduction A -> B x T -> reduction B -> C x T ->
global average pool -> dense head. Every filter count is a multiple of the
reference width N (``filters``), truncated to an integer.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import tensor as T
from .exceptions import CheckpointError, ShapeMismatch, SpecInvalid, VersionMismatch
from .tensor import Tensor

IMAGE_SIZE = 80
HEADS = ("classification", "regression")
CHECKPOINT_MAGIC = b"MOLPIXNN"
CHECKPOINT_VERSION = 1


def width(n: int, ratio: float) -> int:
    return int(ratio * n)


@dataclass(frozen=True)
class NetSpec:
    tier: int = 1
    filters: int = 32
    head: str = "classification"
    residual_scale: float = 1.0

    def __post_init__(self):
        if not isinstance(self.tier, (int, np.integer)) or self.tier < 1:
            raise SpecInvalid(f"tier must be a positive integer, got {self.tier!r}")
        if not isinstance(self.filters, (int, np.integer)) or self.filters < 1:
            raise SpecInvalid(f"filters must be a positive integer, got {self.filters!r}")
        if self.head not in HEADS:
            raise SpecInvalid(f"head must be one of {HEADS}, got {self.head!r}")
        if not np.isfinite(self.residual_scale):
            raise SpecInvalid("residual_scale must be finite")

    @property
    def label(self) -> str:
        return f"T{self.tier}_F{self.filters}"

    @property
    def outputs(self) -> int:
        return 2 if self.head == "classification" else 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetSpec":
        unknown = set(d) - {"tier", "filters", "head", "residual_scale"}
        if unknown:
            raise SpecInvalid(f"unknown NetSpec fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Conv:
    name: str
    kernel: tuple[int, int]
    c_in: int
    c_out: int
    stride: int = 1
    padding: str = "same"
    activation: str = "relu"
    weight: Tensor = field(init=False, repr=False)
    bias: Tensor = field(init=False, repr=False)

    def __post_init__(self):
        kh, kw = self.kernel
        self.weight = Tensor(np.zeros((kh, kw, self.c_in, self.c_out), np.float32), True, f"{self.name}.w")
        self.bias = Tensor(np.zeros(self.c_out, np.float32), True, f"{self.name}.b")

    @property
    def fan_in(self) -> int:
        return self.kernel[0] * self.kernel[1] * self.c_in

    def out_hw(self, hw: int) -> int:
        return T.out_size(hw, self.kernel[0], self.stride, self.padding)

    def __call__(self, x: Tensor) -> Tensor:
        y = T.conv2d(x, self.weight, self.bias, self.stride, self.padding)
        return T.relu(y) if self.activation == "relu" else y


class Block:
    """Parallel conv branches; subclasses decide how branch outputs combine."""

    kind = "block"

    def __init__(self, name: str, c_in: int):
        self.name = name
        self.c_in = c_in
        self.branches: list[list[Conv]] = []

    def convs(self) -> Iterator[Conv]:
        for branch in self.branches:
            yield from branch

    def _branch(self, *layers: tuple) -> None:
        idx = len(self.branches)
        convs, c = [], self.c_in
        for j, (kernel, c_out, *rest) in enumerate(layers):
            convs.append(Conv(f"{self.name}.b{idx}.{j}", kernel, c, c_out, *rest))
            c = c_out
        self.branches.append(convs)

    @staticmethod
    def _run(branch: list[Conv], x: Tensor) -> Tensor:
        for conv in branch:
            x = conv(x)
        return x


class InceptionResidual(Block):
    """Branches concatenated, projected back to c_in by a linear 1x1, added to the input."""

    def __init__(self, name: str, c_in: int, branches: list[tuple], scale: float):
        super().__init__(name, c_in)
        for layers in branches:
            self._branch(*layers)
        concat = sum(b[-1].c_out for b in self.branches)
        self.project = Conv(f"{name}.project", (1, 1), concat, c_in, activation="linear")
        self.scale = scale
        self.c_out = c_in

    def convs(self) -> Iterator[Conv]:
        yield from super().convs()
        yield self.project

    def out_hw(self, hw: int) -> int:
        return hw

    def __call__(self, x: Tensor) -> Tensor:
        mixed = T.concat_channels([self._run(b, x) for b in self.branches])
        return T.relu(T.residual_add(x, self.project(mixed), self.scale))


class Reduction(Block):
    """A stride-2 valid max-pool alongside conv branches whose last layer is stride-2 valid."""

    def __init__(self, name: str, c_in: int, branches: list[tuple]):
        super().__init__(name, c_in)
        for layers in branches:
            *head, (kernel, c_out) = layers
            self._branch(*head, (kernel, c_out, 2, "valid"))
        self.c_out = c_in + sum(b[-1].c_out for b in self.branches)

    def out_hw(self, hw: int) -> int:
        return T.out_size(hw, 3, 2, "valid")

    def __call__(self, x: Tensor) -> Tensor:
        pooled = T.max_pool(x, 3, 2, "valid")
        return T.concat_channels([pooled] + [self._run(b, x) for b in self.branches])


def inception_a(name, c, n, scale):
    return InceptionResidual(name, c, [
        [((1, 1), n)],
        [((1, 1), n), ((3, 3), n)],
        [((1, 1), n), ((3, 3), width(n, 1.5)), ((3, 3), 2 * n)],
    ], scale)


def reduction_a(name, c, n):
    return Reduction(name, c, [
        [((3, 3), width(n, 1.5))],
        [((1, 1), n), ((3, 3), n), ((3, 3), width(n, 1.5))],
    ])


def inception_b(name, c, n, scale):
    return InceptionResidual(name, c, [
        [((1, 1), n)],
        [((1, 1), n), ((1, 7), width(n, 1.25)), ((7, 1), width(n, 1.5))],
    ], scale)


def reduction_b(name, c, n):
    return Reduction(name, c, [
        [((1, 1), n), ((3, 3), width(n, 1.5))],
        [((1, 1), n), ((3, 3), width(n, 1.125))],
        [((1, 1), n), ((3, 3), width(n, 1.125)), ((3, 3), width(n, 1.25))],
    ])


def inception_c(name, c, n, scale):
    return InceptionResidual(name, c, [
        [((1, 1), n)],
        [((1, 1), n), ((1, 3), width(n, 1.16)), ((3, 1), width(n, 1.33))],
    ], scale)


@dataclass(frozen=True)
class LedgerRow:
    name: str
    kind: str
    shape: tuple[int, int, int]
    params: int


class Network:
    def __init__(self, spec: NetSpec):
        self.spec = spec
        n, t, s = spec.filters, spec.tier, spec.residual_scale
        self.stem = Conv("stem", (4, 4), 1, 2 * n, stride=2, padding="valid")
        blocks: list = []
        c = self.stem.c_out
        for i in range(t):
            blocks.append(inception_a(f"A{i + 1}", c, n, s))
        blocks.append(reduction_a("RA", c, n))
        c = blocks[-1].c_out
        for i in range(t):
            blocks.append(inception_b(f"B{i + 1}", c, n, s))
        blocks.append(reduction_b("RB", c, n))
        c = blocks[-1].c_out
        for i in range(t):
            blocks.append(inception_c(f"C{i + 1}", c, n, s))
        self.blocks = blocks
        self.features = c
        self.head_w = Tensor(np.zeros((c, spec.outputs), np.float32), True, "head.w")
        self.head_b = Tensor(np.zeros(spec.outputs, np.float32), True, "head.b")
        self.ledger = self._shape_ledger()

    # -- structure --------------------------------------------------------------

    def convs(self) -> Iterator[Conv]:
        yield self.stem
        for b in self.blocks:
            yield from b.convs()

    def parameters(self) -> list[Tensor]:
        out = []
        for conv in self.convs():
            out += [conv.weight, conv.bias]
        return out + [self.head_w, self.head_b]

    @property
    def param_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def _shape_ledger(self) -> list[LedgerRow]:
        hw = IMAGE_SIZE
        rows = [LedgerRow("input", "input", (hw, hw, 1), 0)]
        hw = self.stem.out_hw(hw)
        if hw != 39:
            raise ShapeMismatch(f"stem produced {hw}x{hw}, expected 39x39")
        rows.append(LedgerRow("stem", "conv4x4/2", (hw, hw, self.stem.c_out), _count([self.stem])))
        for b in self.blocks:
            new_hw = b.out_hw(hw)
            if isinstance(b, Reduction):
                if not (new_hw < hw and b.c_out > b.c_in):
                    raise ShapeMismatch(f"{b.name} does not reduce")
                for branch in b.branches:
                    if branch[-1].out_hw(hw) != new_hw:
                        raise ShapeMismatch(f"{b.name}: branch spatial size disagrees with pooling")
                kind = "reduction"
            else:
                kind = "inception-residual"
            hw = new_hw
            rows.append(LedgerRow(b.name, kind, (hw, hw, b.c_out), _count(b.convs())))
        rows.append(LedgerRow("pool", "global-avg-pool", (1, 1, self.features), 0))
        rows.append(LedgerRow("head", self.spec.head, (1, 1, self.spec.outputs),
                              self.head_w.data.size + self.head_b.data.size))
        expected = {"RA": 19, "RB": 9}
        for r in rows:
            if r.name in expected and r.shape[0] != expected[r.name]:
                raise ShapeMismatch(f"{r.name} produced {r.shape[0]}, expected {expected[r.name]}")
        return rows

    def format_ledger(self) -> str:
        lines = [f"{'layer':<8} {'kind':<20} {'output':>14} {'params':>10}"]
        for r in self.ledger:
            lines.append(f"{r.name:<8} {r.kind:<20} {'x'.join(map(str, r.shape)):>14} {r.params:>10,}")
        lines.append(f"total parameters: {self.param_count:,}")
        return "\n".join(lines)

    # -- parameters --------------------------------------------------------------

    def init_params(self, seed: int) -> "Network":
        """He-normal weights (variance 2/fan_in), zero biases."""
        rng = np.random.default_rng(seed)
        for conv in self.convs():
            conv.weight.data = rng.normal(0.0, np.sqrt(2.0 / conv.fan_in), conv.weight.shape).astype(self.dtype)
            conv.bias.data = np.zeros_like(conv.bias.data)
        self.head_w.data = rng.normal(0.0, np.sqrt(2.0 / self.features), self.head_w.shape).astype(self.dtype)
        self.head_b.data = np.zeros_like(self.head_b.data)
        return self

    @property
    def dtype(self):
        return self.head_w.data.dtype

    def astype(self, dtype) -> "Network":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat)
        if flat.size != self.param_count:
            raise ShapeMismatch(f"parameter vector has {flat.size} values, network needs {self.param_count}")
        pos = 0
        for p in self.parameters():
            k = p.data.size
            p.data = flat[pos:pos + k].reshape(p.shape).astype(self.dtype)
            pos += k

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    # -- forward -----------------------------------------------------------------

    def prepare(self, images) -> Tensor:
        """Cast integer pixel codes to reals unchanged; accept (N,80,80) or (N,80,80,1)."""
        x = np.asarray(images)
        if x.ndim == 2:
            x = x[None]
        if x.ndim == 3:
            x = x[..., None]
        if x.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE, 1):
            raise ShapeMismatch(f"expected images of shape (N, 80, 80[, 1]), got {x.shape}")
        return Tensor(x.astype(self.dtype))

    def features_of(self, x: Tensor) -> Tensor:
        h = self.stem(x)
        for b in self.blocks:
            h = b(h)
        return T.global_avg_pool(h)

    def forward(self, images) -> Tensor:
        x = images if isinstance(images, Tensor) else self.prepare(images)
        return T.dense(self.features_of(x), self.head_w, self.head_b)

    __call__ = forward

    def predict(self, images, batch_size: int = 64) -> np.ndarray:
        """Class-1 probabilities (classification) or values (regression), no graph."""
        images = np.asarray(images)
        out = []
        with T.no_grad():
            for i in range(0, len(images), batch_size):
                y = self.forward(images[i:i + batch_size]).data
                out.append(T.softmax(y)[:, 1] if self.spec.head == "classification" else y[:, 0])
        return np.concatenate(out) if out else np.zeros(0, dtype=self.dtype)


def _count(convs) -> int:
    return sum(c.weight.data.size + c.bias.data.size for c in convs)


def build(spec: NetSpec) -> Network:
    return Network(spec)


def param_count(spec: NetSpec) -> int:
    """Analytic count: sum of kh*kw*c_in*c_out + c_out over convs, plus the head."""
    net = build(spec)
    total = sum(c.kernel[0] * c.kernel[1] * c.c_in * c.c_out + c.c_out for c in net.convs())
    return total + net.features * spec.outputs + spec.outputs


# -- checkpoints -------------------------------------------------------------------

def save_checkpoint(net: Network, path: str | Path, metadata: dict | None = None) -> Path:
    """magic | u32 version | u32 len + spec JSON | u64 count + f32 LE params | u32 len + metadata JSON."""
    path = Path(path)
    spec_json = json.dumps(net.spec.to_dict(), sort_keys=True).encode()
    meta_json = json.dumps(metadata or {}, sort_keys=True).encode()
    params = net.get_flat().astype("<f4")
    blob = b"".join([
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<I", len(spec_json)), spec_json,
        struct.pack("<Q", params.size), params.tobytes(),
        struct.pack("<I", len(meta_json)), meta_json,
    ])
    path.write_bytes(blob)
    return path


def read_checkpoint(path: str | Path) -> tuple[NetSpec, np.ndarray, dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    pos = 0

    def take(k: int) -> bytes:
        nonlocal pos
        if pos + k > len(data):
            raise CheckpointError(f"checkpoint {path} is truncated")
        chunk = data[pos:pos + k]
        pos += k
        return chunk

    if take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a molpix checkpoint")
    (version,) = struct.unpack("<I", take(4))
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint format {version}, expected {CHECKPOINT_VERSION}")
    (k,) = struct.unpack("<I", take(4))
    try:
        spec = NetSpec.from_dict(json.loads(take(k)))
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"bad spec block in {path}: {exc}") from exc
    (count,) = struct.unpack("<Q", take(8))
    params = np.frombuffer(take(4 * count), dtype="<f4").copy()
    (k,) = struct.unpack("<I", take(4))
    meta = json.loads(take(k))
    if pos != len(data):
        raise CheckpointError(f"trailing bytes in {path}")
    return spec, params, meta


def load_checkpoint(path: str | Path, spec: NetSpec | None = None) -> tuple[Network, dict]:
    """Rebuild the saved network; if ``spec`` is given it must match the file."""
    saved, params, meta = read_checkpoint(path)
    if spec is not None and spec != saved:
        raise VersionMismatch(f"checkpoint holds {saved}, requested {spec}")
    net = build(saved)
    if params.size != net.param_count:
        raise CheckpointError(f"checkpoint has {params.size} parameters, {saved.label} needs {net.param_count}")
    net.set_flat(params)
    return net, meta
