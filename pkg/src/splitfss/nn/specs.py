"""Network architecture descriptions and the U-shaped placement map.

A network is an ordered list of layers, each placed on client_front,
server, or client_output.  The placements must appear in that order.
Run modes reinterpret placements: local runs everything on the client,
vanilla moves the output layers onto the server, U-shaped keeps the map
as declared.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import ShapeMismatch
from ..ring import FixedConfig, FixedTensor, encode

PLACEMENTS = ("client_front", "server", "client_output")


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv2d | maxpool2x2 | relu | fc
    placement: str
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    in_dim: int = 0
    out_dim: int = 0


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    batch_size: int = 4
    epochs: int = 1
    seed: int = 0
    test_batch_size: int = 50


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple
    input_shape: tuple  # (C, H, W)
    classes: int

    def __post_init__(self):
        order = [PLACEMENTS.index(l.placement) for l in self.layers]
        if order != sorted(order):
            raise ShapeMismatch("placements must be client_front* server* client_output*")
        self.shapes()  # raises on incompatible chain

    def shapes(self) -> list:
        """Per-layer output shapes (channels-first for spatial, int for flat)."""
        shape = tuple(self.input_shape)
        out = []
        for layer in self.layers:
            if layer.kind == "conv2d":
                c, h, w = shape
                oh = (h - layer.kernel) // layer.stride + 1
                ow = (w - layer.kernel) // layer.stride + 1
                if oh <= 0 or ow <= 0:
                    raise ShapeMismatch(f"conv2d shrinks {shape} below zero")
                shape = (layer.out_channels, oh, ow)
            elif layer.kind == "maxpool2x2":
                c, h, w = shape
                if h % 2 or w % 2:
                    raise ShapeMismatch(f"maxpool2x2 on odd dims {shape}")
                shape = (c, h // 2, w // 2)
            elif layer.kind == "relu":
                pass
            elif layer.kind == "fc":
                flat = int(np.prod(shape)) if isinstance(shape, tuple) else shape
                if layer.in_dim != flat:
                    raise ShapeMismatch(
                        f"fc expects {layer.in_dim}, gets {flat} from previous layer"
                    )
                shape = layer.out_dim
            else:
                raise ShapeMismatch(f"unknown layer kind {layer.kind}")
            out.append(shape)
        if out and out[-1] != self.classes:
            raise ShapeMismatch(f"network ends at {out[-1]}, expected {self.classes} classes")
        return out

    def indices(self, placement: str, mode: str = "ushaped") -> list:
        table = self.placement_map(mode)
        return [i for i, p in enumerate(table) if p == placement]

    def placement_map(self, mode: str) -> list:
        """Effective placement per layer for a run mode."""
        if mode.startswith("local"):
            return ["client_front"] * len(self.layers)
        if mode.startswith("vanilla"):
            return [
                "server" if l.placement == "client_output" else l.placement
                for l in self.layers
            ]
        return [l.placement for l in self.layers]

    def cut_dim(self) -> int:
        """Flattened width of the activation crossing client -> server."""
        shapes = self.shapes()
        first_server = self.indices("server")[0]
        prev = self.input_shape if first_server == 0 else shapes[first_server - 1]
        return int(np.prod(prev)) if isinstance(prev, tuple) else int(prev)

    def return_dim(self) -> int:
        """Width of the activation crossing server -> client."""
        shapes = self.shapes()
        last_server = self.indices("server")[-1]
        dim = shapes[last_server]
        return int(np.prod(dim)) if isinstance(dim, tuple) else int(dim)

    def fingerprint(self) -> int:
        return zlib.crc32(self.to_json().encode())

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "input_shape": list(self.input_shape),
                "classes": self.classes,
                "layers": [asdict(l) for l in self.layers],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        doc = json.loads(text)
        layers = tuple(LayerSpec(**entry) for entry in doc["layers"])
        return cls(doc["name"], layers, tuple(doc["input_shape"]), doc["classes"])

    @classmethod
    def load(cls, path) -> "NetworkSpec":
        with open(path) as fh:
            return cls.from_json(fh.read())


def network1(classes: int = 10, input_shape=(1, 28, 28)) -> NetworkSpec:
    """Two conv blocks on the client, FC+ReLU on the servers, FC output
    on the client."""
    c, h, w = input_shape
    cut = 16 * (((h - 4) // 2 - 4) // 2) * (((w - 4) // 2 - 4) // 2)
    layers = (
        LayerSpec("conv2d", "client_front", out_channels=16, kernel=5),
        LayerSpec("maxpool2x2", "client_front"),
        LayerSpec("relu", "client_front"),
        LayerSpec("conv2d", "client_front", out_channels=16, kernel=5),
        LayerSpec("maxpool2x2", "client_front"),
        LayerSpec("relu", "client_front"),
        LayerSpec("fc", "server", in_dim=cut, out_dim=64),
        LayerSpec("relu", "server"),
        LayerSpec("fc", "client_output", in_dim=64, out_dim=classes),
    )
    return NetworkSpec("network1", layers, tuple(input_shape), classes)


def network2(classes: int = 10, input_shape=(1, 28, 28)) -> NetworkSpec:
    """network1 plus one more FC+ReLU pair on the servers."""
    base = network1(classes, input_shape)
    cut = base.layers[6].in_dim
    layers = (
        *base.layers[:6],
        LayerSpec("fc", "server", in_dim=cut, out_dim=64),
        LayerSpec("relu", "server"),
        LayerSpec("fc", "server", in_dim=64, out_dim=32),
        LayerSpec("relu", "server"),
        LayerSpec("fc", "client_output", in_dim=32, out_dim=classes),
    )
    return NetworkSpec("network2", layers, tuple(input_shape), classes)


def get_network(name: str, classes: int = 10, input_shape=(1, 28, 28)) -> NetworkSpec:
    if str(name) in ("1", "network1"):
        return network1(classes, input_shape)
    if str(name) in ("2", "network2"):
        return network2(classes, input_shape)
    raise ValueError(f"unknown network {name!r}")


def layer_param_shapes(net: NetworkSpec, idx: int):
    layer = net.layers[idx]
    if layer.kind == "conv2d":
        shapes = net.shapes()
        in_ch = net.input_shape[0] if idx == 0 else shapes[idx - 1][0]
        return (layer.out_channels, in_ch, layer.kernel, layer.kernel), (layer.out_channels,)
    if layer.kind == "fc":
        return (layer.in_dim, layer.out_dim), (layer.out_dim,)
    return None


def init_layer_params(net: NetworkSpec, idx: int, cfg: FixedConfig, rng: np.random.Generator):
    """Uniform(+-1/sqrt(fan_in)) init, encoded; None for param-free layers."""
    shapes = layer_param_shapes(net, idx)
    if shapes is None:
        return None
    w_shape, b_shape = shapes
    fan_in = int(np.prod(w_shape[1:])) if len(w_shape) == 4 else w_shape[0]
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=w_shape)
    b = rng.uniform(-bound, bound, size=b_shape)
    return (
        FixedTensor(np.asarray(encode(w, cfg), dtype=np.uint64), cfg),
        FixedTensor(np.asarray(encode(b, cfg), dtype=np.uint64), cfg),
    )
