"""GCN-style masked graph autoencoder: encoder, decoder and learnable mask token."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, DimensionError
from .graph import Graph
from .masking import MaskSample, glorot

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    d_in: int
    d_hidden: int = 32
    d_out: int = 16
    enc_layers: int = 2
    dec_layers: int = 1
    slope: float = 0.25

    def __post_init__(self):
        if self.enc_layers < 1 or self.dec_layers < 1:
            raise ConfigError("encoder and decoder need at least one layer each")
        if min(self.d_in, self.d_hidden, self.d_out) < 1:
            raise ConfigError("layer widths must be positive")

    @property
    def hops(self) -> int:
        """Receptive field of the full autoencoder, in hops."""
        return self.enc_layers + self.dec_layers

    def encoder_dims(self) -> list[int]:
        return [self.d_in] + [self.d_hidden] * (self.enc_layers - 1) + [self.d_out]

    def decoder_dims(self) -> list[int]:
        return [self.d_out] + [self.d_hidden] * (self.dec_layers - 1) + [self.d_in]


class Model:
    """Encoder ``f`` and decoder ``g``; ``reconstruct`` evaluates ``g(f(.))``.

    Both the representations ``Z`` and the reconstructions are row-normalized.
    """

    def __init__(self, config: ModelConfig, rng=None):
        rng = np.random.default_rng(rng)
        self.config = config

        def layers(dims, prefix):
            return [
                Tensor(glorot(rng, a, b), requires_grad=True, name=f"{prefix}.{k}")
                for k, (a, b) in enumerate(zip(dims[:-1], dims[1:]))
            ]

        self.encoder_weights = layers(config.encoder_dims(), "enc")
        self.decoder_weights = layers(config.decoder_dims(), "dec")
        # small random token: an all-zero token turns fully masked neighbourhoods into zero rows
        self.mask_token = Tensor(glorot(rng, 1, config.d_in), requires_grad=True, name="mask_token")

    def parameters(self) -> list[Tensor]:
        return [*self.encoder_weights, *self.decoder_weights, self.mask_token]

    def apply_mask(self, features, mask, mode: str = "hard") -> Tensor:
        x = ad.as_tensor(features)
        if isinstance(mask, MaskSample):
            hard, soft = mask.hard, mask.soft
        else:
            hard, soft = np.asarray(mask, dtype=np.float64).reshape(-1), None
        if hard.shape[0] != x.shape[0]:
            raise DimensionError(f"mask of length {hard.shape[0]} for {x.shape[0]} nodes")
        if mode == "hard":
            m = Tensor(hard)
        elif mode == "soft":
            if soft is None:
                raise ContractError("soft masking needs a mask with a soft relaxation")
            m = soft
        else:
            raise ContractError(f"unknown mask mode {mode!r}")
        return m * self.mask_token + (1.0 - m) * x

    def encode(self, graph: Graph, x_tilde) -> Tensor:
        h = ad.as_tensor(x_tilde)
        if h.shape != (graph.n, self.config.d_in):
            raise DimensionError(f"expected input {(graph.n, self.config.d_in)}, got {h.shape}")
        for w in self.encoder_weights:
            h = ad.prelu(graph.propagation @ (h @ w), self.config.slope)
        return ad.row_l2_normalize(h)

    def decode(self, graph: Graph, z) -> Tensor:
        h = ad.as_tensor(z)
        last = len(self.decoder_weights) - 1
        for k, w in enumerate(self.decoder_weights):
            h = graph.propagation @ (h @ w)
            if k < last:
                h = ad.prelu(h, self.config.slope)
        return ad.row_l2_normalize(h)

    def forward(self, graph: Graph, x_tilde) -> tuple[Tensor, Tensor]:
        z = self.encode(graph, x_tilde)
        return z, self.decode(graph, z)

    def reconstruct(self, graph: Graph, x_tilde) -> Tensor:
        return self.forward(graph, x_tilde)[1]

    def embed(self, graph: Graph) -> np.ndarray:
        """Representations of the unmasked graph, as used downstream."""
        return self.encode(graph, Tensor(graph.features)).value

    # --- persistence ------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"enc_{k}": w.value for k, w in enumerate(self.encoder_weights)}
        out.update({f"dec_{k}": w.value for k, w in enumerate(self.decoder_weights)})
        out["mask_token"] = self.mask_token.value
        return out

    def load_state_arrays(self, arrays):
        for k, w in enumerate(self.encoder_weights):
            w.value = np.array(arrays[f"enc_{k}"], dtype=np.float64)
        for k, w in enumerate(self.decoder_weights):
            w.value = np.array(arrays[f"dec_{k}"], dtype=np.float64)
        self.mask_token.value = np.array(arrays["mask_token"], dtype=np.float64)
        for p in self.parameters():
            p.zero_grad()


def save_model(model: Model, path):
    """Write an ``.npz`` bundle: every weight matrix, the mask token and a JSON header."""
    header = {"format": "augmae-model", "version": CHECKPOINT_VERSION, "config": asdict(model.config)}
    try:
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **model.state_arrays())
    except OSError as exc:
        raise OSError(f"cannot write model checkpoint {path}: {exc}") from exc


def read_header(bundle) -> dict:
    header = json.loads(str(bundle["header"]))
    if header.get("version") != CHECKPOINT_VERSION:
        raise ContractError(f"unsupported checkpoint version {header.get('version')}")
    return header


def load_model(path) -> Model:
    try:
        with np.load(Path(path), allow_pickle=False) as bundle:
            header = read_header(bundle)
            model = Model(ModelConfig(**header["config"]), rng=0)
            model.load_state_arrays(bundle)
    except OSError as exc:
        raise OSError(f"cannot read model checkpoint {path}: {exc}") from exc
    return model
