"""Versioned binary model format plus a human-readable JSON sidecar.

Layout (all integers and floats little-endian):

    bytes 0-3   magic "TGHN"
    bytes 4-7   uint32 format version (currently 1)
    bytes 8-11  uint32 byte length of the UTF-8 header JSON
    ...         header JSON (network spec, link/solver configs, loss kind,
                column metadata, standardization)
    ...         float64 parameter blob: per layer W (row-major), b, and for
                batch-norm layers gamma, beta
    ...         float64 running-stats blob: per batch-norm layer
                running_mean, running_var

save_model additionally writes ``<path>.json`` with the same header,
pretty-printed, for inspection.  The writer is deterministic: identical
bundles produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..loss import LinkConfig
from ..tgh import InverseSolverConfig
from .network import LayerSpec, Network, NetworkSpec

MAGIC = b"TGHN"
FORMAT_VERSION = 1


@dataclass
class Standardization:
    """Per-feature affine transform fitted on the training split."""

    columns: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return x * self.scale + self.mean


@dataclass
class ModelBundle:
    """Everything needed to score new data with a trained model."""

    network: Network
    loss_kind: str
    link: LinkConfig
    solver: InverseSolverConfig
    feature_columns: tuple[str, ...]
    late_columns: tuple[str, ...]
    target_column: str
    standardization: Standardization | None
    split_rule: dict | None = None

    def predict_raw(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode head outputs for raw (unstandardized) features."""
        x = np.asarray(x, dtype=float)
        if self.standardization is not None:
            x = self.standardization.apply(x)
        return self.network.forward(x, train=False)

    def predict_params(self, x: np.ndarray):
        """Predicted distribution parameters as a TghParams of arrays.

        Gaussian models come back with g = h = 0 so that downstream
        density/interval/residual code treats both heads uniformly.
        """
        from ..loss import link, link_gaussian
        from ..tgh import TghParams

        raw = self.predict_raw(x)
        if self.loss_kind == "tukey":
            params, _ = link(raw, self.link)
            return params
        mu, sigma, _ = link_gaussian(raw, self.link)
        return TghParams(mu, sigma, np.zeros_like(mu), np.zeros_like(mu))


def _header_dict(bundle: ModelBundle) -> dict:
    spec = bundle.network.spec
    return {
        "format": FORMAT_VERSION,
        "loss": bundle.loss_kind,
        "network": {
            "layers": [
                {
                    "in_dim": layer.in_dim,
                    "out_dim": layer.out_dim,
                    "activation": layer.activation,
                    "batch_norm": layer.batch_norm,
                }
                for layer in spec.layers
            ],
            "late_features": spec.late_features,
            "head_dim": spec.head_dim,
        },
        "link": {
            "sigma_floor": bundle.link.sigma_floor,
            "g_max": bundle.link.g_max,
            "h_max": bundle.link.h_max,
        },
        "solver": {
            "abs_tolerance": bundle.solver.abs_tolerance,
            "max_bisection_iters": bundle.solver.max_bisection_iters,
            "initial_half_width": bundle.solver.initial_half_width,
            "max_bracket_doublings": bundle.solver.max_bracket_doublings,
        },
        "data": {
            "feature_columns": list(bundle.feature_columns),
            "late_columns": list(bundle.late_columns),
            "target_column": bundle.target_column,
            "standardization": None
            if bundle.standardization is None
            else {
                "columns": list(bundle.standardization.columns),
                "mean": [float(v) for v in bundle.standardization.mean],
                "scale": [float(v) for v in bundle.standardization.scale],
            },
        },
        "split_rule": bundle.split_rule,
    }


def _param_blob(net: Network) -> bytes:
    parts = [p.astype("<f8").tobytes() for p in net.parameters()]
    for bn in net.norms:
        if bn is not None:
            parts.append(bn.running_mean.astype("<f8").tobytes())
            parts.append(bn.running_var.astype("<f8").tobytes())
    return b"".join(parts)


def save_model(path, bundle: ModelBundle) -> None:
    """Write the binary model file and its JSON sidecar."""
    header = json.dumps(_header_dict(bundle), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(_param_blob(bundle.network))
    with open(f"{path}.json", "w", encoding="utf-8") as fh:
        json.dump(_header_dict(bundle), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_model(path) -> ModelBundle:
    """Read a model file written by save_model."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: not a model file (bad magic)")
    version, = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {version}")
    hlen, = struct.unpack_from("<I", blob, 8)
    header = json.loads(blob[12:12 + hlen].decode("utf-8"))

    layers = tuple(
        LayerSpec(
            in_dim=d["in_dim"],
            out_dim=d["out_dim"],
            activation=d["activation"],
            batch_norm=d["batch_norm"],
        )
        for d in header["network"]["layers"]
    )
    spec = NetworkSpec(
        layers,
        late_features=header["network"]["late_features"],
        head_dim=header["network"]["head_dim"],
    )
    net = Network(spec, seed=0)
    offset = 12 + hlen

    def read_into(arr: np.ndarray) -> None:
        nonlocal offset
        n = arr.size * 8
        arr[...] = np.frombuffer(blob, dtype="<f8", count=arr.size, offset=offset).reshape(arr.shape)
        offset += n

    for p in net.parameters():
        read_into(p)
    for bn in net.norms:
        if bn is not None:
            read_into(bn.running_mean)
            read_into(bn.running_var)
    if offset != len(blob):
        raise DataError(f"{path}: trailing bytes after parameter blob")

    st = header["data"]["standardization"]
    standardization = None
    if st is not None:
        standardization = Standardization(
            columns=tuple(st["columns"]),
            mean=np.asarray(st["mean"], dtype=float),
            scale=np.asarray(st["scale"], dtype=float),
        )
    return ModelBundle(
        network=net,
        loss_kind=header["loss"],
        link=LinkConfig(**header["link"]),
        solver=InverseSolverConfig(**header["solver"]),
        feature_columns=tuple(header["data"]["feature_columns"]),
        late_columns=tuple(header["data"]["late_columns"]),
        target_column=header["data"]["target_column"],
        standardization=standardization,
        split_rule=header.get("split_rule"),
    )
