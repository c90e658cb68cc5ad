"""Network persistence: JSON manifest plus a little-endian float64 blob.

The blob holds every parameter in declaration order (``Network.parameters``),
each flattened row-major.  The manifest lists names, shapes and offsets.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .layers import layer_from_config
from .network import Network

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


class ModelFormatError(ValueError):
    pass


def network_manifest(network: Network) -> dict:
    entries = []
    offset = 0
    for name, arr in network.parameters().items():
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
    return {
        "format_version": FORMAT_VERSION,
        "architecture": network.config(),
        "parameters": entries,
        "dtype": "<f8",
        "n_values": offset,
    }


def network_blob(network: Network) -> bytes:
    arrays = [np.ascontiguousarray(a, dtype=_DTYPE).ravel() for a in network.parameters().values()]
    if not arrays:
        return b""
    return np.concatenate(arrays).astype(_DTYPE).tobytes()


def network_from_manifest(manifest: dict, blob: bytes) -> Network:
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version!r}")
    arch = manifest["architecture"]
    layers = [layer_from_config(cfg) for cfg in arch["layers"]]
    network = Network(layers, arch["input_shape"], seed=arch.get("seed", 0))
    values = np.frombuffer(blob, dtype=_DTYPE)
    if values.size != manifest["n_values"]:
        raise ModelFormatError(f"blob holds {values.size} values, manifest expects {manifest['n_values']}")
    params = network.parameters()
    for entry in manifest["parameters"]:
        name = entry["name"]
        if name not in params:
            raise ModelFormatError(f"unknown parameter {name!r}")
        shape = tuple(entry["shape"])
        if params[name].shape != shape:
            raise ModelFormatError(f"shape mismatch for {name}: {params[name].shape} vs {shape}")
        n = int(np.prod(shape))
        params[name][...] = values[entry["offset"]:entry["offset"] + n].reshape(shape)
    network.mark_updated()
    return network


def save_network(network: Network, path, extra: Optional[dict] = None) -> Tuple[Path, Path]:
    """Write ``<path>.json`` and ``<path>.bin``; returns both paths."""
    path = Path(path)
    json_path = path.with_suffix(".json")
    bin_path = path.with_suffix(".bin")
    manifest = network_manifest(network)
    manifest["blob"] = bin_path.name
    if extra:
        manifest.update(extra)
    bin_path.write_bytes(network_blob(network))
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return json_path, bin_path


def load_network(path) -> Tuple[Network, dict]:
    path = Path(path)
    json_path = path if path.suffix == ".json" else path.with_suffix(".json")
    try:
        manifest = json.loads(json_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model manifest {json_path}: {exc}") from exc
    bin_path = json_path.parent / manifest.get("blob", json_path.with_suffix(".bin").name)
    return network_from_manifest(manifest, bin_path.read_bytes()), manifest
