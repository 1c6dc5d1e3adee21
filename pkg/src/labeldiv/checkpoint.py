"""Versioned model checkpoints.

A checkpoint is a numpy ``.npz`` archive (bit-exact float64 arrays):

``format``            the string ``"labeldiv-checkpoint"``
``version``           integer format version (currently 1)
``meta``              JSON: ``mode``, ``activations`` (one per layer), ``n_members``,
                      ``has_bin_values``
``W{i}``, ``b{i}``    weights ``(out, in)`` and biases of layer ``i``; the last
                      layer is the output layer
``base_edges``        edges of the base discretization
``member{m}_edges``   edges of ensemble member ``m``
``values{m}``         per-bin representatives of head ``m`` (only if stored)
"""

import json

import numpy as np

from .binning import Discretization, DiscretizationEnsemble
from .errors import ConfigError
from .net import DenseLayer, MultiHeadNetwork

FORMAT = "labeldiv-checkpoint"
VERSION = 1


def save_checkpoint(net: MultiHeadNetwork, path) -> None:
    layers = net.layers
    meta = {
        "mode": net.mode,
        "activations": [l.activation for l in layers],
        "n_members": net.ensemble.M,
        "has_bin_values": net.bin_values is not None,
    }
    arrays = {"format": np.array(FORMAT), "version": np.array(VERSION),
              "meta": np.array(json.dumps(meta, sort_keys=True)),
              "base_edges": net.ensemble.base.edges}
    for i, layer in enumerate(layers):
        arrays[f"W{i}"] = layer.weights
        arrays[f"b{i}"] = layer.biases
    for m, d in enumerate(net.ensemble.members):
        arrays[f"member{m}_edges"] = d.edges
    if net.bin_values is not None:
        for m, v in enumerate(net.bin_values):
            arrays[f"values{m}"] = v
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> MultiHeadNetwork:
    with np.load(path, allow_pickle=False) as z:
        if "format" not in z or str(z["format"]) != FORMAT:
            raise ConfigError(f"{path}: not a labeldiv checkpoint")
        version = int(z["version"])
        if version != VERSION:
            raise ConfigError(f"{path}: unsupported checkpoint version {version}")
        meta = json.loads(str(z["meta"]))
        acts = meta["activations"]
        layers = [DenseLayer(z[f"W{i}"].copy(), z[f"b{i}"].copy(), a) for i, a in enumerate(acts)]
        base = Discretization(z["base_edges"])
        members = [Discretization(z[f"member{m}_edges"]) for m in range(meta["n_members"])]
        values = None
        if meta["has_bin_values"]:
            values = [z[f"values{m}"].copy() for m in range(meta["n_members"])]
    return MultiHeadNetwork(layers[:-1], layers[-1], meta["mode"],
                            DiscretizationEnsemble(members, base), values)
