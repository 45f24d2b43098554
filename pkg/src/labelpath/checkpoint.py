"""Single-file checkpoints: one JSON header line, then raw float32 data.

The header records the format version, hyperparameters (config plus the
vocabulary and taxonomy level sizes needed to rebuild the model), the
seed, and the name/shape of every parameter; the payload is each
parameter's data as little-endian float32 in header order.
"""

from __future__ import annotations

import json

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""


def save(path, model) -> None:
    params = model.parameters()
    header = {
        "format_version": FORMAT_VERSION,
        "hyperparameters": {
            "config": model.config.to_dict(),
            "vocab": model.vocab.tokens,
            "level_sizes": [len(lv) for lv in model.taxonomy.levels],
            "level_codes": [[model.taxonomy.codes[lid] for lid in lv]
                            for lv in model.taxonomy.levels],
        },
        "seed": model.config.seed,
        "params": [{"name": name, "shape": list(p.data.shape)}
                   for name, p in params.items()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, ensure_ascii=False).encode("utf-8"))
        fh.write(b"\n")
        for p in params.values():
            fh.write(np.ascontiguousarray(
                p.data.astype("<f4", copy=False)).tobytes())


def load(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Returns (header, name -> float32 array in header order)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(
                f"unsupported format_version {header.get('format_version')}")
        payload = fh.read()
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        chunk = payload[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(
                f"truncated payload at parameter {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(f"{len(payload) - offset} trailing bytes")
    return header, arrays


def restore(path, taxonomy, graph):
    """Rebuild a Model from a checkpoint plus its taxonomy and graph."""
    from .config import Config
    from .corpus import Vocab
    from .model import Model

    header, arrays = load(path)
    hp = header["hyperparameters"]
    level_sizes = [len(lv) for lv in taxonomy.levels]
    if hp["level_sizes"] != level_sizes:
        raise CheckpointError(
            f"taxonomy level sizes {level_sizes} do not match the "
            f"checkpoint's {hp['level_sizes']}")
    config = Config.from_dict(hp["config"])
    vocab = Vocab.__new__(Vocab)
    vocab.tokens = list(hp["vocab"])
    vocab.index = {tok: i for i, tok in enumerate(vocab.tokens)}
    model = Model(config, taxonomy, vocab, graph)
    params = model.parameters()
    missing = set(params) ^ set(arrays)
    if missing:
        raise CheckpointError(f"parameter set mismatch: {sorted(missing)}")
    for name, arr in arrays.items():
        if params[name].data.shape != arr.shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: {params[name].data.shape} "
                f"vs {arr.shape}")
        params[name].data = arr.astype(model.dtype).copy()
    return model
