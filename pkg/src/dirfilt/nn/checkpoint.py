"""Model persistence: one self-describing npz per checkpoint.

The container holds every parameter array as little-endian float64 plus a JSON
header with the architecture config and free-form training metadata, so a
checkpoint can be reloaded without any side files.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from typing import Optional

import numpy as np

from ..errors import IngestionError
from .model import ArchConfig, validate_params

_HEADER_KEY = "__header__"
_FORMAT = "dirfilt-checkpoint-v1"


def save_checkpoint(path, params: dict, arch_cfg: ArchConfig, meta: Optional[dict] = None) -> None:
    header = {
        "format": _FORMAT,
        "arch_cfg": asdict(arch_cfg),
        "meta": meta or {},
        "param_names": sorted(params),
    }
    arrays = {k: np.ascontiguousarray(v, dtype="<f8") for k, v in params.items()}
    arrays[_HEADER_KEY] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Returns (params, arch_cfg, meta)."""
    try:
        with np.load(path) as data:
            if _HEADER_KEY not in data:
                raise IngestionError(f"{path} is not a model checkpoint (missing header)")
            header = json.loads(bytes(data[_HEADER_KEY]).decode("utf-8"))
            if header.get("format") != _FORMAT:
                raise IngestionError(f"unsupported checkpoint format {header.get('format')!r}")
            params = {k: data[k].astype(np.float64) for k in header["param_names"]}
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot load checkpoint {path}: {exc}") from exc
    cfg_fields = dict(header["arch_cfg"])
    arch_cfg = ArchConfig(**cfg_fields)
    validate_params(params, arch_cfg)
    return params, arch_cfg, header.get("meta", {})


def save_loss_history(path, step_losses, epoch_losses=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for i, loss in enumerate(step_losses):
            fh.write(f"{i + 1},{loss:.10g}\n")
        if epoch_losses:
            fh.write("epoch,mean_loss\n")
            for i, loss in enumerate(epoch_losses):
                fh.write(f"{i + 1},{loss:.10g}\n")
