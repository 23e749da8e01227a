"""Checkpoints: one ``.npz`` with parameters, optimizer state and a JSON header."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import ExperimentConfig

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, pipeline, cfg: ExperimentConfig, seed: int, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = pipeline.decision.state_arrays("decision")
    arch = {"decision": pipeline.decision.architecture()}
    if pipeline.priority is not None:
        arrays.update(pipeline.priority.state_arrays("priority"))
        arch["priority"] = pipeline.priority.architecture()
    meta = {
        "version": CHECKPOINT_VERSION,
        "seed": int(seed),
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "architecture": arch,
        "decision_obs_dim": pipeline.decision.obs_dim,
        "extra": extra or {},
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def read_checkpoint(path) -> tuple[dict, dict]:
    """Return ``(meta, arrays)``."""
    try:
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if "meta" not in arrays:
        raise CheckpointError(f"{path}: missing metadata")
    meta = json.loads(arrays.pop("meta").tobytes().decode())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    return meta, arrays


def restore_pipeline(pipeline, meta: dict, arrays: dict) -> None:
    """Load weights into a freshly wired pipeline, checking shapes first."""
    if pipeline.decision.obs_dim != meta["decision_obs_dim"]:
        raise CheckpointError(
            f"decision input width {pipeline.decision.obs_dim} does not match checkpoint "
            f"({meta['decision_obs_dim']})"
        )
    if pipeline.priority is None and "priority.actor" in arrays:
        raise CheckpointError("checkpoint holds a priority policy the variant does not use")
    for name, inst in (("decision", pipeline.decision), ("priority", pipeline.priority)):
        if inst is None:
            continue
        if f"{name}.actor" not in arrays:
            raise CheckpointError(f"checkpoint has no {name} parameters")
        if arrays[f"{name}.actor"].shape != inst.actor.params.shape:
            raise CheckpointError(f"{name} actor shape mismatch")
        if arrays[f"{name}.critic"].shape == inst.critic.params.shape:
            inst.load_arrays(arrays, name)
        else:
            # the critic is sized by the agent count; evaluation never queries it
            inst.actor.params[...] = arrays[f"{name}.actor"]
