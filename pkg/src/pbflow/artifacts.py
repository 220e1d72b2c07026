"""On-disk artifacts: npz serialization of states and layers, and the run manifest.

Every artifact is an ``.npz`` file whose scalar metadata sits in a JSON
string under the key ``meta``. The manifest (``manifest.json`` in the
output directory) maps a stage name to the config hash it was computed for,
its files with their sha256, and the wall-clock time of the stage.
"""
from __future__ import annotations

import hashlib
import json
import os
import platform
import tempfile
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy
from filelock import FileLock

from .ns_solver import NSState
from .spectral import RadialGrid, ThetaGrid


def save_npz(path: Path, meta: dict, **arrays) -> Path:
    """Write atomically: a reader never sees a half-written file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz")
    os.close(fd)
    try:
        np.savez(tmp, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def load_npz(path: Path) -> tuple[dict, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        arrays = {k: data[k] for k in data.files if k != "meta"}
    return meta, arrays


def save_state(path: Path, state: NSState, **extra_meta) -> Path:
    meta = {"kind": "ns_state", "epsilon": state.epsilon, "n_theta": state.theta_grid.n,
            "n_r": state.radial_grid.n, "r0": state.radial_grid.r0,
            "pressure_gradient": state.pressure_gradient, **extra_meta}
    return save_npz(path, meta, u=state.u, v=state.v, p=state.p)


def load_state(path: Path) -> NSState:
    meta, a = load_npz(path)
    if meta.get("kind") != "ns_state":
        raise ValueError(f"{path} does not hold a Navier-Stokes state")
    tg, rg = ThetaGrid(meta["n_theta"]), RadialGrid(meta["r0"], meta["n_r"])
    return NSState(meta["epsilon"], tg, rg, a["u"], a["v"], a["p"], meta["pressure_gradient"])


def save_composite(path: Path, comp, **extra_meta) -> Path:
    meta = {"kind": "composite", "K": comp.K, "epsilon": comp.epsilon, "n_theta": comp.theta_grid.n,
            "n_r": comp.radial_grid.n, "r0": comp.radial_grid.r0,
            "pressure_gradient": comp.pressure_gradient, **extra_meta}
    return save_npz(path, meta, u=comp.u, v=comp.v, p=comp.p, h=comp.h)


def save_layers(path: Path, exp, **extra_meta) -> Path:
    """Leading and first-order layer fields of both walls."""
    arrays, meta = {}, {"kind": "layers", **extra_meta}
    for side in ("outer", "inner"):
        vmf, lead = exp.vonmises[side], exp.leading[side]
        arrays[f"{side}_Q"] = vmf.Q
        arrays[f"{side}_psi"] = vmf.psi_grid.nodes
        arrays[f"{side}_n"] = lead.layer_grid.nodes
        arrays[f"{side}_u_p0"] = lead.u_p0
        arrays[f"{side}_v_p1"] = lead.v_p1
        arrays[f"{side}_p_p1"] = lead.p_p1
        meta[f"{side}_U"] = lead.U_wall
        meta[f"{side}_ratios"] = list(vmf.ratios)
        meta[f"{side}_iterations"] = vmf.iterations
        lay = exp.layer1.get(side)
        if lay is not None:
            arrays[f"{side}_u_p1"] = lay.u
            arrays[f"{side}_v_p2"] = lay.v_next
            if lay.p_next is not None:
                arrays[f"{side}_p_p2"] = lay.p_next
            meta[f"{side}_A_inf"] = lay.A_inf
    return save_npz(path, meta, **arrays)


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"pbflow": pkg, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


class Manifest:
    """Stage records in ``<out>/manifest.json``, guarded by a lock file."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path = self.out_dir / "manifest.json"
        self.lock = FileLock(str(self.path) + ".lock")

    def read(self) -> dict:
        if not self.path.exists():
            return {"stages": {}}
        return json.loads(self.path.read_text())

    def lookup(self, stage: str, config_hash: str) -> dict | None:
        """The stage record if it was computed for this hash and all its files are intact."""
        with self.lock:
            rec = self.read()["stages"].get(stage)
        if rec is None or rec["config_hash"] != config_hash:
            return None
        for rel, digest in rec["files"].items():
            p = self.out_dir / rel
            if not p.exists() or file_sha256(p) != digest:
                return None
        return rec

    def record(self, stage: str, config_hash: str, files, seconds: float, info: dict | None = None) -> dict:
        rec = {
            "config_hash": config_hash,
            "files": {str(Path(f).relative_to(self.out_dir)): file_sha256(f) for f in files},
            "seconds": round(seconds, 3),
            "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "versions": versions(),
            "info": info or {},
        }
        with self.lock:
            data = self.read()
            data["stages"][stage] = rec
            tmp = self.path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(data, indent=2, sort_keys=True))
            os.replace(tmp, self.path)
        return rec
