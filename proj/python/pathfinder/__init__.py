"""Python bindings for the pathfinder engine.

Slides are directories written by :func:`synth` or the ``pathfinder`` CLI.
``backends`` is an optional path to a backend config JSON; all agents are
in-process mocks when it is omitted.
"""

import json
import os

from . import _core
from ._core import BackendError, DataError, grid_dims

__all__ = [
    "BackendError",
    "DataError",
    "assemble_prompt",
    "diagnose",
    "evaluate",
    "grid_dims",
    "majority_vote",
    "synth",
    "trajectories",
    "triage",
]


def _workers(workers):
    return workers if workers is not None else (os.cpu_count() or 1)


def _path(p):
    return "" if p is None else os.fspath(p)


def synth(out_dir, count=40, mix=(1, 1, 1, 1), seed=0, size=1024):
    """Write a synthetic dataset; returns the manifest entries."""
    return json.loads(_core.synth(os.fspath(out_dir), count, list(mix), seed, size))


def triage(slide_dir, seed=0, threshold=0.5, backends=None):
    return json.loads(_core.triage(os.fspath(slide_dir), seed, threshold, _path(backends)))


def trajectories(slide_dir, n=5, length=10, seed=0, sampler="text_conditioned",
                 workers=None, backends=None):
    """One dict per trajectory: {"seed", "steps"}, steps as in the JSONL lines."""
    text = _core.trajectories(os.fspath(slide_dir), n, length, seed, sampler,
                              _workers(workers), _path(backends))
    out = []
    for line in text.splitlines():
        step = json.loads(line)
        if not out or out[-1]["seed"] != step["traj_seed"]:
            out.append({"seed": step["traj_seed"], "steps": []})
        out[-1]["steps"].append(step)
    return out


def diagnose(slide_dir, n=5, length=10, seed=0, threshold=0.5, workers=None, backends=None):
    return json.loads(_core.diagnose(os.fspath(slide_dir), n, length, seed, threshold,
                                     _workers(workers), _path(backends)))


def evaluate(manifest, runs=10, subset=5, pool=20, length=10, seed=0,
             sampler="text_conditioned", threshold=0.5, workers=None, backends=None):
    return json.loads(_core.evaluate(os.fspath(manifest), runs, subset, pool, length, seed,
                                     sampler, threshold, _workers(workers), _path(backends)))


def majority_vote(labels):
    return json.loads(_core.majority_vote(list(labels)))


def assemble_prompt(descriptions):
    return _core.assemble_prompt(list(descriptions))
