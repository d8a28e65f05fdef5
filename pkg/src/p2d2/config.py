"""
Run-config parsing and validation.

A run config is a JSON document::

    {
      "seed": 7,
      "graph": {"type": "random", "K": 20, "p": 0.2},
      "combination_csv": null,
      "data": {"type": "synthetic", "L_per_agent": 100, "M": 50,
               "sparsity": 0.2, "noise": 0.05},
      "cost": {"kind": "logistic", "l2_reg": 0.01},
      "regularizer": {"kind": "l1", "rho": 0.001},
      "form": "agent",
      "steps": {"mode": "certified", "safety": 0.5},
      "max_iters": 2000,
      "tol": 1e-14,
      "w0": "zeros",
      "workers": 1,
      "output": "trace.csv",
      "figure": true
    }

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import P2D2Error
from .prox import KINDS as REGULARIZER_KINDS
from .solver import FORMS

GRAPH_TYPES = ("random", "path", "ring", "complete", "edges")


class ConfigError(P2D2Error, ValueError):
    """Invalid run config; `field` names the offending entry."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def substream(seed, name):
    """Independent generator for a named purpose ("graph", "data", "init")."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def substream_seed(seed, name):
    return int(substream(seed, name).integers(0, 2**31 - 1))


@dataclass
class RunConfig:
    graph: dict
    data: dict
    cost_kind: str = "logistic"
    l2_reg: float = 0.0
    regularizer: dict = field(default_factory=lambda: {"kind": "zero"})
    form: str = "agent"
    step_mode: str = "certified"
    safety: float = 0.5
    mu: float | None = None
    alpha: float | None = None
    max_iters: int = 1000
    tol: float = 0.0
    seed: int = 0
    w0: str = "zeros"
    workers: int = 1
    output: Path | None = None
    combination_csv: Path | None = None
    figure: bool = True
    base_dir: Path = field(default_factory=Path.cwd)


def _number(obj, key, where, kind=float, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigError(f"{where}{key}", "is required")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}{key}", f"expected a number, got {val!r}")
    if kind is int:
        if int(val) != val:
            raise ConfigError(f"{where}{key}", f"expected an integer, got {val!r}")
        return int(val)
    return float(val)


def _resolve(base, rel):
    return Path(os.path.normpath(base / rel))


def parse_config(doc, base_dir=None):
    """Validate a decoded config dictionary and return a :class:`RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    graph = doc.get("graph")
    if not isinstance(graph, dict):
        raise ConfigError("graph", "is required and must be an object")
    if graph.get("type") not in GRAPH_TYPES:
        raise ConfigError("graph.type", f"must be one of {GRAPH_TYPES}")
    K = _number(graph, "K", "graph.", int, required=True)
    if K < 1:
        raise ConfigError("graph.K", "must be positive")
    if graph["type"] == "random":
        p = _number(graph, "p", "graph.", default=0.2)
        if not 0 < p <= 1:
            raise ConfigError("graph.p", "must lie in (0, 1]")
        if K < 2:
            raise ConfigError("graph.K", "random graphs need K >= 2")
    if graph["type"] == "edges" and not isinstance(graph.get("edges"), list):
        raise ConfigError("graph.edges", "must be a list of [s, k] pairs")

    cost = doc.get("cost", {})
    cost_kind = cost.get("kind", "logistic")
    if cost_kind not in ("logistic", "quadratic"):
        raise ConfigError("cost.kind", "must be 'logistic' or 'quadratic'")
    l2_reg = _number(cost, "l2_reg", "cost.", default=0.0)
    if l2_reg < 0:
        raise ConfigError("cost.l2_reg", "must be nonnegative")

    data = doc.get("data")
    if not isinstance(data, dict):
        raise ConfigError("data", "is required and must be an object")
    if data.get("type") == "synthetic":
        _number(data, "M", "data.", int, required=True)
        if cost_kind == "logistic":
            _number(data, "L_per_agent", "data.", int, required=True)
            noise = _number(data, "noise", "data.", default=0.0)
            if not 0 <= noise <= 1:
                raise ConfigError("data.noise", "must lie in [0, 1]")
    elif data.get("type") == "libsvm":
        if cost_kind != "logistic":
            raise ConfigError("data.type", "libsvm data needs cost.kind = 'logistic'")
        if not isinstance(data.get("path"), str):
            raise ConfigError("data.path", "is required")
        if "max_samples" in data and _number(data, "max_samples", "data.", int) < 1:
            raise ConfigError("data.max_samples", "must be positive")
        path = _resolve(base, data["path"])
        if not path.is_file():
            raise ConfigError("data.path", f"no such file: {path}")
        data = dict(data, path=str(path))
    else:
        raise ConfigError("data.type", "must be 'synthetic' or 'libsvm'")

    reg = doc.get("regularizer", {"kind": "zero"})
    if not isinstance(reg, dict) or reg.get("kind", "zero") not in REGULARIZER_KINDS:
        raise ConfigError("regularizer.kind", f"must be one of {REGULARIZER_KINDS}")
    for key in ("rho", "rho2"):
        if key in reg and _number(reg, key, "regularizer.") < 0:
            raise ConfigError(f"regularizer.{key}", "must be nonnegative")

    form = doc.get("form", "agent")
    if form not in FORMS:
        raise ConfigError("form", f"must be one of {FORMS}")

    steps = doc.get("steps", {"mode": "certified"})
    mode = steps.get("mode", "certified")
    safety, mu, alpha = 0.5, None, None
    if mode == "certified":
        safety = _number(steps, "safety", "steps.", default=0.5)
        if not 0 < safety < 1:
            raise ConfigError("steps.safety", "must lie in (0, 1)")
    elif mode == "manual":
        mu = _number(steps, "mu", "steps.", required=True)
        alpha = _number(steps, "alpha", "steps.", required=True)
        if not mu > 0:
            raise ConfigError("steps.mu", "must be positive")
        if not 0 < alpha <= 1:
            raise ConfigError("steps.alpha", f"must lie in (0, 1], got {alpha}")
    else:
        raise ConfigError("steps.mode", "must be 'certified' or 'manual'")

    max_iters = _number(doc, "max_iters", "", int, default=1000)
    if max_iters < 0:
        raise ConfigError("max_iters", "must be nonnegative")
    tol = _number(doc, "tol", "", default=0.0)
    if tol < 0:
        raise ConfigError("tol", "must be nonnegative")
    workers = _number(doc, "workers", "", int, default=1)
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")
    w0 = doc.get("w0", "zeros")
    if w0 not in ("zeros", "random"):
        raise ConfigError("w0", "must be 'zeros' or 'random'")

    output = doc.get("output")
    comb = doc.get("combination_csv")
    return RunConfig(
        graph=graph, data=data, cost_kind=cost_kind, l2_reg=l2_reg, regularizer=reg,
        form=form, step_mode=mode, safety=safety, mu=mu, alpha=alpha,
        max_iters=max_iters, tol=tol, seed=_number(doc, "seed", "", int, default=0),
        w0=w0, workers=workers,
        output=None if output is None else _resolve(base, output),
        combination_csv=None if comb is None else _resolve(base, comb),
        figure=bool(doc.get("figure", True)), base_dir=base,
    )


def load_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return parse_config(doc, path.parent)
