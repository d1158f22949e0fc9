"""Uniform interface over dimension-reduction engines.

Two kinds of engine exist: the builtin t-SNE, called in-process, and
external engines, called through a file-based request directory so any
language can implement them.  For an external call the adapter

  1. creates a fresh request directory (under $DRTUNE_TMP if set, else the
     system temp dir),
  2. writes ``input.csv`` (the data matrix, no header, '.' decimal) and
     ``params.json`` (a flat name -> number map holding the raw
     hyperparameters plus "d_prime" and "seed"),
  3. runs the engine command with the directory as its last argument,
  4. on exit code 0 reads ``output.csv`` (n rows, d_prime columns, no
     header) and validates shape and finiteness.

Nonzero exit, timeout, or malformed output raise EngineError with the
captured stderr; the request directory is kept on failure for inspection
and removed on success.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .core import DataMatrix, HyperparamDim, HyperparamPoint, HyperparamSpace
from .errors import DomainError, EngineError
from .tsne import Embedding, TsneConfig, run_tsne

TMP_ENV = "DRTUNE_TMP"
BUILTIN_ENGINES = ("tsne",)


@dataclass(frozen=True)
class DrEngineSpec:
    """A named DR method, its hyperparameter space, and how to invoke it."""

    name: str
    space: HyperparamSpace
    kind: str = "builtin"
    command: tuple[str, ...] = ()
    fixed: dict = field(default_factory=dict)
    timeout: float = 300.0

    def __post_init__(self):
        if self.kind not in ("builtin", "external"):
            raise DomainError(f"engine kind must be 'builtin' or 'external', got {self.kind!r}")
        if self.kind == "builtin" and self.name not in BUILTIN_ENGINES:
            raise DomainError(f"unknown builtin engine {self.name!r}")
        if self.kind == "external" and not self.command:
            raise DomainError("external engine needs a command")
        if self.timeout <= 0.0:
            raise DomainError("timeout must be positive")
        object.__setattr__(self, "command", tuple(self.command))


def tsne_engine(space: HyperparamSpace | None = None, **fixed) -> DrEngineSpec:
    """The builtin t-SNE engine; by default tunes perplexity as a count
    fraction of the sample size."""
    if space is None:
        space = HyperparamSpace((HyperparamDim(name="perplexity", kind="count", min_count=1),))
    return DrEngineSpec(name="tsne", space=space, kind="builtin", fixed=dict(fixed))


def external_engine(name: str, space: HyperparamSpace, command,
                    timeout: float = 300.0) -> DrEngineSpec:
    return DrEngineSpec(name=name, space=space, kind="external",
                        command=tuple(command), timeout=timeout)


def _run_builtin(spec: DrEngineSpec, X, raw_params: dict, d_prime: int, seed: int) -> Embedding:
    config = TsneConfig(perplexity=float(raw_params["perplexity"]),
                        d_prime=d_prime, seed=seed, **spec.fixed)
    return run_tsne(X, config)


def _request_dir() -> str:
    root = os.environ.get(TMP_ENV) or None
    if root is not None:
        os.makedirs(root, exist_ok=True)
    return tempfile.mkdtemp(prefix="drtune-req-", dir=root)


def _run_external(spec: DrEngineSpec, V: np.ndarray, raw_params: dict,
                  d_prime: int, seed: int, timeout: float) -> Embedding:
    n = V.shape[0]
    workdir = _request_dir()
    np.savetxt(os.path.join(workdir, "input.csv"), V, delimiter=",", fmt="%.17g")
    params = {str(k): (int(v) if float(v).is_integer() else float(v))
              for k, v in raw_params.items()}
    params["d_prime"] = int(d_prime)
    params["seed"] = int(seed)
    with open(os.path.join(workdir, "params.json"), "w", encoding="utf-8") as fh:
        json.dump(params, fh, indent=2, sort_keys=True)
        fh.write("\n")

    argv = list(spec.command) + [workdir]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError as exc:
        raise EngineError(f"engine {spec.name!r}: command not found: {argv[0]}"
                          f" (request kept at {workdir})") from exc
    except subprocess.TimeoutExpired as exc:
        raise EngineError(f"engine {spec.name!r} timed out after {timeout:.0f}s"
                          f" (request kept at {workdir})", stderr=exc.stderr or "") from exc
    if proc.returncode != 0:
        raise EngineError(f"engine {spec.name!r} exited with code {proc.returncode}"
                          f" (request kept at {workdir})", stderr=proc.stderr)

    out_path = os.path.join(workdir, "output.csv")
    try:
        coords = np.loadtxt(out_path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise EngineError(f"engine {spec.name!r} wrote no output.csv"
                          f" (request kept at {workdir})", stderr=proc.stderr) from exc
    except ValueError as exc:
        raise EngineError(f"engine {spec.name!r} wrote malformed output.csv: {exc}"
                          f" (request kept at {workdir})", stderr=proc.stderr) from exc
    if coords.shape != (n, d_prime):
        raise EngineError(f"engine {spec.name!r} returned shape {coords.shape},"
                          f" expected {(n, d_prime)} (request kept at {workdir})",
                          stderr=proc.stderr)
    if not np.all(np.isfinite(coords)):
        raise EngineError(f"engine {spec.name!r} returned non-finite coordinates"
                          f" (request kept at {workdir})", stderr=proc.stderr)
    shutil.rmtree(workdir, ignore_errors=True)
    return Embedding(coords=coords, params=dict(params), final_kl=None)


def run_engine(spec: DrEngineSpec, X, raw_params: dict, d_prime: int = 2,
               seed: int = 0, timeout: float | None = None) -> Embedding:
    """Produce one embedding from raw (denormalized) hyperparameter values."""
    V = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=float)
    missing = [d.name for d in spec.space.dims if d.name not in raw_params]
    if missing:
        raise DomainError(f"engine {spec.name!r} missing hyperparameters: {missing}")
    if d_prime < 1:
        raise DomainError("d_prime must be >= 1")
    if spec.kind == "builtin":
        return _run_builtin(spec, V, raw_params, d_prime, seed)
    return _run_external(spec, V, raw_params, d_prime, seed,
                         spec.timeout if timeout is None else timeout)


def embed_point(spec: DrEngineSpec, X, point: HyperparamPoint, d_prime: int = 2,
                seed: int = 0) -> Embedding:
    """run_engine with raw values taken from a hyperparameter point."""
    raw_params = dict(zip(spec.space.names, point.raw))
    return run_engine(spec, X, raw_params, d_prime=d_prime, seed=seed)
