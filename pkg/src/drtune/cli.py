"""Command-line surface: configuration, persistence and plot-data emission.

Configuration is one TOML file with [dataset], [tune] (plus [tune.metric],
[tune.engine] and optional [[tune.space]] dimension tables) and optional
[grid] / [sobol] sections; the README documents the full grammar and the
defaults table.  Commands write plot-ready CSV files and a self-contained
JSON manifest (config echo, subsample indices, per-trial records, fitted
surrogate hyperparameters, wall clock) so pareto/sobol post-processing can
run without re-tuning.

Exit codes: 0 success, 2 configuration error, 3 runtime error.  All output
is byte-identical across runs with the same seed once --no-timestamp
suppresses the timestamp headers and wall-clock fields.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from datetime import datetime, timezone

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .analysis import merged_objective_samples, pareto_front, sobol_indices
from .core import (DataMatrix, HyperparamDim, HyperparamSpace, SubsampleInfo,
                   TrialRecord, TuningHistory, derive_seed, make_point,
                   normalize_point)
from .data import DatasetSpec, save_csv
from .dr_adapter import DrEngineSpec, run_engine, tsne_engine
from .errors import ConfigError, DomainError, DrTuneError, IngestionError
from .metrics import METRIC_NAMES, Aggregation, MetricSpec
from .surrogate import AcquisitionSpec, fit as fit_surrogate
from .tuner import (_S_SUBSAMPLE, CrossEvaluator, TuneConfig,
                    best_so_far_trace, grid_search, run_tuning)

MANIFEST_FORMAT = "drtune-manifest-v1"
_REFIT_SEED_TAG = 401
_EMBED_SEED_TAG = 411


# ---------------------------------------------------------------------------
# config parsing (TOML -> objects); DomainError here becomes ConfigError with
# the offending section path in the message
# ---------------------------------------------------------------------------

def load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None


def _section(config: dict, name: str, default=None):
    value = config.get(name, default)
    if value is None:
        raise ConfigError(f"config is missing the [{name}] section")
    return value


def dataset_from_dict(section: dict) -> DatasetSpec:
    section = dict(section)
    kind = section.pop("kind", None)
    if kind not in ("two_cluster", "sine", "csv"):
        raise ConfigError(f"[dataset] kind must be two_cluster, sine or csv, got {kind!r}")
    seed = int(section.pop("seed", 0))
    return DatasetSpec(kind=kind, params=section, seed=seed)


def space_from_config(items) -> HyperparamSpace:
    dims = []
    for i, item in enumerate(items):
        item = dict(item)
        try:
            kwargs = {"name": item.pop("name", ""), "kind": item.pop("kind", "continuous")}
            if "bounds" in item:
                bounds = item.pop("bounds")
                kwargs["bounds"] = (float(bounds[0]), float(bounds[1]))
            if "values" in item:
                kwargs["values"] = tuple(float(v) for v in item.pop("values"))
            if "min_count" in item:
                kwargs["min_count"] = int(item.pop("min_count"))
            if "max_count" in item:
                kwargs["max_count"] = int(item.pop("max_count"))
            if item:
                raise ConfigError(f"unknown keys {sorted(item)}")
            dims.append(HyperparamDim(**kwargs))
        except (DomainError, ConfigError, TypeError, ValueError) as exc:
            raise ConfigError(f"[[tune.space]] entry {i}: {exc}") from None
    try:
        return HyperparamSpace(tuple(dims))
    except DomainError as exc:
        raise ConfigError(f"[tune.space]: {exc}") from None


def engine_from_dict(section: dict, space: HyperparamSpace | None) -> DrEngineSpec:
    section = dict(section)
    name = section.pop("name", "tsne")
    kind = section.pop("kind", "builtin")
    timeout = float(section.pop("timeout", 300.0))
    try:
        if kind == "builtin":
            if name != "tsne":
                raise ConfigError(f"unknown builtin engine {name!r}")
            section.pop("command", None)
            engine = tsne_engine(space=space, **section)
            return DrEngineSpec(name=engine.name, space=engine.space, kind="builtin",
                                fixed=engine.fixed, timeout=timeout)
        if kind == "external":
            command = section.pop("command", None)
            if not command:
                raise ConfigError("external engine needs a command list")
            if space is None:
                raise ConfigError("external engine needs explicit [[tune.space]] dimensions")
            if section:
                raise ConfigError(f"unknown keys {sorted(section)}")
            resolved = shutil.which(command[0]) or (command[0] if os.path.exists(command[0]) else None)
            if resolved is None:
                raise ConfigError(f"engine command not found: {command[0]}")
            return DrEngineSpec(name=name, space=space, kind="external",
                                command=tuple(str(c) for c in command), timeout=timeout)
        raise ConfigError(f"engine kind must be builtin or external, got {kind!r}")
    except (DomainError, ConfigError, TypeError) as exc:
        raise ConfigError(f"[tune.engine]: {exc}") from None


def metric_from_dict(section: dict) -> MetricSpec:
    section = dict(section)
    try:
        aggregation = Aggregation(kind=section.pop("aggregation", "mean"),
                                  q=float(section.pop("q", 0.5)),
                                  k=float(section.pop("k", 1.0)))
        name = section.pop("name", None)
        if name not in METRIC_NAMES:
            raise ConfigError(f"name must be one of {METRIC_NAMES}, got {name!r}")
        kwargs = {"name": name, "aggregation": aggregation}
        if "n_repeat" in section:
            kwargs["n_repeat"] = int(section.pop("n_repeat"))
        if "kmeans_k" in section:
            kwargs["kmeans_k"] = int(section.pop("kmeans_k"))
        if "train_frac" in section:
            kwargs["train_frac"] = float(section.pop("train_frac"))
        if section:
            raise ConfigError(f"unknown keys {sorted(section)}")
        return MetricSpec(**kwargs)
    except (DomainError, ConfigError, TypeError, ValueError) as exc:
        raise ConfigError(f"[tune.metric]: {exc}") from None


def tune_config_from_dict(section: dict, seed_override: int | None = None) -> TuneConfig:
    section = dict(section)
    metric = metric_from_dict(_section(section, "metric"))
    section.pop("metric", None)
    space_items = section.pop("space", None)
    space = space_from_config(space_items) if space_items else None
    engine = engine_from_dict(section.pop("engine", {"name": "tsne"}), space)
    try:
        acq = AcquisitionSpec(kind=section.pop("acquisition", "ei"),
                              xi=float(section.pop("xi", 0.01)),
                              kappa=float(section.pop("kappa", 1.96)))
        kwargs = {
            "engine": engine, "metric": metric, "space": space, "acquisition": acq,
            "sampler": section.pop("sampler", "none"),
            "n1": int(section.pop("n1", 5)),
            "n2": int(section.pop("n2", 15)),
            "surrogate_kind": section.pop("surrogate", "gp"),
            "d_prime": int(section.pop("d_prime", 2)),
            "pilot": section.pop("pilot", "sobol"),
            "master_seed": int(section.pop("master_seed", 0)),
        }
        n_prime = int(section.pop("n_prime", 0))
        if n_prime:
            kwargs["n_prime"] = n_prime
        if "n_repeat" in section:
            kwargs["n_repeat"] = int(section.pop("n_repeat"))
        if section:
            raise ConfigError(f"unknown keys {sorted(section)}")
        if seed_override is not None:
            kwargs["master_seed"] = int(seed_override)
        return TuneConfig(**kwargs)
    except (DomainError, ConfigError, TypeError, ValueError) as exc:
        raise ConfigError(f"[tune]: {exc}") from None


# ---------------------------------------------------------------------------
# serialization (objects -> manifest dicts and back)
# ---------------------------------------------------------------------------

def _dim_to_dict(dim: HyperparamDim) -> dict:
    out = {"name": dim.name, "kind": dim.kind}
    if dim.kind == "discrete":
        out["values"] = list(dim.values)
    else:
        out["bounds"] = list(dim.bounds)
    if dim.kind == "count":
        out["min_count"] = dim.min_count
        if dim.max_count is not None:
            out["max_count"] = dim.max_count
    return out


def _dim_from_dict(d: dict) -> HyperparamDim:
    kwargs = {"name": d["name"], "kind": d["kind"]}
    if "bounds" in d:
        kwargs["bounds"] = tuple(d["bounds"])
    if "values" in d:
        kwargs["values"] = tuple(d["values"])
    kwargs["min_count"] = int(d.get("min_count", 1))
    if d.get("max_count") is not None:
        kwargs["max_count"] = int(d["max_count"])
    return HyperparamDim(**kwargs)


def config_to_dict(config: TuneConfig) -> dict:
    metric = config.metric_spec
    return {
        "engine": {"name": config.engine.name, "kind": config.engine.kind,
                   "command": list(config.engine.command),
                   "fixed": dict(config.engine.fixed),
                   "timeout": config.engine.timeout},
        "metric": {"name": metric.name, "n_repeat": metric.n_repeat,
                   "aggregation": {"kind": metric.aggregation.kind,
                                   "q": metric.aggregation.q,
                                   "k": metric.aggregation.k},
                   "kmeans_k": metric.kmeans_k, "train_frac": metric.train_frac},
        "space": [_dim_to_dict(d) for d in config.space.dims],
        "sampler": config.sampler, "n_prime": config.n_prime,
        "n1": config.n1, "n2": config.n2,
        "surrogate": config.surrogate_kind,
        "acquisition": {"kind": config.acquisition.kind,
                        "xi": config.acquisition.xi,
                        "kappa": config.acquisition.kappa},
        "d_prime": config.d_prime, "pilot": config.pilot,
        "master_seed": config.master_seed,
    }


def config_from_dict(d: dict) -> TuneConfig:
    space = HyperparamSpace(tuple(_dim_from_dict(item) for item in d["space"]))
    eng = d["engine"]
    engine = DrEngineSpec(name=eng["name"], space=space, kind=eng["kind"],
                          command=tuple(eng.get("command", ())),
                          fixed=dict(eng.get("fixed", {})),
                          timeout=float(eng.get("timeout", 300.0)))
    met = d["metric"]
    agg = met.get("aggregation", {})
    metric = MetricSpec(name=met["name"], n_repeat=int(met["n_repeat"]),
                        aggregation=Aggregation(kind=agg.get("kind", "mean"),
                                                q=float(agg.get("q", 0.5)),
                                                k=float(agg.get("k", 1.0))),
                        kmeans_k=met.get("kmeans_k"),
                        train_frac=float(met.get("train_frac", 0.8)))
    acq = d.get("acquisition", {})
    return TuneConfig(engine=engine, metric=metric, space=space,
                      sampler=d.get("sampler", "none"),
                      n_prime=d.get("n_prime"),
                      n1=int(d["n1"]), n2=int(d["n2"]),
                      surrogate_kind=d.get("surrogate", "gp"),
                      acquisition=AcquisitionSpec(kind=acq.get("kind", "ei"),
                                                  xi=float(acq.get("xi", 0.01)),
                                                  kappa=float(acq.get("kappa", 1.96))),
                      d_prime=int(d.get("d_prime", 2)),
                      pilot=d.get("pilot", "sobol"),
                      master_seed=int(d.get("master_seed", 0)))


def history_to_manifest(history: TuningHistory, config: TuneConfig,
                        dataset: DatasetSpec, command: str,
                        with_times: bool, extra: dict | None = None) -> dict:
    info = history.subsample_info
    trials = []
    for t, record in enumerate(history.records):
        entry = {
            "index": t, "phase": record.phase,
            "normalized": list(record.point.normalized),
            "raw": list(record.point.raw),
            "losses": list(record.metric_values),
            "aggregate": record.aggregate,
            "seed_base": record.seed_base,
            "dropped_repeats": record.dropped_repeats,
        }
        if with_times and record.wall_time is not None:
            entry["wall_time"] = record.wall_time
        trials.append(entry)
    manifest = {
        "format": MANIFEST_FORMAT,
        "command": command,
        "dataset": {"kind": dataset.kind, "params": dict(dataset.params),
                    "seed": dataset.seed},
        "config": config_to_dict(config),
        "subsample": {"sampler": info.sampler, "n_prime": info.n_prime,
                      "seed": info.seed, "fallback_uniform": info.fallback_uniform,
                      "indices": list(info.indices)},
        "metric_name": history.metric_name,
        "dr_name": history.dr_name,
        "trials": trials,
        "surrogate_trace": list(history.surrogate_trace),
    }
    if with_times:
        manifest["created"] = datetime.now(timezone.utc).isoformat()
    if extra:
        manifest.update(extra)
    return manifest


def load_manifest(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"{path}: not a {MANIFEST_FORMAT} manifest")
    return manifest


def history_from_manifest(manifest: dict) -> tuple[TuningHistory, TuneConfig]:
    config = config_from_dict(manifest["config"])
    sub = manifest["subsample"]
    info = SubsampleInfo(sampler=sub["sampler"], n_prime=int(sub["n_prime"]),
                         seed=int(sub["seed"]), indices=tuple(sub["indices"]),
                         fallback_uniform=bool(sub.get("fallback_uniform", False)))
    history = TuningHistory(space=config.space,
                            metric_name=manifest["metric_name"],
                            dr_name=manifest["dr_name"], subsample_info=info)
    n_prime = info.n_prime
    for entry in manifest["trials"]:
        point = make_point(config.space, entry["normalized"], max(n_prime, 2))
        history.append(TrialRecord(point=point,
                                   metric_values=tuple(entry["losses"]),
                                   aggregate=float(entry["aggregate"]),
                                   phase=entry["phase"],
                                   seed_base=int(entry["seed_base"]),
                                   dropped_repeats=int(entry.get("dropped_repeats", 0)),
                                   wall_time=entry.get("wall_time")))
    history.surrogate_trace.extend(manifest.get("surrogate_trace", []))
    return history, config


def dataset_from_manifest(manifest: dict) -> DataMatrix:
    """Rebuild the tuning dataset (after subsampling) from a manifest."""
    ds = manifest["dataset"]
    spec = DatasetSpec(kind=ds["kind"], params=dict(ds["params"]), seed=int(ds["seed"]))
    if spec.kind == "csv" and not os.path.exists(spec.params.get("path", "")):
        raise ConfigError(f"dataset file referenced by the manifest is missing: "
                          f"{spec.params.get('path')!r}")
    data = spec.load()
    indices = manifest["subsample"]["indices"]
    if len(indices) < data.n:
        data = data.subset(indices)
    return data


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _check_fresh(path: str, force: bool):
    if os.path.exists(path) and not force:
        raise ConfigError(f"refusing to overwrite existing {path} (use --force)")


def write_csv(path: str, header: list[str], rows, timestamp: bool):
    with open(path, "w", encoding="utf-8") as fh:
        if timestamp:
            fh.write(f"# generated: {datetime.now(timezone.utc).isoformat()}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(path: str, force: bool, *filenames: str) -> str:
    os.makedirs(path, exist_ok=True)
    for name in filenames:
        _check_fresh(os.path.join(path, name), force)
    return path


def _metric_rows(history: TuningHistory):
    for t, record in enumerate(history.records):
        for r, loss in enumerate(record.metric_values):
            yield (t, r, history.metric_name, loss)


def _summary_lines(history: TuningHistory, config: TuneConfig, data_n: int) -> list[str]:
    best = history.best()
    names = history.space.names
    lines = [
        f"engine: {history.dr_name}",
        f"metric: {history.metric_name} (aggregation: {config.metric_spec.aggregation.kind})",
        f"trials: {len(history.records)}  repeats per trial: {config.metric_spec.n_repeat}",
        f"subsample: {history.subsample_info.sampler} n'={history.subsample_info.n_prime}",
        f"best trial: {history.best_index()} ({best.phase})",
        f"best aggregate loss: {_fmt(best.aggregate)}",
    ]
    for name, u, raw in zip(names, best.point.normalized, best.point.raw):
        lines.append(f"best {name}: normalized {_fmt(u)} -> raw {_fmt(raw)} (at n'={data_n})")
    return lines


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    config = load_toml(args.config)
    dataset = dataset_from_dict(_section(config, "dataset"))
    if args.seed is not None:
        dataset = DatasetSpec(kind=dataset.kind, params=dataset.params, seed=args.seed)
    _check_fresh(args.out, args.force)
    data = dataset.load()
    save_csv(args.out, data)
    print(f"wrote {data.n}x{data.d} dataset"
          + (" with labels" if data.labels is not None else "") + f" to {args.out}")
    return 0


def _write_run_outputs(outdir: str, history: TuningHistory, config: TuneConfig,
                       dataset: DatasetSpec, command: str, args, extra=None):
    timestamp = not args.no_timestamp
    manifest = history_to_manifest(history, config, dataset, command,
                                   with_times=timestamp, extra=extra)
    write_json(os.path.join(outdir, "manifest.json"), manifest)
    trace = best_so_far_trace(history)
    write_csv(os.path.join(outdir, "convergence.csv"),
              ["iteration", "best_so_far"],
              [(i + 1, v) for i, v in enumerate(trace)], timestamp)
    write_csv(os.path.join(outdir, "metrics.csv"),
              ["trial_id", "repeat_id", "metric", "loss"],
              _metric_rows(history), timestamp)
    n_prime = history.subsample_info.n_prime
    lines = _summary_lines(history, config, n_prime)
    with open(os.path.join(outdir, "summary.txt"), "w", encoding="utf-8") as fh:
        if timestamp:
            fh.write(f"# generated: {datetime.now(timezone.utc).isoformat()}\n")
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)


def cmd_tune(args) -> int:
    config_data = load_toml(args.config)
    dataset = dataset_from_dict(_section(config_data, "dataset"))
    config = tune_config_from_dict(_section(config_data, "tune"), args.seed)
    outdir = _outdir(args.out, args.force, "manifest.json", "convergence.csv",
                     "metrics.csv", "summary.txt")
    data = dataset.load()
    history = run_tuning(data, config, jobs=args.jobs)
    _write_run_outputs(outdir, history, config, dataset, "tune", args)
    return 0


def cmd_grid(args) -> int:
    config_data = load_toml(args.config)
    dataset = dataset_from_dict(_section(config_data, "dataset"))
    config = tune_config_from_dict(_section(config_data, "tune"), args.seed)
    grid_points = args.grid_points or int(config_data.get("grid", {}).get("points", 20))
    outdir = _outdir(args.out, args.force, "manifest.json", "convergence.csv",
                     "metrics.csv", "summary.txt", "points.csv")
    data = dataset.load()
    history = grid_search(data, config, grid_points, jobs=args.jobs)
    _write_run_outputs(outdir, history, config, dataset, "grid", args,
                       extra={"grid_points": grid_points})

    names = history.space.names
    header = ([f"u_{n}" for n in names] + [f"raw_{n}" for n in names]
              + ["mean", "variance", "aggregate"])
    rows = []
    for record in history.records:
        losses = np.array(record.metric_values)
        rows.append(tuple(record.point.normalized) + tuple(record.point.raw)
                    + (float(losses.mean()), float(losses.var()), record.aggregate))
    write_csv(os.path.join(outdir, "points.csv"), header, rows, not args.no_timestamp)
    return 0


def _cross_evaluator(manifests, configs, metric_names, seed, jobs) -> CrossEvaluator:
    data = dataset_from_manifest(manifests[0])
    config = configs[0]
    specs = {}
    for name in metric_names:
        for manifest, cfg in zip(manifests, configs):
            if manifest["metric_name"] == name:
                specs[name] = cfg.metric_spec
                break
        else:
            specs[name] = MetricSpec(name=name, n_repeat=config.metric_spec.n_repeat)
    return CrossEvaluator(engine=config.engine, data=data, space=config.space,
                          metrics=specs, d_prime=config.d_prime,
                          master_seed=seed, jobs=jobs)


def cmd_pareto(args) -> int:
    manifest_paths = args.manifest
    if not manifest_paths:
        raise ConfigError("pareto needs at least one --manifest")
    manifests = [load_manifest(p) for p in manifest_paths]
    pairs = [history_from_manifest(m) for m in manifests]
    histories = [h for h, _ in pairs]
    configs = [c for _, c in pairs]
    for other in histories[1:]:
        if other.space != histories[0].space:
            raise ConfigError("manifests use different hyperparameter spaces")

    if args.metrics:
        names = tuple(args.metrics.split(","))
        if len(names) != 2:
            raise ConfigError("--metrics needs exactly two comma-separated names")
    else:
        names = tuple(dict.fromkeys(h.metric_name for h in histories))
        if len(names) != 2:
            raise ConfigError("manifests cover "
                              f"{len(names)} metric(s); pass --metrics name1,name2")
    for name in names:
        if name not in METRIC_NAMES:
            raise ConfigError(f"unknown metric {name!r}")

    seed = args.seed if args.seed is not None else configs[0].master_seed
    cross = _cross_evaluator(manifests, configs, names, seed, args.jobs)
    samples = merged_objective_samples(histories, names, cross)
    result = pareto_front(samples)
    on_front = set(result.front)

    _check_fresh(args.out, args.force)
    write_csv(args.out, ["loss1", "loss2", "on_front", "weight"],
              [(s.losses[0], s.losses[1], i in on_front, s.weight)
               for i, s in enumerate(samples)], not args.no_timestamp)
    print(f"{len(samples)} samples, {len(result.front)} on the Pareto front "
          f"({names[0]} vs {names[1]})")
    if result.knee is not None:
        knee = samples[result.knee]
        print(f"knee point: losses ({_fmt(knee.losses[0])}, {_fmt(knee.losses[1])}) "
              f"at normalized {tuple(round(u, 6) for u in knee.normalized)}")
    else:
        print("knee point: undefined (front has fewer than 3 points)")
    return 0


def cmd_sobol(args) -> int:
    manifest = load_manifest(args.manifest)
    history, config = history_from_manifest(manifest)
    if len(config.space) < 2:
        raise ConfigError("sensitivity analysis needs >= 2 hyperparameter dimensions; "
                          f"this manifest has {len(config.space)} "
                          f"({', '.join(config.space.names)})")
    if len(history.records) < 2:
        raise ConfigError("manifest holds fewer than 2 trials; cannot fit a surrogate")
    seed = args.seed if args.seed is not None else config.master_seed
    model = fit_surrogate(config.surrogate_kind, history.points(),
                          history.aggregates(), derive_seed(seed, _REFIT_SEED_TAG))
    result = sobol_indices(lambda pts: model.predict(pts)[0], config.space,
                           args.n_base, seed=seed)

    _check_fresh(args.out, args.force)
    write_csv(args.out, ["dim", "S1", "S1_conf", "ST", "ST_conf"],
              [(name, result.s1[i], result.s1_conf[i], result.st[i], result.st_conf[i])
               for i, name in enumerate(result.names)], not args.no_timestamp)
    if result.degenerate:
        print("surrogate mean is (numerically) constant; indices degenerate, all zero")
    for i, name in enumerate(result.names):
        print(f"{name}: S1={result.s1[i]:.4f}±{result.s1_conf[i]:.4f} "
              f"ST={result.st[i]:.4f}±{result.st_conf[i]:.4f}")
    return 0


def _parse_assignments(text: str, space: HyperparamSpace) -> dict:
    values = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"expected name=value, got {part!r}")
        name, _, raw = part.partition("=")
        name = name.strip()
        if name not in space.names:
            raise ConfigError(f"unknown hyperparameter {name!r} "
                              f"(space has {', '.join(space.names)})")
        try:
            values[name] = float(raw)
        except ValueError:
            raise ConfigError(f"invalid number for {name!r}: {raw!r}") from None
    missing = [n for n in space.names if n not in values]
    if missing:
        raise ConfigError(f"missing hyperparameters: {', '.join(missing)}")
    return values


def cmd_embed(args) -> int:
    if (args.normalized is None) == (args.raw is None):
        raise ConfigError("pass exactly one of --normalized or --raw")
    config_data = load_toml(args.config)
    dataset = dataset_from_dict(_section(config_data, "dataset"))
    config = tune_config_from_dict(_section(config_data, "tune"), args.seed)
    data = dataset.load()
    if args.subsample:
        from .subsample import make_subsample
        info = make_subsample(data, config.sampler, config.n_prime,
                              derive_seed(config.master_seed, _S_SUBSAMPLE))
        if info.n_prime < data.n:
            data = data.subset(info.indices)

    space = config.space
    if args.normalized is not None:
        by_name = _parse_assignments(args.normalized, space)
        u = [by_name[n] for n in space.names]
        if any(not 0.0 <= v <= 1.0 for v in u):
            raise ConfigError("normalized values must lie in [0, 1]")
        point = make_point(space, u, data.n)
    else:
        by_name = _parse_assignments(args.raw, space)
        raw = [by_name[n] for n in space.names]
        try:
            u = normalize_point(space, raw, data.n)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        point = make_point(space, u, data.n)

    raw_params = dict(zip(space.names, point.raw))
    embedding = run_engine(config.engine, data, raw_params, d_prime=config.d_prime,
                           seed=derive_seed(config.master_seed, _EMBED_SEED_TAG))

    _check_fresh(args.out, args.force)
    with open(args.out, "w", encoding="utf-8") as fh:
        if not args.no_timestamp:
            fh.write(f"# generated: {datetime.now(timezone.utc).isoformat()}\n")
        fh.write("# " + ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(raw_params.items()))
                 + f", d_prime={config.d_prime}, n={data.n}\n")
        cols = [f"x{j}" for j in range(embedding.coords.shape[1])]
        if data.labels is not None:
            cols.append("label")
        fh.write(",".join(cols) + "\n")
        for i in range(embedding.coords.shape[0]):
            row = [_fmt(v) for v in embedding.coords[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            fh.write(",".join(row) + "\n")
    print(f"embedded {data.n} points with "
          + ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(raw_params.items())))
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _add_common(parser, config=True, out=True):
    if config:
        parser.add_argument("--config", required=True, help="TOML configuration file")
    if out:
        parser.add_argument("--out", required=True, help="output path")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--force", action="store_true", help="overwrite existing outputs")
    parser.add_argument("--no-timestamp", action="store_true",
                        help="omit timestamps and wall-clock fields for byte-identical output")
    parser.add_argument("--jobs", type=int, default=1,
                        help="max concurrent repeat evaluations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drtune",
        description="Tune dimension-reduction hyperparameters on a subsample "
                    "with a surrogate model, then transfer the optimum.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a configured dataset as CSV")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("tune", help="run the pilot + surrogate tuning loop")
    _add_common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("grid", help="run the exhaustive grid-search baseline")
    _add_common(p)
    p.add_argument("--grid-points", type=int, default=None,
                   help="grid points per non-discrete dimension")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("pareto", help="two-objective Pareto front from manifests")
    p.add_argument("--manifest", action="append", default=[],
                   help="tuning/grid manifest (repeat for two histories)")
    p.add_argument("--metrics", default=None, help="metric pair, e.g. auc,avg_ratio")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("sobol", help="sensitivity indices of a refitted surrogate")
    p.add_argument("--manifest", required=True, help="tuning/grid manifest")
    p.add_argument("--n-base", type=int, default=1024,
                   help="Saltelli base sample size (power of two)")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_sobol)

    p = sub.add_parser("embed", help="one engine run at explicit hyperparameters")
    _add_common(p)
    p.add_argument("--normalized", default=None,
                   help="normalized values, e.g. perplexity=0.15")
    p.add_argument("--raw", default=None, help="raw values, e.g. perplexity=9")
    p.add_argument("--subsample", action="store_true",
                   help="embed the configured subsample instead of the full data")
    p.set_defaults(func=cmd_embed)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IngestionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DrTuneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
