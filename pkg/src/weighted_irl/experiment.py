"""Config-driven sweeps: generate environments and demos, train, evaluate.

A run directory looks like::

    <output>/config.json
    <output>/envs/seed<k>.json, seed<k>_transfer.json
    <output>/demos/seed<k>.json, seed<k>_test.json
    <output>/models/<algorithm>_seed<k>_n<n>.json   (or .error.json)
    <output>/results.csv, summary.json, figures/*.png
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .envs import (
    EnvBundle,
    HighwaySpec,
    ObjectworldSpec,
    check_env,
    gen_highway,
    gen_objectworld,
    make_expert,
    sample_demos,
)
from .features import FeatureMap
from .mdp import DemoSet
from .metrics import (
    EvalReport,
    expected_value_difference,
    matching_scores,
    mean_stderr,
    model_policy,
    test_loglik,
)
from .train import TrainConfig, TrainedModel, fit_phase2, train_wmaxent
from .wairl import AdversarialState, WairlConfig, policy_from_disc, wairl_train

log = logging.getLogger(__name__)

ALGORITHMS = ("maxent", "wmaxent", "wairl")
WORKERS_ENV = "WIRL_WORKERS"
TRANSFER_SEED_OFFSET = 10_000
DEMO_SEED_OFFSET = 1_000
TEST_SEED_OFFSET = 2_000


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    env: dict[str, Any]
    demo: dict[str, Any]
    algorithms: list[str]
    train: TrainConfig
    wairl: WairlConfig
    n_seeds: int = 8
    transfer: bool = True
    record_wall_time: bool = False
    figures: bool = True
    weight_features: Any = "same"
    base_seed: int = 0
    output: str = "runs/default"
    name: str = "experiment"
    raw: dict[str, Any] = field(default_factory=dict)

    @property
    def sample_sizes(self) -> list[int]:
        return list(self.demo["sample_sizes"])

    def cells(self) -> list[tuple[str, int, int]]:
        return [
            (alg, k, n)
            for alg in self.algorithms
            for k in range(self.n_seeds)
            for n in self.sample_sizes
        ]


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"config is missing required key '{where}{key}'")
    return d[key]


def parse_config(raw: dict[str, Any]) -> ExperimentConfig:
    """Validate a config dictionary; errors name the offending key."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    env = dict(_require(raw, "env", ""))
    kind = _require(env, "kind", "env.")
    if kind not in ("objectworld", "highway"):
        raise ConfigError(f"env.kind must be 'objectworld' or 'highway', got {kind!r}")
    demo = dict(_require(raw, "demo", ""))
    sizes = _require(demo, "sample_sizes", "demo.")
    if not sizes or any(int(n) < 1 for n in sizes):
        raise ConfigError("demo.sample_sizes must be a nonempty list of positive counts")
    demo.setdefault("horizon", 8 if kind == "objectworld" else 32)
    demo.setdefault("expert_temp", 1.0)
    demo.setdefault("n_test", max(sizes))
    algorithms = list(raw.get("algorithms", ["maxent", "wmaxent"]))
    bad = [a for a in algorithms if a not in ALGORITHMS]
    if not algorithms or bad:
        raise ConfigError(f"algorithms must be a nonempty subset of {ALGORITHMS}, got {bad}")
    ev = dict(raw.get("eval", {}))
    try:
        train = TrainConfig.from_dict(raw.get("train", {}))
        wairl = WairlConfig.from_dict(raw.get("wairl", {}))
        _env_spec(env)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(
        env=env,
        demo=demo,
        algorithms=algorithms,
        train=train,
        wairl=wairl,
        n_seeds=int(ev.get("n_seeds", 8)),
        transfer=bool(ev.get("transfer", True)),
        record_wall_time=bool(ev.get("record_wall_time", False)),
        figures=bool(ev.get("figures", True)),
        weight_features=raw.get("weight_features", "same"),
        base_seed=int(raw.get("seed", 0)),
        output=str(raw.get("output", "runs/default")),
        name=str(raw.get("name", "experiment")),
        raw=raw,
    )


def load_config(path: str | os.PathLike, output: str | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if output is not None:
        raw["output"] = output
    return parse_config(raw)


def _env_spec(env: dict[str, Any]):
    params = {k: v for k, v in env.items() if k != "kind"}
    if env["kind"] == "objectworld":
        return ObjectworldSpec(**params)
    if "speeds" in params:
        params["speeds"] = tuple(params["speeds"])
    return HighwaySpec(**params)


def generate_env(cfg: ExperimentConfig, seed: int) -> EnvBundle:
    spec = _env_spec(cfg.env)
    gen = gen_objectworld if cfg.env["kind"] == "objectworld" else gen_highway
    return check_env(gen(spec, seed))


def weight_features_for(cfg: ExperimentConfig, features: FeatureMap) -> FeatureMap:
    choice = cfg.weight_features
    if choice == "same":
        return features
    if choice == "bias":
        return FeatureMap(np.ones((features.n_states, 1)), ("bias",), "discrete")
    if isinstance(choice, list):
        return features.select(choice)
    raise ConfigError(f"weight_features must be 'same', 'bias' or a column list, got {choice!r}")


def write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")))
    tmp.replace(path)


def read_json(path: Path) -> Any:
    return json.loads(path.read_text())


class Layout:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def env(self, k, transfer=False):
        return self.root / "envs" / f"seed{k}{'_transfer' if transfer else ''}.json"

    def demos(self, k, test=False):
        return self.root / "demos" / f"seed{k}{'_test' if test else ''}.json"

    def model(self, alg, k, n):
        return self.root / "models" / f"{alg}_seed{k}_n{n}.json"

    def error(self, alg, k, n):
        return self.root / "models" / f"{alg}_seed{k}_n{n}.error.json"


def cmd_gen(cfg: ExperimentConfig) -> list[Path]:
    """Write environment, transfer environment and demo files for every seed."""
    lay = Layout(cfg.output)
    write_json(lay.root / "config.json", cfg.raw)
    written = []
    n_train = max(cfg.sample_sizes)
    for k in range(cfg.n_seeds):
        seed = cfg.base_seed + k
        env = generate_env(cfg, seed)
        expert = make_expert(env.mdp, env.true_reward, cfg.demo["expert_temp"])
        meta = {"expert_temp": cfg.demo["expert_temp"], "env_seed": seed}
        train = sample_demos(
            env.mdp, expert, n_train, cfg.demo["horizon"], seed + DEMO_SEED_OFFSET, meta
        )
        test = sample_demos(
            env.mdp, expert, cfg.demo["n_test"], cfg.demo["horizon"], seed + TEST_SEED_OFFSET, meta
        )
        items = [(lay.env(k), env), (lay.demos(k), train), (lay.demos(k, test=True), test)]
        if cfg.transfer:
            items.append((lay.env(k, transfer=True), generate_env(cfg, seed + TRANSFER_SEED_OFFSET)))
        for path, obj in items:
            write_json(path, obj.to_dict())
            written.append(path)
    return written


def _train_cell(args) -> tuple[str, int, int, str | None]:
    cfg, alg, k, n = args
    lay = Layout(cfg.output)
    out, err = lay.model(alg, k, n), lay.error(alg, k, n)
    if out.exists():
        return alg, k, n, None
    try:
        env = EnvBundle.from_dict(read_json(lay.env(k)))
        demos = DemoSet.from_dict(read_json(lay.demos(k))).subset(n)
        wf = weight_features_for(cfg, env.features)
        t0 = time.perf_counter()
        if alg == "wairl":
            state = wairl_train(env.mdp, demos, cfg.wairl, wf)
            payload = {"algorithm": alg, "state": state.to_dict(wf, env.mdp)}
        else:
            phase1 = lay.model("maxent", k, n)
            if alg == "wmaxent" and phase1.exists():
                base = TrainedModel.from_dict(read_json(phase1)["model"])
                model = fit_phase2(demos, env.mdp, env.features, base.theta, cfg.train, wf)
                model = _with_phase1(model, base)
            else:
                model = train_wmaxent(
                    demos, env.mdp, env.features, cfg.train, wf, maxent_only=(alg == "maxent")
                )
            payload = {"algorithm": alg, "model": model.to_dict()}
        if cfg.record_wall_time:
            payload["wall_seconds"] = time.perf_counter() - t0
        write_json(out, payload)
        if err.exists():
            err.unlink()
        return alg, k, n, None
    except Exception as exc:  # one failing cell must not abort the sweep
        msg = f"{type(exc).__name__}: {exc}"
        write_json(err, {"error": msg, "traceback": traceback.format_exc()})
        return alg, k, n, msg


def _with_phase1(model: TrainedModel, base: TrainedModel) -> TrainedModel:
    d = model.to_dict()
    d["phase1_loglik"] = base.phase1_loglik
    d["iterations"]["phase1"] = base.iterations["phase1"]
    d["curves"]["phase1"] = base.curves.get("phase1", [])
    d["converged"]["phase1"] = base.converged.get("phase1", True)
    return TrainedModel.from_dict(d)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def cmd_train(cfg: ExperimentConfig) -> list[tuple[str, int, int, str]]:
    """Train every (algorithm, seed, n_demos) cell; returns the failed cells.

    MaxEnt cells run first so W-MaxEnt can warm-start Phase 2 from them.
    Cells whose model file already exists are skipped.
    """
    cells = cfg.cells()
    first = [c for c in cells if c[0] == "maxent"]
    rest = [c for c in cells if c[0] != "maxent"]
    failures = []
    workers = _workers()
    for batch in (first, rest):
        jobs = [(cfg,) + c for c in batch]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_train_cell, jobs))
        else:
            results = [_train_cell(j) for j in jobs]
        failures += [r for r in results if r[3] is not None]
    for alg, k, n, msg in failures:
        log.warning("cell %s seed=%d n=%d failed: %s", alg, k, n, msg)
    return failures


def _eval_cell(cfg: ExperimentConfig, alg: str, k: int, n: int) -> EvalReport:
    lay = Layout(cfg.output)
    env = EnvBundle.from_dict(read_json(lay.env(k)))
    test = DemoSet.from_dict(read_json(lay.demos(k, test=True)))
    payload = read_json(lay.model(alg, k, n))
    wf = weight_features_for(cfg, env.features)
    fresh = EnvBundle.from_dict(read_json(lay.env(k, transfer=True))) if cfg.transfer else None
    if alg == "wairl":
        state = AdversarialState.from_dict(payload["state"])
        policy = state.policy
        s, a = test.pairs()
        tll = float(np.sum(np.log(policy[s, a])))
        transfer = None
        if fresh is not None:
            fresh_wf = weight_features_for(cfg, fresh.features)
            transfer = expected_value_difference(
                fresh, policy_from_disc(state.disc, fresh.mdp, fresh_wf)
            )
        train_ll = None
    else:
        model = TrainedModel.from_dict(payload["model"])
        policy = model_policy(model, env.mdp, env.features, wf)
        tll = test_loglik(test, model, env.mdp, env.features, wf)
        transfer = None
        if fresh is not None:
            fresh_wf = weight_features_for(cfg, fresh.features)
            transfer = expected_value_difference(
                fresh, model_policy(model, fresh.mdp, fresh.features, fresh_wf)
            )
        train_ll = model.loglik
    avg, p90 = matching_scores(test, policy, env.mdp)
    return EvalReport(
        algorithm=alg,
        env=cfg.env["kind"],
        feature_mode=env.features.mode,
        n_demos=n,
        seed=k,
        evd=expected_value_difference(env, policy),
        transfer_evd=transfer,
        test_loglik=tll,
        avg_matching=avg,
        p90_matching=p90,
        wall_seconds=payload.get("wall_seconds", 0.0),
        train_loglik=train_ll,
    )


RESULT_COLUMNS = EvalReport.CSV_COLUMNS + ("train_loglik", "status")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_eval(cfg: ExperimentConfig) -> tuple[list[dict[str, Any]], list[str]]:
    """Evaluate every cell; write ``results.csv``, ``summary.json`` and figures.

    Returns the result rows and a list of missing or failed cells.
    """
    lay = Layout(cfg.output)
    rows, problems = [], []
    for alg, k, n in cfg.cells():
        base = {c: None for c in RESULT_COLUMNS}
        base.update(algorithm=alg, env=cfg.env["kind"], n_demos=n, seed=k)
        if not lay.model(alg, k, n).exists():
            reason = "missing model file"
            if lay.error(alg, k, n).exists():
                reason = read_json(lay.error(alg, k, n))["error"]
            problems.append(f"{alg} seed={k} n={n}: {reason}")
            base["status"] = f"error: {reason}"
            rows.append(base)
            continue
        try:
            rep = _eval_cell(cfg, alg, k, n)
        except Exception as exc:
            problems.append(f"{alg} seed={k} n={n}: {exc}")
            base["status"] = f"error: {type(exc).__name__}: {exc}"
            rows.append(base)
            continue
        row = rep.csv_row()
        row["train_loglik"] = rep.train_loglik
        row["wall_seconds"] = rep.wall_seconds if cfg.record_wall_time else None
        row["status"] = "ok"
        rows.append(row)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    lay.root.mkdir(parents=True, exist_ok=True)
    (lay.root / "results.csv").write_text(buf.getvalue())
    summary = summarize(rows)
    write_json(lay.root / "summary.json", summary)
    if cfg.figures:
        from .plotting import plot_summary

        plot_summary(summary, lay.root / "figures", title=cfg.name)
    return rows, problems


SUMMARY_METRICS = ("evd", "transfer_evd", "test_loglik", "avg_matching", "p90_matching", "train_loglik")


def summarize(rows: list[dict[str, Any]]) -> dict[str, Any]:
    """Mean and standard error per (algorithm, n_demos) over successful seeds."""
    groups: dict[tuple[str, int], list[dict[str, Any]]] = {}
    for row in rows:
        if row.get("status") == "ok":
            groups.setdefault((row["algorithm"], int(row["n_demos"])), []).append(row)
    cells = []
    for (alg, n), members in sorted(groups.items()):
        entry = {"algorithm": alg, "n_demos": n, "n_seeds": len(members)}
        for m in SUMMARY_METRICS:
            vals = [r[m] for r in members if r.get(m) not in (None, "")]
            mean, se = mean_stderr([float(v) for v in vals])
            entry[m] = {"mean": mean, "stderr": se, "n": len(vals)} if vals else None
        cells.append(entry)
    return {"cells": cells}


def read_results(path: str | os.PathLike) -> list[dict[str, Any]]:
    """Parse ``results.csv`` back into typed rows."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            typed: dict[str, Any] = {}
            for k, v in row.items():
                if k in ("algorithm", "env", "feature_mode", "status"):
                    typed[k] = v
                elif k in ("n_demos", "seed"):
                    typed[k] = int(v)
                else:
                    typed[k] = float(v) if v != "" else None
            out.append(typed)
    return out


def cmd_all(cfg: ExperimentConfig) -> int:
    """gen + train + eval; returns the process exit code (0 ok, 2 partial failure)."""
    cmd_gen(cfg)
    failures = cmd_train(cfg)
    _, problems = cmd_eval(cfg)
    return 2 if failures or problems else 0
