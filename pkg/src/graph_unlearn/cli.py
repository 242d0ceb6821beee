"""Command-line workbench: data generation and conversion, training,
unlearning, certification, the retraining oracle, evaluation, and the
bound/timing benchmark sweeps. Every command writes a JSON report (and the
bench commands CSV plus SVG) under the configured output directory."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import statistics
import sys
import traceback
from pathlib import Path

import numpy as np

from . import evaluate as eval_mod
from .certify import (
    AssumptionConstants,
    bound_approx,
    bound_optimals,
    certify as make_certificate,
    measure_empirical_constants,
)
from .config import ConfigError, RunConfig, load_config
from .datasets import convert, dataset_stats, load_dataset, save_dataset
from .graph import AttributedGraph, delete
from .influence import unlearn
from .models import Objective, TrainedModel, load_model, save_model, train
from .oracle import parameter_distances, retrain
from .requests import UnlearnRequest, load_request, save_request
from .svg import line_chart
from .synth import SyntheticSpec, gen_synthetic

SCHEMA_VERSION = 1


class CliError(RuntimeError):
    pass


# -- plumbing -------------------------------------------------------------


def _synth_spec(cfg: RunConfig) -> SyntheticSpec:
    return SyntheticSpec(
        num_nodes=cfg.synth_nodes, num_classes=cfg.synth_classes,
        intra_p=cfg.synth_intra, inter_p=cfg.synth_inter,
        feature_dim=cfg.synth_dim, separation=cfg.synth_separation,
        noise=cfg.synth_noise, train_fraction=cfg.synth_train_fraction)


def _build_graph(cfg: RunConfig) -> AttributedGraph:
    if cfg.dataset:
        return load_dataset(cfg.dataset)
    return gen_synthetic(_synth_spec(cfg), cfg.seed_train)


def generate_request(g: AttributedGraph, kind: str, ratio: float, seed: int,
                     attr_dims_ratio: float = 0.5) -> UnlearnRequest:
    """Deterministic request sampler. A fixed seed yields one fixed
    permutation per entity pool, and a ratio selects its prefix, so larger
    ratios produce supersets of smaller ones."""
    rng = np.random.Generator(np.random.PCG64(seed))
    if kind == "node":
        pool = rng.permutation(g.train_nodes())
        count = max(1, int(round(ratio * len(g.train_nodes()))))
        return UnlearnRequest.make(nodes=pool[:count])
    if kind == "edge":
        edges = g.edge_list()
        pool = rng.permutation(len(edges))
        count = max(1, int(round(ratio * len(edges))))
        return UnlearnRequest.make(edges=edges[pool[:count]])
    if kind == "attr_full":
        pool = rng.permutation(g.train_nodes())
        count = max(1, int(round(ratio * len(g.train_nodes()))))
        return UnlearnRequest.make(attrs_full=pool[:count])
    if kind == "attr_partial":
        pool = rng.permutation(g.train_nodes())
        count = max(1, int(round(ratio * len(g.train_nodes()))))
        dims = rng.permutation(g.feature_dim)
        take = max(1, min(g.feature_dim - 1,
                          int(round(attr_dims_ratio * g.feature_dim))))
        chosen = np.sort(dims[:take])
        return UnlearnRequest.make(
            attrs_partial=[(int(v), chosen) for v in pool[:count]])
    raise CliError(f"unknown request kind {kind!r}")


def _build_request(cfg: RunConfig, g: AttributedGraph) -> UnlearnRequest:
    if cfg.request_file:
        return load_request(cfg.request_file)
    return generate_request(g, cfg.request_kind, cfg.request_ratio,
                            cfg.seed_sample, cfg.attr_dims_ratio)


def _constants(cfg: RunConfig) -> AssumptionConstants:
    return AssumptionConstants(
        lipschitz=cfg.lipschitz, strong_convexity=cfg.strong_convexity,
        loss_bound=cfg.loss_bound)


def _objective(cfg: RunConfig, g: AttributedGraph) -> Objective:
    return Objective(g, kind=cfg.model, k=cfg.k, reg_lambda=cfg.reg_lambda,
                     hidden=cfg.hidden)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(cfg: RunConfig, command: str, results: dict,
                  timings: dict | None = None) -> Path:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": cfg.to_dict(),
        "results": results,
        "timings": timings or {},
    }
    path = _out_dir(cfg) / f"{command.replace('-', '_')}_report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _checkpoint_path(cfg: RunConfig, default_name: str) -> Path:
    if cfg.checkpoint:
        return Path(cfg.checkpoint)
    return _out_dir(cfg) / default_name


def _load_model_for(cfg: RunConfig, g: AttributedGraph) -> TrainedModel:
    path = _checkpoint_path(cfg, "model.ckpt")
    if not path.exists():
        raise CliError(f"no trained checkpoint at {path}; run `train` first")
    model, dims = load_model(path)
    if dims["feature_dim"] != g.feature_dim or dims["num_classes"] != g.num_classes:
        raise CliError(f"checkpoint {path} was trained on a different graph "
                       f"shape ({dims})")
    return model


def _train_model(cfg: RunConfig, g: AttributedGraph) -> tuple[TrainedModel, float]:
    obj = _objective(cfg, g)
    model, seconds = eval_mod.timed(
        "train", train, obj, None, cfg.train_tol, cfg.train_max_iters,
        cfg.seed_train)
    return model, seconds


# -- subcommands ----------------------------------------------------------


def cmd_gen_synthetic(cfg: RunConfig) -> dict:
    g = gen_synthetic(_synth_spec(cfg), cfg.seed_train)
    out = _out_dir(cfg) / "dataset"
    save_dataset(g, out)
    results = {"dataset_dir": str(out), "spec": _synth_spec(cfg).to_dict(),
               "stats": dataset_stats(g)}
    _write_report(cfg, "gen-synthetic", results)
    return results


def cmd_convert(args) -> dict:
    manifest = convert(args.edges, args.features, args.out,
                       train_fraction=args.train_fraction,
                       stratified=not args.no_stratify, seed=args.seed)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def cmd_train(cfg: RunConfig) -> dict:
    g = _build_graph(cfg)
    model, seconds = _train_model(cfg, g)
    path = _checkpoint_path(cfg, "model.ckpt")
    save_model(model, path, g.feature_dim, g.num_classes)
    obj = _objective(cfg, g)
    train_ids = g.train_nodes()
    results = {
        "checkpoint": str(path),
        "stats": dataset_stats(g),
        "iterations": model.iterations,
        "grad_norm": model.grad_norm,
        "converged": model.converged,
        "loss": obj.loss(model.theta),
        "f1_test": eval_mod.f1_micro(obj, model.theta),
        "max_per_node_loss": float(
            obj.per_node_losses(model.theta, train_ids).max())
        if len(train_ids) else 0.0,
    }
    _write_report(cfg, "train", results, {"train_seconds": seconds})
    return results


def cmd_unlearn(cfg: RunConfig) -> dict:
    g = _build_graph(cfg)
    model = _load_model_for(cfg, g)
    req = _build_request(cfg, g)
    save_request(req, _out_dir(cfg) / "request.json")
    stoch_scale = cfg.stoch_scale if cfg.stoch_scale > 0 else None
    result, seconds = eval_mod.timed(
        "unlearn", unlearn, model, g, req, cfg.solver, cfg.solver_tol,
        cfg.stoch_iters, stoch_scale, cfg.stoch_damp)
    path = _out_dir(cfg) / "unlearned.ckpt"
    updated = TrainedModel(
        kind=model.kind, theta=result.theta_unlearned, k=model.k,
        reg_lambda=model.reg_lambda, hidden=model.hidden, seed=model.seed,
        iterations=0, grad_norm=0.0, converged=True)
    save_model(updated, path, g.feature_dim, g.num_classes)
    results = {
        "checkpoint": str(path),
        "request": req.to_dict(),
        "diagnostics": result.diagnostics(),
    }
    _write_report(cfg, "unlearn", results, {"unlearn_seconds": seconds})
    return results


def cmd_retrain(cfg: RunConfig) -> dict:
    g = _build_graph(cfg)
    model = _load_model_for(cfg, g)
    req = _build_request(cfg, g)
    (retrained, _), seconds = eval_mod.timed(
        "retrain", retrain, model, g, req, cfg.train_tol, cfg.train_max_iters)
    path = _out_dir(cfg) / "retrained.ckpt"
    save_model(retrained, path, g.feature_dim, g.num_classes)
    results = {
        "checkpoint": str(path),
        "request": req.to_dict(),
        "iterations": retrained.iterations,
        "grad_norm": retrained.grad_norm,
        "converged": retrained.converged,
        "distance_to_original": float(
            np.linalg.norm(retrained.theta - model.theta)),
    }
    _write_report(cfg, "retrain", results, {"retrain_seconds": seconds})
    return results


def _certify_run(cfg: RunConfig, g: AttributedGraph, model: TrainedModel,
                 req: UnlearnRequest):
    """Shared unlearn + bound + noise path.

    Returns (theta_cert, report dict, timings, retrained model or None,
    retained graph or None); the oracle pieces are filled when
    ``cfg.with_oracle`` is set.
    """
    stoch_scale = cfg.stoch_scale if cfg.stoch_scale > 0 else None
    result, unlearn_seconds = eval_mod.timed(
        "unlearn", unlearn, model, g, req, cfg.solver, cfg.solver_tol,
        cfg.stoch_iters, stoch_scale, cfg.stoch_damp)
    timings = {"unlearn_seconds": unlearn_seconds}
    actual = None
    empirical = None
    retrained = None
    g_minus = None
    if cfg.with_oracle:
        (retrained, g_minus), retrain_seconds = eval_mod.timed(
            "retrain", retrain, model, g, req, cfg.train_tol,
            cfg.train_max_iters)
        timings["retrain_seconds"] = retrain_seconds
        dists = parameter_distances(model.theta, retrained.theta,
                                    result.theta_unlearned)
        actual = dists[1]
        obj_orig = _objective(cfg, g)
        obj_ret = Objective(g_minus, kind=cfg.model, k=cfg.k,
                            reg_lambda=cfg.reg_lambda, hidden=cfg.hidden)
        empirical = measure_empirical_constants(
            obj_orig, obj_ret, np.asarray(model.theta),
            np.asarray(retrained.theta), _constants(cfg))
        measured = AssumptionConstants(**empirical["constants"])
        empirical["bound_optimals"] = bound_optimals(
            measured, result.m_used, result.num_deleted_nodes,
            result.reach_size)
        empirical["bound_approx"] = bound_approx(
            measured, result.m_used, result.num_deleted_nodes,
            result.reach_size, result.correction_norm_total)
        empirical["distances"] = {
            "original_retrained": dists[0],
            "retrained_approx": dists[1],
            "original_approx": dists[2],
        }
    sigma = None if cfg.noise_sigma < 0 else cfg.noise_sigma
    theta_cert, cert = make_certificate(
        result, _constants(cfg), epsilon=cfg.epsilon, delta=cfg.delta,
        noise_seed=cfg.seed_noise, sigma=sigma, actual_distance=actual,
        empirical=empirical)
    report = {"certificate": cert.to_dict(),
              "diagnostics": result.diagnostics()}
    return theta_cert, report, timings, retrained, g_minus


def cmd_certify(cfg: RunConfig) -> dict:
    g = _build_graph(cfg)
    model = _load_model_for(cfg, g)
    req = _build_request(cfg, g)
    theta_cert, report, timings, _, _ = _certify_run(cfg, g, model, req)
    path = _out_dir(cfg) / "certified.ckpt"
    certified = TrainedModel(
        kind=model.kind, theta=theta_cert, k=model.k,
        reg_lambda=model.reg_lambda, hidden=model.hidden, seed=model.seed,
        iterations=0, grad_norm=0.0, converged=True)
    save_model(certified, path, g.feature_dim, g.num_classes)
    report["checkpoint"] = str(path)
    report["request"] = req.to_dict()
    _write_report(cfg, "certify", report, timings)
    return report


def cmd_evaluate(cfg: RunConfig) -> dict:
    g = _build_graph(cfg)
    model, train_seconds = _train_model(cfg, g)
    req = _build_request(cfg, g)
    obj = _objective(cfg, g)
    theta_cert, cert_report, timings, retrained, g_minus = _certify_run(
        cfg, g, model, req)
    timings["train_seconds"] = train_seconds
    if retrained is None:
        retrained, g_minus = retrain(model, g, req, cfg.train_tol,
                                     cfg.train_max_iters)
    obj_ret = Objective(g_minus, kind=cfg.model, k=cfg.k,
                        reg_lambda=cfg.reg_lambda, hidden=cfg.hidden)
    results: dict = {
        "request": req.to_dict(),
        "certificate": cert_report["certificate"],
        "f1": {
            "original": eval_mod.f1_micro(obj, model.theta),
            "retrained": eval_mod.f1_micro(obj_ret, retrained.theta),
            "certified": eval_mod.f1_micro(obj_ret, theta_cert),
        },
    }
    if req.has_nodes:
        holdout = eval_mod.sample_holdout(g, len(req.nodes), cfg.seed_sample)
        results["mi_auc"] = {
            "original": eval_mod.mi_proxy_auc(obj, model.theta, req.nodes,
                                              holdout),
            "certified": eval_mod.mi_proxy_auc(obj, theta_cert, req.nodes,
                                               holdout),
        }
    if req.has_edges:
        negatives = eval_mod.sample_negative_edges(g, len(req.edges),
                                                   cfg.seed_sample)
        results["mi_auc_edges"] = {
            "original": eval_mod.mi_proxy_auc_edges(
                obj, model.theta, req.edges, negatives),
            "certified": eval_mod.mi_proxy_auc_edges(
                obj, theta_cert, req.edges, negatives),
        }
    if req.has_full_attrs or req.has_partial_attrs:
        results["attr_unlearn_loss"] = {
            "original": eval_mod.attr_unlearn_loss(obj, g, req, model.theta),
            "certified": eval_mod.attr_unlearn_loss(obj, g, req, theta_cert),
        }
    _write_report(cfg, "evaluate", results, timings)
    return results


def cmd_bench_bounds(cfg: RunConfig) -> dict:
    g = _build_graph(cfg)
    model, _ = _train_model(cfg, g)
    ratios = cfg.ratio_list() or [0.01, 0.02, 0.05]
    sweep_cfg = dataclasses.replace(cfg, noise_sigma=0.0, with_oracle=True)
    rows = []
    for ratio in ratios:
        req = generate_request(g, cfg.request_kind, ratio, cfg.seed_sample,
                               cfg.attr_dims_ratio)
        _, report, _, _, _ = _certify_run(sweep_cfg, g, model, req)
        cert = report["certificate"]
        row = {
            "ratio": ratio,
            "bound_optimals": cert["bound_optimals"],
            "bound_approx": cert["bound_approx"],
            "actual_distance": cert["actual_distance"],
            "reach_size": cert["reach_size"],
            "num_deleted": cert["num_deleted"],
        }
        if cert.get("empirical"):
            emp = cert["empirical"]
            row["bound_approx_measured"] = emp["bound_approx"]
            row["loss_bound_held"] = emp["loss_bound_held"]
            row["lipschitz_held"] = emp["lipschitz_held"]
        rows.append(row)
    out = _out_dir(cfg)
    _write_csv(out / "bench_bounds.csv", rows)
    series = {
        "bound": [(r["ratio"], r["bound_approx"]) for r in rows],
        "actual": [(r["ratio"], r["actual_distance"]) for r in rows
                   if r["actual_distance"] is not None],
    }
    if any("bound_approx_measured" in r for r in rows):
        series["bound (measured)"] = [
            (r["ratio"], r["bound_approx_measured"]) for r in rows
            if "bound_approx_measured" in r]
    line_chart(series, out / "bench_bounds.svg",
               title="Distance bound vs. actual",
               xlabel="unlearn ratio", ylabel="l2 distance", logy=True)
    results = {"rows": rows, "kind": cfg.request_kind,
               "csv": str(out / "bench_bounds.csv"),
               "svg": str(out / "bench_bounds.svg")}
    _write_report(cfg, "bench-bounds", results)
    return results


def cmd_bench_time(cfg: RunConfig) -> dict:
    g = _build_graph(cfg)
    model, _ = _train_model(cfg, g)
    ratios = cfg.ratio_list() or [0.001, 0.01, 0.05, 0.1]
    stoch_scale = cfg.stoch_scale if cfg.stoch_scale > 0 else None
    rows = []
    for ratio in ratios:
        req = generate_request(g, cfg.request_kind, ratio, cfg.seed_sample,
                               cfg.attr_dims_ratio)
        unlearn_times = []
        for _ in range(max(1, cfg.timing_reps)):
            _, sec = eval_mod.timed(
                "unlearn", unlearn, model, g, req, cfg.solver, cfg.solver_tol,
                cfg.stoch_iters, stoch_scale, cfg.stoch_damp)
            unlearn_times.append(sec)
        # the fixed-epoch convention: warm start, run the full epoch budget
        obj_minus = Objective(delete(g, req), kind=cfg.model, k=cfg.k,
                              reg_lambda=cfg.reg_lambda, hidden=cfg.hidden)
        _, fixed_sec = eval_mod.timed(
            "retrain_fixed", train, obj_minus, np.array(model.theta),
            1e-300, cfg.retrain_epochs, cfg.seed_train)
        _, conv_sec = eval_mod.timed(
            "retrain_converged", retrain, model, g, req, cfg.train_tol,
            cfg.train_max_iters)
        rows.append({
            "ratio": ratio,
            "unlearn_seconds_median": statistics.median(unlearn_times),
            "unlearn_seconds_min": min(unlearn_times),
            "unlearn_seconds_max": max(unlearn_times),
            "retrain_fixed_epochs_seconds": fixed_sec,
            "retrain_converged_seconds": conv_sec,
        })
    out = _out_dir(cfg)
    _write_csv(out / "bench_time.csv", rows)
    line_chart(
        {"unlearn": [(r["ratio"], r["unlearn_seconds_median"]) for r in rows],
         "retrain": [(r["ratio"], r["retrain_fixed_epochs_seconds"])
                     for r in rows]},
        out / "bench_time.svg", title="Unlearning vs. retraining time",
        xlabel="unlearn ratio", ylabel="seconds", logy=True)
    results = {"rows": rows, "kind": cfg.request_kind,
               "csv": str(out / "bench_time.csv"),
               "svg": str(out / "bench_time.svg")}
    _write_report(cfg, "bench-time", results)
    return results


# -- argument parsing ------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override any configuration key")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--dataset")
    parser.add_argument("--model", choices=["sgc", "gcn2"])
    parser.add_argument("--solver",
                        choices=["auto", "direct", "cg", "stochastic"])
    parser.add_argument("--request-file", dest="request_file")
    parser.add_argument("--request-kind", dest="request_kind",
                        choices=["node", "edge", "attr_full", "attr_partial"])
    parser.add_argument("--request-ratio", dest="request_ratio", type=float)
    parser.add_argument("--ratios")
    parser.add_argument("--checkpoint")


def _config_from_args(args) -> RunConfig:
    overrides = {}
    for key in ("out_dir", "dataset", "model", "solver", "request_file",
                "request_kind", "request_ratio", "ratios", "checkpoint"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        from .config import _parse_value
        overrides[key.strip()] = _parse_value(key.strip(), raw)
    cfg = load_config(args.config, overrides=overrides)
    if cfg.dataset:
        cfg.synthetic = False
    problems = cfg.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graph-unlearn",
        description="Certified unlearning workbench for graph models")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "unlearn", "retrain", "certify", "evaluate",
                 "bench-bounds", "bench-time", "gen-synthetic"):
        _add_common(sub.add_parser(name))
    conv = sub.add_parser("convert")
    conv.add_argument("--edges", required=True)
    conv.add_argument("--features", required=True)
    conv.add_argument("--out", required=True)
    conv.add_argument("--train-fraction", type=float, default=0.9)
    conv.add_argument("--no-stratify", action="store_true")
    conv.add_argument("--seed", type=int, default=0)
    return parser


_HANDLERS = {
    "train": cmd_train,
    "unlearn": cmd_unlearn,
    "retrain": cmd_retrain,
    "certify": cmd_certify,
    "evaluate": cmd_evaluate,
    "bench-bounds": cmd_bench_bounds,
    "bench-time": cmd_bench_time,
    "gen-synthetic": cmd_gen_synthetic,
}


def _error_json(kind: str, message: str) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION,
                       "error": {"kind": kind, "message": message}},
                      sort_keys=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            cmd_convert(args)
            return 0
        cfg = _config_from_args(args)
        results = _HANDLERS[args.command](cfg)
        print(json.dumps({"schema_version": SCHEMA_VERSION,
                          "command": args.command, "ok": True,
                          "out_dir": cfg.out_dir},
                         sort_keys=True))
        return 0
    except ConfigError as exc:
        print(_error_json("config", str(exc)))
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(_error_json(type(exc).__name__, str(exc)))
        if "--debug" in (argv or sys.argv):
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
