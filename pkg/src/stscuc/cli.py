"""Batch driver: ``stscuc <stage> [options]``.

Stages run in order gen-samples, build-graphs, train-nc, train-ec, predict,
reduce, verify, report.  Each reads the previous stage's artifacts from the
output directory and writes its own atomically.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import data, metrics
from .cases import case_path
from .network import load_case
from .neural import EcModel, ModelConfig, NcModel, TrainConfig, model_from_dict, train
from .neural.training import stack_graphs
from .pipeline import verify_samples
from .reduction import VARIANT_ALIASES, ReductionPlan, Thresholds, make_plan, oracle_plan
from .scuc import FORMULATIONS

log = logging.getLogger("stscuc")

STAGES = ("gen-samples", "build-graphs", "train-nc", "train-ec", "predict", "reduce", "verify",
          "report")
# fields that do not change any artifact's content
UNHASHED = ("jobs", "outdir", "variant", "allow_mixed")

DEFAULTS = {
    "case": "six_bus",
    "formulation": "btheta",
    "horizon": None,
    "samples": 200,
    "perturbation": {"global_amplitude": 0.10, "bus_amplitude": 0.05},
    "split": [0.70, 0.15, 0.15],
    "seed": 0,
    "nc_model": {"gnn": "ecc", "depth": 3, "width": 32, "mlp_hidden": 16, "lstm_hidden": 32,
                 "lstm_output_activation": "tanh"},
    "ec_model": {"gnn": "xenet", "depth": 2, "width": 32},
    "training": {"epochs": 200, "batch_size": 64, "learning_rate": 1e-3, "pos_weight": 1.0},
    "thresholds": {"fix_on": 0.90, "fix_off": 0.10, "warm_boundary": 0.50, "line_active": 0.50},
    "mip_gap": 0.001,
    "time_limit": None,
    "timing_repeats": 1,
    "repair": False,
    "outdir": "run",
    "variant": "vcr",
    "jobs": 1,
    "allow_mixed": False,
}


class ConfigError(ValueError):
    pass


class ArtifactError(RuntimeError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigError(f"unknown config field {k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = {**base[k], **v}
        else:
            out[k] = v
    return out


def validate_config(cfg):
    if cfg["formulation"] not in FORMULATIONS:
        raise ConfigError(f"formulation must be one of {FORMULATIONS}")
    if not isinstance(cfg["samples"], int) or cfg["samples"] < 3:
        raise ConfigError("samples must be an integer >= 3")
    ratios = cfg["split"]
    if len(ratios) != 3 or min(ratios) < 0 or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ConfigError("split must be three non-negative ratios summing to 1")
    if cfg["mip_gap"] < 0:
        raise ConfigError("mip_gap must be non-negative")
    if cfg["time_limit"] is not None and cfg["time_limit"] <= 0:
        raise ConfigError("time_limit must be positive")
    if cfg["horizon"] is not None and cfg["horizon"] < 1:
        raise ConfigError("horizon must be positive")
    if VARIANT_ALIASES.get(cfg["variant"], cfg["variant"]) not in VARIANT_ALIASES.values():
        raise ConfigError("variant must be cr, vr or vcr")
    if cfg["jobs"] < 1 or cfg["timing_repeats"] < 1:
        raise ConfigError("jobs and timing_repeats must be at least 1")
    p = cfg["perturbation"]
    if not 0 <= p["global_amplitude"] < 1 or not 0 <= p["bus_amplitude"] < 1:
        raise ConfigError("perturbation amplitudes must lie in [0, 1)")
    try:
        Thresholds(**cfg["thresholds"])
        ModelConfig(**cfg["nc_model"])
        ModelConfig(**cfg["ec_model"])
        TrainConfig(**cfg["training"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["ec_model"].get("gnn", "xenet") != "xenet":
        raise ConfigError("ec_model.gnn must be 'xenet'")
    if cfg["training"]["batch_size"] < 1 or cfg["training"]["epochs"] < 0:
        raise ConfigError("training batch_size must be >= 1 and epochs >= 0")
    return cfg


def config_hash(cfg):
    kept = {k: v for k, v in cfg.items() if k not in UNHASHED}
    blob = json.dumps(kept, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path=None, overrides=None):
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                cfg = _merge(cfg, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = _merge(cfg, {k: v for k, v in (overrides or {}).items() if v is not None})
    return validate_config(cfg)


# artifact IO

def write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(path, "missing (run the upstream stage first)")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(path, f"corrupt: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != data.FORMAT_VERSION:
        raise ArtifactError(path, "unsupported or missing format version")
    return doc


class Run:
    """Paths and shared state for one output directory."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.out = Path(cfg["outdir"])
        self._network = None
        self.hashes_seen = {}

    def path(self, *parts):
        return self.out.joinpath(*parts)

    @property
    def network(self):
        if self._network is None:
            case = self.cfg["case"]
            path = Path(case)
            if not path.exists():
                path = case_path(case)
                if not Path(str(path)).exists():
                    raise ConfigError(f"case {case!r} is neither a file nor a bundled case")
            net = load_case(path)
            horizon = self.cfg["horizon"]
            if horizon is not None:
                if horizon > net.horizon:
                    raise ConfigError(f"horizon {horizon} exceeds the case's {net.horizon}")
                net = net.with_demand(net.base_demand[:, :horizon])
            self._network = net
        return self._network

    def save(self, path, doc):
        doc = dict(doc, config_hash=self.hash)
        write_json(path, doc)
        log.info("wrote %s", path)

    def load(self, path):
        doc = read_json(path)
        self.hashes_seen[str(path)] = doc.get("config_hash")
        return doc

    def check_hashes(self, allow_mixed):
        distinct = {h for h in self.hashes_seen.values()} | {self.hash}
        if len(distinct) > 1 and not allow_mixed:
            detail = ", ".join(f"{p}={h}" for p, h in sorted(self.hashes_seen.items()))
            raise ArtifactError(self.out, f"inputs come from different configs ({detail}); "
                                          f"current config is {self.hash}; pass --allow-mixed "
                                          f"to proceed")

    # cached loaders
    def samples(self):
        return data.SampleSet.from_dict(self.load(self.path("samples", "samples.json")))

    def split(self):
        return data.DatasetSplit.from_dict(self.load(self.path("graphs", "split.json")))

    def graphs(self, mode):
        name = "graphs_nc.json" if mode == data.NC else "graphs_ec.json"
        return data.graphs_from_dict(self.load(self.path("graphs", name)))


# stages

def stage_gen_samples(run, args):
    cfg = run.cfg
    pert = data.Perturbation(**cfg["perturbation"])
    tl = cfg["time_limit"] if cfg["time_limit"] is not None else math.inf
    samples = data.generate_samples(run.network, cfg["samples"], pert, cfg["seed"],
                                    cfg["formulation"], cfg["mip_gap"], tl, cfg["jobs"])
    log.info("%d samples from %d draws", len(samples), samples.draws)
    run.save(run.path("samples", "samples.json"), samples.to_dict())


def stage_build_graphs(run, args):
    samples = run.samples()
    for mode, name in ((data.NC, "graphs_nc.json"), (data.EC, "graphs_ec.json")):
        graphs = data.build_graphs(samples, run.network, mode)
        run.save(run.path("graphs", name), data.graphs_to_dict(graphs))
    split = data.split_dataset(len(samples), tuple(run.cfg["split"]), run.cfg["seed"])
    run.save(run.path("graphs", "split.json"), split.to_dict())


def _train_stage(run, mode):
    cfg = run.cfg
    graphs = run.graphs(mode)
    split = run.split()
    if mode == data.NC:
        g = graphs[0]
        model = NcModel(g.nf.shape[0], g.edge_index, g.nf.shape[1], g.gen_bus,
                        ModelConfig(**cfg["nc_model"], seed=cfg["seed"]))
        name = "nc"
    else:
        g = graphs[0]
        model = EcModel(g.nf.shape[0], g.edge_index, g.nf.shape[1],
                        ModelConfig(**{"gnn": "xenet", **cfg["ec_model"]}, seed=cfg["seed"]))
        name = "ec"
    model, history = train(model, graphs, split, TrainConfig(**cfg["training"], seed=cfg["seed"]))
    run.save(run.path("models", f"{name}.json"), model.to_dict())
    run.save(run.path("models", f"{name}_history.json"),
             {"format": data.FORMAT_VERSION, "history": history})
    rows = ["epoch,train_loss,train_acc,val_loss,val_acc"] + [
        f"{h['epoch']},{h['train_loss']!r},{h['train_acc']!r},{h['val_loss']!r},{h['val_acc']!r}"
        for h in history]
    write_text(run.path("models", f"{name}_history.csv"), "\n".join(rows) + "\n")


def stage_train_nc(run, args):
    _train_stage(run, data.NC)


def stage_train_ec(run, args):
    _train_stage(run, data.EC)


def stage_predict(run, args):
    split = run.split()
    test = list(split.test)
    if not test:
        raise ArtifactError(run.path("graphs", "split.json"), "empty test partition")
    doc = {"format": data.FORMAT_VERSION, "samples": test}
    for name, mode in (("nc", data.NC), ("ec", data.EC)):
        model_path = run.path("models", f"{name}.json")
        if not model_path.exists():
            log.warning("no %s model; skipping its predictions", name)
            continue
        model = model_from_dict(run.load(model_path))
        graphs = run.graphs(mode)
        chosen = [graphs[i] for i in test]
        nf, ef, truth = stack_graphs(chosen)
        probs = model.predict_proba(nf, ef)
        pred = (probs >= 0.5).astype(int)
        truth = truth.astype(int)
        doc[name] = {
            "accuracy": metrics.accuracy(pred, truth),
            "probs": probs.tolist(),
            "wrong_predictions": metrics.wrong_predictions(pred, truth).tolist(),
        }
    if "nc" not in doc and "ec" not in doc:
        raise ArtifactError(run.path("models"), "no trained model found")
    run.save(run.path("plans", "predictions.json"), doc)


def _plan_name(sample, oracle):
    return f"{'oracle_plan' if oracle else 'plan'}_{sample}.json"


def stage_reduce(run, args):
    th = Thresholds(**run.cfg["thresholds"])
    if args.oracle:
        samples = run.samples()
        test = list(run.split().test)
        for s in test:
            plan = oracle_plan(samples.commitment[s], samples.flows[s], run.network)
            run.save(run.path("plans", _plan_name(s, True)), plan.to_dict())
        return
    pred = run.load(run.path("plans", "predictions.json"))
    for pos, s in enumerate(pred["samples"]):
        nc = np.array(pred["nc"]["probs"][pos]) if "nc" in pred else None
        ec = np.array(pred["ec"]["probs"][pos]) if "ec" in pred else None
        plan = make_plan(nc, ec, th)
        run.save(run.path("plans", _plan_name(s, False)), plan.to_dict())


def _report_name(variant, oracle):
    return f"verification_{variant.lower().replace('-', '')}{'_oracle' if oracle else ''}"


def stage_verify(run, args):
    cfg = run.cfg
    variant = VARIANT_ALIASES[cfg["variant"]] if cfg["variant"] in VARIANT_ALIASES \
        else cfg["variant"]
    samples = run.samples()
    test = list(run.split().test)
    plans = [ReductionPlan.from_dict(run.load(run.path("plans", _plan_name(s, args.oracle))))
             for s in test]
    wrong = [0] * len(test)
    if not args.oracle:
        pred = run.load(run.path("plans", "predictions.json"))
        if "nc" in pred:
            lookup = dict(zip(pred["samples"], pred["nc"]["wrong_predictions"]))
            wrong = [lookup.get(s, 0) for s in test]
    run.check_hashes(cfg["allow_mixed"])
    tl = cfg["time_limit"] if cfg["time_limit"] is not None else math.inf
    results = verify_samples(run.network, [samples.demand[s] for s in test], plans, variant,
                             sample_ids=test, wrong_preds=wrong, jobs=cfg["jobs"],
                             formulation=cfg["formulation"], mip_gap=cfg["mip_gap"],
                             time_limit=tl, repeats=cfg["timing_repeats"],
                             repair=cfg["repair"])
    records = [r for r, _ in results]
    name = _report_name(variant, args.oracle)
    write_text(run.path("reports", f"{name}.csv"), metrics.verification_csv(records))
    run.save(run.path("reports", f"{name}.json"), {
        "format": data.FORMAT_VERSION,
        "variant": variant,
        "oracle": bool(args.oracle),
        "records": [_jsonable(r.row()) for r in records],
        "violations": {str(r.sample): [{"line": v.line, "period": v.period, "flow": v.flow,
                                        "limit": v.limit, "overload": v.overload} for v in viol]
                       for r, viol in results if viol},
        "summary": _jsonable(metrics.summarize(records)),
    })


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    return obj


def _record_from_row(row):
    nan = math.nan
    return metrics.VerificationRecord(
        row["sample"], row["variant"], bool(row["feasible"]), row["base_cost"], row["base_time"],
        nan if row["red_cost"] is None else row["red_cost"], row["red_time"],
        row.get("wrong_preds", 0), row.get("status", ""))


def stage_report(run, args):
    reports = sorted(run.path("reports").glob("verification_*.json")) \
        if run.path("reports").exists() else []
    records, per_file = [], {}
    for path in reports:
        doc = run.load(path)
        label = doc["variant"] + (" oracle" if doc.get("oracle") else "")
        rows = [_record_from_row(r) for r in doc["records"]]
        for r in rows:
            r.variant = label
        records.extend(rows)
        per_file[label] = path.name
    accuracies, histograms = {}, {}
    pred_path = run.path("plans", "predictions.json")
    if pred_path.exists():
        pred = run.load(pred_path)
        for name, title in (("nc", "node classification"), ("ec", "edge classification")):
            if name in pred:
                accuracies[title] = pred[name]["accuracy"]
                hist = metrics.error_histogram(pred[name]["wrong_predictions"])
                histograms[name] = {str(k): v for k, v in hist.items()}
                write_text(run.path("reports", f"histogram_{name}.csv"),
                           metrics.histogram_csv(hist))
    if not records and not accuracies:
        raise ArtifactError(run.path("reports"), "nothing to report (run predict or verify)")
    summary = metrics.summarize(records) if records else {}
    text = metrics.render_summary(summary, accuracies)
    for name, hist in histograms.items():
        text += f"\nWRONG PREDICTIONS PER SAMPLE ({name.upper()})\n"
        text += metrics.render_histogram({int(k): v for k, v in hist.items()})
    write_text(run.path("reports", "summary.txt"), text)
    run.save(run.path("reports", "summary.json"), {
        "format": data.FORMAT_VERSION,
        "accuracy": accuracies,
        "verification": _jsonable(summary),
        "sources": per_file,
        "histograms": histograms,
    })
    sys.stdout.write(text)


HANDLERS = {
    "gen-samples": stage_gen_samples,
    "build-graphs": stage_build_graphs,
    "train-nc": stage_train_nc,
    "train-ec": stage_train_ec,
    "predict": stage_predict,
    "reduce": stage_reduce,
    "verify": stage_verify,
    "report": stage_report,
}


def build_parser():
    p = argparse.ArgumentParser(prog="stscuc", description=__doc__.splitlines()[0])
    p.add_argument("stage", choices=STAGES + ("all",))
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--outdir")
    p.add_argument("--case", help="case JSON path or bundled case name")
    p.add_argument("--samples", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mipgap", type=float, dest="mip_gap")
    p.add_argument("--time-limit", type=float, dest="time_limit")
    p.add_argument("--variant", choices=sorted(VARIANT_ALIASES))
    p.add_argument("--formulation", choices=FORMULATIONS)
    p.add_argument("--oracle", action="store_true",
                   help="reduce/verify with plans built from the true solutions")
    p.add_argument("--repair", action="store_true", default=None,
                   help="reinstate overloaded removed lines and re-solve")
    p.add_argument("--allow-mixed", action="store_true", default=None, dest="allow_mixed")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in ("outdir", "case", "samples", "jobs", "seed",
                                                "mip_gap", "time_limit", "variant",
                                                "formulation", "repair", "allow_mixed")}
    try:
        cfg = load_config(args.config, overrides)
        if args.epochs is not None:
            cfg["training"]["epochs"] = args.epochs
            validate_config(cfg)
        run = Run(cfg)
        run.network  # fail on a bad case before any work
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    stages = STAGES if args.stage == "all" else (args.stage,)
    try:
        for stage in stages:
            log.info("stage %s (config %s)", stage, run.hash)
            HANDLERS[stage](run, args)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
