"""Command-line front door: parse arguments, run pipelines, render output.

Exit codes: 0 success, 2 input/usage error, 3 numerical failure.  Results
go to stdout (JSON by default, aligned table on request); diagnostics go
to stderr.  Every payload echoes the seed and settings that produced it.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .causal import ScreenSettings, discern_structure, rank_interventions
from .dataset import GroupSpec, load_csv, moments, subset_r2_mask
from .errors import InputError, NumericalError
from .forest import ForestParams, dump_forest, fit_forest, forest_oomph, permutation_importance
from .inference import BootstrapPlan, bootstrap_importance
from .oomph import assess_oomph, t_squared, usefulness
from .pmvd import pmvd_exact, proportional_value
from .result import ImportanceResult
from .shapley import johnson_weights, lmg_exact, lmg_sampled

COMMANDS = ("lmg", "pmvd", "propval", "johnson", "usefulness", "forest",
            "oomph", "causal", "rank")

_CLI_TO_METHOD = {"lmg": "lmg", "pmvd": "pmvd", "propval": "proportional_value",
                  "johnson": "johnson"}


@dataclass
class RunConfig:
    """Validated invocation: exactly one command plus its options."""

    command: str
    input_path: str
    response: str
    weight_col: str | None = None
    output: str = "json"
    seed: int = 0
    groups_text: str | None = None
    approx: str = "exact"
    sample_k: int | None = None
    bootstrap: int | None = None
    scheme: str = "pairs"
    interval: str = "percentile"
    level: float = 0.95
    trees: int = 500
    mtry: int | None = None
    min_node_size: int = 5
    dump_model: str | None = None
    method: str = "lmg"
    cutoff: float = 0.15
    corr_threshold: float = 0.3
    ambiguity_threshold: float | None = None
    marginal: str | None = None
    conditional: str | None = None
    rank_from: str | None = None
    exclude: tuple = field(default_factory=tuple)
    n_jobs: int = 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="varimp",
        description="Decompose linear-model R-squared or forest OOB fit "
                    "into per-regressor importance shares.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, bootstrap=True):
        p.add_argument("input", help="CSV file (headered, all numeric)")
        p.add_argument("--response", required=True, help="response column name")
        p.add_argument("--weights", default=None, dest="weight_col",
                       help="observation-weight column name")
        p.add_argument("--output", choices=("json", "table"), default="json")
        p.add_argument("--seed", type=int, default=0)
        if bootstrap:
            p.add_argument("--bootstrap", type=int, default=None, metavar="B",
                           help="bootstrap replicates for confidence intervals")
            p.add_argument("--scheme", choices=("pairs", "residual"), default="pairs")
            p.add_argument("--interval", choices=("percentile", "bca"),
                           default="percentile")
            p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("lmg", help="exact or sampled averaged-order R2 shares")
    common(p)
    p.add_argument("--groups", default=None, dest="groups_text",
                   help="group spec, e.g. \"size=x1,x2;region=x3,x4\"")
    p.add_argument("--approx", default="exact",
                   help="'exact' or 'sample:K' for K sampled orderings")

    for name, help_text in (("pmvd", "data-dependent order-weighted shares"),
                            ("propval", "potential-recursion shares"),
                            ("johnson", "relative-weights approximation")):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--approx", default="exact", help=argparse.SUPPRESS)

    p = sub.add_parser("usefulness", help="deletion R2 loss and t-squared per regressor")
    common(p, bootstrap=False)

    p = sub.add_parser("forest", help="regression-forest OOB permutation importance")
    common(p, bootstrap=False)
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--min-node-size", type=int, default=5, dest="min_node_size")
    p.add_argument("--dump-model", default=None, dest="dump_model",
                   help="write the fitted trees as text to this path")

    p = sub.add_parser("oomph", help="cutoff verdicts on importance proportions")
    common(p)
    p.add_argument("--method", choices=("lmg", "pmvd", "propval", "johnson", "forest"),
                   default="lmg")
    p.add_argument("--cutoff", type=float, default=0.15)
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--min-node-size", type=int, default=5, dest="min_node_size")

    p = sub.add_parser("causal", help="marginal-vs-conditional causal screen")
    common(p, bootstrap=False)
    p.add_argument("--marginal", default="lmg",
                   help="marginal importance: method name or a result JSON file")
    p.add_argument("--conditional", default="pmvd",
                   help="conditional importance: method name or a result JSON file")
    p.add_argument("--cutoff", type=float, default=0.15)
    p.add_argument("--corr-threshold", type=float, default=0.3, dest="corr_threshold")
    p.add_argument("--ambiguity-threshold", type=float, default=None,
                   dest="ambiguity_threshold")
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--min-node-size", type=int, default=5, dest="min_node_size")

    p = sub.add_parser("rank", help="order variables for intervention")
    common(p, bootstrap=False)
    p.add_argument("--method", choices=("lmg", "pmvd", "propval", "johnson", "forest"),
                   default="lmg")
    p.add_argument("--from", default=None, dest="rank_from",
                   help="rank a previously saved result JSON instead of recomputing")
    p.add_argument("--exclude", default="",
                   help="comma-separated variables excluded from intervention")
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--min-node-size", type=int, default=5, dest="min_node_size")

    return parser


def parse_args(argv) -> RunConfig:
    """Parse and validate argv into a RunConfig.

    Usage errors exit with code 2 (argparse); semantic conflicts raise
    InputError for the caller to map to exit 2.
    """
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(command=ns.command, input_path=ns.input, response=ns.response)
    for name in ("weight_col", "output", "seed", "groups_text", "bootstrap",
                 "interval", "level", "trees", "mtry", "min_node_size",
                 "dump_model", "method", "cutoff", "corr_threshold",
                 "ambiguity_threshold", "marginal", "conditional",
                 "rank_from"):
        if hasattr(ns, name):
            setattr(cfg, name, getattr(ns, name))
    if hasattr(ns, "scheme"):
        cfg.scheme = {"pairs": "pairs", "residual": "residual_fixed_design"}[ns.scheme]
    if hasattr(ns, "exclude") and ns.exclude:
        cfg.exclude = tuple(s.strip() for s in ns.exclude.split(",") if s.strip())

    approx = getattr(ns, "approx", "exact")
    if approx != "exact":
        if ns.command != "lmg":
            raise InputError(f"{ns.command} has no sampling mode")
        if not approx.startswith("sample:"):
            raise InputError(f"bad --approx value '{approx}'; use 'exact' or 'sample:K'")
        try:
            k = int(approx.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad --approx value '{approx}'; K must be an integer") from None
        if k < 1:
            raise InputError("sample count K must be at least 1")
        cfg.approx = "sample"
        cfg.sample_k = k
    if cfg.bootstrap is not None and cfg.bootstrap < 2:
        raise InputError("insufficient replicates: --bootstrap needs B >= 2")
    env_jobs = os.environ.get("VARIMP_THREADS")
    if env_jobs:
        try:
            cfg.n_jobs = max(1, int(env_jobs))
        except ValueError:
            raise InputError(f"VARIMP_THREADS must be an integer, got '{env_jobs}'") from None
    return cfg


def parse_group_spec(text, var_names):
    """Parse "label=x1,x2;label2=x3" into a GroupSpec over named regressors."""
    groups = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise InputError(f"malformed group '{chunk}': expected label=var,var")
        label, members = chunk.split("=", 1)
        label = label.strip()
        if not label:
            raise InputError(f"malformed group '{chunk}': empty label")
        idx = []
        for name in members.split(","):
            name = name.strip()
            if name not in var_names:
                raise InputError(f"group '{label}' names unknown regressor '{name}'")
            idx.append(var_names.index(name))
        if not idx:
            raise InputError(f"group '{label}' is empty")
        groups.append((label, tuple(idx)))
    if not groups:
        raise InputError("empty group spec")
    return GroupSpec(tuple(groups))


def _round15(obj):
    """15-significant-digit float normalization, applied recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.15g}")
    if isinstance(obj, (np.floating,)):
        return float(f"{float(obj):.15g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round15(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round15(v) for v in obj]
    return obj


def _variables_block(res: ImportanceResult):
    out = []
    for i, name in enumerate(res.labels):
        entry = {"name": name, "share": float(res.shares[i]),
                 "proportion": float(res.proportions[i])}
        if res.stderr is not None:
            entry["stderr"] = float(res.stderr[i])
        if res.intervals is not None:
            entry["ci"] = [float(res.intervals[i, 0]), float(res.intervals[i, 1])]
        if res.raw_shares is not None:
            entry["raw"] = float(res.raw_shares[i])
        out.append(entry)
    return out


def _result_payload(res: ImportanceResult, cfg: RunConfig, n_obs, fit_key="r_squared"):
    settings = dict(res.settings)
    if res.level is not None:
        settings["level"] = res.level
    payload = {
        "method": res.method,
        "response": cfg.response,
        "n_obs": n_obs,
        fit_key: float(res.total) if fit_key == "r_squared" else settings.pop("oob_r2", res.total),
        "variables": _variables_block(res),
        "seed": cfg.seed,
        "settings": settings,
        "warnings": list(res.warnings),
    }
    return payload


def _linear_importance(cfg: RunConfig, mm, method=None):
    method = method or _CLI_TO_METHOD[cfg.command]
    if method == "lmg":
        if cfg.approx == "sample":
            return lmg_sampled(mm, k=cfg.sample_k, seed=cfg.seed)
        groups = None
        if cfg.groups_text:
            groups = parse_group_spec(cfg.groups_text, list(mm.var_names))
        return lmg_exact(mm, groups=groups)
    if method == "pmvd":
        return pmvd_exact(mm)
    if method == "proportional_value":
        return proportional_value(mm)
    if method == "johnson":
        return johnson_weights(mm)
    raise InputError(f"unknown method '{method}'")


def _bootstrap_or_point(cfg: RunConfig, dataset, method):
    if cfg.bootstrap is None:
        return _linear_importance(cfg, moments(dataset), method=method)
    kwargs = {}
    if method == "lmg":
        if cfg.approx == "sample":
            method = "lmg_sampled"
            kwargs = {"k": cfg.sample_k, "seed": cfg.seed}
        elif cfg.groups_text:
            kwargs = {"groups": parse_group_spec(cfg.groups_text,
                                                 list(dataset.regressor_names))}
    plan = BootstrapPlan(replicates=cfg.bootstrap, scheme=cfg.scheme,
                         interval=cfg.interval, level=cfg.level, seed=cfg.seed,
                         method=method, method_kwargs=kwargs)
    return bootstrap_importance(dataset, plan, n_jobs=cfg.n_jobs)


def _forest_result(cfg: RunConfig, dataset):
    params = ForestParams(n_trees=cfg.trees, mtry=cfg.mtry,
                          min_node_size=cfg.min_node_size, seed=cfg.seed)
    model = fit_forest(dataset, params)
    fi = permutation_importance(model, dataset, seed=cfg.seed)
    if cfg.dump_model:
        with open(cfg.dump_model, "w", encoding="utf-8") as fh:
            dump_forest(model, fh)
    return forest_oomph(fi)


def _load_result_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot open result file '{path}': {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"result file '{path}' is not valid JSON: {exc}") from exc
    try:
        labels = [v["name"] for v in doc["variables"]]
        shares = np.array([v["share"] for v in doc["variables"]], dtype=float)
        total = float(doc.get("r_squared", doc.get("oob_r2", shares.sum())))
        method = doc.get("method", "lmg")
    except (KeyError, TypeError) as exc:
        raise InputError(f"result file '{path}' lacks required fields: {exc}") from exc
    return ImportanceResult(method=method, labels=labels, shares=shares, total=total)


def _importance_by_spec(spec, cfg: RunConfig, dataset):
    """Resolve a --marginal/--conditional value: method name or JSON path."""
    if spec in ("lmg", "pmvd", "propval", "johnson"):
        return _linear_importance(cfg, moments(dataset), method=_CLI_TO_METHOD[spec])
    if spec == "forest":
        return _forest_result(cfg, dataset)
    if spec.endswith(".json") or os.path.exists(spec):
        return _load_result_json(spec)
    raise InputError(f"'{spec}' is neither a known method nor a result file")


def run(cfg: RunConfig):
    """Execute a validated config; returns the process exit code."""
    try:
        payload = _dispatch(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for w in payload.get("warnings", ()):
        print(f"warning: {w}", file=sys.stderr)
    if cfg.output == "json":
        print(json.dumps(_round15(payload), indent=2))
    else:
        _print_table(payload)
    return 0


def _dispatch(cfg: RunConfig):
    dataset = load_csv(cfg.input_path, cfg.response, cfg.weight_col)

    if cfg.command in ("lmg", "pmvd", "propval", "johnson"):
        res = _bootstrap_or_point(cfg, dataset, _CLI_TO_METHOD[cfg.command])
        return _result_payload(res, cfg, dataset.m)

    if cfg.command == "usefulness":
        mm = moments(dataset)
        full = (1 << mm.n) - 1
        r2 = subset_r2_mask(mm, full)
        variables = []
        for j, name in enumerate(mm.var_names):
            u = usefulness(mm, j)
            variables.append({"name": name, "share": u,
                              "proportion": u / r2 if r2 > 0 else 0.0,
                              "t_squared": t_squared(dataset, j)})
        return {"method": "usefulness", "response": cfg.response,
                "n_obs": dataset.m, "r_squared": r2, "variables": variables,
                "seed": cfg.seed,
                "settings": {"note": "deletion losses do not sum to r_squared"},
                "warnings": []}

    if cfg.command == "forest":
        res = _forest_result(cfg, dataset)
        payload = _result_payload(res, cfg, dataset.m, fit_key="oob_r2")
        payload["settings"].update({"trees": cfg.trees, "mtry": cfg.mtry,
                                    "min_node_size": cfg.min_node_size})
        return payload

    if cfg.command == "oomph":
        if cfg.method == "forest":
            res = _forest_result(cfg, dataset)
        else:
            res = _bootstrap_or_point(cfg, dataset, _CLI_TO_METHOD[cfg.method])
        assessment = assess_oomph(res, cutoff=cfg.cutoff)
        variables = []
        for i, name in enumerate(assessment.labels):
            entry = {"name": name, "share": float(res.shares[i]),
                     "proportion": float(assessment.proportions[i]),
                     "verdict": assessment.verdicts[i]}
            if assessment.intervals is not None:
                entry["ci"] = [float(assessment.intervals[i, 0]),
                               float(assessment.intervals[i, 1])]
            variables.append(entry)
        fit_key = "oob_r2" if cfg.method == "forest" else "r_squared"
        return {"method": "oomph", "response": cfg.response, "n_obs": dataset.m,
                fit_key: float(res.total), "variables": variables,
                "seed": cfg.seed,
                "settings": {"underlying_method": res.method, "cutoff": cfg.cutoff},
                "warnings": list(res.warnings)}

    if cfg.command == "causal":
        mm = moments(dataset)
        marginal = _importance_by_spec(cfg.marginal, cfg, dataset)
        conditional = _importance_by_spec(cfg.conditional, cfg, dataset)
        settings = ScreenSettings(importance_cutoff=cfg.cutoff,
                                  corr_threshold=cfg.corr_threshold,
                                  ambiguity_threshold=cfg.ambiguity_threshold)
        report = discern_structure(marginal, conditional, mm, settings)
        return {"method": "causal", "response": cfg.response, "n_obs": dataset.m,
                "assumptions": list(report.assumptions),
                "direct": sorted(report.direct),
                "indirect": sorted(report.indirect),
                "edges": [{"from": e.source, "to": e.target,
                           "correlation": e.correlation, "status": e.status}
                          for e in report.edges],
                "unresolved_pairs": [{"a": a, "b": b, "correlation": rho}
                                     for a, b, rho in report.unresolved_pairs],
                "unclassifiable": sorted(report.unclassifiable),
                "seed": cfg.seed,
                "settings": {"marginal": cfg.marginal, "conditional": cfg.conditional,
                             "importance_cutoff": settings.importance_cutoff,
                             "corr_threshold": settings.corr_threshold,
                             "ambiguity_threshold": settings.ambiguity_threshold},
                "warnings": list(marginal.warnings) + list(conditional.warnings)}

    if cfg.command == "rank":
        if cfg.rank_from:
            res = _load_result_json(cfg.rank_from)
        elif cfg.method == "forest":
            res = _forest_result(cfg, dataset)
        else:
            res = _linear_importance(cfg, moments(dataset), method=_CLI_TO_METHOD[cfg.method])
        ranking = rank_interventions(res, excluded=cfg.exclude)
        return {"method": "rank", "response": cfg.response, "n_obs": dataset.m,
                "ranking": [{"name": lb, "share": s} for lb, s in ranking.ranked],
                "excluded": [{"name": lb, "reason": r} for lb, r in ranking.excluded],
                "note": ranking.note, "seed": cfg.seed,
                "settings": {"method": res.method}, "warnings": list(res.warnings)}

    raise InputError(f"unknown command '{cfg.command}'")


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.15g}"
    return str(x)


def _print_table(payload):
    meta_keys = [k for k in payload if k not in
                 ("variables", "edges", "ranking", "excluded", "unresolved_pairs",
                  "warnings", "settings", "assumptions", "direct", "indirect",
                  "unclassifiable", "note")]
    for k in meta_keys:
        print(f"{k}: {_fmt(payload[k])}")
    if "assumptions" in payload:
        print("assumptions:")
        for a in payload["assumptions"]:
            print(f"  - {a}")
    for key in ("direct", "indirect", "unclassifiable"):
        if key in payload:
            print(f"{key}: {', '.join(payload[key]) if payload[key] else '(none)'}")
    if "variables" in payload:
        _print_rows(payload["variables"])
    if "edges" in payload:
        print("edges:")
        for e in payload["edges"]:
            print(f"  {e['from']} -> {e['to']}  corr={_fmt(e['correlation'])}  {e['status']}")
    if "unresolved_pairs" in payload:
        for u in payload["unresolved_pairs"]:
            print(f"unresolved: {u['a']} ~ {u['b']}  corr={_fmt(u['correlation'])}")
    if "ranking" in payload:
        _print_rows(payload["ranking"])
    if "excluded" in payload and payload["excluded"]:
        for e in payload["excluded"]:
            print(f"excluded: {e['name']} ({e['reason']})")
    if "note" in payload:
        print(f"note: {payload['note']}")


def _print_rows(rows):
    if not rows:
        return
    cols = list(rows[0].keys())
    table = [[_fmt(_round15(r.get(c, ""))) if not isinstance(r.get(c), list)
              else "[" + ", ".join(_fmt(_round15(v)) for v in r[c]) + "]"
              for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in table)) for i, c in enumerate(cols)]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for row in table:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)))


def main(argv=None):
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    code = run(cfg)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
