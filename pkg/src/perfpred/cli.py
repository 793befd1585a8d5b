"""Command-line front end.

Thin compositions of the library operations: every subcommand loads inputs,
calls the corresponding API, and writes markdown/CSV/JSON artifacts. All
randomness flows through recorded seeds, so outputs are byte-identical
across runs with identical inputs and flags.

Exit codes: 0 success, 1 validation/analysis failure, 2 I/O or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile

import numpy as np

from . import baselines, metabias, shapley
from .gbtree import fit_gbt, paper_grid
from .pipeline import (
    SCALING_FEATURES,
    CVPlan,
    greedy_select,
    grid_search,
    multi_seed_mae,
    run_cv,
)
from .registry import (
    ENUM_VOCAB,
    RegistryError,
    all_feature_names,
    encode_features,
    join_scores,
    load_registry,
    load_scores,
    validate_raw_records,
)
from .stats import bh_fdr, mean_ci95, paired_t_test


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cache_key(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str) and os.path.isfile(part):
            with open(part, "rb") as f:
                h.update(f.read())
        else:
            h.update(json.dumps(part, sort_keys=True, default=str).encode())
        h.update(b"\x00")
    return h.hexdigest()[:16]


def _load_inputs(args):
    registry = load_registry(args.registry)
    scores, tasks = load_scores(args.scores)
    return registry, scores, tasks


def _dataset_for(args, registry, scores, tasks):
    if args.task not in tasks:
        raise RegistryError([f"task {args.task!r} not present in scores file"])
    return join_scores(registry, scores, tasks[args.task])


def _features_arg(args, dataset=None):
    if getattr(args, "features", None):
        return [f.strip() for f in args.features.split(",")]
    return all_feature_names()


def _cv_cached(args, dataset, features, kind, seed, grid, plan):
    """Run (or reuse) one CV evaluation, caching JSON in the out directory."""
    key = _cache_key(args.registry, args.scores, args.task, sorted(features), kind, seed,
                     [vars(g) if hasattr(g, "__dict__") else str(g) for g in (grid or [])],
                     plan.outer_folds, plan.inner_folds)
    cache_path = os.path.join(args.out, "cache", f"cv-{key}.json")
    if os.path.isfile(cache_path):
        with open(cache_path) as f:
            return json.load(f)
    result = run_cv(dataset, features, kind, plan.with_seed(seed), grid).to_dict()
    _atomic_write(cache_path, _json_text(result))
    return result


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    violations = []
    try:
        with open(args.registry) as f:
            raw = json.load(f)
        if not isinstance(raw, list):
            violations.append("registry file must be a JSON list of records")
        else:
            _, violations = validate_raw_records(raw)
    except json.JSONDecodeError as e:
        violations = [f"registry parse failure: {e}"]
    try:
        load_scores(args.scores)
    except RegistryError as e:
        violations.extend(e.violations)

    report = {"violations": violations, "ok": not violations}
    if args.out:
        _atomic_write(os.path.join(args.out, "validate.json"), _json_text(report))
    if violations:
        for v in violations:
            print(f"VIOLATION: {v}")
        return 1
    print("ok: no violations")
    return 0


def cmd_encode(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    dataset = _dataset_for(args, registry, scores, tasks)
    X = encode_features(dataset, _features_arg(args))
    lines = ["model_id," + ",".join(
        f"{c.name}[{c.source_group}]" for c in X.columns)]
    for i, mid in enumerate(X.model_ids):
        cells = ["" if X.missing_mask[i, j] else repr(float(X.values[i, j]))
                 for j in range(len(X.columns))]
        lines.append(mid + "," + ",".join(cells))
    _atomic_write(os.path.join(args.out, f"features-{args.task}.csv"), "\n".join(lines) + "\n")
    print(f"wrote {len(X.model_ids)} rows x {len(X.columns)} columns")
    return 0


def cmd_fit_scaling(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    dataset = _dataset_for(args, registry, scores, tasks)
    points = [baselines.ScalePoint(r.arch.total_params, r.data.total_tokens_billions * 1e9,
                                   float(v))
              for r, v in zip(dataset.records, dataset.values)]
    params, r2 = baselines.fit_power_law(points, dataset.task.polarity)
    a, b, c = baselines.fit_log_linear(points)
    out = {
        "task_id": args.task,
        "power_law": {"Nc": params.Nc, "Dc": params.Dc,
                      "alphaN": params.alphaN, "alphaD": params.alphaD,
                      "r_squared": r2},
        "log_linear": {"a": a, "b": b, "c": c},
        "n_models": len(dataset),
    }
    _atomic_write(os.path.join(args.out, f"scaling-{args.task}.json"), _json_text(out))
    print(f"{args.task}: power-law R^2 = {r2:.4f}")
    return 0


def cmd_cv(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    dataset = _dataset_for(args, registry, scores, tasks)
    # baseline predictors ignore the feature matrix; record that honestly
    features = _features_arg(args) if args.kind == "gbt" else []
    plan = CVPlan(seed=args.seed)
    grid = paper_grid() if args.kind == "gbt" else None
    result = _cv_cached(args, dataset, features, args.kind, args.seed, grid, plan)
    path = os.path.join(args.out, f"cv-{args.task}-{args.kind}-{args.seed}.json")
    _atomic_write(path, _json_text(result))
    print(f"{args.task} [{args.kind}] MAE = {result['mae']:.5f}")
    return 0


def cmd_select(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    dataset = _dataset_for(args, registry, scores, tasks)
    if args.candidates:
        candidates = [f.strip() for f in args.candidates.split(",")]
    else:
        candidates = [f for f in all_feature_names() if f not in SCALING_FEATURES]
    seeds = list(range(args.seeds))
    trace = greedy_select(dataset, candidates, CVPlan(seed=args.seed), paper_grid(),
                          seeds, tol=args.tol)
    _atomic_write(os.path.join(args.out, f"select-{args.task}.json"),
                  _json_text(trace.to_dict()))
    print(f"{args.task}: selected {list(trace.final_features)}")
    return 0


def cmd_compare(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    dataset = _dataset_for(args, registry, scores, tasks)
    seeds = list(range(args.seeds))
    plan = CVPlan()
    grid = paper_grid()
    features_all = _features_arg(args)
    scaling = [float(_cv_cached(args, dataset, list(SCALING_FEATURES), "gbt", s, grid, plan)["mae"])
               for s in seeds]
    allfeat = [float(_cv_cached(args, dataset, features_all, "gbt", s, grid, plan)["mae"])
               for s in seeds]
    t, df, p = paired_t_test(scaling, allfeat)
    m1, hw1 = mean_ci95(scaling)
    m2, hw2 = mean_ci95(allfeat)
    out = {
        "task_id": args.task,
        "seeds": seeds,
        "scaling_mae": {"mean": m1, "ci95_halfwidth": hw1, "per_seed": scaling},
        "all_features_mae": {"mean": m2, "ci95_halfwidth": hw2, "per_seed": allfeat},
        "paired_t": {"t": t, "df": df, "p_two_sided": p},
    }
    _atomic_write(os.path.join(args.out, f"compare-{args.task}.json"), _json_text(out))
    print(f"{args.task}: scaling {m1:.5f} vs all-features {m2:.5f} (p = {p:.3g})")
    return 0


def _fit_full(dataset, features, seed):
    X = encode_features(dataset, features)
    best = grid_search(X, dataset.values, paper_grid(), 3, seed)
    return X, fit_gbt(X.values, dataset.values, best, mask=X.missing_mask,
                      column_names=X.column_names)


def cmd_shap(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    dataset = _dataset_for(args, registry, scores, tasks)
    features = _features_arg(args)
    X, ensemble = _fit_full(dataset, features, args.seed)
    sm = shapley.shap_matrix(ensemble, X)
    lines = ["model_id,feature,feature_value,phi"]
    for i, mid in enumerate(sm.model_ids):
        for j, name in enumerate(sm.feature_names):
            value = "" if X.missing_mask[i, j] else repr(float(X.values[i, j]))
            lines.append(f"{mid},{name},{value},{sm.values[i, j]!r}")
    _atomic_write(os.path.join(args.out, f"shap-{args.task}.csv"), "\n".join(lines) + "\n")
    ranking = shapley.shap_summary(ensemble, X, aggregate_categoricals=True)
    rlines = ["feature,mean_abs_phi"] + [f"{e.feature},{e.mean_abs_phi!r}" for e in ranking]
    _atomic_write(os.path.join(args.out, f"shap-ranking-{args.task}.csv"),
                  "\n".join(rlines) + "\n")
    print(f"{args.task}: top features " + ", ".join(e.feature for e in ranking[:3]))
    return 0


def cmd_bias_audit(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    acc_tasks = [t for t in sorted(tasks) if tasks[t].metric_kind in ("accuracy", "pass_at_1")]
    if not acc_tasks:
        print("no accuracy tasks available")
        return 1
    audited = ["positional_embeddings", "layer_norm", "attention_variant"]
    rows = []
    for feature in audited:
        for level in ENUM_VOCAB[feature]:
            effects = []
            for task_id in acc_tasks:
                dataset = join_scores(registry, scores, tasks[task_id])
                try:
                    weights = metabias.precision_weights(dataset)
                    effects.append(metabias.estimate_contrast(dataset, feature, level, weights))
                except ValueError:
                    continue
            if len(effects) < metabias.MIN_TASKS:
                continue
            try:
                result = metabias.pet_peese(effects)
            except ValueError:
                continue
            rows.append((feature, level, result))

    md = ["| Feature | Level | k | Chosen | Effect (pp) [95% CI] | Egger p |",
          "|---|---|---|---|---|---|"]
    payload = []
    for feature, level, r in rows:
        lo, hi = r.ci95
        md.append(f"| {feature} | {level} | {r.k} | {r.method_chosen} | "
                  f"{100 * r.intercept:+.1f} [{100 * lo:+.1f}, {100 * hi:+.1f}] | "
                  f"{r.egger_p:.3f} |")
        payload.append({"feature": feature, "level": level, **r.to_dict(),
                        "weight_policy": "n_items_binomial_or_uniform"})
    _atomic_write(os.path.join(args.out, "bias-audit.md"), "\n".join(md) + "\n")
    _atomic_write(os.path.join(args.out, "bias-audit.json"), _json_text(payload))
    print(f"audited {len(rows)} (feature, level) pairs over {len(acc_tasks)} accuracy tasks")
    return 0


def cmd_report(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    seeds = list(range(args.seeds))
    plan = CVPlan()
    grid = paper_grid()
    features_all = _features_arg(args)
    header = ("| Benchmark | Baseline MAE | Log-Linear MAE | Scaling Laws MAE | "
              "All Features MAE | p-val (corrected) |")
    rows, pvals = [], []
    for task_id in sorted(tasks):
        dataset = join_scores(registry, scores, tasks[task_id])
        scale = 100.0  # accuracy in percent, Brier x100
        try:
            base = run_cv(dataset, [], "median", plan).mae
            loglin = run_cv(dataset, [], "log_linear", plan).mae
            args.task = task_id
            scaling = [float(_cv_cached(args, dataset, list(SCALING_FEATURES), "gbt", s,
                                        grid, plan)["mae"]) for s in seeds]
            allfeat = [float(_cv_cached(args, dataset, features_all, "gbt", s, grid,
                                        plan)["mae"]) for s in seeds]
            _, _, p = paired_t_test(scaling, allfeat)
            m1, hw1 = mean_ci95(scaling)
            m2, hw2 = mean_ci95(allfeat)
            rows.append((task_id, base * scale, loglin * scale,
                         (m1 * scale, hw1 * scale), (m2 * scale, hw2 * scale)))
            pvals.append(p)
        except (ValueError, RegistryError) as e:
            rows.append((task_id, None, str(e), None, None))
            pvals.append(None)

    present = [p for p in pvals if p is not None]
    adjusted_iter = iter(bh_fdr(present)[1] if present else [])
    md = [header, "|---|---|---|---|---|---|"]
    for (task_id, base, loglin, s, a), p in zip(rows, pvals):
        if base is None:
            md.append(f"| {task_id} | unavailable ({loglin}) | | | | |")
            continue
        adj = next(adjusted_iter)
        md.append(f"| {task_id} | {base:.2f} | {loglin:.2f} | "
                  f"{s[0]:.2f} ± {s[1]:.2f} | {a[0]:.2f} ± {a[1]:.2f} | {adj:.3g} |")
    _atomic_write(os.path.join(args.out, "report.md"), "\n".join(md) + "\n")
    print(f"wrote report for {len(rows)} tasks")
    return 0


def cmd_plot_data(args) -> int:
    registry, scores, tasks = _load_inputs(args)
    dataset = _dataset_for(args, registry, scores, tasks)
    if args.kind == "scaling_heatmap":
        points = [baselines.ScalePoint(r.arch.total_params,
                                       r.data.total_tokens_billions * 1e9, float(v))
                  for r, v in zip(dataset.records, dataset.values)]
        params, _ = baselines.fit_power_law(points, dataset.task.polarity)
        ns = np.logspace(np.log10(min(p.N for p in points)),
                         np.log10(max(p.N for p in points)), args.grid)
        ds = np.logspace(np.log10(min(p.D for p in points)),
                         np.log10(max(p.D for p in points)), args.grid)
        lines = ["kind,N,D,value"]
        for n in ns:
            for d in ds:
                s = baselines.predict_power_law_score(params, n, d, dataset.task.polarity)
                lines.append(f"grid,{n!r},{d!r},{s!r}")
        for p in points:
            lines.append(f"model,{p.N!r},{p.D!r},{p.target!r}")
        _atomic_write(os.path.join(args.out, f"heatmap-{args.task}.csv"),
                      "\n".join(lines) + "\n")
    elif args.kind == "shap_beeswarm":
        X, ensemble = _fit_full(dataset, _features_arg(args), args.seed)
        entries = shapley.shap_summary(ensemble, X, aggregate_categoricals=True)
        lines = ["feature,mean_abs_phi,feature_value,phi"]
        for e in entries:
            for value, phi in e.points:
                lines.append(f"{e.feature},{e.mean_abs_phi!r},{value},{phi!r}")
        _atomic_write(os.path.join(args.out, f"beeswarm-{args.task}.csv"),
                      "\n".join(lines) + "\n")
    elif args.kind == "shap_dependence":
        if not args.feature:
            raise RegistryError(["shap_dependence requires --feature"])
        X, ensemble = _fit_full(dataset, _features_arg(args), args.seed)
        points, n_missing = shapley.shap_dependence(ensemble, X, args.feature)
        lines = [f"# missing_rows={n_missing}", "feature_value,phi"]
        lines += [f"{v!r},{phi!r}" for v, phi in points]
        _atomic_write(os.path.join(args.out, f"dependence-{args.task}-{args.feature}.csv"),
                      "\n".join(lines) + "\n")
    else:
        raise RegistryError([f"unknown plot kind {args.kind!r}"])
    print(f"wrote {args.kind} data for {args.task}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfpred",
                                     description="Benchmark performance prediction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, task=True):
        p.add_argument("--registry", required=True)
        p.add_argument("--scores", required=True)
        if task:
            p.add_argument("--task")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--seeds", type=int, default=5)
        p.add_argument("--out", default="out")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("validate", help="check registry and scores files")
    common(p, task=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("encode", help="export the encoded feature matrix")
    common(p)
    p.add_argument("--features")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("fit-scaling", help="fit power-law and log-linear baselines")
    common(p)
    p.set_defaults(func=cmd_fit_scaling)

    p = sub.add_parser("cv", help="cross-validated evaluation of one predictor")
    common(p)
    p.add_argument("--kind", choices=["median", "log_linear", "power_law", "gbt"],
                   default="gbt")
    p.add_argument("--features")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("select", help="greedy forward feature selection")
    common(p)
    p.add_argument("--candidates")
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("compare", help="scaling vs all-features across seeds")
    common(p)
    p.add_argument("--features")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("shap", help="export attribution matrix and ranking")
    common(p)
    p.add_argument("--features")
    p.set_defaults(func=cmd_shap)

    p = sub.add_parser("bias-audit", help="PET-PEESE audit of architecture levels")
    common(p, task=False)
    p.set_defaults(func=cmd_bias_audit)

    p = sub.add_parser("report", help="full MAE comparison table")
    common(p, task=False)
    p.add_argument("--features")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot-data", help="CSV data for heatmap/beeswarm/dependence plots")
    common(p)
    p.add_argument("--kind", required=True,
                   choices=["scaling_heatmap", "shap_beeswarm", "shap_dependence"])
    p.add_argument("--feature")
    p.add_argument("--features")
    p.add_argument("--grid", type=int, default=50)
    p.set_defaults(func=cmd_plot_data)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2
    except RegistryError as e:
        for v in e.violations:
            print(f"VIOLATION: {v}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
