"""Acceptance gate.

Criteria 1-6 are self-contained property checks and always run. Criteria
7-11 compare against the released model/score database, which is not
bundled; point PERFPRED_DB at a directory containing ``registry.json`` and
``scores.csv`` (canonical formats, task ids listed in EXPECTED_R2) to
enable them. Each criterion prints a single PASS/FAIL line (visible with
``pytest -s`` or on failure).
"""

import json
import math
import os

import numpy as np
import pytest
from scipy import stats as sps

from conftest import brute_shapley, random_fitted_ensemble
from perfpred.baselines import (
    PowerLawParams,
    ScalePoint,
    eval_power_law,
    fit_power_law,
    target_to_score,
)
from perfpred.gbtree import GBTConfig, fit_gbt, paper_grid
from perfpred.metabias import TaskEffect, estimate_contrast, peese, pet, pet_peese
from perfpred.pipeline import (
    SCALING_FEATURES,
    CVPlan,
    grid_search,
    multi_seed_mae,
    run_cv,
)
from perfpred.prng import CounterRng
from perfpred.registry import (
    all_feature_names,
    encode_features,
    join_scores,
    load_registry,
    load_scores,
)
from perfpred.shapley import shap_dependence, shap_summary
from perfpred.stats import bh_fdr, cohen_kappa, paired_t_test, pearson
from perfpred.shapley import tree_shap
from perfpred.synthdata import GenSpec, synth_dataset


def _verdict(name, ok):
    print(f"{'PASS' if ok else 'FAIL'} {name}")
    assert ok, name


# ---------------------------------------------------------------------------
# criterion 1: tree-boosting oracles


def test_criterion_1_gbt_oracle():
    ok = True
    # 4-point hand derivation (two depth-1 rounds, tie broken to the lower
    # threshold): predictions [-2/9, 10/9, 10/9, 2]
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 1.0, 1.0, 2.0])
    ens = fit_gbt(X, y, GBTConfig(1, 1.0, 2, min_samples_leaf=1))
    preds = ens.predict(X, np.zeros_like(X, dtype=bool))
    ok &= bool(np.allclose(preds, [-2 / 9, 10 / 9, 10 / 9, 2.0], atol=1e-12))

    # planted step functions are reproduced exactly in one round
    Xs = np.arange(10, dtype=float).reshape(-1, 1)
    ys = (Xs[:, 0] >= 5).astype(float)
    stump = fit_gbt(Xs, ys, GBTConfig(1, 1.0, 1, min_samples_leaf=1))
    ok &= bool(np.array_equal(stump.predict(Xs, np.zeros_like(Xs, dtype=bool)), ys))
    Xd = np.arange(9, dtype=float).reshape(-1, 1)
    yd = np.array([0.0] * 3 + [1.0] * 3 + [2.0] * 3)
    two = fit_gbt(Xd, yd, GBTConfig(2, 1.0, 1, min_samples_leaf=1))
    ok &= bool(np.array_equal(two.predict(Xd, np.zeros_like(Xd, dtype=bool)), yd))

    # training MSE monotone over 100 rounds on 20 random datasets
    rng = CounterRng(51)
    for _ in range(20):
        n, p = 30, 4
        Xr = np.array([[rng.normal() for _ in range(p)] for _ in range(n)])
        yr = np.array([rng.normal() for _ in range(n)])
        e = fit_gbt(Xr, yr, GBTConfig(3, 0.1, 100))
        staged = e.staged_predict(Xr, np.zeros_like(Xr, dtype=bool))
        mse = ((staged - yr[:, None]) ** 2).mean(axis=0)
        ok &= bool((np.diff(mse) <= 1e-12).all())
    _verdict("criterion 1: boosting oracle and monotone training error", ok)


# ---------------------------------------------------------------------------
# criterion 2: attribution exactness


def test_criterion_2_shapley_exactness():
    rng = CounterRng(202)
    ok = True
    for trial in range(200):
        p = rng.randint(11) + 2  # 2..12 features
        ens, X = random_fitted_ensemble(rng, p=p, n_rows=20, n_trees=3, depth=3)
        mask = np.isnan(X)
        # local accuracy on every explained row
        for i in range(X.shape[0]):
            phi, base = tree_shap(ens, X[i], mask[i])
            ok &= abs(base + phi.sum() - ens.predict_row(X[i], mask[i])) < 1e-8
        # brute-force coalition comparison on one row per ensemble
        i = rng.randint(X.shape[0])
        phi, base = tree_shap(ens, X[i], mask[i])
        ref, ref_base = brute_shapley(ens, X[i], mask[i])
        ok &= abs(base - ref_base) < 1e-10
        ok &= float(np.abs(phi - ref).max()) < 1e-10
    _verdict("criterion 2: exact Shapley attributions for 200 random ensembles", ok)


# ---------------------------------------------------------------------------
# criterion 3: power-law recovery


def test_criterion_3_power_law_recovery():
    rng = CounterRng(2024)
    ok = True
    for _ in range(20):
        aN, aD = rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5)
        # draw each term's midpoint magnitude so both are identifiable
        Nc = 1e9 * 10.0 ** (rng.uniform(-1, 1) * aD / aN)
        Dc = 1e11 * 10.0 ** rng.uniform(-1, 1)
        true = PowerLawParams(Nc, Dc, aN, aD)
        pts = [ScalePoint(10.0 ** lN, 10.0 ** lD,
                          target_to_score(eval_power_law(true, 10.0 ** lN, 10.0 ** lD),
                                          "higher_better"))
               for lN in np.linspace(7, 11, 6) for lD in np.linspace(9, 13, 6)]
        fit, r2 = fit_power_law(pts, "higher_better")
        rel = max(abs(fit.Nc / true.Nc - 1), abs(fit.Dc / true.Dc - 1),
                  abs(fit.alphaN / true.alphaN - 1), abs(fit.alphaD / true.alphaD - 1))
        ok &= rel < 0.01 and r2 > 0.999
    _verdict("criterion 3: noiseless power-law refits within 1% relative error", ok)


# ---------------------------------------------------------------------------
# criterion 4: statistics oracles


def test_criterion_4_statistics_oracles():
    ok = True
    _, df, p = paired_t_test([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    ok &= df == 2 and abs(p - 0.0742) < 1e-4

    rej, adj = bh_fdr([0.01, 0.02, 0.03, 0.04], q=0.05)
    ok &= rej == [True] * 4 and np.allclose(adj, [0.04] * 4, atol=1e-15)
    rej, adj = bh_fdr([0.03, 0.5], q=0.05)
    ok &= rej == [False, False] and np.allclose(adj, [0.06, 0.5], atol=1e-15)

    ok &= cohen_kappa(list("AABB"), list("ABAB")) == 0.0
    # agreement 2/3 with symmetric marginals: kappa = 1/3 exactly
    k = cohen_kappa(list("AAABBB"), list("AABABB"))
    ok &= abs(k - 1.0 / 3.0) < 1e-12

    rng = CounterRng(4)
    x = [rng.normal() for _ in range(15)]
    y = [rng.normal() for _ in range(15)]
    r0, p0 = pearson(x, y)
    r1, p1 = pearson([2.5 * v + 1.0 for v in x], [0.3 * v - 4.0 for v in y])
    ok &= abs(r1 - r0) < 1e-12 and abs(p1 - p0) < 1e-12
    _verdict("criterion 4: statistics hand oracles", ok)


# ---------------------------------------------------------------------------
# criterion 5: pipeline determinism


def test_criterion_5_pipeline_determinism():
    spec = GenSpec(n_models=92, noise_sigma=0.02, missing_rate=0.2,
                   feature_effects={"pct_code": 0.002})
    ds, _ = synth_dataset(spec, seed=17)
    grid = paper_grid()
    plan = CVPlan()

    def full_run() -> str:
        artifacts = [run_cv(ds, list(SCALING_FEATURES), "gbt",
                            plan.with_seed(s), grid).to_dict()
                     for s in range(5)]
        return json.dumps(artifacts, sort_keys=True)

    first = full_run()
    second = full_run()
    _verdict("criterion 5: byte-identical artifacts across two full runs",
             first.encode() == second.encode())


# ---------------------------------------------------------------------------
# criterion 6: publication-bias estimators


def test_criterion_6_pet_peese():
    ok = True
    ses = [0.02, 0.05, 0.08, 0.12, 0.2]
    line = [TaskEffect(f"t{i}", 0.03 + 1.5 * s, s) for i, s in enumerate(ses)]
    fit = pet(line)
    ok &= abs(fit.intercept - 0.03) < 1e-9 and abs(fit.slope - 1.5) < 1e-9
    parab = [TaskEffect(f"t{i}", 0.04 + 2.0 * s * s, s) for i, s in enumerate(ses)]
    fit = peese(parab)
    ok &= abs(fit.intercept - 0.04) < 1e-9 and abs(fit.slope - 2.0) < 1e-9

    # pure small-study artifact y = 2 * SE: corrected pooled effect ~ 0
    artifact = [TaskEffect(f"a{i}", 2.0 * s, s)
                for i, s in enumerate([0.01, 0.02, 0.04, 0.07, 0.1, 0.15])]
    result = pet_peese(artifact)
    ok &= abs(result.intercept) <= 0.005
    _verdict("criterion 6: PET-PEESE exact lines and artifact nulling", ok)


# ---------------------------------------------------------------------------
# criteria 7-11: require the released database

DB_DIR = os.environ.get("PERFPRED_DB", "")
needs_db = pytest.mark.skipif(
    not DB_DIR, reason="set PERFPRED_DB to a directory with registry.json and scores.csv")

# published per-task power-law fit quality
EXPECTED_R2 = {
    "gsm8k": 0.85,
    "arc_challenge": 0.82,
    "hellaswag": 0.80,
    "winogrande": 0.80,
    "mmlu_5shot": 0.80,
    "mmlu_0shot": 0.74,
    "mathqa": 0.70,
    "anli": 0.61,
    "humaneval": 0.61,
    "lambada": 0.55,
    "logiqa2": 0.50,
    "xnli": 0.41,
    "truthfulqa": 0.29,
}

# published MAE table, already on the raw score scale (accuracy fractions;
# Brier values divided back by 100)
EXPECTED_MAE = {
    "arc_challenge": (0.0436, 0.0367),
    "gsm8k": (0.0604, 0.0510),
    "hellaswag": (0.0393, 0.0318),
    "humaneval": (0.0808, 0.0693),
    "lambada": (0.0951, 0.0685),
    "mmlu_0shot": (0.0476, 0.0410),
    "mmlu_5shot": (0.0397, 0.0354),
    "truthfulqa": (0.0275, 0.0229),
    "winogrande": (0.0339, 0.0309),
    "xnli": (0.0511, 0.0430),
    "anli": (0.0618, 0.0586),
    "mathqa": (0.0283, 0.0275),
    "logiqa2": (0.0474, 0.0460),
}

# published pooled architecture effects (sign only, percentage points / 100)
EXPECTED_BIAS_SIGNS = [
    ("positional_embeddings", "alibi", -1),
    ("positional_embeddings", "learned", +1),
    ("positional_embeddings", "rope", +1),
    ("layer_norm", "nonparametric", -1),
    ("layer_norm", "parametric", -1),
    ("layer_norm", "rmsnorm", +1),
    ("attention_variant", "full", +1),
    ("attention_variant", "gqa", +1),
    ("attention_variant", "local_full", +1),
    ("attention_variant", "mqa", 0),
]


def _load_db():
    registry = load_registry(os.path.join(DB_DIR, "registry.json"))
    scores, tasks = load_scores(os.path.join(DB_DIR, "scores.csv"))
    return registry, scores, tasks


def _db_dataset(task_id):
    registry, scores, tasks = _load_db()
    return join_scores(registry, scores, tasks[task_id])


@needs_db
def test_criterion_7_power_law_r2_table():
    registry, scores, tasks = _load_db()
    got, want = [], []
    hits = 0
    for task_id, expected in EXPECTED_R2.items():
        ds = join_scores(registry, scores, tasks[task_id])
        pts = [ScalePoint(r.arch.total_params, r.data.total_tokens_billions * 1e9,
                          float(v)) for r, v in zip(ds.records, ds.values)]
        _, r2 = fit_power_law(pts, ds.task.polarity)
        got.append(r2)
        want.append(expected)
        hits += abs(r2 - expected) <= 0.08
    rho = sps.spearmanr(got, want).statistic
    _verdict("criterion 7: published power-law fit quality reproduced",
             hits >= 10 and rho >= 0.85)


@needs_db
def test_criterion_8_mae_table():
    registry, scores, tasks = _load_db()
    seeds = list(range(50))
    grid = paper_grid()
    within, better, significant = 0, 0, []
    for task_id, (scaling_ref, allfeat_ref) in EXPECTED_MAE.items():
        ds = join_scores(registry, scores, tasks[task_id])
        scaling = multi_seed_mae(ds, list(SCALING_FEATURES), "gbt", seeds, grid)
        allfeat = multi_seed_mae(ds, all_feature_names(), "gbt", seeds, grid)
        m_s, m_a = float(np.mean(scaling)), float(np.mean(allfeat))
        within += abs(m_s - scaling_ref) <= 0.015 and abs(m_a - allfeat_ref) <= 0.015
        better += m_a < m_s
        significant.append(paired_t_test(scaling, allfeat)[2])
    rejected = sum(a < 0.05 for a in bh_fdr(significant)[1])
    _verdict("criterion 8: published MAE comparison reproduced",
             within >= 13 - 3 and better >= 10 and rejected >= 10)


def _full_fit(ds, seed=0):
    X = encode_features(ds, all_feature_names())
    best = grid_search(X, ds.values, paper_grid(), 3, seed)
    ens = fit_gbt(X.values, ds.values, best, mask=X.missing_mask,
                  column_names=X.column_names)
    return X, ens


@needs_db
def test_criterion_9_code_fraction_directionality():
    def mean_phi_above(task_id, cut=25.0):
        X, ens = _full_fit(_db_dataset(task_id))
        points, _ = shap_dependence(ens, X, "pct_code")
        high = [phi for value, phi in points if value > cut]
        return float(np.mean(high))

    _verdict("criterion 9: code-fraction attribution signs",
             mean_phi_above("humaneval") > 0 and mean_phi_above("lambada") < 0)


@needs_db
def test_criterion_10_scale_features_rank_top_two():
    ok = True
    for task_id in ("arc_challenge", "winogrande", "truthfulqa", "humaneval"):
        X, ens = _full_fit(_db_dataset(task_id))
        entries = shap_summary(ens, X, aggregate_categoricals=True)
        top2 = {e.feature for e in entries[:2]}
        ok &= top2 == set(SCALING_FEATURES)
    _verdict("criterion 10: scale features dominate attribution rankings", ok)


@needs_db
def test_criterion_11_architecture_bias_table():
    registry, scores, tasks = _load_db()
    acc_tasks = [t for t in sorted(tasks)
                 if tasks[t].metric_kind in ("accuracy", "pass_at_1")]
    agreements = 0
    rope_effect = None
    for feature, level, sign in EXPECTED_BIAS_SIGNS:
        effects = []
        for task_id in acc_tasks:
            ds = join_scores(registry, scores, tasks[task_id])
            try:
                effects.append(estimate_contrast(ds, feature, level))
            except ValueError:
                continue
        if len(effects) < 3:
            continue
        result = pet_peese(effects)
        est_sign = 0 if abs(result.intercept) < 0.005 else int(np.sign(result.intercept))
        agreements += est_sign == sign
        if level == "rope":
            rope_effect = result.intercept
    _verdict("criterion 11: pooled architecture effects agree with publication",
             rope_effect is not None and 0.0 <= rope_effect <= 0.04
             and agreements >= 7)
