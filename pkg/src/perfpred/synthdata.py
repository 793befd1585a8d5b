"""Deterministic synthetic registries with known generative parameters.

Used as oracles: the generator returns the true response surface alongside
the registry, so fitting code can be checked against ground truth. Output
is byte-identical for identical (spec, seed) and always passes registry
validation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import PowerLawParams, eval_power_law, target_to_score
from .prng import PRNG_ID, CounterRng
from .registry import (
    ENUM_VOCAB,
    Dataset,
    ModelRecord,
    Registry,
    ScoreRecord,
    TaskSpec,
    feature_value,
    score_range,
    serialize_registry,
    validate_raw_records,
)


@dataclass(frozen=True)
class GenSpec:
    n_models: int = 92
    task_id: str = "synth_task"
    metric_kind: str = "accuracy"
    shots: int = 0
    target: str = "log_linear"  # log_linear | power_law | constant
    log_linear_coefs: tuple[float, float, float] = (0.1, 0.03, 0.02)
    power_law_params: PowerLawParams | None = None
    constant: float = 0.5
    feature_effects: dict[str, float] = field(default_factory=dict)
    level_effects: dict[str, float] = field(default_factory=dict)  # "feature=level" -> shift
    noise_sigma: float = 0.0
    missing_rate: float = 0.0

    def __post_init__(self):
        if self.n_models < 1:
            raise ValueError("n_models must be positive")
        if self.target not in ("log_linear", "power_law", "constant"):
            raise ValueError(f"unknown target kind: {self.target}")
        if self.target == "power_law" and self.power_law_params is None:
            raise ValueError("power_law target requires power_law_params")
        if not (0.0 <= self.missing_rate < 1.0):
            raise ValueError("missing_rate must be in [0, 1)")


def _raw_record(rng: CounterRng, i: int, spec: GenSpec) -> dict:
    log_n = rng.uniform(7.0, 11.0)
    log_tb = rng.uniform(math.log10(50.0), math.log10(3000.0))
    dims = [256, 512, 768, 1024, 2048, 4096, 8192]
    domains = np.array([rng.uniform() for _ in range(5)])
    domains = domains / domains.sum() * rng.uniform(60.0, 100.0)
    arch = {
        "total_params": round(10.0 ** log_n),
        "dimension": dims[rng.randint(len(dims))],
        "num_heads": [8, 12, 16, 32][rng.randint(4)],
        "mlp_ratio": round(rng.uniform(2.0, 4.0), 2),
        "sequence_length": [1024, 2048, 4096][rng.randint(3)],
        "batch_instances": [256, 512, 1024][rng.randint(3)],
    }
    for name, vocab in ENUM_VOCAB.items():
        arch[name] = vocab[rng.randint(len(vocab))]
    data = {
        "total_tokens_billions": round(10.0 ** log_tb, 3),
        "pct_web": round(domains[0], 2),
        "pct_code": round(domains[1], 2),
        "pct_books": round(domains[2], 2),
        "pct_reference": round(domains[3], 2),
        "pct_academic": round(domains[4], 2),
        "pct_english": round(rng.uniform(50.0, 100.0), 2),
    }
    gen = {
        "question_words_ratio": round(rng.uniform(0.0, 2000.0), 2),
        "domain_web_pct_mean": round(rng.uniform(0.0, 100.0), 2),
        "entropy_mean": round(rng.uniform(2.0, 8.0), 3),
        "edu_classifier_mean": round(rng.uniform(0.0, 5.0), 3),
        "edu_classifier_std": round(rng.uniform(0.0, 2.0), 3),
        "pct_english_mean": round(rng.uniform(50.0, 100.0), 2),
    }
    if spec.missing_rate > 0.0:
        for group in (arch, data, gen):
            for key in list(group):
                if key in ("total_params", "total_tokens_billions"):
                    continue
                if rng.uniform() < spec.missing_rate:
                    del group[key]
    return {
        "model_id": f"synth-{i:03d}",
        "organization": "synthetic",
        "arch": arch,
        "data": data,
        "gen": gen,
        "provenance": "generated",
    }


def _true_score(rec: ModelRecord, spec: GenSpec, polarity: str) -> float:
    n = rec.arch.total_params
    d = rec.data.total_tokens_billions * 1e9
    if spec.target == "log_linear":
        a, b, c = spec.log_linear_coefs
        s = a + b * math.log10(n) + c * math.log10(d)
    elif spec.target == "power_law":
        s = target_to_score(eval_power_law(spec.power_law_params, n, d), polarity)
    else:
        s = spec.constant
    for name, coef in spec.feature_effects.items():
        value = feature_value(rec, name)
        if value is not None:
            s += coef * value
    for key, shift in spec.level_effects.items():
        feature, level = key.split("=", 1)
        if feature_value(rec, feature) == level:
            s += shift
    return s


def gen_registry(spec: GenSpec, seed: int):
    """Returns (Registry, scores, TaskSpec, ground_truth).

    ``ground_truth`` maps model_id to the noiseless response and records the
    PRNG identity for replay.
    """
    rng = CounterRng(seed)
    raw = [_raw_record(rng, i, spec) for i in range(spec.n_models)]
    records, violations = validate_raw_records(raw)
    if violations:
        raise AssertionError(f"generator produced invalid records: {violations}")
    registry = Registry(records)
    task = TaskSpec.for_metric(spec.task_id, spec.shots, spec.metric_kind)
    lo, hi = score_range(spec.metric_kind)

    noise_rng = CounterRng(seed, stream=1)
    scores = []
    truth = {"prng": PRNG_ID, "seed": seed, "noiseless": {}}
    for rec in records:
        clean = _true_score(rec, spec, task.polarity)
        truth["noiseless"][rec.model_id] = clean
        value = clean + (spec.noise_sigma * noise_rng.normal() if spec.noise_sigma else 0.0)
        scores.append(ScoreRecord(rec.model_id, spec.task_id, min(hi, max(lo, value))))
    return registry, scores, task, truth


def synth_dataset(spec: GenSpec, seed: int) -> tuple[Dataset, dict]:
    from .registry import join_scores

    registry, scores, task, truth = gen_registry(spec, seed)
    return join_scores(registry, scores, task), truth


def write_registry(registry: Registry, path) -> None:
    with open(path, "w") as f:
        f.write(serialize_registry(registry))


def write_scores(scores: list[ScoreRecord], task: TaskSpec, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["model_id", "task_id", "shots", "metric_kind", "value"])
        for s in scores:
            writer.writerow([s.model_id, s.task_id, task.shots, task.metric_kind,
                             repr(s.value)])
