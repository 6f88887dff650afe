"""Deterministic answer matching, run aggregation, and clustered logistic
regression with a cluster-robust sandwich covariance."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class StatsError(Exception):
    pass


class DegenerateFeatureError(StatsError):
    pass


class RankDeficiencyError(StatsError):
    pass


class SeparationError(StatsError):
    pass


# ---------------------------------------------------------------------------
# Answer matching (the mechanical subset of the grading rubric)

_FILLER = re.compile(
    r"^(the answer( to the question)? is|answer\s*:|final answer\s*:|a\s*:)\s*",
    re.I,
)
_REFUSALS = ("i don't know", "i do not know", "unknown", "no information",
             "cannot answer", "can't answer", "unsure", "not sure")
_ID_NAME = re.compile(r"^\s*(?P<id>\S+)\s*\((?P<name>.+)\)\s*$")
_SEPARATORS = re.compile(r"\s*(?:,|;|\n|\band\b)\s*")


def _normalize(text: str) -> str:
    text = text.strip().lower()
    text = _FILLER.sub("", text)
    text = re.sub(r"[\s]+", " ", text)
    return text.strip(" .!?\"'")


def _gold_variants(gold: str, mode: str) -> list[str]:
    """An "id (name)" gold matches if either the id or the name appears."""
    norm = _normalize(gold)
    m = _ID_NAME.match(gold.strip())
    if m and mode in ("exact-set", "entity-id-or-name"):
        return [norm, _normalize(m.group("id")), _normalize(m.group("name"))]
    return [norm]


def _numeric_equal(a: str, b: str) -> bool:
    try:
        return float(a.replace(",", "")) == float(b.replace(",", ""))
    except ValueError:
        return False


def match_answer(predicted: str, gold: list[str], mode: str = "exact-set") -> str:
    """Label a predicted answer: correct, partially_correct, incorrect, refusal.

    Case-insensitive set matching against the gold values; explanatory filler
    is ignored; trailing extra values demote correct to partially_correct."""
    text = _normalize(predicted or "")
    if not text or any(marker in text for marker in _REFUSALS):
        return "refusal"
    matched = []
    for value in gold:
        variants = _gold_variants(value, mode)
        hit = any(v and v in text for v in variants)
        if not hit and mode == "numeric":
            hit = any(_numeric_equal(text, v) for v in variants)
        matched.append(hit)
    if not any(matched):
        return "incorrect"
    if not all(matched):
        return "partially_correct"
    # detect extra answer values when the output is a bare list, not prose
    items = [item for item in _SEPARATORS.split(text) if item]
    if len(items) > 1:
        all_variants = [v for value in gold for v in _gold_variants(value, mode)]
        extras = [item for item in items
                  if not any(v in item or item in v for v in all_variants)]
        if extras:
            return "partially_correct"
    return "correct"


# ---------------------------------------------------------------------------
# Standardization and GEE fitting

def standardize(values) -> list[float]:
    """Z-scores with the population standard deviation."""
    data = np.asarray(values, dtype=float)
    if data.size < 2:
        raise DegenerateFeatureError("standardize needs at least two values")
    sd = data.std()  # population sd
    if sd == 0:
        raise DegenerateFeatureError("constant column cannot be standardized")
    return list((data - data.mean()) / sd)


@dataclass
class GeeFit:
    names: list[str]
    beta: np.ndarray
    cov: np.ndarray  # cluster-robust sandwich covariance
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray
    n_iter: int
    converged: bool
    separation: bool
    n_obs: int
    n_clusters: int

    def coefficient(self, name: str) -> float:
        return float(self.beta[self.names.index(name)])

    def table(self) -> list[dict]:
        return [
            {"name": name,
             "coefficient": float(self.beta[i]),
             "std_err": float(self.se[i]),
             "z": float(self.z[i]),
             "p": float(self.p[i]),
             "stars": "**" if self.p[i] < 0.01 else ("*" if self.p[i] < 0.05 else "")}
            for i, name in enumerate(self.names)
        ]


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def fit_clustered_logit(X, y, clusters, names=None, tol: float = 1e-8,
                        max_iter: int = 100) -> GeeFit:
    """Logistic regression by IRLS under the independence working correlation,
    with covariance from the cluster-robust sandwich estimator."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    clusters = list(clusters)
    n, p = X.shape
    if names is None:
        names = [f"x{i}" for i in range(p)]
    if len(set(clusters)) < 2:
        raise StatsError("need at least two clusters")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficiencyError("design matrix is rank deficient")

    beta = np.zeros(p)
    converged = False
    separation = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1.0 - mu)
        A = X.T @ (X * w[:, None])
        score = X.T @ (y - mu)
        try:
            delta = np.linalg.solve(A, score)
        except np.linalg.LinAlgError:
            separation = True
            break
        beta = beta + delta
        if np.max(np.abs(beta)) > 1e3:
            separation = True
            break
        if np.max(np.abs(delta)) < tol:
            converged = True
            break
    if separation:
        raise SeparationError(
            "divergent coefficients: the outcome is (quasi-)separated"
        )

    eta = X @ beta
    mu = 1.0 / (1.0 + np.exp(-eta))
    w = mu * (1.0 - mu)
    A = X.T @ (X * w[:, None])
    A_inv = np.linalg.inv(A)
    # sum of within-cluster score outer products
    resid = y - mu
    B = np.zeros((p, p))
    by_cluster: dict = {}
    for i, c in enumerate(clusters):
        by_cluster.setdefault(c, []).append(i)
    for idx in by_cluster.values():
        s = X[idx].T @ resid[idx]
        B += np.outer(s, s)
    cov = A_inv @ B @ A_inv
    cov = (cov + cov.T) / 2.0
    se = np.sqrt(np.diag(cov))
    z = np.divide(beta, se, out=np.zeros_like(beta), where=se > 0)
    pvals = np.array([2.0 * _normal_sf(abs(zi)) for zi in z])
    return GeeFit(names=list(names), beta=beta, cov=cov, se=se, z=z, p=pvals,
                  n_iter=it, converged=converged, separation=False,
                  n_obs=n, n_clusters=len(by_cluster))


def model_based_covariance(X, beta) -> np.ndarray:
    """Inverse Fisher information at beta (the non-robust covariance)."""
    X = np.asarray(X, dtype=float)
    mu = 1.0 / (1.0 + np.exp(-(X @ beta)))
    w = mu * (1.0 - mu)
    return np.linalg.inv(X.T @ (X * w[:, None]))


# ---------------------------------------------------------------------------
# Outcome records and design matrices

@dataclass(frozen=True)
class Outcome:
    question_id: str
    trial: int
    planner: str  # sh | fh
    success: int
    depth: int
    breadth: float
    dataset: str = "fixture"
    last_tool: str = ""
    has_bridge: bool = False
    has_comparison: bool = False
    tokens_in: int = 0
    tokens_out: int = 0
    repeated: bool = False
    label: str = ""


def build_design(outcomes: list[Outcome], controls: tuple[str, ...] = ()):
    """Design matrix for the success model: intercept, standardized depth and
    breadth, the SH indicator, depth x SH and breadth x SH interactions, plus
    the requested control dummies (first level is the reference)."""
    d_star = standardize([o.depth for o in outcomes])
    b_star = standardize([o.breadth for o in outcomes])
    x_sh = [1.0 if o.planner == "sh" else 0.0 for o in outcomes]
    columns = [
        ("intercept", [1.0] * len(outcomes)),
        ("depth", d_star),
        ("breadth", b_star),
        ("sh", x_sh),
        ("depth:sh", [d * s for d, s in zip(d_star, x_sh)]),
        ("breadth:sh", [b * s for b, s in zip(b_star, x_sh)]),
    ]
    for control in controls:
        if control in ("dataset", "last_tool"):
            levels = sorted({getattr(o, control) for o in outcomes})
            for level in levels[1:]:  # first level is the reference
                columns.append((
                    f"{control}[{level}]",
                    [1.0 if getattr(o, control) == level else 0.0 for o in outcomes],
                ))
        elif control in ("has_bridge", "has_comparison"):
            columns.append((
                control,
                [1.0 if getattr(o, control) else 0.0 for o in outcomes],
            ))
        else:
            raise StatsError(f"unknown control {control!r}")
    names = [name for name, _ in columns]
    X = np.column_stack([col for _, col in columns])
    y = np.array([o.success for o in outcomes], dtype=float)
    clusters = [o.question_id for o in outcomes]
    return X, y, clusters, names


# ---------------------------------------------------------------------------
# Run summaries

@dataclass
class Report:
    accuracy: dict = field(default_factory=dict)   # (dataset, planner) -> Fraction
    tokens_in: dict = field(default_factory=dict)  # (dataset, planner) -> mean
    tokens_out: dict = field(default_factory=dict)
    repetition: dict = field(default_factory=dict)  # (dataset, planner) -> Fraction
    delta_sh: dict = field(default_factory=dict)    # dataset -> Fraction
    input_ratio: dict = field(default_factory=dict)  # dataset -> sh/fh
    output_ratio: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def num(value):
            return float(value) if value is not None else None

        return {
            "accuracy": {f"{d}/{p}": num(v) for (d, p), v in self.accuracy.items()},
            "tokens_in": {f"{d}/{p}": num(v) for (d, p), v in self.tokens_in.items()},
            "tokens_out": {f"{d}/{p}": num(v) for (d, p), v in self.tokens_out.items()},
            "repetition": {f"{d}/{p}": num(v) for (d, p), v in self.repetition.items()},
            "delta_sh": {d: num(v) for d, v in self.delta_sh.items()},
            "input_ratio": {d: num(v) for d, v in self.input_ratio.items()},
            "output_ratio": {d: num(v) for d, v in self.output_ratio.items()},
        }

    def to_text(self) -> str:
        lines = [f"{'dataset':<16}{'planner':<9}{'accuracy':<10}{'in_tok':<9}"
                 f"{'out_tok':<9}{'repeat':<8}"]
        for (dataset, planner), acc in sorted(self.accuracy.items()):
            lines.append(
                f"{dataset:<16}{planner:<9}{float(acc):<10.3f}"
                f"{float(self.tokens_in[(dataset, planner)]):<9.1f}"
                f"{float(self.tokens_out[(dataset, planner)]):<9.1f}"
                f"{float(self.repetition[(dataset, planner)]):<8.3f}"
            )
        for dataset, delta in sorted(self.delta_sh.items()):
            ratio_in = self.input_ratio.get(dataset)
            ratio_out = self.output_ratio.get(dataset)
            lines.append(
                f"{dataset}: delta_SH={float(delta):+.3f}"
                + (f" input_ratio(SH/FH)={float(ratio_in):.2f}" if ratio_in else "")
                + (f" output_ratio(SH/FH)={float(ratio_out):.2f}" if ratio_out else "")
            )
        return "\n".join(lines)


def summarize_run(outcomes: list[Outcome]) -> Report:
    if not outcomes:
        raise StatsError("no outcome records to summarize")
    report = Report()
    groups: dict = {}
    for o in outcomes:
        groups.setdefault((o.dataset, o.planner), []).append(o)
    for key, group in groups.items():
        n = len(group)
        # exact rational accumulation before any division
        report.accuracy[key] = Fraction(sum(o.success for o in group), n)
        report.tokens_in[key] = Fraction(sum(o.tokens_in for o in group), n)
        report.tokens_out[key] = Fraction(sum(o.tokens_out for o in group), n)
        report.repetition[key] = Fraction(sum(1 for o in group if o.repeated), n)
    datasets = {d for d, _ in groups}
    for dataset in datasets:
        sh, fh = (dataset, "sh"), (dataset, "fh")
        if sh in report.accuracy and fh in report.accuracy:
            report.delta_sh[dataset] = report.accuracy[sh] - report.accuracy[fh]
            if report.tokens_in[fh]:
                report.input_ratio[dataset] = report.tokens_in[sh] / report.tokens_in[fh]
            if report.tokens_out[fh]:
                report.output_ratio[dataset] = report.tokens_out[sh] / report.tokens_out[fh]
    return report
