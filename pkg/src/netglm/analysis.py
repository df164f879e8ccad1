"""Applied-analysis toolkit: dataset assembly, selection, validation, descriptives.

Covers the workflow used on grouped network-linked survey data: average two
observation waves, restrict each group to its largest connected component,
append group dummies, backward-eliminate covariates by Bonferroni-adjusted
Wald p-values (the network block is tested, never dropped), validate by
many-fold cross-validated AUC, and describe the fitted network effect via
assortativity, centralities, and a per-group effect-strength ratio.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.stats import rankdata

from .errors import (
    DataError,
    DomainError,
    NumericalError,
    UndefinedAssortativityError,
)
from .estimator import FittedModel, fit_network_glm
from .families import GlmFamily
from .inference import coef_test, network_effect_test_fit
from .rng import as_generator
from .subspace import ADJACENCY_LEADING


@dataclass(frozen=True)
class NetworkDataset:
    """Grouped network-linked observations.

    ``edges`` holds 0-based positions into ``node_ids`` (undirected, no
    self-loops); ``weights`` is parallel to ``edges`` or None for a plain
    graph. Covariate rows align with ``node_ids``.
    """

    node_ids: np.ndarray
    edges: np.ndarray
    covariates: np.ndarray
    columns: list
    response: np.ndarray
    group: np.ndarray
    weights: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        if self.edges.size:
            w = self.weights if self.weights is not None else np.ones(len(self.edges))
            A[self.edges[:, 0], self.edges[:, 1]] = w
            A[self.edges[:, 1], self.edges[:, 0]] = w
        return A

    def validate(self) -> "NetworkDataset":
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise DataError("edge endpoints reference unknown node positions")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise DataError("self-loops are not allowed after ingestion")
        if not np.all(np.isfinite(self.covariates)):
            raise DataError("covariates contain missing values after listwise deletion")
        return self


@dataclass(frozen=True)
class FitConfig:
    """How to fit the subspace model on a dataset."""

    family: GlmFamily
    K: int
    r: int | str = "auto"
    mode: str = ADJACENCY_LEADING
    tol: float = 1e-8
    max_iter: int = 100


def _matrix_to_edges(A: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    iu, ju = np.nonzero(np.triu(A, k=1))
    edges = np.column_stack([iu, ju]).astype(int)
    w = A[iu, ju]
    weights = None if np.all(w == 1.0) else w
    return edges, weights


def _binary_graph(dataset: NetworkDataset) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(dataset.n))
    g.add_edges_from(map(tuple, dataset.edges))
    return g


def prepare(
    raw: NetworkDataset,
    second_wave_edges: np.ndarray | None = None,
    average_waves: bool = False,
    per_group_lcc: bool = False,
    dummy_groups: bool = False,
) -> tuple[NetworkDataset, np.ndarray, list]:
    """Assemble the analysis dataset and its design matrix.

    Returns ``(dataset, design, design_columns)`` where the design holds the
    numeric covariates plus group dummies (reference level dropped) when
    requested. Groups whose induced subgraph is empty are dropped with a
    warning; within a group, ties between equally-large components go to the
    one containing the smallest node id.
    """
    raw.validate()
    dataset = raw
    if average_waves:
        if second_wave_edges is None:
            raise DataError("wave averaging requires a second edge set")
        A1 = dataset.adjacency()
        A2 = np.zeros_like(A1)
        second = np.asarray(second_wave_edges, dtype=int)
        if second.size:
            if second.min() < 0 or second.max() >= dataset.n:
                raise DataError("second-wave edges reference unknown node positions")
            A2[second[:, 0], second[:, 1]] = 1.0
            A2[second[:, 1], second[:, 0]] = 1.0
        edges, weights = _matrix_to_edges(0.5 * (A1 + A2))
        dataset = replace(dataset, edges=edges, weights=weights)

    if per_group_lcc:
        keep: list[int] = []
        graph = _binary_graph(dataset)
        for label in sorted(set(dataset.group.tolist())):
            members = np.nonzero(dataset.group == label)[0]
            if members.size == 0:
                warnings.warn(f"group {label!r} is empty and was dropped", RuntimeWarning)
                continue
            sub = graph.subgraph(members.tolist())
            comps = list(nx.connected_components(sub))
            if not comps:
                warnings.warn(f"group {label!r} has no nodes and was dropped", RuntimeWarning)
                continue
            best = min(
                comps,
                key=lambda c: (-len(c), min(dataset.node_ids[sorted(c)].tolist())),
            )
            keep.extend(sorted(best))
        keep_arr = np.array(sorted(keep), dtype=int)
        pos = {old: new for new, old in enumerate(keep_arr.tolist())}
        mask = np.isin(dataset.edges[:, 0], keep_arr) & np.isin(dataset.edges[:, 1], keep_arr)
        edges = np.array(
            [[pos[a], pos[b]] for a, b in dataset.edges[mask]], dtype=int
        ).reshape(-1, 2)
        weights = dataset.weights[mask] if dataset.weights is not None else None
        dataset = NetworkDataset(
            node_ids=dataset.node_ids[keep_arr],
            edges=edges,
            covariates=dataset.covariates[keep_arr],
            columns=list(dataset.columns),
            response=dataset.response[keep_arr],
            group=dataset.group[keep_arr],
            weights=weights,
        )

    design = np.asarray(dataset.covariates, dtype=float)
    design_columns = list(dataset.columns)
    if dummy_groups:
        levels = sorted(set(dataset.group.tolist()))
        for label in levels[1:]:
            design = np.column_stack([design, (dataset.group == label).astype(float)])
            design_columns.append(f"group[{label}]")
    return dataset, design, design_columns


# -- assortativity ---------------------------------------------------------


@dataclass(frozen=True)
class AssortativityResult:
    r: float
    se: float


def _mixing_r(counts: np.ndarray) -> float:
    total = counts.sum()
    e = counts / total
    a = e.sum(axis=1)
    ab = float(a @ a)
    if abs(1.0 - ab) < 1e-12:
        raise UndefinedAssortativityError(
            "assortativity undefined: all edge endpoints share one attribute level"
        )
    return float((np.trace(e) - ab) / (1.0 - ab))


def assortativity(edges: np.ndarray, attr: np.ndarray) -> AssortativityResult:
    """Categorical assortativity with a leave-one-edge-out jackknife SE.

    r = (sum_i e_ii - sum_i a_i b_i) / (1 - sum_i a_i b_i) on the symmetric
    edge-mixing matrix; the SE is the square root of the plain sum of squared
    leave-one-out deviations.
    """
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    if edges.shape[0] == 0:
        raise DataError("assortativity requires at least one edge")
    attr = np.asarray(attr)
    t1 = attr[edges[:, 0]]
    t2 = attr[edges[:, 1]]
    levels = sorted(set(t1.tolist()) | set(t2.tolist()))
    if len(levels) < 2:
        raise UndefinedAssortativityError(
            "assortativity undefined: fewer than two attribute levels among endpoints"
        )
    index = {lv: k for k, lv in enumerate(levels)}
    L = len(levels)
    counts = np.zeros((L, L))
    pair_counts: dict[tuple[int, int], int] = {}
    for a_lab, b_lab in zip(t1.tolist(), t2.tolist()):
        a, b = index[a_lab], index[b_lab]
        counts[a, b] += 1.0
        counts[b, a] += 1.0
        key = (min(a, b), max(a, b))
        pair_counts[key] = pair_counts.get(key, 0) + 1

    r = _mixing_r(counts)
    # edges with the same endpoint-type pair give identical leave-one-out values
    ss = 0.0
    for (a, b), m in pair_counts.items():
        reduced = counts.copy()
        reduced[a, b] -= 1.0
        reduced[b, a] -= 1.0
        if reduced.sum() <= 0:
            continue
        try:
            r_i = _mixing_r(reduced)
        except UndefinedAssortativityError:
            continue
        ss += m * (r_i - r) ** 2
    return AssortativityResult(r=r, se=float(np.sqrt(ss)))


# -- backward elimination ---------------------------------------------------


@dataclass(frozen=True)
class EliminationStep:
    dropped: str
    p_value: float
    p_adjusted: float
    candidates: int


@dataclass(frozen=True)
class EliminationResult:
    columns: list
    design: np.ndarray
    fit: FittedModel
    trace: list
    network_p_value: float | None
    intercept_only: bool = False


def _fit_columns(
    design: np.ndarray, adjacency: np.ndarray, y: np.ndarray, config: FitConfig
) -> FittedModel:
    return fit_network_glm(
        design,
        adjacency,
        y,
        config.family,
        K=config.K,
        r=config.r,
        mode=config.mode,
        tol=config.tol,
        max_iter=config.max_iter,
    )


def _wald_p_values(fit: FittedModel, columns: list, candidates: set) -> dict:
    p = len(columns)
    out = {}
    for j, name in enumerate(columns):
        if name not in candidates:
            continue
        u = np.zeros(p)
        u[j] = 1.0
        try:
            out[name] = coef_test(u, "beta", fit).p_value
        except NumericalError:
            out[name] = None  # untestable functional; never eliminated on its basis
    return out


def backward_eliminate(
    design: np.ndarray,
    columns: list,
    adjacency: np.ndarray,
    y: np.ndarray,
    config: FitConfig,
    level: float = 0.05,
    protected: tuple = ("intercept",),
) -> EliminationResult:
    """Drop the worst Bonferroni-adjusted covariate until all survive.

    At each step every candidate column (protected ones, e.g. the intercept,
    are exempt) gets a Wald p-value, multiplied by the number of candidates
    currently in the model; the largest adjusted p above ``level`` is removed
    and the model refit. The network block is never a candidate: its
    chi-square p-value is recorded in the result, not used for selection.
    """
    cols = list(columns)
    X = np.asarray(design, dtype=float)
    trace: list[EliminationStep] = []
    while True:
        candidates = {c for c in cols if c not in protected}
        if not candidates:
            fit = _fit_columns(X, adjacency, y, config)
            return EliminationResult(
                columns=cols,
                design=X,
                fit=fit,
                trace=trace,
                network_p_value=_network_p(fit),
                intercept_only=True,
            )
        fit = _fit_columns(X, adjacency, y, config)
        raw = _wald_p_values(fit, cols, candidates)
        adjusted = {
            name: min(1.0, p * len(candidates)) for name, p in raw.items() if p is not None
        }
        droppable = {name: p for name, p in adjusted.items() if p > level}
        if not droppable:
            return EliminationResult(
                columns=cols,
                design=X,
                fit=fit,
                trace=trace,
                network_p_value=_network_p(fit),
            )
        worst = max(droppable, key=lambda name: (droppable[name], name))
        j = cols.index(worst)
        trace.append(
            EliminationStep(
                dropped=worst,
                p_value=raw[worst],
                p_adjusted=droppable[worst],
                candidates=len(candidates),
            )
        )
        X = np.delete(X, j, axis=1)
        cols.pop(j)


def _network_p(fit: FittedModel) -> float | None:
    try:
        return network_effect_test_fit(fit).p_value
    except (DomainError, NumericalError):
        return None


# -- cross-validated AUC ----------------------------------------------------


@dataclass(frozen=True)
class CvAucResult:
    auc: float
    roc: list
    scores: np.ndarray
    skipped_folds: int
    per_group_auc: dict = field(default_factory=dict)


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-sum AUC with half credit for ties (midranks)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise DataError("AUC requires both classes")
    ranks = rankdata(np.concatenate([pos, neg]))
    return float((ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size))


def roc_points(scores: np.ndarray, labels: np.ndarray) -> list:
    """ROC staircase as (fpr, tpr) pairs; tied scores collapse to one vertex."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC requires both classes")
    pts = [(0.0, 0.0)]
    tp = fp = 0
    for k in range(len(sorted_scores)):
        tp += sorted_labels[k] == 1
        fp += sorted_labels[k] == 0
        if k + 1 < len(sorted_scores) and sorted_scores[k + 1] == sorted_scores[k]:
            continue
        pts.append((fp / n_neg, tp / n_pos))
    return pts


def cv_auc(
    design: np.ndarray,
    adjacency: np.ndarray,
    y: np.ndarray,
    config: FitConfig,
    folds: int = 200,
    seed: int = 0,
    selector=None,
    group: np.ndarray | None = None,
) -> CvAucResult:
    """Pooled held-out AUC over a seeded random fold partition.

    Each fold's responses are held out; the model is refit on the remaining
    rows (the network and covariates stay fully observed) and the held-out
    probabilities are pooled before a single ROC/AUC evaluation. ``selector``
    may remap the design per fold: called as selector(train_idx) and expected
    to return indices of the columns to keep. Folds whose training rows make
    the design degenerate (e.g. a lost covariate level) are skipped.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if not np.all((y == 0) | (y == 1)):
        raise DataError("cross-validated AUC requires a binary response")
    if folds > n:
        raise DataError(f"folds={folds} exceeds n={n}")
    rng = as_generator(seed)
    assignment = np.array_split(rng.permutation(n), folds)

    scores = np.full(n, np.nan)
    skipped = 0
    for fold in assignment:
        train = np.setdiff1d(np.arange(n), fold)
        cols = np.arange(design.shape[1]) if selector is None else np.asarray(selector(train))
        try:
            fit = fit_network_glm(
                design[:, cols],
                adjacency,
                y,
                config.family,
                K=config.K,
                r=config.r,
                mode=config.mode,
                fit_rows=train,
            )
        except NumericalError:
            skipped += 1
            continue
        scores[fold] = fit.mu[fold]

    have = np.isfinite(scores)
    if not np.any(have):
        raise NumericalError("every cross-validation fold failed")
    auc = auc_score(scores[have], y[have])
    roc = roc_points(scores[have], y[have])
    per_group = {}
    if group is not None:
        group = np.asarray(group)
        for label in sorted(set(group.tolist())):
            m = have & (group == label)
            if np.unique(y[m]).size == 2:
                per_group[label] = auc_score(scores[m], y[m])
    return CvAucResult(
        auc=auc, roc=roc, scores=scores, skipped_folds=skipped, per_group_auc=per_group
    )


# -- centralities and network-effect descriptives ---------------------------


def centralities(edges: np.ndarray, n: int) -> dict:
    """Degree, eigenvector, betweenness, closeness for every node.

    Degree and betweenness are unnormalized; closeness is the classic
    per-component (n_comp - 1) / sum-of-distances; eigenvector centrality is
    the leading adjacency eigenvector rescaled to maximum entry 1.
    """
    if n == 0:
        return {}
    g = nx.Graph()
    g.add_nodes_from(range(n))
    if np.asarray(edges).size:
        g.add_edges_from(map(tuple, np.asarray(edges, dtype=int)))

    degree = np.array([g.degree(i) for i in range(n)], dtype=float)
    betweenness = np.array(
        [nx.betweenness_centrality(g, normalized=False)[i] for i in range(n)]
    )
    closeness = np.array(
        [nx.closeness_centrality(g, wf_improved=False)[i] for i in range(n)]
    )

    if g.number_of_edges() == 0:
        eigen = np.zeros(n)
    else:
        A = nx.to_scipy_sparse_array(g, nodelist=range(n), format="csr", dtype=float)
        if n <= 1500:
            vals, vecs = np.linalg.eigh(A.toarray())
            v = vecs[:, -1]
        else:
            _, vecs = scipy.sparse.linalg.eigsh(A, k=1, which="LA")
            v = vecs[:, 0]
        i = int(np.argmax(np.abs(v)))
        if v[i] < 0:
            v = -v
        eigen = v / v[i]
    return {
        "degree": degree,
        "eigenvector": eigen,
        "betweenness": betweenness,
        "closeness": closeness,
    }


def effect_strength(fit: FittedModel, group: np.ndarray) -> dict:
    """Per-group ratio of aggregate |alpha| to aggregate |x' beta|."""
    group = np.asarray(group)
    xb = np.abs(fit.X @ fit.beta)
    aa = np.abs(fit.alpha)
    out = {}
    for label in sorted(set(group.tolist())):
        m = group == label
        denom = float(xb[m].sum())
        if denom == 0.0:
            warnings.warn(
                f"group {label!r} has zero aggregate covariate effect; strength set to inf",
                RuntimeWarning,
            )
            out[label] = float("inf")
        else:
            out[label] = float(aa[m].sum() / denom)
    return out


def top_effect_groups(strengths: dict, m: int = 5) -> list:
    """Group labels ranked by descending effect strength (ties by label)."""
    return [k for k, _ in sorted(strengths.items(), key=lambda kv: (-kv[1], str(kv[0])))][:m]


def centrality_correlations(alpha: np.ndarray, metrics: dict, extra: dict | None = None) -> dict:
    """Pearson correlation of |alpha| with each centrality (plus user columns)."""
    a = np.abs(np.asarray(alpha, dtype=float))
    out = {}
    columns = dict(metrics)
    if extra:
        columns.update(extra)
    for name, values in columns.items():
        v = np.asarray(values, dtype=float)
        if np.std(v) == 0 or np.std(a) == 0:
            out[name] = float("nan")
        else:
            out[name] = float(np.corrcoef(a, v)[0, 1])
    return out
