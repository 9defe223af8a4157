"""Structure-recovery scoring and common/individual edge decomposition."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .joint import JointModel
from .synthetic import EdgeSet


@dataclass(frozen=True)
class RocCurve:
    """(lambda, sensitivity, specificity) points, largest lambda first."""

    points: tuple[tuple[float, float, float], ...]
    auc: float
    label: str = ""

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([pt[0] for pt in self.points])

    @property
    def sensitivity(self) -> np.ndarray:
        return np.array([pt[1] for pt in self.points])

    @property
    def specificity(self) -> np.ndarray:
        return np.array([pt[2] for pt in self.points])


def roc_auc(sensitivity, specificity) -> float:
    """Trapezoid area under (1 - specificity, sensitivity).

    The corners (0, 0) and (1, 1) are always included, so a path that
    stops short of the empty or complete graph is closed by a straight
    segment.
    """
    fpr = np.concatenate([[0.0], 1.0 - np.asarray(specificity, float), [1.0]])
    tpr = np.concatenate([[0.0], np.asarray(sensitivity, float), [1.0]])
    pts = sorted(set(zip(fpr.tolist(), tpr.tolist())))
    x = np.array([a for a, _ in pts])
    y = np.array([b for _, b in pts])
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def _confusion(true_adj: np.ndarray, est_adj: np.ndarray) -> tuple[int, int, int, int]:
    iu = np.triu_indices(true_adj.shape[0], 1)
    t = true_adj[iu]
    e = est_adj[iu]
    return int(np.sum(t & e)), int(np.sum(t)), int(np.sum(~t & ~e)), int(np.sum(~t))


def _curve(points, label) -> RocCurve:
    points = tuple(sorted(points, key=lambda pt: -pt[0]))
    return RocCurve(points, roc_auc([pt[1] for pt in points], [pt[2] for pt in points]), label)


def roc_curve(
    truth: Sequence[EdgeSet],
    path: Sequence[tuple[float, JointModel]],
    pooled_only: bool = False,
) -> tuple[list[RocCurve], RocCurve]:
    """Per-category and pooled ROC curves along a lambda path.

    An interaction counts as selected when its estimate is exactly nonzero.
    The pooled curve counts all ``K * p (p - 1) / 2`` decisions together.
    """
    K = len(truth)
    p = truth[0].p
    true_adj = [t.adjacency() for t in truth]
    for lam, model in path:
        if model.K != K or model.p != p:
            raise ValueError(f"model at lambda={lam} does not match the truth dimensions")
    if not pooled_only:
        for k, t in enumerate(truth):
            if len(t) == 0:
                raise ValueError(
                    f"category {k} has no true edges so sensitivity is undefined; "
                    "use pooled_only=True"
                )
            if len(t) == p * (p - 1) // 2:
                raise ValueError(
                    f"category {k} has no true non-edges so specificity is undefined; "
                    "use pooled_only=True"
                )

    per_cat = [[] for _ in range(K)]
    pooled = []
    for lam, model in path:
        mask = model.edge_mask()
        tp_all = pos_all = tn_all = neg_all = 0
        for k in range(K):
            tp, pos, tn, neg = _confusion(true_adj[k], mask[k])
            tp_all += tp
            pos_all += pos
            tn_all += tn
            neg_all += neg
            if not pooled_only:
                per_cat[k].append((float(lam), tp / pos, tn / neg))
        if pos_all == 0 or neg_all == 0:
            raise ValueError("pooled truth needs at least one edge and one non-edge")
        pooled.append((float(lam), tp_all / pos_all, tn_all / neg_all))

    curves = [] if pooled_only else [_curve(pts, str(k)) for k, pts in enumerate(per_cat)]
    return curves, _curve(pooled, "pooled")


def average_roc(curves: Sequence[RocCurve]) -> RocCurve:
    """Pointwise mean over replications sharing one lambda grid."""
    grids = {tuple(c.lambdas.tolist()) for c in curves}
    if len(grids) != 1:
        raise ValueError("curves must share the same lambda grid")
    lam = curves[0].lambdas
    sens = np.mean([c.sensitivity for c in curves], axis=0)
    spec = np.mean([c.specificity for c in curves], axis=0)
    return _curve(list(zip(lam.tolist(), sens.tolist(), spec.tolist())), curves[0].label)


def write_roc_csv(path, rows: Sequence[tuple[str, RocCurve]]) -> None:
    """Columns: method, lambda, category, sensitivity, specificity."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "lambda", "category", "sensitivity", "specificity"])
        for method, curve in rows:
            for lam, sens, spec in curve.points:
                w.writerow([method, repr(lam), curve.label, repr(sens), repr(spec)])


@dataclass(frozen=True)
class EdgeDecomposition:
    common: EdgeSet
    individual: tuple[EdgeSet, ...]
    values: np.ndarray
    """``(K, p, p)`` estimates the decomposition was computed from."""

    def common_weights(self) -> dict[tuple[int, int], float]:
        """Mean signed value across categories for each common edge."""
        return {e: float(np.mean(self.values[:, e[0], e[1]])) for e in self.common}

    def category_weights(self, k: int) -> dict[tuple[int, int], float]:
        return {e: float(self.values[k, e[0], e[1]]) for e in self.individual[k]}


def decompose_edges(model: JointModel, threshold: float = 0.0) -> EdgeDecomposition:
    """Split estimated edges into the shared part and per-category extras."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    sets = [EdgeSet.from_adjacency(m) for m in model.edge_mask(threshold)]
    return decompose_edge_sets(sets, np.asarray(model.thetas))


def decompose_edge_sets(sets: Sequence[EdgeSet], values) -> EdgeDecomposition:
    common = sets[0]
    for s in sets[1:]:
        common = common & s
    return EdgeDecomposition(common, tuple(s - common for s in sets), np.asarray(values, float))


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_dot(
    path,
    edges: Mapping[tuple[int, int], float],
    names: Sequence[str],
    groups: Mapping[str, str] | None = None,
    graph_name: str = "G",
) -> None:
    """Undirected DOT graph; positive edges solid, negative dashed.

    Every edge carries ``weight=|value|`` and ``sign``; nodes carry a
    ``group`` attribute when ``groups`` maps their name to one.
    """
    groups = groups or {}
    lines = [f"graph {_dot_id(graph_name)} {{"]
    for name in names:
        attr = f' [group={_dot_id(groups[name])}]' if name in groups else ""
        lines.append(f"  {_dot_id(name)}{attr};")
    for (a, b), v in sorted(edges.items()):
        style = "solid" if v > 0 else "dashed"
        sign = "+" if v > 0 else "-"
        lines.append(
            f"  {_dot_id(names[a])} -- {_dot_id(names[b])} "
            f'[weight={abs(v):.17g}, sign="{sign}", style={style}];'
        )
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")


def roc_summary(curves: Mapping[str, Sequence[RocCurve]]) -> dict:
    """``{method: {label: auc}}`` for a JSON summary."""
    return {m: {c.label: c.auc for c in cs} for m, cs in curves.items()}


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
