"""Roll-call vote ingestion, imputation, filtering and the end-to-end analysis.

Senators are the variables and bills are the observations: a
``VoteTable`` holds one row per bill and one column per member, with
missing votes stored as NaN until they are imputed.
"""

from __future__ import annotations

import csv
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import BinaryDataset, CategoryCollection, PenaltySpec
from .evaluation import decompose_edge_sets, write_dot, write_json
from .joint import JointModel, fit_joint
from .selection import StabilityReport, cross_validate, default_grid, stability_select
from .synthetic import rng_for

log = logging.getLogger(__name__)

MISSING = np.nan
PARTIES = frozenset({"D", "R", "I", ""})
"""Recognized party codes; the empty string means unknown."""
OPPOSITE = {"D": "R", "R": "D"}
STRATEGIES = ("party_majority", "knn_majority", "opposite_party_majority", "uniform_random")
_NA_TOKENS = {"NA", "na", "NaN", "nan", ""}


class VoteFormatError(ValueError):
    """Malformed vote or membership file."""


class ImputationError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class VoteTable:
    votes: np.ndarray
    """``(n_bills, p)`` array of 1.0, 0.0 or NaN (missing)."""
    bill_ids: tuple[str, ...]
    category_labels: tuple[str, ...]
    member_names: tuple[str, ...]
    member_party: tuple[str, ...]
    independent_alias: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.votes, dtype=float)
        if v.ndim != 2:
            raise ValueError("votes must be a 2-d array")
        n, p = v.shape
        if len(self.bill_ids) != n or len(self.category_labels) != n:
            raise ValueError("bill ids and category labels must have one entry per bill")
        if len(self.member_names) != p or len(self.member_party) != p:
            raise ValueError("member names and parties must have one entry per column")
        if len(set(self.member_names)) != p:
            raise ValueError("member names must be unique")
        bad = ~np.isnan(v) & (v != 0) & (v != 1)
        if bad.any():
            raise ValueError("votes must be 1, 0 or missing")
        unknown = sorted(set(self.member_party) - PARTIES)
        if unknown:
            raise ValueError(f"unrecognized party labels {unknown}; expected one of D, R, I")
        for name, alias in self.independent_alias.items():
            if name not in self.member_names:
                raise ValueError(f"independent alias given for unknown member {name!r}")
            if alias not in PARTIES - {""}:
                raise ValueError(f"alias for {name!r} must be a party code, got {alias!r}")
        empty = np.where(np.isnan(v).all(axis=1))[0]
        if empty.size:
            raise ValueError(f"bill {self.bill_ids[empty[0]]!r} has no recorded votes")
        v.setflags(write=False)
        object.__setattr__(self, "votes", v)
        object.__setattr__(self, "independent_alias", dict(self.independent_alias))

    @property
    def n_bills(self) -> int:
        return self.votes.shape[0]

    @property
    def p(self) -> int:
        return self.votes.shape[1]

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.votes).sum())

    def categories(self) -> tuple[str, ...]:
        """Category labels in order of first appearance."""
        return tuple(dict.fromkeys(self.category_labels))

    def select_bills(self, rows) -> "VoteTable":
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return VoteTable(
            self.votes[rows],
            tuple(self.bill_ids[i] for i in rows),
            tuple(self.category_labels[i] for i in rows),
            self.member_names,
            self.member_party,
            self.independent_alias,
        )

    def with_members(self, members: Mapping[str, "Member"]) -> "VoteTable":
        """Attach party labels and aliases keyed by member name."""
        missing = [m for m in self.member_names if m not in members]
        if missing:
            raise VoteFormatError(f"no membership record for {missing[0]!r}")
        return VoteTable(
            self.votes,
            self.bill_ids,
            self.category_labels,
            self.member_names,
            tuple(members[m].party for m in self.member_names),
            {m: members[m].independent_alias for m in self.member_names
             if members[m].independent_alias},
        )


@dataclass(frozen=True)
class Member:
    name: str
    state: str
    party: str
    independent_alias: str = ""

    @property
    def key(self) -> str:
        return member_key(self.name, self.state)


def member_key(name: str, state: str) -> str:
    """Identity used for columns: display name plus state."""
    return f"{name} ({state})" if state else name


@dataclass(frozen=True)
class ImputationStrategy:
    kind: str = "party_majority"
    seed: int = 0
    k: int = 5

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown imputation strategy {self.kind!r}; choose from {STRATEGIES}")
        if self.k < 1:
            raise ValueError("k must be positive")


@dataclass(frozen=True)
class ImputationRecord:
    bill_id: str
    member: str
    value: int
    rule: str
    """``majority``, ``tie``, ``random``."""
    yes: int
    no: int


# --- loading -----------------------------------------------------------------


def load_members(path) -> dict[str, Member]:
    """Membership CSV with columns name, state, party and optional independent_alias.

    The returned mapping is keyed both by ``"name (state)"`` and, when the
    name is unique in the file, by the bare name.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise VoteFormatError(f"{path}: empty membership file")
        need = {"name", "state", "party"}
        if not need <= set(reader.fieldnames):
            raise VoteFormatError(f"{path}:1: membership header needs columns {sorted(need)}")
        members = []
        for row in reader:
            alias = (row.get("independent_alias") or "").strip()
            members.append(Member(row["name"].strip(), row["state"].strip(),
                                  row["party"].strip(), alias))
    out: dict[str, Member] = {}
    for m in members:
        if m.key in out:
            raise VoteFormatError(f"{path}: duplicate member {m.key!r}")
        out[m.key] = m
    names = [m.name for m in members]
    for m in members:
        if names.count(m.name) == 1:
            out.setdefault(m.name, m)
    return out


def load_votes(path, format: str = "csv", members=None,
               categories: Mapping[str, str] | None = None) -> VoteTable:
    """Read a vote table.

    Parameters
    ----------
    path : path-like
        ``csv``: one file with columns ``bill_id, category`` followed by one
        column per member holding 1, 0 or NA. ``senate_lis_xml``: a single
        roll-call XML document or a directory of them (read in sorted order).
    format : {"csv", "senate_lis_xml"}
    members : path-like or mapping, optional
        Membership CSV (see :func:`load_members`) or its parsed mapping.
        XML files carry party codes themselves.
    categories : mapping, optional
        ``bill_id -> category`` for XML input, where the documents carry no
        category. Unlisted bills get ``"uncategorized"``.
    """
    if format == "csv":
        table = _load_csv(Path(path))
    elif format == "senate_lis_xml":
        table = _load_lis_xml(Path(path), categories or {})
    else:
        raise ValueError(f"unknown vote format {format!r}; use 'csv' or 'senate_lis_xml'")
    if members is not None:
        if not isinstance(members, Mapping):
            members = load_members(members)
        table = table.with_members(members)
    return table


def _load_csv(path: Path) -> VoteTable:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise VoteFormatError(f"{path}:1: empty vote file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[0] != "bill_id" or header[1] != "category":
        raise VoteFormatError(f"{path}:1: header must be bill_id, category, then member columns")
    names = header[2:]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise VoteFormatError(f"{path}:1: duplicate member column {dup!r}")
    ids, cats, votes = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise VoteFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for tok in row[2:]:
            tok = tok.strip()
            if tok == "1":
                vals.append(1.0)
            elif tok == "0":
                vals.append(0.0)
            elif tok in _NA_TOKENS:
                vals.append(MISSING)
            else:
                raise VoteFormatError(f"{path}:{lineno}: vote must be 1, 0 or NA, got {tok!r}")
        ids.append(row[0].strip())
        cats.append(row[1].strip())
        votes.append(vals)
    if not votes:
        raise VoteFormatError(f"{path}: no bills")
    try:
        return VoteTable(np.array(votes), tuple(ids), tuple(cats), tuple(names), ("",) * len(names))
    except ValueError as exc:
        raise VoteFormatError(f"{path}: {exc}") from exc


def _text(elem, tag: str, path: Path) -> str:
    found = elem.find(tag)
    if found is None:
        raise VoteFormatError(f"{path}: <{elem.tag}> has no <{tag}> element")
    return (found.text or "").strip()


def _parse_lis(path: Path) -> tuple[str, dict[str, tuple[str, float]]]:
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        line, col = exc.position
        raise VoteFormatError(f"{path}:{line}:{col}: malformed XML") from exc
    parts = [root.findtext(t, "").strip() for t in ("congress", "session", "vote_number")]
    bill_id = "-".join(p for p in parts if p) or path.stem
    block = root.find("members")
    if block is None:
        raise VoteFormatError(f"{path}: no <members> element")
    votes: dict[str, tuple[str, float]] = {}
    for i, m in enumerate(block.findall("member"), start=1):
        first, last = m.findtext("first_name", "").strip(), m.findtext("last_name", "").strip()
        name = f"{first} {last}".strip() or m.findtext("member_full", "").strip()
        if not name:
            raise VoteFormatError(f"{path}: member #{i} has no name")
        key = member_key(name, _text(m, "state", path))
        cast = _text(m, "vote_cast", path)
        value = 1.0 if cast == "Yea" else 0.0 if cast == "Nay" else MISSING
        if key in votes:
            raise VoteFormatError(f"{path}: member {key!r} appears twice")
        votes[key] = (m.findtext("party", "").strip(), value)
    return bill_id, votes


def _load_lis_xml(path: Path, categories: Mapping[str, str]) -> VoteTable:
    files = sorted(path.glob("*.xml")) if path.is_dir() else [path]
    if not files:
        raise VoteFormatError(f"{path}: no XML files")
    docs = [(f, *_parse_lis(f)) for f in files]
    first_file, _, first = docs[0]
    names = sorted(first)
    for f, _, votes in docs[1:]:
        if set(votes) != set(first):
            extra = sorted(set(votes) - set(first))
            lost = sorted(set(first) - set(votes))
            raise VoteFormatError(
                f"{f}: member set differs from {first_file.name}: "
                f"extra {extra}, missing {lost}"
            )
    party = tuple(first[n][0] for n in names)
    ids = tuple(b for _, b, _ in docs)
    if len(set(ids)) != len(ids):
        raise VoteFormatError(f"{path}: duplicate roll-call ids")
    votes = np.array([[v[n][1] for n in names] for _, _, v in docs])
    return VoteTable(votes, ids, tuple(categories.get(b, "uncategorized") for b in ids),
                     tuple(names), party)


def save_votes(table: VoteTable, path) -> None:
    """Write the CSV layout read by :func:`load_votes`."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bill_id", "category", *table.member_names])
        for b, c, row in zip(table.bill_ids, table.category_labels, table.votes):
            w.writerow([b, c, *("NA" if np.isnan(v) else int(v) for v in row)])


def table_from_collection(collection: CategoryCollection, parties: Sequence[str],
                          missing_rate: float = 0.0, seed=0,
                          independent_alias: Mapping[str, str] | None = None) -> VoteTable:
    """Stack simulated categories into a vote table with random abstentions.

    Useful for exercising the pipeline without real roll-call data. Each
    cell goes missing independently with ``missing_rate``, except that
    every bill keeps at least one recorded vote.
    """
    if not 0.0 <= missing_rate < 1.0:
        raise ValueError("missing_rate must lie in [0, 1)")
    rng = rng_for(seed, "abstentions")
    blocks, ids, cats = [], [], []
    for label, data in zip(collection.labels, collection):
        blocks.append(data.values)
        ids += [f"{label}-{i + 1}" for i in range(data.n)]
        cats += [label] * data.n
    votes = np.vstack(blocks)
    drop = rng.random(votes.shape) < missing_rate
    drop[drop.all(axis=1), 0] = False
    votes = np.where(drop, MISSING, votes)
    return VoteTable(votes, tuple(ids), tuple(cats), collection.variable_names,
                     tuple(parties), independent_alias or {})


# --- imputation --------------------------------------------------------------


def knn_similarity(votes: np.ndarray) -> np.ndarray:
    """Share of agreeing votes over the bills both members voted on.

    Pairs with no overlap get -1; the diagonal is -1 so a member is never
    its own neighbor.
    """
    v = np.asarray(votes, dtype=float)
    seen = (~np.isnan(v)).astype(float)
    yes = np.nan_to_num(v) * seen
    no = (1.0 - np.nan_to_num(v)) * seen
    overlap = seen.T @ seen
    agree = yes.T @ yes + no.T @ no
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(overlap > 0, agree / overlap, -1.0)
    np.fill_diagonal(sim, -1.0)
    return sim


def _impute_party(table: VoteTable, b: int, j: int, flip: bool) -> tuple[str, np.ndarray]:
    name = table.member_names[j]
    own = table.member_party[j]
    party = table.independent_alias.get(name, own)
    if flip:
        if party not in OPPOSITE:
            raise ImputationError(f"member {name!r} with party {party!r} has no opposite party")
        party = OPPOSITE[party]
    if party == "":
        raise ImputationError(f"member {name!r} has no party label")
    cols = [i for i, p in enumerate(table.member_party) if p == party]
    row = table.votes[b, cols]
    row = row[~np.isnan(row)]
    if row.size == 0:
        raise ImputationError(
            f"bill {table.bill_ids[b]!r}: party {party!r} has no recorded votes"
        )
    return party, row


def impute_with_log(table: VoteTable, strategy: ImputationStrategy
                    ) -> tuple[VoteTable, list[ImputationRecord]]:
    """Fill every missing vote and return the per-cell log.

    Majorities use recorded votes only, never previously imputed ones.
    Exact ties are settled by a seeded fair coin and logged with rule
    ``"tie"``. Cells are visited bill by bill, member by member, so the
    random stream is reproducible.
    """
    out = np.array(table.votes)
    rng = rng_for(strategy.seed, "impute", strategy.kind)
    sim = knn_similarity(table.votes) if strategy.kind == "knn_majority" else None
    records = []
    for b, j in zip(*np.where(np.isnan(table.votes))):
        if strategy.kind == "uniform_random":
            value = int(rng.integers(0, 2))
            records.append(ImputationRecord(table.bill_ids[b], table.member_names[j], value,
                                            "random", 0, 0))
            out[b, j] = value
            continue
        if strategy.kind == "knn_majority":
            row = table.votes[b]
            cand = np.where(~np.isnan(row) & (sim[j] >= 0))[0]
            if cand.size == 0:
                raise ImputationError(
                    f"bill {table.bill_ids[b]!r}: no comparable member voted for "
                    f"{table.member_names[j]!r}"
                )
            # stable sort: equal similarity goes to the earlier column
            top = cand[np.argsort(-sim[j, cand], kind="stable")[: strategy.k]]
            votes = row[top]
        else:
            _, votes = _impute_party(table, b, j, strategy.kind == "opposite_party_majority")
        yes = int(votes.sum())
        no = int(votes.size - yes)
        if yes == no:
            value = int(rng.integers(0, 2))
            rule = "tie"
            log.info("tie on bill %s for %s broken to %d",
                     table.bill_ids[b], table.member_names[j], value)
        else:
            value = int(yes > no)
            rule = "majority"
        out[b, j] = value
        records.append(ImputationRecord(table.bill_ids[b], table.member_names[j],
                                        value, rule, yes, no))
    filled = VoteTable(out, table.bill_ids, table.category_labels, table.member_names,
                       table.member_party, table.independent_alias)
    return filled, records


def impute(table: VoteTable, strategy: ImputationStrategy) -> VoteTable:
    return impute_with_log(table, strategy)[0]


def write_imputation_log(path, records: Sequence[ImputationRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bill_id", "member", "value", "rule", "yes", "no"])
        for r in records:
            w.writerow([r.bill_id, r.member, r.value, r.rule, r.yes, r.no])


# --- filtering and assembly --------------------------------------------------


def lopsided_mask(votes, low: float = 0.10, high: float = 0.90) -> np.ndarray:
    """True for rows whose yes share lies in ``[low, high]``."""
    if not 0.0 <= low < high <= 1.0:
        raise ValueError("need 0 <= low < high <= 1")
    v = np.asarray(votes, dtype=float)
    if np.isnan(v).any():
        raise ValueError("impute missing votes before filtering")
    share = v.mean(axis=1)
    # absorb rounding so that e.g. 90 of 100 counts as exactly 0.9
    eps = 1e-12
    return (share >= low - eps) & (share <= high + eps)


def filter_lopsided(data, low: float = 0.10, high: float = 0.90):
    """Drop bills whose yes share is below ``low`` or above ``high``.

    Both boundaries are kept. Accepts a ``BinaryDataset`` of bills by
    members or an imputed ``VoteTable`` and returns the same type, with
    the original row order. A dataset cannot be empty, so removing every
    bill of a ``BinaryDataset`` raises ``ValueError``.
    """
    if isinstance(data, VoteTable):
        return data.select_bills(lopsided_mask(data.votes, low, high))
    keep = lopsided_mask(data.values, low, high)
    if not keep.any():
        raise ValueError(f"all {keep.size} bills fall outside [{low}, {high}]")
    return data.subset(np.flatnonzero(keep))


def build_collection(table: VoteTable, categories: Sequence[str] | None = None) -> CategoryCollection:
    """One dataset per category: its bills as rows, members as columns."""
    if table.n_missing:
        raise ValueError(f"table still has {table.n_missing} missing votes; impute first")
    categories = tuple(categories) if categories is not None else table.categories()
    if not categories:
        raise ValueError("no categories requested")
    labels = np.array(table.category_labels)
    datasets = []
    for c in categories:
        rows = np.flatnonzero(labels == c)
        if rows.size == 0:
            present = c in table.categories()
            why = "is empty" if present else "is not in the table"
            raise ValueError(f"category {c!r} {why}")
        datasets.append(BinaryDataset(table.votes[rows], table.member_names))
    return CategoryCollection(tuple(datasets), categories)


# --- end-to-end --------------------------------------------------------------


@dataclass(frozen=True)
class AnalysisConfig:
    strategy: str = "party_majority"
    categories: tuple[str, ...] | None = None
    alpha: float = 0.4
    lam: float | None = None
    """Fixed lambda; ``None`` selects it by cross-validation."""
    lam2: float = 0.01
    B: int = 100
    folds: int = 5
    grid_size: int = 20
    grid_ratio: float = 0.01
    low: float = 0.10
    high: float = 0.90
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        ImputationStrategy(self.strategy)
        if self.categories is not None:
            object.__setattr__(self, "categories", tuple(self.categories))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.lam2 < 0 or self.B < 1 or self.folds < 2:
            raise ValueError("need lambda2 >= 0, B >= 1 and at least two folds")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["categories"] = list(self.categories) if self.categories is not None else None
        return d


@dataclass
class AnalysisResult:
    model: JointModel
    stability: StabilityReport
    decomposition: object
    collection: CategoryCollection
    lam: float
    files: list[str]


def _safe_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label) or "_"


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, str(exc)) from exc


def analyze(table: VoteTable, config: AnalysisConfig, out_dir) -> AnalysisResult:
    """Impute, filter, fit, bootstrap and export to ``out_dir``.

    Writes manifest.json, model.json, stability.json, common.dot,
    category_<label>.dot and imputation_log.csv. The manifest records every
    parameter and seed and, on failure, the stage that failed; nothing in
    the outputs depends on wall-clock time, so reruns are byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": "rollcall", "config": config.to_dict(), "status": "running",
                "seeds": {"impute": config.seed, "cv": config.seed, "bootstrap": config.seed}}
    files: list[str] = []
    try:
        filled, records = _stage("impute", impute_with_log, table,
                                 ImputationStrategy(config.strategy, config.seed))
        write_imputation_log(out / "imputation_log.csv", records)
        files.append("imputation_log.csv")
        kept = _stage("filter", filter_lopsided, filled, config.low, config.high)
        manifest["bills"] = {"input": table.n_bills, "after_filter": kept.n_bills,
                             "imputed_cells": len(records),
                             "ties": sum(r.rule == "tie" for r in records)}
        collection = _stage("build", build_collection, kept, config.categories)
        manifest["categories"] = dict(zip(collection.labels, collection.sizes))

        if config.lam is None:
            grid = _stage("cv", default_grid, collection, config.lam2,
                          config.grid_size, config.grid_ratio)
            cv = _stage("cv", cross_validate, collection, grid, config.folds, config.lam2,
                        config.seed, None, config.n_jobs)
            lam = cv.best_lambda
            manifest["cv"] = {"lambda_grid": list(cv.lambda_grid), "scores": list(cv.scores)}
        else:
            lam = float(config.lam)
        manifest["lambda"] = lam

        model = _stage("fit", fit_joint, collection, PenaltySpec(lam, config.lam2))
        model.save(out / "model.json")
        files.append("model.json")

        report = _stage("stability", stability_select, collection, lam, config.lam2,
                        config.B, config.alpha, config.seed, None, config.n_jobs)
        write_json(out / "stability.json", report.to_dict())
        files.append("stability.json")

        dec = decompose_edge_sets(report.stable_graphs(), report.signed_values())
        names = collection.variable_names
        groups = dict(zip(table.member_names, table.member_party))
        write_dot(out / "common.dot", dec.common_weights(), names, groups, "common")
        files.append("common.dot")
        for k, label in enumerate(collection.labels):
            fname = f"category_{_safe_label(label)}.dot"
            write_dot(out / fname, dec.category_weights(k), names, groups, label)
            files.append(fname)
    except PipelineError as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = exc.stage
        manifest["error"] = str(exc)
        manifest["partial_files"] = files
        write_json(out / "manifest.json", manifest)
        raise
    manifest["status"] = "ok"
    manifest["files"] = files
    manifest["common_edges"] = len(dec.common)
    write_json(out / "manifest.json", manifest)
    return AnalysisResult(model, report, dec, collection, lam, files)
