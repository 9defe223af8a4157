"""Synthetic heterogeneous Ising networks and samplers.

Graphs follow the usual benchmark designs: a chain, a mutual 3-nearest-
neighbor graph on random points in the unit square, and a Barabasi-Albert
scale-free graph. Category-specific edges are added on top of the common
graph, parameters are drawn from ``[-1, -0.5] U [0.5, 1]`` and data come
from a systematic-scan Gibbs sampler.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .core import (
    ENUMERATION_LIMIT,
    BinaryDataset,
    CategoryCollection,
    all_states,
    check_theta,
    state_probabilities,
)

GIBBS_BURNIN = 10_000
GIBBS_THIN = 10
# long-run settings for near-independent draws; much slower
LONG_GIBBS_BURNIN = 1_000_000
LONG_GIBBS_THIN = 100
_CHUNK_ROUNDS = 50_000


def rng_for(seed, *names) -> np.random.Generator:
    """Independent generator for a named substream of ``seed``."""
    key = tuple(zlib.crc32(str(n).encode()) for n in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


@dataclass(frozen=True)
class EdgeSet:
    """Undirected edges over nodes ``0..p-1`` stored as sorted pairs."""

    p: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if not (0 <= a < self.p and 0 <= b < self.p):
                raise ValueError(f"edge ({a}, {b}) outside 0..{self.p - 1}")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return iter(sorted(self.edges))

    def __contains__(self, pair):
        a, b = pair
        return (min(a, b), max(a, b)) in self.edges

    def __or__(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(self.p, self.edges | other.edges)

    def __and__(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(self.p, self.edges & other.edges)

    def __sub__(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(self.p, self.edges - other.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.p, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.p, self.p), dtype=bool)
        for a, b in self.edges:
            adj[a, b] = adj[b, a] = True
        return adj

    @classmethod
    def from_adjacency(cls, adj) -> "EdgeSet":
        adj = np.asarray(adj, dtype=bool)
        iu = np.triu_indices(adj.shape[0], 1)
        mask = adj[iu]
        return cls(adj.shape[0], frozenset(zip(iu[0][mask].tolist(), iu[1][mask].tolist())))

    def to_list(self) -> list[list[int]]:
        return [list(e) for e in self]


def gen_chain(p: int) -> EdgeSet:
    if p < 2:
        raise ValueError("a chain needs p >= 2")
    return EdgeSet(p, frozenset((j, j + 1) for j in range(p - 1)))


def gen_nearest_neighbor(p: int, seed, k: int = 3) -> EdgeSet:
    """Link points that are among each other's ``k`` nearest neighbors."""
    if p < k + 1:
        raise ValueError(f"need p >= {k + 1} points")
    pts = rng_for(seed, "nn-points").random((p, 2))
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(dist, np.inf)
    # stable sort breaks distance ties toward the lower index
    near = np.argsort(dist, axis=1, kind="stable")[:, :k]
    is_near = np.zeros((p, p), dtype=bool)
    is_near[np.repeat(np.arange(p), k), near.ravel()] = True
    return EdgeSet.from_adjacency(is_near & is_near.T)


def gen_scale_free(p: int, m: int = 1, seed=0) -> EdgeSet:
    """Barabasi-Albert growth from an (m+1)-clique, no multi-edges."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if p <= m:
        raise ValueError(f"need p > m, got p={p}, m={m}")
    rng = rng_for(seed, "scale-free")
    edges = {(a, b) for a in range(m + 1) for b in range(a + 1, m + 1)}
    deg = np.zeros(p)
    deg[: m + 1] = m
    for new in range(m + 1, p):
        prob = deg[:new] / deg[:new].sum()
        targets = rng.choice(new, size=m, replace=False, p=prob)
        for t in targets:
            edges.add((int(t), new))
            deg[t] += 1
        deg[new] = m
    return EdgeSet(p, frozenset(edges))


def individual_edge_count(n_common: int, rho: float) -> int:
    # round half up
    return int(np.floor(rho * n_common + 0.5))


def add_individual_edges(common: EdgeSet, rho: float, K: int, seed) -> list[EdgeSet]:
    """K disjoint sets of category-specific edges outside ``common``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    count = individual_edge_count(len(common), rho)
    p = common.p
    free = [(a, b) for a in range(p) for b in range(a + 1, p) if (a, b) not in common.edges]
    if K * count > len(free):
        raise ValueError(
            f"cannot place {K} x {count} individual edges: only {len(free)} non-edges"
        )
    pick = rng_for(seed, "individual").choice(len(free), size=K * count, replace=False)
    return [
        EdgeSet(p, frozenset(free[i] for i in pick[k * count:(k + 1) * count]))
        for k in range(K)
    ]


def draw_edge_values(size: int, rng: np.random.Generator,
                     magnitude: tuple[float, float] = (0.5, 1.0)) -> np.ndarray:
    """Uniform draws on ``[-hi, -lo] U [lo, hi]`` for ``magnitude=(lo, hi)``."""
    lo, hi = magnitude
    if not 0 <= lo <= hi:
        raise ValueError("magnitude range must satisfy 0 <= lo <= hi")
    mag = rng.uniform(lo, hi, size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * mag


def sample_params(edges: EdgeSet, seed) -> np.ndarray:
    theta = np.zeros((edges.p, edges.p))
    pairs = list(edges)
    vals = draw_edge_values(len(pairs), rng_for(seed, "params"))
    for (a, b), v in zip(pairs, vals):
        theta[a, b] = theta[b, a] = v
    return theta


@dataclass(frozen=True)
class SimulationDesign:
    p: int
    K: int
    common: EdgeSet
    individual: tuple[EdgeSet, ...]
    rho: float
    sample_sizes: tuple[int, ...]
    seed: int
    thetas: tuple[np.ndarray, ...] = ()
    graph: str = "custom"

    def __post_init__(self):
        if len(self.individual) != self.K or len(self.sample_sizes) != self.K:
            raise ValueError("need one individual edge set and sample size per category")
        expected = individual_edge_count(len(self.common), self.rho)
        for k, ind in enumerate(self.individual):
            if ind.edges & self.common.edges:
                raise ValueError(f"individual edges of category {k} overlap the common graph")
            if len(ind) != expected:
                raise ValueError(f"category {k} has {len(ind)} individual edges, expected {expected}")
            for other in self.individual[k + 1:]:
                if ind.edges & other.edges:
                    raise ValueError("individual edge sets must be disjoint")

    def truth(self) -> list[EdgeSet]:
        return [self.common | ind for ind in self.individual]

    def to_dict(self) -> dict:
        return {
            "graph": self.graph,
            "p": self.p,
            "K": self.K,
            "rho": self.rho,
            "seed": self.seed,
            "sample_sizes": list(self.sample_sizes),
            "common_edges": self.common.to_list(),
            "individual_edges": [ind.to_list() for ind in self.individual],
            "thetas": [t.tolist() for t in self.thetas],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationDesign":
        p = d["p"]
        return cls(
            p=p,
            K=d["K"],
            common=EdgeSet(p, frozenset(map(tuple, d["common_edges"]))),
            individual=tuple(EdgeSet(p, frozenset(map(tuple, e))) for e in d["individual_edges"]),
            rho=d["rho"],
            sample_sizes=tuple(d["sample_sizes"]),
            seed=d["seed"],
            thetas=tuple(np.array(t, dtype=float) for t in d.get("thetas", [])),
            graph=d.get("graph", "custom"),
        )

    @classmethod
    def load(cls, path) -> "SimulationDesign":
        return cls.from_dict(json.loads(Path(path).read_text()))


def make_design(
    graph: str,
    p: int,
    K: int,
    rho: float,
    sample_sizes: int | Sequence[int],
    seed: int,
    m: int = 1,
    shared_common_values: bool = True,
    magnitude: tuple[float, float] = (0.5, 1.0),
    centered: bool = False,
) -> SimulationDesign:
    """Build a design with parameter matrices for every category.

    ``graph`` is one of ``"chain"``, ``"nn"`` or ``"sf"``. With
    ``shared_common_values`` the common edges carry the same value in
    every category, so ``rho=0`` gives identical models. Edge magnitudes
    are uniform on ``magnitude``. Main effects are zero unless
    ``centered``, which sets ``theta[j, j] = -sum_k theta[j, k] / 2``: the
    0/1 model is then a symmetric +-1 spin model and every margin is 1/2.
    """
    if graph == "chain":
        common = gen_chain(p)
    elif graph == "nn":
        common = gen_nearest_neighbor(p, seed)
    elif graph == "sf":
        common = gen_scale_free(p, m, seed)
    else:
        raise ValueError(f"unknown graph type {graph!r}")
    if isinstance(sample_sizes, (int, np.integer)):
        sample_sizes = (int(sample_sizes),) * K
    individual = add_individual_edges(common, rho, K, seed)

    common_pairs = list(common)
    shared = draw_edge_values(len(common_pairs), rng_for(seed, "common-values"), magnitude)
    thetas = []
    for k in range(K):
        rng = rng_for(seed, "values", k)
        vals = shared if shared_common_values else draw_edge_values(len(common_pairs), rng, magnitude)
        theta = np.zeros((p, p))
        for (a, b), v in zip(common_pairs, vals):
            theta[a, b] = theta[b, a] = v
        own = list(individual[k])
        for (a, b), v in zip(own, draw_edge_values(len(own), rng, magnitude)):
            theta[a, b] = theta[b, a] = v
        if centered:
            np.fill_diagonal(theta, -0.5 * theta.sum(axis=1))
        thetas.append(theta)
    return SimulationDesign(
        p=p, K=K, common=common, individual=tuple(individual), rho=rho,
        sample_sizes=tuple(int(n) for n in sample_sizes), seed=int(seed),
        thetas=tuple(thetas), graph=graph,
    )


def gibbs_chain(theta, n: int, burnin: int = GIBBS_BURNIN, thin: int = GIBBS_THIN, seed=0) -> np.ndarray:
    """Raw ``(n, p)`` array of retained Gibbs states.

    One round visits j = 0..p-1 in order, each drawn from its conditional
    given the current values of the others. After ``burnin`` rounds the
    state is kept every ``thin`` rounds (``thin=0`` is treated as 1).
    """
    theta = check_theta(theta)
    if n < 1:
        raise ValueError("n must be at least 1")
    if burnin < 0 or thin < 0:
        raise ValueError("burnin and thin must be nonnegative")
    thin = max(int(thin), 1)
    p = theta.shape[0]
    rng = rng_for(seed, "gibbs")
    state = (rng.random(p) < 0.5).astype(float)
    out = np.empty((n, p))
    dummy = np.empty((0, p))

    left = burnin
    while left > 0:
        r = min(left, _CHUNK_ROUNDS)
        _kernels.gibbs_scan(theta, state, rng.random((r, p)), 0, dummy, 0)
        left -= r
    row = 0
    chunk = max(_CHUNK_ROUNDS // thin, 1) * thin
    left = n * thin
    while left > 0:
        r = min(left, chunk)
        row = _kernels.gibbs_scan(theta, state, rng.random((r, p)), thin, out, row)
        left -= r
    return out


def gibbs_sample(theta, n: int, burnin: int = GIBBS_BURNIN, thin: int = GIBBS_THIN,
                 seed=0, variable_names: Iterable[str] = ()) -> BinaryDataset:
    return BinaryDataset(gibbs_chain(theta, n, burnin, thin, seed), tuple(variable_names))


def exact_chain(theta, n: int, seed=0) -> np.ndarray:
    """I.i.d. draws by inverse CDF over all ``2**p`` states (p <= 20)."""
    theta = check_theta(theta)
    if theta.shape[0] > ENUMERATION_LIMIT:
        raise ValueError(f"p={theta.shape[0]} exceeds the enumeration limit of {ENUMERATION_LIMIT}")
    probs = state_probabilities(theta)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng_for(seed, "exact").random(n), side="right")
    return all_states(theta.shape[0])[idx]


def exact_sample(theta, n: int, seed=0, variable_names: Iterable[str] = ()) -> BinaryDataset:
    return BinaryDataset(exact_chain(theta, n, seed), tuple(variable_names))


def simulate(design: SimulationDesign, burnin: int = GIBBS_BURNIN, thin: int = GIBBS_THIN,
             replicate: int = 0) -> CategoryCollection:
    """Gibbs-sample every category of ``design``."""
    names = tuple(f"X{j + 1}" for j in range(design.p))
    cats = [
        gibbs_sample(theta, n, burnin, thin, seed=_subseed(design.seed, "data", replicate, k),
                     variable_names=names)
        for k, (theta, n) in enumerate(zip(design.thetas, design.sample_sizes))
    ]
    return CategoryCollection(tuple(cats), tuple(f"category{k + 1}" for k in range(design.K)))


def _subseed(seed, *names) -> int:
    return int(rng_for(seed, *names).integers(2**63))
