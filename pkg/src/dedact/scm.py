"""Linear-Gaussian structural causal models with ground-truth graphs.

Node roles: `feature` columns are both emitted in the data and meant as
model inputs; `observed` columns are emitted but not model inputs (they
exist so leakage through unused variables can be measured); `target` /
`label` is the single supervision node; `latent` nodes never leave the
simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .core import DataMatrix, FeatureIndexSet, TargetVector
from .errors import CyclicGraph, DimensionMismatch

ROLES = ("feature", "observed", "target", "label", "latent")


@dataclass(frozen=True)
class LinearSCM:
    nodes: tuple[str, ...]
    edges: dict[tuple[str, str], float]
    noise_std: dict[str, float]
    roles: dict[str, str]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        names = set(self.nodes)
        if len(names) != len(self.nodes):
            raise DimensionMismatch("duplicate node names")
        for (parent, child) in self.edges:
            if parent not in names or child not in names:
                raise DimensionMismatch(f"edge ({parent}, {child}) references unknown node")
        for node in self.nodes:
            if node not in self.noise_std or self.noise_std[node] < 0:
                raise DimensionMismatch(f"missing or negative noise_std for {node}")
            if self.roles.get(node) not in ROLES:
                raise DimensionMismatch(f"missing or unknown role for {node}")
        supervision = [n for n in self.nodes if self.roles[n] in ("target", "label")]
        if len(supervision) != 1:
            raise DimensionMismatch("exactly one node must have role target or label")
        # node order must be (or be reordered to) a topological order
        graph = self.graph()
        try:
            topo = list(nx.lexicographical_topological_sort(graph, key=lambda n: self.nodes.index(n)))
        except nx.NetworkXUnfeasible as exc:
            raise CyclicGraph("edge set contains a cycle") from exc
        object.__setattr__(self, "nodes", tuple(topo))

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges.keys())
        return g

    @property
    def supervision_node(self) -> str:
        return next(n for n in self.nodes if self.roles[n] in ("target", "label"))

    def data_columns(self, include_observed: bool = False) -> tuple[str, ...]:
        """Names of the nodes emitted as DataMatrix columns.

        By default only feature-role nodes are emitted. Passing
        `include_observed=True` appends observed-role nodes, which lets
        variable-level measures see quantities the model never reads.
        """
        allowed = ("feature", "observed") if include_observed else ("feature",)
        return tuple(n for n in self.nodes if self.roles[n] in allowed)

    def model_feature_indices(self, include_observed: bool = False) -> FeatureIndexSet:
        """Positions (within the emitted columns) the model may read."""
        cols = self.data_columns(include_observed)
        return FeatureIndexSet.of(i for i, n in enumerate(cols) if self.roles[n] == "feature")

    def adjacency(self) -> np.ndarray:
        """A[i, j] = coefficient of edge nodes[j] -> nodes[i]."""
        index = {n: i for i, n in enumerate(self.nodes)}
        a = np.zeros((len(self.nodes), len(self.nodes)))
        for (parent, child), coeff in self.edges.items():
            a[index[child], index[parent]] = coeff
        return a

    def implied_covariance(self) -> np.ndarray:
        """(I - A)^-1 D (I - A)^-T over all nodes, in node order."""
        a = self.adjacency()
        d = np.diag([self.noise_std[n] ** 2 for n in self.nodes])
        inv = np.linalg.inv(np.eye(len(self.nodes)) - a)
        return inv @ d @ inv.T

    def implied_data_covariance(self, include_observed: bool = False) -> np.ndarray:
        """Implied covariance restricted to the emitted data columns."""
        idx = [self.nodes.index(n) for n in self.data_columns(include_observed)]
        return self.implied_covariance()[np.ix_(idx, idx)]

    def to_config(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [{"parent": p, "child": c, "coefficient": w} for (p, c), w in sorted(self.edges.items())],
            "noise_std": dict(self.noise_std),
            "roles": dict(self.roles),
        }

    @classmethod
    def from_config(cls, config: dict) -> "LinearSCM":
        edges = {(e["parent"], e["child"]): float(e["coefficient"]) for e in config["edges"]}
        return cls(
            nodes=tuple(config["nodes"]),
            edges=edges,
            noise_std={k: float(v) for k, v in config["noise_std"].items()},
            roles=dict(config["roles"]),
        )


def sample_scm(
    scm: LinearSCM, n: int, seed: int = 0, include_observed: bool = False
) -> tuple[DataMatrix, TargetVector]:
    """Ancestral sampling in topological order; deterministic per seed."""
    rng = np.random.default_rng(seed)
    values = {}
    for node in scm.nodes:
        noise = scm.noise_std[node] * rng.standard_normal(n)
        total = noise
        # sorted edge order keeps sampling bit-identical across
        # equivalent SCMs whose edge dicts were built in different orders
        for (parent, child), coeff in sorted(scm.edges.items()):
            if child == node:
                total = total + coeff * values[parent]
        values[node] = total
    columns = scm.data_columns(include_observed)
    data = DataMatrix(np.column_stack([values[c] for c in columns]), columns)
    return data, TargetVector(values[scm.supervision_node])


def d_separated(scm: LinearSCM, j, c, y) -> bool:
    """True iff every path between j and y is blocked given c."""
    j = {j} if isinstance(j, str) else set(j)
    c = set() if c is None else ({c} if isinstance(c, str) else set(c))
    y = {y} if isinstance(y, str) else set(y)
    return nx.is_d_separator(scm.graph(), j, y, c)


def biomarker_scm() -> LinearSCM:
    """Prostate-cancer toy system: a proxy feature leaks label bias.

    The historical label L depends on the true condition driver B and
    on P; the model only reads B and the cycling habit C, but C causes
    P, so P leaks in through C. The true condition Y equals B exactly.
    """
    return LinearSCM(
        nodes=("B", "C", "P", "Y", "L"),
        edges={("B", "Y"): 1.0, ("B", "L"): 1.0, ("P", "L"): 1.0, ("C", "P"): 1.0},
        noise_std={"B": 1.0, "C": 1.0, "P": 1.0, "Y": 0.0, "L": 1.0},
        roles={"B": "feature", "C": "feature", "P": "observed", "Y": "latent", "L": "label"},
    )


CENSUS_MEDIATORS = {
    "age": ("capital_gain", "nr_educ", "hours_pw"),
    "race": ("marriage_status", "occupation"),
    "sex": ("relationship", "work_class"),
}


def census_scm() -> LinearSCM:
    """Simulated income system with protected roots and mediators.

    age influences income only through its three mediators; race and
    sex have direct income edges in addition to their mediators.
    """
    roots = ("age", "race", "sex")
    mediators = tuple(m for ms in CENSUS_MEDIATORS.values() for m in ms)
    nodes = roots + mediators + ("income",)
    edges = {}
    for root, ms in CENSUS_MEDIATORS.items():
        for m in ms:
            edges[(root, m)] = 1.0
    for m in mediators:
        edges[(m, "income")] = 1.0
    edges[("race", "income")] = 1.0
    edges[("sex", "income")] = 1.0
    return LinearSCM(
        nodes=nodes,
        edges=edges,
        noise_std={n: 1.0 for n in nodes},
        roles={**{n: "feature" for n in roots + mediators}, "income": "target"},
    )
