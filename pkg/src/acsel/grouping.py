"""Correlated-group maps: which variables are treated as exchangeable with variable p."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError
from .geometry import StandardizedDesign

_EPS = 1e-12


@dataclass(frozen=True)
class GroupMap:
    """``groups[p]`` is the sorted index array of variables grouped with ``p``."""

    c0: float
    groups: tuple[np.ndarray, ...]
    method: str = "naive"

    @property
    def n_vars(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    def membership(self) -> np.ndarray:
        """Boolean P x P matrix, column p flags the members of ``groups[p]``."""
        m = np.zeros((self.n_vars, self.n_vars), dtype=bool)
        for p, g in enumerate(self.groups):
            m[g, p] = True
        return m

    def all_singletons(self) -> bool:
        return bool(np.all(self.sizes == 1))


def correlation(sd: StandardizedDesign) -> np.ndarray:
    c = sd.xs.T @ sd.xs
    c = np.clip((c + c.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return c


def _check_c0(c0):
    if not 0.0 <= c0 <= 1.0:
        raise ValidationError(f"c0 must lie in [0, 1], got {c0}")


def _from_membership(m: np.ndarray, c0: float, method: str) -> GroupMap:
    return GroupMap(float(c0), tuple(np.flatnonzero(m[:, p]) for p in range(m.shape[1])), method)


def group_naive(c: np.ndarray, c0: float) -> GroupMap:
    """groups[p] = {p' : |c[p, p']| >= c0}, compared with a 1e-12 slack."""
    _check_c0(c0)
    m = np.abs(c) >= c0 - _EPS
    np.fill_diagonal(m, True)
    return _from_membership(m, c0, "naive")


def threshold_adjacency(c: np.ndarray, c0: float) -> np.ndarray:
    """Weighted adjacency keeping |c_ij| strictly above c0, zero diagonal."""
    _check_c0(c0)
    a = np.abs(c)
    a = np.where(a > c0, a, 0.0)
    np.fill_diagonal(a, 0.0)
    return a


def _label_propagation(adj: np.ndarray, seed: int) -> np.ndarray:
    import networkx as nx

    g = nx.from_numpy_array(adj)
    labels = np.empty(adj.shape[0], dtype=np.int64)
    communities = sorted((sorted(c) for c in nx.community.asyn_lpa_communities(g, weight="weight", seed=seed)))
    for k, members in enumerate(communities):
        labels[members] = k
    return labels


def group_community(c: np.ndarray, c0: float, algorithm: str = "components", seed: int = 0) -> GroupMap:
    """Partition variables into communities of the thresholded correlation graph.

    ``algorithm`` is ``"components"`` (connected components, deterministic and
    nested in c0) or ``"label_propagation"`` (weighted, seeded).
    """
    adj = threshold_adjacency(c, c0)
    if algorithm == "components":
        _, labels = connected_components(csr_matrix(adj), directed=False)
    elif algorithm == "label_propagation":
        labels = _label_propagation(adj, seed)
    else:
        raise ValidationError(f"unknown community algorithm {algorithm!r}")
    m = labels[:, None] == labels[None, :]
    return _from_membership(m, c0, "community")


def make_groups(c: np.ndarray, c0: float, method: str = "naive") -> GroupMap:
    if method == "naive":
        return group_naive(c, c0)
    if method == "community":
        return group_community(c, c0)
    if method == "community-lp":
        return group_community(c, c0, algorithm="label_propagation")
    raise ValidationError(f"unknown grouping method {method!r}")


def format_groups(gm: GroupMap) -> str:
    """One line per variable: ``p: m1,m2,...`` (0-based indices)."""
    return "".join(f"{p}: {','.join(map(str, g))}\n" for p, g in enumerate(gm.groups))


def parse_groups(text: str, c0: float = float("nan"), method: str = "naive") -> GroupMap:
    groups = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        head, _, tail = line.partition(":")
        if int(head) != len(groups):
            raise ValidationError(f"line {lineno}: expected variable {len(groups)}, got {head.strip()}")
        groups.append(np.array([int(t) for t in tail.split(",") if t.strip()], dtype=np.int64))
    return GroupMap(c0, tuple(groups), method)
