"""Communication supergraph and per-arc link availability.

The supergraph is the static set of all potentially usable links: a simple,
connected, undirected graph whose every edge {i, j} contributes two directed
arcs (i, j) and (j, i). Network realizations during a run are random directed
subgraphs of it, obtained by sampling each arc independently with its success
probability.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .errors import ConnectivityFailure, DomainError

Arc = tuple[int, int]
Edge = tuple[int, int]

MAX_CONNECT_RETRIES = 1000


class Supergraph:
    """Static topology over nodes ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of nodes (at least 1).
    edges : iterable of (int, int)
        Undirected edges; pairs are canonicalized to ``(min, max)``,
        duplicates rejected, self-edges rejected.
    positions : ndarray of shape (n, 2), optional
        Node coordinates in the unit square, kept when the graph was built
        geometrically so that distance-based failure models can be derived.
    """

    def __init__(self, n: int, edges: Iterable[Edge], positions=None):
        if n < 1:
            raise ValueError(f"node count must be >= 1, got {n}")
        canon = []
        seen = set()
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-edge ({i}, {j}) not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            e = (min(i, j), max(i, j))
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
            canon.append(e)
        self.n = int(n)
        self.edges: tuple[Edge, ...] = tuple(sorted(canon))
        if positions is not None:
            positions = np.asarray(positions, dtype=float)
            if positions.shape != (n, 2):
                raise ValueError(f"positions must have shape ({n}, 2)")
        self.positions = positions

        nbrs: list[list[int]] = [[] for _ in range(n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self.neighbors: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(v)) for v in nbrs
        )
        self.degrees = np.array([len(v) for v in self.neighbors], dtype=int)
        # Both orientations of every edge, in sorted order.
        self.arcs: tuple[Arc, ...] = tuple(
            sorted([(i, j) for i, j in self.edges] + [(j, i) for i, j in self.edges])
        )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_arcs(self) -> int:
        return len(self.arcs)

    def is_connected(self) -> bool:
        """Breadth-first reachability of every node from node 0."""
        seen = [False] * self.n
        seen[0] = True
        stack = [0]
        count = 1
        while stack:
            u = stack.pop()
            for v in self.neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.n

    def edge_distance(self, i: int, j: int) -> float:
        """Euclidean distance between endpoint positions."""
        if self.positions is None:
            raise ValueError("graph has no positions")
        return float(np.linalg.norm(self.positions[i] - self.positions[j]))

    def __repr__(self):
        return f"Supergraph(n={self.n}, edges={self.num_edges})"


def build_geometric(n: int, radius: float, seed: int,
                    max_retries: int = MAX_CONNECT_RETRIES) -> Supergraph:
    """Sample a connected random geometric graph on the unit square.

    Node positions are uniform on [0, 1]^2 and pairs closer than ``radius``
    are joined by an edge. Positions are resampled until the graph is
    connected, which preserves the geometric-graph distribution conditioned
    on connectivity.

    Raises
    ------
    ConnectivityFailure
        If no connected draw is found within ``max_retries`` attempts
        (the radius is too small for ``n``).
    """
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        pos = rng.random((n, 2))
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        ii, jj = np.nonzero(np.triu(dist < radius, k=1))
        g = Supergraph(n, list(zip(ii.tolist(), jj.tolist())), positions=pos)
        if g.is_connected():
            return g
    raise ConnectivityFailure(
        f"no connected geometric graph with n={n}, radius={radius} "
        f"after {max_retries} attempts"
    )


def failure_prob(distance: float, radius: float, scale: float) -> float:
    """Distance-based link *failure* probability ``scale * d^2 / r^2``.

    Longer links fail more often; at the connection radius the failure
    probability approaches ``scale``. The corresponding arc success
    probability is one minus this value.
    """
    if not (0 < scale < 1):
        raise DomainError(f"scale must lie in (0, 1), got {scale}")
    if not (0 <= distance < radius):
        raise DomainError(
            f"distance must satisfy 0 <= d < radius, got d={distance}, r={radius}"
        )
    return scale * distance ** 2 / radius ** 2


class FailureModel:
    """Per-arc Bernoulli availability, i.i.d. across slots.

    Every arc ``(i, j)`` carries a success probability in (0, 1]; draws for
    different arcs and different slots are independent. ``mode`` is either
    ``"independent"`` or ``"always_on"`` (all probabilities exactly 1).
    """

    def __init__(self, graph: Supergraph,
                 success: float | Mapping[Arc, float] = 1.0,
                 mode: str = "independent"):
        if mode not in ("independent", "always_on"):
            raise ValueError(f"unknown failure mode {mode!r}")
        if isinstance(success, Mapping):
            probs = {arc: float(success[arc]) for arc in graph.arcs}
        else:
            probs = {arc: float(success) for arc in graph.arcs}
        for arc, p in probs.items():
            if not (0 < p <= 1):
                raise ValueError(f"success probability for arc {arc} must be "
                                 f"in (0, 1], got {p}")
            if mode == "always_on" and p != 1.0:
                raise ValueError("always_on mode requires p = 1 on every arc")
        self.graph = graph
        self.mode = mode
        self._probs = probs
        self._arcs = graph.arcs
        self._p_array = np.array([probs[a] for a in self._arcs])

    @classmethod
    def always_on(cls, graph: Supergraph) -> "FailureModel":
        return cls(graph, 1.0, mode="always_on")

    @classmethod
    def uniform(cls, graph: Supergraph, p: float) -> "FailureModel":
        return cls(graph, p)

    @classmethod
    def from_distance(cls, graph: Supergraph, radius: float,
                      scale: float) -> "FailureModel":
        """Success probabilities ``1 - scale * d_ij^2 / r^2`` from positions."""
        probs = {}
        for i, j in graph.arcs:
            probs[(i, j)] = 1.0 - failure_prob(graph.edge_distance(i, j),
                                               radius, scale)
        return cls(graph, probs)

    @property
    def spatially_independent(self) -> bool:
        """Whether draws for different arcs in one slot are independent."""
        return self.mode in ("independent", "always_on")

    def success_prob(self, arc: Arc) -> float:
        return self._probs[arc]

    def sample(self, rng: np.random.Generator) -> dict[Arc, bool]:
        """One slot of per-arc availability."""
        if self.mode == "always_on":
            return {arc: True for arc in self._arcs}
        draws = rng.random(len(self._arcs)) < self._p_array
        return dict(zip(self._arcs, draws.tolist()))


def sample_adjacency(model: FailureModel,
                     rng: np.random.Generator) -> dict[Arc, bool]:
    """Sample one slot of arc availability from ``model``."""
    return model.sample(rng)


def save_network(path, graph: Supergraph, failures: FailureModel) -> None:
    """Write graph + failure model as text: node count, then one line per
    edge ``i j p_ij p_ji``."""
    lines = [f"{graph.n}"]
    for i, j in graph.edges:
        pij = failures.success_prob((i, j))
        pji = failures.success_prob((j, i))
        lines.append(f"{i} {j} {pij:.17g} {pji:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path) -> tuple[Supergraph, FailureModel]:
    """Read a network written by :func:`save_network`.

    Positions are not part of the format, so the returned graph has none;
    the failure mode is ``always_on`` when every probability equals 1.
    """
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not raw:
        raise ValueError(f"{path}: empty network file")
    n = int(raw[0])
    edges = []
    probs: dict[Arc, float] = {}
    for ln in raw[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ValueError(f"{path}: malformed edge line {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        edges.append((i, j))
        probs[(i, j)] = float(parts[2])
        probs[(j, i)] = float(parts[3])
    graph = Supergraph(n, edges)
    mode = "always_on" if all(p == 1.0 for p in probs.values()) else "independent"
    return graph, FailureModel(graph, probs if probs else 1.0, mode=mode)
