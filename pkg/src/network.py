"""
Network model: topology (roles + links), node positions and degree metrics.

Nodes are 0-based internally with sensors first (0..N_S-1) and anchors last
(N_S..N-1). Files and messages use the 1-based numbering of the literature;
conversion happens in instance_io and in error messages only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from src.errors import TopologyError
from src.logging_config import setup_logger

logger = setup_logger(__name__)

Link = Tuple[int, int]


def _canonical(link: Sequence[int]) -> Link:
    a, b = int(link[0]), int(link[1])
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class NetworkTopology:
    """Node roles plus the link set. Pure graph, no coordinates.

    Links keep their construction order (row k of the geometry matrix is link k)
    and are stored as canonical (min, max) pairs. Duplicates and self-loops are
    kept as given so that validate_topology can report them.
    """

    n_sensors: int
    n_anchors: int
    links: Tuple[Link, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_sensors", int(self.n_sensors))
        object.__setattr__(self, "n_anchors", int(self.n_anchors))
        object.__setattr__(self, "links", tuple(_canonical(l) for l in self.links))
        if self.n_sensors < 0 or self.n_anchors < 0:
            raise TopologyError("node counts must be non-negative")

    @classmethod
    def from_one_based(cls, n_sensors: int, n_anchors: int, links: Iterable[Sequence[int]]) -> "NetworkTopology":
        return cls(n_sensors, n_anchors, tuple((int(i) - 1, int(j) - 1) for i, j in links))

    @property
    def n_nodes(self) -> int:
        return self.n_sensors + self.n_anchors

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_sensor_links(self) -> int:
        """K_S: links with both endpoints sensors."""
        return sum(1 for i, j in self.links if j < self.n_sensors)

    @property
    def n_anchor_links(self) -> int:
        """K_A: links joining a sensor and an anchor."""
        return sum(1 for i, j in self.links if i < self.n_sensors <= j)

    def link_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Endpoint index arrays (i_k, j_k), i_k < j_k."""
        if not self.links:
            empty = np.zeros(0, dtype=np.intp)
            return empty, empty.copy()
        arr = np.asarray(self.links, dtype=np.intp)
        return arr[:, 0].copy(), arr[:, 1].copy()

    def to_graph(self) -> nx.Graph:
        """networkx view with every node present (isolated ones included)."""
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.links)
        return g

    def to_one_based(self) -> List[Link]:
        return [(i + 1, j + 1) for i, j in self.links]


@dataclass(frozen=True)
class NodePositions:
    """Coordinates for every node, shape (N, d), sensors first. Read-only."""

    coords: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coords, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise TopologyError(f"coordinates must be an (N, d) array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def dim(self) -> int:
        return int(self.coords.shape[1])

    @property
    def n_nodes(self) -> int:
        return int(self.coords.shape[0])

    def sensors(self, n_sensors: int) -> np.ndarray:
        return self.coords[:n_sensors]

    def anchors(self, n_sensors: int) -> np.ndarray:
        return self.coords[n_sensors:]

    def distance(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.coords[i] - self.coords[j]))

    def direction(self, i: int, j: int) -> np.ndarray:
        """Unit vector v = (p_i - p_j) / r."""
        diff = self.coords[i] - self.coords[j]
        return diff / np.linalg.norm(diff)

    def link_distances(self, topology: NetworkTopology) -> np.ndarray:
        i, j = topology.link_arrays()
        return np.linalg.norm(self.coords[i] - self.coords[j], axis=1)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    link: Optional[Link] = None
    node: Optional[int] = None


@dataclass(frozen=True)
class DegreeSummary:
    avg_degree: float
    avg_sensor_degree: float
    avg_anchor_degree: float
    # (deg, deg_S, deg_A) for each sensor, shape (N_S, 3)
    per_node_degrees: np.ndarray = field(repr=False)

    @property
    def delta(self) -> float:
        return self.avg_degree

    @property
    def delta_s(self) -> float:
        return self.avg_sensor_degree

    @property
    def delta_a(self) -> float:
        return self.avg_anchor_degree


def validate_topology(topology: NetworkTopology) -> List[Violation]:
    """Return one Violation per broken structural rule; empty list means valid.

    Isolated sensors are legal (their DOP is reported singular) and only logged.
    """
    violations: List[Violation] = []
    n = topology.n_nodes
    seen = set()
    for i, j in topology.links:
        one_based = f"({i + 1},{j + 1})"
        if i < 0 or j >= n:
            violations.append(Violation("index out of range", f"link {one_based} references a node outside 1..{n}", link=(i, j)))
            continue
        if i == j:
            violations.append(Violation("self-loop", f"link {one_based} is a self-loop", link=(i, j)))
            continue
        if (i, j) in seen:
            violations.append(Violation("duplicate link", f"link {one_based} appears more than once", link=(i, j)))
            continue
        seen.add((i, j))
        if i >= topology.n_sensors:
            violations.append(Violation("anchor-to-anchor link", f"link {one_based} joins two anchors", link=(i, j)))

    if not violations and topology.n_sensors:
        touched = {node for link in topology.links for node in link}
        isolated = [s for s in range(topology.n_sensors) if s not in touched]
        if isolated:
            logger.warning(f"isolated sensors (1-based): {[s + 1 for s in isolated]}")
    return violations


def degree_summary(topology: NetworkTopology) -> DegreeSummary:
    """Average degree, sensor degree and anchor degree over sensor nodes."""
    n_s = topology.n_sensors
    if n_s == 0:
        raise TopologyError("degree summary needs at least one sensor")
    i, j = topology.link_arrays()
    sensor_pair = j < n_s
    anchor_pair = ~sensor_pair
    # a sensor-sensor link counts for both ends; an anchor link for its sensor end only
    deg_s = np.bincount(i[sensor_pair], minlength=n_s) + np.bincount(j[sensor_pair], minlength=n_s)
    deg_a = np.bincount(i[anchor_pair], minlength=n_s)
    deg_s = deg_s[:n_s]
    deg_a = deg_a[:n_s]
    per_node = np.column_stack([deg_s + deg_a, deg_s, deg_a]).astype(int)
    per_node.setflags(write=False)
    delta_s = float(deg_s.sum()) / n_s
    delta_a = float(deg_a.sum()) / n_s
    return DegreeSummary(
        avg_degree=delta_s + delta_a,
        avg_sensor_degree=delta_s,
        avg_anchor_degree=delta_a,
        per_node_degrees=per_node,
    )
