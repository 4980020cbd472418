import sys
from pathlib import Path

import numpy as np
import pytest

# This file lives at <project_root>/src/tests/conftest.py
THIS_FILE = Path(__file__).resolve()
PROJECT_ROOT = THIS_FILE.parents[2]

# Ensure project root is first so 'import src.*' resolves correctly
proj = str(PROJECT_ROOT)
if proj not in sys.path:
    sys.path.insert(0, proj)

from src.network import NetworkTopology, NodePositions  # noqa: E402


# Four-node chain: sensors 1..3, anchor 4, links (1,2), (2,3), (3,4)
CHAIN_LINKS = [(1, 2), (2, 3), (3, 4)]
CHAIN_COORDS = [(1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]


@pytest.fixture
def chain_topology() -> NetworkTopology:
    return NetworkTopology.from_one_based(3, 1, CHAIN_LINKS)


@pytest.fixture
def chain_positions() -> NodePositions:
    return NodePositions(np.array(CHAIN_COORDS))


@pytest.fixture
def corner_star():
    """One sensor at the square centre linked to the four corners."""
    topology = NetworkTopology(1, 4, ((0, 1), (0, 2), (0, 3), (0, 4)))
    positions = NodePositions(np.array([(0.5, 0.5), (0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]))
    return topology, positions


@pytest.fixture
def chain_instance_text() -> str:
    return "\n".join([
        "# four-node chain",
        "2 3 1",
        "1 0",
        "0 0",
        "0 1",
        "1 1",
        "1 2",
        "2 3",
        "3 4",
        "",
    ])


# The chain above has one anchor and K < d*N_S, so its F is singular. This
# variant keeps the chain and its coordinates but adds two anchors and links
# giving every sensor two non-parallel anchor directions.
SUPPORTED_CHAIN_LINKS = [(1, 2), (2, 3), (3, 4), (1, 4), (1, 5), (2, 5), (2, 6), (3, 6)]
SUPPORTED_CHAIN_COORDS = CHAIN_COORDS + [(-1.0, -1.0), (1.0, -1.0)]


@pytest.fixture
def supported_chain_topology() -> NetworkTopology:
    return NetworkTopology.from_one_based(3, 3, SUPPORTED_CHAIN_LINKS)


@pytest.fixture
def supported_chain_positions() -> NodePositions:
    return NodePositions(np.array(SUPPORTED_CHAIN_COORDS))
