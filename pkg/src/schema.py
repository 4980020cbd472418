# JSON documents written by the command line

from pydantic import BaseModel
from typing import Dict, List, Optional, Union, Any

# floats that may be infinite are emitted as the string "infinite"
Number = Union[float, str]


class RunManifest(BaseModel):
    """Provenance for one `simulate` run; outputs maps file name -> sha256."""
    tool_version: str
    command: str = "simulate"
    config: Dict[str, Any]
    seed: int
    timestamp: str
    outputs: Dict[str, str] = {}


class OptimizeReport(BaseModel):
    case: Optional[int] = None
    n_sensors: int
    n_anchors: int
    dim: int = 2
    best_agdop: float
    lb: Number
    positions: List[List[float]]
    best_restart: int
    restarts: int
    singular_restarts: int = 0
    evaluations: int = 0
    uniform_angles_gdop: Optional[Number] = None


class LocateReport(BaseModel):
    converged: bool
    iterations: int
    reason: str
    singular: bool = False
    diverged: bool = False
    residual_norm: Number
    step_norms: List[float] = []
    positions: List[List[float]]
    synthetic: bool = False
    error_norm: Optional[float] = None
