from __future__ import annotations

from typing import TYPE_CHECKING, Protocol

import numpy as np

if TYPE_CHECKING:
    from his_isac.conic import SdpProblem, SdpSolution
    from his_isac.models import FarFieldPoint


class ArrayModel(Protocol):
    """Protocol for anything that maps a far-field point to a channel vector."""

    @property
    def dimension(self) -> int: ...

    def channel_vector(self, point: FarFieldPoint) -> np.ndarray: ...


class SdpSolverProtocol(Protocol):
    """Protocol for SDP back ends used by the transmit optimizer."""

    def solve(self, problem: SdpProblem, tol: float, max_iter: int) -> SdpSolution: ...
