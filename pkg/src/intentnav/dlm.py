from __future__ import annotations

from enum import Enum


class DLM(str, Enum):
    """Discretized local move. The first four condition the controller; the
    rest are emitted only at topological transitions."""

    GO_FORWARD = "GoForward"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"
    STOP = "Stop"
    UPSTAIRS = "Upstairs"
    LINKWAY = "Linkway"
    TAKE_ELEVATOR = "TakeElevator"

    @property
    def code(self) -> int:
        return _CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "DLM":
        return _BY_CODE[int(code)]

    @property
    def is_core(self) -> bool:
        return self in CORE_DLM

    def mirrored(self) -> "DLM":
        if self is DLM.TURN_LEFT:
            return DLM.TURN_RIGHT
        if self is DLM.TURN_RIGHT:
            return DLM.TURN_LEFT
        return self


CORE_DLM = (DLM.GO_FORWARD, DLM.TURN_LEFT, DLM.TURN_RIGHT, DLM.STOP)
_CODES = {m: i for i, m in enumerate(DLM)}
_BY_CODE = {i: m for m, i in _CODES.items()}
