from __future__ import annotations

from dataclasses import dataclass
from typing import Any

NONE, SUCCESS, FAILURE = "none", "success", "failure"


class EpisodeFinished(RuntimeError):
    pass


@dataclass(frozen=True)
class StepOutcome:
    next_state: Any
    reward: float
    terminal: str = NONE

    @property
    def done(self) -> bool:
        return self.terminal != NONE
