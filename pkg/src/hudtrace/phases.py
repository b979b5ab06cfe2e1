"""Game phase vocabulary.

A round moves Lobby -> Jump, then StormBrewing and Contraction alternate
until the round ends.  ``Unknown`` marks samples whose phase icon could not
be classified; it is never part of a schedule.
"""

from __future__ import annotations

import enum


class Phase(enum.Enum):
    LOBBY = "Lobby"
    JUMP = "Jump"
    STORM_BREWING = "StormBrewing"
    CONTRACTION = "Contraction"
    UNKNOWN = "Unknown"

    def __str__(self) -> str:
        return self.value


IN_GAME_PHASES = frozenset({Phase.JUMP, Phase.STORM_BREWING, Phase.CONTRACTION})
ATLAS_PHASES = (Phase.LOBBY, Phase.JUMP, Phase.STORM_BREWING, Phase.CONTRACTION)


def parse_phase(text: str) -> Phase:
    for p in Phase:
        if p.value == text:
            return p
    raise ValueError(f"unknown phase name: {text!r}")
