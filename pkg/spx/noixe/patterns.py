"""Handshake pattern table for the supported interactive Noise patterns.

Tokens use the Noise framework names. Each message is a direction and a
token list; pre-messages list the responder's static key when the initiator
is assumed to know it.

NN:
  -> e
  <- e, ee

NK:
  <- s
  ...
  -> e, es
  <- e, ee

XK:
  <- s
  ...
  -> e, es
  <- e, ee
  -> s, se

XX:
  -> e
  <- e, ee, s, es
  -> s, se

IK:
  <- s
  ...
  -> e, es, s, ss
  <- e, ee, se
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

from ..exceptions import UnsupportedPattern
from ..wire import Direction

INITIATOR = Direction.CLIENT_TO_SERVER
RESPONDER = Direction.SERVER_TO_CLIENT


class Token(str, Enum):
    E = "e"
    S = "s"
    EE = "ee"
    ES = "es"
    SE = "se"
    SS = "ss"

    @property
    def is_dh(self) -> bool:
        return len(self.value) == 2


@dataclass(frozen=True)
class MessagePattern:
    direction: Direction
    tokens: Tuple[Token, ...]

    @property
    def has_dh(self) -> bool:
        return any(t.is_dh for t in self.tokens)


@dataclass(frozen=True)
class HandshakePattern:
    name: str
    messages: Tuple[MessagePattern, ...]
    # Pre-message tokens for the initiator's and responder's static keys.
    initiator_pre: Tuple[Token, ...] = ()
    responder_pre: Tuple[Token, ...] = ()

    def __len__(self) -> int:
        return len(self.messages)

    def count(self, direction: Direction) -> int:
        return sum(1 for m in self.messages if m.direction is direction)

    @property
    def bind_index(self) -> int:
        """Index of the first message containing a DH token."""
        return next(i for i, m in enumerate(self.messages) if m.has_dh)

    @property
    def last_direction(self) -> Direction:
        return self.messages[-1].direction

    @property
    def needs_responder_static(self) -> bool:
        return Token.S in self.responder_pre

    @property
    def initiator_has_static(self) -> bool:
        return any(Token.S in m.tokens for m in self.messages if m.direction is INITIATOR)

    def expected_extra_rtts(self) -> int:
        """SPX-only flights on the edge-server link for this pattern.

        The bind is always its own flight. The grant rides on the server's
        final message only when that message is written after the bind.
        """
        final = len(self.messages) - 1
        grant_piggybacks = self.last_direction is RESPONDER and self.bind_index < final
        return 1 if grant_piggybacks else 2


def _msg(direction: Direction, *tokens: str) -> MessagePattern:
    return MessagePattern(direction, tuple(Token(t) for t in tokens))


PATTERNS: Dict[str, HandshakePattern] = {
    "NN": HandshakePattern(
        "NN",
        (_msg(INITIATOR, "e"), _msg(RESPONDER, "e", "ee")),
    ),
    "NK": HandshakePattern(
        "NK",
        (_msg(INITIATOR, "e", "es"), _msg(RESPONDER, "e", "ee")),
        responder_pre=(Token.S,),
    ),
    "XK": HandshakePattern(
        "XK",
        (_msg(INITIATOR, "e", "es"), _msg(RESPONDER, "e", "ee"), _msg(INITIATOR, "s", "se")),
        responder_pre=(Token.S,),
    ),
    "XX": HandshakePattern(
        "XX",
        (_msg(INITIATOR, "e"), _msg(RESPONDER, "e", "ee", "s", "es"), _msg(INITIATOR, "s", "se")),
    ),
    "IK": HandshakePattern(
        "IK",
        (_msg(INITIATOR, "e", "es", "s", "ss"), _msg(RESPONDER, "e", "ee", "se")),
        responder_pre=(Token.S,),
    ),
}


def pattern_by_name(name: str) -> HandshakePattern:
    """Raises UnsupportedPattern."""
    try:
        return PATTERNS[name.upper()]
    except KeyError:
        raise UnsupportedPattern(f"unsupported Noise pattern {name!r}; choose from {sorted(PATTERNS)}")


def find_pattern(name: str) -> Optional[HandshakePattern]:
    return PATTERNS.get(name)
