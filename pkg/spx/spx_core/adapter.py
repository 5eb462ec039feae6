"""Interface between the generic SPX engine and a concrete protocol."""

from abc import ABC, abstractmethod
from typing import Callable, Dict, List, Optional, Tuple

from ..crypto_core import SymmetricKey
from ..exceptions import ProtocolViolation
from ..see_sim import REPORT_SIZE, SPX_NONCE_SIZE
from ..wire import HEADER_SIZE, Direction, MsgType, WireMessage
from .messages import SpxOffer, SpxRequest, grant_message_bytes

_REQUEST_EXT_SIZE = SpxRequest(bytes(SPX_NONCE_SIZE)).to_extension().size
_OFFER_EXT_SIZE = SpxOffer.not_capable().to_extension().size


class ProtocolAdapter(ABC):
    """Protocol knowledge the edge needs to replicate and bind a handshake.

    Subclasses provide the expected message table, how to replicate
    handshake state from relayed bytes, where the bind point is, and how to
    install and use granted keys. Order checking against the table is done
    here.
    """

    protocol_id: str = ""

    def __init__(self):
        self._positions: Dict[Direction, int] = {d: 0 for d in Direction}

    @abstractmethod
    def expected_sequence(self) -> Dict[Direction, List[MsgType]]:
        """Vanilla handshake message types, per direction, in order."""

    @abstractmethod
    def offer_carrier(self) -> MsgType:
        """Server message type that carries the SPX response extension."""

    @abstractmethod
    def replicate(self, msg: WireMessage, direction: Direction) -> None:
        """Update replicated state with an SPX-free handshake message."""

    @abstractmethod
    def at_bind_point(self) -> bool:
        """True once the messages that precede the bind have been relayed."""

    @abstractmethod
    def channel_binding(self) -> bytes:
        """32-byte value both ends derive from the handshake at the bind point."""

    @abstractmethod
    def secret_size(self) -> int:
        """Size of the granted secret."""

    @abstractmethod
    def install_grant(self, secret: bytes) -> Tuple[SymmetricKey, Optional[SymmetricKey]]:
        """Adopt granted key material; returns (client-to-server key, server-to-client key).

        Raises:
            AuthFailure: the secret contradicts the replicated handshake
        """

    @abstractmethod
    def open_record(self, direction: Direction, payload: bytes) -> bytes:
        """Decrypt one application record after the grant."""

    def check_order(self, msg: WireMessage, direction: Direction) -> None:
        """Raises ProtocolViolation unless ``msg`` is next in ``direction``."""
        sequence = self.expected_sequence()[direction]
        position = self._positions[direction]
        if position >= len(sequence):
            raise ProtocolViolation(
                f"unexpected {msg.msg_type.name} {direction.arrow} after handshake messages"
            )
        if msg.msg_type is not sequence[position]:
            raise ProtocolViolation(
                f"expected {sequence[position].name} {direction.arrow}, got {msg.msg_type.name}"
            )
        self._positions[direction] = position + 1

    def handshake_done(self, direction: Direction) -> bool:
        return self._positions[direction] >= len(self.expected_sequence()[direction])

    @property
    def handshake_complete(self) -> bool:
        return all(self.handshake_done(d) for d in Direction)

    def grant_message_size(self) -> int:
        """SPX bytes on the edge-server link other than the two reports.

        Covers the attestation frame header, the grant frame minus its
        report, and the two piggybacked extensions.
        """
        grant_without_report = grant_message_bytes(self.secret_size()) - REPORT_SIZE
        return HEADER_SIZE + grant_without_report + _REQUEST_EXT_SIZE + _OFFER_EXT_SIZE

    def expected_extra_bytes(self) -> int:
        return 2 * REPORT_SIZE + self.grant_message_size()


# Builds an adapter for a connection whose first client message it recognises.
AdapterFactory = Callable[[WireMessage], Optional[ProtocolAdapter]]
