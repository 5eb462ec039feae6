"""Overhead accounting over trace events.

Events only need ``src``, ``dst``, ``flight_id``, ``msg`` and ``byte_count``
attributes, so these helpers work on simulator traces and on recorded
loopback traffic alike.
"""

from collections import OrderedDict
from typing import Dict, Iterable, List

from ..see_sim import REPORT_SIZE
from .adapter import ProtocolAdapter


def _between(events: Iterable, a: str, b: str) -> List:
    pair = {a, b}
    return [e for e in events if {e.src, e.dst} == pair]


def link_bytes(events: Iterable, a: str, b: str) -> int:
    """Total encoded bytes exchanged between ``a`` and ``b``."""
    return sum(e.byte_count for e in _between(events, a, b))


def flights(events: Iterable, a: str, b: str) -> Dict[int, List]:
    grouped: Dict[int, List] = OrderedDict()
    for event in _between(events, a, b):
        grouped.setdefault(event.flight_id, []).append(event)
    return grouped


def extra_rtts(events: Iterable, edge: str, server: str) -> int:
    """Flights on the edge-server link that carry only SPX-internal frames."""
    return sum(
        1
        for group in flights(events, edge, server).values()
        if all(e.msg.is_spx_internal for e in group)
    )


def spx_bytes(events: Iterable, edge: str, server: str) -> int:
    """Bytes of SPX-internal frames on the edge-server link."""
    return sum(e.byte_count for e in _between(events, edge, server) if e.msg.is_spx_internal)


def expected_extra_bytes(adapter: ProtocolAdapter) -> int:
    """Closed form: two attestation reports plus the grant message."""
    return 2 * REPORT_SIZE + adapter.grant_message_size()
