"""
spx - edge-ready extensions to end-to-end secure protocols

A desk-scale SPX: a simulated shielded execution environment, the generic
SPX operations, the TLX and NoiXe handshakes, an adversarial network
simulator and a benchmark harness.
"""

__version__ = "0.1.0"

from .config import Config
from .exceptions import SpxError

__all__ = ["Config", "SpxError"]
