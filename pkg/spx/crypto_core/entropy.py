"""Seedable byte source shared by every component that needs randomness."""

import hashlib
import secrets
from typing import Optional

import numpy as np


class Entropy:
    """Random bytes, deterministic when seeded.

    Seeded instances draw from a numpy ``Generator`` so a whole simulation can be
    replayed from one integer. Unseeded instances use ``secrets``.
    """

    def __init__(self, seed: Optional[int] = None):
        self.seed = seed
        self._rng = np.random.default_rng(seed) if seed is not None else None

    def bytes(self, n: int) -> bytes:
        """Return ``n`` random bytes."""
        if n < 0:
            raise ValueError("byte count must be non-negative")
        if self._rng is None:
            return secrets.token_bytes(n)
        return self._rng.bytes(n)

    def spawn(self, label: str) -> "Entropy":
        """Derive an independent child stream named by ``label``.

        Children depend only on (seed, label), so the order in which
        components draw randomness never changes another component's keys.
        """
        if self.seed is None:
            return Entropy()
        digest = hashlib.sha256(f"{self.seed}:{label}".encode("utf-8")).digest()
        return Entropy(int.from_bytes(digest[:8], "big"))

    def __repr__(self) -> str:
        return f"Entropy(seed={self.seed!r})"
