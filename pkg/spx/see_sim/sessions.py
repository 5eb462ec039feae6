"""Granted sessions, sealed blobs, host spill stores and the enclave session table."""

import json
import logging
import re
import threading
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional

from ..crypto_core import NONCE_SIZE, SymmetricKey
from ..exceptions import NotFound

logger = logging.getLogger(__name__)

# Fixed in-enclave footprint of one session, so caps can be stated in sessions.
SESSION_SLOT_BYTES = 256

_SAFE_ID = re.compile(r"^[A-Za-z0-9_.-]{1,128}$")


@dataclass(frozen=True)
class SpxSession:
    """Session granted to an edge function.

    ``session_key`` protects client-to-server traffic. ``peer_key`` is set for
    protocols with one key per direction (Noise transport) and protects
    server-to-client traffic.
    """

    session_id: str
    protocol_id: str
    session_key: SymmetricKey
    client_id: str
    server_id: str
    peer_key: Optional[SymmetricKey] = None
    resume_blob: Optional[bytes] = None

    def to_dict(self) -> Dict[str, Optional[str]]:
        return {
            "session_id": self.session_id,
            "protocol_id": self.protocol_id,
            "session_key": self.session_key.bytes.hex(),
            "client_id": self.client_id,
            "server_id": self.server_id,
            "peer_key": self.peer_key.bytes.hex() if self.peer_key else None,
            "resume_blob": self.resume_blob.hex() if self.resume_blob is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Optional[str]]) -> "SpxSession":
        return cls(
            session_id=data["session_id"],
            protocol_id=data["protocol_id"],
            session_key=SymmetricKey(bytes.fromhex(data["session_key"])),
            client_id=data["client_id"],
            server_id=data["server_id"],
            peer_key=SymmetricKey(bytes.fromhex(data["peer_key"])) if data.get("peer_key") else None,
            resume_blob=bytes.fromhex(data["resume_blob"]) if data.get("resume_blob") is not None else None,
        )

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")

    @classmethod
    def from_json(cls, data: bytes) -> "SpxSession":
        return cls.from_dict(json.loads(data.decode("utf-8")))


@dataclass(frozen=True)
class SealedBlob:
    """Session state encrypted under an enclave sealing key."""

    ciphertext: bytes
    nonce: bytes
    aad: bytes

    def __post_init__(self):
        if len(self.nonce) != NONCE_SIZE:
            raise ValueError(f"sealing nonce must be {NONCE_SIZE} bytes")

    @property
    def session_id(self) -> str:
        return self.aad.decode("utf-8")

    def to_bytes(self) -> bytes:
        """On-disk format: nonce followed by ciphertext."""
        return self.nonce + self.ciphertext

    @classmethod
    def from_bytes(cls, data: bytes, session_id: str) -> "SealedBlob":
        return cls(
            ciphertext=bytes(data[NONCE_SIZE:]),
            nonce=bytes(data[:NONCE_SIZE]),
            aad=session_id.encode("utf-8"),
        )


def check_session_id(session_id: str) -> str:
    if not _SAFE_ID.match(session_id):
        raise ValueError(f"session id {session_id!r} is not a safe file name")
    return session_id


class HostStore(ABC):
    """Untrusted host storage for spilled sessions."""

    @abstractmethod
    def store(self, blob: SealedBlob) -> None:
        ...

    @abstractmethod
    def load(self, session_id: str) -> SealedBlob:
        """Raises NotFound."""

    @abstractmethod
    def delete(self, session_id: str) -> None:
        ...

    @abstractmethod
    def __contains__(self, session_id: str) -> bool:
        ...

    @abstractmethod
    def __len__(self) -> int:
        ...

    @abstractmethod
    def raw_items(self) -> Iterator[bytes]:
        """Every stored blob exactly as the host sees it."""


class MemoryHostStore(HostStore):
    def __init__(self):
        self._blobs: Dict[str, bytes] = {}

    def store(self, blob: SealedBlob) -> None:
        self._blobs[check_session_id(blob.session_id)] = blob.to_bytes()

    def load(self, session_id: str) -> SealedBlob:
        try:
            return SealedBlob.from_bytes(self._blobs[session_id], session_id)
        except KeyError:
            raise NotFound(session_id) from None

    def delete(self, session_id: str) -> None:
        self._blobs.pop(session_id, None)

    def __contains__(self, session_id: str) -> bool:
        return session_id in self._blobs

    def __len__(self) -> int:
        return len(self._blobs)

    def raw_items(self) -> Iterator[bytes]:
        return iter(list(self._blobs.values()))


class DirectoryHostStore(HostStore):
    """One file per session, named by session id, holding ``nonce || ciphertext``."""

    def __init__(self, directory: str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.directory / check_session_id(session_id)

    def store(self, blob: SealedBlob) -> None:
        self._path(blob.session_id).write_bytes(blob.to_bytes())

    def load(self, session_id: str) -> SealedBlob:
        path = self._path(session_id)
        if not path.is_file():
            raise NotFound(session_id)
        return SealedBlob.from_bytes(path.read_bytes(), session_id)

    def delete(self, session_id: str) -> None:
        path = self._path(session_id)
        if path.exists():
            path.unlink()

    def __contains__(self, session_id: str) -> bool:
        return _SAFE_ID.match(session_id) is not None and self._path(session_id).is_file()

    def __len__(self) -> int:
        return sum(1 for path in self.directory.iterdir() if path.is_file())

    def raw_items(self) -> Iterator[bytes]:
        for path in sorted(self.directory.iterdir()):
            if path.is_file():
                yield path.read_bytes()


class SessionTable:
    """LRU session map with a memory cap; overflow is sealed to the host store.

    Args:
        seal: enclave sealing function
        unseal: enclave unsealing function
        memory_cap_bytes: resident budget; ``None`` means unbounded
        host_store: where evicted sessions go
    """

    def __init__(
        self,
        seal: Callable[[SpxSession], SealedBlob],
        unseal: Callable[[SealedBlob], SpxSession],
        memory_cap_bytes: Optional[int] = None,
        host_store: Optional[HostStore] = None,
        slot_bytes: int = SESSION_SLOT_BYTES,
    ):
        if memory_cap_bytes is not None and memory_cap_bytes < 0:
            raise ValueError("memory cap must be non-negative")
        self._seal = seal
        self._unseal = unseal
        self.memory_cap_bytes = memory_cap_bytes
        self.host_store = host_store if host_store is not None else MemoryHostStore()
        self.slot_bytes = slot_bytes
        self._resident: "OrderedDict[str, SpxSession]" = OrderedDict()
        self._lock = threading.RLock()
        self.spill_count = 0
        self.unseal_count = 0

    @property
    def resident_bytes(self) -> int:
        return len(self._resident) * self.slot_bytes

    def resident_ids(self) -> List[str]:
        with self._lock:
            return list(self._resident)

    def _evict(self) -> None:
        if self.memory_cap_bytes is None:
            return
        while self._resident and self.resident_bytes > self.memory_cap_bytes:
            session_id, session = self._resident.popitem(last=False)
            self.host_store.store(self._seal(session))
            self.spill_count += 1
            logger.debug(f"Spilled session {session_id} to host store")

    def put(self, session: SpxSession) -> None:
        check_session_id(session.session_id)
        with self._lock:
            self.host_store.delete(session.session_id)
            self._resident[session.session_id] = session
            self._resident.move_to_end(session.session_id)
            self._evict()

    def get(self, session_id: str) -> SpxSession:
        with self._lock:
            if session_id in self._resident:
                self._resident.move_to_end(session_id)
                return self._resident[session_id]
            if session_id not in self.host_store:
                raise NotFound(session_id)
            session = self._unseal(self.host_store.load(session_id))
            self.unseal_count += 1
            self.host_store.delete(session_id)
            self._resident[session_id] = session
            self._evict()
            return session

    def __contains__(self, session_id: str) -> bool:
        with self._lock:
            return session_id in self._resident or session_id in self.host_store

    def __len__(self) -> int:
        with self._lock:
            return len(self._resident) + len(self.host_store)
