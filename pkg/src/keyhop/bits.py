"""Bitstrings, secret identities, and symbolic XOR expressions.

Every message the relay protocols exchange is an XOR of secret bitstrings.
This module keeps both layers in sync: concrete bits (BitString, KeyStore)
and their algebraic shadow (SymbolicExpr over SecretId terms), related by
KeyStore.evaluate.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "SecretKind",
    "SecretId",
    "tf_key",
    "p2p_key",
    "nonce",
    "parse_secret_name",
    "BitString",
    "random_bits",
    "SymbolicExpr",
    "KeyStore",
]


class SecretKind(Enum):
    """Relay-established key, adjacent-link key, or endpoint nonce."""

    TF_KEY = "K"
    P2P_KEY = "P"
    NONCE = "X"


@dataclass(frozen=True)
class SecretId:
    """Identity of one secret bitstring.

    Relay and adjacent-link keys name the two nodes that hold them, in path
    order. Nonces name their single owner, plus a path index when one owner
    draws a nonce per path.
    """

    kind: SecretKind
    ends: tuple[str, ...]
    path_index: int | None = None

    def __post_init__(self) -> None:
        if self.kind is SecretKind.NONCE:
            if len(self.ends) != 1:
                raise ValueError("a nonce has exactly one owner")
        else:
            if len(self.ends) != 2 or self.ends[0] == self.ends[1]:
                raise ValueError("a key joins two distinct nodes")
            if self.path_index is not None:
                raise ValueError("path_index is reserved for nonces")

    @property
    def name(self) -> str:
        if self.kind is SecretKind.NONCE:
            if self.path_index is None:
                return f"X[{self.ends[0]}]"
            return f"X[{self.ends[0]}@{self.path_index}]"
        return f"{self.kind.value}[{self.ends[0]},{self.ends[1]}]"

    def involves(self, label: str) -> bool:
        return label in self.ends

    def __str__(self) -> str:
        return self.name


def tf_key(a: str, b: str) -> SecretId:
    return SecretId(SecretKind.TF_KEY, (a, b))


def p2p_key(a: str, b: str) -> SecretId:
    return SecretId(SecretKind.P2P_KEY, (a, b))


def nonce(owner: str, path_index: int | None = None) -> SecretId:
    return SecretId(SecretKind.NONCE, (owner,), path_index)


_NAME_RE = re.compile(r"^([KPX])\[([^\[\]]+)\]$")


def parse_secret_name(text: str) -> SecretId:
    """Inverse of SecretId.name. Rejects anything else."""
    m = _NAME_RE.match(text)
    if m is None:
        raise ValueError(f"malformed secret id: {text!r}")
    kind = SecretKind(m.group(1))
    inner = m.group(2)
    if kind is SecretKind.NONCE:
        if "," in inner:
            raise ValueError(f"malformed secret id: {text!r}")
        owner, sep, idx = inner.partition("@")
        if not sep:
            return nonce(owner)
        if not idx.isdigit():
            raise ValueError(f"malformed secret id: {text!r}")
        return nonce(owner, int(idx))
    parts = inner.split(",")
    if len(parts) != 2:
        raise ValueError(f"malformed secret id: {text!r}")
    return SecretId(kind, (parts[0], parts[1]))


@dataclass(frozen=True)
class BitString:
    """An n-bit string, n >= 1, stored as an int with bit i at weight 2**i."""

    value: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("bit length must be at least 1")
        if not 0 <= self.value < (1 << self.n):
            raise ValueError("value out of range for bit length")

    @classmethod
    def zeros(cls, n: int) -> BitString:
        return cls(0, n)

    @classmethod
    def from01(cls, text: str) -> BitString:
        """Parse a string of 0/1 characters; the first character is bit 0."""
        if not text or set(text) - {"0", "1"}:
            raise ValueError("expected a nonempty string of 0s and 1s")
        value = 0
        for i, ch in enumerate(text):
            if ch == "1":
                value |= 1 << i
        return cls(value, len(text))

    def to01(self) -> str:
        return "".join("1" if self.bit(i) else "0" for i in range(self.n))

    @property
    def nbytes(self) -> int:
        return (self.n + 7) // 8

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(self.nbytes, "little")

    @classmethod
    def from_bytes(cls, data: bytes, n: int) -> BitString:
        if len(data) != (n + 7) // 8:
            raise ValueError("byte length does not match bit length")
        return cls(int.from_bytes(data, "little"), n)

    def to_hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_hex(cls, text: str, n: int) -> BitString:
        return cls.from_bytes(bytes.fromhex(text), n)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError("bit index out of range")
        return (self.value >> i) & 1

    def __xor__(self, other: BitString) -> BitString:
        if not isinstance(other, BitString):
            return NotImplemented
        if self.n != other.n:
            raise ValueError("cannot XOR bitstrings of different lengths")
        return BitString(self.value ^ other.value, self.n)

    def __str__(self) -> str:
        return self.to01()


def random_bits(n: int, rng: random.Random) -> BitString:
    """Draw n uniform bits from a seeded generator."""
    return BitString(rng.getrandbits(n), n)


@dataclass(frozen=True)
class SymbolicExpr:
    """An XOR of named secrets, kept as the set of terms with odd multiplicity."""

    terms: frozenset[SecretId] = frozenset()

    @classmethod
    def of(cls, *ids: SecretId) -> SymbolicExpr:
        acc: frozenset[SecretId] = frozenset()
        for sid in ids:
            acc = acc ^ frozenset((sid,))
        return cls(acc)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def sorted_terms(self) -> list[SecretId]:
        return sorted(self.terms, key=lambda s: s.name)

    def text(self) -> str:
        if self.is_zero:
            return "0"
        return "+".join(s.name for s in self.sorted_terms())

    def __xor__(self, other: SymbolicExpr) -> SymbolicExpr:
        if not isinstance(other, SymbolicExpr):
            return NotImplemented
        return SymbolicExpr(self.terms ^ other.terms)

    def __str__(self) -> str:
        return self.text()


class KeyStore:
    """Insert-once mapping from secret ids to bitstrings of one shared length."""

    def __init__(self, n: int) -> None:
        if n < 1:
            raise ValueError("key length must be at least 1")
        self.n = n
        self._values: dict[SecretId, BitString] = {}

    def add(self, sid: SecretId, value: BitString) -> None:
        if value.n != self.n:
            raise ValueError(f"{sid} has length {value.n}, store holds {self.n}-bit secrets")
        if sid in self._values:
            raise ValueError(f"duplicate secret id: {sid}")
        self._values[sid] = value

    def sample(self, sid: SecretId, rng: random.Random) -> BitString:
        value = random_bits(self.n, rng)
        self.add(sid, value)
        return value

    def __contains__(self, sid: SecretId) -> bool:
        return sid in self._values

    def __getitem__(self, sid: SecretId) -> BitString:
        try:
            return self._values[sid]
        except KeyError:
            raise KeyError(f"unknown secret id: {sid}") from None

    def __len__(self) -> int:
        return len(self._values)

    def ids(self) -> tuple[SecretId, ...]:
        """All ids in insertion order."""
        return tuple(self._values)

    def evaluate(self, expr: SymbolicExpr) -> BitString:
        """XOR the stored values of every term; the empty expression is all zeros."""
        acc = BitString.zeros(self.n)
        for sid in expr.terms:
            acc = acc ^ self[sid]
        return acc
