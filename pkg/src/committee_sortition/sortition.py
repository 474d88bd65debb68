"""Binomial committee sortition.

A user holding ``r`` resource units receives ``Binomial(r, p)`` committee
seats ("sub-users") with ``p = v_e / R``. This is the only per-user rule
for which splitting or merging holdings leaves the seat distribution
unchanged, and its expectation ``p * r`` is linear in the holding.

The verifiable path (``sortition_select`` / ``sortition_verify``) derives
the uniform draw from a deterministic Ed25519 signature over the round
seed and role, so anyone with the public key can recheck the seat count.
This is a stand-in, not a VRF: a key holder using a non-deterministic
signer could grind for favourable outputs.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from . import kernels
from .errors import ParameterError

_KEY_DOMAIN = b"committee-sortition/key"
_U_DOMAIN = b"committee-sortition/u"


def threshold_count(t: float, v_e: float) -> int:
    """Integer vote threshold ``ceil(t * v_e)``.

    Products that land within 1e-9 of an integer are snapped first, so
    0.7 * 4000 gives 2800 rather than 2801.
    """
    x = t * v_e
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, abs(x)):
        return int(nearest)
    return math.ceil(x)


@dataclass(frozen=True)
class MechanismParams:
    v_e: float
    F: float
    t: float
    R: int

    def __post_init__(self):
        if not self.v_e > 0:
            raise ParameterError(f"v_e must be positive, got {self.v_e}")
        if not 0 < self.F < 1:
            raise ParameterError(f"F must lie in (0, 1), got {self.F}")
        if not 0 < self.t < 1:
            raise ParameterError(f"t must lie in (0, 1), got {self.t}")
        if int(self.R) != self.R or self.R < 1:
            raise ParameterError(f"R must be a positive integer, got {self.R}")
        if self.v_e > self.R:
            raise ParameterError(
                f"selection probability v_e/R = {self.v_e / self.R} exceeds 1"
            )

    @property
    def p(self) -> float:
        return self.v_e / self.R

    @property
    def t_h(self) -> int:
        return threshold_count(self.t, self.v_e)


@dataclass(frozen=True)
class User:
    resource: int
    honest: bool = True

    def __post_init__(self):
        if int(self.resource) != self.resource or self.resource < 0:
            raise ParameterError(f"resource must be a non-negative integer, got {self.resource}")


@dataclass
class Population:
    users: list[User] = field(default_factory=list)

    @classmethod
    def from_aggregate(cls, R: int, c: float, n_users: int, rule: str = "even", seed: int = 0):
        """Build a population with ``R_h = round(c * R)`` honest resources.

        ``round(c * n_users)`` users are honest (at least one when
        ``R_h > 0``, at most ``n_users - 1`` when ``R_m > 0``). Each side's
        resources are spread over its users with ``split_resource``.
        """
        if n_users < 1 or R < 1:
            raise ParameterError("aggregate population needs R >= 1 and n_users >= 1")
        if not 0 <= c <= 1:
            raise ParameterError(f"c must lie in [0, 1], got {c}")
        r_h = round(c * R)
        r_m = R - r_h
        n_h = round(c * n_users)
        if r_h > 0:
            n_h = max(n_h, 1)
        if r_m > 0:
            n_h = min(n_h, n_users - 1)
        if r_h > 0 and r_m > 0 and n_users < 2:
            raise ParameterError("a mixed population needs at least two users")
        n_m = n_users - n_h
        rng = np.random.default_rng(seed)
        users = [User(r, True) for r in split_resource(r_h, n_h, rule, rng)] if n_h else []
        users += [User(r, False) for r in split_resource(r_m, n_m, rule, rng)] if n_m else []
        return cls(users)

    def __len__(self):
        return len(self.users)

    @property
    def resources(self) -> np.ndarray:
        return np.array([u.resource for u in self.users], dtype=np.int64)

    @property
    def honest_mask(self) -> np.ndarray:
        return np.array([u.honest for u in self.users], dtype=bool)

    @property
    def R(self) -> int:
        return sum(u.resource for u in self.users)

    @property
    def R_h(self) -> int:
        return sum(u.resource for u in self.users if u.honest)

    @property
    def R_m(self) -> int:
        return self.R - self.R_h

    @property
    def c(self) -> float:
        R = self.R
        return self.R_h / R if R else 0.0


def split_resource(total: int, parts: int, rule: str = "even", rng=None) -> list[int]:
    """Split ``total`` units into ``parts`` non-negative integers.

    ``even`` uses largest-remainder allocation (earlier parts take the
    remainder). ``random-composition`` draws a weak composition uniformly
    with stars and bars.
    """
    if parts < 1:
        raise ParameterError(f"parts must be >= 1, got {parts}")
    if total < 0:
        raise ParameterError(f"total must be >= 0, got {total}")
    if rule == "even":
        base, extra = divmod(total, parts)
        return [base + 1] * extra + [base] * (parts - extra)
    if rule == "random-composition":
        rng = np.random.default_rng() if rng is None else rng
        bars = np.sort(rng.choice(total + parts - 1, size=parts - 1, replace=False))
        edges = np.concatenate(([-1], bars, [total + parts - 1]))
        return [int(x) for x in np.diff(edges) - 1]
    raise ParameterError(f"unknown allocation rule {rule!r}")


@dataclass(frozen=True)
class CommitteeDraw:
    per_user_counts: tuple[int, ...]
    V_h: int
    V_m: int

    @property
    def V(self) -> int:
        return self.V_h + self.V_m


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"selection probability must lie in [0, 1], got {p}")


def expected_subusers(resource: int, params: MechanismParams) -> float:
    if resource < 0:
        raise ParameterError(f"resource must be >= 0, got {resource}")
    p = params.p
    if not 0 < p <= 1:
        raise ParameterError(f"selection probability {p} outside (0, 1]")
    return p * resource


def draw_subusers(resource: int, p: float, rng: np.random.Generator, size=None):
    """Binomial(resource, p) seat count(s) by exact inverse CDF of ``rng`` uniforms."""
    _check_p(p)
    if resource < 0:
        raise ParameterError(f"resource must be >= 0, got {resource}")
    if size is None:
        return kernels.binom_quantile(rng.random(), resource, p)
    return kernels.binom_quantile_many(rng.random(size), resource, p)


def inverse_binomial_cdf(u: float, n: int, p: float) -> int:
    """Smallest k with P(Binomial(n, p) <= k) > u."""
    if not 0.0 <= u < 1.0:
        raise ParameterError(f"u must lie in [0, 1), got {u}")
    _check_p(p)
    return kernels.binom_quantile(u, n, p)


def sample_committee(population: Population, params: MechanismParams, rng: np.random.Generator) -> CommitteeDraw:
    if population.R < 1:
        raise ParameterError("population holds no resources")
    p = params.p
    u = rng.random(len(population))
    counts = tuple(
        kernels.binom_quantile(float(x), user.resource, p) for x, user in zip(u, population.users)
    )
    v_h = sum(k for k, user in zip(counts, population.users) if user.honest)
    return CommitteeDraw(counts, v_h, sum(counts) - v_h)


@dataclass(frozen=True)
class SelectionProof:
    public_key: bytes
    seed: bytes
    role_tag: bytes
    digest: bytes
    count: int

    def to_bytes(self) -> bytes:
        out = bytearray()
        for chunk in (self.public_key, self.seed, self.role_tag, self.digest,
                      self.count.to_bytes(8, "big")):
            out += struct.pack(">I", len(chunk)) + chunk
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> SelectionProof:
        fields = []
        pos = 0
        for _ in range(5):
            if pos + 4 > len(data):
                raise ValueError("truncated proof")
            (size,) = struct.unpack_from(">I", data, pos)
            pos += 4
            if pos + size > len(data):
                raise ValueError("truncated proof field")
            fields.append(bytes(data[pos:pos + size]))
            pos += size
        if pos != len(data):
            raise ValueError("trailing bytes after proof")
        if len(fields[4]) != 8:
            raise ValueError("count field must be 8 bytes")
        return cls(*fields[:4], int.from_bytes(fields[4], "big"))


def _signing_key(secret_key: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(hashlib.sha256(_KEY_DOMAIN + secret_key).digest())


def _message(seed: bytes, role_tag: bytes) -> bytes:
    return struct.pack(">I", len(seed)) + seed + struct.pack(">I", len(role_tag)) + role_tag


def digest_uniform(digest: bytes) -> float:
    """Map a digest to [0, 1): leading 64 bits of SHA-256(digest), kept to 53."""
    x = int.from_bytes(hashlib.sha256(_U_DOMAIN + digest).digest()[:8], "big")
    return (x >> 11) * 2.0 ** -53


def public_key_for(secret_key: bytes) -> bytes:
    return _signing_key(secret_key).public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)


def sortition_select(secret_key: bytes, seed: bytes, role_tag: bytes, resource: int, p: float):
    """Deterministic seat count for one (key, round seed, role), with its proof."""
    if not seed:
        raise ValueError("seed must be non-empty")
    if resource < 0:
        raise ParameterError(f"resource must be >= 0, got {resource}")
    if not 0 < p <= 1:
        raise ParameterError(f"selection probability must lie in (0, 1], got {p}")
    sk = _signing_key(secret_key)
    digest = sk.sign(_message(seed, role_tag))
    count = kernels.binom_quantile(digest_uniform(digest), resource, p)
    pk = sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return count, SelectionProof(pk, bytes(seed), bytes(role_tag), digest, count)


def sortition_verify(proof, resource: int, p: float) -> bool:
    """Check a proof (object or canonical bytes). Malformed input yields False."""
    try:
        if isinstance(proof, (bytes, bytearray, memoryview)):
            proof = SelectionProof.from_bytes(bytes(proof))
        if not proof.seed or resource < 0 or not 0 < p <= 1:
            return False
        if not 0 <= proof.count <= resource:
            return False
        Ed25519PublicKey.from_public_bytes(proof.public_key).verify(
            proof.digest, _message(proof.seed, proof.role_tag)
        )
    except (ValueError, TypeError, AttributeError, InvalidSignature):
        return False
    return proof.count == kernels.binom_quantile(digest_uniform(proof.digest), resource, p)
