"""Coalition secrecy analysis.

A coalition of corrupted nodes sees every transmitted payload plus the keys
its members hold. Over GF(2) a target expression is recoverable exactly when
it lies in the span of those observations, so secrecy is decided by
elimination with combination tracking (which also yields the recovery
recipe). brute_force_secrecy is the independent check: it sweeps the full
truth table of secret assignments at n=1 and inspects the conditional
distribution of the target given the adversary's view. The two must always
agree; tests hold them against each other.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from itertools import combinations, product
from math import log2
from typing import Callable, Iterable

import numpy as np

from .bits import BitString, SecretId, SymbolicExpr
from .protocol import ProtocolTrace, Variant, run
from .topology import NodeId, build_multipath

__all__ = [
    "Status",
    "Coalition",
    "AdversaryView",
    "RecoveryItem",
    "SecrecyVerdict",
    "final_key_expr",
    "view_of",
    "is_recoverable",
    "recover_bits",
    "min_breaking_coalitions",
    "coalition_rows",
    "coalition_report_csv",
    "brute_force_secrecy",
    "ACTIVE_STRATEGIES",
    "active_attack_leakage",
    "max_active_attack_leakage",
    "collusion_grid",
    "grid_csv",
]

ENUMERATION_CAP = 20  # 2^20 subsets is the most exhaustive search we allow


class Status(Enum):
    SECURE = "SECURE"
    BROKEN = "BROKEN"


@dataclass(frozen=True)
class Coalition:
    """A set of corrupted nodes. Non-collaborating corruption is modeled by
    evaluating each member as its own singleton coalition."""

    members: frozenset[NodeId]
    collaborating: bool = True

    @classmethod
    def of(cls, *nodes: NodeId) -> Coalition:
        return cls(frozenset(nodes))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(nd.label for nd in self.members))

    def describe(self) -> str:
        return "+".join(self.labels) if self.members else "(empty)"

    def singletons(self) -> tuple[Coalition, ...]:
        return tuple(Coalition.of(nd) for nd in sorted(self.members, key=lambda n: n.label))


@dataclass(frozen=True)
class AdversaryView:
    """What a coalition sees: all payload expressions, plus the secrets its
    members hold (keys they are an end of, nonces they own)."""

    observed: tuple[tuple[str, SymbolicExpr], ...]  # (message label, expression)
    known: tuple[SecretId, ...]


@dataclass(frozen=True)
class RecoveryItem:
    """One ingredient of a recovery: a transmitted message or a held secret."""

    kind: str  # "message" or "secret"
    message_index: int | None = None
    secret: SecretId | None = None

    @property
    def label(self) -> str:
        if self.kind == "message":
            return f"M{self.message_index}"
        assert self.secret is not None
        return self.secret.name


@dataclass(frozen=True)
class SecrecyVerdict:
    target: SymbolicExpr
    status: Status
    recovery: tuple[RecoveryItem, ...] | None = None

    @property
    def recovery_labels(self) -> tuple[str, ...] | None:
        if self.recovery is None:
            return None
        return tuple(item.label for item in self.recovery)


def final_key_expr(trace: ProtocolTrace) -> SymbolicExpr:
    """The key both endpoints output: the XOR of all path nonces."""
    return SymbolicExpr.of(*trace.nonce_ids)


def view_of(trace: ProtocolTrace, coalition: Coalition) -> AdversaryView:
    topo_labels = {nd.label for nd in trace.topology.nodes}
    for nd in coalition.members:
        if nd.label not in topo_labels:
            raise ValueError(f"coalition member {nd.label} is not in this topology")
        if trace.topology.node(nd.label).is_endpoint:
            raise ValueError(f"{nd.label} is an endpoint, not a corruptible intermediary")
    member_labels = {nd.label for nd in coalition.members}
    observed = tuple((f"M{msg.index}", msg.expr) for msg in trace.messages)
    known = tuple(
        sid
        for sid in sorted(trace.store.ids(), key=lambda s: s.name)
        if any(end in member_labels for end in sid.ends)
    )
    return AdversaryView(observed, known)


def _eliminate(
    rows: list[tuple[RecoveryItem, int]], ncols: int
) -> dict[int, tuple[int, list[RecoveryItem]]]:
    """Row-reduce over GF(2), keeping for each pivot column the reduced row
    and the exact combination of input rows that produced it."""
    pivots: dict[int, tuple[int, list[RecoveryItem]]] = {}
    for item, mask in rows:
        combo = [item]
        while mask:
            col = (mask & -mask).bit_length() - 1
            if col in pivots:
                pmask, pcombo = pivots[col]
                mask ^= pmask
                combo = [it for it in combo if it not in pcombo] + [
                    it for it in pcombo if it not in combo
                ]
            else:
                pivots[col] = (mask, combo)
                break
    return pivots


def is_recoverable(view: AdversaryView, target: SymbolicExpr) -> SecrecyVerdict:
    """Decide whether the view linearly determines the target.

    BROKEN comes with the deterministic recovery set: the unique combination
    found by reducing messages first (in transmission order), then held
    secrets (by name), pivoting on the lowest remaining column.
    """
    atoms: set[SecretId] = set(target.terms)
    for _, expr in view.observed:
        atoms |= expr.terms
    atoms |= set(view.known)
    order = {sid: i for i, sid in enumerate(sorted(atoms, key=lambda s: s.name))}

    def mask_of(terms: Iterable[SecretId]) -> int:
        mask = 0
        for sid in terms:
            mask |= 1 << order[sid]
        return mask

    rows: list[tuple[RecoveryItem, int]] = []
    for label, expr in view.observed:
        rows.append(
            (RecoveryItem("message", message_index=int(label[1:])), mask_of(expr.terms))
        )
    for sid in view.known:
        rows.append((RecoveryItem("secret", secret=sid), 1 << order[sid]))
    pivots = _eliminate(rows, len(order))

    residual = mask_of(target.terms)
    combo: list[RecoveryItem] = []
    while residual:
        col = (residual & -residual).bit_length() - 1
        if col not in pivots:
            return SecrecyVerdict(target, Status.SECURE)
        pmask, pcombo = pivots[col]
        residual ^= pmask
        combo = [it for it in combo if it not in pcombo] + [
            it for it in pcombo if it not in combo
        ]
    ordered = sorted(
        combo,
        key=lambda it: (0, it.message_index) if it.kind == "message" else (1, it.label),
    )
    return SecrecyVerdict(target, Status.BROKEN, tuple(ordered))


def recover_bits(trace: ProtocolTrace, verdict: SecrecyVerdict) -> BitString:
    """XOR the verdict's recovery set over the concrete run; equals the
    target's value whenever the verdict is BROKEN."""
    if verdict.recovery is None:
        raise ValueError("nothing to recover from a SECURE verdict")
    acc = BitString.zeros(trace.n)
    for item in verdict.recovery:
        if item.kind == "message":
            acc = acc ^ trace.messages[item.message_index].bits
        else:
            assert item.secret is not None
            acc = acc ^ trace.store[item.secret]
    return acc


def _breaks(trace: ProtocolTrace, members: frozenset[NodeId], target: SymbolicExpr) -> bool:
    return is_recoverable(view_of(trace, Coalition(members)), target).status is Status.BROKEN


def min_breaking_coalitions(
    trace: ProtocolTrace, target: SymbolicExpr | None = None
) -> list[Coalition]:
    """All minimal intermediary coalitions that recover the target
    (final key by default), smallest first; supersets are pruned."""
    target = target if target is not None else final_key_expr(trace)
    inter = trace.topology.intermediaries
    if len(inter) > ENUMERATION_CAP:
        raise ValueError(
            f"{len(inter)} intermediaries exceeds the exhaustive enumeration cap"
            f" of {ENUMERATION_CAP}"
        )
    minimal: list[frozenset[NodeId]] = []
    for size in range(len(inter) + 1):
        for combo in combinations(inter, size):
            members = frozenset(combo)
            if any(found <= members for found in minimal):
                continue
            if _breaks(trace, members, target):
                minimal.append(members)
    return [Coalition(m) for m in minimal]


def coalition_rows(
    trace: ProtocolTrace, target: SymbolicExpr | None = None
) -> list[tuple[str, str, str, str]]:
    """One (variant, topology, coalition, status) row per intermediary coalition."""
    target = target if target is not None else final_key_expr(trace)
    inter = trace.topology.intermediaries
    if len(inter) > ENUMERATION_CAP:
        raise ValueError(
            f"{len(inter)} intermediaries exceeds the exhaustive enumeration cap"
            f" of {ENUMERATION_CAP}"
        )
    rows = []
    for size in range(len(inter) + 1):
        for combo in combinations(inter, size):
            coal = Coalition(frozenset(combo))
            status = is_recoverable(view_of(trace, coal), target).status
            rows.append(
                (
                    trace.variant.value,
                    trace.topology.describe(),
                    coal.describe(),
                    status.value,
                )
            )
    return rows


def coalition_report_csv(rows: list[tuple[str, str, str, str]]) -> str:
    out = ["variant,topology,coalition,status"]
    out += [",".join(row) for row in rows]
    return "\n".join(out) + "\n"


def brute_force_secrecy(
    trace: ProtocolTrace, coalition: Coalition, target: SymbolicExpr
) -> Status:
    """Independent oracle: sweep every assignment of every secret bit (n must
    be 1), group assignments by the coalition's full view, and check the
    target's conditional distribution. BROKEN iff the view always determines
    it; SECURE iff it stays perfectly balanced in every group. Linearity
    guarantees one of the two holds.
    """
    if trace.n != 1:
        raise ValueError("the truth-table oracle runs at n=1")
    ids = sorted(trace.store.ids(), key=lambda s: s.name)
    if len(ids) > 24:
        raise ValueError("too many secrets for a full truth-table sweep")
    pos = {sid: i for i, sid in enumerate(ids)}
    assignments = np.arange(1 << len(ids), dtype=np.uint64)

    def parity(terms: Iterable[SecretId]) -> np.ndarray:
        mask = np.uint64(0)
        for sid in terms:
            mask |= np.uint64(1 << pos[sid])
        v = assignments & mask
        for shift in (32, 16, 8, 4, 2, 1):
            v ^= v >> np.uint64(shift)
        return v & np.uint64(1)

    view = view_of(trace, coalition)
    components = [parity(expr.terms) for _, expr in view.observed]
    components += [parity((sid,)) for sid in view.known]
    if len(components) > 63:
        raise ValueError("view too wide to pack for the truth-table sweep")
    view_id = np.zeros_like(assignments)
    for k, comp in enumerate(components):
        view_id |= comp << np.uint64(k)
    target_bit = parity(target.terms)

    _, inverse = np.unique(view_id, return_inverse=True)
    group_size = np.bincount(inverse)
    group_ones = np.bincount(inverse, weights=target_bit.astype(np.float64)).astype(np.int64)
    if np.all((group_ones == 0) | (group_ones == group_size)):
        return Status.BROKEN
    if np.all(2 * group_ones == group_size):
        return Status.SECURE
    raise AssertionError("conditional distribution is neither fixed nor balanced")


def _identity(x: int) -> int:
    return x


def _negate(x: int) -> int:
    return x ^ 1

ACTIVE_STRATEGIES: dict[str, Callable[[int], int]] = {
    "identity": _identity,
    "negate": _negate,
    "const0": lambda x: 0,
    "const1": lambda x: 1,
}


def active_attack_leakage(strategy: Callable[[int], int]) -> float:
    """Mutual information, in bits, between Alice's nonce and what a corrupt
    first relay learns when it substitutes f(M0) for M0 on a 2-intermediary
    chain and watches the replayed payload come back masked.

    The corrupt node sees M0 and Z = f(M0) xor K(B,N1) xor P(A,N1); the sweep
    is exact over the four underlying secret bits.
    """
    counts: dict[tuple[tuple[int, int], int], int] = {}
    total = 0
    for x_a, k_a2, p_a1, k_b1 in product((0, 1), repeat=4):
        m0 = x_a ^ k_a2 ^ p_a1
        z = (strategy(m0) & 1) ^ k_b1 ^ p_a1
        key = ((m0, z), x_a)
        counts[key] = counts.get(key, 0) + 1
        total += 1
    p_view: dict[tuple[int, int], float] = {}
    p_x: dict[int, float] = {}
    for (view, x), c in counts.items():
        p_view[view] = p_view.get(view, 0.0) + c / total
        p_x[x] = p_x.get(x, 0.0) + c / total
    info = 0.0
    for (view, x), c in counts.items():
        p_joint = c / total
        info += p_joint * log2(p_joint / (p_view[view] * p_x[x]))
    return info


def max_active_attack_leakage() -> tuple[float, dict[str, float]]:
    """Leakage of every deterministic single-bit substitution strategy."""
    per = {name: active_attack_leakage(fn) for name, fn in ACTIVE_STRATEGIES.items()}
    return max(per.values()), per


def collusion_grid(
    path_counts: Iterable[int], reaches: Iterable[int], link_length_km: float = 100.0
) -> list[tuple[int, int, int, int]]:
    """Minimum breaking-coalition size over (number of paths, reach) cells.

    Each cell uses paths of m = t+1 intermediaries, the smallest chain where
    reach t keeps the endpoints out of direct range. Computed by enumeration,
    not by formula. Returns (M, t, m per path, minimum colluding nodes) rows.
    """
    rows = []
    for n_paths in path_counts:
        for t in reaches:
            m = t + 1
            topo = build_multipath([m] * n_paths, link_length_km, t)
            trace = run(topo, Variant.MULTIPATH, 1, random.Random(0))
            minimal = min_breaking_coalitions(trace)
            best = min(len(c.members) for c in minimal)
            rows.append((n_paths, t, m, best))
    return rows


def grid_csv(rows: list[tuple[int, int, int, int]]) -> str:
    out = ["paths,reach,m_per_path,min_colluding_nodes"]
    out += [f"{m},{t},{mp},{c}" for m, t, mp, c in rows]
    return "\n".join(out) + "\n"
