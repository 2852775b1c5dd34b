"""Relay protocol execution.

Every variant reduces to the same hop rule: the path's origin starts from its
nonce, each sender folds in all of its own keys on that path, and the far
endpoint strips its keys to recover the nonce. compile_schedule turns a key
plan into that hop list once; the in-process engine and the wire plane both
execute the same schedule, so they cannot drift apart.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .bits import BitString, KeyStore, SecretId, SymbolicExpr, nonce
from .keyplan import KeyPlan, Variant, check_compatible, establish, plan_keys
from .topology import NodeId, Shape, Topology

__all__ = [
    "Variant",
    "Hop",
    "AbsorbRule",
    "Schedule",
    "Message",
    "ProtocolTrace",
    "compile_schedule",
    "make_store",
    "execute",
    "run",
    "run_ring_v1",
    "run_ring_v2",
    "run_chain2",
    "run_chain_m",
    "run_reach_t",
    "run_multipath",
    "send_message_as_payload",
    "trace_lines",
    "trace_text",
    "trace_records",
    "trace_json",
]


@dataclass(frozen=True)
class Hop:
    """One message emission: sender folds xor_ids into the running payload."""

    index: int
    path_pos: int
    sender: NodeId
    receiver: NodeId
    origin: SecretId | None  # the nonce, when the sender starts this path
    xor_ids: tuple[SecretId, ...]


@dataclass(frozen=True)
class AbsorbRule:
    """Final reception on one path: strip these keys from that hop's payload."""

    hop_index: int
    strip_ids: tuple[SecretId, ...]


@dataclass(frozen=True)
class Schedule:
    variant: Variant
    topology: Topology
    plan: KeyPlan
    hops: tuple[Hop, ...]
    nonce_ids: tuple[SecretId, ...]
    absorbs: tuple[tuple[str, AbsorbRule], ...]  # (endpoint label, rule)
    nonce_owners: tuple[tuple[str, SecretId], ...]  # (owner label, nonce)

    def absorbs_for(self, label: str) -> tuple[AbsorbRule, ...]:
        return tuple(rule for lab, rule in self.absorbs if lab == label)

    def nonces_of(self, label: str) -> tuple[SecretId, ...]:
        return tuple(nid for lab, nid in self.nonce_owners if lab == label)


def _path_runs(topo: Topology, variant: Variant) -> list[tuple[tuple[NodeId, ...], SecretId]]:
    """Per path: the node sequence in sending order and the nonce that seeds it."""
    a, b = topo.endpoint_a, topo.endpoint_b
    if variant in (Variant.RING_V1, Variant.RING_V2):
        upper, lower = topo.paths
        return [(upper, nonce(a.label)), (tuple(reversed(lower)), nonce(b.label))]
    if variant is Variant.MULTIPATH:
        return [
            (path, nonce(a.label, p)) for p, path in enumerate(topo.paths, start=1)
        ]
    return [(topo.paths[0], nonce(a.label))]


def compile_schedule(plan: KeyPlan) -> Schedule:
    topo, variant = plan.topology, plan.variant
    hops: list[Hop] = []
    absorbs: list[tuple[str, AbsorbRule]] = []
    owners: list[tuple[str, SecretId]] = []
    nonce_ids: list[SecretId] = []
    for path_pos, (seq, nonce_id) in enumerate(_path_runs(topo, variant)):
        labels = {nd.label for nd in seq}
        path_keys = [
            sid for sid in plan.secret_ids if all(end in labels for end in sid.ends)
        ]
        for i in range(len(seq) - 1):
            sender, receiver = seq[i], seq[i + 1]
            assert topo.adjacent(sender, receiver)
            hops.append(
                Hop(
                    index=len(hops),
                    path_pos=path_pos,
                    sender=sender,
                    receiver=receiver,
                    origin=nonce_id if i == 0 else None,
                    xor_ids=tuple(k for k in path_keys if sender.label in k.ends),
                )
            )
        dest = seq[-1]
        absorbs.append(
            (dest.label, AbsorbRule(hops[-1].index, tuple(k for k in path_keys if dest.label in k.ends)))
        )
        owners.append((seq[0].label, nonce_id))
        nonce_ids.append(nonce_id)
    return Schedule(variant, topo, plan, tuple(hops), tuple(nonce_ids), tuple(absorbs), tuple(owners))


def make_store(
    schedule: Schedule, n: int, rng: random.Random, payload: BitString | None = None
) -> KeyStore:
    """Establish all planned keys, then draw the nonces, in schedule order.

    A payload, when given, replaces the drawn value of the single nonce; the
    trace's expression structure is unchanged.
    """
    store = establish(schedule.plan, n, rng)
    if payload is not None and len(schedule.nonce_ids) != 1:
        raise ValueError("payload delivery needs a single-nonce variant")
    for nid in schedule.nonce_ids:
        if payload is not None:
            if payload.n != n:
                raise ValueError("payload length must match the key length")
            store.add(nid, payload)
        else:
            store.sample(nid, rng)
    return store


@dataclass(frozen=True)
class Message:
    """One transmitted payload with its algebraic form; bits always equal
    the store's evaluation of expr."""

    index: int
    sender: NodeId
    receiver: NodeId
    bits: BitString
    expr: SymbolicExpr


@dataclass(frozen=True)
class ProtocolTrace:
    variant: Variant
    topology: Topology
    messages: tuple[Message, ...]
    output_a: BitString
    output_b: BitString
    nonce_ids: tuple[SecretId, ...]
    store: KeyStore

    @property
    def n(self) -> int:
        return self.store.n


def execute(schedule: Schedule, store: KeyStore) -> ProtocolTrace:
    """Run the schedule over concrete bits, checking every emission against
    its symbolic form."""
    running: dict[int, tuple[BitString, SymbolicExpr]] = {}
    messages: list[Message] = []
    for hop in schedule.hops:
        if hop.origin is not None:
            bits, expr = store[hop.origin], SymbolicExpr.of(hop.origin)
        else:
            bits, expr = running[hop.path_pos]
        for sid in hop.xor_ids:
            bits = bits ^ store[sid]
        expr = expr ^ SymbolicExpr.of(*hop.xor_ids)
        if store.evaluate(expr) != bits:
            raise AssertionError(f"emission {hop.index} disagrees with its expression")
        messages.append(Message(hop.index, hop.sender, hop.receiver, bits, expr))
        running[hop.path_pos] = (bits, expr)

    def output_of(label: str) -> BitString:
        acc = BitString.zeros(store.n)
        for nid in schedule.nonces_of(label):
            acc = acc ^ store[nid]
        for rule in schedule.absorbs_for(label):
            share = messages[rule.hop_index].bits
            for sid in rule.strip_ids:
                share = share ^ store[sid]
            acc = acc ^ share
        return acc

    topo = schedule.topology
    out_a = output_of(topo.endpoint_a.label)
    out_b = output_of(topo.endpoint_b.label)
    assert out_a == out_b, "honest run must agree on the final key"
    return ProtocolTrace(
        schedule.variant, topo, tuple(messages), out_a, out_b, schedule.nonce_ids, store
    )


def run(
    topo: Topology,
    variant: Variant,
    n: int,
    rng: random.Random,
    payload: BitString | None = None,
) -> ProtocolTrace:
    plan = plan_keys(topo, variant)
    schedule = compile_schedule(plan)
    return execute(schedule, make_store(schedule, n, rng, payload))


def run_ring_v1(topo: Topology, n: int, rng: random.Random) -> ProtocolTrace:
    """Unpatched ring forwarding; known-broken, kept as the attack target."""
    return run(topo, Variant.RING_V1, n, rng)


def run_ring_v2(topo: Topology, n: int, rng: random.Random) -> ProtocolTrace:
    """Ring forwarding with endpoint-link keys closing the leak."""
    return run(topo, Variant.RING_V2, n, rng)


def run_chain2(topo: Topology, n: int, rng: random.Random) -> ProtocolTrace:
    check_compatible(topo, Variant.CHAIN2)
    return run(topo, Variant.CHAIN2, n, rng)


def run_chain_m(topo: Topology, n: int, rng: random.Random) -> ProtocolTrace:
    return run(topo, Variant.CHAIN_M, n, rng)


def run_reach_t(topo: Topology, n: int, rng: random.Random) -> ProtocolTrace:
    return run(topo, Variant.REACH_T, n, rng)


def run_multipath(topo: Topology, n: int, rng: random.Random) -> ProtocolTrace:
    """All paths forward in parallel; the final key is the XOR of path nonces."""
    return run(topo, Variant.MULTIPATH, n, rng)


def send_message_as_payload(
    z: BitString, topo: Topology, n: int, rng: random.Random
) -> ProtocolTrace:
    """Forward a chosen message z down a chain instead of a fresh nonce.

    Same schedule as run_chain_m; the receiving endpoint outputs z exactly.
    """
    if topo.shape is not Shape.CHAIN:
        raise ValueError("payload delivery runs on a chain")
    return run(topo, Variant.CHAIN_M, n, rng, payload=z)


def trace_lines(trace: ProtocolTrace) -> list[str]:
    lines = [
        f"# variant={trace.variant.value} topology={trace.topology.describe()} n={trace.n}"
    ]
    for msg in trace.messages:
        lines.append(
            f"M{msg.index} {msg.sender.label}->{msg.receiver.label}"
            f" {msg.bits.to_hex()} {msg.expr.text()}"
        )
    lines.append(f"K(A) {trace.output_a.to_hex()}")
    lines.append(f"K(B) {trace.output_b.to_hex()}")
    return lines


def trace_text(trace: ProtocolTrace) -> str:
    return "\n".join(trace_lines(trace)) + "\n"


def trace_records(trace: ProtocolTrace) -> list[dict]:
    return [
        {
            "index": msg.index,
            "sender": msg.sender.label,
            "receiver": msg.receiver.label,
            "hex": msg.bits.to_hex(),
            "expr": msg.expr.text(),
        }
        for msg in trace.messages
    ]


def trace_json(trace: ProtocolTrace) -> str:
    doc = {
        "variant": trace.variant.value,
        "topology": trace.topology.describe(),
        "n": trace.n,
        "messages": trace_records(trace),
        "output_a": trace.output_a.to_hex(),
        "output_b": trace.output_b.to_hex(),
        "nonces": [nid.name for nid in trace.nonce_ids],
    }
    return json.dumps(doc, indent=2) + "\n"
