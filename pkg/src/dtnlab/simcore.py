"""Deterministic tick-driven store-carry-forward engine.

One run is a pure function of (scenario, router, seed).  The master seed
splits into independent mobility, traffic, and router streams, so swapping
the protocol never disturbs the contact process and runs of different
protocols over the same seed stay comparable.

Each tick advances time by the fixed mobility step and processes, in this
order: transfer progress and completions, mobility, link down then up
transitions, TTL expiry, traffic generation, routing decisions, transfer
starts.  Within a phase, links are visited sorted by node-index pair and
nodes by index, which pins the event order and makes logs byte-identical
across repeated runs.

Radio model: nodes are linked while their distance is at most the radio
range.  Transfers are half duplex, one per node at a time, at a fixed link
rate; a megabyte at 2 Mbps occupies exactly 4.0 s of link uptime.  Aborted
transfers are discarded whole.  Summary vectors (message ids, delivered ids,
peer counters) travel cost-free at decision time; each directed decision
about a message is made once per link session.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .mobility import FixedPost, Wanderer
from .nodes import MOBILE_CLASSES, NodeClass, NodeId
from .reports import ContactEvent, DeliveryRecord, RelayEvent, ResidencyRecord
from .routing import (
    COPY,
    DELIVER,
    SPLIT,
    Action,
    DecisionCache,
    Encounter,
    EpidemicRouter,
    MlGatedRouter,
    NodeStats,
    PeerHistory,
    Predictor,
    RandomRouter,
    ReplicaView,
    Router,
    SprayAndWaitRouter,
    online_features,
)
from .scenario import ConfigurationError, ScenarioSpec


@dataclass(frozen=True)
class Message:
    id: str
    size: int  # bytes
    source: NodeId
    dest: NodeId
    created_at: float
    ttl_s: float


@dataclass
class Replica:
    message: Message
    copies: int
    arrived_at: float
    path: tuple[NodeId, ...]  # source first, current holder last


class TrafficSource:
    """Accident-site message generator with uniform inter-arrival gaps."""

    def __init__(
        self,
        interval_s: tuple[float, float],
        size_bytes: tuple[int, int],
        ttl_s: float,
        source: NodeId,
        dests: list[NodeId],
        rng: random.Random,
    ) -> None:
        self.interval_s = interval_s
        self.size_bytes = size_bytes
        self.ttl_s = ttl_s
        self.source = source
        self.dests = dests
        self.rng = rng
        self.counter = 0
        self._next = round(rng.uniform(*interval_s), 4)

    def poll(self, now: float) -> list[Message]:
        out = []
        while self._next <= now:
            dest = self.dests[self.rng.randrange(len(self.dests))]
            out.append(
                Message(
                    id=f"AC{self.counter}",
                    size=self.rng.randint(*self.size_bytes),
                    source=self.source,
                    dest=dest,
                    created_at=self._next,
                    ttl_s=self.ttl_s,
                )
            )
            self.counter += 1
            self._next = round(self._next + self.rng.uniform(*self.interval_s), 4)
        return out


def link_transitions(
    positions: np.ndarray, range2: float, prev_in_range: np.ndarray
) -> tuple[np.ndarray, list[tuple[int, int]], list[tuple[int, int]]]:
    """Symmetric threshold links over pairwise distance; returns transitions.

    A pair is linked while squared distance is at most range2.  Transition
    pairs come back index-ordered (i < j, row major), which fixes the event
    order within a tick.
    """
    diff = positions[:, None, :] - positions[None, :, :]
    dist2 = (diff * diff).sum(axis=2)
    in_range = dist2 <= range2
    np.fill_diagonal(in_range, False)
    changed = np.triu(in_range != prev_in_range, 1)
    pairs = np.argwhere(changed)
    ups = [(int(i), int(j)) for i, j in pairs if in_range[i, j]]
    downs = [(int(i), int(j)) for i, j in pairs if not in_range[i, j]]
    return in_range, ups, downs


class NodeBuffer:
    """FIFO message store; oldest non-transferring replica evicts first."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.entries: dict[str, Replica] = {}
        self.used = 0

    def has(self, message_id: str) -> bool:
        return message_id in self.entries

    def get(self, message_id: str) -> Replica | None:
        return self.entries.get(message_id)

    def admit(
        self, replica: Replica, exempt: frozenset[str] = frozenset()
    ) -> tuple[bool, list[Replica]]:
        """Make room and insert; returns (admitted, evicted replicas)."""
        size = replica.message.size
        if size > self.capacity:
            return False, []
        free = self.capacity - self.used
        reclaimable = sum(
            r.message.size for mid, r in self.entries.items() if mid not in exempt
        )
        if free + reclaimable < size:
            return False, []
        evicted = []
        while self.capacity - self.used < size:
            victim = next(mid for mid in self.entries if mid not in exempt)
            evicted.append(self.remove(victim))
        self.entries[replica.message.id] = replica
        self.used += size
        return True, evicted

    def remove(self, message_id: str) -> Replica:
        replica = self.entries.pop(message_id)
        self.used -= replica.message.size
        return replica


@dataclass
class Transfer:
    sender: int
    receiver: int
    message_id: str
    kind: str
    bytes_left: float


@dataclass
class LinkSession:
    up_since: float
    queue: deque = field(default_factory=deque)  # of (sender, receiver, Action)
    decided: set = field(default_factory=set)  # of (sender_idx, message_id)
    transfer: Transfer | None = None


@dataclass
class AuditTrail:
    copy_peaks: dict[str, int] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)


@dataclass
class SimOutput:
    scenario: str
    regime: str
    router: str
    seed: int
    duration_s: float
    nodes: list[NodeId]
    contact_events: list[ContactEvent]
    deliveries: list[DeliveryRecord]
    relays: list[RelayEvent]
    residencies: list[ResidencyRecord]
    messages: list[Message]
    generated: int
    eligible_encounters: int = 0
    fallbacks: int = 0
    audit: AuditTrail | None = None


class Simulation:
    def __init__(
        self,
        spec: ScenarioSpec,
        router: Router,
        seed: int,
        audit: bool = False,
        feature_medians: tuple[float, float] = (0.0, 0.0),
    ) -> None:
        self.spec = spec
        self.router = router
        self.seed = seed
        self.graph = spec.validate()
        self.medians = feature_medians
        self.audit = AuditTrail() if audit else None

        n_ticks = round(spec.duration_s / spec.tick_s)
        if abs(n_ticks * spec.tick_s - spec.duration_s) > 1e-6:
            raise ConfigurationError("scenario.duration_s must be a whole number of ticks")
        self.n_ticks = n_ticks

        self.nodes = spec.roster()
        self.index = {node: i for i, node in enumerate(self.nodes)}
        n = len(self.nodes)

        mob_rng = random.Random(f"{seed}:mobility")
        self.traffic_rng = random.Random(f"{seed}:traffic")
        hospitals = [node for node in self.nodes if node.node_class is NodeClass.HOSPITAL]
        hospital_vertex = dict(zip(hospitals, spec.hospital_vertices))
        self.movers = []
        for node in self.nodes:
            if node.node_class is NodeClass.PEDESTRIAN:
                self.movers.append(
                    Wanderer(
                        graph=self.graph,
                        vertex=mob_rng.randrange(self.graph.vertex_count),
                        speed_range=spec.pedestrian_speed_ms,
                        pause_range=spec.pedestrian_pause_s,
                        regime=spec.regime,
                        hotspots=list(spec.hotspots),
                        rng=mob_rng,
                        hotspot_bias=spec.hotspot_bias,
                    )
                )
            elif node.node_class is NodeClass.CAR:
                lo, hi = spec.car_speed_kmh
                self.movers.append(
                    Wanderer(
                        graph=self.graph,
                        vertex=mob_rng.randrange(self.graph.vertex_count),
                        speed_range=(lo / 3.6, hi / 3.6),
                        pause_range=spec.car_pause_s,
                        regime=spec.regime,
                        hotspots=list(spec.hotspots),
                        rng=mob_rng,
                        hotspot_bias=spec.hotspot_bias,
                    )
                )
            elif node.node_class is NodeClass.ACCIDENT:
                self.movers.append(FixedPost(self.graph, spec.accident_vertex))
            else:
                self.movers.append(FixedPost(self.graph, hospital_vertex[node]))

        dest_nodes = [NodeId.parse(name) for name in spec.destination_names()]
        self.traffic = TrafficSource(
            spec.interval_s,
            spec.size_bytes,
            spec.ttl_s,
            NodeId(NodeClass.ACCIDENT, 0),
            dest_nodes,
            self.traffic_rng,
        )

        self.buffers = [NodeBuffer(spec.buffer_bytes) for _ in range(n)]
        self.stats = [NodeStats() for _ in range(n)]
        self.history: list[dict[int, PeerHistory]] = [{} for _ in range(n)]
        self.delivered: list[set[str]] = [set() for _ in range(n)]
        self.busy = [False] * n
        self.sessions: dict[tuple[int, int], LinkSession] = {}
        self.positions = np.zeros((n, 2))
        for i, mover in enumerate(self.movers):
            self.positions[i] = mover.pos
        self.prev_in_range = np.zeros((n, n), dtype=bool)
        self.relay_eligible = [node.node_class in MOBILE_CLASSES for node in self.nodes]

        self.holders: dict[str, set[int]] = {}
        self.open_residency: dict[tuple[int, str], float] = {}
        self.expiry_heap: list[tuple[float, str]] = []
        self.message_index: dict[str, Message] = {}

        self.contact_events: list[ContactEvent] = []
        self.deliveries: list[DeliveryRecord] = []
        self.relays: list[RelayEvent] = []
        self.residencies: list[ResidencyRecord] = []
        self.messages: list[Message] = []
        self._new_message_nodes: set[int] = set()
        self._range2 = spec.range_m * spec.range_m
        self._bytes_per_tick = spec.bandwidth_bps * spec.tick_s / 8.0

    # ------------------------------------------------------------------ run

    def run(self) -> SimOutput:
        for k in range(1, self.n_ticks + 1):
            now = round(k * self.spec.tick_s, 4)
            self._tick(now)
        self._finish(round(self.spec.duration_s, 4))
        return SimOutput(
            scenario=self.spec.name,
            regime=self.spec.regime,
            router=self.router.name,
            seed=self.seed,
            duration_s=self.spec.duration_s,
            nodes=list(self.nodes),
            contact_events=self.contact_events,
            deliveries=self.deliveries,
            relays=self.relays,
            residencies=self.residencies,
            messages=self.messages,
            generated=len(self.messages),
            eligible_encounters=getattr(self.router, "eligible_encounters", 0),
            fallbacks=getattr(self.router, "fallbacks", 0),
            audit=self.audit,
        )

    def _tick(self, now: float) -> None:
        self._new_message_nodes.clear()
        self._progress_transfers(now)
        dt = self.spec.tick_s
        for i, mover in enumerate(self.movers):
            if self.relay_eligible[i]:  # only mobile classes move
                mover.advance(dt)
                self.positions[i] = mover.pos
        ups, downs = self._link_transitions()
        for i, j in downs:
            self._link_down(i, j, now)
        for i, j in ups:
            self._link_up(i, j, now)
        self._expire(now)
        for message in self.traffic.poll(now):
            self._create_message(message)
        self._route(now, ups)
        self._start_transfers()
        if self.audit is not None:
            self._audit_copies()

    def _link_transitions(self) -> tuple[list, list]:
        in_range, ups, downs = link_transitions(
            self.positions, self._range2, self.prev_in_range
        )
        self.prev_in_range = in_range
        return ups, downs

    def _link_up(self, i: int, j: int, now: float) -> None:
        self.sessions[(i, j)] = LinkSession(up_since=now)
        self.contact_events.append(
            ContactEvent(time=round(now, 2), a=self.nodes[i], b=self.nodes[j], up=True)
        )

    def _link_down(self, i: int, j: int, now: float) -> None:
        session = self.sessions.pop((i, j))
        if session.transfer is not None:
            self._abort(session)
        self.contact_events.append(
            ContactEvent(time=round(now, 2), a=self.nodes[i], b=self.nodes[j], up=False)
        )
        duration = now - session.up_since
        self._record_contact_end(i, j, duration)

    def _record_contact_end(self, i: int, j: int, duration: float) -> None:
        # both sides update their own counters first, then exchange snapshots,
        # so a handshake snapshot includes the contact that just ended
        self.stats[i].record_contact(j, duration)
        self.stats[j].record_contact(i, duration)
        self.history[i].setdefault(j, PeerHistory()).record(
            duration, self.stats[j].snapshot()
        )
        self.history[j].setdefault(i, PeerHistory()).record(
            duration, self.stats[i].snapshot()
        )

    def _abort(self, session: LinkSession) -> None:
        transfer = session.transfer
        assert transfer is not None
        self.busy[transfer.sender] = False
        self.busy[transfer.receiver] = False
        session.transfer = None

    def _expire(self, now: float) -> None:
        # a replica is still usable at exactly created_at + ttl (transfers
        # completing this tick ran first); residency closes at the boundary
        while self.expiry_heap and self.expiry_heap[0][0] <= now:
            boundary, mid = heapq.heappop(self.expiry_heap)
            for holder in sorted(self.holders.get(mid, ())):
                self.buffers[holder].remove(mid)
                self._close_residency(holder, mid, boundary, "expired")
            self.holders.pop(mid, None)
            for key in sorted(self.sessions):
                session = self.sessions[key]
                if session.transfer is not None and session.transfer.message_id == mid:
                    self._abort(session)

    def _create_message(self, message: Message) -> None:
        self.messages.append(message)
        self.message_index[message.id] = message
        source_idx = self.index[message.source]
        replica = Replica(
            message=message,
            copies=self.spec.copies,
            arrived_at=message.created_at,
            path=(message.source,),
        )
        admitted, evicted = self.buffers[source_idx].admit(
            replica, self._sending_ids(source_idx)
        )
        for victim in evicted:
            self._drop_holder(source_idx, victim.message.id)
            self._close_residency(
                source_idx, victim.message.id, message.created_at, "evicted"
            )
        if admitted:
            self.holders.setdefault(message.id, set()).add(source_idx)
            self.open_residency[(source_idx, message.id)] = message.created_at
            heapq.heappush(
                self.expiry_heap, (message.created_at + message.ttl_s, message.id)
            )
            self._new_message_nodes.add(source_idx)

    def _sending_ids(self, node: int) -> frozenset[str]:
        for session in self.sessions.values():
            t = session.transfer
            if t is not None and t.sender == node:
                return frozenset((t.message_id,))
        return frozenset()

    def _drop_holder(self, node: int, mid: str) -> None:
        holders = self.holders.get(mid)
        if holders is not None:
            holders.discard(node)
            if not holders:
                del self.holders[mid]

    def _close_residency(self, node: int, mid: str, now: float, reason: str) -> None:
        opened = self.open_residency.pop((node, mid), None)
        if opened is None:
            return
        self.residencies.append(
            ResidencyRecord(
                time=round(now, 4),
                node=self.nodes[node],
                message_id=mid,
                seconds=round(now - opened, 4),
                reason=reason,
            )
        )

    # -------------------------------------------------------------- routing

    def _route(self, now: float, ups: list[tuple[int, int]]) -> None:
        triggers: list[tuple[int, int, int]] = []
        for i, j in ups:
            triggers.append((i, j, i))
            triggers.append((i, j, j))
        for node in sorted(self._new_message_nodes):
            for key in sorted(self.sessions):
                if node in key:
                    if (key[0], key[1], node) not in triggers:
                        triggers.append((key[0], key[1], node))
        for i, j, sender in triggers:
            session = self.sessions.get((i, j))
            if session is None:
                continue
            self._consult_router(session, i, j, sender, now)

    def _consult_router(
        self, session: LinkSession, i: int, j: int, sender: int, now: float
    ) -> None:
        receiver = j if sender == i else i
        offered = [
            ReplicaView(mid, rep.message.dest, rep.copies)
            for mid, rep in self.buffers[sender].entries.items()
            if (sender, mid) not in session.decided
        ]
        if not offered:
            return
        hist = self.history[sender].get(receiver)
        peer_stats = self.stats[receiver]
        medians = self.medians
        enc = Encounter(
            now=now,
            self_id=self.nodes[sender],
            peer_id=self.nodes[receiver],
            replicas=offered,
            peer_has=frozenset(self.buffers[receiver].entries),
            peer_delivered=frozenset(self.delivered[receiver]),
            peer_relays=self.relay_eligible[receiver],
            # counters handed over in the current contact's handshake
            peer_query=lambda: online_features(hist, peer_stats.snapshot(), medians),
        )
        actions = self.router.on_contact(enc)
        offered_ids = {r.message_id for r in offered}
        for view in offered:
            session.decided.add((sender, view.message_id))
        for action in actions:
            if action.message_id not in offered_ids:
                continue
            session.queue.append((sender, receiver, action))

    # ------------------------------------------------------------- transfers

    def _start_transfers(self) -> None:
        for key in sorted(self.sessions):
            session = self.sessions[key]
            if session.transfer is not None or not session.queue:
                continue
            i, j = key
            if self.busy[i] or self.busy[j]:
                continue
            while session.queue:
                sender, receiver, action = session.queue.popleft()
                if self._start_one(session, sender, receiver, action):
                    break

    def _start_one(
        self, session: LinkSession, sender: int, receiver: int, action: Action
    ) -> bool:
        replica = self.buffers[sender].get(action.message_id)
        if replica is None:
            return False
        mid = action.message_id
        if action.kind == DELIVER:
            if self.nodes[receiver] != replica.message.dest:
                return False
            if mid in self.delivered[receiver]:
                return False
        else:
            if self.buffers[receiver].has(mid) or mid in self.delivered[receiver]:
                return False
            if action.kind == SPLIT and replica.copies <= 1:
                return False
        session.transfer = Transfer(
            sender=sender,
            receiver=receiver,
            message_id=mid,
            kind=action.kind,
            bytes_left=float(replica.message.size),
        )
        self.busy[sender] = True
        self.busy[receiver] = True
        return True

    def _progress_transfers(self, now: float) -> None:
        for key in sorted(self.sessions):
            session = self.sessions[key]
            transfer = session.transfer
            if transfer is None:
                continue
            transfer.bytes_left -= self._bytes_per_tick
            if transfer.bytes_left <= 0.0:
                self._complete_transfer(session, transfer, now)

    def _complete_transfer(
        self, session: LinkSession, transfer: Transfer, now: float
    ) -> None:
        session.transfer = None
        self.busy[transfer.sender] = False
        self.busy[transfer.receiver] = False
        replica = self.buffers[transfer.sender].get(transfer.message_id)
        if replica is None:
            return  # sender lost the replica mid-flight; treat as aborted
        message = replica.message
        sender_id = self.nodes[transfer.sender]
        receiver_id = self.nodes[transfer.receiver]

        if transfer.kind == DELIVER:
            path = replica.path + (receiver_id,)
            delivery_time = round(now - message.created_at, 4)
            record = DeliveryRecord(
                time=now,
                message_id=message.id,
                size=message.size,
                hopcount=len(path) - 1,
                delivery_time=delivery_time,
                from_host=message.source,
                to_host=receiver_id,
                remaining_ttl=math.floor((message.ttl_s - delivery_time) / 60.0),
                is_response=False,
                path=path,
            )
            self.deliveries.append(record)
            self.relays.append(RelayEvent(now, sender_id, receiver_id, message.id))
            self.delivered[transfer.receiver].add(message.id)
            for hop in path[1:-1]:
                self.stats[self.index[hop]].record_relayed_delivery(
                    record.hopcount, delivery_time
                )
            self.stats[transfer.receiver].as_dest += 1
            self.buffers[transfer.sender].remove(message.id)
            self._drop_holder(transfer.sender, message.id)
            self._close_residency(transfer.sender, message.id, now, "delivered")
            return

        copies = 1
        if transfer.kind == SPLIT:
            copies = replica.copies // 2
        incoming = Replica(
            message=message,
            copies=copies,
            arrived_at=now,
            path=replica.path + (receiver_id,),
        )
        admitted, evicted = self.buffers[transfer.receiver].admit(
            incoming, self._sending_ids(transfer.receiver)
        )
        for victim in evicted:
            self._drop_holder(transfer.receiver, victim.message.id)
            self._close_residency(transfer.receiver, victim.message.id, now, "evicted")
        if not admitted:
            return  # no room even after eviction; nothing materialized
        if transfer.kind == SPLIT:
            replica.copies -= copies  # sender keeps ceil(c/2)
        self.relays.append(RelayEvent(now, sender_id, receiver_id, message.id))
        self.holders.setdefault(message.id, set()).add(transfer.receiver)
        self.open_residency[(transfer.receiver, message.id)] = now
        self._new_message_nodes.add(transfer.receiver)

    # ------------------------------------------------------------- finishing

    def _finish(self, end_time: float) -> None:
        for key in sorted(self.sessions):
            session = self.sessions[key]
            if session.transfer is not None:
                self._abort(session)
            i, j = key
            self.contact_events.append(
                ContactEvent(
                    time=round(end_time, 2), a=self.nodes[i], b=self.nodes[j], up=False
                )
            )
            self._record_contact_end(i, j, end_time - session.up_since)
        self.sessions.clear()
        for node, mid in sorted(self.open_residency):
            self._close_residency(node, mid, end_time, "end")

    def _audit_copies(self) -> None:
        assert self.audit is not None
        budget = self.spec.copies
        for mid in sorted(self.holders):
            total = sum(
                self.buffers[h].entries[mid].copies for h in self.holders[mid]
            )
            peak = self.audit.copy_peaks.get(mid, 0)
            if total > peak:
                self.audit.copy_peaks[mid] = total
            if total > budget and not isinstance(self.router, EpidemicRouter):
                self.audit.violations.append(
                    f"{mid}: copy sum {total} exceeds budget {budget}"
                )


# ------------------------------------------------------------------- helpers


def build_router(
    kind: str,
    seed: int,
    predictor: Predictor | None = None,
    cache: DecisionCache | None = None,
) -> Router:
    if kind == "SprayAndWait":
        return SprayAndWaitRouter()
    if kind == "Epidemic":
        return EpidemicRouter()
    if kind == "RandomRouter":
        return RandomRouter(random.Random(f"{seed}:router"))
    if kind == "MLPBasedRouter":
        if predictor is None:
            raise ValueError("MLPBasedRouter needs a predictor")
        return MlGatedRouter(predictor, cache)
    raise ValueError(f"unknown router kind {kind!r}")


def run_simulation(
    spec: ScenarioSpec,
    router: Router | str,
    seed: int,
    predictor: Predictor | None = None,
    feature_medians: tuple[float, float] = (0.0, 0.0),
    audit: bool = False,
) -> SimOutput:
    if isinstance(router, str):
        router = build_router(router, seed, predictor)
    return Simulation(
        spec, router, seed, audit=audit, feature_medians=feature_medians
    ).run()
