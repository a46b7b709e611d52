"""Forwarding protocols and the online relay-quality machinery.

All four protocols share the spray-and-wait skeleton of per-encounter
decisions over the sender's buffered replicas:

* Epidemic: replicate everything the peer lacks, no copy budget.
* SprayAndWait: binary budget; relay while copies > 1, wait at copies == 1,
  hand over to the destination unconditionally.
* RandomRouter: spray-and-wait with the relay decision replaced by a fair
  coin per eligible (message, encounter) pair.
* MLPBasedRouter: spray-and-wait with the relay decision gated by a binary
  classifier judging the peer; the destination is never gated.  When the
  predictor cannot be reached the router falls back to the plain spray
  decision and counts the event.

Peer statistics travel in the summary-vector handshake.  An observer's view
of a peer combines its own completed-contact history with the peer counters
snapshotted at the end of the most recent completed contact, so a never-met
peer scores zero contact features and falls back to the shipped training
medians for the two delivery averages.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .nodes import NodeId

FEATURE_NAMES = (
    "contact_freq",
    "degree",
    "avg_contact_duration",
    "avg_hop_count",
    "avg_delivery_time",
    "as_relay_count",
    "as_destination_count",
)

DELIVER = "deliver"
SPLIT = "split"
COPY = "copy"


class PredictorUnavailableError(RuntimeError):
    """The relay-quality predictor could not be reached in time."""


@dataclass(frozen=True)
class RelayQuery:
    """The seven per-node features, computed online for an encountered peer."""

    contact_freq: float
    degree: float
    avg_contact_duration: float
    avg_hop_count: float
    avg_delivery_time: float
    as_relay_count: float
    as_destination_count: float

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in FEATURE_NAMES}

    def quantized(self, decimals: int = 3) -> tuple[float, ...]:
        return tuple(round(float(getattr(self, n)), decimals) for n in FEATURE_NAMES)


class Predictor(Protocol):
    def decide(self, features: dict[str, float]) -> tuple[int, float]:
        """Return (label, probability) for one feature mapping."""


@dataclass(frozen=True)
class PeerSnapshot:
    """A node's self-reported counters as exchanged during the handshake."""

    degree: int
    relayed: int
    as_dest: int
    h_avg: float | None  # None until the node relayed a delivered message
    t_delay: float | None


@dataclass
class NodeStats:
    """Counters a node maintains about itself while the run progresses."""

    contacts: int = 0
    partners: set[int] = field(default_factory=set)
    contact_seconds: float = 0.0
    relayed_delivered: int = 0
    hop_sum: float = 0.0
    delay_sum: float = 0.0
    as_dest: int = 0

    @property
    def degree(self) -> int:
        return len(self.partners)

    def record_contact(self, partner: int, duration: float) -> None:
        self.contacts += 1
        self.partners.add(partner)
        self.contact_seconds += duration

    def record_relayed_delivery(self, hopcount: int, delay: float) -> None:
        self.relayed_delivered += 1
        self.hop_sum += hopcount
        self.delay_sum += delay

    def snapshot(self) -> PeerSnapshot:
        if self.relayed_delivered:
            h_avg = self.hop_sum / self.relayed_delivered
            t_delay = self.delay_sum / self.relayed_delivered
        else:
            h_avg = None
            t_delay = None
        return PeerSnapshot(
            degree=self.degree,
            relayed=self.relayed_delivered,
            as_dest=self.as_dest,
            h_avg=h_avg,
            t_delay=t_delay,
        )


@dataclass
class PeerHistory:
    """What one node knows about one peer from completed contacts."""

    completed: int = 0
    duration_sum: float = 0.0
    snapshot: PeerSnapshot | None = None

    def record(self, duration: float, snap: PeerSnapshot) -> None:
        self.completed += 1
        self.duration_sum += duration
        self.snapshot = snap


def online_features(
    history: PeerHistory | None,
    snapshot: PeerSnapshot | None,
    medians: tuple[float, float],
) -> RelayQuery:
    """Build the peer's feature vector from local history plus handshake data.

    The peer's self-reported counters arrive in the summary-vector handshake
    of the current contact, so they are live even on a first meeting.  The
    two pairwise contact features still require completed contacts with this
    peer.  medians are the shipped training medians for (avg_hop_count,
    avg_delivery_time), used whenever the peer has no delivery record yet.
    """
    h_med, t_med = medians
    if history is not None and history.completed:
        freq = float(history.completed)
        avg_duration = history.duration_sum / history.completed
    else:
        freq = 0.0
        avg_duration = 0.0
    if snapshot is None:
        return RelayQuery(freq, 0.0, avg_duration, float(h_med), float(t_med), 0.0, 0.0)
    return RelayQuery(
        contact_freq=freq,
        degree=float(snapshot.degree),
        avg_contact_duration=avg_duration,
        avg_hop_count=(
            float(snapshot.h_avg) if snapshot.h_avg is not None else float(h_med)
        ),
        avg_delivery_time=(
            float(snapshot.t_delay) if snapshot.t_delay is not None else float(t_med)
        ),
        as_relay_count=float(snapshot.relayed),
        as_destination_count=float(snapshot.as_dest),
    )


class DecisionCache:
    """Gate-decision memo keyed by peer and quantized features.

    Entries expire after ttl_s of simulated time and are never returned
    stale.  Feature values are rounded to `decimals` places for the key so
    near-identical queries share one entry.
    """

    def __init__(self, ttl_s: float = 300.0, decimals: int = 3) -> None:
        self.ttl_s = ttl_s
        self.decimals = decimals
        self._entries: dict[tuple, tuple[float, int, float]] = {}
        self.hits = 0
        self.misses = 0

    def _key(self, peer: NodeId | str, query: RelayQuery) -> tuple:
        return (str(peer), query.quantized(self.decimals))

    def get(self, peer: NodeId | str, query: RelayQuery, now: float):
        entry = self._entries.get(self._key(peer, query))
        if entry is None:
            self.misses += 1
            return None
        cached_at, label, prob = entry
        if now - cached_at > self.ttl_s:
            self.misses += 1
            return None
        self.hits += 1
        return (label, prob)

    def put(
        self, peer: NodeId | str, query: RelayQuery, now: float, label: int, prob: float
    ) -> None:
        self._entries[self._key(peer, query)] = (now, label, prob)

    def __len__(self) -> int:
        return len(self._entries)


# ------------------------------------------------------------------ encounters


@dataclass(frozen=True)
class ReplicaView:
    message_id: str
    destination: NodeId
    copies: int


@dataclass(frozen=True)
class Action:
    message_id: str
    kind: str  # deliver | split | copy


@dataclass
class Encounter:
    """Everything a router may consult for one directed decision point."""

    now: float
    self_id: NodeId
    peer_id: NodeId
    replicas: list[ReplicaView]  # undecided replicas in buffer order
    peer_has: frozenset[str]
    peer_delivered: frozenset[str]
    peer_relays: bool  # peer class may carry foreign messages
    peer_query: Callable[[], RelayQuery]


class Router:
    name = "base"

    def on_contact(self, enc: Encounter) -> list[Action]:
        raise NotImplementedError

    def _offerable(self, enc: Encounter) -> list[ReplicaView]:
        return [
            r
            for r in enc.replicas
            if r.message_id not in enc.peer_has
            and r.message_id not in enc.peer_delivered
        ]

    @staticmethod
    def _dest_first(
        enc: Encounter, replicas: list[ReplicaView]
    ) -> tuple[list[ReplicaView], list[ReplicaView]]:
        to_dest = [r for r in replicas if r.destination == enc.peer_id]
        rest = [r for r in replicas if r.destination != enc.peer_id]
        return to_dest, rest


class EpidemicRouter(Router):
    """Replicate every message the peer lacks; deliveries queue first."""

    name = "Epidemic"

    def on_contact(self, enc: Encounter) -> list[Action]:
        to_dest, rest = self._dest_first(enc, self._offerable(enc))
        actions = [Action(r.message_id, DELIVER) for r in to_dest]
        if enc.peer_relays:
            actions += [Action(r.message_id, COPY) for r in rest]
        return actions


class SprayAndWaitRouter(Router):
    """Binary spray: relay while copies > 1, direct delivery always."""

    name = "SprayAndWait"

    def relay_gate(self, enc: Encounter, eligible: list[ReplicaView]) -> bool:
        return True

    def per_message_gate(self, enc: Encounter, replica: ReplicaView) -> bool:
        return True

    def on_contact(self, enc: Encounter) -> list[Action]:
        to_dest, rest = self._dest_first(enc, self._offerable(enc))
        actions = [Action(r.message_id, DELIVER) for r in to_dest]
        eligible = [r for r in rest if r.copies > 1] if enc.peer_relays else []
        if eligible and self.relay_gate(enc, eligible):
            actions += [
                Action(r.message_id, SPLIT)
                for r in eligible
                if self.per_message_gate(enc, r)
            ]
        return actions


class RandomRouter(SprayAndWaitRouter):
    """Spray skeleton with a fair coin in place of the relay decision."""

    name = "RandomRouter"

    def __init__(self, rng: random.Random) -> None:
        self.rng = rng

    def per_message_gate(self, enc: Encounter, replica: ReplicaView) -> bool:
        return self.rng.random() < 0.5


class MlGatedRouter(SprayAndWaitRouter):
    """Spray skeleton that forwards only to peers the classifier accepts.

    One prediction per decision point covers every eligible replica, since
    the features describe the peer and not the message.  The cache is
    consulted first; a predictor failure falls back to the plain spray
    decision and bumps the fallback counter.
    """

    name = "MLPBasedRouter"

    def __init__(
        self,
        predictor: Predictor,
        cache: DecisionCache | None = None,
    ) -> None:
        self.predictor = predictor
        self.cache = cache if cache is not None else DecisionCache()
        self.eligible_encounters = 0  # decision points that needed a prediction
        self.fallbacks = 0  # of those, how many fell back to plain spray

    def relay_gate(self, enc: Encounter, eligible: list[ReplicaView]) -> bool:
        query = enc.peer_query()
        cached = self.cache.get(enc.peer_id, query, enc.now)
        if cached is not None:
            return cached[0] == 1
        self.eligible_encounters += 1
        try:
            label, prob = self.predictor.decide(query.as_dict())
        except PredictorUnavailableError:
            self.fallbacks += 1
            return True  # plain spray forwards whenever copies allow
        self.cache.put(enc.peer_id, query, enc.now, label, prob)
        return label == 1


ROUTER_NAMES = ("SprayAndWait", "MLPBasedRouter", "RandomRouter", "Epidemic")
