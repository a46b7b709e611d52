"""Text report formats for simulation logs.

Two formats are fixed and shared with external tooling:

connectivity trace, one line per link transition::

    @0.10 p39 <-> c71 up
    @0.50 c56 <-> c59 down

delivered-messages report, header line then one line per delivery::

    # time ID size hopcount deliveryTime fromHost toHost remainingTtl isResponse path
    2225.4000 AC29 550456 3 1361.4000 a110 p10 277 N a110->c89->c102->p10

Times carry two decimals in the connectivity trace and four in the delivered
report.  remainingTtl is whole minutes.  The writer orders connectivity events
by (time, a, b); parsers keep file order and report 1-based line numbers on
malformed input.  Relay and buffer logs are auxiliary formats local to this
package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .nodes import NodeId

DELIVERED_HEADER = "# time ID size hopcount deliveryTime fromHost toHost remainingTtl isResponse path"


class ParseError(ValueError):
    """Malformed report line; carries the 1-based line number."""

    def __init__(self, line_no: int, line: str, reason: str) -> None:
        super().__init__(f"line {line_no}: {reason}: {line!r}")
        self.line_no = line_no
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class ContactEvent:
    time: float  # seconds, non-negative
    a: NodeId
    b: NodeId
    up: bool  # True for link up, False for down

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError("contact event time must be non-negative")
        if self.a == self.b:
            raise ValueError("contact endpoints must differ")

    @property
    def pair(self) -> frozenset[NodeId]:
        return frozenset((self.a, self.b))


@dataclass(frozen=True)
class DeliveryRecord:
    time: float  # delivery wall-clock, seconds
    message_id: str
    size: int  # bytes
    hopcount: int
    delivery_time: float  # creation-to-delivery delay, seconds
    from_host: NodeId
    to_host: NodeId
    remaining_ttl: int  # whole minutes left at delivery
    is_response: bool
    path: tuple[NodeId, ...]  # source first, destination last

    def __post_init__(self) -> None:
        if len(self.path) < 2:
            raise ValueError("path needs at least source and destination")
        if self.hopcount != len(self.path) - 1:
            raise ValueError(
                f"hopcount {self.hopcount} does not match path of {len(self.path)} hosts"
            )
        if self.path[0] != self.from_host or self.path[-1] != self.to_host:
            raise ValueError("path endpoints must match fromHost/toHost")
        if self.delivery_time > self.time:
            raise ValueError("delivery delay cannot exceed the delivery timestamp")


# ---------------------------------------------------------------- connectivity

_CONTACT_RE = re.compile(
    r"^@(?P<time>\d+\.\d{2}) (?P<a>[pcah]\d+) <-> (?P<b>[pcah]\d+) (?P<state>up|down)$"
)


def format_contact_event(event: ContactEvent) -> str:
    state = "up" if event.up else "down"
    return f"@{event.time:.2f} {event.a} <-> {event.b} {state}"


def parse_contact_line(line: str, line_no: int = 1) -> ContactEvent:
    m = _CONTACT_RE.match(line)
    if m is None:
        raise ParseError(line_no, line, "not a connectivity event")
    return ContactEvent(
        time=float(m.group("time")),
        a=NodeId.parse(m.group("a")),
        b=NodeId.parse(m.group("b")),
        up=m.group("state") == "up",
    )


def contact_log_lines(events: Iterable[ContactEvent]) -> list[str]:
    ordered = sorted(events, key=lambda e: (e.time, e.a.sort_key, e.b.sort_key))
    return [format_contact_event(e) for e in ordered]


def parse_contact_lines(lines: Iterable[str]) -> list[ContactEvent]:
    events = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        events.append(parse_contact_line(line, line_no))
    return events


def write_contact_log(events: Iterable[ContactEvent], path: str | Path) -> None:
    Path(path).write_text("".join(line + "\n" for line in contact_log_lines(events)))


def read_contact_log(path: str | Path) -> list[ContactEvent]:
    with open(path) as fh:
        return parse_contact_lines(fh)


# ------------------------------------------------------------------- delivered


def format_delivery_record(rec: DeliveryRecord) -> str:
    flag = "Y" if rec.is_response else "N"
    path = "->".join(str(n) for n in rec.path)
    return (
        f"{rec.time:.4f} {rec.message_id} {rec.size} {rec.hopcount} "
        f"{rec.delivery_time:.4f} {rec.from_host} {rec.to_host} "
        f"{rec.remaining_ttl} {flag} {path}"
    )


def parse_delivery_line(line: str, line_no: int = 2) -> DeliveryRecord:
    fields = line.split(" ")
    if len(fields) != 10:
        raise ParseError(line_no, line, f"expected 10 fields, got {len(fields)}")
    (time_s, mid, size_s, hops_s, delay_s, from_s, to_s, ttl_s, resp_s, path_s) = fields
    if resp_s not in ("Y", "N"):
        raise ParseError(line_no, line, "isResponse must be Y or N")
    try:
        rec = DeliveryRecord(
            time=float(time_s),
            message_id=mid,
            size=int(size_s),
            hopcount=int(hops_s),
            delivery_time=float(delay_s),
            from_host=NodeId.parse(from_s),
            to_host=NodeId.parse(to_s),
            remaining_ttl=int(ttl_s),
            is_response=resp_s == "Y",
            path=tuple(NodeId.parse(p) for p in path_s.split("->")),
        )
    except ValueError as err:
        raise ParseError(line_no, line, str(err)) from err
    return rec


def delivered_log_lines(records: Sequence[DeliveryRecord]) -> list[str]:
    return [DELIVERED_HEADER] + [format_delivery_record(r) for r in records]


def parse_delivered_lines(lines: Iterable[str]) -> list[DeliveryRecord]:
    records = []
    saw_header = False
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        if not saw_header:
            if line != DELIVERED_HEADER:
                raise ParseError(line_no, line, "missing delivered-report header")
            saw_header = True
            continue
        records.append(parse_delivery_line(line, line_no))
    if not saw_header:
        raise ParseError(1, "", "empty delivered report")
    return records


def write_delivered_log(records: Sequence[DeliveryRecord], path: str | Path) -> None:
    Path(path).write_text("".join(line + "\n" for line in delivered_log_lines(records)))


def read_delivered_log(path: str | Path) -> list[DeliveryRecord]:
    with open(path) as fh:
        return parse_delivered_lines(fh)


# ------------------------------------------------- auxiliary relay/buffer logs


@dataclass(frozen=True)
class RelayEvent:
    time: float
    sender: NodeId
    receiver: NodeId
    message_id: str


@dataclass(frozen=True)
class ResidencyRecord:
    time: float  # when the replica left the buffer
    node: NodeId
    message_id: str
    seconds: float  # admission-to-removal residency
    reason: str  # delivered | evicted | expired | end


def relay_log_lines(events: Iterable[RelayEvent]) -> list[str]:
    return [f"{e.time:.4f} {e.sender} {e.receiver} {e.message_id}" for e in events]


def parse_relay_lines(lines: Iterable[str]) -> list[RelayEvent]:
    events = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        fields = line.split(" ")
        if len(fields) != 4:
            raise ParseError(line_no, line, f"expected 4 fields, got {len(fields)}")
        try:
            events.append(
                RelayEvent(
                    time=float(fields[0]),
                    sender=NodeId.parse(fields[1]),
                    receiver=NodeId.parse(fields[2]),
                    message_id=fields[3],
                )
            )
        except ValueError as err:
            raise ParseError(line_no, line, str(err)) from err
    return events


def residency_log_lines(records: Iterable[ResidencyRecord]) -> list[str]:
    return [
        f"{r.time:.4f} {r.node} {r.message_id} {r.seconds:.4f} {r.reason}"
        for r in records
    ]


def parse_residency_lines(lines: Iterable[str]) -> list[ResidencyRecord]:
    records = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        fields = line.split(" ")
        if len(fields) != 5:
            raise ParseError(line_no, line, f"expected 5 fields, got {len(fields)}")
        try:
            records.append(
                ResidencyRecord(
                    time=float(fields[0]),
                    node=NodeId.parse(fields[1]),
                    message_id=fields[2],
                    seconds=float(fields[3]),
                    reason=fields[4],
                )
            )
        except ValueError as err:
            raise ParseError(line_no, line, str(err)) from err
    return records


def write_lines(lines: Iterable[str], path: str | Path) -> None:
    Path(path).write_text("".join(line + "\n" for line in lines))
