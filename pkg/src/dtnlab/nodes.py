"""Node identity: class prefix plus index, rendered like p13 or h0."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class NodeClass(Enum):
    PEDESTRIAN = "p"
    CAR = "c"
    ACCIDENT = "a"
    HOSPITAL = "h"

    @property
    def prefix(self) -> str:
        return self.value


_PREFIXES = {c.value: c for c in NodeClass}
_NAME_RE = re.compile(r"^([pcah])(\d+)$")

# movable classes; accident and hospital nodes sit at fixed map vertices
MOBILE_CLASSES = (NodeClass.PEDESTRIAN, NodeClass.CAR)
# classes that only source or sink traffic, never relay foreign messages
STATIONARY_CLASSES = (NodeClass.ACCIDENT, NodeClass.HOSPITAL)


@dataclass(frozen=True)
class NodeId:
    node_class: NodeClass
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"node index must be non-negative, got {self.index}")

    @property
    def name(self) -> str:
        return f"{self.node_class.prefix}{self.index}"

    def __str__(self) -> str:
        return self.name

    @property
    def sort_key(self) -> tuple[str, int]:
        return (self.node_class.prefix, self.index)

    @classmethod
    def parse(cls, name: str) -> "NodeId":
        m = _NAME_RE.match(name)
        if m is None:
            raise ValueError(f"not a node name: {name!r}")
        return cls(_PREFIXES[m.group(1)], int(m.group(2)))
