"""Stored-entry record types shared by the store and the wire codec."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .cat7 import CMB
from .errors import MalformedEntry
from .svaf import Decision, SvafResult


class Lifecycle(str, Enum):
    OBSERVED = "observed"
    REMIXED = "remixed"


class Tier(str, Enum):
    HOT = "hot"
    WARM = "warm"
    COLD = "cold"


@dataclass(frozen=True)
class StoredEntry:
    key: str
    cmb: CMB
    source: str
    stored_at: int
    lifecycle: Lifecycle
    tier: Tier = Tier.HOT
    anchor_weight: float = 1.0
    svaf: Optional[SvafResult] = None
    # Opaque top-level keys preserved from decoded wire records.
    extensions: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.key != self.cmb.key:
            raise MalformedEntry(
                f"entry key {self.key} does not match block key {self.cmb.key}"
            )
        if self.anchor_weight <= 0:
            raise MalformedEntry("anchorWeight must be positive")
        if self.lifecycle is Lifecycle.REMIXED:
            if self.svaf is None:
                raise MalformedEntry("remixed entry requires an svaf block")
            if self.svaf.decision not in (Decision.ALIGNED, Decision.GUARDED):
                raise MalformedEntry(
                    f"remixed entry with decision {self.svaf.decision.value}"
                )
            if len(self.cmb.lineage.parents) != 1:
                raise MalformedEntry("remixed entry must have exactly one parent")
        else:
            if self.svaf is not None:
                raise MalformedEntry("observed entry must not carry an svaf block")
            if self.cmb.lineage.parents:
                raise MalformedEntry("observed entry must have no parents")
        object.__setattr__(self, "extensions", dict(self.extensions))
