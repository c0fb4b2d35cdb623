"""Closed-form per-field admission gate.

Each incoming field vector is scored as cosine distance against a fused
anchor built from the receiver's own stored field vectors; the per-field
drifts are aggregated with the receiver's role weights and classified by an
ordered four-way band-pass rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, NamedTuple, Optional, Sequence

from .cat7 import CMB, FIELD_ORDER, FieldName
from .errors import (
    AllWeightsZero,
    DimensionMismatch,
    EmptyCandidates,
    MissingField,
    ZeroVector,
)

DEFAULT_T_RED = 0.10
DEFAULT_T_ALN = 0.25
DEFAULT_T_GRD = 0.50

# One-hour half-life, in per-millisecond units.
DEFAULT_LAMBDA = math.log(2) / 3_600_000

CLOSED_FORM_METHOD = "svaf-closed-form"

# Drift recorded for a field with no usable anchor (cold start / all
# candidates anti-aligned).
COLD_START_DRIFT = 1.0


class Decision(str, Enum):
    REDUNDANT = "redundant"
    ALIGNED = "aligned"
    GUARDED = "guarded"
    REJECTED = "rejected"


@dataclass(frozen=True)
class RoleProfile:
    node_role: str
    alpha: Mapping[FieldName, float]
    lambda_decay: float = DEFAULT_LAMBDA

    def __post_init__(self):
        alpha = {name: float(self.alpha.get(name, 0.0)) for name in FIELD_ORDER}
        if any(a < 0 for a in alpha.values()):
            raise ValueError("field weights must be nonnegative")
        if sum(alpha.values()) <= 0:
            raise ValueError("at least one field weight must be positive")
        if self.lambda_decay < 0:
            raise ValueError("decay rate must be nonnegative")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def uniform(cls, node_role: str = "default", **kwargs) -> "RoleProfile":
        return cls(node_role, {name: 1.0 for name in FIELD_ORDER}, **kwargs)


@dataclass(frozen=True)
class Thresholds:
    t_red: float = DEFAULT_T_RED
    t_aln: float = DEFAULT_T_ALN
    t_grd: float = DEFAULT_T_GRD

    def __post_init__(self):
        if not 0 < self.t_red < self.t_aln < self.t_grd:
            raise ValueError(
                f"thresholds must satisfy 0 < red < aligned < guarded, "
                f"got {self.t_red}, {self.t_aln}, {self.t_grd}"
            )


@dataclass(frozen=True)
class SvafResult:
    field_drifts: Mapping[FieldName, float]
    total_drift: float
    decision: Decision
    method: str = CLOSED_FORM_METHOD
    anchor_basis_size: Optional[Mapping[FieldName, int]] = None
    # Opaque pass-through (e.g. captured gate values from a neural-gated
    # fixture); never produced by the closed-form evaluator.
    extras: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "field_drifts", dict(self.field_drifts))
        if self.anchor_basis_size is not None:
            object.__setattr__(
                self, "anchor_basis_size", dict(self.anchor_basis_size)
            )
        object.__setattr__(self, "extras", dict(self.extras))


class AnchorCandidate(NamedTuple):
    vector: tuple[float, ...]
    created_at: int
    confidence: float = 1.0


StoreView = Mapping[FieldName, Sequence[AnchorCandidate]]


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise DimensionMismatch(f"dims {len(a)} vs {len(b)}")
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(x * x for x in b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero vector")
    return math.fsum(x * y for x, y in zip(a, b)) / (na * nb)


def field_drift(anchor: Sequence[float], incoming: Sequence[float]) -> float:
    """Cosine distance in [0, 2]."""
    return 1.0 - cosine(anchor, incoming)


def fusion_weights(
    candidates: Sequence[AnchorCandidate],
    incoming: Sequence[float],
    alpha_f: float,
    lam: float,
    now: int,
) -> list[float]:
    """Normalized fusion weights for each candidate.

    Raw weight is alpha * cos(incoming, candidate) * exp(-lam * age) *
    confidence, with negative cosine clamped to zero so the fused anchor
    stays a convex combination. Exposed separately as the test hook for the
    sum-to-one property.
    """
    if not candidates:
        raise EmptyCandidates("fuse_anchor requires at least one candidate")
    raw = []
    for cand in candidates:
        sim = max(0.0, cosine(incoming, cand.vector))
        decay = math.exp(-lam * (now - cand.created_at))
        raw.append(alpha_f * sim * decay * cand.confidence)
    total = math.fsum(raw)
    if total <= 0.0:
        raise AllWeightsZero("every candidate is anti-aligned with the incoming vector")
    return [w / total for w in raw]


def fuse_anchor(
    candidates: Sequence[AnchorCandidate],
    incoming: Sequence[float],
    alpha_f: float,
    lam: float,
    now: int,
) -> tuple[float, ...]:
    """Weighted average of stored field vectors, re-normalized to unit length."""
    weights = fusion_weights(candidates, incoming, alpha_f, lam, now)
    dim = len(incoming)
    fused = [0.0] * dim
    for w, cand in zip(weights, candidates):
        for i in range(dim):
            fused[i] += w * cand.vector[i]
    norm = math.sqrt(math.fsum(x * x for x in fused))
    if norm == 0.0:
        raise AllWeightsZero("fused anchor collapsed to zero")
    return tuple(x / norm for x in fused)


def classify(
    field_drifts: Mapping[FieldName, float],
    profile: RoleProfile,
    th: Thresholds,
) -> tuple[float, Decision]:
    """Ordered band-pass rule. Redundancy is per-field: every drift must sit
    below the redundancy threshold; a low aggregate alone never qualifies."""
    missing = [f.value for f in FIELD_ORDER if f not in field_drifts]
    if missing:
        raise MissingField(f"missing drifts for: {missing}")
    alpha_sum = math.fsum(profile.alpha[f] for f in FIELD_ORDER)
    total = (
        math.fsum(profile.alpha[f] * field_drifts[f] for f in FIELD_ORDER)
        / alpha_sum
    )
    if max(field_drifts[f] for f in FIELD_ORDER) < th.t_red:
        return total, Decision.REDUNDANT
    if total <= th.t_aln:
        return total, Decision.ALIGNED
    if total <= th.t_grd:
        return total, Decision.GUARDED
    return total, Decision.REJECTED


def evaluate_detailed(
    store_view: StoreView,
    incoming: CMB,
    profile: RoleProfile,
    th: Thresholds,
    now: int,
) -> tuple[SvafResult, dict[FieldName, Optional[tuple[float, ...]]]]:
    """Run the gate and also return the per-field fused anchors (None where
    no anchor could be formed), which the remix transform blends against."""
    anchors: dict[FieldName, Optional[tuple[float, ...]]] = {}
    basis: dict[FieldName, int] = {}

    if all(not store_view.get(f) for f in FIELD_ORDER):
        # Cold start: nothing stored yet; admit guarded so the mesh can
        # bootstrap, recording the absent-anchor marker drift everywhere.
        drifts = {f: COLD_START_DRIFT for f in FIELD_ORDER}
        total = math.fsum(
            profile.alpha[f] * drifts[f] for f in FIELD_ORDER
        ) / math.fsum(profile.alpha[f] for f in FIELD_ORDER)
        return (
            SvafResult(
                field_drifts=drifts,
                total_drift=total,
                decision=Decision.GUARDED,
                anchor_basis_size={f: 0 for f in FIELD_ORDER},
            ),
            {f: None for f in FIELD_ORDER},
        )

    drifts: dict[FieldName, float] = {}
    for name in FIELD_ORDER:
        candidates = list(store_view.get(name) or ())
        incoming_vec = incoming.header[name].vector
        if not candidates:
            anchors[name] = None
            basis[name] = 0
            drifts[name] = COLD_START_DRIFT
            continue
        try:
            anchor = fuse_anchor(
                candidates, incoming_vec, profile.alpha[name], profile.lambda_decay, now
            )
        except AllWeightsZero:
            anchors[name] = None
            basis[name] = 0
            drifts[name] = COLD_START_DRIFT
            continue
        anchors[name] = anchor
        basis[name] = len(candidates)
        drifts[name] = field_drift(anchor, incoming_vec)

    total, decision = classify(drifts, profile, th)
    result = SvafResult(
        field_drifts=drifts,
        total_drift=total,
        decision=decision,
        anchor_basis_size=basis,
    )
    return result, anchors


def evaluate(
    store_view: StoreView,
    incoming: CMB,
    profile: RoleProfile,
    th: Thresholds,
    now: int,
) -> SvafResult:
    result, _ = evaluate_detailed(store_view, incoming, profile, th, now)
    return result
