"""Seven-field cognitive memory blocks: domain types, deterministic text
embedding, canonical serialization, and content-hash key derivation.

A memory block is an immutable (header, body, lineage) triple keyed by a
content hash. The header carries exactly seven named fields, each a piece of
text paired with a unit-length embedding vector; the mood field additionally
carries (valence, arousal) affect coordinates.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional

from .errors import (
    DegenerateEmbedding,
    EmptyText,
    InvalidKeyRequest,
    MalformedCMB,
    MoodOutOfRange,
)

DEFAULT_DIM = 32
MAX_ANCESTORS = 50
KEY_RE = re.compile(r"^cmb-[0-9a-f]{32}$")

_FIELD_SEP = b"\x1f"
_RECORD_SEP = b"\x1e"


class FieldName(str, Enum):
    FOCUS = "focus"
    ISSUE = "issue"
    INTENT = "intent"
    MOTIVATION = "motivation"
    COMMITMENT = "commitment"
    PERSPECTIVE = "perspective"
    MOOD = "mood"


# Canonical ordering used everywhere fields are iterated or serialized.
FIELD_ORDER: tuple[FieldName, ...] = (
    FieldName.FOCUS,
    FieldName.ISSUE,
    FieldName.INTENT,
    FieldName.MOTIVATION,
    FieldName.COMMITMENT,
    FieldName.PERSPECTIVE,
    FieldName.MOOD,
)


def _norm(vector: tuple[float, ...]) -> float:
    return math.sqrt(math.fsum(x * x for x in vector))


def embed_text(text: str, d: int = DEFAULT_DIM) -> tuple[float, ...]:
    """Deterministic unit embedding of a text.

    Character trigrams of the lowercased text (padded with start/end
    sentinels so even one-character texts produce a trigram) are
    feature-hashed into d signed buckets, then L2-normalized.
    """
    if not text:
        raise EmptyText("cannot embed empty text")
    if d < 2:
        raise ValueError(f"embedding dimension must be >= 2, got {d}")
    padded = "\x02" + text.lower() + "\x03"
    acc = [0.0] * d
    for i in range(len(padded) - 2):
        digest = hashlib.blake2b(
            padded[i : i + 3].encode("utf-8"), digest_size=8
        ).digest()
        bucket = int.from_bytes(digest[:4], "big") % d
        sign = 1.0 if digest[4] & 1 else -1.0
        acc[bucket] += sign
    norm = _norm(tuple(acc))
    if norm == 0.0:
        raise DegenerateEmbedding(f"all-zero accumulator for {text!r}")
    return tuple(x / norm for x in acc)


@dataclass(frozen=True)
class FieldValue:
    text: str
    vector: tuple[float, ...]
    valence: Optional[float] = None
    arousal: Optional[float] = None

    def __post_init__(self):
        if not self.text:
            raise EmptyText("field text must be nonempty")
        object.__setattr__(self, "vector", tuple(float(x) for x in self.vector))
        norm = _norm(self.vector)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"field vector must be unit length, norm={norm}")
        for name, coord in (("valence", self.valence), ("arousal", self.arousal)):
            if coord is not None and not -1.0 <= coord <= 1.0:
                raise MoodOutOfRange(f"{name}={coord} outside [-1, 1]")

    @property
    def has_mood_coords(self) -> bool:
        return self.valence is not None and self.arousal is not None


@dataclass(frozen=True)
class Cat7Header:
    fields: Mapping[FieldName, FieldValue]

    def __post_init__(self):
        fields = dict(self.fields)
        missing = [f.value for f in FIELD_ORDER if f not in fields]
        if missing:
            raise MalformedCMB(f"missing header fields: {missing}")
        extra = [k for k in fields if k not in FIELD_ORDER]
        if extra:
            raise MalformedCMB(f"unknown header fields: {extra}")
        for name, value in fields.items():
            if name is FieldName.MOOD:
                if not value.has_mood_coords:
                    raise MalformedCMB("mood field requires valence and arousal")
            elif value.valence is not None or value.arousal is not None:
                raise MalformedCMB(f"{name.value} must not carry mood coordinates")
        object.__setattr__(self, "fields", dict(fields))

    def __getitem__(self, name: FieldName) -> FieldValue:
        return self.fields[name]


Body = Optional[Mapping[str, Any]]


@dataclass(frozen=True)
class Lineage:
    parents: tuple[str, ...] = ()
    ancestors: tuple[str, ...] = ()
    method: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "ancestors", tuple(self.ancestors))
        if self.parents and not set(self.parents) <= set(self.ancestors):
            raise MalformedCMB("parents must be a subset of ancestors")
        if len(self.ancestors) > MAX_ANCESTORS:
            raise MalformedCMB(
                f"ancestors list exceeds bound of {MAX_ANCESTORS}"
            )


@dataclass(frozen=True)
class CMB:
    key: str
    created_by: str
    created_at: int
    header: Cat7Header
    body: Body = None
    lineage: Lineage = field(default_factory=Lineage)

    def __post_init__(self):
        if not KEY_RE.match(self.key):
            raise MalformedCMB(f"bad key format: {self.key!r}")
        if not self.created_by:
            raise MalformedCMB("createdBy must be nonempty")


def _float_repr(x: float) -> str:
    # repr() of a Python float is the shortest round-tripping decimal.
    return repr(float(x))


def canonical_bytes(header: Cat7Header, body: Body = None) -> bytes:
    """Deterministic byte form of a header+body, injective up to float
    round-trip. Field order is fixed; body keys are sorted."""
    records = []
    for name in FIELD_ORDER:
        value = header[name]
        parts = [name.value.encode(), value.text.encode("utf-8")]
        if name is FieldName.MOOD:
            parts.append(_float_repr(value.valence).encode())
            parts.append(_float_repr(value.arousal).encode())
        parts.append(",".join(_float_repr(x) for x in value.vector).encode())
        records.append(_FIELD_SEP.join(parts))
    out = _RECORD_SEP.join(records)
    if body is not None:
        out += _RECORD_SEP + json.dumps(
            body, sort_keys=True, separators=(",", ":"), ensure_ascii=False
        ).encode("utf-8")
    return out


def derive_key(
    header: Cat7Header,
    body: Body = None,
    parent_key: Optional[str] = None,
    receiver: Optional[str] = None,
) -> str:
    """Content-hash key: "cmb-" + 128-bit blake2b over the canonical bytes,
    with the parent key and receiver id appended for remix keys."""
    if (parent_key is None) != (receiver is None):
        raise InvalidKeyRequest(
            "parent_key and receiver must be given together or not at all"
        )
    material = canonical_bytes(header, body)
    if parent_key is not None:
        material += _RECORD_SEP + parent_key.encode()
        material += _RECORD_SEP + receiver.encode()
    digest = hashlib.blake2b(material, digest_size=16).hexdigest()
    return f"cmb-{digest}"


def make_observation(
    node_id: str,
    field_texts: Mapping[FieldName, str],
    mood_coords: tuple[float, float],
    body: Body,
    now: int,
    d: int = DEFAULT_DIM,
) -> CMB:
    """Build a first-observation block: empty lineage, key from content."""
    valence, arousal = mood_coords
    if not (-1.0 <= valence <= 1.0 and -1.0 <= arousal <= 1.0):
        raise MoodOutOfRange(f"mood coords ({valence}, {arousal}) outside [-1, 1]^2")
    fields = {}
    for name in FIELD_ORDER:
        text = field_texts.get(name)
        if not text:
            raise EmptyText(f"missing or empty text for field {name.value}")
        if name is FieldName.MOOD:
            fields[name] = FieldValue(
                text=text, vector=embed_text(text, d), valence=valence, arousal=arousal
            )
        else:
            fields[name] = FieldValue(text=text, vector=embed_text(text, d))
    header = Cat7Header(fields)
    return CMB(
        key=derive_key(header, body),
        created_by=node_id,
        created_at=now,
        header=header,
        body=body,
        lineage=Lineage(),
    )
