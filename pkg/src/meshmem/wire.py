"""Wire codec: JSON frames and stored-entry records.

One frame or entry per line on the stream transport (newline framing). The
decoder accepts any key order and tolerates lossy wire floats (vectors are
re-normalized on ingest); the encoder emits exactly one canonical key order
with shortest round-trip decimals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Union

from .cat7 import (
    CMB,
    DEFAULT_DIM,
    FIELD_ORDER,
    KEY_RE,
    Cat7Header,
    FieldName,
    FieldValue,
    Lineage,
)
from .entry import Lifecycle, StoredEntry, Tier
from .errors import (
    MalformedCMB,
    MalformedEntry,
    MalformedFrame,
    MoodOutOfRange,
    SchemaViolation,
)
from .svaf import Decision, SvafResult

FRAME_TYPE = "cmb"

# Wire floats may have been shortened in transit; accept this much norm
# deviation and re-normalize on ingest (internal tolerance stays 1e-6).
WIRE_NORM_TOLERANCE = 1e-3

_FRAME_KEYS = {"type", "timestamp", "cmb"}
_ENTRY_KEYS = {
    "key", "source", "tier", "lifecycle", "storedAt", "anchorWeight", "cmb", "svaf",
}
_SVAF_KEYS = {"method", "decision", "totalDrift", "fieldDrifts", "anchorBasisSize"}


@dataclass(frozen=True)
class WireFrame:
    timestamp: int
    cmb: CMB
    type: str = FRAME_TYPE
    extensions: Mapping[str, Any] = field(default_factory=dict)


def _dumps(obj: Any) -> bytes:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _cmb_to_obj(cmb: CMB) -> dict:
    fields = {}
    for name in FIELD_ORDER:
        fv = cmb.header[name]
        obj: dict[str, Any] = {"text": fv.text}
        if name is FieldName.MOOD:
            obj["valence"] = fv.valence
            obj["arousal"] = fv.arousal
        obj["vector"] = list(fv.vector)
        fields[name.value] = obj
    out: dict[str, Any] = {
        "key": cmb.key,
        "createdBy": cmb.created_by,
        "createdAt": cmb.created_at,
        "fields": fields,
        "lineage": {
            "parents": list(cmb.lineage.parents),
            "ancestors": list(cmb.lineage.ancestors),
            "method": cmb.lineage.method,
        },
    }
    if cmb.body is not None:
        out["body"] = cmb.body
    return out


def _ingest_vector(raw: Any, d: int, where: str) -> tuple[float, ...]:
    if not isinstance(raw, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw
    ):
        raise SchemaViolation(where, "vector must be a numeric array")
    if len(raw) != d:
        raise SchemaViolation(where, f"vector length {len(raw)} != {d}")
    vec = tuple(float(x) for x in raw)
    norm = math.sqrt(math.fsum(x * x for x in vec))
    if abs(norm - 1.0) > WIRE_NORM_TOLERANCE:
        raise SchemaViolation(where, f"vector norm {norm} outside wire tolerance")
    if abs(norm - 1.0) > 1e-9:
        vec = tuple(x / norm for x in vec)
    return vec


def _obj_to_cmb(obj: Any, d: int) -> CMB:
    if not isinstance(obj, dict):
        raise MalformedFrame("cmb must be an object")
    key = obj.get("key")
    if not isinstance(key, str) or not KEY_RE.match(key):
        raise SchemaViolation("key", f"bad key {key!r}")
    created_by = obj.get("createdBy")
    if not isinstance(created_by, str) or not created_by:
        raise SchemaViolation("createdBy", "missing or empty")
    created_at = obj.get("createdAt")
    if not isinstance(created_at, int):
        raise SchemaViolation("createdAt", "must be integer milliseconds")
    raw_fields = obj.get("fields")
    if not isinstance(raw_fields, dict):
        raise SchemaViolation("fields", "missing fields object")
    fields = {}
    for name in FIELD_ORDER:
        raw = raw_fields.get(name.value)
        if raw is None:
            raise SchemaViolation(name.value, "missing")
        if not isinstance(raw, dict):
            raise SchemaViolation(name.value, "must be an object")
        text = raw.get("text")
        if not isinstance(text, str) or not text:
            raise SchemaViolation(name.value, "missing text")
        vector = _ingest_vector(raw.get("vector"), d, name.value)
        if name is FieldName.MOOD:
            valence = raw.get("valence")
            arousal = raw.get("arousal")
            if not isinstance(valence, (int, float)) or not isinstance(
                arousal, (int, float)
            ):
                raise SchemaViolation("mood", "missing valence/arousal")
            try:
                fields[name] = FieldValue(
                    text=text,
                    vector=vector,
                    valence=float(valence),
                    arousal=float(arousal),
                )
            except MoodOutOfRange as exc:
                raise SchemaViolation("mood", str(exc)) from exc
        else:
            fields[name] = FieldValue(text=text, vector=vector)
    raw_lineage = obj.get("lineage") or {}
    if not isinstance(raw_lineage, dict):
        raise SchemaViolation("lineage", "must be an object")
    parents = raw_lineage.get("parents") or []
    ancestors = raw_lineage.get("ancestors") or []
    method = raw_lineage.get("method")
    if not all(isinstance(k, str) for k in list(parents) + list(ancestors)):
        raise SchemaViolation("lineage", "keys must be strings")
    if method is not None and not isinstance(method, str):
        raise SchemaViolation("lineage", "method must be a string or null")
    body = obj.get("body")
    try:
        return CMB(
            key=key,
            created_by=created_by,
            created_at=created_at,
            header=Cat7Header(fields),
            body=body,
            lineage=Lineage(
                parents=tuple(parents), ancestors=tuple(ancestors), method=method
            ),
        )
    except MalformedCMB as exc:
        raise SchemaViolation("cmb", str(exc)) from exc


def encode_frame(
    cmb: CMB, now: int, extensions: Optional[Mapping[str, Any]] = None
) -> bytes:
    out: dict[str, Any] = {
        "type": FRAME_TYPE,
        "timestamp": now,
        "cmb": _cmb_to_obj(cmb),
    }
    for k in sorted(extensions or {}):
        out[k] = extensions[k]
    return _dumps(out)


def decode_frame(data: Union[bytes, str], d: int = DEFAULT_DIM) -> WireFrame:
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedFrame(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedFrame("frame must be an object")
    if obj.get("type") != FRAME_TYPE:
        raise MalformedFrame(f"frame type must be {FRAME_TYPE!r}")
    timestamp = obj.get("timestamp")
    if not isinstance(timestamp, int):
        raise MalformedFrame("timestamp must be integer milliseconds")
    cmb = _obj_to_cmb(obj.get("cmb"), d)
    extensions = {k: v for k, v in obj.items() if k not in _FRAME_KEYS}
    return WireFrame(timestamp=timestamp, cmb=cmb, extensions=extensions)


def _svaf_to_obj(svaf: SvafResult) -> dict:
    out: dict[str, Any] = {
        "method": svaf.method,
        "decision": svaf.decision.value,
        "totalDrift": svaf.total_drift,
        "fieldDrifts": {
            name.value: svaf.field_drifts[name] for name in FIELD_ORDER
        },
    }
    if svaf.anchor_basis_size is not None:
        out["anchorBasisSize"] = {
            name.value: svaf.anchor_basis_size[name] for name in FIELD_ORDER
        }
    for k in sorted(svaf.extras):
        out[k] = svaf.extras[k]
    return out


def _obj_to_svaf(obj: Any) -> SvafResult:
    if not isinstance(obj, dict):
        raise MalformedEntry("svaf must be an object")
    decision = obj.get("decision")
    try:
        decision = Decision(decision)
    except ValueError:
        raise MalformedEntry(f"bad svaf decision {decision!r}")
    method = obj.get("method")
    if not isinstance(method, str):
        raise MalformedEntry("svaf method must be a string")
    total = obj.get("totalDrift")
    if not isinstance(total, (int, float)):
        raise MalformedEntry("totalDrift must be numeric")
    raw_drifts = obj.get("fieldDrifts")
    if not isinstance(raw_drifts, dict):
        raise MalformedEntry("fieldDrifts must be an object")
    drifts = {}
    for name in FIELD_ORDER:
        value = raw_drifts.get(name.value)
        if not isinstance(value, (int, float)):
            raise MalformedEntry(f"missing drift for {name.value}")
        drifts[name] = float(value)
    basis = None
    if "anchorBasisSize" in obj:
        raw_basis = obj["anchorBasisSize"]
        if not isinstance(raw_basis, dict):
            raise MalformedEntry("anchorBasisSize must be an object")
        basis = {name: int(raw_basis.get(name.value, 0)) for name in FIELD_ORDER}
    extras = {k: v for k, v in obj.items() if k not in _SVAF_KEYS}
    return SvafResult(
        field_drifts=drifts,
        total_drift=float(total),
        decision=decision,
        method=method,
        anchor_basis_size=basis,
        extras=extras,
    )


def encode_entry(e: StoredEntry) -> bytes:
    out: dict[str, Any] = {
        "key": e.key,
        "source": e.source,
        "tier": e.tier.value,
        "lifecycle": e.lifecycle.value,
        "storedAt": e.stored_at,
        "anchorWeight": e.anchor_weight,
        "cmb": _cmb_to_obj(e.cmb),
    }
    if e.svaf is not None:
        out["svaf"] = _svaf_to_obj(e.svaf)
    for k in sorted(e.extensions):
        out[k] = e.extensions[k]
    return _dumps(out)


def decode_entry(data: Union[bytes, str], d: int = DEFAULT_DIM) -> StoredEntry:
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedEntry(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedEntry("entry must be an object")
    try:
        cmb = _obj_to_cmb(obj.get("cmb"), d)
    except (MalformedFrame, SchemaViolation) as exc:
        raise MalformedEntry(str(exc)) from exc
    key = obj.get("key", cmb.key)
    source = obj.get("source")
    if not isinstance(source, str) or not source:
        raise MalformedEntry("missing source")
    lifecycle = obj.get("lifecycle")
    try:
        lifecycle = Lifecycle(lifecycle)
    except ValueError:
        raise MalformedEntry(f"bad lifecycle {lifecycle!r}")
    tier = obj.get("tier", "hot")
    try:
        tier = Tier(tier)
    except ValueError:
        raise MalformedEntry(f"bad tier {tier!r}")
    stored_at = obj.get("storedAt")
    if not isinstance(stored_at, int):
        raise MalformedEntry("storedAt must be integer milliseconds")
    anchor_weight = obj.get("anchorWeight", 1)
    if not isinstance(anchor_weight, (int, float)):
        raise MalformedEntry("anchorWeight must be numeric")
    svaf = None
    if "svaf" in obj:
        svaf = _obj_to_svaf(obj["svaf"])
    extensions = {k: v for k, v in obj.items() if k not in _ENTRY_KEYS}
    return StoredEntry(
        key=key,
        cmb=cmb,
        source=source,
        stored_at=stored_at,
        lifecycle=lifecycle,
        tier=tier,
        anchor_weight=float(anchor_weight),
        svaf=svaf,
        extensions=extensions,
    )
