"""Per-node persistent remix store.

The store enforces the write-time filtering invariant: it holds only this
node's own observations and its own remixes of admitted peer blocks, never a
raw peer block. Persistence is an append-only log of wire-entry records, one
per line, compacted on prune.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from typing import Mapping, Optional

from .cat7 import (
    CMB,
    DEFAULT_DIM,
    FIELD_ORDER,
    MAX_ANCESTORS,
    Cat7Header,
    FieldName,
    FieldValue,
    Lineage,
    derive_key,
    embed_text,
    make_observation,
)
from .entry import Lifecycle, StoredEntry, Tier
from .errors import (
    CorruptStore,
    DuplicateKey,
    MalformedEntry,
    NotAdmitted,
    ObserveConflict,
    StorageFailure,
    UnknownKey,
)
from .lineage import LineageIndex
from .svaf import (
    CLOSED_FORM_METHOD,
    AnchorCandidate,
    Decision,
    RoleProfile,
    SvafResult,
    Thresholds,
    cosine,
    evaluate_detailed,
)
from .wire import decode_entry, encode_entry

DEFAULT_TTL_MS = 7 * 24 * 3_600_000
DEFAULT_HOT_AGE_MS = 3_600_000
DEFAULT_WARM_AGE_MS = 24 * 3_600_000
DEFAULT_BETA = 0.5


@dataclass(frozen=True)
class ReceiveOutcome:
    kind: str  # stored | echo_dropped | redundant_dropped | rejected_dropped
    entry: Optional[StoredEntry] = None
    svaf: Optional[SvafResult] = None

    @property
    def stored(self) -> bool:
        return self.kind == "stored"


class MeshMem:
    def __init__(
        self,
        node_id: str,
        role_name: str,
        profile: RoleProfile,
        thresholds: Thresholds,
        persistence_path: Optional[str] = None,
        d: int = DEFAULT_DIM,
        beta: float = DEFAULT_BETA,
        ttl_ms: int = DEFAULT_TTL_MS,
        hot_age_ms: int = DEFAULT_HOT_AGE_MS,
        warm_age_ms: int = DEFAULT_WARM_AGE_MS,
    ):
        self.node_id = node_id
        self.role_name = role_name
        self.profile = profile
        self.thresholds = thresholds
        self.persistence_path = persistence_path
        self.d = d
        self.beta = beta
        self.ttl_ms = ttl_ms
        self.hot_age_ms = hot_age_ms
        self.warm_age_ms = warm_age_ms
        self.entries: dict[str, StoredEntry] = {}
        self.lineage = LineageIndex(node_id)

    # --- persistence ---

    @classmethod
    def load(cls, persistence_path: str, **kwargs) -> "MeshMem":
        """Rebuild a store from its append-only log. A fresh or absent file
        yields an empty store (cold start)."""
        store = cls(persistence_path=persistence_path, **kwargs)
        if not os.path.exists(persistence_path):
            return store
        with open(persistence_path, "rb") as fh:
            raw = fh.read()
        if not raw:
            return store
        lines = raw.split(b"\n")
        if lines and lines[-1] == b"":
            lines.pop()
        else:
            raise CorruptStore(
                f"truncated final record at index {len(lines) - 1}",
                record_index=len(lines) - 1,
            )
        for i, line in enumerate(lines):
            try:
                entry = decode_entry(line, d=store.d)
            except MalformedEntry as exc:
                raise CorruptStore(
                    f"bad record at index {i}: {exc}", record_index=i
                ) from exc
            if entry.cmb.created_by != store.node_id:
                raise CorruptStore(
                    f"record {i} violates ownership invariant "
                    f"(createdBy={entry.cmb.created_by})",
                    record_index=i,
                )
            store.entries[entry.key] = entry
            store.lineage.insert(entry.cmb)
        return store

    def _append(self, entry: StoredEntry) -> None:
        if self.persistence_path is None:
            return
        try:
            with open(self.persistence_path, "ab") as fh:
                fh.write(encode_entry(entry) + b"\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def _rewrite(self) -> None:
        """Compact the log to exactly the live entries (insertion order)."""
        if self.persistence_path is None:
            return
        tmp = self.persistence_path + ".tmp"
        try:
            with open(tmp, "wb") as fh:
                for entry in self.entries.values():
                    fh.write(encode_entry(entry) + b"\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.persistence_path)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    # --- write paths ---

    def observe(
        self,
        field_texts: Mapping[FieldName, str],
        mood_coords: tuple[float, float],
        body=None,
        now: int = 0,
    ) -> StoredEntry:
        cmb = make_observation(
            self.node_id, field_texts, mood_coords, body, now, d=self.d
        )
        if cmb.key in self.entries or cmb.key in self.lineage:
            raise ObserveConflict(cmb.key)
        entry = StoredEntry(
            key=cmb.key,
            cmb=cmb,
            source=self.node_id,
            stored_at=now,
            lifecycle=Lifecycle.OBSERVED,
            tier=Tier.HOT,
        )
        self.lineage.insert(cmb)
        try:
            self.entries[cmb.key] = entry
            self._append(entry)
        except StorageFailure:
            del self.entries[cmb.key]
            self.lineage.remove(cmb.key)
            raise
        return entry

    def store_view(self) -> dict[FieldName, list[AnchorCandidate]]:
        """Snapshot of per-field anchor candidates from this node's own
        entries. Confidence defaults to 1 for every stored entry."""
        view: dict[FieldName, list[AnchorCandidate]] = {f: [] for f in FIELD_ORDER}
        for entry in self.entries.values():
            for name in FIELD_ORDER:
                view[name].append(
                    AnchorCandidate(
                        vector=entry.cmb.header[name].vector,
                        created_at=entry.stored_at,
                        confidence=1.0,
                    )
                )
        return view

    def _blend(
        self,
        anchor: Optional[tuple[float, ...]],
        incoming: tuple[float, ...],
    ) -> tuple[float, ...]:
        if anchor is None:
            return incoming
        mixed = [
            self.beta * a + (1.0 - self.beta) * v for a, v in zip(anchor, incoming)
        ]
        norm = math.sqrt(math.fsum(x * x for x in mixed))
        if norm == 0.0:
            return incoming
        return tuple(x / norm for x in mixed)

    def remix(
        self,
        incoming: CMB,
        svaf: SvafResult,
        now: int,
        anchors: Optional[Mapping[FieldName, Optional[tuple[float, ...]]]] = None,
    ) -> CMB:
        """Mint this node's role-filtered understanding of an admitted block:
        texts carried verbatim except perspective (rewritten to our role),
        vectors blended toward the fused anchors, lineage through the
        incoming key."""
        if svaf.decision not in (Decision.ALIGNED, Decision.GUARDED):
            raise NotAdmitted(svaf.decision.value)
        anchors = anchors or {}
        fields = {}
        for name in FIELD_ORDER:
            fv = incoming.header[name]
            text = self.role_name if name is FieldName.PERSPECTIVE else fv.text
            if name is FieldName.PERSPECTIVE:
                vector = self._blend(anchors.get(name), embed_text(text, self.d))
            else:
                vector = self._blend(anchors.get(name), fv.vector)
            if name is FieldName.MOOD:
                fields[name] = FieldValue(
                    text=text, vector=vector, valence=fv.valence, arousal=fv.arousal
                )
            else:
                fields[name] = FieldValue(text=text, vector=vector)
        header = Cat7Header(fields)
        ancestors = [incoming.key]
        seen = {incoming.key}
        for k in incoming.lineage.ancestors:
            if k not in seen:
                seen.add(k)
                ancestors.append(k)
        if len(ancestors) < MAX_ANCESTORS and incoming.lineage.parents:
            for k in sorted(self.lineage.incoming_ancestry(incoming)):
                if k not in seen:
                    seen.add(k)
                    ancestors.append(k)
        ancestors = ancestors[:MAX_ANCESTORS]
        return CMB(
            key=derive_key(header, incoming.body, incoming.key, self.node_id),
            created_by=self.node_id,
            created_at=now,
            header=header,
            body=incoming.body,
            lineage=Lineage(
                parents=(incoming.key,),
                ancestors=tuple(ancestors),
                method=CLOSED_FORM_METHOD,
            ),
        )

    def receive(self, incoming: CMB, now: int) -> ReceiveOutcome:
        """Full admission pipeline: duplicate check, echo check, gate
        evaluation, then remix and persist. Drops never mutate the store."""
        if (
            incoming.key in self.entries
            or incoming.key in self.lineage
            or incoming.key in self.lineage.sighted
            or incoming.key in self.lineage.reverse
        ):
            # Re-broadcasts are normal in a mesh; silently absorb.
            return ReceiveOutcome(kind="echo_dropped")
        if self.lineage.is_echo(incoming):
            self.lineage.record_sighting(incoming.key)
            return ReceiveOutcome(kind="echo_dropped")
        svaf, anchors = evaluate_detailed(
            self.store_view(), incoming, self.profile, self.thresholds, now
        )
        if svaf.decision is Decision.REDUNDANT:
            return ReceiveOutcome(kind="redundant_dropped", svaf=svaf)
        if svaf.decision is Decision.REJECTED:
            return ReceiveOutcome(kind="rejected_dropped", svaf=svaf)
        remixed = self.remix(incoming, svaf, now, anchors=anchors)
        entry = StoredEntry(
            key=remixed.key,
            cmb=remixed,
            source=f"{incoming.created_by}+{self.node_id}",
            stored_at=now,
            lifecycle=Lifecycle.REMIXED,
            tier=Tier.HOT,
            svaf=svaf,
        )
        try:
            self.lineage.insert(incoming)
        except DuplicateKey:
            return ReceiveOutcome(kind="echo_dropped")
        try:
            self.lineage.insert(remixed)
            self.entries[remixed.key] = entry
            self._append(entry)
        except StorageFailure:
            self.entries.pop(remixed.key, None)
            self.lineage.remove(remixed.key)
            self.lineage.remove(incoming.key)
            raise
        return ReceiveOutcome(kind="stored", entry=entry, svaf=svaf)

    # --- read paths ---

    def recall(
        self,
        query_texts: Optional[Mapping[FieldName, str]] = None,
        limit: int = 10,
    ) -> list[StoredEntry]:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        entries = list(self.entries.values())
        if not query_texts:
            entries.sort(key=lambda e: e.stored_at, reverse=True)
            return entries[:limit]
        query_vecs = {
            name: embed_text(text, self.d)
            for name, text in query_texts.items()
            if text
        }

        def score(entry: StoredEntry) -> float:
            weighted = 0.0
            alpha_sum = 0.0
            for name, qv in query_vecs.items():
                a = self.profile.alpha[name]
                weighted += a * cosine(qv, entry.cmb.header[name].vector)
                alpha_sum += a
            return weighted / alpha_sum if alpha_sum > 0 else 0.0

        entries.sort(key=lambda e: (score(e), e.stored_at), reverse=True)
        return entries[:limit]

    def fetch(self, key: str) -> StoredEntry:
        try:
            return self.entries[key]
        except KeyError:
            raise UnknownKey(key) from None

    # --- maintenance ---

    def tier_for_age(self, age_ms: int) -> Tier:
        if age_ms < self.hot_age_ms:
            return Tier.HOT
        if age_ms < self.warm_age_ms:
            return Tier.WARM
        return Tier.COLD

    def demote_tiers(self, now: int) -> None:
        """Relabel entries by age. Never changes recall correctness, only
        the storage temperature label."""
        for key, entry in list(self.entries.items()):
            tier = self.tier_for_age(now - entry.stored_at)
            if tier is not entry.tier:
                self.entries[key] = StoredEntry(
                    key=entry.key,
                    cmb=entry.cmb,
                    source=entry.source,
                    stored_at=entry.stored_at,
                    lifecycle=entry.lifecycle,
                    tier=tier,
                    anchor_weight=entry.anchor_weight,
                    svaf=entry.svaf,
                    extensions=entry.extensions,
                )

    def prune(self, now: int, ttl_ms: Optional[int] = None) -> set[str]:
        """Expire entries past their TTL, protecting every ancestor of a
        live entry, then compact the log."""
        ttl = self.ttl_ms if ttl_ms is None else ttl_ms
        if ttl <= 0:
            raise ValueError("ttl must be positive")
        live = {k for k, e in self.entries.items() if e.stored_at + ttl > now}
        removed = self.lineage.prune(live)
        changed = False
        for key in removed:
            if key in self.entries:
                del self.entries[key]
                changed = True
        if changed:
            self._rewrite()
        return removed

    def digest(self) -> str:
        """Stable content digest of the whole store, for trace comparison."""
        h = hashlib.sha256()
        for key in sorted(self.entries):
            h.update(encode_entry(self.entries[key]))
            h.update(b"\n")
        return h.hexdigest()
