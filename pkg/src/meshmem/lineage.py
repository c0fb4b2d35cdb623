"""Content-addressed lineage graph.

Tracks parent edges between block keys, the set of keys this node itself
produced, ancestor closures with a depth bound, set-intersection echo
detection, and mark-and-sweep retention with ancestor protection.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Optional

from .cat7 import CMB, MAX_ANCESTORS
from .errors import CycleDetected, DuplicateKey, SelfParent, UnknownKey


class LineageIndex:
    def __init__(self, node_id: str):
        self.node_id = node_id
        self.adjacency: dict[str, tuple[str, ...]] = {}
        self.reverse: dict[str, list[str]] = {}
        self.self_keys: set[str] = set()
        # Keys whose carried ancestor cache disagreed with the local closure.
        self.flagged: set[str] = set()
        # Keys seen in echo-dropped frames; recorded edge-free.
        self.sighted: set[str] = set()

    def __contains__(self, key: str) -> bool:
        return key in self.adjacency

    def insert(self, cmb: CMB) -> None:
        key = cmb.key
        if key in self.adjacency:
            raise DuplicateKey(key)
        parents = cmb.lineage.parents
        if key in parents:
            raise SelfParent(key)
        # Keys are content hashes over parent-inclusive input, so honest
        # cycles cannot occur; guard anyway against a forged frontier loop.
        if parents and key in self._closure(parents, depth_bound=None):
            raise CycleDetected(key)
        self.adjacency[key] = parents
        for p in parents:
            self.reverse.setdefault(p, []).append(key)
        if cmb.created_by == self.node_id:
            self.self_keys.add(key)
        if parents:
            carried = set(cmb.lineage.ancestors)
            local = self._closure(parents, depth_bound=MAX_ANCESTORS) | set(parents)
            if carried != local:
                self.flagged.add(key)

    def remove(self, key: str) -> None:
        parents = self.adjacency.pop(key, ())
        for p in parents:
            children = self.reverse.get(p)
            if children and key in children:
                children.remove(key)
                if not children:
                    del self.reverse[p]
        self.self_keys.discard(key)
        self.flagged.discard(key)

    def _closure(
        self, roots: Iterable[str], depth_bound: Optional[int]
    ) -> set[str]:
        """BFS over parent edges starting from the roots' parents; the roots
        themselves are excluded. Unknown keys stay as frontier members but
        are not expanded."""
        seen: set[str] = set()
        frontier = deque(roots)
        result: set[str] = set()
        depth = 0
        while frontier and (depth_bound is None or depth < depth_bound):
            next_frontier: deque[str] = deque()
            for key in frontier:
                for p in self.adjacency.get(key, ()):
                    if p not in seen:
                        seen.add(p)
                        result.add(p)
                        next_frontier.append(p)
            frontier = next_frontier
            depth += 1
        return result

    def ancestors(
        self, key: str, depth_bound: Optional[int] = MAX_ANCESTORS
    ) -> set[str]:
        """Transitive parent closure of a known key, truncated after
        depth_bound BFS levels. Unknown parent keys appear as frontier
        members without being expanded."""
        if key not in self.adjacency:
            raise UnknownKey(key)
        parents = set(self.adjacency[key])
        if depth_bound is not None and depth_bound <= 0:
            return set()
        deeper = self._closure(
            self.adjacency[key],
            depth_bound=None if depth_bound is None else depth_bound - 1,
        )
        return parents | deeper

    def incoming_ancestry(self, incoming: CMB) -> set[str]:
        """Ancestor set of a not-yet-inserted incoming block: its carried
        ancestors list unioned with the locally-derived closure of its
        carried parents (the cache is advisory; we re-derive defensively)."""
        parents = set(incoming.lineage.parents)
        carried = set(incoming.lineage.ancestors)
        local = self._closure(incoming.lineage.parents, depth_bound=MAX_ANCESTORS)
        return parents | carried | local

    def is_echo(self, incoming: CMB) -> bool:
        """True iff any of the incoming block's ancestors is one of our own
        produced keys. Hash-set membership, constant time per probe."""
        return not self.incoming_ancestry(incoming).isdisjoint(self.self_keys)

    def record_sighting(self, key: str) -> None:
        self.sighted.add(key)

    def prune(self, live_keys: set[str]) -> set[str]:
        """Mark-and-sweep: live keys and every ancestor of a live key (the
        closure is unbounded here; retention must not drop protected
        ancestors past the query depth bound) are protected, everything else
        is removed. Returns the removed keys."""
        protected = set(k for k in live_keys if k in self.adjacency)
        protected |= self._closure(protected, depth_bound=None)
        removed = set(self.adjacency) - protected
        for key in removed:
            self.remove(key)
        return removed
