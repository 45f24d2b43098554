"""Leveled label hierarchy and label-path set sequences.

Labels live in levels C_0..C_H with C_0 = {root}; every non-root label
has at least one parent in the previous level, so the containment order
induced by the parent edges is automatically asymmetric, anti-reflexive
and transitive. Multiple parents (a DAG) are allowed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class TaxonomyError(ValueError):
    """Malformed taxonomy input (unknown code, bad file, bad level)."""


@dataclass(frozen=True)
class Violation:
    """First structural axiom a taxonomy fails, with a witness."""
    rule: str
    witness: tuple

    def __str__(self):
        return f"{self.rule}: {self.witness}"


@dataclass
class Taxonomy:
    """Label universe indexed by integer id; codes are external names."""

    levels: list[list[int]]            # ids per level, stable order
    codes: dict[int, str]              # id -> code
    parents: dict[int, frozenset[int]] # id -> parent ids (previous level)
    ids: dict[str, int] = field(init=False)
    level_of: dict[int, int] = field(init=False)

    def __post_init__(self):
        self.ids = {code: lid for lid, code in self.codes.items()}
        self.level_of = {lid: k for k, level in enumerate(self.levels)
                         for lid in level}

    @property
    def root(self) -> int:
        return self.levels[0][0]

    @property
    def depth(self) -> int:
        """Index of the deepest level (H)."""
        return len(self.levels) - 1

    def labels_at(self, k: int) -> list[int]:
        if not 0 <= k <= self.depth:
            raise IndexError(f"level {k} outside 0..{self.depth}")
        return self.levels[k]

    def size_at(self, k: int) -> int:
        return len(self.labels_at(k))

    def all_ids(self) -> list[int]:
        return [lid for level in self.levels for lid in level]

    def id_of(self, code: str) -> int:
        try:
            return self.ids[code]
        except KeyError:
            raise TaxonomyError(f"unknown label code: {code!r}") from None

    def ancestors(self, lid: int) -> set[int]:
        """All transitive parents of a label, root included."""
        out: set[int] = set()
        frontier = set(self.parents.get(lid, ()))
        while frontier:
            out |= frontier
            frontier = {p for f in frontier
                        for p in self.parents.get(f, ())} - out
        return out

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        labels = [{"id": lid, "code": self.codes[lid], "level": k,
                   "parents": sorted(self.codes[p] for p in self.parents[lid])}
                  for k, level in enumerate(self.levels) for lid in level]
        return json.dumps({"labels": labels}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Taxonomy":
        try:
            doc = json.loads(text)
            entries = doc["labels"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise TaxonomyError(f"bad taxonomy document: {exc}") from exc
        max_level = max((e["level"] for e in entries), default=-1)
        levels: list[list[int]] = [[] for _ in range(max_level + 1)]
        codes: dict[int, str] = {}
        by_code: dict[str, int] = {}
        for e in entries:
            lid, code, k = int(e["id"]), str(e["code"]), int(e["level"])
            if lid in codes:
                raise TaxonomyError(f"duplicate label id {lid}")
            if code in by_code:
                raise TaxonomyError(f"duplicate label code {code!r}")
            codes[lid] = code
            by_code[code] = lid
            levels[k].append(lid)
        parents = {}
        for e in entries:
            lid = int(e["id"])
            try:
                parents[lid] = frozenset(by_code[c] for c in e.get("parents", []))
            except KeyError as exc:
                raise TaxonomyError(
                    f"label {codes[lid]!r} names unknown parent {exc}") from None
        return cls(levels=levels, codes=codes, parents=parents)


def validate(t: Taxonomy) -> Violation | None:
    """Structural check; returns the first violated axiom or None."""
    if len(t.levels) == 0 or len(t.levels[0]) != 1:
        return Violation("single root", tuple(t.codes[i] for i in
                                              (t.levels[0] if t.levels else ())))
    root = t.root
    if t.parents.get(root):
        return Violation("root has no parent", (t.codes[root],))
    seen: dict[int, int] = {}
    for k, level in enumerate(t.levels):
        for lid in level:
            if lid in seen:
                return Violation("unique level", (t.codes[lid], seen[lid], k))
            seen[lid] = k
    for k, level in enumerate(t.levels):
        for lid in level:
            ps = t.parents.get(lid, frozenset())
            if k > 0 and not ps:
                return Violation("orphan label", (t.codes[lid],))
            for p in ps:
                if p not in seen:
                    return Violation("unknown parent", (t.codes[lid], p))
                if seen[p] != k - 1:
                    return Violation("level order", (t.codes[lid], t.codes[p]))
    return None


@dataclass
class LabelPathSequence:
    """Per-level label sets [L_0, L_1, ...] with an end-of-prediction level.

    ``sets[0]`` is always {root}. ``stop_at`` is the level at which the
    sequence terminates; for gold sequences it equals the deepest level
    carrying labels.
    """

    sets: list[frozenset[int]]
    stop_at: int

    @property
    def depth(self) -> int:
        return len(self.sets) - 1

    def labels_at(self, k: int) -> frozenset[int]:
        return self.sets[k] if k < len(self.sets) else frozenset()

    def all_labels(self) -> set[int]:
        """Union of levels 1 and deeper (root excluded)."""
        out: set[int] = set()
        for s in self.sets[1:]:
            out |= s
        return out


def codes_to_path_sequence(codes, t: Taxonomy) -> LabelPathSequence:
    """Expand leaf-or-interior codes into per-level ancestor unions."""
    if not codes:
        raise TaxonomyError("a proposal needs at least one label code")
    ids = [t.id_of(c) for c in codes]
    deepest = max(t.level_of[i] for i in ids)
    if deepest < 1:
        raise TaxonomyError("label codes must be below the root")
    per_level: list[set[int]] = [set() for _ in range(deepest + 1)]
    per_level[0].add(t.root)
    for lid in ids:
        per_level[t.level_of[lid]].add(lid)
        for anc in t.ancestors(lid):
            per_level[t.level_of[anc]].add(anc)
    return LabelPathSequence(sets=[frozenset(s) for s in per_level],
                             stop_at=deepest)


def level_targets(seq: LabelPathSequence, k: int, t: Taxonomy):
    """Binary target vector of length |C_k|+1; slot 0 is the stop flag.

    Levels past the sequence's termination are rejected: supervision is
    only defined up to (and including) the stop level.
    """
    import numpy as np

    if not 1 <= k <= t.depth:
        raise IndexError(f"level {k} outside 1..{t.depth}")
    if k > seq.stop_at:
        raise TaxonomyError(f"level {k} is past the stop level {seq.stop_at}")
    members = t.labels_at(k)
    vec = np.zeros(len(members) + 1, dtype=np.float64)
    if seq.stop_at == k:
        vec[0] = 1.0
    wanted = seq.labels_at(k)
    for i, lid in enumerate(members):
        if lid in wanted:
            vec[1 + i] = 1.0
    return vec
