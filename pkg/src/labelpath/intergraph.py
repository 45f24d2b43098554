"""Directed discipline-discipline graph built from keyword statistics.

Edge weights follow the micro Rao-Stirling form: for an ordered pair
(a, b) the weight is penetration(a, b)^alpha * disparity(a, b)^beta,
where penetration is the share of a's keyword-occurrence mass that also
appears in b's keyword set, and disparity is one minus the keyword-set
overlap fraction of a. Both lie in [0, 1], and the two directions of a
pair generally differ.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .taxonomy import Taxonomy


class GraphError(ValueError):
    """Statistics or graph data that break a precondition."""


@dataclass
class KeywordStats:
    """Per-discipline keyword occurrence counts.

    counts[label_id][token] is the number of proposals of that discipline
    whose keyword document contains the token (each proposal counts a
    token once).
    """

    counts: dict[int, dict[str, int]] = field(default_factory=dict)

    def keyword_set(self, lid: int) -> set[str]:
        return set(self.counts.get(lid, ()))

    def labels(self) -> list[int]:
        return sorted(self.counts)


def collect_stats(proposals, taxonomy: Taxonomy) -> tuple[KeywordStats, int]:
    """Count each proposal's keyword tokens once per gold discipline.

    Gold codes are expanded to their full ancestor set, so every level of
    the hierarchy accumulates statistics. Proposals without a keywords
    document are skipped; the second return value counts them.
    """
    stats = KeywordStats()
    skipped = 0
    for prop in proposals:
        tokens = set(prop.documents.get("keywords", ()))
        if not tokens:
            skipped += 1
            continue
        label_ids: set[int] = set()
        for code in prop.gold_codes:
            lid = taxonomy.id_of(code)
            label_ids.add(lid)
            label_ids |= taxonomy.ancestors(lid)
        label_ids.discard(taxonomy.root)  # root carries no keywords
        for lid in label_ids:
            bucket = stats.counts.setdefault(lid, {})
            for tok in tokens:
                bucket[tok] = bucket.get(tok, 0) + 1
    return stats, skipped


def penetration(a: int, b: int, stats: KeywordStats) -> float:
    """Share of a's keyword occurrence mass that lies in b's keyword set."""
    fa = stats.counts.get(a)
    if not fa:
        raise GraphError(f"discipline {a} has an empty keyword set")
    kb = stats.keyword_set(b)
    total = sum(fa.values())
    shared = sum(count for tok, count in fa.items() if tok in kb)
    return shared / total


def disparity(a: int, b: int, stats: KeywordStats) -> float:
    """One minus the fraction of a's keywords that b also uses."""
    fa = stats.counts.get(a)
    if not fa:
        raise GraphError(f"discipline {a} has an empty keyword set")
    kb = stats.keyword_set(b)
    overlap = sum(1 for tok in fa if tok in kb)
    return 1.0 - overlap / len(fa)


@dataclass
class InterGraph:
    """Weighted directed graph over every taxonomy label.

    Zero-weight edges are omitted. Nodes without statistics (the root,
    and any discipline that never saw a keyword) stay isolated.
    """

    nodes: list[int]
    edges: dict[tuple[int, int], float]
    alpha: float = 1.0
    beta: float = 1.0
    _nbrs: dict[int, set[int]] = field(init=False, repr=False)

    def __post_init__(self):
        self._nbrs = {n: set() for n in self.nodes}
        for (a, b) in self.edges:
            self._nbrs[a].add(b)
            self._nbrs[b].add(a)

    def weight(self, a: int, b: int) -> float:
        return self.edges.get((a, b), 0.0)

    def neighbors(self, n: int) -> set[int]:
        """Neighbors under the symmetrized edge set."""
        if n not in self._nbrs:
            raise GraphError(f"node {n} not in graph")
        return self._nbrs[n]


def build(stats: KeywordStats, taxonomy: Taxonomy, alpha: float = 1.0,
          beta: float = 1.0) -> InterGraph:
    """Weights for every ordered pair of disciplines with statistics."""
    labels = stats.labels()
    edges: dict[tuple[int, int], float] = {}
    for a in labels:
        for b in labels:
            if a == b:
                continue
            w = (penetration(a, b, stats) ** alpha) \
                * (disparity(a, b, stats) ** beta)
            if w != 0.0:
                edges[(a, b)] = w
    return InterGraph(nodes=taxonomy.all_ids(), edges=edges,
                      alpha=alpha, beta=beta)


def diversity_index(stats: KeywordStats, alpha: float = 1.0,
                    beta: float = 1.0) -> float:
    """Corpus-level diversity diagnostic over all discipline pairs.

    Sum over ordered pairs a != b of (p_a * p_b)^alpha * d(a,b)^beta,
    where p_x is x's share of the total keyword occurrence mass. Not
    consumed by the model; reported for inspection only.
    """
    labels = stats.labels()
    mass = {lid: sum(stats.counts[lid].values()) for lid in labels}
    total = sum(mass.values())
    if total == 0:
        return 0.0
    out = 0.0
    for a in labels:
        for b in labels:
            if a == b:
                continue
            pa, pb = mass[a] / total, mass[b] / total
            out += (pa * pb) ** alpha * disparity(a, b, stats) ** beta
    return out


# ---------------------------------------------------------------------------
# Import/export: TSV (src, dst, weight) and a JSON variant. Weights are
# written with 17 significant digits so float64 round-trips exactly.
# ---------------------------------------------------------------------------


def to_tsv(g: InterGraph, taxonomy: Taxonomy) -> str:
    lines = []
    for (a, b) in sorted(g.edges, key=lambda ab: (taxonomy.codes[ab[0]],
                                                  taxonomy.codes[ab[1]])):
        lines.append(f"{taxonomy.codes[a]}\t{taxonomy.codes[b]}\t"
                     f"{g.edges[(a, b)]:.17g}")
    return "\n".join(lines) + ("\n" if lines else "")


def from_tsv(text: str, taxonomy: Taxonomy, alpha: float = 1.0,
             beta: float = 1.0) -> InterGraph:
    edges = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise GraphError(f"line {lineno}: expected 3 tab-separated fields")
        a, b = taxonomy.id_of(parts[0]), taxonomy.id_of(parts[1])
        edges[(a, b)] = float(parts[2])
    return InterGraph(nodes=taxonomy.all_ids(), edges=edges,
                      alpha=alpha, beta=beta)


def to_json(g: InterGraph, taxonomy: Taxonomy, extra: dict | None = None) -> str:
    doc = {
        "alpha": g.alpha,
        "beta": g.beta,
        "edges": [
            {"src": taxonomy.codes[a], "dst": taxonomy.codes[b],
             "weight": f"{w:.17g}"}
            for (a, b), w in sorted(
                g.edges.items(),
                key=lambda kv: (taxonomy.codes[kv[0][0]], taxonomy.codes[kv[0][1]]))
        ],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1)


def from_json(text: str, taxonomy: Taxonomy) -> InterGraph:
    doc = json.loads(text)
    edges = {(taxonomy.id_of(e["src"]), taxonomy.id_of(e["dst"])):
             float(e["weight"]) for e in doc["edges"]}
    return InterGraph(nodes=taxonomy.all_ids(), edges=edges,
                      alpha=float(doc.get("alpha", 1.0)),
                      beta=float(doc.get("beta", 1.0)))
