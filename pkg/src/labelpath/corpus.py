"""Proposal ingestion, vocabulary, embeddings, and synthetic corpora.

A proposal is a fixed ordered set of typed documents (title, keywords,
abstract, research field) plus its gold label codes. Documents are
tokenized on whitespace (or per character for unsegmented scripts),
truncated at load time, and padded to per-type fixed lengths when
encoded against a vocabulary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .taxonomy import Taxonomy

DOC_TYPES = ("title", "keywords", "abstract", "research_field")

DEFAULT_TYPE_LENGTHS = {
    "title": 32,
    "keywords": 32,
    "abstract": 200,
    "research_field": 32,
}


class CorpusError(ValueError):
    """Malformed corpus input."""


@dataclass
class Proposal:
    id: str
    documents: dict[str, list[str]]  # doc type -> truncated token list
    gold_codes: list[str]


def tokenize(text: str, char_level: bool = False) -> list[str]:
    if char_level:
        return [ch for ch in text if not ch.isspace()]
    return text.split()


def load_jsonl(path, taxonomy: Taxonomy | None = None,
               type_lengths: dict[str, int] | None = None,
               char_level: bool = False) -> tuple[list[Proposal], int]:
    """Read proposals; returns (proposals, number of filtered records).

    Records missing any document field or the labels list are filtered
    out (incomplete records). Malformed JSON raises with the line
    number; unknown label codes raise listing the offending codes.
    """
    lengths = {**DEFAULT_TYPE_LENGTHS, **(type_lengths or {})}
    proposals: list[Proposal] = []
    filtered = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: bad JSON ({exc.msg})") from exc
            fields = {t: rec.get(t) for t in DOC_TYPES}
            labels = rec.get("labels")
            if any(not fields[t] for t in DOC_TYPES) or not labels \
                    or not rec.get("id"):
                filtered += 1
                continue
            if taxonomy is not None:
                unknown = [c for c in labels if c not in taxonomy.ids]
                if unknown:
                    raise CorpusError(
                        f"{path}:{lineno}: unknown label codes {unknown}")
            docs = {t: tokenize(fields[t], char_level)[:lengths[t]]
                    for t in DOC_TYPES}
            proposals.append(Proposal(id=str(rec["id"]), documents=docs,
                                      gold_codes=[str(c) for c in labels]))
    return proposals, filtered


def proposals_to_jsonl(proposals) -> str:
    lines = []
    for p in proposals:
        rec = {"id": p.id}
        for t in DOC_TYPES:
            rec[t] = " ".join(p.documents[t])
        rec["labels"] = list(p.gold_codes)
        lines.append(json.dumps(rec))
    return "\n".join(lines) + ("\n" if lines else "")


class Vocab:
    """token -> index map with reserved PAD (0) and UNK (1) slots."""

    PAD = 0
    UNK = 1

    def __init__(self, tokens):
        self.tokens = ["<pad>", "<unk>"] + list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise CorpusError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    @classmethod
    def build(cls, proposals) -> "Vocab":
        seen: dict[str, None] = {}
        for p in proposals:
            for t in DOC_TYPES:
                for tok in p.documents[t]:
                    seen.setdefault(tok, None)
        return cls(seen.keys())

    def encode(self, tokens, length: int) -> tuple[np.ndarray, np.ndarray]:
        """Index array padded/truncated to ``length`` plus a real-token mask."""
        ids = np.full(length, self.PAD, dtype=np.int64)
        real = np.zeros(length, dtype=bool)
        for i, tok in enumerate(tokens[:length]):
            ids[i] = self.index.get(tok, self.UNK)
            real[i] = True
        return ids, real


def encode_proposal(p: Proposal, vocab: Vocab,
                    type_lengths: dict[str, int]) -> dict[str, tuple]:
    """Per-type (index array, real mask) pairs in DOC_TYPES order."""
    return {t: vocab.encode(p.documents[t], type_lengths[t]) for t in DOC_TYPES}


def random_embeddings(vocab: Vocab, width: int, rng: np.random.Generator,
                      scale: float | None = None) -> np.ndarray:
    """Gaussian rows for every token; PAD stays zero.

    Default scale 1/sqrt(width) keeps token identity visible next to
    the unit-amplitude positional encodings.
    """
    if scale is None:
        scale = 1.0 / math.sqrt(width)
    table = rng.normal(0.0, scale, size=(len(vocab), width)).astype(np.float32)
    table[Vocab.PAD] = 0.0
    return table


def load_embeddings(path, vocab: Vocab, width: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Text-format vectors ("token v1 ... vw" per line) mapped onto vocab.

    Tokens absent from the file get N(0, 0.02^2) rows; the PAD row is
    forced to zero. A width mismatch is a configuration error.
    """
    table = random_embeddings(vocab, width, rng, scale=0.02)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            tok, vals = parts[0], parts[1:]
            if len(vals) != width:
                raise CorpusError(
                    f"{path}:{lineno}: vector width {len(vals)} != {width}")
            idx = vocab.index.get(tok)
            if idx is not None and idx != Vocab.PAD:
                table[idx] = np.array([float(v) for v in vals],
                                      dtype=np.float32)
    table[Vocab.PAD] = 0.0
    return table


# ---------------------------------------------------------------------------
# Synthetic corpora. Each label owns a small keyword pool; proposal text
# is drawn from the pools along its gold label paths plus filler noise,
# so the planted signal is recoverable level by level.
# ---------------------------------------------------------------------------


@dataclass
class SynthSpec:
    seed: int = 0
    branching: tuple = (8, 3, 2)     # level sizes: 8, 8*3, 8*3*2
    keywords_per_label: int = 6
    noise_tokens: int = 50
    doc_lengths: dict = field(default_factory=lambda: {
        "title": 6, "keywords": 12, "abstract": 24, "research_field": 4})
    n_train: int = 200
    n_test: int = 50
    two_major_rate: float = 0.2
    depth_weights: tuple = (0.1, 0.2, 0.7)  # P(path depth = 1..H)
    noise_rate: float = 0.25

    def validate(self) -> None:
        if not self.branching or any(b < 1 for b in self.branching):
            raise CorpusError("branching factors must all be >= 1")
        if len(self.depth_weights) != len(self.branching):
            raise CorpusError("depth_weights length must equal tree depth")
        if not 0.0 <= self.two_major_rate <= 1.0:
            raise CorpusError("two_major_rate must lie in [0, 1]")
        if self.two_major_rate > 0 and self.branching[0] < 2:
            raise CorpusError("two majors need at least 2 top-level labels")
        if not 0.0 <= self.noise_rate < 1.0:
            raise CorpusError("noise_rate must lie in [0, 1)")
        missing = [t for t in DOC_TYPES if t not in self.doc_lengths]
        if missing:
            raise CorpusError(f"doc_lengths missing types: {missing}")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        spec = cls(**{k: tuple(v) if isinstance(v, list) and k in
                      ("branching", "depth_weights") else v
                      for k, v in d.items()})
        spec.validate()
        return spec


def _top_code(i: int) -> str:
    return chr(ord("A") + i) if i < 26 else f"T{i:02d}"


def synth_taxonomy(branching) -> Taxonomy:
    levels: list[list[int]] = [[0]]
    codes = {0: "root"}
    parents: dict[int, frozenset[int]] = {0: frozenset()}
    nid = 1
    prev = [(0, "root")]
    for depth, fanout in enumerate(branching):
        row: list[tuple[int, str]] = []
        for parent_id, parent_code in prev:
            for j in range(fanout):
                code = _top_code(j) if depth == 0 else f"{parent_code}{j + 1:02d}"
                codes[nid] = code
                parents[nid] = frozenset({parent_id})
                row.append((nid, code))
                nid += 1
        levels.append([lid for lid, _ in row])
        prev = row
    return Taxonomy(levels=levels, codes=codes, parents=parents)


def _keyword_pool(code: str, count: int) -> list[str]:
    return [f"{code.lower()}w{j}" for j in range(count)]


def synth_corpus(spec: SynthSpec) -> tuple[Taxonomy, list[Proposal], list[Proposal]]:
    """Deterministic planted-signal corpus; returns (taxonomy, train, test)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    taxonomy = synth_taxonomy(spec.branching)
    depth = taxonomy.depth
    pools = {lid: _keyword_pool(taxonomy.codes[lid], spec.keywords_per_label)
             for lid in taxonomy.all_ids() if lid != taxonomy.root}
    noise = [f"filler{j}" for j in range(spec.noise_tokens)]
    children: dict[int, list[int]] = {lid: [] for lid in taxonomy.all_ids()}
    for lid, ps in taxonomy.parents.items():
        for p in ps:
            children[p].append(lid)
    for kids in children.values():
        kids.sort(key=lambda lid: taxonomy.codes[lid])

    weights = np.asarray(spec.depth_weights, dtype=np.float64)
    weights = weights / weights.sum()

    def sample_path(path_depth: int, avoid_top: int | None = None) -> list[int]:
        node = taxonomy.root
        path = []
        for level in range(1, path_depth + 1):
            options = children[node]
            if level == 1 and avoid_top is not None:
                options = [c for c in options if c != avoid_top]
            node = int(rng.choice(options))
            path.append(node)
        return path

    def pick(pool: list[str], count: int) -> list[str]:
        return [pool[int(i)] for i in rng.integers(0, len(pool), size=count)]

    def make_doc(length: int, path_labels: list[int], noise_rate: float,
                 guaranteed: list[int]) -> list[str]:
        toks: list[str] = []
        per = max(1, math.floor(length / max(1, len(guaranteed)))) if guaranteed else 0
        for lid in guaranteed:
            room = length - len(toks)
            if room <= 0:
                break
            toks.extend(pick(pools[lid], min(per, room)))
        while len(toks) < length:
            if noise and noise_rate > 0 and rng.random() < noise_rate:
                toks.append(noise[int(rng.integers(0, len(noise)))])
            else:
                lid = path_labels[int(rng.integers(0, len(path_labels)))]
                toks.append(pools[lid][int(rng.integers(0, spec.keywords_per_label))])
        rng.shuffle(toks)
        return toks[:length]

    # Title and research field reflect only the first (registered) path;
    # a second major discipline surfaces through keywords and abstract
    # alone, the way cross-discipline work reads in practice.
    total = spec.n_train + spec.n_test
    proposals: list[Proposal] = []
    for i in range(total):
        path_depth = 1 + int(rng.choice(depth, p=weights))
        paths = [sample_path(path_depth)]
        if rng.random() < spec.two_major_rate:
            paths.append(sample_path(path_depth, avoid_top=paths[0][0]))
        gold_codes = sorted(taxonomy.codes[p[-1]] for p in paths)
        path_labels = sorted({lid for p in paths for lid in p})
        primary = paths[0]
        ln = spec.doc_lengths
        docs = {
            "title": make_doc(ln["title"], primary, 0.0, [primary[0]]),
            "keywords": make_doc(ln["keywords"], path_labels, 0.0, path_labels),
            "abstract": make_doc(ln["abstract"], path_labels, spec.noise_rate,
                                 path_labels),
            "research_field": make_doc(ln["research_field"], [primary[0]],
                                       0.0, [primary[0]]),
        }
        proposals.append(Proposal(id=f"p{i:05d}", documents=docs,
                                  gold_codes=gold_codes))
    return taxonomy, proposals[:spec.n_train], proposals[spec.n_train:]
