"""Micro/Macro F1 over flattened and per-level label assignments.

The stop flag is a control symbol, never scored. Flattened scoring
pools every level's labels per proposal; the per-level report restricts
both sides to one level's label universe at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .taxonomy import LabelPathSequence, Taxonomy


class EvaluationError(ValueError):
    """Prediction/gold inputs that cannot be aligned."""


@dataclass
class ConfusionCounts:
    """Per-label true-positive / false-positive / false-negative counts."""

    tp: dict = field(default_factory=dict)
    fp: dict = field(default_factory=dict)
    fn: dict = field(default_factory=dict)

    def update(self, predicted: set, gold: set) -> None:
        for lid in predicted & gold:
            self.tp[lid] = self.tp.get(lid, 0) + 1
        for lid in predicted - gold:
            self.fp[lid] = self.fp.get(lid, 0) + 1
        for lid in gold - predicted:
            self.fn[lid] = self.fn.get(lid, 0) + 1

    def labels(self) -> set:
        return set(self.tp) | set(self.fp) | set(self.fn)

    def totals(self) -> tuple[int, int, int]:
        return (sum(self.tp.values()), sum(self.fp.values()),
                sum(self.fn.values()))


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def pair_sequences(predicted: dict[str, LabelPathSequence],
                   gold: dict[str, LabelPathSequence]):
    """Align by proposal id; any asymmetry is an error."""
    if set(predicted) != set(gold):
        odd = set(predicted) ^ set(gold)
        raise EvaluationError(f"prediction/gold id mismatch: {sorted(odd)[:5]}")
    return [(predicted[pid], gold[pid]) for pid in sorted(predicted)]


def flatten_counts(pairs) -> ConfusionCounts:
    """Pool all levels' labels per proposal (root and stop excluded)."""
    counts = ConfusionCounts()
    for pred, gold in pairs:
        counts.update(pred.all_labels(), gold.all_labels())
    return counts


def micro_f1(counts: ConfusionCounts) -> float:
    tp, fp, fn = counts.totals()
    return _f1(tp, fp, fn)


def macro_f1(counts: ConfusionCounts, include_unseen: set | None = None) -> float:
    """Unweighted mean of per-label F1.

    Labels with no predictions and no gold occurrences are excluded
    unless ``include_unseen`` supplies the full label universe to score
    as zeros.
    """
    labels = counts.labels() | (include_unseen or set())
    if not labels:
        return 0.0
    scores = [_f1(counts.tp.get(l, 0), counts.fp.get(l, 0), counts.fn.get(l, 0))
              for l in labels]
    return sum(scores) / len(scores)


def level_counts(pairs, taxonomy: Taxonomy, k: int) -> ConfusionCounts:
    members = set(taxonomy.labels_at(k))
    counts = ConfusionCounts()
    for pred, gold in pairs:
        counts.update(set(pred.labels_at(k)) & members,
                      set(gold.labels_at(k)) & members)
    return counts


def level_report(predicted: dict, gold: dict, taxonomy: Taxonomy) -> dict:
    """Flattened plus per-level MiF1/MaF1, JSON-friendly."""
    pairs = pair_sequences(predicted, gold)
    flat = flatten_counts(pairs)
    report = {
        "flattened": {"micro_f1": micro_f1(flat), "macro_f1": macro_f1(flat),
                      "proposals": len(pairs)},
        "levels": {},
    }
    for k in range(1, taxonomy.depth + 1):
        counts = level_counts(pairs, taxonomy, k)
        tp, fp, fn = counts.totals()
        report["levels"][k] = {
            "micro_f1": micro_f1(counts),
            "macro_f1": macro_f1(counts),
            "support": tp + fn,
        }
    return report


def format_report(report: dict) -> str:
    """Aligned-column text table of a level_report() result."""
    rows = [("scope", "micro_f1", "macro_f1", "support")]
    flat = report["flattened"]
    rows.append(("flattened", f"{flat['micro_f1']:.4f}",
                 f"{flat['macro_f1']:.4f}", str(flat["proposals"])))
    for k, entry in sorted(report["levels"].items(), key=lambda kv: int(kv[0])):
        rows.append((f"level {k}", f"{entry['micro_f1']:.4f}",
                     f"{entry['macro_f1']:.4f}", str(entry["support"])))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row))
             for row in rows]
    return "\n".join(lines)
