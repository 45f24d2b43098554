"""Level-wise decoding with a stop slot, plus teacher-forced training.

Slot 0 of every level's probability vector is the end-of-prediction
flag; slots 1.. map onto that level's labels in taxonomy order. A label
is selected when its probability reaches the threshold; decoding halts
when the stop slot reaches it (or the depth bound is hit).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Model
from .optim import Adam
from .taxonomy import LabelPathSequence, codes_to_path_sequence, level_targets
from .tensor import NumericError, Tensor, add, binary_cross_entropy, no_grad, scale

#: Incremented by every decode() call; training must never touch it.
DECODE_CALLS = 0

_PROB_EPS = 1e-12


@dataclass
class DecodeConfig:
    threshold: float = 0.5
    max_depth: int = 0              # 0 means the taxonomy's full depth
    force_nonempty: bool = True
    mask_children: bool = False

    def depth_for(self, taxonomy) -> int:
        return self.max_depth if self.max_depth else taxonomy.depth


def level_loss(probs: Tensor, targets: np.ndarray) -> Tensor:
    """Summed binary cross-entropy over the |C_k|+1 slots."""
    return binary_cross_entropy(probs, targets, eps=_PROB_EPS)


def decode(probs: np.ndarray, cfg: DecodeConfig, level_labels,
           allowed: set | None = None) -> tuple[set, bool]:
    """Select this level's label set and the stop flag from probabilities.

    When nothing reaches the threshold and the stop slot does not
    either, ``force_nonempty`` promotes the argmax label so decoding can
    progress. ``allowed``, when given, restricts candidates (used by the
    parent-consistency flag).
    """
    global DECODE_CALLS
    DECODE_CALLS += 1
    stopped = bool(probs[0] >= cfg.threshold)
    candidates = [(i, lid) for i, lid in enumerate(level_labels)
                  if allowed is None or lid in allowed]
    chosen = {lid for i, lid in candidates if probs[1 + i] >= cfg.threshold}
    if not chosen and not stopped and cfg.force_nonempty and candidates:
        best = max(candidates, key=lambda il: probs[1 + il[0]])
        chosen = {best[1]}
    return chosen, stopped


def _set_log_prob(probs: np.ndarray, chosen: set, stopped: bool,
                  level_labels) -> float:
    """log P of the decoded outcome under independent per-slot Bernoullis."""
    p = np.clip(probs.astype(np.float64), _PROB_EPS, 1.0 - _PROB_EPS)
    on = np.zeros_like(p)
    on[0] = 1.0 if stopped else 0.0
    for i, lid in enumerate(level_labels):
        if lid in chosen:
            on[1 + i] = 1.0
    return float((on * np.log(p) + (1.0 - on) * np.log1p(-p)).sum())


@dataclass
class PredictionResult:
    sequence: LabelPathSequence
    stopped_at: int | None          # level where the stop slot fired
    truncated: bool                 # depth bound hit without a stop
    level_probabilities: list = field(default_factory=list)
    set_probs: list = field(default_factory=list)       # per-level P(L_k)
    set_log_probs: list = field(default_factory=list)   # per-level log P(L_k)

    @property
    def log_prob(self) -> float:
        return float(sum(self.set_log_probs))


def predict_paths(prop, model: Model, cfg: DecodeConfig,
                  given_prefix=None, attn_sink: list | None = None,
                  docs_matrix: Tensor | None = None,
                  history_cache: dict | None = None) -> PredictionResult:
    """Greedy level-by-level decoding, optionally from an expert prefix.

    The document matrix is encoded once and reused at every level. A
    ``given_prefix`` is a list of level sets starting with {root}; the
    model then predicts from the first level after it. ``history_cache``
    may be shared across calls while the parameters stay frozen.
    """
    taxonomy = model.taxonomy
    max_depth = cfg.depth_for(taxonomy)
    if given_prefix is not None:
        sets = [frozenset(s) for s in given_prefix]
        _check_prefix(sets, taxonomy)
    else:
        sets = [frozenset({taxonomy.root})]

    result = PredictionResult(sequence=None, stopped_at=None, truncated=False)
    with no_grad():
        if docs_matrix is None:
            docs_matrix = model.encode_documents(prop, train=False,
                                                 sink=attn_sink)
        start = len(sets)
        k = start
        while k <= max_depth:
            probs = model.forward_level(docs_matrix, sets, k,
                                        train=False, sink=attn_sink,
                                        history_cache=history_cache).data
            level_labels = taxonomy.labels_at(k)
            allowed = None
            if cfg.mask_children:
                allowed = {lid for lid in level_labels
                           if taxonomy.parents[lid] & sets[k - 1]}
            chosen, stopped = decode(probs, cfg, level_labels, allowed)
            result.level_probabilities.append(probs)
            lp = _set_log_prob(probs, chosen, stopped, level_labels)
            result.set_log_probs.append(lp)
            result.set_probs.append(_set_prob(probs, chosen, stopped,
                                              level_labels))
            if chosen:
                sets.append(frozenset(chosen))
            if stopped:
                result.stopped_at = k if chosen else len(sets) - 1
                break
            if not chosen:
                break  # dead end: nothing selectable and no stop
            k += 1
        # a prefix that already fills the depth bound is complete, not cut off
        if result.stopped_at is None and start <= max_depth:
            result.truncated = True
    result.sequence = LabelPathSequence(sets=sets, stop_at=len(sets) - 1)
    return result


def _set_prob(probs, chosen, stopped, level_labels) -> float:
    p = np.clip(probs.astype(np.float64), _PROB_EPS, 1.0 - _PROB_EPS)
    out = p[0] if stopped else 1.0 - p[0]
    for i, lid in enumerate(level_labels):
        out *= p[1 + i] if lid in chosen else 1.0 - p[1 + i]
    return float(out)


def _check_prefix(sets, taxonomy) -> None:
    if not sets or sets[0] != frozenset({taxonomy.root}):
        raise ValueError("given prefix must start with the root set")
    for k, level in enumerate(sets[1:], start=1):
        if k > taxonomy.depth:
            raise ValueError("given prefix deeper than the taxonomy")
        members = set(taxonomy.labels_at(k))
        bad = [lid for lid in level if lid not in members]
        if bad or not level:
            raise ValueError(f"prefix level {k} holds invalid labels: {bad}")


def proposal_loss(prop, model: Model, gold: LabelPathSequence | None = None,
                  train: bool = True,
                  history_cache: dict | None = None) -> Tensor:
    """Teacher-forced loss: sum of level losses over 1..stop level.

    Conditioning sets come from the gold sequence only; decode() is
    never consulted here.
    """
    if gold is None:
        gold = codes_to_path_sequence(prop.gold_codes, model.taxonomy)
    docs_matrix = model.encode_documents(prop, train=train)
    total = None
    for k in range(1, gold.stop_at + 1):
        probs = model.forward_level(docs_matrix, gold.sets[:k], k,
                                    train=train, history_cache=history_cache)
        targets = level_targets(gold, k, model.taxonomy)
        lk = level_loss(probs, targets.astype(probs.dtype))
        total = lk if total is None else add(total, lk)
    return total


def train_step(batch, model: Model, optimizer: Adam,
               gold_sequences=None) -> float:
    """One teacher-forced Adam update over a batch; returns the mean loss."""
    decode_calls_before = DECODE_CALLS
    history_cache: dict = {}  # level embeddings shared within this step
    losses = []
    for i, prop in enumerate(batch):
        gold = gold_sequences[i] if gold_sequences is not None else None
        losses.append(proposal_loss(prop, model, gold, train=True,
                                    history_cache=history_cache))
    total = losses[0]
    for extra in losses[1:]:
        total = add(total, extra)
    loss = scale(total, 1.0 / len(losses))
    value = loss.item()
    if not np.isfinite(value):
        raise NumericError(
            f"non-finite training loss {value} over batch of {len(batch)}")
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    assert DECODE_CALLS == decode_calls_before, \
        "teacher forcing violated: decode() ran inside train_step"
    return value
