"""Command-line front end: synth, build-graph, train, predict, evaluate.

Every command is deterministic given its inputs and the seed, and the
effective configuration is echoed into the artifacts it produces. Exit
codes: 0 success, 1 usage/input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import checkpoint, evaluation, intergraph, predictor
from .config import Config, load_overrides, make_config
from .corpus import (
    CorpusError,
    SynthSpec,
    Vocab,
    load_embeddings,
    load_jsonl,
    proposals_to_jsonl,
    synth_corpus,
)
from .intergraph import GraphError
from .model import Model
from .nn import ConfigError
from .optim import Adam
from .predictor import DecodeConfig, predict_paths, train_step
from .taxonomy import (
    LabelPathSequence,
    Taxonomy,
    TaxonomyError,
    codes_to_path_sequence,
    validate,
)

USER_ERRORS = (CorpusError, TaxonomyError, GraphError, ConfigError,
               checkpoint.CheckpointError, evaluation.EvaluationError,
               FileNotFoundError, ValueError)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - report and signal internal failure
        traceback.print_exc()
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelpath",
        description="Hierarchical label-path classification pipeline")
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus + taxonomy")
    p.add_argument("--spec", help="synthesis spec JSON (defaults built in)")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build-graph",
                       help="build the discipline graph from keyword stats")
    p.add_argument("--corpus", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", required=True,
                   help="output stem; writes <out>.tsv and <out>.json")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train", help="teacher-forced training")
    p.add_argument("--corpus", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--graph", required=True, help="graph TSV or JSON file")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--profile", choices=("paper", "desk"), default="paper")
    p.add_argument("--config", help="JSON file with config overrides")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--steps", type=int, default=0,
                   help="stop after this many optimizer steps (0 = no cap)")
    p.add_argument("--embeddings", help="pretrained embedding text file")
    p.add_argument("--loss-log", help="CSV loss log path (step,loss,lr)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode label paths for a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True, help="predictions JSONL path")
    p.add_argument("--given-labels",
                   help="expert prefix, e.g. 'F,B' or 'F,B;F06' for 2 levels")
    p.add_argument("--given-level", type=int, default=0,
                   help="condition on each proposal's own gold labels "
                        "down to this level")
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-depth", type=int, default=0)
    p.add_argument("--mask-children", action="store_true",
                   help="restrict each level to children of the previous set")
    p.add_argument("--with-probabilities", action="store_true")
    p.add_argument("--dump-attention",
                   help="write the first proposal's attention maps here")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)
    return parser


def _load_taxonomy(path) -> Taxonomy:
    taxonomy = Taxonomy.from_json(Path(path).read_text(encoding="utf-8"))
    violation = validate(taxonomy)
    if violation is not None:
        raise TaxonomyError(f"invalid taxonomy {path}: {violation}")
    return taxonomy


def _load_graph(path, taxonomy) -> intergraph.InterGraph:
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".json"):
        return intergraph.from_json(text, taxonomy)
    return intergraph.from_tsv(text, taxonomy)


def cmd_synth(args) -> int:
    spec_dict = {}
    if args.spec:
        spec_dict = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    if args.seed is not None:
        spec_dict["seed"] = args.seed
    spec = SynthSpec.from_dict(spec_dict)
    taxonomy, train, test = synth_corpus(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "taxonomy.json").write_text(taxonomy.to_json(), encoding="utf-8")
    (out / "train.jsonl").write_text(proposals_to_jsonl(train), encoding="utf-8")
    (out / "test.jsonl").write_text(proposals_to_jsonl(test), encoding="utf-8")
    meta = {"spec": spec.__dict__ | {"branching": list(spec.branching),
                                     "depth_weights": list(spec.depth_weights)},
            "train": len(train), "test": len(test),
            "levels": [len(lv) for lv in taxonomy.levels]}
    (out / "synth_meta.json").write_text(json.dumps(meta, indent=1),
                                         encoding="utf-8")
    print(f"wrote {len(train)} train / {len(test)} test proposals to {out}")
    return 0


def cmd_build_graph(args) -> int:
    taxonomy = _load_taxonomy(args.taxonomy)
    proposals, filtered = load_jsonl(args.corpus, taxonomy=taxonomy)
    stats, skipped = intergraph.collect_stats(proposals, taxonomy)
    if skipped:
        print(f"warning: {skipped} proposals without keywords skipped",
              file=sys.stderr)
    if not stats.counts:
        print("warning: empty corpus; writing an empty edge set",
              file=sys.stderr)
    graph = intergraph.build(stats, taxonomy, alpha=args.alpha, beta=args.beta)
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    tsv_path = stem.with_suffix(".tsv")
    json_path = stem.with_suffix(".json")
    tsv_path.write_text(intergraph.to_tsv(graph, taxonomy), encoding="utf-8")
    extra = {"corpus": str(args.corpus), "proposals": len(proposals),
             "filtered": filtered, "skipped_no_keywords": skipped,
             "diversity_index": intergraph.diversity_index(
                 stats, args.alpha, args.beta)}
    json_path.write_text(intergraph.to_json(graph, taxonomy, extra=extra),
                         encoding="utf-8")
    print(f"wrote {len(graph.edges)} edges to {tsv_path} and {json_path}")
    return 0


def _effective_config(args) -> Config:
    overrides = load_overrides(args.config) if args.config else {}
    return make_config(args.profile, overrides)


def cmd_train(args) -> int:
    config = _effective_config(args)
    taxonomy = _load_taxonomy(args.taxonomy)
    graph = _load_graph(args.graph, taxonomy)
    proposals, filtered = load_jsonl(args.corpus, taxonomy=taxonomy,
                                     type_lengths=config.type_lengths,
                                     char_level=config.char_tokenize)
    if not proposals:
        raise CorpusError(f"no usable proposals in {args.corpus} "
                          f"({filtered} filtered)")
    vocab = Vocab.build(proposals)
    init_rng = np.random.default_rng(config.seed)
    if args.embeddings:
        table = load_embeddings(args.embeddings, vocab, config.hidden_size,
                                init_rng)
    else:
        table = None
    model = Model(config, taxonomy, vocab, graph, embedding_table=table)
    optimizer = Adam(model.parameters(), lr=config.learning_rate,
                     weight_decay=config.weight_decay,
                     warmup=config.warmup_steps)
    gold = {p.id: codes_to_path_sequence(p.gold_codes, taxonomy)
            for p in proposals}
    shuffle_rng = np.random.default_rng(config.seed + 1000)

    log_rows = []
    step = 0
    done = False
    for epoch in range(args.epochs):
        order = np.arange(len(proposals))
        shuffle_rng.shuffle(order)
        for lo in range(0, len(order), config.batch_size):
            batch = [proposals[i] for i in order[lo:lo + config.batch_size]]
            seqs = [gold[p.id] for p in batch]
            loss = train_step(batch, model, optimizer, gold_sequences=seqs)
            step += 1
            log_rows.append((step, loss, optimizer.lr_at(step - 1)))
            if not args.quiet and (step % 10 == 0 or step == 1):
                print(f"epoch {epoch + 1} step {step} loss {loss:.4f}")
            if args.steps and step >= args.steps:
                done = True
                break
        if done:
            break

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    checkpoint.save(out, model)
    if args.loss_log:
        log_path = Path(args.loss_log)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"# config: {json.dumps(config.to_dict())}", "step,loss,lr"]
        lines += [f"{s},{l:.6f},{r:.8f}" for s, l, r in log_rows]
        log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"trained {step} steps; checkpoint at {out}")
    return 0


def _parse_prefix(text: str, taxonomy: Taxonomy):
    sets = [frozenset({taxonomy.root})]
    for k, part in enumerate(text.split(";"), start=1):
        codes = [c.strip() for c in part.split(",") if c.strip()]
        if not codes:
            raise TaxonomyError(f"empty prefix level {k}")
        sets.append(frozenset(taxonomy.id_of(c) for c in codes))
    return sets


def cmd_predict(args) -> int:
    taxonomy = _load_taxonomy(args.taxonomy)
    graph = _load_graph(args.graph, taxonomy)
    model = checkpoint.restore(args.checkpoint, taxonomy, graph)
    config = model.config
    proposals, _ = load_jsonl(args.corpus, taxonomy=taxonomy,
                              type_lengths=config.type_lengths,
                              char_level=config.char_tokenize)
    cfg = DecodeConfig(
        threshold=args.threshold if args.threshold else config.threshold,
        max_depth=args.max_depth,
        force_nonempty=config.force_nonempty,
        mask_children=args.mask_children or config.mask_children)
    if args.given_labels and args.given_level:
        raise ConfigError("--given-labels and --given-level are exclusive")
    prefix = _parse_prefix(args.given_labels, taxonomy) \
        if args.given_labels else None

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    records = []
    attention_doc = None
    history_cache: dict = {}  # parameters are frozen during prediction
    for i, prop in enumerate(proposals):
        sink: list | None = [] if (args.dump_attention and i == 0) else None
        if args.given_level:
            gold = codes_to_path_sequence(prop.gold_codes, taxonomy)
            depth = min(args.given_level, gold.stop_at)
            prop_prefix = gold.sets[:depth + 1]
        else:
            prop_prefix = prefix
        result = predict_paths(prop, model, cfg, given_prefix=prop_prefix,
                               attn_sink=sink, history_cache=history_cache)
        if sink is not None:
            attention_doc = {
                "proposal_id": prop.id,
                "config": config.to_dict(),
                "entries": [
                    {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                     for k, v in entry.items()}
                    for entry in sink],
            }
        rec = {
            "id": prop.id,
            "levels": [sorted(taxonomy.codes[lid] for lid in level)
                       for level in result.sequence.sets[1:]],
            "stopped_at": result.stopped_at,
            "truncated": result.truncated,
        }
        if args.with_probabilities:
            rec["probabilities"] = [p.tolist()
                                    for p in result.level_probabilities]
        records.append(rec)
    out.write_text("\n".join(json.dumps(r) for r in records) + "\n",
                   encoding="utf-8")
    out.with_suffix(out.suffix + ".config.json").write_text(
        json.dumps({"config": config.to_dict(),
                    "decode": cfg.__dict__,
                    "given_labels": args.given_labels}, indent=1),
        encoding="utf-8")
    if attention_doc is not None:
        Path(args.dump_attention).write_text(json.dumps(attention_doc),
                                             encoding="utf-8")
    print(f"wrote {len(records)} predictions to {out}")
    return 0


def load_predictions(path, taxonomy: Taxonomy) -> dict[str, LabelPathSequence]:
    """Read a predictions JSONL back into label-path sequences."""
    out: dict[str, LabelPathSequence] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: bad JSON ({exc.msg})") from exc
            sets = [frozenset({taxonomy.root})]
            for level in rec["levels"]:
                sets.append(frozenset(taxonomy.id_of(c) for c in level))
            out[str(rec["id"])] = LabelPathSequence(sets=sets,
                                                    stop_at=len(sets) - 1)
    return out


def cmd_evaluate(args) -> int:
    taxonomy = _load_taxonomy(args.taxonomy)
    predicted = load_predictions(args.predictions, taxonomy)
    gold_props, _ = load_jsonl(args.gold, taxonomy=taxonomy)
    gold = {p.id: codes_to_path_sequence(p.gold_codes, taxonomy)
            for p in gold_props}
    report = evaluation.level_report(predicted, gold, taxonomy)
    report["inputs"] = {"predictions": str(args.predictions),
                        "gold": str(args.gold)}
    print(evaluation.format_report(report))
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=1),
                                  encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
