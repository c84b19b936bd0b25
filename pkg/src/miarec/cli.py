"""Command-line surface.

Subcommands: ingest | synth | train | evaluate | recommend | gradcheck.
Runs are driven by a flat ``key = value`` config file; any ``--key value``
pair given after the subcommand overrides the file. Unknown keys are
rejected. Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric failure.
"""

import argparse
import json
import sys
from pathlib import Path

from .corpus import generate_synthetic, leave_one_out_split, parse_file, write_file
from .errors import ConfigError, DataError, MiarecError, NumericError
from .evaluation import evaluate
from .gradcheck import TOLERANCE, gradient_check
from .hetnet import RelationKind, build_network, extract_relation
from .recommender import (
    TrainConfig,
    load_checkpoint,
    recommend_topk,
    save_checkpoint,
    train,
)


def _parse_bool(text):
    value = str(text).strip().lower()
    if value in ("true", "1", "yes", "on"):
        return True
    if value in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_int_list(text):
    return tuple(int(part) for part in str(text).split(",") if part.strip())


def _parse_str_list(text):
    return tuple(part.strip() for part in str(text).split(",") if part.strip())


# key -> (coercion, default). Paths stay strings; empty string means unset.
CONFIG_SCHEMA = {
    "corpus": (str, ""),
    "checkpoint": (str, "model.ckpt"),
    "report": (str, "report.json"),
    "content_vectors": (str, ""),
    "relations": (_parse_str_list, ("collaboration", "co_topic", "co_venue")),
    "co_topic_min_shared": (int, 3),
    "distance_source": (str, "relation"),
    "gravitational_constant": (float, 1.0),
    "influence_mode": (str, "gravity"),
    "use_interdependent": (_parse_bool, True),
    "layers": (int, 2),
    "sample_sizes": (_parse_int_list, (10, 10)),
    "dim": (int, 64),
    "attention_dim": (int, 64),
    "batch_size": (int, 1024),
    "learning_rate": (float, 0.001),
    "reg_weight": (float, 0.0005),
    "epochs": (int, 100),
    "seed": (int, 7),
    "use_content": (_parse_bool, True),
    "content_dim": (int, 64),
    "content_epochs": (int, 50),
    "content_negatives": (int, 5),
    "content_learning_rate": (float, 0.025),
    "content_min_count": (int, 2),
    "eval_ks": (_parse_int_list, (5, 10, 20)),
}


def default_run_config():
    return {key: default for key, (_, default) in CONFIG_SCHEMA.items()}


def _coerce(key, raw):
    if key not in CONFIG_SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parse, _ = CONFIG_SCHEMA[key]
    try:
        return parse(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def read_config_file(path):
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_number}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        values[key.replace("-", "_")] = _coerce(key.replace("-", "_"), raw)
    return values


def apply_overrides(config, tokens):
    if len(tokens) % 2 != 0:
        raise ConfigError(f"overrides must come in '--key value' pairs, got {tokens!r}")
    for flag, raw in zip(tokens[0::2], tokens[1::2]):
        if not flag.startswith("--"):
            raise ConfigError(f"expected an override flag, got {flag!r}")
        key = flag[2:].replace("-", "_")
        config[key] = _coerce(key, raw)
    return config


def load_run_config(config_path, overrides=()):
    config = default_run_config()
    if config_path:
        config.update(read_config_file(config_path))
    apply_overrides(config, list(overrides))
    return config


def run_config_to_train_config(config):
    flat = {k: v for k, v in config.items() if k in TrainConfig.from_flat_dict({})
            .to_flat_dict()}  # keep only training keys
    flat["sample_sizes"] = ",".join(str(s) for s in config["sample_sizes"])
    flat["relations"] = ",".join(config["relations"])
    return TrainConfig.from_flat_dict(flat).validate()


def _echo_config(config):
    echo = {}
    for key, value in sorted(config.items()):
        echo[key] = list(value) if isinstance(value, tuple) else value
    return echo


def _require_corpus(config):
    path = config.get("corpus", "")
    if not path:
        raise ConfigError("config needs a 'corpus' path")
    if not Path(path).exists():
        raise ConfigError(f"corpus file not found: {path}")
    return path


def cmd_ingest(args):
    corpus = parse_file(args.corpus)
    if corpus.n_papers == 0:
        print("warning: corpus is empty", file=sys.stderr)
    print(f"papers {corpus.n_papers}")
    print(f"scholars {corpus.n_scholars}")
    for kind in RelationKind:
        graph = extract_relation(corpus, kind)
        print(f"edges {kind.value} {graph.n_edges}")
    return 0


def cmd_synth(args):
    corpus = generate_synthetic(
        args.communities, args.scholars_per, args.papers_per_scholar, args.intra_cite_prob, args.seed
    )
    write_file(corpus, args.out)
    print(f"wrote {corpus.n_papers} papers / {corpus.n_scholars} scholars to {args.out}")
    return 0


def _load_vectors_if_configured(config, corpus):
    path = config.get("content_vectors", "")
    if not path:
        return None
    from .content import load_vectors

    return load_vectors(path, corpus)


def cmd_train(args):
    config = load_run_config(args.config, args.overrides)
    corpus_path = _require_corpus(config)
    train_config = run_config_to_train_config(config)
    corpus = parse_file(corpus_path)
    network = build_network(corpus, train_config.relations, train_config.co_topic_min_shared)
    split = leave_one_out_split(corpus, train_config.seed)
    doc_vectors = _load_vectors_if_configured(config, corpus)

    def progress(epoch, loss):
        print(f"epoch {epoch} loss {loss:.6f}")

    checkpoint = train(
        corpus, network, split, train_config, doc_vectors=doc_vectors, progress=progress
    )
    save_checkpoint(checkpoint, config["checkpoint"])
    print(f"checkpoint written to {config['checkpoint']}")
    return 0


def cmd_evaluate(args):
    config = load_run_config(args.config, args.overrides)
    checkpoint = load_checkpoint(args.checkpoint)
    corpus_path = _require_corpus(config)
    corpus = parse_file(corpus_path)
    split = leave_one_out_split(corpus, int(checkpoint.config["seed"]))
    report = evaluate(checkpoint, split, config["eval_ks"])
    echo = _echo_config(config)
    echo.update({k: v for k, v in checkpoint.config.items()})
    doc = report.to_dict(config_echo=echo)
    Path(config["report"]).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for key in sorted(doc):
        if key != "config":
            print(f"{key} {doc[key]}")
    print(f"report written to {config['report']}")
    return 0


def cmd_recommend(args):
    checkpoint = load_checkpoint(args.checkpoint)
    ranked = recommend_topk(checkpoint, args.scholar, k=args.k)
    for paper_id, value in ranked:
        print(f"{paper_id} {value:.6f}")
    return 0


def cmd_gradcheck(args):
    if args.config:
        load_run_config(args.config)  # validated for key errors; fixture stays frozen
    rows = gradient_check(corrupt_group=args.corrupt or None)
    all_pass = True
    print(f"{'parameter group':<20} {'max rel err':>12}  result")
    for row in rows:
        status = "PASS" if row.passed else "FAIL"
        all_pass = all_pass and row.passed
        print(f"{row.group:<20} {row.max_rel_error:>12.3e}  {status}")
    if not all_pass:
        print(f"gradient check failed (tolerance {TOLERANCE})", file=sys.stderr)
        return 3
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="miarec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse a corpus and print index/edge counts")
    p_ingest.add_argument("corpus", help="JSONL corpus path")
    p_ingest.set_defaults(func=cmd_ingest)

    p_synth = sub.add_parser("synth", help="write a synthetic planted-community corpus")
    p_synth.add_argument("out", help="output JSONL path")
    p_synth.add_argument("--communities", type=int, default=4)
    p_synth.add_argument("--scholars-per", type=int, default=25)
    p_synth.add_argument("--papers-per-scholar", type=int, default=6)
    p_synth.add_argument("--intra-cite-prob", type=float, default=0.9)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser(
        "train", help="train and save a checkpoint (trailing --key value pairs override the config)"
    )
    p_train.add_argument("--config", required=True)
    p_train.set_defaults(func=cmd_train, accepts_overrides=True)

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint on the held-out split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", required=True)
    p_eval.set_defaults(func=cmd_evaluate, accepts_overrides=True)

    p_rec = sub.add_parser("recommend", help="print the top-k papers for one scholar")
    p_rec.add_argument("--checkpoint", required=True)
    p_rec.add_argument("--scholar", required=True)
    p_rec.add_argument("--k", type=int, default=10)
    p_rec.set_defaults(func=cmd_recommend)

    p_grad = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p_grad.add_argument("--config", default="")
    p_grad.add_argument("--corrupt", default="", help=argparse.SUPPRESS)
    p_grad.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args, extras = parser.parse_known_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if extras and not getattr(args, "accepts_overrides", False):
        print(f"unexpected arguments: {' '.join(extras)}", file=sys.stderr)
        return 1
    args.overrides = extras
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except MiarecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
