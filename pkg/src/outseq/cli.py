"""Command-line entry point chaining parse -> convert -> split -> stats -> train -> predict -> eval."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .annotate import AnnotatedAbstract, AnnotationError, parse_abstract
from .corpus import (
    COMET_TYPES,
    NLP_REV_TYPES,
    CorpusSplit,
    abstract_to_sentences,
    compute_stats,
    read_column_file,
    split_corpus,
    write_column_file,
)
from .evaluate import error_dump, evaluation_report, format_report
from .features import load_embeddings
from .tagger import MODEL_FORMAT_VERSION, TaggerModel, predict
from .training import (
    ModelConfig,
    TrainConfig,
    contextual_preset,
    train,
    write_training_log,
)

DEFAULT_SEED = 13


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _read_kv_config(path: str) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment. Unknown keys are rejected."""
    known = {f.name for f in fields(TrainConfig())} | {f.name for f in fields(ModelConfig())}
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = value.strip()
    return out


def _coerce(value: str, target_type):
    if target_type is bool:
        return value.lower() in ("1", "true", "yes", "on")
    if target_type == (int | None) or target_type == "int | None":
        return None if value.lower() in ("none", "") else int(value)
    return target_type(value)


def _apply_config(obj, data: dict[str, str], overrides: dict):
    """Layer file values then CLI overrides onto a config dataclass."""
    for f in fields(obj):
        if f.name in data:
            current = getattr(obj, f.name)
            if isinstance(current, bool):
                setattr(obj, f.name, _coerce(data[f.name], bool))
            elif isinstance(current, int):
                setattr(obj, f.name, int(float(data[f.name])))
            elif isinstance(current, float):
                setattr(obj, f.name, float(data[f.name]))
            elif current is None:
                raw = data[f.name]
                setattr(obj, f.name, None if raw.lower() == "none" else int(float(raw)))
            else:
                setattr(obj, f.name, data[f.name])
    for key, value in overrides.items():
        if value is not None:
            setattr(obj, key, value)
    return obj


def _parse_one_file(path_str: str) -> tuple[str, dict | None, str | None]:
    path = Path(path_str)
    try:
        abstract = parse_abstract(path.read_text(encoding="utf-8"), doc_id=path.stem)
        return path.stem, abstract.to_json_dict(), None
    except (AnnotationError, ValueError) as exc:
        return path.stem, None, str(exc)


def cmd_parse(args) -> int:
    in_path = Path(args.input)
    files = sorted(in_path.glob("*.txt")) if in_path.is_dir() else [in_path]
    if not files:
        return _fail(f"no .txt files under {in_path}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures: list[tuple[str, str]] = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_parse_one_file, [str(f) for f in files]))
    else:
        results = [_parse_one_file(str(f)) for f in files]
    for doc_id, payload, error in results:
        if error is not None:
            failures.append((doc_id, error))
            continue
        (out_dir / f"{doc_id}.json").write_text(
            json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8"
        )
    for doc_id, error in failures:
        print(f"error: {doc_id}: {error}", file=sys.stderr)
    print(f"parsed {len(results) - len(failures)}/{len(results)} abstracts -> {out_dir}")
    return 1 if failures else 0


def cmd_convert(args) -> int:
    in_path = Path(args.input)
    files = sorted(in_path.glob("*.json")) if in_path.is_dir() else [in_path]
    if not files:
        return _fail(f"no span JSON files under {in_path}")
    lexicon = None
    if args.pos_lexicon:
        lexicon = {}
        for line in Path(args.pos_lexicon).read_text(encoding="utf-8").splitlines():
            if line.strip():
                tok, tag = line.split("\t")
                lexicon[tok] = tag
    else:
        print("warning: no POS source given, using the built-in fallback tagger", file=sys.stderr)
    sentences = []
    for f in files:
        abstract = AnnotatedAbstract.from_json_dict(json.loads(f.read_text(encoding="utf-8")))
        sentences.extend(abstract_to_sentences(abstract, lexicon))
    if not sentences:
        return _fail("conversion produced no sentences")
    write_column_file(sentences, args.out)
    print(f"wrote {len(sentences)} sentences -> {args.out}")
    return 0


def _split_from_args(args) -> CorpusSplit:
    sentences = read_column_file(args.corpus)
    ratios = tuple(float(x) for x in args.ratios.split("/"))
    if len(ratios) != 3:
        raise ValueError("--ratios must be three numbers like 0.75/0.15/0.10")
    return split_corpus(sentences, seed=args.seed, ratios=ratios)


def cmd_split(args) -> int:
    split = _split_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, sents in split.parts().items():
        write_column_file(sents, out / f"{name}.col")
    sizes = {k: len(v) for k, v in split.parts().items()}
    print(f"split sizes: {sizes['train']}/{sizes['dev']}/{sizes['test']} -> {out}")
    return 0


def cmd_stats(args) -> int:
    if args.train:
        split = CorpusSplit(
            train=read_column_file(args.train),
            dev=read_column_file(args.dev),
            test=read_column_file(args.test),
            seed=args.seed,
        )
    else:
        if not args.corpus:
            return _fail("give either a corpus file or --train/--dev/--test")
        split = _split_from_args(args)
    stats = compute_stats(split)
    if args.json:
        print(json.dumps(stats.to_json_dict(), indent=2))
    else:
        print(stats.format_table())
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps(stats.to_json_dict(), indent=2), encoding="utf-8"
        )
    return 0


def _configs_from_args(args) -> tuple[TrainConfig, ModelConfig]:
    tc = contextual_preset() if args.preset == "contextual" else TrainConfig()
    mc = ModelConfig()
    file_data = _read_kv_config(args.config) if args.config else {}
    _apply_config(
        tc,
        file_data,
        {
            "loss": args.loss,
            "undersample_percent": args.undersample,
            "learning_rate": args.lr,
            "batch_size": args.batch_size,
            "epochs": args.epochs,
            "optimizer": args.optimizer,
            "patience": args.patience,
        },
    )
    tc.seed = args.seed
    _apply_config(
        mc,
        file_data,
        {
            "encoder": args.encoder,
            "head": args.head,
            "hidden_size": args.hidden_size,
            "pos_dim": args.pos_dim,
            "use_pca": True if args.pca else None,
        },
    )
    return tc, mc


FLAVOR_TYPES = {
    "ebm-comet": COMET_TYPES,
    "ebm-nlp-rev": NLP_REV_TYPES,
    "generic": None,
}


def cmd_train(args) -> int:
    tc, mc = _configs_from_args(args)
    store = load_embeddings(args.embeddings, args.mode)
    dev_store = store
    if args.dev_embeddings:
        dev_store = load_embeddings(args.dev_embeddings, args.mode)
    split = CorpusSplit(
        train=read_column_file(args.train),
        dev=read_column_file(args.dev) if args.dev else [],
        test=read_column_file(args.test) if args.test else [],
        seed=args.seed,
    )
    model, log = train(
        split, store, mc, tc, types=FLAVOR_TYPES[args.flavor], dev_store=dev_store
    )
    model.save(args.out_model)
    if args.log:
        write_training_log(log, args.log)
    best = max((row.dev_token_macro_f1 for row in log), default=0.0)
    print(f"trained {tc.epochs}-epoch {mc.encoder}+{mc.head}; best dev macro F1 {best * 100:.1f}")
    print(f"model -> {args.out_model}")
    return 0


def cmd_predict(args) -> int:
    model = TaggerModel.load(args.model)
    store = load_embeddings(args.embeddings, args.mode)
    sentences = read_column_file(args.input)
    out = []
    for sent in sentences:
        labels = predict(sent, model, store)
        out.append(
            type(sent)(
                tokens=sent.tokens,
                pos_tags=sent.pos_tags,
                labels=labels,
                doc_id=sent.doc_id,
                sent_index=sent.sent_index,
            )
        )
    write_column_file(out, args.out)
    print(f"labeled {len(out)} sentences -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    gold = read_column_file(args.gold)
    pred = read_column_file(args.pred)
    gold_seqs = [[str(lab) for lab in s.labels] for s in gold]
    pred_seqs = [[str(lab) for lab in s.labels] for s in pred]
    report = evaluation_report(gold_seqs, pred_seqs)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(format_report(report))
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    if args.dump:
        Path(args.dump).write_text(
            error_dump(gold, [s.labels for s in pred]), encoding="utf-8"
        )
    return 0


def cmd_report(args) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    print(format_report(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outseq",
        description="Outcome-phrase sequence labeling toolkit",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"outseq {__version__} (model format v{MODEL_FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="root random seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers where supported")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("parse", help="annotated abstracts -> span JSON files")
    p.add_argument("input", help="annotated .txt file or directory of them")
    p.add_argument("out", help="output directory for span JSON")
    common(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("convert", help="span JSON -> column corpus")
    p.add_argument("input", help="span JSON file or directory")
    p.add_argument("out", help="output column file")
    p.add_argument("--pos-lexicon", help="optional token<TAB>tag lexicon file")
    common(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("split", help="column corpus -> train/dev/test files")
    p.add_argument("corpus", help="column corpus file")
    p.add_argument("out", help="output directory")
    p.add_argument("--ratios", default="0.75/0.15/0.10")
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="dataset statistics table")
    p.add_argument("corpus", nargs="?", help="column corpus (split on the fly)")
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--ratios", default="0.75/0.15/0.10")
    p.add_argument("--json-out", help="also write the JSON report here")
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a tagger")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--embeddings", required=True)
    p.add_argument(
        "--dev-embeddings",
        help="embeddings for the dev split (contextual stores are keyed per corpus file)",
    )
    p.add_argument("--mode", choices=("static", "contextual"), default="static")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", choices=("tagger", "contextual"), default="tagger")
    p.add_argument(
        "--flavor", choices=("ebm-comet", "ebm-nlp-rev", "generic"), default="generic",
        help="pin the dataset's canonical outcome-type set (default: discover from gold labels)",
    )
    p.add_argument("--out-model", required=True)
    p.add_argument("--log", help="training log CSV path")
    p.add_argument("--loss", choices=("none", "iil1", "iil2", "class_balanced", "focal"))
    p.add_argument("--undersample", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.add_argument("--patience", type=int)
    p.add_argument("--encoder", choices=("linear", "bilstm"))
    p.add_argument("--head", choices=("softmax", "crf"))
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--pos-dim", type=int)
    p.add_argument("--pca", action="store_true", help="halve word vectors with PCA")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label a column corpus with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--mode", choices=("static", "contextual"), default="static")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--json-out", help="also write the JSON report here")
    p.add_argument("--dump", help="write a per-sentence error dump here")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render a saved eval report")
    p.add_argument("report", help="eval report JSON file")
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed % (2**32))
    print(f"outseq: root seed {args.seed}", file=sys.stderr)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
