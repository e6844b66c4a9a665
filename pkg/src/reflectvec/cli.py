"""Command-line front end.

Every run writes a manifest (argv, parameters, seed, input checksums) named
by its own content hash next to its outputs. Existing output files are only
ever rewritten with identical bytes unless ``--overwrite`` is given, so
replaying a manifest of a deterministic run doubles as a reproducibility
check.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__

OUT_ENV = "REFLECTVEC_OUT_DIR"
log = logging.getLogger("reflectvec")


class CliError(Exception):
    pass


# ----------------------------------------------------------------------------
# output plumbing


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Outputs:
    """Writes files through a temp path and refuses silent changes to existing ones."""

    def __init__(self, overwrite: bool = False):
        self.overwrite = overwrite
        self.written: list[str] = []

    def _commit(self, tmp: str, path: str) -> None:
        if os.path.exists(path) and not self.overwrite:
            if sha256_file(tmp) != sha256_file(path):
                os.unlink(tmp)
                raise CliError(f"refusing to overwrite {path} with different content (use --overwrite)")
        os.replace(tmp, path)
        self.written.append(path)

    def _tmp(self, path: str) -> str:
        d = os.path.dirname(os.path.abspath(path))
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
        os.close(fd)
        return tmp

    def text(self, path, content: str) -> None:
        path = os.fspath(path)
        tmp = self._tmp(path)
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        self._commit(tmp, path)

    def json(self, path, obj) -> None:
        self.text(path, json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n")

    def via(self, path, writer) -> None:
        """Let ``writer(tmp_path)`` produce the file (and optional sidecars with the same suffixes)."""
        path = os.fspath(path)
        tmp = self._tmp(path)
        produced = writer(tmp) or [tmp]
        for p in produced:
            self._commit(p, path + p[len(tmp):])


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_manifest(outputs: Outputs, out_dir: str, argv: list[str], args, inputs: list[str]) -> str:
    params = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("func", "overwrite", "replay", "verbose") and _plain(v)
    }
    manifest = {
        "tool": "reflectvec",
        "version": __version__,
        "argv": argv,
        "params": params,
        "seed": getattr(args, "seed", None),
        "inputs": {os.path.abspath(p): sha256_file(p) for p in inputs if p and os.path.isfile(p)},
    }
    body = json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()[:16]
    path = os.path.join(out_dir, f"manifest-{digest}.json")
    outputs.text(path, body)
    return path


def _plain(v) -> bool:
    return v is None or isinstance(v, (str, int, float, bool)) or (
        isinstance(v, list) and all(isinstance(x, (str, int, float)) for x in v)
    )


def _default_out(name: str) -> str:
    return os.path.join(os.environ.get(OUT_ENV, "."), name)


def _out_dir(path: str) -> str:
    return os.path.dirname(os.path.abspath(path))


# ----------------------------------------------------------------------------
# argument types


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def shift_k(text: str) -> float:
    v = float(text)
    if not v >= 1:
        raise argparse.ArgumentTypeError(f"shift k must be >= 1, got {text}")
    return v


def unit_alpha(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1], got {text}")
    return v


def existing_file(text: str) -> str:
    if not os.path.isfile(text):
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return text


# ----------------------------------------------------------------------------
# subcommands


def cmd_vocab(args, out: Outputs) -> list[str]:
    from .corpus import build_vocabulary, iter_file_tokens

    vocab = build_vocabulary(iter_file_tokens(args.input, args.max_bytes), args.min_count)
    path = args.out or _default_out("vocab.tsv")
    out.text(path, vocab.to_text())
    print(f"{len(vocab)} words, {vocab.total_tokens} tokens -> {path}")
    return [args.input]


def _encode(args, vocab, keep_positions=False):
    from .corpus import iter_file_tokens

    return vocab.encode(iter_file_tokens(args.input, args.max_bytes), keep_positions=keep_positions)


def cmd_pmi(args, out: Outputs) -> list[str]:
    from .cooc import count_cooccurrences, pmi_matrix
    from .corpus import Vocabulary

    vocab = Vocabulary.load(args.vocab)
    ids = _encode(args, vocab, args.keep_positions)
    cooc = count_cooccurrences(ids, args.window, n=len(vocab))
    if args.cooc_out:
        out.via(args.cooc_out, lambda tmp: cooc.save(tmp))
    pmi = pmi_matrix(cooc, args.shift_k, joint=args.joint)
    path = args.out or _default_out("pmi.f64")

    def write(tmp):
        pmi.save(tmp)
        return [tmp, tmp + ".json"]

    out.via(path, write)
    print(f"{pmi.n}x{pmi.n} PMI matrix (shift ln {args.shift_k:g}) -> {path}")
    return [args.vocab, args.input]


def _write_spectrum(out: Outputs, path: str, report) -> None:
    out.json(path, report.to_dict())
    out.text(os.path.splitext(path)[0] + ".hist.csv", report.histogram_csv())


def cmd_spectrum(args, out: Outputs) -> list[str]:
    from .cooc import PmiMatrix
    from .spectra import eigenvalues_symmetric, spectrum_stats

    pmi = PmiMatrix.load(args.pmi)
    lam = eigenvalues_symmetric(pmi.values, overwrite=True)
    report = spectrum_stats(lam, args.bins)
    path = args.out or _default_out("spectrum.json")
    _write_spectrum(out, path, report)
    print(f"n={report.n} trace={report.trace:.4g} skewness={report.skewness:.4f} "
          f"|Tr|/(n sd)={report.trace_ratio:.4f} -> {path}")
    return [args.pmi]


def _train_config(args, tied: bool):
    from .sgns import TrainConfig

    return TrainConfig(
        d=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
        base_lr=args.lr,
        lr_decay_multiplier=args.decay_multiplier,
        neg_smoothing=args.neg_smoothing,
        subsample_threshold=args.subsample or None,
        tied=tied,
        balanced_mask=args.balanced_mask,
        init=args.init,
        seed=args.seed,
        threads=args.threads,
    )


def cmd_train(args, out: Outputs) -> list[str]:
    from .corpus import Vocabulary
    from .embeddings import save_store
    from .sgns import train

    vocab = Vocabulary.load(args.vocab)
    ids = _encode(args, vocab)
    cfg = _train_config(args, args.tied)
    store, tlog = train(ids, vocab, cfg, log_every=args.log_every)
    path = args.out or _default_out("vectors.txt")
    out.via(path, lambda tmp: save_store(store, tmp, vocab.words, binary=args.binary))
    out.json(path + ".log.json", {
        "config": tlog.config, "schedule": tlog.schedule, "entries": tlog.entries,
        "tokens": tlog.tokens, "pairs": tlog.pairs,
        "trainable_parameters": store.trainable_parameters,
    })
    print(f"{'tied' if cfg.tied else 'untied'} SGNS, {store.trainable_parameters} parameters -> {path}")
    return [args.vocab, args.input]


def cmd_eval(args, out: Outputs) -> list[str]:
    from .embeddings import load_store
    from .evaluation import eval_analogy, eval_similarity, format_table, load_analogy, load_similarity

    store = load_store(args.embeddings)
    results = [eval_similarity(store, load_similarity(p)) for p in args.similarity]
    results += [eval_analogy(store, load_analogy(p)) for p in args.analogy]
    if not results:
        raise CliError("nothing to evaluate: pass --similarity and/or --analogy")
    path = args.out or _default_out("eval.json")
    label = os.path.basename(args.embeddings)
    out.json(path, [r.to_dict() for r in results])
    table = format_table({label: results}, {label: store.trainable_parameters})
    out.text(os.path.splitext(path)[0] + ".txt", table)
    sys.stdout.write(table)
    return [args.embeddings, *args.similarity, *args.analogy]


def cmd_verify(args, out: Outputs) -> list[str]:
    from .theory import CLAIMS, estimate_reflection, run_claim, write_reports

    out_dir = args.out or _default_out("verify")
    os.makedirs(out_dir, exist_ok=True)
    claims = CLAIMS if args.all else [args.claim]
    if not claims or claims == [None]:
        raise CliError("pass --claim NAME or --all")
    failed = []
    for claim in claims:
        reports = run_claim(claim, d=args.d, n=args.n, alpha=args.alpha, seed=args.seed, trials=args.trials)
        out.via(os.path.join(out_dir, f"{claim}.json"), lambda tmp, c=claim, r=reports: write_reports(tmp, c, r))
        ok = all(r.passed for r in reports)
        print(f"{claim:14s} {'PASS' if ok else 'FAIL'}")
        if not ok:
            failed.append(claim)
    inputs = []
    if args.embeddings:
        from .embeddings import load_store

        store = load_store(args.embeddings)
        if store.tied:
            raise CliError("reflection analysis needs untied embeddings")
        est = estimate_reflection(store.W.astype(np.float64), store.C.astype(np.float64))
        out.json(os.path.join(out_dir, "reflection-embeddings.json"), {
            "embeddings": args.embeddings, "d": est.d, "plus_count": est.plus_count,
            "plus_fraction": est.plus_fraction, "involution_score": est.involution_score,
            "residual": est.residual,
        })
        print(f"fitted Q: plus_count/d={est.plus_fraction:.3f} involution_score={est.involution_score:.3f}")
        inputs.append(args.embeddings)
    if failed and args.strict:
        raise CliError(f"claims failed: {', '.join(failed)}")
    args.out = out_dir
    return inputs


def cmd_repro(args, out: Outputs) -> list[str]:
    if args.target == "fig2":
        return _repro_spectrum(args, out)
    return _repro_tying(args, out)


def _repro_spectrum(args, out: Outputs) -> list[str]:
    from .pipeline import pmi_spectrum

    out_dir = args.out or _default_out("fig2")
    vocab, pmi, report, summary = pmi_spectrum(
        args.input, args.min_count, args.window, args.shift_k, args.bins, args.max_bytes,
        args.joint, args.keep_positions, args.control_n, args.seed,
    )
    out.text(os.path.join(out_dir, "vocab.tsv"), vocab.to_text())
    if args.keep_pmi:
        out.via(os.path.join(out_dir, "pmi.f64"), lambda tmp: (pmi.save(tmp), [tmp, tmp + ".json"])[1])
    _write_spectrum(out, os.path.join(out_dir, "spectrum.json"), report)
    summary.pop("seconds")
    out.json(os.path.join(out_dir, "summary.json"), summary)
    print(json.dumps(summary, indent=1))
    args.out = out_dir
    return [args.input]


def _repro_tying(args, out: Outputs) -> list[str]:
    from .embeddings import save_store
    from .evaluation import format_table
    from .pipeline import tying_criteria, train_and_evaluate

    out_dir = args.out or _default_out("table2")
    cfg = _train_config(args, tied=False)
    vocab, models, refl = train_and_evaluate(
        args.input, cfg, args.similarity, args.analogy, args.min_count, args.max_bytes, args.log_every,
    )
    table = format_table(
        {k: v["results"] for k, v in models.items()},
        {k: v["store"].trainable_parameters for k, v in models.items()},
    )
    crit = tying_criteria(models, args.tolerance)
    summary = {
        "models": {k: [r.to_dict() for r in v["results"]] for k, v in models.items()},
        "criteria": crit,
        "reflection": {
            "d": refl.d, "plus_count": refl.plus_count, "plus_fraction": refl.plus_fraction,
            "involution_score": refl.involution_score, "residual": refl.residual,
        },
        "train_logs": {k: {"config": v["log"].config, "schedule": v["log"].schedule,
                           "entries": v["log"].entries} for k, v in models.items()},
    }
    for label, m in models.items():
        name = "sgns.txt" if label == "SGNS" else "sgns_wt.txt"
        out.via(os.path.join(out_dir, name), lambda tmp, s=m["store"]: save_store(s, tmp, vocab.words))
    out.json(os.path.join(out_dir, "summary.json"), summary)
    out.text(os.path.join(out_dir, "table.txt"), table)
    sys.stdout.write(table)
    print(json.dumps(crit, indent=1, default=_jsonable))
    args.out = out_dir
    return [args.input, *args.similarity, *args.analogy]


# ----------------------------------------------------------------------------
# parser


def _add_train_flags(p: argparse.ArgumentParser, dim: int = 200) -> None:
    p.add_argument("--dim", type=positive_int, default=dim)
    p.add_argument("--window", type=positive_int, default=5)
    p.add_argument("--negatives", type=positive_int, default=5)
    p.add_argument("--epochs", type=positive_int, default=15)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--decay-multiplier", type=float, default=None,
                   help="schedule horizon factor (default 1.0 untied, 0.8 tied)")
    p.add_argument("--neg-smoothing", type=float, default=0.75)
    p.add_argument("--subsample", type=float, default=1e-3, help="0 disables subsampling")
    p.add_argument("--balanced-mask", action="store_true", help="force exactly d/2 positive signs")
    p.add_argument("--init", choices=("gaussian", "uniform"), default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-every", type=positive_int, default=100_000)
    p.add_argument("--max-bytes", type=positive_int, default=None, help="read only a corpus prefix")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reflectvec", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=positive_int, default=1)
    parser.add_argument("--overwrite", action="store_true")
    parser.add_argument("--replay", metavar="MANIFEST", help="re-run the command recorded in a manifest")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("vocab", help="count words and write a vocabulary")
    p.add_argument("--input", type=existing_file, required=True)
    p.add_argument("--min-count", type=positive_int, required=True)
    p.add_argument("--max-bytes", type=positive_int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("pmi", help="co-occurrence counts and the dense PMI matrix")
    p.add_argument("--vocab", type=existing_file, required=True)
    p.add_argument("--input", type=existing_file, required=True)
    p.add_argument("--window", type=positive_int, default=2)
    p.add_argument("--shift-k", type=shift_k, default=1.0)
    p.add_argument("--joint", choices=("pair", "ordered"), default="pair")
    p.add_argument("--keep-positions", action="store_true", help="dropped words keep their slot")
    p.add_argument("--cooc-out", help="also write the sparse co-occurrence table")
    p.add_argument("--max-bytes", type=positive_int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pmi)

    p = sub.add_parser("spectrum", help="eigenvalue spectrum of a PMI matrix")
    p.add_argument("--pmi", type=existing_file, required=True)
    p.add_argument("--bins", type=positive_int, default=101)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("train", help="train SGNS embeddings")
    p.add_argument("--input", type=existing_file, required=True)
    p.add_argument("--vocab", type=existing_file, required=True)
    p.add_argument("--tied", action="store_true")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--out")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="similarity and analogy benchmarks")
    p.add_argument("--embeddings", type=existing_file, required=True)
    p.add_argument("--similarity", type=existing_file, nargs="*", default=[])
    p.add_argument("--analogy", type=existing_file, nargs="*", default=[])
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="Monte Carlo checks of the Gaussian model")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--claim", choices=("lemma1", "corollary1", "lemma2", "pmi-ensemble", "dependence", "reflection"))
    g.add_argument("--all", action="store_true")
    p.add_argument("--d", type=positive_int, default=100)
    p.add_argument("--n", type=positive_int, default=None)
    p.add_argument("--alpha", type=unit_alpha, default=0.25)
    p.add_argument("--trials", type=positive_int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embeddings", type=existing_file, help="also fit Q on untied trained vectors")
    p.add_argument("--strict", action="store_true", help="exit nonzero if any claim fails")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("repro", help="reproduction chains")
    rsub = p.add_subparsers(dest="target", required=True)
    f = rsub.add_parser("fig2", help="vocab -> pmi -> spectrum")
    f.add_argument("--input", type=existing_file, required=True)
    f.add_argument("--min-count", type=positive_int, default=100)
    f.add_argument("--window", type=positive_int, default=2)
    f.add_argument("--shift-k", type=shift_k, default=1.0)
    f.add_argument("--joint", choices=("pair", "ordered"), default="pair")
    f.add_argument("--keep-positions", action="store_true")
    f.add_argument("--bins", type=positive_int, default=101)
    f.add_argument("--control-n", type=int, default=2000, help="size of the Wigner control (0 skips)")
    f.add_argument("--keep-pmi", action="store_true", help="also write the dense PMI matrix")
    f.add_argument("--max-bytes", type=positive_int, default=None)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", help="output directory")
    f.set_defaults(func=cmd_repro)
    t = rsub.add_parser("table2", help="vocab -> train (untied, tied) -> eval")
    t.add_argument("--input", type=existing_file, required=True)
    t.add_argument("--min-count", type=positive_int, default=5)
    t.add_argument("--similarity", type=existing_file, nargs="*", default=[])
    t.add_argument("--analogy", type=existing_file, nargs="*", default=[])
    t.add_argument("--tolerance", type=float, default=0.10)
    t.add_argument("--out", help="output directory")
    _add_train_flags(t)
    t.set_defaults(func=cmd_repro)
    return parser


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.replay:
        try:
            with open(args.replay) as fh:
                recorded = json.load(fh)["argv"]
        except (OSError, KeyError, ValueError) as exc:
            print(f"reflectvec: error: cannot read manifest {args.replay}: {exc}", file=sys.stderr)
            return 1
        extra = ["--overwrite"] if args.overwrite else []
        return run(extra + [a for a in recorded if a != "--overwrite"])
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        print("reflectvec: error: a subcommand is required", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = Outputs(args.overwrite)
    try:
        inputs = args.func(args, out)
        target = args.out or (out.written[0] if out.written else ".")
        out_dir = target if os.path.isdir(target) else _out_dir(target)
        write_manifest(out, out_dir, argv, args, inputs)
    except (CliError, ValueError, OSError, MemoryError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"reflectvec: error: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
