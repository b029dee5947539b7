"""``owleye`` command-line interface.

Exit codes: 0 success, 1 validation error (bad flags, bad input files,
bad config), 2 runtime error.  Every output file is written to a temporary
name and renamed into place.  ``OWLEYE_THREADS`` caps BLAS threads.
"""

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager, nullcontext
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import RunConfig, load_config, parse_k
from .errors import FormatError, InvalidArgumentError, OwlEyeError

log = logging.getLogger("owleye")

# flag -> config key for hyperparameters that may override config files
HYPER_FLAGS = [
    ("--d", "d", int), ("--layers", "layers", int), ("--tau", "tau", float),
    ("--tau-a", "tau_a", float), ("--n-sup", "n_sup", int), ("--k", "k", parse_k),
    ("--lambda", "lambda", float), ("--beta", "beta", float), ("--lr", "lr", float),
    ("--epochs", "epochs", int), ("--pairs-per-graph", "pairs_per_graph", int),
    ("--patience", "patience", int), ("--adjacency", "adjacency", str),
    ("--similarity-channel", "similarity_channel", str), ("--aggregate", "aggregate", str),
    ("--test-median", "test_median", str), ("--trials", "trials", int),
    ("--finetune-epochs", "finetune_epochs", int),
]


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_hyper(p, keys=None):
    g = p.add_argument_group("hyperparameters (override the config file)")
    for flag, key, typ in HYPER_FLAGS:
        if keys is None or key in keys:
            g.add_argument(flag, dest=f"hp_{key}", type=typ, default=None, metavar=key.upper())
    if keys is None:
        g.add_argument("--signed-sqrt", dest="hp_signed_sqrt", action="store_true", default=None,
                       help="apply sign(x)*sqrt(|x|) to attention logits")
        g.add_argument("--tie-attention", dest="hp_tie_attention", action="store_true", default=None,
                       help="share query/key weights between channels")


def _run_config(args, base=None):
    data = base.to_dict() if base is not None else {}
    if getattr(args, "config", None):
        data = load_config(args.config).to_dict()
    for k, v in vars(args).items():
        if k.startswith("hp_") and v is not None:
            data[k[3:]] = v
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    return RunConfig.from_dict(data)


@contextmanager
def _atomic_path(path):
    """Yields a temp path next to ``path``; renamed over it on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


@contextmanager
def _atomic_dir(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=path.parent, prefix=f".{path.name}."))
    try:
        yield tmp
        if path.exists():
            shutil.rmtree(path)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)


# ---------------------------------------------------------------------------
# subcommands


def cmd_inject(args):
    from .graph import inject_anomalies, load_graph_dir, save_graph_dir
    from .numerics import make_rng
    g = load_graph_dir(args.graph)
    out = inject_anomalies(g, args.cliques, args.clique_size, args.contextual, make_rng(args.seed, "inject"))
    with _atomic_dir(args.out) as tmp:
        save_graph_dir(out, tmp, features=args.features)
    print(f"{out.name}: {int(out.labels.sum())} anomalies written to {args.out}")


def cmd_align(args):
    from .align import align_collection
    from .graph import load_graph_dir, save_graph_dir
    graphs = [load_graph_dir(p) for p in args.graph]
    aligned, stats = align_collection(graphs, args.d, args.tau, args.seed, args.aggregate)
    with _atomic_dir(args.out) as tmp:
        for g, a in zip(graphs, aligned):
            save_graph_dir(g.with_(X_raw=a.X_tilde), tmp / g.name)
        (tmp / "stats.json").write_text(json.dumps(stats.to_json(), indent=2, sort_keys=True))
    print(f"aligned {len(graphs)} graphs to d={args.d}; medians dist={stats.dist_med:.6g} dist_N={stats.dist_med_N:.6g}")


def cmd_train(args):
    from .graph import load_graph_dir
    from .training import fit, save_checkpoint
    cfg = _run_config(args)
    if args.train:
        cfg = cfg.replace(train_dirs=tuple(args.train))
    if not cfg.train_dirs:
        raise InvalidArgumentError("no training graphs: pass --train or train_dirs in --config")
    graphs = [load_graph_dir(p) for p in cfg.train_dirs]
    ck = fit(graphs, cfg)
    save_checkpoint(ck, args.out)
    print(f"trained {ck.epoch} epochs on {len(graphs)} graphs; final loss {ck.loss_history[-1]:.6g}"
          if ck.loss_history else "no training epochs run")


def cmd_extract_dict(args):
    from .dictionary import save_dictionary
    from .training import load_checkpoint
    ck = load_checkpoint(args.checkpoint)
    save_dictionary(ck.dictionary, args.out)
    print(f"{len(ck.dictionary)} entries written to {args.out}")


def cmd_dict_add(args):
    from .dictionary import load_dictionary, merge, save_dictionary
    from .evaluation import aux_entry
    from .graph import load_graph_dir
    from .training import load_checkpoint
    ck = load_checkpoint(args.checkpoint)
    dct = load_dictionary(args.dict)
    new = [aux_entry(ck, load_graph_dir(p), args.seed, args.n_sup) for p in args.graph]
    out = merge(dct, new)
    save_dictionary(out, args.dict)
    print(f"{args.dict}: {len(dct)} -> {len(out)} entries")


def _score_inputs(args):
    from .dictionary import load_dictionary
    from .graph import load_graph_dir
    from .training import load_checkpoint
    ck = load_checkpoint(args.checkpoint)
    cfg = _run_config(args, base=ck.config)
    ck.config = cfg
    dct = load_dictionary(args.dict) if args.dict else None
    return ck, load_graph_dir(args.graph), dct


def cmd_score(args):
    from .evaluation import auprc, auroc, zero_shot_score
    ck, g, dct = _score_inputs(args)
    sv = zero_shot_score(ck, g, args.seed, dictionary=dct)
    with _atomic_path(args.out) as tmp:
        sv.write_csv(tmp)
    msg = f"{g.name}: {g.n} scores written to {args.out}"
    if g.labels is not None and 0 < g.labels.sum() < g.n:
        msg += f" (AUROC {auroc(sv.scores, g.labels):.4f}, AUPRC {auprc(sv.scores, g.labels):.4f}," \
               f" {sv.pseudo_anomalous} anomalous pseudo-supports)"
    print(msg)


def _read_labeled(path, n):
    nodes, labels = [], np.full(n, -1, dtype=np.int64)
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            try:
                v, lab = (int(t) for t in s.split(","))
            except ValueError:
                raise FormatError("expected 'node_id,label'", path=path, line=lineno) from None
            if not 0 <= v < n or lab not in (0, 1):
                raise FormatError("node id out of range or label not 0/1", path=path, line=lineno)
            nodes.append(v)
            labels[v] = lab
    return np.array(nodes, dtype=np.int64), labels


def cmd_finetune(args):
    from .graph import load_graph_dir
    from .numerics import make_rng
    from .training import finetune, load_checkpoint, sample_shots, save_checkpoint
    ck = load_checkpoint(args.checkpoint)
    ck.config = _run_config(args, base=ck.config)
    g = load_graph_dir(args.graph)
    if args.labeled:
        nodes, lab = _read_labeled(args.labeled, g.n)
        labels = np.where(lab < 0, 0, lab)
    else:
        if g.labels is None:
            raise InvalidArgumentError("graph has no labels; pass --labeled")
        half = args.shots // 2
        nodes = sample_shots(g.labels, args.shots - half, half, make_rng(args.seed, "shots", g.name))
        labels = g.labels
    out = finetune(ck, g, nodes, labels=labels, epochs=args.epochs, seed=args.seed)
    save_checkpoint(out, args.out)
    print(f"finetuned on {len(nodes)} labeled nodes for {out.epoch - ck.epoch} epochs; "
          f"dictionary now has {len(out.dictionary)} entries")


def cmd_eval(args):
    from .experiment import run_experiment
    cfg = _run_config(args)
    run_experiment(cfg, args.out)
    print(f"report written to {args.out}")


def cmd_diag(args):
    from .align import align_collection, align_new_graph, project_features, graph_rng
    from .evaluation import distance_diagnostic, sample_class_pairs, write_diagnostic_csv, write_scatter_csv
    from .graph import load_graph_dir
    from .numerics import make_rng
    g = load_graph_dir(args.graph)
    if g.labels is None:
        raise InvalidArgumentError("distance diagnostic needs labels.csv")
    stages = [s.strip() for s in args.stage.split(",")]
    for s in stages:
        if s not in ("raw", "projected", "aligned"):
            raise InvalidArgumentError(f"unknown stage {s!r}")
    X = {"raw": g.X_raw}
    if "projected" in stages or "aligned" in stages:
        X["projected"] = project_features(g, args.d, graph_rng(args.seed, g))
    if "aligned" in stages:
        if args.checkpoint:
            from .training import load_checkpoint
            ck = load_checkpoint(args.checkpoint)
            if ck.config.d != args.d:
                raise InvalidArgumentError(f"--d {args.d} differs from the checkpoint's d={ck.config.d}")
            X["aligned"] = align_new_graph(g, args.d, ck.stats, args.seed)[0].X_tilde
        else:
            X["aligned"] = align_collection([g], args.d, args.tau, args.seed)[0][0].X_tilde
    pairs = sample_class_pairs(g.labels, args.pairs, make_rng(args.seed, "diag-pairs", g.name))
    with _atomic_dir(args.out) as tmp:
        for s in stages:
            rows = distance_diagnostic(g, X[s], args.pairs, None, stage=s, pairs=pairs)
            write_diagnostic_csv(rows, tmp / f"{g.name}_{s}_distances.csv")
            write_scatter_csv(g, X[s], tmp / f"{g.name}_{s}_scatter.csv", make_rng(args.seed, "diag-scatter"))
    print(f"diagnostics for stages {','.join(stages)} written to {args.out}")


def cmd_attn_export(args):
    from .evaluation import zero_shot_score
    from .reconstruction import export_attention_maps
    ck, g, dct = _score_inputs(args)
    _, _, rec, _ = zero_shot_score(ck, g, args.seed, dictionary=dct, return_details=True)
    nodes = [int(t) for t in args.nodes.split(",") if t.strip()]
    with _atomic_dir(args.out) as tmp:
        export_attention_maps(rec, nodes, tmp)
    print(f"attention maps for {len(nodes)} nodes written to {args.out}")


# ---------------------------------------------------------------------------


def build_parser():
    p = Parser(prog="owleye", description="Zero-shot cross-domain graph anomaly detection.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=Parser)
    sub.required = True

    s = sub.add_parser("inject", help="inject clique and contextual anomalies into a graph")
    s.add_argument("--graph", required=True, help="input graph directory")
    s.add_argument("--out", required=True, help="output graph directory")
    s.add_argument("--cliques", type=int, default=1, help="number of cliques")
    s.add_argument("--clique-size", type=int, default=15, help="nodes per clique")
    s.add_argument("--contextual", type=int, default=15, help="number of contextual anomalies")
    s.add_argument("--features", choices=("fmat", "csv"), default="fmat", help="feature file format")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.set_defaults(func=cmd_inject)

    s = sub.add_parser("align", help="project and normalize a collection of graphs")
    s.add_argument("--graph", nargs="+", required=True, help="graph directories")
    s.add_argument("--out", required=True, help="output directory (one aligned graph per input)")
    s.add_argument("--d", type=int, default=256, help="common feature dimension")
    s.add_argument("--tau", type=float, default=1.0, help="normalization temperature")
    s.add_argument("--aggregate", choices=("median", "mean"), default="median", help="collection statistic")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("train", help="train on labeled graphs and write a checkpoint")
    s.add_argument("--config", help="TOML run configuration")
    s.add_argument("--train", nargs="+", help="training graph directories (override train_dirs)")
    s.add_argument("--out", required=True, help="checkpoint path (.owlm)")
    s.add_argument("--seed", type=int, default=None, help="random seed")
    _add_hyper(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("extract-dict", help="write a checkpoint's pattern dictionary to a file")
    s.add_argument("--checkpoint", required=True, help="checkpoint path")
    s.add_argument("--out", required=True, help="dictionary path (.owld)")
    s.set_defaults(func=cmd_extract_dict)

    s = sub.add_parser("dict", help="dictionary maintenance")
    dsub = s.add_subparsers(dest="dict_command", metavar="action", parser_class=Parser)
    dsub.required = True
    a = dsub.add_parser("add", help="append patterns from new graphs without retraining")
    a.add_argument("--checkpoint", required=True, help="checkpoint providing the encoder (read only)")
    a.add_argument("--dict", required=True, help="dictionary file to extend in place")
    a.add_argument("--graph", nargs="+", required=True, help="graph directories to extract patterns from")
    a.add_argument("--n-sup", type=int, default=None, help="patterns per graph (default: checkpoint n_sup)")
    a.add_argument("--seed", type=int, default=0, help="random seed")
    a.set_defaults(func=cmd_dict_add)

    def scoring_args(s):
        s.add_argument("--checkpoint", required=True, help="checkpoint path")
        s.add_argument("--graph", required=True, help="test graph directory")
        s.add_argument("--dict", help="dictionary file to use instead of the checkpoint's")
        s.add_argument("--seed", type=int, default=0, help="random seed")
        _add_hyper(s, keys={"n_sup", "k", "tau_a", "test_median"})

    s = sub.add_parser("score", help="zero-shot anomaly scores for an unseen graph")
    scoring_args(s)
    s.add_argument("--out", default="scores.csv", help="output CSV (node_id,score)")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("finetune", help="few-shot finetune on labeled nodes of a test graph")
    s.add_argument("--checkpoint", required=True, help="checkpoint path")
    s.add_argument("--graph", required=True, help="test graph directory")
    s.add_argument("--out", required=True, help="output checkpoint path")
    s.add_argument("--labeled", help="CSV of node_id,label for the support nodes")
    s.add_argument("--shots", type=int, default=10, help="support size drawn from the graph's labels when --labeled is absent")
    s.add_argument("--epochs", type=int, default=None, help="finetune epochs (default: finetune_epochs)")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    _add_hyper(s, keys={"lr", "lambda", "beta", "pairs_per_graph", "n_sup"})
    s.set_defaults(func=cmd_finetune)

    s = sub.add_parser("eval", help="run a full experiment from a config file")
    s.add_argument("--config", required=True, help="TOML run configuration")
    s.add_argument("--out", default="report", help="report directory")
    s.add_argument("--seed", type=int, default=None, help="base random seed")
    _add_hyper(s)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("diag", help="diagnostics")
    dsub = s.add_subparsers(dest="diag_command", metavar="kind", parser_class=Parser)
    dsub.required = True
    a = dsub.add_parser("distances", help="pairwise distances per pair class and PCA scatter CSVs")
    a.add_argument("--graph", required=True, help="labeled graph directory")
    a.add_argument("--out", required=True, help="output directory")
    a.add_argument("--stage", default="raw,projected,aligned", help="comma-separated stages")
    a.add_argument("--d", type=int, default=256, help="projection dimension")
    a.add_argument("--tau", type=float, default=1.0, help="normalization temperature")
    a.add_argument("--checkpoint", help="use this checkpoint's training statistics for the aligned stage")
    a.add_argument("--pairs", type=int, default=10000, help="pairs sampled per class")
    a.add_argument("--seed", type=int, default=0, help="random seed")
    a.set_defaults(func=cmd_diag)

    s = sub.add_parser("attn-export", help="export per-node attention maps as CSV")
    scoring_args(s)
    s.add_argument("--nodes", required=True, help="comma-separated node ids")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_attn_export)
    return p


def _limit_threads():
    n = os.environ.get("OWLEYE_THREADS")
    if not n:
        return nullcontext()
    try:
        limit = int(n)
    except ValueError:
        raise InvalidArgumentError(f"OWLEYE_THREADS must be an integer, got {n!r}") from None
    return threadpool_limits(limits=max(limit, 1))


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:
        # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _limit_threads():
            args.func(args)
    except (InvalidArgumentError, FormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"owleye: error: {exc}", file=sys.stderr)
        return 1
    except (OwlEyeError, OSError, ArithmeticError) as exc:
        print(f"owleye: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
