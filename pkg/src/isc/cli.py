"""Command-line harness: ``isc <command> [options]``.

Every option may also be given in a flat ``key = value`` file passed with
``--config``; command-line flags win. Keys use the long option names with
``-`` or ``_``. All outputs are CSV or TSV text and are byte-identical for a
fixed seed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .baselines import GAConfig
from .channel import MODES, ChannelConfig, ChannelError, per_sweep, write_sweep
from .embedding import TransEConfig, load_embeddings, save_embeddings, train_transe
from .experiments import DESK_TRAIN, EVAL_SAMPLES, SKG_PARENT, compare_on_skg
from .gaml import TrainConfig, train
from .kg import (KBError, load_triples, partition_skgs, read_paths, sample_expert_paths,
                 write_paths, write_triples)
from .neural import ShapeError, load_checkpoint, save_checkpoint
from .policy import PolicyModel
from .synth import SynthConfig, generate

log = logging.getLogger("isc")


class UsageError(Exception):
    pass


def _existing(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"missing required option --{what}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {p}")
    return p


def _out(args, default: str) -> Path:
    p = Path(args.out or default)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _out_dir(args, default: str) -> Path:
    p = Path(args.out or default)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _words(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _bool(text: str | bool) -> bool:
    if isinstance(text, bool):
        return text
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# -- commands ----------------------------------------------------------------

def cmd_synth(args) -> None:
    kb = generate(SynthConfig(args.entities, args.relations, args.density, args.seed,
                              args.self_loops))
    out = _out(args, "kb.tsv")
    write_triples(kb, out)
    log.info("wrote %d triples to %s", kb.n_triples, out)


def cmd_embed(args) -> None:
    kb = load_triples(_existing(args.kb, "kb"))
    cfg = TransEConfig(dim=args.dim, margin=args.margin, lr=args.lr, epochs=args.epochs,
                       batch_size=args.batch_size, seed=args.seed)
    tab = train_transe(kb, cfg)
    out = _out(args, "embeddings.csv")
    save_embeddings(tab, out)
    log.info("wrote %d entity and %d relation vectors to %s",
             len(tab.entity_names), len(tab.relation_names), out)


def cmd_experts(args) -> None:
    kb = load_triples(_existing(args.kb, "kb"))
    paths = sample_expert_paths(kb, args.n, args.hops, seed=args.seed)
    out = _out(args, "experts.tsv")
    write_paths(kb, paths, out)
    log.info("wrote %d expert paths to %s", len(paths), out)


def _train_config(args, **overrides) -> TrainConfig:
    return TrainConfig(rounds=args.rounds, episodes=args.episodes, batch_size=args.batch_size,
                       comparator_steps=args.comparator_steps, policy_lr=args.policy_lr,
                       comparator_lr=args.comparator_lr, alpha=args.alpha, hops=args.hops,
                       hidden=args.hidden, track_tv=args.track_tv, checkpoint=args.checkpoint,
                       seed=args.seed, **overrides)


def cmd_train(args) -> None:
    kb = load_triples(_existing(args.kb, "kb"))
    tab = load_embeddings(_existing(args.embeddings, "embeddings"))
    experts = read_paths(kb, _existing(args.experts, "experts"))
    policy, comparator, trace = train(kb, kb, tab, experts, _train_config(args))
    out = _out_dir(args, "run")
    trace.to_csv(out / "metrics.csv")
    save_checkpoint(policy.net, out / "policy.csv")
    save_checkpoint(comparator.net, out / "comparator.csv")
    log.info("trained %d rounds (best round %s); outputs in %s", len(trace), trace.best_round, out)


def cmd_eval(args) -> None:
    if args.kb:
        parent = load_triples(_existing(args.kb, "kb"))
    else:
        parent = generate(replace(SKG_PARENT, seed=args.seed))
    skgs = partition_skgs(parent, args.skgs, seed=args.seed, strategy=args.strategy)
    cfg = _train_config(args)
    ga = GAConfig(population=args.population, generations=args.generations)
    out = _out(args, "accuracy.csv")
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["skg", "density", "method", "accuracy"])
        for i, skg in enumerate(skgs):
            runs = [compare_on_skg(skg, args.seed + s, args.n_train, args.n_test, args.samples,
                                   cfg, ga) for s in range(args.seeds)]
            gaml = sum(r.gaml for r in runs) / len(runs)
            ga_acc = sum(r.ga for r in runs) / len(runs)
            w.writerow([i, repr(skg.density), "gaml", repr(gaml)])
            w.writerow([i, repr(skg.density), "ga", repr(ga_acc)])
            log.info("skg %d density %.3f: gaml %.3f ga %.3f", i, skg.density, gaml, ga_acc)
    log.info("wrote %s", out)


def cmd_channel(args) -> None:
    kb = load_triples(_existing(args.kb, "kb"))
    tab = load_embeddings(_existing(args.embeddings, "embeddings"))
    modes = _words(args.modes)
    policy = None
    if args.policy:
        policy = PolicyModel(load_checkpoint(_existing(args.policy, "policy")), args.hops)
    elif "reasoning" in modes:
        raise UsageError("reasoning mode needs a --policy checkpoint")
    cfg = ChannelConfig(snr_db=_floats(args.snr), packets=args.packets, modes=modes,
                        shortlist=args.shortlist, context_hops=args.hops, seed=args.seed,
                        threads=args.threads)
    out = _out(args, "per.csv")
    write_sweep(per_sweep(cfg, kb, tab, policy), out)
    log.info("wrote %s", out)
    if args.skgs:
        for i, skg in enumerate(partition_skgs(kb, args.skgs, seed=args.seed,
                                               strategy=args.strategy)):
            path = out.with_name(f"{out.stem}_skg{i}{out.suffix}")
            write_sweep(per_sweep(cfg, skg, tab, policy), path)
            log.info("skg %d density %.3f -> %s", i, skg.density, path)


def cmd_sweep_experts(args) -> None:
    kb = load_triples(_existing(args.kb, "kb"))
    tab = load_embeddings(_existing(args.embeddings, "embeddings"))
    out = _out_dir(args, "sweep")
    for n in _ints(args.counts):
        experts = sample_expert_paths(kb, n, args.hops, seed=args.seed)
        _, _, trace = train(kb, kb, tab, experts, _train_config(args))
        trace.to_csv(out / f"metrics_n{n}.csv")
        log.info("%d experts: final interp_loss %s", n,
                 trace.records[-1].interp_loss if trace.records else "n/a")


# -- argument parsing ----------------------------------------------------------

def _add_train_args(p: argparse.ArgumentParser, base: TrainConfig) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--rounds", type=int, default=base.rounds)
    g.add_argument("--episodes", type=int, default=base.episodes)
    g.add_argument("--batch-size", type=int, default=base.batch_size)
    g.add_argument("--comparator-steps", type=int, default=base.comparator_steps)
    g.add_argument("--policy-lr", type=float, default=base.policy_lr)
    g.add_argument("--comparator-lr", type=float, default=base.comparator_lr)
    g.add_argument("--alpha", type=float, default=base.alpha)
    g.add_argument("--hidden", type=int, default=base.hidden)
    g.add_argument("--track-tv", type=_bool, default=base.track_tv,
                   help="track exact TV distance (small KBs only)")
    g.add_argument("--checkpoint", choices=("best", "final"), default=base.checkpoint)


COMMANDS: dict[str, tuple[Callable, str]] = {
    "synth": (cmd_synth, "generate a synthetic knowledge base (TSV triples)"),
    "embed": (cmd_embed, "train TransE embeddings (CSV)"),
    "experts": (cmd_experts, "sample expert reasoning paths"),
    "train": (cmd_train, "adversarial policy training: metrics and checkpoints"),
    "eval": (cmd_eval, "policy vs genetic baseline accuracy per sub-graph"),
    "channel": (cmd_channel, "packet error rate sweep over SNR"),
    "sweep-experts": (cmd_sweep_experts, "training metrics per expert-path count"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="isc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    subs = {name: sub.add_parser(name, parents=[common], help=help_)
            for name, (_, help_) in COMMANDS.items()}

    p = subs["synth"]
    p.add_argument("--entities", type=int, default=500)
    p.add_argument("--relations", type=int, default=8)
    p.add_argument("--density", type=float, default=4.0)
    p.add_argument("--self-loops", type=_bool, default=False)

    p = subs["embed"]
    p.add_argument("--kb")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=64)

    p = subs["experts"]
    p.add_argument("--kb")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--hops", type=int, default=2)

    p = subs["train"]
    p.add_argument("--kb")
    p.add_argument("--embeddings")
    p.add_argument("--experts")
    p.add_argument("--hops", type=int, default=2)
    _add_train_args(p, DESK_TRAIN)

    p = subs["eval"]
    p.add_argument("--kb", help="parent KB to partition (default: synthetic)")
    p.add_argument("--skgs", type=int, default=5)
    p.add_argument("--strategy", choices=("shuffle", "degree"), default="shuffle")
    p.add_argument("--seeds", type=int, default=1, help="runs averaged per sub-graph")
    p.add_argument("--n-train", type=int, default=256)
    p.add_argument("--n-test", type=int, default=100)
    p.add_argument("--samples", type=int, default=EVAL_SAMPLES,
                   help="policy rollouts per test origin")
    p.add_argument("--population", type=int, default=GAConfig.population)
    p.add_argument("--generations", type=int, default=GAConfig.generations)
    p.add_argument("--hops", type=int, default=2)
    _add_train_args(p, DESK_TRAIN)

    p = subs["channel"]
    p.add_argument("--kb")
    p.add_argument("--embeddings")
    p.add_argument("--policy", help="policy checkpoint from `train`")
    p.add_argument("--snr", default="0,2,4,6,8,10", help="comma-separated SNR points in dB")
    p.add_argument("--packets", type=int, default=500)
    p.add_argument("--modes", default=",".join(MODES))
    p.add_argument("--shortlist", type=int, default=5)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--skgs", type=int, default=0, help="also sweep this many sub-graphs")
    p.add_argument("--strategy", choices=("shuffle", "degree"), default="degree")

    p = subs["sweep-experts"]
    p.add_argument("--kb")
    p.add_argument("--embeddings")
    p.add_argument("--counts", default="10,100,1000")
    p.add_argument("--hops", type=int, default=2)
    _add_train_args(p, DESK_TRAIN)
    parser.subcommands = subs
    return parser


def read_config(path: Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file (no sections)."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    cp.read_string("[run]\n" + path.read_text(encoding="utf-8"), source=str(path))
    return {k.replace("-", "_"): v for k, v in cp["run"].items()}


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        path = _existing(args.config, "config")
        values = read_config(path)
        sp = parser.subcommands[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(values) - known - {"config"})
        if unknown:
            raise UsageError(f"{path}: unknown keys for `{args.command}`: {', '.join(unknown)}")
        values.pop("config", None)
        sp.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"isc: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command][0](args)
    except UsageError as exc:
        print(f"isc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (KBError, ChannelError, ShapeError, ValueError, OSError) as exc:
        print(f"isc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
