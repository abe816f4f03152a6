"""Command line front end: ``finch run``, ``finch report`` and ``finch targets``.

Output directory layout::

    out/
      pareto/          final seed pool, one raw file per seed named by sha1
      crashes/         one exemplar per bug, bug_<id>_<sha1 prefix>
      stats.csv        one row per generation (plus the initial pass)
      objectives.txt   just-missed branch sites at the end of the campaign
      config.resolved  the effective configuration as key=value lines
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Optional

from . import pareto
from .coverage import DEFAULT_MAP_SIZE
from .distance import DEFAULT_K, DistanceMode
from .engine import STATS_FIELDS, Budget, Campaign, EngineConfig
from .mutator import DEFAULT_MUTANT_BUDGET
from .target import builtin_targets, get_target, run as run_target

log = logging.getLogger("finch")

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE, EXIT_OUT_DIR = 0, 1, 2, 3


@dataclass
class CampaignConfig:
    target: str = ""
    seeds: str = ""
    out: str = ""
    execs: Optional[int] = None
    seconds: Optional[float] = None
    mode: str = "finch"
    seed: int = 0
    k: int = DEFAULT_K
    distance: str = "abs"
    norm: str = "linear"
    hidden: int = 512
    epochs: int = 200
    havoc_ratio: float = 0.25
    mutant_budget: int = DEFAULT_MUTANT_BUDGET
    map_size: int = DEFAULT_MAP_SIZE
    clock: str = "auto"  # auto: virtual for exec budgets, wall for time budgets

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={'' if v is None else repr(v) if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CampaignConfig":
        return cls(**parse_config_text(text))

    def engine_config(self) -> EngineConfig:
        clock = self.clock
        if clock == "auto":
            clock = "virtual" if self.seconds is None else "wall"
        return EngineConfig(
            mode=self.mode,
            campaign_seed=self.seed,
            k=self.k,
            distance_mode=self.distance,
            normalization=self.norm,
            hidden_width=self.hidden,
            epochs=self.epochs,
            havoc_ratio=self.havoc_ratio,
            mutant_budget=self.mutant_budget,
            map_size=self.map_size,
            clock=clock,
        )


_FIELD_TYPES = {
    "execs": int, "seconds": float, "seed": int, "k": int, "hidden": int, "epochs": int,
    "havoc_ratio": float, "mutant_budget": int, "map_size": int,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    known = {f.name for f in fields(CampaignConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or key not in known:
            raise ValueError(f"config line {lineno}: cannot parse {raw!r}")
        if value == "" and key in ("execs", "seconds"):
            out[key] = None
        else:
            out[key] = _FIELD_TYPES.get(key, str)(value)
    return out


def _content_name(data: bytes) -> str:
    return hashlib.sha1(data).hexdigest()


def _read_seeds(seeds_dir: Path) -> List[bytes]:
    if not seeds_dir.is_dir():
        return []
    return [p.read_bytes() for p in sorted(seeds_dir.iterdir()) if p.is_file()]


def _prepare_out(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for sub in ("pareto", "crashes"):
        (out / sub).mkdir(exist_ok=True)
        for old in (out / sub).iterdir():
            if old.is_file():
                old.unlink()
    probe = out / ".write_probe"
    probe.write_bytes(b"")
    probe.unlink()


def run_campaign(cfg: CampaignConfig, dump_tmp: bool = False) -> int:
    try:
        target = get_target(cfg.target)
    except KeyError:
        names = ", ".join(t.name for t in builtin_targets())
        print(f"unknown target {cfg.target!r}; available: {names}", file=sys.stderr)
        return EXIT_USAGE
    seeds = _read_seeds(Path(cfg.seeds))
    if not seeds:
        print(f"no seed files in {cfg.seeds!r}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.execs is None and cfg.seconds is None:
        print("a budget is required (--execs or --seconds)", file=sys.stderr)
        return EXIT_USAGE
    for s in seeds:
        if len(s) > target.max_input_len:
            log.warning("seed of %d bytes truncated to %d", len(s), target.max_input_len)

    out = Path(cfg.out)
    try:
        _prepare_out(out)
        (out / "config.resolved").write_text(cfg.to_text())
        stats_file = open(out / "stats.csv", "w", newline="")
    except OSError as e:
        print(f"cannot write to {cfg.out!r}: {e}", file=sys.stderr)
        return EXIT_OUT_DIR

    with stats_file:
        writer = csv.writer(stats_file, lineterminator="\n")
        writer.writerow(STATS_FIELDS)

        def on_stats(row):
            writer.writerow(row.as_tuple())
            stats_file.flush()

        def dump_mutants(gen, mutants):
            d = out / "tmp" / f"gen_{gen:05d}"
            d.mkdir(parents=True, exist_ok=True)
            start = len(list(d.iterdir()))
            for i, m in enumerate(mutants, start):
                (d / f"{i:07d}").write_bytes(m)

        campaign = Campaign(target, cfg.engine_config(), on_stats, dump_mutants if dump_tmp else None)
        result = campaign.run(seeds, Budget(execs=cfg.execs, seconds=cfg.seconds))

    for s in result.seed_pool:
        (out / "pareto" / _content_name(s.data)).write_bytes(s.data)
    for data, bug in result.crash_pool:
        (out / "crashes" / f"bug_{bug}_{_content_name(data)[:12]}").write_bytes(data)
    (out / "objectives.txt").write_text("".join(f"{o}\n" for o in result.objectives))
    last = result.stats[-1]
    print(
        f"{target.name}: {last.execs} execs, {last.edges_covered} edges, "
        f"{last.crashes_unique} unique bugs, pool {last.pool_size}"
    )
    return EXIT_OK


def read_stats(path: Path):
    """Rows of ``stats.csv`` as dicts; malformed rows are skipped with a warning."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != STATS_FIELDS:
            log.warning("unexpected stats header %r", header)
        for lineno, rec in enumerate(reader, 2):
            if len(rec) != len(STATS_FIELDS):
                log.warning("stats.csv line %d: expected %d fields, skipped", lineno, len(STATS_FIELDS))
                continue
            try:
                row = {
                    name: (float(v) if name.endswith("seconds") or name.endswith("_cum") else int(v))
                    for name, v in zip(STATS_FIELDS, rec)
                }
            except ValueError:
                log.warning("stats.csv line %d: unparsable, skipped", lineno)
                continue
            rows.append(row)
    return rows


def _verify_pareto(out: Path, cfg: CampaignConfig) -> bool:
    target = get_target(cfg.target)
    objectives_file = out / "objectives.txt"
    objectives = [int(x) for x in objectives_file.read_text().split()] if objectives_file.exists() else []
    files = sorted(p for p in (out / "pareto").iterdir() if p.is_file())
    scored = []
    for p in files:
        res = run_target(target, p.read_bytes(), k=cfg.k, distance_mode=DistanceMode(cfg.distance), map_size=cfg.map_size)
        scored.append(pareto.ScoredSeed(p.name, tuple(res.distances.project(objectives))))
    if not objectives:
        print(f"verify: {len(files)} seeds, no open objectives")
        return True
    on_boundary = {s.input for s in pareto.pareto_boundary(scored)}
    off = [s.input for s in scored if s.input not in on_boundary]
    for name in off:
        print(f"verify: {name} is dominated", file=sys.stderr)
    print(f"verify: {len(files) - len(off)}/{len(files)} seeds on the boundary")
    return not off


def report(out_dir: str, verify: bool = False) -> int:
    out = Path(out_dir)
    stats_path = out / "stats.csv"
    if not stats_path.is_file():
        print(f"missing {stats_path}", file=sys.stderr)
        return EXIT_USAGE
    rows = read_stats(stats_path)
    with open(out / "coverage_over_time.tsv", "w") as fh:
        fh.write("wall_seconds\tedges_covered\n")
        for r in rows:
            fh.write(f"{r['wall_seconds']}\t{r['edges_covered']}\n")
    with open(out / "training_time.tsv", "w") as fh:
        fh.write("wall_seconds\ttraining_seconds_cum\n")
        for r in rows:
            fh.write(f"{r['wall_seconds']}\t{r['training_seconds_cum']}\n")
    if rows:
        last = rows[-1]
        print(f"execs: {last['execs']}")
        print(f"edges covered: {last['edges_covered']}")
        print(f"unique bugs: {last['crashes_unique']}")
        print(f"final pool size: {last['pool_size']}")
        print(f"training seconds: {last['training_seconds_cum']}")
    else:
        print("no readable stats rows")
    if verify:
        cfg = CampaignConfig.from_text((out / "config.resolved").read_text())
        if not _verify_pareto(out, cfg):
            return EXIT_VERIFY_FAILED
    return EXIT_OK


def list_targets() -> int:
    for t in builtin_targets():
        print(f"{t.name:10s} max_input_len={t.max_input_len:<4d} {t.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finch", description="Pareto-guided greybox fuzzing of in-process targets")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one fuzzing campaign")
    r.add_argument("--config", help="key=value file; flags given on the command line win")
    r.add_argument("--target")
    r.add_argument("--seeds")
    r.add_argument("--out")
    budget = r.add_mutually_exclusive_group()
    budget.add_argument("--execs", type=int)
    budget.add_argument("--seconds", type=float)
    r.add_argument("--mode", choices=["finch", "baseline"])
    r.add_argument("--seed", type=int)
    r.add_argument("--k", type=int)
    r.add_argument("--distance", choices=["abs", "xor"])
    r.add_argument("--norm", choices=["linear", "log"])
    r.add_argument("--hidden", type=int)
    r.add_argument("--epochs", type=int)
    r.add_argument("--havoc-ratio", type=float)
    r.add_argument("--mutant-budget", type=int)
    r.add_argument("--map-size", type=int)
    r.add_argument("--clock", choices=["auto", "wall", "virtual"])
    r.add_argument("--dump-tmp", action="store_true", help="also write every generation's mutants to out/tmp/")

    rep = sub.add_parser("report", help="summarize a campaign directory")
    rep.add_argument("out_dir")
    rep.add_argument("--verify", action="store_true", help="re-execute pareto/ and check boundary membership")

    sub.add_parser("targets", help="list built-in targets")
    return p


def _config_from_args(args) -> CampaignConfig:
    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text()))
    for f in fields(CampaignConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if args.execs is not None:
        values["seconds"] = None
    elif args.seconds is not None:
        values["execs"] = None
    return dataclasses.replace(CampaignConfig(), **values)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "targets":
        return list_targets()
    if args.command == "report":
        return report(args.out_dir, args.verify)
    try:
        cfg = _config_from_args(args)
    except (OSError, ValueError) as e:
        print(f"bad config: {e}", file=sys.stderr)
        return EXIT_USAGE
    missing = [name for name in ("target", "seeds", "out") if not getattr(cfg, name)]
    if missing:
        print("missing required setting(s): " + ", ".join(missing), file=sys.stderr)
        return EXIT_USAGE
    return run_campaign(cfg, dump_tmp=args.dump_tmp)


if __name__ == "__main__":
    sys.exit(main())
