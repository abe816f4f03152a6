"""The fuzzing loop.

``hot_fuzz`` keeps a min-Pareto seed pool over just-missed branch distances,
trains a fresh model on the pool every generation and mutates each seed's
hot bytes plus a share of havoc.  ``baseline_fuzz`` is the plain
coverage-guided loop (havoc only, keep a mutant iff it covers a new edge).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from . import pareto
from .coverage import DEFAULT_MAP_SIZE, CoverageBitmap
from .distance import DEFAULT_K, DistanceBitmap, DistanceMode, Normalization
from .model import TrainConfig, build_training_set, encode_inputs, train
from .mutator import DEFAULT_MUTANT_BUDGET, derive_seed, havoc, mutate_hot_bytes
from .target import DEFAULT_EVENT_BUDGET, ExecutionResult, Executor, Outcome, Target

log = logging.getLogger(__name__)

STATS_FIELDS = (
    "wall_seconds",
    "execs",
    "edges_covered",
    "pool_size",
    "objective_count",
    "training_seconds_cum",
    "crashes_unique",
)

# nominal costs charged by the virtual clock
VIRTUAL_EXEC_SECONDS = 1e-5
VIRTUAL_TRAIN_SECONDS = 1e-6  # per example-epoch


@dataclass
class EngineConfig:
    mode: str = "finch"  # finch | baseline
    campaign_seed: int = 0
    k: int = DEFAULT_K
    distance_mode: str = "abs"
    normalization: str = "linear"
    hidden_width: int = 512
    epochs: int = 200
    learning_rate: float = 1e-2
    momentum: float = 0.9
    havoc_ratio: float = 0.25
    havoc_count: int = 256  # per seed in baseline mode and havoc-only generations
    mutant_budget: int = DEFAULT_MUTANT_BUDGET
    map_size: int = DEFAULT_MAP_SIZE
    event_budget: int = DEFAULT_EVENT_BUDGET
    gradient_mode: str = "aggregate"  # aggregate | per_objective
    clock: str = "wall"  # wall | virtual
    check_invariants: bool = False


@dataclass
class Budget:
    execs: Optional[int] = None
    seconds: Optional[float] = None

    def __post_init__(self):
        if self.execs is None and self.seconds is None:
            raise ValueError("budget needs execs or seconds")


@dataclass
class Seed:
    data: bytes
    result: ExecutionResult = field(repr=False)
    J: frozenset = frozenset()

    @property
    def distances(self) -> DistanceBitmap:
        return self.result.distances

    @property
    def input(self) -> bytes:
        return self.data


@dataclass
class StatsRow:
    wall_seconds: float
    execs: int
    edges_covered: int
    pool_size: int
    objective_count: int
    training_seconds_cum: float
    crashes_unique: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f) for f in STATS_FIELDS)


@dataclass
class GenerationRecord:
    index: int
    objective_count: int
    pool_in: int
    executed: int
    new_seeds: int
    candidates: int
    boundary: int
    pool_out: int
    distance_only: int  # retained without new edges but with a better objective minimum
    havoc_only: bool
    train_loss_first: float = math.nan
    train_loss_last: float = math.nan
    training_seconds: float = 0.0


@dataclass
class CampaignResult:
    seed_pool: List[Seed]
    crash_pool: List[Tuple[bytes, Hashable]]
    stats: List[StatsRow]
    generations: List[GenerationRecord]
    objectives: List[int]
    global_coverage: CoverageBitmap
    covered_branches: frozenset
    hangs: int = 0
    truncations: int = 0
    training_aborts: int = 0


def dedup_crash(crash_pool: List[Tuple[bytes, Hashable]], candidate: Tuple[bytes, Hashable]):
    """Append ``candidate`` iff its bug id has not been seen."""
    if all(bug != candidate[1] for _, bug in crash_pool):
        crash_pool.append(candidate)
    return crash_pool


class _BudgetExhausted(Exception):
    pass


class Campaign:
    """One fuzzing campaign on one target.

    ``on_stats`` is called with every appended :class:`StatsRow`;
    ``on_generation`` with ``(index, mutants)`` before a generation's
    mutants run.
    """

    def __init__(
        self,
        target: Target,
        cfg: EngineConfig = EngineConfig(),
        on_stats: Optional[Callable[[StatsRow], None]] = None,
        on_generation: Optional[Callable[[int, List[bytes]], None]] = None,
    ):
        if cfg.mode not in ("finch", "baseline"):
            raise ValueError(f"unknown mode {cfg.mode!r}")
        self.target = target
        self.cfg = cfg
        self.on_stats = on_stats
        self.on_generation = on_generation
        self.executor = Executor(
            target, cfg.k, DistanceMode(cfg.distance_mode), cfg.map_size, cfg.event_budget
        )
        self.global_cov = CoverageBitmap(cfg.map_size)
        self.covered: set = set()
        self.crash_pool: List[Tuple[bytes, Hashable]] = []
        self._bugs: set = set()
        self.pool: List[Seed] = []
        self.objectives: List[int] = []
        self.stats: List[StatsRow] = []
        self.generations: List[GenerationRecord] = []
        self.execs = 0
        self.hangs = 0
        self.training_seconds = 0.0
        self.training_aborts = 0
        self._virtual_train = 0.0
        self._budget: Optional[Budget] = None
        self._start = 0.0

    # -- bookkeeping -------------------------------------------------------

    def _now(self) -> float:
        if self.cfg.clock == "virtual":
            return self.execs * VIRTUAL_EXEC_SECONDS + self._virtual_train
        return time.perf_counter() - self._start

    def _exhausted(self) -> bool:
        b = self._budget
        if b.execs is not None and self.execs >= b.execs:
            return True
        return b.seconds is not None and time.perf_counter() - self._start >= b.seconds

    def _append_stats(self) -> None:
        wall = self._now()
        if self.stats:
            last = self.stats[-1]
            if self.execs <= last.execs:
                return
            wall = max(wall, last.wall_seconds + 1e-6)
        train_s = self._virtual_train if self.cfg.clock == "virtual" else self.training_seconds
        row = StatsRow(
            wall_seconds=round(wall, 6),
            execs=self.execs,
            edges_covered=self.global_cov.popcount(),
            pool_size=len(self.pool),
            objective_count=len(self.objectives),
            training_seconds_cum=round(train_s, 6),
            crashes_unique=len(self.crash_pool),
        )
        self.stats.append(row)
        if self.on_stats:
            self.on_stats(row)

    def _execute(self, data: bytes):
        """Run one input; returns ``(result, new_edge_keys)`` or ``(result, None)`` for hangs."""
        res = self.executor(data)
        self.execs += 1
        if res.outcome is Outcome.HANG:
            self.hangs += 1
            return res, None
        fresh = self.global_cov.merge(res.coverage)
        self.covered |= res.branches
        if res.outcome is Outcome.CRASH and res.bug_id not in self._bugs:
            self._bugs.add(res.bug_id)
            dedup_crash(self.crash_pool, (bytes(data), res.bug_id))
            log.info("bug %s found after %d execs", res.bug_id, self.execs)
        return res, fresh

    def _result(self) -> CampaignResult:
        return CampaignResult(
            seed_pool=list(self.pool),
            crash_pool=list(self.crash_pool),
            stats=list(self.stats),
            generations=list(self.generations),
            objectives=list(self.objectives),
            global_coverage=self.global_cov,
            covered_branches=frozenset(self.covered),
            hangs=self.hangs,
            truncations=self.executor.truncations,
            training_aborts=self.training_aborts,
        )

    # -- pool maintenance --------------------------------------------------

    def _minimize(self, candidates: List[Seed]):
        """Recompute objectives and reduce ``candidates`` to a min-Pareto set.

        Returns ``(pool, n_boundary)``.  Without any just-missed objective
        nothing can be scored; the candidates are kept as they are.
        """
        self.objectives = pareto.just_missed(candidates, self.covered)
        if not self.objectives:
            for s in candidates:
                s.J = frozenset()
            return list(candidates), len(candidates)
        k = self.cfg.k
        scored = []
        for s in candidates:
            fv = tuple(s.distances.project(self.objectives))
            if any(v < k for v in fv):
                scored.append(pareto.ScoredSeed(s.data, fv, payload=s))
        boundary = pareto.pareto_boundary(scored)
        kept = pareto.min_pareto_set(boundary)
        for sc in kept:
            sc.payload.J = sc.J
        pool = [sc.payload for sc in kept]
        if self.cfg.check_invariants:
            again = pareto.min_pareto_set(
                [pareto.ScoredSeed(s.data, tuple(s.distances.project(self.objectives))) for s in pool]
            )
            assert len(again) == len(pool), "seed pool is not a fixed point of min_pareto_set"
        return pool, len(boundary)

    # -- entry points ------------------------------------------------------

    def run(self, T0: Sequence[bytes], budget: Budget) -> CampaignResult:
        if not T0:
            raise ValueError("T0 must contain at least one input")
        self._budget = budget
        self._start = time.perf_counter()
        initial = self._run_initial(T0)
        if self.cfg.mode == "finch":
            self.pool, _ = self._minimize(initial)
        else:
            self.pool = initial
            self.objectives = pareto.just_missed(self.pool, self.covered)
        self._append_stats()
        gen = 0
        while self.pool and not self._exhausted():
            gen += 1
            before = self.execs
            if self.cfg.mode == "finch":
                self._finch_generation(gen)
            else:
                self._baseline_generation(gen)
            self._append_stats()
            if self.execs == before:
                break
        return self._result()

    def _run_initial(self, T0: Sequence[bytes]) -> List[Seed]:
        seen = set()
        seeds = []
        for data in T0:
            data = bytes(data)[: self.target.max_input_len]
            if data in seen:
                continue
            seen.add(data)
            res, fresh = self._execute(data)
            if res.outcome is not Outcome.OK:
                continue
            if self.cfg.mode == "baseline" and not fresh and seeds:
                continue
            seeds.append(Seed(data, res))
        return seeds

    # -- baseline ----------------------------------------------------------

    def _baseline_generation(self, gen: int) -> None:
        cfg = self.cfg
        new_seeds: List[Seed] = []
        executed = 0
        try:
            for idx, seed in enumerate(self.pool):
                mutants = havoc(
                    seed.data, (cfg.campaign_seed, gen, idx), cfg.havoc_count, self.target.max_input_len
                )
                if self.on_generation:
                    self.on_generation(gen, mutants)
                for m in mutants:
                    if self._exhausted():
                        raise _BudgetExhausted
                    res, fresh = self._execute(m)
                    executed += 1
                    if fresh and res.outcome is Outcome.OK:
                        new_seeds.append(Seed(m, res))
        except _BudgetExhausted:
            pass
        pool_in = len(self.pool)
        self.pool = self.pool + new_seeds
        self.objectives = pareto.just_missed(self.pool, self.covered)
        n = len(self.pool)
        self.generations.append(
            GenerationRecord(gen, len(self.objectives), pool_in, executed, len(new_seeds), n, n, n, 0, True)
        )

    # -- hot_fuzz ----------------------------------------------------------

    def _train(self, gen: int):
        cfg = self.cfg
        data = build_training_set(self.pool, self.objectives, Normalization(cfg.normalization))
        if data is None:
            return None, math.nan, math.nan, 0.0
        tcfg = TrainConfig(
            hidden=cfg.hidden_width,
            epochs=cfg.epochs,
            lr=cfg.learning_rate,
            momentum=cfg.momentum,
            rng_seed=derive_seed((cfg.campaign_seed, gen)),
        )
        t0 = time.perf_counter()
        model = train(data, tcfg)
        elapsed = time.perf_counter() - t0
        self.training_seconds += elapsed
        self._virtual_train += VIRTUAL_TRAIN_SECONDS * len(data) * len(model.loss_history)
        hist = model.loss_history
        first = hist[0] if hist else math.nan
        last = hist[-1] if hist else math.nan
        if model.aborted:
            self.training_aborts += 1
            log.warning("generation %d: training produced a non-finite loss", gen)
            return None, first, last, elapsed
        return model, first, last, elapsed

    def _hot_mutants(self, model, seed: Seed) -> List[bytes]:
        cfg = self.cfg
        x = encode_inputs([seed.data], width=model.in_dim)[0]
        n = len(seed.data)
        if cfg.gradient_mode == "per_objective":
            rows = model.input_gradients_per_objective(x)
            picks = sorted(seed.J) or range(len(rows))
            share = max(1, cfg.mutant_budget // len(picks))
            out: List[bytes] = []
            for j in picks:
                out.extend(mutate_hot_bytes(seed.data, rows[j][:n], share))
            return out[: cfg.mutant_budget]
        g = model.input_gradients(x, seed.J or None)
        return mutate_hot_bytes(seed.data, g[:n], cfg.mutant_budget)

    def _finch_generation(self, gen: int) -> None:
        cfg = self.cfg
        k = cfg.k
        objectives = list(self.objectives)
        model, loss_first, loss_last, train_s = self._train(gen)
        havoc_only = model is None

        rows = [s.distances.project(objectives) for s in self.pool]
        F = np.array(rows, dtype=np.uint64).reshape(len(rows), len(objectives))
        best = F.min(axis=0) if len(F) and objectives else np.zeros(0, dtype=np.uint64)
        known_sites = set()
        for s in self.pool:
            known_sites.update(s.distances.entries)
        covered = self.covered

        new_seeds: List[Seed] = []
        distance_only = 0
        executed = 0
        pool_snapshot = list(self.pool)
        try:
            for idx, seed in enumerate(pool_snapshot):
                hot = [] if havoc_only else self._hot_mutants(model, seed)
                n_havoc = round(cfg.havoc_ratio * len(hot)) if hot else cfg.havoc_count
                mutants = hot + havoc(
                    seed.data, (cfg.campaign_seed, gen, idx), n_havoc, self.target.max_input_len
                )
                if self.on_generation:
                    self.on_generation(gen, mutants)
                for m in mutants:
                    if self._exhausted():
                        raise _BudgetExhausted
                    res, fresh = self._execute(m)
                    executed += 1
                    if res.outcome is not Outcome.OK:
                        continue
                    entries = res.distances.entries
                    new_site = any(
                        s not in known_sites and (2 * s not in covered or 2 * s + 1 not in covered)
                        for s in entries
                    )
                    fv = np.array([entries.get(s, k) for s in objectives], dtype=np.uint64)
                    improves = bool(objectives) and bool((fv < best).any())
                    if not (fresh or new_site):
                        if not objectives or bool((fv == k).all()):
                            continue
                        # minima only fall, so a mutant that is not at some minimum now
                        # can never be kept by min_pareto_set
                        if not improves and not bool((fv <= best).any()):
                            continue
                        # reject when some pool/new seed is at least as good everywhere
                        if not improves and bool((F <= fv).all(axis=1).any()):
                            continue
                    new_seeds.append(Seed(m, res))
                    known_sites.update(entries)
                    if objectives:
                        F = np.vstack([F, fv[None, :]])
                        best = np.minimum(best, fv)
                    if improves and not fresh:
                        distance_only += 1
        except _BudgetExhausted:
            pass

        candidates = self.pool + new_seeds
        self.pool, n_boundary = self._minimize(candidates)
        self.generations.append(
            GenerationRecord(
                index=gen,
                objective_count=len(objectives),
                pool_in=len(pool_snapshot),
                executed=executed,
                new_seeds=len(new_seeds),
                candidates=len(candidates),
                boundary=n_boundary,
                pool_out=len(self.pool),
                distance_only=distance_only,
                havoc_only=havoc_only,
                train_loss_first=loss_first,
                train_loss_last=loss_last,
                training_seconds=train_s,
            )
        )


def hot_fuzz(target: Target, T0: Sequence[bytes], budget: Budget, cfg: Optional[EngineConfig] = None, **kw):
    cfg = cfg or EngineConfig()
    if cfg.mode != "finch":
        cfg = EngineConfig(**{**cfg.__dict__, "mode": "finch"})
    return Campaign(target, cfg, **kw).run(T0, budget)


def baseline_fuzz(target: Target, T0: Sequence[bytes], budget: Budget, cfg: Optional[EngineConfig] = None, **kw):
    cfg = cfg or EngineConfig(mode="baseline")
    if cfg.mode != "baseline":
        cfg = EngineConfig(**{**cfg.__dict__, "mode": "baseline"})
    return Campaign(target, cfg, **kw).run(T0, budget)
