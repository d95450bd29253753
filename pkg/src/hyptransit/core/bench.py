# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Oracle verification and the desk-scale benchmark harness.

Both drivers draw their randomness from named sub-streams of a single seed, so
every field except wall-clock time is reproducible.
"""

import json
import pathlib
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .cells import NestedLayout, build_layout, parse_partitions
from .fillin import FillInSet, Workload, compute_fillin, enumerate_pqueries
from .hyp_query import HypContext, hyptbtr_query, hypraptor_query
from .hypergraph import build_hypergraph
from .log_helpers import logger, progress_steps
from .pareto import ParetoSet, SearchStats, departure_times, pareto_to_json
from .raptor_engine import raptor_query
from .settings import MAX_TRANSFERS, PARTITION_EPSILON
from .synth import substream
from .tbtr_engine import tbtr_query
from .te_oracle import TEGraph, build_te_graph, oracle_pareto
from .timetable import Timetable
from .transfer_set import TransferSet, preprocess_transfers

ENGINES = ("ted", "raptor", "tbtr", "hyptbtr", "hypraptor")
PARTITIONED = {"hyptbtr": "tbtr", "hypraptor": "raptor"}
FILLIN_ENGINE = {"hyptbtr": "otm-rtbtr", "hypraptor": "otm-rraptor"}
COUNTERS = ("routes_scanned", "segments_scanned", "transfers_examined", "labels_updated")

Query = Tuple[int, int, int]


def gain_percent(base: float, variant: float) -> float:
    """(base - variant) / base in percent; 0 when the base is 0."""
    if base <= 0:
        return 0.0
    return round(100.0 * (base - variant) / base, 4)


def sample_queries(tt: Timetable, count: int, seed: int) -> List[Query]:
    """Uniform (origin != target) pairs; departures drawn from the origin's departure list."""
    if tt.n_stops < 2 or count <= 0:
        return []
    rng = substream(seed, "queries")
    queries: List[Query] = []
    for _ in range(count):
        origin = int(rng.integers(tt.n_stops))
        target = int(rng.integers(tt.n_stops - 1))
        if target >= origin:
            target += 1
        times = departure_times(tt, origin)
        departure = int(times[int(rng.integers(len(times)))]) if times else 0
        queries.append((origin, target, departure))
    return queries


def partition_seed(seed: int) -> int:
    return int(substream(seed, "partitioner").integers(2**31 - 1))


def _usable_transfers(transfers: Optional[TransferSet], tt: Timetable, workers: int) -> TransferSet:
    if transfers is None:
        transfers, _ = preprocess_transfers(tt, stage="uturn_free", workers=workers)
    return transfers


@dataclass
class PartitionRun:
    """One partition spec with its workload and the fill-ins built on it."""

    spec: str
    layout: Any
    workload: Workload
    fillins: Dict[str, FillInSet] = field(default_factory=dict)
    contexts: Dict[str, HypContext] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "nested" if isinstance(self.layout, NestedLayout) else "standard"

    def cutstops(self) -> int:
        leaf = self.layout.flatten() if isinstance(self.layout, NestedLayout) else self.layout
        return len(leaf.cutstops)


def prepare_partition(
    tt: Timetable,
    transfers: Optional[TransferSet],
    spec: Any,
    engines: Sequence[str],
    scheme: str = "sc1",
    epsilon: float = PARTITION_EPSILON,
    seed: int = 0,
    max_transfers: int = MAX_TRANSFERS,
    workers: int = 1,
) -> PartitionRun:
    """Partition, enumerate cutstop pairs and compute the fill-ins the given hyp engines need."""
    hg = build_hypergraph(tt, scheme)
    top_p, child_p = parse_partitions(spec)
    # Tiny instances cannot host more cells than hypergraph nodes.
    if child_p is None:
        label = str(max(1, min(top_p, hg.n_nodes)))
    else:
        label = f"{top_p}x{child_p}" if top_p <= hg.n_nodes else str(max(1, hg.n_nodes))
    if label != str(spec).strip().lower():
        logger.warning("partition_spec_clamped requested=%s used=%s nodes=%d", spec, label, hg.n_nodes)
    layout = build_layout(tt, hg, label, epsilon, partition_seed(seed))
    run = PartitionRun(spec=label, layout=layout, workload=enumerate_pqueries(layout))
    for engine in engines:
        if engine not in FILLIN_ENGINE:
            continue
        fillin = compute_fillin(tt, transfers, run.workload, FILLIN_ENGINE[engine], max_transfers, workers)
        run.fillins[engine] = fillin
        run.contexts[engine] = HypContext(tt, layout, fillin)
    return run


class EngineRunner:
    """Dispatches one query to any engine over shared preprocessed state."""

    def __init__(
        self,
        tt: Timetable,
        transfers: Optional[TransferSet] = None,
        partition: Optional[PartitionRun] = None,
        max_transfers: int = MAX_TRANSFERS,
        te: Optional[TEGraph] = None,
    ):
        self.tt = tt
        self.transfers = transfers
        self.partition = partition
        self.max_transfers = max_transfers
        self.te = te

    def oracle_graph(self) -> TEGraph:
        if self.te is None:
            self.te = build_te_graph(self.tt, self.max_transfers)
        return self.te

    def run(self, engine: str, query: Query, stats: Optional[SearchStats] = None,
            record_journeys: bool = False):
        origin, target, departure = query
        n = self.max_transfers
        if engine == "ted":
            return oracle_pareto(self.tt, origin, target, departure, n, te=self.oracle_graph()), ()
        if engine == "raptor":
            result = raptor_query(self.tt, origin, target, departure, n, stats, record_journeys)
        elif engine == "tbtr":
            result = tbtr_query(self.tt, self.transfers, origin, target, departure, n, stats, record_journeys)
        elif engine in PARTITIONED:
            if self.partition is None or engine not in self.partition.contexts:
                raise ValueError(f"engine {engine} needs a partition with a {FILLIN_ENGINE[engine]} fill-in")
            ctx = self.partition.contexts[engine]
            if engine == "hyptbtr":
                result = hyptbtr_query(self.tt, self.transfers, ctx, origin, target, departure, n,
                                       stats, record_journeys)
            else:
                result = hypraptor_query(self.tt, ctx, origin, target, departure, n, stats, record_journeys)
        else:
            raise ValueError(f"unknown engine {engine!r}; expected one of {list(ENGINES)}")
        return result.pareto, result.journeys


# -- verification -------------------------------------------------------------------

@dataclass
class VerifyReport:
    queries: int
    passed: int
    partitions: str
    failures: List[Dict[str, Any]] = field(default_factory=list)
    reproducer: Optional[Dict[str, Any]] = None
    work: Dict[str, int] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "queries": self.queries,
            "passed": self.passed,
            "partitions": self.partitions,
            "failures": self.failures,
            "reproducer": self.reproducer,
            "work": self.work,
            "elapsed": round(self.elapsed, 6),
        }


def _query_json(tt: Timetable, query: Query, max_transfers: int) -> Dict[str, Any]:
    origin, target, departure = query
    return {
        "origin": tt.stop_ids[origin],
        "target": tt.stop_ids[target],
        "departure": departure,
        "max_transfers": max_transfers,
    }


def _reproducer(
    runner: EngineRunner, query: Query, results: Dict[str, ParetoSet], seed: int,
) -> Dict[str, Any]:
    """The failing query, every engine's answer and the trips the journeys ride on."""
    tt = runner.tt
    trips: set = set()
    stops = {query[0], query[1]}
    for engine in ("raptor", "tbtr"):
        _, journeys = runner.run(engine, query, record_journeys=True)
        for journey in journeys:
            for leg in journey.legs:
                trip = tt.trips[leg.trip]
                trips.add(leg.trip)
                stops.update(trip.stops[leg.board_index:leg.alight_index + 1])
    return {
        "seed": seed,
        "partitions": runner.partition.spec if runner.partition else None,
        "query": _query_json(tt, query, runner.max_transfers),
        "results": {engine: pareto_to_json(pareto) for engine, pareto in results.items()},
        "slice": {
            "stops": sorted(tt.stop_ids[s] for s in stops),
            "trips": sorted(tt.trips[t].gtfs_id for t in trips),
        },
    }


def run_verify(
    tt: Timetable,
    num_queries: int = 100,
    seed: int = 7,
    transfers: Optional[TransferSet] = None,
    partitions: str = "2",
    scheme: str = "sc1",
    epsilon: float = PARTITION_EPSILON,
    max_transfers: int = MAX_TRANSFERS,
    reproducer_path: Optional[Any] = None,
    workers: int = 1,
) -> VerifyReport:
    """Random queries answered by every engine; all Pareto sets must equal the oracle's."""
    started = time.perf_counter()
    queries = sample_queries(tt, num_queries, seed)
    report = VerifyReport(queries=len(queries), passed=0, partitions=str(partitions))
    if not queries:
        logger.info("verify_vacuous stops=%d queries=0", tt.n_stops)
        return report

    transfers = _usable_transfers(transfers, tt, workers)
    partition = prepare_partition(
        tt, transfers, partitions, ENGINES, scheme, epsilon, seed, max_transfers, workers,
    )
    report.partitions = partition.spec
    runner = EngineRunner(tt, transfers, partition, max_transfers)
    work = {"tbtr_segments": 0, "hyptbtr_segments": 0, "raptor_routes": 0, "hypraptor_routes": 0,
            "hyptbtr_strictly_less": 0}
    for index in progress_steps("verify_queries", len(queries)):
        query = queries[index]
        results: Dict[str, ParetoSet] = {}
        counters: Dict[str, SearchStats] = {}
        for engine in ENGINES:
            counters[engine] = SearchStats()
            results[engine], _ = runner.run(engine, query, counters[engine])
        work["tbtr_segments"] += counters["tbtr"].segments_scanned
        work["hyptbtr_segments"] += counters["hyptbtr"].segments_scanned
        work["raptor_routes"] += counters["raptor"].routes_scanned
        work["hypraptor_routes"] += counters["hypraptor"].routes_scanned
        work["hyptbtr_strictly_less"] += int(
            counters["hyptbtr"].segments_scanned < counters["tbtr"].segments_scanned
        )
        expected = results["ted"]
        wrong = [engine for engine in ENGINES[1:] if results[engine] != expected]
        if not wrong:
            report.passed += 1
            continue
        failure = {"index": index, "engines": wrong, **_query_json(tt, query, max_transfers)}
        report.failures.append(failure)
        logger.warning("verify_mismatch index=%d engines=%s query=%s", index, ",".join(wrong), query)
        if report.reproducer is None:
            report.reproducer = _reproducer(runner, query, results, seed)

    report.work = work
    report.elapsed = time.perf_counter() - started
    if report.reproducer is not None and reproducer_path is not None:
        target = pathlib.Path(reproducer_path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(report.reproducer, indent=2) + "\n", encoding="utf-8")
    logger.info(
        "verify_done queries=%d passed=%d failures=%d elapsed=%.3fs",
        report.queries, report.passed, len(report.failures), report.elapsed,
    )
    return report


# -- benchmark ----------------------------------------------------------------------

@dataclass
class BenchReport:
    """Per-engine timing/counter rows and per-partition preprocessing rows."""

    engines: pd.DataFrame
    partitions: pd.DataFrame
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "meta": self.meta,
            "engines": json.loads(self.engines.to_json(orient="records")),
            "partitions": json.loads(self.partitions.to_json(orient="records")),
        }

    def to_csv(self) -> str:
        text = self.engines.to_csv(index=False, lineterminator="\n")
        if not self.partitions.empty:
            text += "\n" + self.partitions.to_csv(index=False, lineterminator="\n")
        return text

    def save(self, directory: Any) -> List[pathlib.Path]:
        """engines.csv, partitions.csv and report.json under `directory`."""
        target = pathlib.Path(directory)
        target.mkdir(parents=True, exist_ok=True)
        written = [target / "engines.csv", target / "partitions.csv", target / "report.json"]
        self.engines.to_csv(written[0], index=False, lineterminator="\n")
        self.partitions.to_csv(written[1], index=False, lineterminator="\n")
        written[2].write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return written


def _timed(call: Callable[[], Any]) -> Tuple[float, Any]:
    started = time.perf_counter()
    value = call()
    return time.perf_counter() - started, value


def _measure(
    runner: EngineRunner, engine: str, queries: Sequence[Query], repetitions: int, workers: int,
) -> Dict[str, Any]:
    """Median-of-repetitions seconds per query plus per-query counters of the first repetition."""

    def one(query: Query) -> Tuple[float, SearchStats]:
        samples = []
        first = SearchStats()
        for repetition in range(max(1, repetitions)):
            stats = first if repetition == 0 else None
            seconds, _ = _timed(lambda: runner.run(engine, query, stats))
            samples.append(seconds)
        return statistics.median(samples), first

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            measured = list(pool.map(one, queries))
    else:
        measured = [one(query) for query in queries]
    seconds = np.array([value for value, _ in measured], dtype=np.float64)
    row: Dict[str, Any] = {
        "engine": engine,
        "partitions": "",
        "queries": len(queries),
        "repetitions": max(1, repetitions),
        "mean_ms": round(1000.0 * float(seconds.mean()), 4) if seconds.size else 0.0,
        "median_ms": round(1000.0 * float(np.median(seconds)), 4) if seconds.size else 0.0,
    }
    for name in COUNTERS:
        total = sum(getattr(stats, name) for _, stats in measured)
        row[name] = round(total / len(queries), 4) if queries else 0.0
    return row


def _partition_row(tt: Timetable, run: PartitionRun, scheme: str) -> Dict[str, Any]:
    cutstops = run.cutstops()
    row: Dict[str, Any] = {
        "partitions": run.spec,
        "kind": run.kind,
        "scheme": scheme,
        "cutstops": cutstops,
        "cutstops_percent": round(100.0 * cutstops / tt.n_stops, 4) if tt.n_stops else 0.0,
        "pqueries": run.workload.pairs,
    }
    for engine, fillin in sorted(run.fillins.items()):
        flavor = fillin.flavor
        row[f"fillin_{flavor}_size"] = fillin.stats.get("F-size", 0)
        row[f"fillin_{flavor}_percent"] = fillin.stats.get("F-size-percent", 0.0)
        row[f"fillin_{flavor}_seconds"] = fillin.stats.get("F-time", 0.0)
    return row


def _add_gains(engine_rows: List[Dict[str, Any]], partition_rows: List[Dict[str, Any]]) -> None:
    """Gain columns only where a base row exists to compare against."""
    base = {row["engine"]: row for row in engine_rows if not row.get("partitions")}
    for row in engine_rows:
        reference = base.get(PARTITIONED.get(row["engine"], ""))
        if reference is None:
            continue
        work = "segments_scanned" if row["engine"] == "hyptbtr" else "routes_scanned"
        row["gain_percent"] = gain_percent(reference["mean_ms"], row["mean_ms"])
        row["work_gain_percent"] = gain_percent(reference[work], row[work])

    standard = {row["partitions"]: row for row in partition_rows if row["kind"] == "standard"}
    for row in partition_rows:
        if row["kind"] != "nested":
            continue
        top_p, child_p = parse_partitions(row["partitions"])
        reference = standard.get(str(top_p * child_p))
        if reference is not None:
            row["pqueries_standard"] = reference["pqueries"]
            row["pqueries_gain_percent"] = gain_percent(reference["pqueries"], row["pqueries"])


def run_bench(
    tt: Timetable,
    engines: Sequence[str] = ("raptor", "tbtr", "hyptbtr", "hypraptor"),
    partitions: Sequence[str] = ("2",),
    num_queries: int = 100,
    repetitions: int = 1,
    seed: int = 7,
    transfers: Optional[TransferSet] = None,
    scheme: str = "sc1",
    epsilon: float = PARTITION_EPSILON,
    max_transfers: int = MAX_TRANSFERS,
    workers: int = 1,
) -> BenchReport:
    """Time every engine on one shared query sample; partitioned engines once per partition spec."""
    unknown = [engine for engine in engines if engine not in ENGINES]
    if unknown:
        raise ValueError(f"unknown engines {unknown}; expected a subset of {list(ENGINES)}")
    started = time.perf_counter()
    queries = sample_queries(tt, num_queries, seed)
    partitioned = [engine for engine in engines if engine in PARTITIONED]
    if "hyptbtr" in engines:
        transfers = _usable_transfers(transfers, tt, workers)
    elif "tbtr" in engines and transfers is None:
        transfers, _ = preprocess_transfers(tt, "uturn_free", workers)

    base = EngineRunner(tt, transfers, None, max_transfers)
    if "ted" in engines:
        base.oracle_graph()
    engine_rows: List[Dict[str, Any]] = []
    for engine in engines:
        if engine not in PARTITIONED:
            engine_rows.append(_measure(base, engine, queries, repetitions, workers))

    partition_rows: List[Dict[str, Any]] = []
    # Without a partitioned engine the fill-in still feeds the partition rows.
    fill_engines = partitioned or (("hyptbtr",) if transfers is not None else ("hypraptor",))
    runs = [
        prepare_partition(tt, transfers, spec, fill_engines, scheme, epsilon, seed, max_transfers, workers)
        for spec in partitions
    ] if tt.n_routes else []
    for run in runs:
        partition_rows.append(_partition_row(tt, run, scheme))
        runner = EngineRunner(tt, transfers, run, max_transfers)
        for engine in partitioned:
            row = _measure(runner, engine, queries, repetitions, workers)
            row["partitions"] = run.spec
            engine_rows.append(row)

    _add_gains(engine_rows, partition_rows)
    report = BenchReport(
        engines=pd.DataFrame(engine_rows),
        partitions=pd.DataFrame(partition_rows),
        meta={
            "seed": seed,
            "queries": len(queries),
            "repetitions": max(1, repetitions),
            "max_transfers": max_transfers,
            "scheme": scheme,
            "epsilon": epsilon,
            "transfer_stage": transfers.stage if transfers is not None else None,
            "timetable": tt.describe(),
            "elapsed": round(time.perf_counter() - started, 6),
        },
    )
    logger.info(
        "bench_done engines=%s partitions=%s queries=%d elapsed=%.3fs",
        ",".join(engines), ",".join(str(p) for p in partitions), len(queries), report.meta["elapsed"],
    )
    return report
