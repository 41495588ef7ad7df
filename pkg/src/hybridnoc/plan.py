"""
Experiment plans: what to simulate, over which sweep, and where results go.

::

    topology = "mesh4x4.toml"      # paths are relative to the plan file
    schedule = "schedules.txt"     # required when the topology has C-layer IPs
    duration_ns = 10000
    drain = true
    seeds = [1, 2, 3]
    out = "results"

    [traffic]
    kind = "uniform-random"        # or "hotspot", "pairwise-trace"
    injection_rate = 0.1
    message_bytes = [7]
    circuits = [["cam", ["dsp", "mem"]]]
    circuit_rate = 0.5

    [sweep]
    injection_rate = [0.05, 0.10, 0.15]

    [moclib]
    compare = true
    tolerance_pct = 5.0
    accounting = "both"
"""

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Type, Union

from . import moclib
from .clayer import parse_schedules
from .config import line_of, load_topology, read_toml
from .errors import (ConfigError, DeadlockSuspected, InvalidSweep, MissingFile, ParseError,
                     UnknownIp, UnservedCircuit)
from .model import Layer, MeshTopology
from .ni import Mode, choose_mode
from .sim.engine import run
from .sim.stats import SimStats, stats_csv, summarize, summary_text, trace_csv
from .sim.traffic import PatternKind, TrafficPattern, read_trace

PLAN_KEYS = {"topology", "schedule", "duration_ps", "duration_ns", "drain", "seeds", "out",
             "traffic", "sweep", "moclib"}
TRAFFIC_KEYS = {"kind", "injection_rate", "message_bytes", "hotspot_ip", "hotspot_fraction",
                "trace", "circuits", "circuit_rate", "circuit_message_bytes"}
SWEEP_KEYS = {"injection_rate"}
MOCLIB_KEYS = {"compare", "tolerance_pct", "accounting", "c_slot_share", "library"}
ACCOUNTING_CHOICES = ("aggregate", "tdm-shared", "both")


@dataclass(frozen=True)
class ExperimentPlan:
    path: Path
    topology_path: Path
    schedule_path: Optional[Path]
    topology: MeshTopology
    schedules: dict
    traffic: TrafficPattern
    duration_ps: int
    drain: bool = True
    seeds: Tuple[int, ...] = (0,)
    injection_rates: Tuple[float, ...] = ()
    out: Optional[Path] = None
    compare: bool = False
    tolerance_pct: float = moclib.DEFAULT_TOLERANCE_PCT
    accounting: str = "both"
    c_slot_share: float = moclib.DEFAULT_C_SLOT_SHARE
    library_path: Optional[Path] = None

    def points(self) -> List[Tuple[float, int]]:
        """Sweep points as (injection rate, seed), in output order."""
        rates = self.injection_rates or (self.traffic.injection_rate,)
        return [(r, s) for r in rates for s in self.seeds]


class _Problems:
    def __init__(self, path, text):
        self.path = path
        self.text = text
        self.items: List[Tuple[Type[ConfigError], str]] = []

    def add(self, cls, msg, key=None, table=None):
        ln = line_of(self.text, key, table) if key else 0
        loc = f"{self.path}:{ln}" if ln else str(self.path)
        self.items.append((cls, f"{loc}: {msg}"))

    def raise_if_any(self):
        if self.items:
            msgs = [m for _, m in self.items]
            raise self.items[0][0]("\n".join(msgs), msgs)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def check_circuits(topology: MeshTopology, schedules: dict,
                   circuits) -> List[str]:
    """Messages for every circuit stream that no schedule slot carries."""
    out = []
    for src, dsts in circuits:
        try:
            if choose_mode(topology, src, tuple(dsts)) is not Mode.CIRCUIT:
                out.append(f"circuit {src} -> {'|'.join(dsts)} is not between C-layer IPs of one router")
                continue
        except UnknownIp as e:
            out.append(str(e))
            continue
        c = topology.coord_of(src)
        sched = schedules.get(c)
        port = topology.ip_assignments[src].port
        outs = [topology.ip_assignments[d].port for d in dsts]
        if sched is None or sched.serves(port, outs) == 0:
            out.append(f"no schedule slot at router {c} carries {src} -> {'|'.join(dsts)}")
    return out


def parse_plan(path: Union[str, Path]) -> ExperimentPlan:
    """Load and fully validate a plan, reporting every problem found at once."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path}: plan file not found")
    doc, text = read_toml(path)
    pr = _Problems(path, text)
    base = path.parent
    for k in doc:
        if k not in PLAN_KEYS:
            pr.add(ParseError, f"unknown key {k!r} (allowed: {', '.join(sorted(PLAN_KEYS))})", k)
    for name, allowed in (("traffic", TRAFFIC_KEYS), ("sweep", SWEEP_KEYS), ("moclib", MOCLIB_KEYS)):
        t = doc.get(name, {})
        if not isinstance(t, dict):
            pr.add(ParseError, f"{name} must be a table", name)
            continue
        for k in t:
            if k not in allowed:
                pr.add(ParseError, f"unknown key {k!r} in [{name}] (allowed: {', '.join(sorted(allowed))})",
                       k, name)

    topology = None
    topo_path = None
    if "topology" not in doc:
        pr.add(ParseError, "missing required key 'topology'")
    else:
        topo_path = base / str(doc["topology"])
        if not topo_path.is_file():
            pr.add(MissingFile, f"topology file {topo_path} not found", "topology")
        else:
            try:
                topology = load_topology(topo_path)
            except ConfigError as e:
                for p in e.problems:
                    pr.items.append((type(e), str(p)))

    sched_path = None
    schedules: dict = {}
    if "schedule" in doc:
        sched_path = base / str(doc["schedule"])
        if not sched_path.is_file():
            pr.add(MissingFile, f"schedule file {sched_path} not found", "schedule")
        else:
            try:
                schedules = parse_schedules(sched_path.read_text(), str(sched_path))
            except ConfigError as e:
                for p in e.problems:
                    pr.items.append((type(e), str(p)))
    if topology is not None:
        c_routers = sorted({a.router for a in topology.ip_assignments.values() if a.layer is Layer.C})
        if c_routers and "schedule" not in doc:
            pr.add(MissingFile, "topology has C-layer IPs at router(s) "
                   f"{', '.join(map(str, c_routers))} but the plan names no schedule file")

    duration = None
    if "duration_ps" in doc and "duration_ns" in doc:
        pr.add(ParseError, "give only one of duration_ps and duration_ns", "duration_ns")
    elif "duration_ps" in doc or "duration_ns" in doc:
        k = "duration_ps" if "duration_ps" in doc else "duration_ns"
        v = doc[k]
        if not _is_num(v) or v <= 0:
            pr.add(ParseError, f"{k} must be a positive number", k)
        else:
            duration = int(round(v * (1 if k == "duration_ps" else 1000)))
    else:
        pr.add(ParseError, "missing required key 'duration_ns' (or 'duration_ps')")

    drain = doc.get("drain", True)
    if not isinstance(drain, bool):
        pr.add(ParseError, "drain must be true or false", "drain")

    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not all(_is_int(s) for s in seeds):
        pr.add(ParseError, "seeds must be a list of integers", "seeds")
        seeds = [0]
    elif not seeds:
        pr.add(InvalidSweep, "seeds must not be empty", "seeds")

    sweep = doc.get("sweep", {}) if isinstance(doc.get("sweep", {}), dict) else {}
    rates: Tuple[float, ...] = ()
    if "injection_rate" in sweep:
        r = sweep["injection_rate"]
        if not isinstance(r, list) or not all(_is_num(x) for x in r):
            pr.add(ParseError, "sweep injection_rate must be a list of numbers", "injection_rate", "sweep")
        elif not r:
            pr.add(InvalidSweep, "sweep injection_rate must not be empty", "injection_rate", "sweep")
        elif any(not 0 <= x <= 1 for x in r):
            pr.add(InvalidSweep, "sweep injection rates must lie in [0, 1]", "injection_rate", "sweep")
        else:
            rates = tuple(float(x) for x in r)

    traffic = TrafficPattern()
    t = doc.get("traffic", {}) if isinstance(doc.get("traffic", {}), dict) else {}
    kw = {k: v for k, v in t.items() if k in TRAFFIC_KEYS}
    if "message_bytes" in kw:
        mb = kw["message_bytes"]
        kw["message_bytes"] = tuple(mb) if isinstance(mb, list) else (mb,)
    if "circuits" in kw:
        try:
            kw["circuits"] = tuple((str(s), tuple(d) if isinstance(d, list) else (str(d),))
                                   for s, d in kw["circuits"])
        except (TypeError, ValueError):
            pr.add(ParseError, "circuits must be a list of [source, [destinations]]", "circuits", "traffic")
            kw.pop("circuits")
    if "trace" in kw:
        tp = base / str(kw["trace"])
        if not tp.is_file():
            pr.add(MissingFile, f"trace file {tp} not found", "trace", "traffic")
            kw.pop("trace")
        else:
            try:
                kw["trace"] = read_trace(tp)
            except ConfigError as e:
                pr.items.append((ParseError, str(e)))
                kw.pop("trace")
    try:
        traffic = TrafficPattern(**kw)
    except (ConfigError, ValueError, TypeError) as e:
        pr.add(ParseError, f"[traffic]: {e}", None)
    if topology is not None and traffic.circuits:
        for msg in check_circuits(topology, schedules, traffic.circuits):
            pr.add(UnservedCircuit if "schedule slot" in msg else ParseError, msg, "circuits", "traffic")
    if topology is not None and traffic.hotspot_ip is not None and traffic.hotspot_ip not in topology.ip_assignments:
        pr.add(ParseError, f"hotspot_ip {traffic.hotspot_ip!r} is not an IP of the topology",
               "hotspot_ip", "traffic")

    m = doc.get("moclib", {}) if isinstance(doc.get("moclib", {}), dict) else {}
    compare = m.get("compare", bool(m))
    tol = m.get("tolerance_pct", moclib.DEFAULT_TOLERANCE_PCT)
    if not _is_num(tol) or tol < 0:
        pr.add(ParseError, "tolerance_pct must be a number >= 0", "tolerance_pct", "moclib")
    acc = m.get("accounting", "both")
    if acc not in ACCOUNTING_CHOICES:
        pr.add(ParseError, f"accounting must be one of {', '.join(ACCOUNTING_CHOICES)}", "accounting", "moclib")
    share = m.get("c_slot_share", moclib.DEFAULT_C_SLOT_SHARE)
    if not _is_num(share) or not 0 < share <= 1:
        pr.add(ParseError, "c_slot_share must be in (0, 1]", "c_slot_share", "moclib")
    lib = None
    if "library" in m:
        lib = base / str(m["library"])
        if not lib.is_file():
            pr.add(MissingFile, f"library file {lib} not found", "library", "moclib")

    pr.raise_if_any()
    out = base / str(doc["out"]) if "out" in doc else None
    return ExperimentPlan(path, topo_path, sched_path, topology, schedules, traffic, duration, drain,
                          tuple(seeds), rates, out, bool(compare), float(tol), acc, float(share), lib)


@dataclass
class PointResult:
    rate: float
    seed: int
    stats: SimStats
    drained: bool
    error: Optional[str] = None

    @property
    def label(self) -> str:
        return f"rate{self.rate:.4f}_seed{self.seed}"


def run_point(plan: ExperimentPlan, rate: float, seed: int, trace: bool = False) -> PointResult:
    pattern = replace(plan.traffic, injection_rate=rate, seed=seed)
    try:
        st = run(plan.topology, plan.schedules, pattern, plan.duration_ps, plan.drain, trace=trace)
    except DeadlockSuspected as e:
        return PointResult(rate, seed, e.stats, False, str(e))
    return PointResult(rate, seed, st, st.drained or not plan.drain)


def _run_point_args(args):
    return run_point(*args)


@dataclass
class Artifacts:
    files: Dict[str, str] = field(default_factory=dict)   # name -> content
    results: List[PointResult] = field(default_factory=list)
    gain_report: Optional[moclib.GainReport] = None

    @property
    def all_drained(self) -> bool:
        return all(r.drained for r in self.results)

    def write(self, out_dir: Union[str, Path]) -> List[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name in sorted(self.files):
            p = out / name
            p.write_text(self.files[name])
            paths.append(p)
        return paths


def _sweep_csv(results: List[PointResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["injection_rate", "seed", "drained", "packets_delivered", "mean_latency_ps",
                "p99_latency_ps", "avg_hops", "mean_throughput_mbps"])
    for r in results:
        s = summarize(r.stats)
        thr = sum(s.throughput_mbps.values()) / len(s.throughput_mbps) if s.throughput_mbps else 0.0
        fmt = lambda v: "" if v is None else f"{v:.3f}"
        w.writerow([f"{r.rate:.4f}", r.seed, r.drained, r.stats.packets_delivered,
                    fmt(s.mean_latency_ps), fmt(s.p99_latency_ps), fmt(s.avg_hops), f"{thr:.3f}"])
    return buf.getvalue()


def run_plan(plan: ExperimentPlan, jobs: int = 1, trace: bool = False,
             accounting: Optional[str] = None) -> Artifacts:
    """Run every sweep point and collect the artifacts in memory."""
    points = plan.points()
    args = [(plan, r, s, trace) for r, s in points]
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_point_args, args))
    else:
        results = [run_point(*a) for a in args]
    art = Artifacts(results=results)
    texts = []
    for r in results:
        art.files[f"stats_{r.label}.csv"] = stats_csv(r.stats)
        if trace:
            art.files[f"trace_{r.label}.csv"] = trace_csv(r.stats)
        txt = summary_text(r.stats, r.label)
        if r.error:
            txt += f"  DEADLOCK SUSPECTED: {r.error}\n"
        texts.append(txt)
    art.files["sweep.csv"] = _sweep_csv(results)
    acc = accounting or plan.accounting
    if plan.compare:
        lib = moclib.load_library(plan.library_path) if plan.library_path else None
        modes = tuple(moclib.Accounting) if acc == "both" else (moclib.Accounting(acc),)
        rep = moclib.area_matched_comparison(lib, plan.tolerance_pct, modes, plan.c_slot_share)
        art.gain_report = rep
        art.files["gain_report.csv"] = rep.to_csv()
        art.files["schedule_memory.csv"] = moclib.schedule_memory_csv()
        texts.append(rep.summary() + "\n")
    art.files["summary.txt"] = "\n".join(texts)
    return art
