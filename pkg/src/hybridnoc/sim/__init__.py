from .engine import ClockDomain, Simulation, run
from .stats import SimStats, Summary, stats_csv, summarize, summary_text, trace_csv
from .traffic import InjectionEvent, PatternKind, TrafficPattern, generate, read_trace, write_trace

__all__ = [
    "ClockDomain", "Simulation", "run",
    "SimStats", "Summary", "stats_csv", "summarize", "summary_text", "trace_csv",
    "InjectionEvent", "PatternKind", "TrafficPattern", "generate", "read_trace", "write_trace",
]
