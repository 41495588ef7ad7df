"""Simulation statistics and their reduction to reports and CSV."""

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


@dataclass
class SimStats:
    duration_ps: int = 0
    end_ps: int = 0
    drained: bool = False
    # (src, dst, mode) -> latency samples in ps; one per packet (P) or per message (C)
    latency: Dict[Tuple[str, str, str], List[int]] = field(default_factory=dict)
    # (src, dst) -> P-layer packet ids in delivery order
    delivery_order: Dict[Tuple[str, str], List[int]] = field(default_factory=dict)
    injected_bits: Counter = field(default_factory=Counter)    # per source IP, raw channel bits
    delivered_bits: Counter = field(default_factory=Counter)   # per destination IP, raw channel bits
    delivered_payload_bits: Counter = field(default_factory=Counter)
    injection_busy_cycles: Counter = field(default_factory=Counter)
    occupancy_hist: Counter = field(default_factory=Counter)
    hop_hist: Counter = field(default_factory=Counter)
    grants: Counter = field(default_factory=Counter)            # "(x,y):port" -> grants
    cycles: Dict[float, int] = field(default_factory=dict)       # MHz -> cycles executed
    injected_flits: int = 0
    delivered_flits: int = 0
    packets_injected: int = 0
    packets_delivered: int = 0
    c_words_sent: int = 0
    c_words_delivered: int = 0
    messages_delivered: int = 0
    reassembly_errors: int = 0
    audits: int = 0
    ip_router: Dict[str, str] = field(default_factory=dict)
    ip_layer: Dict[str, str] = field(default_factory=dict)
    trace: List[tuple] = field(default_factory=list)
    c_deliveries: List[Tuple[int, str, str, int]] = field(default_factory=list)

    @property
    def in_flight(self) -> int:
        return self.injected_flits - self.delivered_flits

    @property
    def elapsed_s(self) -> float:
        return max(self.end_ps, self.duration_ps) * 1e-12


@dataclass(frozen=True)
class Summary:
    mean_latency_ps: Optional[float]
    median_latency_ps: Optional[float]
    p99_latency_ps: Optional[float]
    throughput_mbps: Dict[str, float]          # delivered, per destination IP
    source_throughput_mbps: Dict[str, float]   # injected, per source IP
    avg_hops: Optional[float]
    packets_delivered: int
    drained: bool


def summarize(stats: SimStats) -> Summary:
    samples = [v for vals in stats.latency.values() for v in vals]
    secs = stats.elapsed_s
    ips = sorted(set(stats.ip_router) | set(stats.delivered_bits) | set(stats.injected_bits))

    def mbps(bits):
        return bits / secs / 8e6 if secs > 0 else 0.0

    thr = {ip: mbps(stats.delivered_bits.get(ip, 0)) for ip in ips}
    src = {ip: mbps(stats.injected_bits.get(ip, 0)) for ip in ips}
    hops = sum(stats.hop_hist.values())
    avg_hops = sum(h * n for h, n in stats.hop_hist.items()) / hops if hops else None
    if samples:
        arr = np.asarray(samples, dtype=float)
        mean, med, p99 = float(arr.mean()), float(np.median(arr)), float(np.percentile(arr, 99))
    else:
        mean = med = p99 = None
    return Summary(mean, med, p99, thr, src, avg_hops, stats.packets_delivered, stats.drained)


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.3f}"


def stats_csv(stats: SimStats) -> str:
    """One row per flow, then one row per port."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["record", "src", "dst", "mode", "router", "samples",
                "mean_latency_ps", "p99_latency_ps", "injected_bits", "delivered_bits", "throughput_mbps"])
    for (s, d, mode), vals in sorted(stats.latency.items()):
        arr = np.asarray(vals, dtype=float)
        w.writerow(["flow", s, d, mode, stats.ip_router.get(s, ""), len(vals),
                    _fmt(float(arr.mean())), _fmt(float(np.percentile(arr, 99))), "", "", ""])
    summ = summarize(stats)
    for ip in sorted(summ.throughput_mbps):
        w.writerow(["port", ip, "", stats.ip_layer.get(ip, ""), stats.ip_router.get(ip, ""), "", "", "",
                    stats.injected_bits.get(ip, 0), stats.delivered_bits.get(ip, 0),
                    _fmt(summ.throughput_mbps[ip])])
    return buf.getvalue()


def trace_csv(stats: SimStats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tick", "router", "event", "port", "vc", "packet_id"])
    for tick, coord, event, port, vc, pid in sorted(stats.trace, key=lambda r: r[0]):
        w.writerow([tick, f"({coord.x},{coord.y})", event, port, vc, pid])
    return buf.getvalue()


def summary_text(stats: SimStats, label: str = "") -> str:
    s = summarize(stats)
    ns = lambda v: "n/a" if v is None else f"{v / 1000:.2f} ns"
    lines = [f"simulation summary{(' ' + label) if label else ''}",
             f"  simulated time      {stats.elapsed_s * 1e6:.3f} us (injection window {stats.duration_ps / 1e6:.3f} us)",
             f"  drained             {stats.drained}",
             f"  packets delivered   {stats.packets_delivered} / {stats.packets_injected}",
             f"  flits delivered     {stats.delivered_flits} / {stats.injected_flits}",
             f"  C-layer words sent  {stats.c_words_sent} (delivered {stats.c_words_delivered}, "
             "multicast counted per output)",
             f"  latency mean        {ns(s.mean_latency_ps)}",
             f"  latency median      {ns(s.median_latency_ps)}",
             f"  latency p99         {ns(s.p99_latency_ps)}",
             f"  avg hop count       {'n/a' if s.avg_hops is None else f'{s.avg_hops:.3f}'}",
             f"  reassembly errors   {stats.reassembly_errors}"]
    if s.throughput_mbps:
        lines.append("  per-port delivered throughput (MB/s):")
        for ip, v in sorted(s.throughput_mbps.items()):
            lines.append(f"    {ip:<12} {v:10.3f}")
    return "\n".join(lines) + "\n"
