"""Synthetic and trace-driven injection streams."""

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError, UnknownIp
from ..model import MeshTopology, period_ps
from ..ni import HeaderFormat, Message, Mode, choose_mode, packetize


class PatternKind(str, Enum):
    UNIFORM_RANDOM = "uniform-random"
    HOTSPOT = "hotspot"
    PAIRWISE_TRACE = "pairwise-trace"


class InjectionEvent(NamedTuple):
    tick: int                               # ps
    src: str
    dst: Union[str, Tuple[str, ...]]        # tuple: C-layer multicast
    payload: bytes


@dataclass(frozen=True)
class TrafficPattern:
    """What to inject.

    ``injection_rate`` is in flits per IP clock cycle (header flits
    included). ``circuits`` lists C-layer streams as (source, destinations);
    each gets ``circuit_rate`` words per C-layer cycle on average.
    """
    kind: PatternKind = PatternKind.UNIFORM_RANDOM
    injection_rate: float = 0.0
    seed: int = 0
    message_bytes: Tuple[int, ...] = (7,)
    hotspot_ip: Optional[str] = None
    hotspot_fraction: float = 0.2
    trace: Tuple[Tuple[int, str, Union[str, Tuple[str, ...]], int, Optional[bytes]], ...] = ()
    circuits: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()
    circuit_rate: float = 0.0
    circuit_message_bytes: int = 4

    def __post_init__(self):
        object.__setattr__(self, "kind", PatternKind(self.kind))
        if not 0.0 <= self.injection_rate <= 1.0:
            raise ConfigError(f"injection_rate must be in [0, 1], got {self.injection_rate}")
        if not 0.0 <= self.circuit_rate <= 1.0:
            raise ConfigError(f"circuit_rate must be in [0, 1], got {self.circuit_rate}")
        if not self.message_bytes or min(self.message_bytes) < 1:
            raise ConfigError("message_bytes must list sizes >= 1 byte")
        if not 0.0 <= self.hotspot_fraction <= 1.0:
            raise ConfigError("hotspot_fraction must be in [0, 1]")


def read_trace(path: Union[str, Path]) -> Tuple:
    """Rows of ``cycle,src,dst,bytes[,payload_hex]``; ``dst`` may be ``a|b|c`` for multicast."""
    rows = []
    with open(path, newline="") as fh:
        for n, rec in enumerate(csv.DictReader(fh), 2):
            try:
                dst = rec["dst"].strip()
                dst = tuple(dst.split("|")) if "|" in dst else dst
                hexpay = (rec.get("payload_hex") or "").strip()
                payload = bytes.fromhex(hexpay) if hexpay else None
                size = len(payload) if payload is not None else int(rec["bytes"])
                rows.append((int(rec["cycle"]), rec["src"].strip(), dst, size, payload))
            except (KeyError, ValueError, TypeError) as e:
                raise ConfigError(f"{path}:{n}: bad trace row ({e})") from None
    return tuple(rows)


def write_trace(path: Union[str, Path], events: Iterable[InjectionEvent], topology: MeshTopology) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle", "src", "dst", "bytes", "payload_hex"])
        for e in events:
            cyc = e.tick // period_ps(topology.ip_freq[e.src])
            dst = "|".join(e.dst) if isinstance(e.dst, tuple) else e.dst
            w.writerow([cyc, e.src, dst, len(e.payload), e.payload.hex()])


def message_flits(topology: MeshTopology, src: str, size: int) -> int:
    cfg = topology.routers[topology.coord_of(src)]
    fmt = HeaderFormat.for_mesh(cfg.buffer_depth, topology.width, topology.height)
    msg = Message(src, src, bytes(size))
    return sum(p.flit_count for p in packetize(msg, cfg.channel_width_p, cfg.buffer_depth, fmt))


def p_destinations(topology: MeshTopology, src: str) -> List[str]:
    """Destinations reachable from ``src`` through the P-layer."""
    return [d for d in topology.ip_ids
            if d != src and choose_mode(topology, src, d) is Mode.PACKET]


def generate(pattern: TrafficPattern, topology: MeshTopology, until_ps: int) -> List[InjectionEvent]:
    """Injection events on IP clock edges up to and including ``until_ps``, sorted by (tick, src).

    Synthetic patterns draw one Bernoulli trial per IP clock edge. Each source
    has its own generator and all per-cycle draws are taken for every cycle,
    so for a fixed seed the messages injected at a lower rate are a subset of
    those at a higher one.
    """
    ips = topology.ip_ids
    streams = np.random.SeedSequence(pattern.seed).spawn(len(ips) + len(pattern.circuits) + 1)
    rng = np.random.default_rng(streams[-1])
    events: List[InjectionEvent] = []
    if pattern.kind is PatternKind.PAIRWISE_TRACE:
        for cyc, src, dst, size, payload in pattern.trace:
            if src not in topology.ip_freq:
                raise UnknownIp(f"trace names unknown IP {src!r}")
            tick = cyc * period_ps(topology.ip_freq[src])
            if tick > until_ps:
                continue
            if payload is None:
                payload = rng.integers(0, 256, size, dtype=np.uint8).tobytes()
            events.append(InjectionEvent(tick, src, dst, payload))
    elif pattern.injection_rate > 0:
        sizes = np.asarray(pattern.message_bytes)
        for i, src in enumerate(ips):
            rng = np.random.default_rng(streams[i])
            per = period_ps(topology.ip_freq[src])
            n = until_ps // per
            mean_flits = np.mean([message_flits(topology, src, int(s)) for s in sizes])
            p = pattern.injection_rate / mean_flits
            u = rng.random(n)
            pick = rng.random(n)
            hot = rng.random(n)
            size_idx = rng.integers(0, len(sizes), n)
            dests = p_destinations(topology, src)
            if not dests:
                continue
            for k in np.flatnonzero(u < p):
                cycle = int(k) + 1
                if (pattern.kind is PatternKind.HOTSPOT and pattern.hotspot_ip in dests
                        and hot[k] < pattern.hotspot_fraction):
                    dst = pattern.hotspot_ip
                else:
                    dst = dests[int(pick[k] * len(dests))]
                size = int(sizes[size_idx[k]])
                payload = rng.integers(0, 256, size, dtype=np.uint8).tobytes()
                events.append(InjectionEvent(cycle * per, src, dst, payload))
    if pattern.circuit_rate > 0:
        for j, (src, dsts) in enumerate(pattern.circuits):
            if choose_mode(topology, src, dsts) is not Mode.CIRCUIT:
                raise ConfigError(f"circuit {src} -> {dsts} is not between C-layer members of one router")
            rng = np.random.default_rng(streams[len(ips) + j])
            per = period_ps(topology.ip_freq[src])
            n = until_ps // per
            words = -(-pattern.circuit_message_bytes // 4)
            u = rng.random(n)
            for k in np.flatnonzero(u < pattern.circuit_rate / words):
                payload = rng.integers(0, 256, pattern.circuit_message_bytes, dtype=np.uint8).tobytes()
                dst = dsts[0] if len(dsts) == 1 else tuple(dsts)
                events.append(InjectionEvent((int(k) + 1) * per, src, dst, payload))
    events.sort(key=lambda e: (e.tick, e.src))
    return events


def offered_flits(events: Sequence[InjectionEvent], topology: MeshTopology) -> int:
    """Total P-layer flits the events will inject."""
    total = 0
    for e in events:
        if isinstance(e.dst, str) and choose_mode(topology, e.src, e.dst) is Mode.PACKET:
            total += message_flits(topology, e.src, len(e.payload))
    return total
