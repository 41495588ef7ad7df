"""
Time-multiplexed circuit-switched layer (C-layer).

A router's C-layer ports are identified by their local port index. The
schedule memory holds one cross-point configuration per TDM slot: each
C-layer output selects one C-layer input or stays idle. Several outputs may
select the same input in one slot, which is a multicast.

Schedule file format, one block per router::

    router 0 0
    slot 0: out0 <- in3, out3 <- in0
    slot 1: out1 <- in3
    slot 1: out2 <- idle

Outputs not mentioned in a slot are idle. ``#`` starts a comment.
"""

import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import DegenerateCLayer, EmptySchedule, ScheduleParseError, UnknownPort
from .model import Coord

IDLE = None

SlotConfig = Mapping[int, Optional[int]]   # output port -> source port, or IDLE


@dataclass(frozen=True)
class ScheduleMemory:
    slots: Tuple[Tuple[Tuple[int, Optional[int]], ...], ...]

    @classmethod
    def from_slots(cls, slots: Iterable[SlotConfig]) -> "ScheduleMemory":
        return cls(tuple(tuple(sorted(s.items())) for s in slots))

    @property
    def slot_count(self) -> int:
        return len(self.slots)

    def config(self, i: int) -> Dict[int, Optional[int]]:
        return dict(self.slots[i])

    def ports(self) -> set:
        out = set()
        for s in self.slots:
            for o, src in s:
                out.add(o)
                if src is not None:
                    out.add(src)
        return out

    def fanout(self, i: int) -> Dict[int, Tuple[int, ...]]:
        """source -> outputs it drives in slot ``i``."""
        fo: Dict[int, List[int]] = {}
        for o, src in self.slots[i]:
            if src is not None:
                fo.setdefault(src, []).append(o)
        return {s: tuple(sorted(v)) for s, v in fo.items()}

    def source_share(self, port: int) -> float:
        """Fraction of slots in which ``port`` drives at least one output."""
        return sum(1 for i in range(self.slot_count) if port in self.fanout(i)) / self.slot_count

    def serves(self, src: int, dsts: Sequence[int]) -> int:
        """Number of slots whose fan-out of ``src`` is exactly ``dsts``."""
        want = tuple(sorted(dsts))
        return sum(1 for i in range(self.slot_count) if self.fanout(i).get(src) == want)


@dataclass
class CLayerState:
    current_slot: int = 0
    c_clock_mhz: float = 0.0
    width_bits: int = 32


class CLayer:
    """The 32-bit C-layer cross-point of one router."""

    def __init__(self, ports: Iterable[int], width_bits: int = 32, c_clock_mhz: float = 0.0):
        self.ports = tuple(sorted(ports))
        self.state = CLayerState(0, c_clock_mhz, width_bits)
        self.schedule: Optional[ScheduleMemory] = None

    def load_schedule(self, schedule: ScheduleMemory) -> ScheduleMemory:
        self.schedule = load_schedule(self, schedule)
        self.state.current_slot = 0
        return self.schedule

    def advance_slot(self) -> int:
        return advance_slot(self.state, self.schedule.slot_count)

    def current_config(self) -> Dict[int, Optional[int]]:
        return self.schedule.config(self.state.current_slot)

    def transfer(self, input_words: Mapping[int, Optional[int]]) -> Dict[int, int]:
        return transfer_slot(self.current_config(), input_words)


def load_schedule(router: CLayer, schedule: ScheduleMemory) -> ScheduleMemory:
    """Check ``schedule`` against the router's C-layer ports and fill idle outputs."""
    if schedule.slot_count == 0:
        raise EmptySchedule("schedule has no slots")
    ports = set(router.ports)
    bad = sorted(schedule.ports() - ports)
    if bad:
        raise UnknownPort(f"schedule references port(s) {bad}; C-layer ports are {sorted(ports)}")
    full = []
    for i in range(schedule.slot_count):
        cfg = {p: IDLE for p in router.ports}
        cfg.update(schedule.config(i))
        full.append(cfg)
    return ScheduleMemory.from_slots(full)


def advance_slot(state: CLayerState, slot_count: int) -> int:
    state.current_slot = (state.current_slot + 1) % slot_count
    return state.current_slot


def transfer_slot(config: SlotConfig, input_words: Mapping[int, Optional[int]]) -> Dict[int, int]:
    """Drive every output from its selected source in the same cycle; idle outputs emit nothing."""
    out = {}
    for o, src in config.items():
        if src is None:
            continue
        w = input_words.get(src)
        if w is not None:
            out[o] = w
    return out


def schedule_bits(c_ports: int, slot_count: int) -> int:
    """Schedule memory size: each slot stores a ceil(log2 C)-bit select per output."""
    if c_ports < 2:
        raise DegenerateCLayer(f"a C-layer needs at least 2 ports, got {c_ports}")
    if slot_count < 1:
        raise EmptySchedule("slot_count must be >= 1")
    return slot_count * c_ports * math.ceil(math.log2(c_ports))


def encoded_schedule_bits(c_ports: int, slot_count: int) -> int:
    """Like ``schedule_bits`` but each select can also encode idle.

    A spare code is used when C is not a power of two; otherwise every
    select grows by one bit.
    """
    schedule_bits(c_ports, slot_count)
    return slot_count * c_ports * math.ceil(math.log2(c_ports + 1))


_ROUTER_RE = re.compile(r"^router\s*\(?\s*(\d+)\s*[, ]\s*(\d+)\s*\)?\s*:?$")
_SLOT_RE = re.compile(r"^slot\s+(\d+)\s*:\s*(.+)$")
_ASSIGN_RE = re.compile(r"^out(\d+)\s*<-\s*(?:in(\d+)|(idle))$")


def parse_schedules(text: str, origin: str = "<schedule>") -> Dict[Coord, ScheduleMemory]:
    """Parse a schedule file; raise ScheduleParseError listing every bad line."""
    errors: List[str] = []
    blocks: Dict[Coord, Dict[int, Dict[int, Optional[int]]]] = {}
    lines_of: Dict[Coord, int] = {}
    cur: Optional[Coord] = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _ROUTER_RE.match(line)
        if m:
            cur = Coord(int(m.group(1)), int(m.group(2)))
            if cur in blocks:
                errors.append(f"{origin}:{n}: duplicate block for router {cur}")
            blocks.setdefault(cur, {})
            lines_of[cur] = n
            continue
        m = _SLOT_RE.match(line)
        if not m:
            errors.append(f"{origin}:{n}: cannot parse {raw.strip()!r}")
            continue
        if cur is None:
            errors.append(f"{origin}:{n}: slot line before any 'router' header")
            continue
        slot = blocks[cur].setdefault(int(m.group(1)), {})
        for part in m.group(2).split(","):
            a = _ASSIGN_RE.match(part.strip())
            if not a:
                errors.append(f"{origin}:{n}: bad assignment {part.strip()!r} "
                              "(expected 'out<j> <- in<k>' or 'out<j> <- idle')")
                continue
            o = int(a.group(1))
            if o in slot:
                errors.append(f"{origin}:{n}: out{o} assigned twice in slot {m.group(1)}")
                continue
            slot[o] = None if a.group(3) else int(a.group(2))
    out = {}
    for c, slots in blocks.items():
        if not slots:
            errors.append(f"{origin}:{lines_of[c]}: router {c} block has no slots")
            continue
        idx = sorted(slots)
        if idx != list(range(len(idx))):
            errors.append(f"{origin}:{lines_of[c]}: router {c} slots must be numbered 0..S-1, got {idx}")
            continue
        out[c] = ScheduleMemory.from_slots(slots[i] for i in idx)
    if errors:
        raise ScheduleParseError("\n".join(errors), errors)
    return out


def format_schedules(schedules: Mapping[Coord, ScheduleMemory]) -> str:
    lines = []
    for c in sorted(schedules):
        lines.append(f"router {c.x} {c.y}")
        s = schedules[c]
        for i in range(s.slot_count):
            parts = [f"out{o} <- " + ("idle" if src is None else f"in{src}") for o, src in s.slots[i]]
            lines.append(f"slot {i}: " + ", ".join(parts))
        lines.append("")
    return "\n".join(lines)
