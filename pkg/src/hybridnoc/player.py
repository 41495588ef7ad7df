"""
Packet-switched layer (P-layer) of the hybrid router.

Timing model, in router cycles, for a header that becomes visible at an
input in cycle ``t``::

    t + rc + req            earliest arbitration decision ``d``
    d + arb + grant + xset  header crosses the cross-point
    ... + traversal         header visible at the downstream input

With the default one-cycle stages the header shows up downstream six
cycles after it arrived. Each connection then streams one flit per cycle.
An output may be re-granted while its current packet is still streaming as
long as the new packet's first crossing lands after the old tail. An input
offers its next packet only once the previous packet's tail has left it.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .errors import ConfigError, ProtocolViolation, ReducedPairRequest
from .model import Coord, Flit, FlitKind, Port, port_name, xy_route
from .ni import HeaderFormat, decode_header


@dataclass(frozen=True)
class SetupPipeline:
    route_compute: int = 1
    request: int = 1
    arbitrate: int = 1
    grant: int = 1
    crossbar_set: int = 1
    traversal: int = 1

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if v < 1:
                raise ConfigError(f"pipeline stage {k} must be >= 1 cycle, got {v}")

    @classmethod
    def from_stages(cls, stages: Sequence[int]) -> "SetupPipeline":
        return cls(*stages)

    @property
    def total(self) -> int:
        return (self.route_compute + self.request + self.arbitrate + self.grant
                + self.crossbar_set + self.traversal)

    @property
    def before_decision(self) -> int:
        return self.route_compute + self.request

    @property
    def after_decision(self) -> int:
        """Cycles from an arbitration decision to the first cross-point crossing."""
        return self.arbitrate + self.grant + self.crossbar_set


def setup_latency(pipeline: SetupPipeline) -> int:
    """Uncontended input-to-downstream-input latency of a header."""
    return pipeline.total


class VcBuffer:
    """One virtual channel's flit queue. Entries are (flit, visible_at tick)."""

    __slots__ = ("port", "vc", "capacity", "q", "reserved", "last_in", "owner")

    def __init__(self, port: int, vc: int, capacity: int, owner=None):
        self.port = port
        self.vc = vc
        self.capacity = capacity
        self.q: Deque[Tuple[Flit, int]] = deque()
        self.reserved = 0       # slots promised to packets granted but not fully written
        self.last_in: Optional[int] = None
        self.owner = owner

    @property
    def occupancy(self) -> int:
        return len(self.q)

    @property
    def free_slots(self) -> int:
        return self.capacity - len(self.q) - self.reserved

    def push(self, flit: Flit, visible_at: int, reserved: bool = True) -> None:
        if flit.kind is not FlitKind.HEADER and self.last_in != flit.packet_id:
            raise ProtocolViolation(
                f"{flit.kind.value} flit of packet {flit.packet_id} on port {port_name(self.port)} "
                f"vc {self.vc} without a preceding header")
        if len(self.q) >= self.capacity:
            raise ProtocolViolation(f"overflow on port {port_name(self.port)} vc {self.vc}")
        self.q.append((flit, visible_at))
        self.last_in = flit.packet_id
        if reserved:
            self.reserved -= 1
        if self.owner is not None:
            self.owner.load += 1


class Accept(str, Enum):
    ACCEPTED = "accepted"
    BACKPRESSURED = "backpressured"


def accept_flit(router: "PRouter", input_port: int, vc: int, flit: Flit, visible_at: int = 0) -> Accept:
    """Link-level handoff of one flit into an input VC."""
    buf = router.inputs[input_port][vc]
    if len(buf.q) + buf.reserved >= buf.capacity:
        return Accept.BACKPRESSURED
    buf.push(flit, visible_at, reserved=False)
    return Accept.ACCEPTED


def vct_admit(packet_flit_count: int, downstream_free_slots: int) -> bool:
    """Virtual cut-through: forward only if the whole packet fits downstream."""
    return downstream_free_slots >= packet_flit_count


class FsmState(str, Enum):
    IDLE = "idle"
    REQUESTED = "requested"
    GRANTED = "granted"
    TRANSFERRING = "transferring"


@dataclass
class ArbiterState:
    """Central arbitrator: one FSM per (input, output) pair, one round-robin pointer per output.

    Pairs in ``reduced_pairs`` have no FSM at all.
    """
    n_inputs: int
    reduced_pairs: FrozenSet[Tuple[int, int]] = frozenset()
    pointers: Dict[int, int] = field(default_factory=dict)
    fsm: Dict[Tuple[int, int], FsmState] = field(default_factory=dict)

    def state(self, pair: Tuple[int, int]) -> Optional[FsmState]:
        if pair in self.reduced_pairs:
            return None
        return self.fsm.get(pair, FsmState.IDLE)

    def set(self, pair: Tuple[int, int], st: FsmState) -> None:
        if st is FsmState.IDLE:
            self.fsm.pop(pair, None)
        else:
            self.fsm[pair] = st

    def holders(self, output: int) -> List[int]:
        return [i for (i, o), s in self.fsm.items()
                if o == output and s in (FsmState.GRANTED, FsmState.TRANSFERRING)]


def arbitrate(requests: Iterable[Tuple[int, int]], state: ArbiterState) -> List[Tuple[int, int]]:
    """Grant requests for this cycle; ``state`` is updated in place.

    Requests for distinct outputs are all granted together. Requests
    competing for one output are resolved round-robin from that output's
    pointer, which then moves just past the winner. An input wins at most
    one output per cycle.
    """
    by_out: Dict[int, List[int]] = {}
    for i, o in requests:
        if (i, o) in state.reduced_pairs:
            raise ReducedPairRequest(
                f"{port_name(i)} -> {port_name(o)}: both ports are C-layer members; "
                "they cannot use the P-layer between themselves")
        by_out.setdefault(o, []).append(i)
    grants = []
    used: Set[int] = set()
    n = state.n_inputs
    for o in sorted(by_out):
        ptr = state.pointers.get(o, 0)
        cands = sorted(set(by_out[o]) - used, key=lambda i: (i - ptr) % n)
        for i in by_out[o]:
            state.set((i, o), FsmState.REQUESTED)
        if not cands:
            continue
        win = cands[0]
        used.add(win)
        state.pointers[o] = (win + 1) % n
        state.set((win, o), FsmState.GRANTED)
        grants.append((win, o))
    return grants


class Connection:
    __slots__ = ("in_port", "vc", "out_port", "remaining", "start", "dest_vc", "packet_id", "started")

    def __init__(self, in_port, vc, out_port, flits, start, dest_vc, packet_id):
        self.in_port = in_port
        self.vc = vc
        self.out_port = out_port
        self.remaining = flits
        self.start = start
        self.dest_vc = dest_vc
        self.packet_id = packet_id
        self.started = False


def crossbar_transfer(grants: Sequence[Connection], buffers: Dict[int, List[VcBuffer]],
                      now: int = 0) -> List[Optional[Flit]]:
    """Move at most one visible flit per granted connection.

    Returns, per connection, the flit that crossed or None (bubble). The
    caller guarantees each output appears in at most one connection.
    """
    moved = []
    for c in grants:
        buf = buffers[c.in_port][c.vc]
        q = buf.q
        if q and q[0][1] <= now and q[0][0].packet_id == c.packet_id:
            flit = q.popleft()[0]
            if buf.owner is not None:
                buf.owner.load -= 1
            c.remaining -= 1
            moved.append(flit)
        else:
            moved.append(None)
    return moved


class Monitor:
    """Hooks the router reports through; the simulation engine overrides them."""
    trace_on = False
    trace_rows: list = []

    def on_header_cross(self, router, conn, flit, now, arrive):
        pass

    def on_grant(self, router, in_port, out_port):
        pass

    def sample_occupancy(self, load):
        pass

    def local_port_of(self, dest, packet_id):
        return 0


class OutputState:
    __slots__ = ("port", "active", "pending", "down", "down_period", "sink")

    def __init__(self, port):
        self.port = port
        self.active: Optional[Connection] = None
        self.pending: Optional[Connection] = None
        self.down: List[VcBuffer] = []
        self.down_period = 0
        self.sink = None        # downstream router or NI


class PRouter:
    """Cycle model of one router's P-layer."""

    def __init__(self, coord: Coord, cfg, pipeline: SetupPipeline, fmt: HeaderFormat,
                 period: int, dirs: Iterable[Port], c_local_ports: Iterable[int] = (),
                 header_flits: int = 1, monitor=None):
        self.coord = coord
        self.cfg = cfg
        self.pipeline = pipeline
        self.fmt = fmt
        self.period = period
        self.header_flits = header_flits
        self.monitor = monitor or Monitor()
        self.dirs = tuple(sorted(int(d) for d in dirs))
        self.locals = tuple(Port.LOCAL + i for i in range(cfg.local_ips))
        self.in_ports = self.dirs + self.locals
        self.load = 0
        self.inputs: Dict[int, List[VcBuffer]] = {
            p: [VcBuffer(p, v, cfg.buffer_depth, self) for v in range(cfg.vcs_per_port)]
            for p in self.in_ports}
        self.outputs: Dict[int, OutputState] = {p: OutputState(p) for p in self.in_ports}
        self.out_list = [self.outputs[p] for p in self.in_ports]
        c_ports = [Port.LOCAL + i for i in c_local_ports]
        reduced = frozenset((a, b) for a in c_ports for b in c_ports if a != b)
        self.arb = ArbiterState(Port.LOCAL + cfg.local_ips, reduced)
        self.input_busy = {p: False for p in self.in_ports}
        self.n_conns = 0
        self._pre = pipeline.before_decision
        self._post = pipeline.after_decision
        self._trav_ps = pipeline.traversal * period
        self._head_cache: Dict[int, Tuple[int, int]] = {}

    def connect(self, out_port: int, down_vcs: List[VcBuffer], down_period: int, sink) -> None:
        o = self.outputs[out_port]
        o.down = down_vcs
        o.down_period = down_period
        o.sink = sink

    @property
    def busy(self) -> bool:
        return self.load > 0 or self.n_conns > 0

    def _route(self, flit: Flit, buf: VcBuffer) -> Tuple[int, int, Coord]:
        """(flit count, output port, destination) for the packet whose header heads ``buf``."""
        hit = self._head_cache.get(flit.packet_id)
        if hit is not None:
            return hit
        bits = 0
        h = self.header_flits
        w = self.cfg.channel_width_p
        for k in range(h):
            bits = (bits << w) | buf.q[k][0].data
        size, dest = decode_header(bits, self.fmt)
        out = xy_route(self.coord, dest)
        if out is Port.LOCAL:
            out = Port.LOCAL + self.monitor.local_port_of(dest, flit.packet_id)
        res = (size, int(out), dest)
        self._head_cache[flit.packet_id] = res
        return res

    def _free_for_decision(self, o: OutputState, cycle: int) -> bool:
        if o.pending is not None:
            return False
        a = o.active
        if a is None:
            return True
        end = max(a.start, cycle + 1) + a.remaining - 1
        return end < cycle + self._post

    def tick(self, cycle: int, now: int) -> None:
        if self.load == 0 and self.n_conns == 0:
            return
        mon = self.monitor
        trace = mon.trace_rows if mon is not None and mon.trace_on else None
        # cross-point: one flit per connection per cycle
        if self.n_conns:
            ready = []
            for o in self.out_list:
                c = o.active
                if c is None:
                    c = o.pending
                    if c is None or c.start > cycle:
                        continue
                    o.active, o.pending = c, None
                    self.arb.set((c.in_port, c.out_port), FsmState.GRANTED)
                elif c.start > cycle:
                    continue
                ready.append(c)
            arrive = now + self._trav_ps
            for c, flit in zip(ready, crossbar_transfer(ready, self.inputs, now)):
                if flit is None:
                    continue
                c.dest_vc.push(flit, arrive)
                if not c.started:
                    c.started = True
                    self.arb.set((c.in_port, c.out_port), FsmState.TRANSFERRING)
                    mon.on_header_cross(self, c, flit, now, arrive)
                    if trace is not None:
                        trace.append((now, self.coord, "depart", port_name(c.out_port), c.vc, flit.packet_id))
                if c.remaining == 0:
                    self.outputs[c.out_port].active = None
                    self.n_conns -= 1
                    self.input_busy[c.in_port] = False
                    self.arb.set((c.in_port, c.out_port), FsmState.IDLE)
                    self._head_cache.pop(flit.packet_id, None)
                    if trace is not None:
                        trace.append((now, self.coord, "tail", port_name(c.out_port), c.vc, flit.packet_id))
        if self.load == 0:
            return
        mon.sample_occupancy(self.load)
        # requests: each idle input offers its oldest eligible packet
        requests = []
        chosen = {}
        h = self.header_flits
        limit = cycle - self._pre
        per = self.period
        for p in self.in_ports:
            if self.input_busy[p]:
                continue
            vcs = self.inputs[p]
            if len(vcs) == 1:
                heads = [vcs[0]] if vcs[0].q else []
            else:
                heads = sorted((b for b in vcs if b.q), key=lambda b: (b.q[0][1], b.vc))
            blocked_dests = None
            for buf in heads:
                if len(buf.q) < h:
                    continue
                flit = buf.q[0][0]
                if flit.kind is not FlitKind.HEADER:
                    raise ProtocolViolation(f"router {self.coord}: VC head is not a header")
                vis = buf.q[h - 1][1]
                if -(-vis // per) > limit:
                    continue
                size, out, key = self._route(flit, buf)
                if (p, out) in self.arb.reduced_pairs:
                    raise ReducedPairRequest(
                        f"router {self.coord}: packet {flit.packet_id} from {port_name(p)} to {port_name(out)}; "
                        "C-layer members cannot use the P-layer between themselves")
                if blocked_dests and key in blocked_dests:
                    continue
                o = self.outputs[out]
                dvc = None
                if self._free_for_decision(o, cycle):
                    for d in o.down:
                        if vct_admit(size, d.capacity - len(d.q) - d.reserved):
                            dvc = d
                            break
                if dvc is None:
                    blocked_dests = (blocked_dests or set()) | {key}
                    continue
                requests.append((p, out))
                chosen[p] = (buf, size, dvc, flit.packet_id)
                break
        if not requests:
            return
        for i, out in arbitrate(requests, self.arb):
            buf, size, dvc, pid = chosen[i]
            c = Connection(i, buf.vc, out, size, cycle + self._post, dvc, pid)
            dvc.reserved += size
            o = self.outputs[out]
            if o.active is None:
                o.active = c
            else:
                # decision latched behind the streaming packet; the cross-point is not yet ours
                o.pending = c
                self.arb.set((i, out), FsmState.REQUESTED)
            self.input_busy[i] = True
            self.n_conns += 1
            mon.on_grant(self, i, out)
            if trace is not None:
                trace.append((now, self.coord, "grant", port_name(out), buf.vc, pid))

    def flits_held(self) -> int:
        return sum(len(b.q) for vcs in self.inputs.values() for b in vcs)
