"""
Deterministic multi-clock cycle kernel.

Every clock domain ticks at integer multiples of its period (picoseconds),
starting one period after time zero. Edges at the same instant run in
domain id order (fastest clock first), and inside a domain in component id
order: network interfaces by IP name, then routers by coordinate, then
C-layers by coordinate. A flit written at one edge becomes visible one
period of its writer later, so results never depend on that order for the
P-layer.
"""

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from ..clayer import CLayer, ScheduleMemory, transfer_slot
from ..errors import ConfigError, DeadlockSuspected, NocError, ProtocolViolation, UnservedCircuit
from ..model import OPPOSITE, Coord, Flit, MeshTopology, Port, period_ps, port_name
from ..ni import (HeaderFormat, Message, Mode, choose_mode, circuit_words, depacketize,
                  join_words, packet_flits, packetize)
from ..player import Monitor, PRouter, SetupPipeline, VcBuffer
from .stats import SimStats
from .traffic import InjectionEvent, TrafficPattern, generate

WATCHDOG_FACTOR = 10
AUDIT_EVERY = 1000


@dataclass(frozen=True)
class ClockDomain:
    id: int
    frequency_mhz: float

    @property
    def period_ps(self) -> int:
        return period_ps(self.frequency_mhz)


class _Message:
    __slots__ = ("src", "dst", "payload", "created_at", "parts", "remaining", "mode", "width")

    def __init__(self, src, dst, payload, created_at, remaining, mode, width):
        self.src = src
        self.dst = dst
        self.payload = payload
        self.created_at = created_at
        self.parts = []
        self.remaining = remaining
        self.mode = mode
        self.width = width


class NetworkInterface:
    """Per-IP adapter running in the IP's clock domain."""

    def __init__(self, sim: "Simulation", ip: str, coord: Coord, port: int, period: int,
                 tx_vcs: List[VcBuffer], rx_depth: int, width: int):
        self.sim = sim
        self.ip = ip
        self.coord = coord
        self.port = port
        self.period = period
        self.tx_vcs = tx_vcs
        self.rx = VcBuffer(Port.LOCAL + port, 0, rx_depth)
        self.width = width
        self.events: List[InjectionEvent] = []
        self.ev_i = 0
        self.sendq = deque()
        self.cur: Optional[List[Flit]] = None
        self.cur_i = 0
        self.cur_vc: Optional[VcBuffer] = None
        self.cq: Dict[Tuple[int, ...], deque] = {}

    def tick(self, cycle: int, now: int) -> None:
        sim = self.sim
        ev = self.events
        while self.ev_i < len(ev) and ev[self.ev_i].tick <= now:
            sim.admit(self, ev[self.ev_i])
            self.ev_i += 1
        rx = self.rx.q
        if rx and rx[0][1] <= now:
            sim.on_eject(self, rx.popleft()[0], now)
        if self.cur is None and self.sendq:
            pkt, flits = self.sendq[0]
            for vc in self.tx_vcs:
                if vc.capacity - len(vc.q) - vc.reserved >= pkt.flit_count:
                    vc.reserved += pkt.flit_count
                    self.sendq.popleft()
                    self.cur, self.cur_i, self.cur_vc = flits, 0, vc
                    sim.stats.packets_injected += 1
                    break
        if self.cur is not None:
            flit = self.cur[self.cur_i]
            arrive = now + self.period
            self.cur_vc.push(flit, arrive)
            sim.on_inject(self, flit, now, arrive)
            self.cur_i += 1
            if self.cur_i == len(self.cur):
                self.cur = None


class CLayerRunner:
    """Drives one router's C-layer cross-point once per C-layer clock edge."""

    def __init__(self, sim: "Simulation", coord: Coord, clayer: CLayer, nis: Dict[int, NetworkInterface],
                 period: int):
        self.sim = sim
        self.coord = coord
        self.clayer = clayer
        self.nis = nis
        self.period = period
        sched = clayer.schedule
        self.configs = [sched.config(i) for i in range(sched.slot_count)]
        self.fanouts = [sorted(sched.fanout(i).items()) for i in range(sched.slot_count)]

    def tick(self, cycle: int, now: int) -> None:
        slot = self.clayer.state.current_slot
        inputs = {}
        taken = {}
        for src, outs in self.fanouts[slot]:
            q = self.nis[src].cq.get(outs)
            if q:
                mid, word = q.popleft()
                inputs[src] = word
                taken[src] = mid
        if inputs:
            delivered = transfer_slot(self.configs[slot], inputs)
            self.sim.on_circuit_slot(self, taken, inputs, delivered, now + self.period)
        self.clayer.advance_slot()


class Simulation(Monitor):
    def __init__(self, topology: MeshTopology, schedules: Optional[Mapping[Coord, ScheduleMemory]] = None,
                 pipeline: Optional[SetupPipeline] = None, trace: bool = False, record_words: bool = False,
                 audit_every: int = AUDIT_EVERY, watchdog_factor: int = WATCHDOG_FACTOR):
        self.topology = topology
        self.pipeline = pipeline or SetupPipeline()
        self.trace_on = trace
        self.record_words = record_words
        self.audit_every = audit_every
        self.watchdog_factor = watchdog_factor
        self.stats = SimStats()
        self.trace_rows = self.stats.trace
        self.packets: Dict[int, tuple] = {}       # id -> (packet, dst port, message id)
        self.hops: Dict[int, int] = {}
        self.messages: Dict[int, _Message] = {}
        self.next_pid = 0
        self.next_mid = 0
        self.outstanding = 0
        self.pending_events = 0
        self._build(schedules or {})

    # construction -------------------------------------------------------
    def _build(self, schedules):
        topo = self.topology
        widths = {cfg.channel_width_p for cfg in topo.routers.values()}
        if len(widths) != 1:
            raise ConfigError(f"all routers must share one P-layer channel width, got {sorted(widths)}")
        self.width = widths.pop()
        self.depth = min(cfg.buffer_depth for cfg in topo.routers.values())
        self.fmt = HeaderFormat.for_mesh(self.depth, topo.width, topo.height)
        self.header_flits = self.fmt.flits(self.width)
        if self.header_flits >= self.depth:
            raise ConfigError(f"buffer depth {self.depth} leaves no room for payload after a "
                              f"{self.header_flits}-flit header")
        self.routers: Dict[Coord, PRouter] = {}
        for c in topo.coords():
            cfg = topo.routers[c]
            self.routers[c] = PRouter(c, cfg, self.pipeline, self.fmt, period_ps(topo.router_freq[c]),
                                      topo.neighbors(c).keys(), topo.c_members(c).keys(),
                                      self.header_flits, self)
        self.nis: Dict[str, NetworkInterface] = {}
        for ip in topo.ip_ids:
            a = topo.ip_assignments[ip]
            r = self.routers[a.router]
            self.nis[ip] = NetworkInterface(self, ip, a.router, a.port, period_ps(topo.ip_freq[ip]),
                                            r.inputs[Port.LOCAL + a.port], r.cfg.buffer_depth, self.width)
            self.stats.ip_router[ip] = str(a.router)
            self.stats.ip_layer[ip] = a.layer.value
        for c, r in self.routers.items():
            for p, n in topo.neighbors(c).items():
                down = self.routers[n]
                r.connect(int(p), down.inputs[int(OPPOSITE[p])], down.period, down)
            for port, ip in topo.ips_at(c).items():
                ni = self.nis[ip]
                r.connect(Port.LOCAL + port, [ni.rx], ni.period, ni)
        self.clayers: Dict[Coord, CLayerRunner] = {}
        for c, sched in sorted(schedules.items()):
            if c not in self.routers:
                raise ConfigError(f"schedule given for router {c} outside the mesh")
            members = topo.c_members(c)
            if not members:
                raise ConfigError(f"schedule given for router {c}, which has no C-layer members")
            cfg = topo.routers[c]
            cl = CLayer(members.keys(), cfg.channel_width_c, topo.c_freq[c])
            cl.load_schedule(sched)
            self.clayers[c] = CLayerRunner(self, c, cl, {p: self.nis[ip] for p, ip in members.items()},
                                           period_ps(topo.c_freq[c]))
        # group components by clock period
        by_period: Dict[int, list] = {}
        freq_of: Dict[int, float] = {}
        for ip, ni in self.nis.items():
            by_period.setdefault(ni.period, [[], [], []])[0].append(ni)
            freq_of.setdefault(ni.period, topo.ip_freq[ip])
        for c, r in self.routers.items():
            by_period.setdefault(r.period, [[], [], []])[1].append(r)
            freq_of.setdefault(r.period, topo.router_freq[c])
        for c, cl in self.clayers.items():
            by_period.setdefault(cl.period, [[], [], []])[2].append(cl)
            freq_of.setdefault(cl.period, topo.c_freq[c])
        self.domains: List[ClockDomain] = []
        self.components: List[list] = []
        self.periods: List[int] = []
        for i, per in enumerate(sorted(by_period)):
            self.domains.append(ClockDomain(i, freq_of[per]))
            self.periods.append(per)
            nis, rts, cls = by_period[per]
            self.components.append(nis + rts + cls)

    # traffic ----------------------------------------------------------------
    def _check_event(self, ev: InjectionEvent) -> Mode:
        topo = self.topology
        dsts = ev.dst if isinstance(ev.dst, tuple) else (ev.dst,)
        if ev.src in dsts:
            raise ConfigError(f"message from {ev.src} addressed to itself")
        mode = choose_mode(topo, ev.src, ev.dst)
        if mode is Mode.CIRCUIT:
            c = topo.coord_of(ev.src)
            outs = tuple(sorted(topo.ip_assignments[d].port for d in dsts))
            cl = self.clayers.get(c)
            if cl is None or cl.clayer.schedule.serves(topo.ip_assignments[ev.src].port, outs) == 0:
                raise UnservedCircuit(f"no schedule slot at router {c} carries {ev.src} -> {'|'.join(dsts)}")
        elif isinstance(ev.dst, tuple):
            raise ConfigError(f"multicast {ev.src} -> {ev.dst} is only possible on the C-layer")
        return mode

    def load_events(self, events: Sequence[InjectionEvent]) -> None:
        for ev in events:
            self._check_event(ev)
            self.nis[ev.src].events.append(ev)
            self.pending_events += 1
        for ni in self.nis.values():
            ni.events.sort(key=lambda e: e.tick)

    def admit(self, ni: NetworkInterface, ev: InjectionEvent) -> None:
        topo = self.topology
        self.pending_events -= 1
        mid = self.next_mid
        self.next_mid += 1
        msg = Message(ev.src, ev.dst, ev.payload)
        if choose_mode(topo, ev.src, ev.dst) is Mode.CIRCUIT:
            dsts = msg.destinations
            outs = tuple(sorted(topo.ip_assignments[d].port for d in dsts))
            words = circuit_words(msg, topo.routers[ni.coord].channel_width_c)
            self.messages[mid] = _Message(ev.src, "|".join(dsts), ev.payload, ev.tick, len(words), "C",
                                          topo.routers[ni.coord].channel_width_c)
            q = ni.cq.setdefault(outs, deque())
            for w in words:
                q.append((mid, w))
            self.outstanding += len(words)
            return
        dest = topo.coord_of(ev.dst)
        pkts = packetize(msg, self.width, self.depth, self.fmt, self.next_pid, ev.tick, mid)
        self.next_pid += len(pkts)
        self.messages[mid] = _Message(ev.src, ev.dst, ev.payload, ev.tick, len(pkts), "P", self.width)
        dport = topo.ip_assignments[ev.dst].port
        for p in pkts:
            self.packets[p.id] = (p, dport, mid)
            self.hops[p.id] = 0
            ni.sendq.append((p, packet_flits(p, dest, self.fmt, self.width)))
            self.outstanding += p.flit_count

    # monitor hooks ----------------------------------------------------------
    def local_port_of(self, dest: Coord, packet_id: int) -> int:
        return self.packets[packet_id][1]

    def on_grant(self, router: PRouter, in_port: int, out_port: int) -> None:
        self.stats.grants[f"{router.coord}:{port_name(out_port)}"] += 1

    def sample_occupancy(self, load: int) -> None:
        self.stats.occupancy_hist[load] += 1

    def on_header_cross(self, router: PRouter, conn, flit: Flit, now: int, arrive: int) -> None:
        sink = router.outputs[conn.out_port].sink
        if isinstance(sink, PRouter):
            self.hops[flit.packet_id] += 1
            if self.trace_on:
                inp = port_name(int(OPPOSITE[Port(conn.out_port)]))
                self.trace_rows.append((arrive, sink.coord, "arrive", inp, conn.dest_vc.vc, flit.packet_id))
        elif self.trace_on:
            self.trace_rows.append((arrive, router.coord, "eject", port_name(conn.out_port), 0, flit.packet_id))

    def on_inject(self, ni: NetworkInterface, flit: Flit, now: int, arrive: int) -> None:
        st = self.stats
        st.injected_flits += 1
        st.injected_bits[ni.ip] += self.width
        st.injection_busy_cycles[ni.ip] += 1
        if self.trace_on and flit.seq == 0:
            self.trace_rows.append((arrive, ni.coord, "arrive", port_name(Port.LOCAL + ni.port),
                                    ni.cur_vc.vc, flit.packet_id))

    def on_eject(self, ni: NetworkInterface, flit: Flit, now: int) -> None:
        st = self.stats
        pkt, dport, mid = self.packets[flit.packet_id]
        if pkt.dst_ip != ni.ip:
            raise ProtocolViolation(f"packet {pkt.id} for {pkt.dst_ip} ejected at {ni.ip}")
        st.delivered_flits += 1
        st.delivered_bits[ni.ip] += self.width
        self.outstanding -= 1
        if flit.seq != pkt.flit_count - 1:
            return
        del self.packets[flit.packet_id]
        st.packets_delivered += 1
        st.delivered_payload_bits[ni.ip] += pkt.payload_bits
        st.latency.setdefault((pkt.src_ip, pkt.dst_ip, "P"), []).append(now - pkt.created_at)
        st.delivery_order.setdefault((pkt.src_ip, pkt.dst_ip), []).append(pkt.id)
        st.hop_hist[self.hops.pop(pkt.id)] += 1
        m = self.messages[mid]
        m.parts.append(pkt)
        m.remaining -= 1
        if m.remaining == 0:
            del self.messages[mid]
            st.messages_delivered += 1
            if depacketize(sorted(m.parts, key=lambda p: p.id), self.width) != m.payload:
                st.reassembly_errors += 1

    def on_circuit_slot(self, runner: CLayerRunner, taken: Dict[int, int], inputs: Dict[int, int],
                        delivered: Dict[int, int], at: int) -> None:
        st = self.stats
        w = runner.clayer.state.width_bits
        for src, mid in taken.items():
            sip = runner.nis[src].ip
            st.c_words_sent += 1
            st.injected_bits[sip] += w
            self.outstanding -= 1
            m = self.messages[mid]
            m.parts.append(inputs[src])
            m.remaining -= 1
            if m.remaining == 0:
                del self.messages[mid]
                st.messages_delivered += 1
                st.latency.setdefault((m.src, m.dst, "C"), []).append(at - m.created_at)
                if join_words(m.parts, m.width, 8 * len(m.payload)) != m.payload:
                    st.reassembly_errors += 1
        for out, word in sorted(delivered.items()):
            dip = runner.nis[out].ip
            st.c_words_delivered += 1
            st.delivered_bits[dip] += w
            if self.record_words:
                src = runner.configs[runner.clayer.state.current_slot][out]
                st.c_deliveries.append((at, runner.nis[src].ip, dip, word))

    # kernel -------------------------------------------------------------------
    def flits_in_network(self) -> int:
        n = sum(r.flits_held() for r in self.routers.values())
        return n + sum(len(ni.rx.q) for ni in self.nis.values())

    def audit(self) -> None:
        st = self.stats
        held = self.flits_in_network()
        if st.injected_flits != st.delivered_flits + held:
            raise NocError(f"flit conservation violated: injected {st.injected_flits}, "
                           f"delivered {st.delivered_flits}, in network {held}")
        st.audits += 1

    def idle(self) -> bool:
        return self.pending_events == 0 and self.outstanding == 0

    def run(self, duration_ps: int, drain: bool = True) -> SimStats:
        st = self.stats
        st.duration_ps = duration_ps
        periods = self.periods
        comps = self.components
        n = len(periods)
        nxt = list(periods)
        cyc = [1] * n
        limit = duration_ps * self.watchdog_factor if drain else duration_ps
        steps = 0
        while True:
            t = min(nxt)
            if t > duration_ps and (not drain or self.idle()):
                break
            if t > limit:
                st.end_ps = t
                st.drained = False
                self._finish(cyc, duration_ps)
                raise DeadlockSuspected(
                    f"{st.in_flight} flits and {self.outstanding} units outstanding after "
                    f"{limit} ps (watchdog {self.watchdog_factor}x duration)", st)
            for i in range(n):
                if nxt[i] == t:
                    c = cyc[i]
                    for comp in comps[i]:
                        comp.tick(c, t)
                    cyc[i] = c + 1
                    nxt[i] = t + periods[i]
            steps += 1
            if steps % self.audit_every == 0:
                self.audit()
        self.audit()
        st.end_ps = max(duration_ps, max(p * (c - 1) for p, c in zip(periods, cyc)))
        st.drained = self.idle()
        self._finish(cyc, duration_ps)
        return st

    def _finish(self, cyc, duration_ps):
        st = self.stats
        for d, per in zip(self.domains, self.periods):
            st.cycles[d.frequency_mhz] = duration_ps // per
        router_cycles = sum(duration_ps // r.period for r in self.routers.values())
        busy = sum(v for k, v in st.occupancy_hist.items() if k)
        st.occupancy_hist[0] += max(0, router_cycles - busy)


def run(topology: MeshTopology, schedules: Optional[Mapping[Coord, ScheduleMemory]],
        traffic: Union[TrafficPattern, Sequence[InjectionEvent]], duration_ps: int,
        drain: bool = True, pipeline: Optional[SetupPipeline] = None, trace: bool = False,
        record_words: bool = False, audit_every: int = AUDIT_EVERY,
        watchdog_factor: int = WATCHDOG_FACTOR) -> SimStats:
    """Simulate ``topology`` for ``duration_ps`` of injection.

    With ``drain`` the run continues past the injection window until the
    network is empty, raising DeadlockSuspected if that takes longer than
    ``watchdog_factor`` x ``duration_ps``.
    """
    sim = Simulation(topology, schedules, pipeline, trace, record_words, audit_every, watchdog_factor)
    events = generate(traffic, topology, duration_ps) if isinstance(traffic, TrafficPattern) else traffic
    sim.load_events(events)
    return sim.run(duration_ps, drain)
