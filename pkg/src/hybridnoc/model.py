"""
Core NoC types: coordinates, router configuration, packets/flits,
mesh topology construction and XY routing.

Orientation: x grows eastward, y grows northward.
"""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple, Union

from .errors import (
    ClockDomainMismatch,
    CLayerOverCap,
    ConfigError,
    DanglingIp,
    DuplicatePortAssignment,
    InvalidPortArithmetic,
    TooManyLocalIps,
)

MAX_LOCAL_IPS = 4
DEFAULT_BUFFER_DEPTH = 16


class Port(IntEnum):
    """Router port indices. Local port i is ``LOCAL + i``."""
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3
    LOCAL = 4


DIRECTIONS = (Port.NORTH, Port.EAST, Port.SOUTH, Port.WEST)
OPPOSITE = {Port.NORTH: Port.SOUTH, Port.SOUTH: Port.NORTH,
            Port.EAST: Port.WEST, Port.WEST: Port.EAST}


def port_name(index: int) -> str:
    if index < Port.LOCAL:
        return Port(index).name[0]
    return f"L{index - Port.LOCAL}"


class Layer(str, Enum):
    C = "C"
    P = "P"


@dataclass(frozen=True, order=True)
class Coord:
    x: int
    y: int

    def __str__(self):
        return f"({self.x},{self.y})"

    def step(self, port: Port) -> "Coord":
        dx, dy = {Port.NORTH: (0, 1), Port.SOUTH: (0, -1),
                  Port.EAST: (1, 0), Port.WEST: (-1, 0)}[port]
        return Coord(self.x + dx, self.y + dy)


@dataclass(frozen=True)
class RouterConfig:
    """One router instance, MC(total_ports, c_ports, p_ports) plus buffering parameters."""
    total_ports: int
    c_ports: int
    p_ports: int
    channel_width_p: int = 8
    channel_width_c: int = 32
    vcs_per_port: int = 1
    buffer_depth: int = DEFAULT_BUFFER_DEPTH
    local_ips: int = MAX_LOCAL_IPS
    c_port_cap: int = MAX_LOCAL_IPS

    @classmethod
    def mc(cls, x: int, y: int, z: int, **kw) -> "RouterConfig":
        return cls(total_ports=x, c_ports=y, p_ports=z, **kw)

    @property
    def label(self) -> str:
        return f"MC({self.total_ports},{self.c_ports},{self.p_ports})"


def config_problems(cfg: RouterConfig) -> List[ConfigError]:
    """Every invariant ``cfg`` violates, as error instances (empty when valid)."""
    out: List[ConfigError] = []
    if cfg.total_ports != cfg.c_ports + cfg.p_ports:
        out.append(InvalidPortArithmetic(
            f"{cfg.label}: total_ports {cfg.total_ports} != c_ports {cfg.c_ports} + p_ports {cfg.p_ports}"))
    if cfg.local_ips > MAX_LOCAL_IPS:
        out.append(TooManyLocalIps(f"{cfg.label}: local_ips {cfg.local_ips} > {MAX_LOCAL_IPS}"))
    if cfg.c_ports > cfg.local_ips:
        out.append(TooManyLocalIps(
            f"{cfg.label}: c_ports {cfg.c_ports} exceeds local_ips {cfg.local_ips}"))
    if cfg.c_ports > cfg.c_port_cap:
        out.append(CLayerOverCap(f"{cfg.label}: c_ports {cfg.c_ports} > c_port_cap {cfg.c_port_cap}"))
    for name in ("total_ports", "c_ports", "p_ports", "local_ips"):
        if getattr(cfg, name) < 0:
            out.append(ConfigError(f"{cfg.label}: {name} must be >= 0"))
    for name in ("channel_width_p", "channel_width_c", "buffer_depth", "vcs_per_port"):
        if getattr(cfg, name) < 1:
            out.append(ConfigError(f"{cfg.label}: {name} must be >= 1"))
    return out


def validate_config(cfg: RouterConfig) -> RouterConfig:
    """Return ``cfg`` unchanged if valid.

    Raises the first violated invariant's error; its ``problems`` attribute
    and message list every violation found.
    """
    problems = config_problems(cfg)
    if problems:
        first = problems[0]
        msgs = [str(p) for p in problems]
        raise type(first)("; ".join(msgs), msgs)
    return cfg


class Packet(NamedTuple):
    id: int
    src_ip: str
    dst_ip: str
    flit_count: int
    payload: Tuple[int, ...]   # payload flit words, channel_width_p bits each
    created_at: int            # tick (ps)
    payload_bits: int = 0
    message_id: int = 0


class FlitKind(str, Enum):
    HEADER = "header"
    HEADER_EXT = "header_ext"   # continuation when the header is wider than the channel
    PAYLOAD = "payload"


class Flit(NamedTuple):
    packet_id: int
    kind: FlitKind
    seq: int
    data: int
    # decoded header fields, header flit only: (size_code, dest_x, dest_y)
    header_fields: Optional[Tuple[int, int, int]] = None

    @property
    def is_header(self) -> bool:
        return self.kind is FlitKind.HEADER


@dataclass(frozen=True)
class IpAssignment:
    router: Coord
    port: int          # local port index, 0..local_ips-1
    layer: Layer = Layer.P


@dataclass(frozen=True)
class MeshTopology:
    width: int
    height: int
    routers: Mapping[Coord, RouterConfig]
    ip_assignments: Mapping[str, IpAssignment]
    router_freq: Mapping[Coord, float]
    ip_freq: Mapping[str, float]
    c_freq: Mapping[Coord, float] = field(default_factory=dict)

    @property
    def clock_domains(self) -> Dict[str, float]:
        """Flat map of component name to MHz."""
        out = {f"router{c}": f for c, f in self.router_freq.items()}
        out.update({f"clayer{c}": f for c, f in self.c_freq.items()})
        out.update({f"ip:{i}": f for i, f in self.ip_freq.items()})
        return out

    def coords(self) -> List[Coord]:
        return [Coord(x, y) for y in range(self.height) for x in range(self.width)]

    def contains(self, c: Coord) -> bool:
        return 0 <= c.x < self.width and 0 <= c.y < self.height

    def neighbors(self, c: Coord) -> Dict[Port, Coord]:
        out = {}
        for p in DIRECTIONS:
            n = c.step(p)
            if self.contains(n):
                out[p] = n
        return out

    def links(self) -> List[Tuple[Coord, Coord]]:
        """Bidirectional inter-router links, each listed once."""
        out = []
        for c in self.coords():
            for p in (Port.EAST, Port.NORTH):
                n = c.step(p)
                if self.contains(n):
                    out.append((c, n))
        return out

    def ips_at(self, c: Coord) -> Dict[int, str]:
        return {a.port: ip for ip, a in sorted(self.ip_assignments.items()) if a.router == c}

    def c_members(self, c: Coord) -> Dict[int, str]:
        return {a.port: ip for ip, a in sorted(self.ip_assignments.items())
                if a.router == c and a.layer is Layer.C}

    def coord_of(self, ip: str) -> Coord:
        return self.ip_assignments[ip].router

    @property
    def ip_ids(self) -> List[str]:
        return sorted(self.ip_assignments)


def directional_ports(c: Coord, width: int, height: int) -> int:
    return sum(1 for p in DIRECTIONS
               if 0 <= c.step(p).x < width and 0 <= c.step(p).y < height)


def mesh_router_config(c: Coord, width: int, height: int, local_ips: int = MAX_LOCAL_IPS,
                       c_ports: int = 0, **kw) -> RouterConfig:
    """Router config for a mesh position: existing directional ports plus local ports."""
    total = directional_ports(c, width, height) + local_ips
    return RouterConfig(total_ports=total, c_ports=c_ports, p_ports=total - c_ports,
                        local_ips=local_ips, **kw)


def build_mesh(width: int, height: int,
               router_cfgs: Union[RouterConfig, Mapping[Coord, RouterConfig]],
               ip_assignments: Mapping[str, IpAssignment],
               router_freq: Optional[Mapping[Coord, float]] = None,
               ip_freq: Optional[Mapping[str, float]] = None,
               c_freq: Optional[Mapping[Coord, float]] = None) -> MeshTopology:
    """Validate and link a width x height mesh.

    Router frequencies default to the MoClib frequency of each router's
    MC(x, y, z) instance; IP clocks default to their router's clock, except
    C-layer members, which default to the router's C-layer clock.
    """
    if width < 1 or height < 1:
        raise ConfigError(f"mesh dimensions must be >= 1, got {width}x{height}")
    coords = [Coord(x, y) for y in range(height) for x in range(width)]
    if isinstance(router_cfgs, RouterConfig):
        router_cfgs = {c: router_cfgs for c in coords}
    missing = [c for c in coords if c not in router_cfgs]
    if missing:
        raise ConfigError(f"no router config for {', '.join(map(str, missing))}")
    extra = [c for c in router_cfgs if c not in coords]
    if extra:
        raise DanglingIp(f"router config outside mesh: {', '.join(map(str, extra))}")
    for c in coords:
        validate_config(router_cfgs[c])

    taken: Dict[Tuple[Coord, int], str] = {}
    c_count: Dict[Coord, int] = {}
    for ip, a in sorted(ip_assignments.items()):
        if not (0 <= a.router.x < width and 0 <= a.router.y < height):
            raise DanglingIp(f"IP {ip} assigned to nonexistent router {a.router}")
        cfg = router_cfgs[a.router]
        if not 0 <= a.port < cfg.local_ips:
            raise DanglingIp(f"IP {ip} assigned to nonexistent local port {a.port} of router {a.router}")
        key = (a.router, a.port)
        if key in taken:
            raise DuplicatePortAssignment(
                f"IPs {taken[key]} and {ip} both assigned to router {a.router} port {a.port}")
        taken[key] = ip
        if a.layer is Layer.C:
            c_count[a.router] = c_count.get(a.router, 0) + 1
    for c, n in c_count.items():
        if n > router_cfgs[c].c_ports:
            raise CLayerOverCap(
                f"router {c} hosts {n} C-layer IPs but c_ports = {router_cfgs[c].c_ports}")

    rf = dict(router_freq or {})
    for c in coords:
        if c not in rf:
            from .moclib import lookup
            cfg = router_cfgs[c]
            rf[c] = float(lookup(cfg.total_ports, cfg.c_ports, cfg.p_ports).frequency)
    cf = {c: float((c_freq or {}).get(c, rf[c])) for c in sorted(c_count)}
    ipf = dict(ip_freq or {})
    for ip, a in ip_assignments.items():
        if ip not in ipf:
            ipf[ip] = cf[a.router] if a.layer is Layer.C else rf[a.router]
    # C-layer members have no buffering between them, so they must share the C-layer clock
    for ip, a in sorted(ip_assignments.items()):
        if a.layer is Layer.C and ipf[ip] != cf[a.router]:
            raise ClockDomainMismatch(
                f"C-layer IP {ip} runs at {ipf[ip]} MHz but router {a.router} C-layer runs at {cf[a.router]} MHz")
    for name, f in list(rf.items()) + list(cf.items()) + list(ipf.items()):
        if f <= 0:
            raise ConfigError(f"clock for {name} must be > 0 MHz")

    return MeshTopology(width, height, dict(router_cfgs), dict(ip_assignments), rf, ipf, cf)


def xy_route(current: Coord, dest: Coord) -> Port:
    """Dimension-ordered routing: resolve X completely, then Y."""
    if dest.x > current.x:
        return Port.EAST
    if dest.x < current.x:
        return Port.WEST
    if dest.y > current.y:
        return Port.NORTH
    if dest.y < current.y:
        return Port.SOUTH
    return Port.LOCAL


def xy_path(src: Coord, dest: Coord) -> List[Port]:
    """Output ports taken from ``src`` until arrival (excluding the final LOCAL)."""
    hops = []
    cur = src
    while True:
        p = xy_route(cur, dest)
        if p is Port.LOCAL:
            return hops
        hops.append(p)
        cur = cur.step(p)


def channel_dependency_graph(width: int, height: int) -> Dict[Tuple[Coord, Port], set]:
    """Directed channel dependencies induced by XY routing over all src/dst pairs.

    Nodes are (router, output direction) channels; an edge a -> b means a
    packet holding channel a may wait for channel b.
    """
    graph: Dict[Tuple[Coord, Port], set] = {}
    coords = [Coord(x, y) for y in range(height) for x in range(width)]
    for s in coords:
        for d in coords:
            cur, prev = s, None
            for p in xy_path(s, d):
                ch = (cur, p)
                graph.setdefault(ch, set())
                if prev is not None:
                    graph[prev].add(ch)
                prev = ch
                cur = cur.step(p)
    return graph


def coord_bits(n: int) -> int:
    """Bits needed to address ``n`` positions (at least one)."""
    return max(1, (n - 1).bit_length())


def iter_ip_pairs(topology: MeshTopology) -> Iterable[Tuple[str, str]]:
    for s in topology.ip_ids:
        for d in topology.ip_ids:
            if s != d:
                yield s, d


def period_ps(freq_mhz: float) -> int:
    """Clock period in integer picoseconds."""
    p = round(1e6 / freq_mhz)
    if p <= 0:
        raise ConfigError(f"frequency {freq_mhz} MHz gives a non-positive period")
    return p
