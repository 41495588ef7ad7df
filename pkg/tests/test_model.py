import itertools
from collections import deque

import pytest

from hybridnoc.errors import (CLayerOverCap, ClockDomainMismatch, DanglingIp, DuplicatePortAssignment,
                              InvalidPortArithmetic, TooManyLocalIps)
from hybridnoc.model import (Coord, IpAssignment, Layer, Port, RouterConfig, build_mesh,
                             channel_dependency_graph, coord_bits, mesh_router_config, period_ps,
                             validate_config, xy_path, xy_route)
from hybridnoc.moclib import default_library


def brute_force_xy(src, dst):
    """BFS over the grid, only allowing moves that keep X-before-Y order."""
    start = (src.x, src.y, False)   # flag: Y phase started
    prev = {start: None}
    q = deque([start])
    while q:
        x, y, ph = q.popleft()
        if (x, y) == (dst.x, dst.y):
            path, node = [], (x, y, ph)
            while prev[node] is not None:
                node, move = prev[node]
                path.append(move)
            return path[::-1]
        moves = [] if ph else [(Port.EAST, 1, 0), (Port.WEST, -1, 0)]
        moves += [(Port.NORTH, 0, 1), (Port.SOUTH, 0, -1)]
        for port, dx, dy in moves:
            nxt = (x + dx, y + dy, ph or dy != 0)
            if abs(nxt[0] - dst.x) < abs(x - dst.x) or abs(nxt[1] - dst.y) < abs(y - dst.y):
                if nxt not in prev:
                    prev[nxt] = ((x, y, ph), port)
                    q.append(nxt)
    raise AssertionError("unreachable")


def has_cycle(g) -> bool:
    state = {}

    def visit(v):
        state[v] = 1
        for w in g.get(v, ()):
            if state.get(w) == 1 or (w not in state and visit(w)):
                return True
        state[v] = 2
        return False

    return any(visit(v) for v in list(g) if v not in state)


class TestValidateConfig:
    def test_table_rows_valid(self):
        for e in default_library():
            validate_config(RouterConfig.mc(e.x, e.y, e.z))

    def test_mc422_four_locals(self):
        assert validate_config(RouterConfig.mc(4, 2, 2, local_ips=4)).label == "MC(4,2,2)"

    def test_port_arithmetic(self):
        with pytest.raises(InvalidPortArithmetic):
            validate_config(RouterConfig.mc(5, 2, 2))

    def test_cap(self):
        validate_config(RouterConfig.mc(7, 3, 4, c_port_cap=3))
        with pytest.raises(CLayerOverCap):
            validate_config(RouterConfig.mc(7, 3, 4, c_port_cap=2))

    def test_too_many_locals(self):
        with pytest.raises(TooManyLocalIps):
            validate_config(RouterConfig.mc(9, 0, 9, local_ips=5))

    def test_all_problems_listed(self):
        with pytest.raises(InvalidPortArithmetic) as ei:
            validate_config(RouterConfig.mc(9, 3, 2, c_port_cap=2, local_ips=5))
        assert len(ei.value.problems) == 3


class TestBuildMesh:
    def test_single_router_two_c_ips(self):
        cfg = RouterConfig.mc(4, 2, 2)
        t = build_mesh(1, 1, cfg, {"a": IpAssignment(Coord(0, 0), 0, Layer.C),
                                   "b": IpAssignment(Coord(0, 0), 3, Layer.C)})
        assert t.links() == []
        assert t.router_freq[Coord(0, 0)] == 336

    def test_3x3_links(self):
        cfgs = {c: mesh_router_config(c, 3, 3) for c in (Coord(x, y) for x in range(3) for y in range(3))}
        t = build_mesh(3, 3, cfgs, {}, router_freq={c: 100 for c in cfgs})
        assert len(t.links()) == 12
        assert len(t.neighbors(Coord(0, 0))) == 2
        assert len(t.neighbors(Coord(1, 1))) == 4

    def test_dangling(self):
        cfg = RouterConfig.mc(4, 0, 4)
        with pytest.raises(DanglingIp):
            build_mesh(2, 2, cfg, {"a": IpAssignment(Coord(5, 5), 0)}, router_freq={})
        with pytest.raises(DanglingIp):
            build_mesh(1, 1, cfg, {"a": IpAssignment(Coord(0, 0), 4)})

    def test_duplicate(self):
        cfg = RouterConfig.mc(4, 0, 4)
        with pytest.raises(DuplicatePortAssignment):
            build_mesh(1, 1, cfg, {"a": IpAssignment(Coord(0, 0), 1), "b": IpAssignment(Coord(0, 0), 1)})

    def test_c_over_cap(self):
        cfg = RouterConfig.mc(4, 1, 3)
        ips = {"a": IpAssignment(Coord(0, 0), 0, Layer.C), "b": IpAssignment(Coord(0, 0), 1, Layer.C)}
        with pytest.raises(CLayerOverCap):
            build_mesh(1, 1, cfg, ips)

    def test_c_clock_mismatch(self):
        cfg = RouterConfig.mc(4, 2, 2)
        ips = {"a": IpAssignment(Coord(0, 0), 0, Layer.C), "b": IpAssignment(Coord(0, 0), 1, Layer.C)}
        with pytest.raises(ClockDomainMismatch):
            build_mesh(1, 1, cfg, ips, ip_freq={"a": 336, "b": 200})

    def test_edge_router_ports(self):
        c = Coord(0, 0)
        cfg = mesh_router_config(c, 4, 4, local_ips=1)
        assert (cfg.total_ports, cfg.p_ports) == (3, 3)


class TestXY:
    def test_examples(self):
        assert xy_route(Coord(1, 1), Coord(1, 1)) is Port.LOCAL
        assert xy_route(Coord(0, 0), Coord(2, 1)) is Port.EAST
        assert xy_route(Coord(2, 1), Coord(2, 0)) is Port.SOUTH
        assert xy_path(Coord(0, 0), Coord(2, 1)) == [Port.EAST, Port.EAST, Port.NORTH]

    def test_against_oracle_5x5(self):
        coords = [Coord(x, y) for x in range(5) for y in range(5)]
        for s, d in itertools.product(coords, coords):
            path = xy_path(s, d)
            assert path == brute_force_xy(s, d)
            assert len(path) == abs(s.x - d.x) + abs(s.y - d.y)

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    def test_cdg_acyclic(self, n):
        g = channel_dependency_graph(n, n)
        assert g
        assert not has_cycle(g)

    def test_cycle_checker_detects_ring(self):
        a, b, c = (Coord(0, 0), Port.EAST), (Coord(1, 0), Port.NORTH), (Coord(1, 1), Port.WEST)
        assert has_cycle({a: {b}, b: {c}, c: {a}})


def test_coord_bits_and_period():
    assert [coord_bits(n) for n in (1, 2, 3, 4, 5, 8, 9)] == [1, 1, 2, 2, 3, 3, 4]
    assert period_ps(100) == 10000
    assert period_ps(318) == 3145
