import numpy as np
import pytest

from hybridnoc.errors import ConfigError
from hybridnoc.model import Coord, period_ps
from hybridnoc.ni import Mode, choose_mode
from hybridnoc.sim.traffic import (InjectionEvent, PatternKind, TrafficPattern, generate, offered_flits,
                                   read_trace, write_trace)

from conftest import make_mesh

MESH4 = make_mesh(4, 4)
CYCLES = 10_000
UNTIL = CYCLES * period_ps(100.0)   # IP edges 1..10000


def test_rate_zero():
    assert generate(TrafficPattern(injection_rate=0.0), MESH4, UNTIL) == []


def test_uniform_expected_flits():
    counts = [offered_flits(generate(TrafficPattern(injection_rate=0.1, seed=s), MESH4, UNTIL), MESH4)
              for s in range(10)]
    expect = 0.1 * CYCLES * 16
    assert np.mean(counts) == pytest.approx(expect, rel=0.05)
    # each seed is binomial in messages of 9 flits: sd ~ 9 * sqrt(n p)
    sd = 9 * np.sqrt(16 * CYCLES * 0.1 / 9)
    assert all(abs(c - expect) < 4 * sd for c in counts)


def test_same_seed_same_stream():
    p = TrafficPattern(injection_rate=0.2, seed=5, message_bytes=(3, 20))
    assert generate(p, MESH4, UNTIL // 10) == generate(p, MESH4, UNTIL // 10)
    q = TrafficPattern(injection_rate=0.2, seed=6, message_bytes=(3, 20))
    assert generate(p, MESH4, UNTIL // 10) != generate(q, MESH4, UNTIL // 10)


def test_lower_rate_is_subset():
    lo = generate(TrafficPattern(injection_rate=0.05, seed=9), MESH4, UNTIL // 10)
    hi = generate(TrafficPattern(injection_rate=0.25, seed=9), MESH4, UNTIL // 10)
    key = lambda e: (e.tick, e.src, e.dst)
    assert {key(e) for e in lo} <= {key(e) for e in hi}


def test_sorted_and_in_window():
    ev = generate(TrafficPattern(injection_rate=0.3, seed=1), MESH4, 500_000)
    assert ev == sorted(ev, key=lambda e: (e.tick, e.src))
    assert all(0 < e.tick <= 500_000 for e in ev)


def test_uniform_avoids_c_pairs():
    mesh = make_mesh(2, 2, local_ips=4, c_members={Coord(0, 0): {0, 1, 2}})
    ev = generate(TrafficPattern(injection_rate=0.5, seed=2), mesh, 2_000_000)
    assert ev
    assert all(choose_mode(mesh, e.src, e.dst) is Mode.PACKET for e in ev)
    srcs_c = {e.src for e in ev if e.src in ("ip00_0", "ip00_1", "ip00_2")}
    assert srcs_c      # C members still talk to the rest of the mesh over the P-layer


def test_hotspot_fraction():
    p = TrafficPattern(PatternKind.HOTSPOT, 0.3, seed=4, hotspot_ip="ip00_0", hotspot_fraction=0.5)
    ev = generate(p, MESH4, UNTIL)
    others = [e for e in ev if e.src != "ip00_0"]
    frac = sum(e.dst == "ip00_0" for e in others) / len(others)
    assert frac == pytest.approx(0.5 + 0.5 / 15, abs=0.02)


def test_trace_replay(tmp_path):
    p = TrafficPattern(injection_rate=0.1, seed=3)
    ev = generate(p, MESH4, 200 * period_ps(100.0))
    f = tmp_path / "t.csv"
    write_trace(f, ev, MESH4)
    replay = generate(TrafficPattern(PatternKind.PAIRWISE_TRACE, trace=read_trace(f)), MESH4, 10 ** 12)
    assert replay == ev


def test_trace_multicast_and_sizes(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("cycle,src,dst,bytes\n3,a,b|c,8\n1,b,a,2\n")
    rows = read_trace(f)
    assert rows == ((3, "a", ("b", "c"), 8, None), (1, "b", "a", 2, None))


def test_bad_trace_row(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("cycle,src,dst,bytes\nx,a,b,1\n")
    with pytest.raises(ConfigError, match=":2:"):
        read_trace(f)


@pytest.mark.parametrize("kw", [dict(injection_rate=1.5), dict(injection_rate=-0.1),
                                dict(message_bytes=()), dict(circuit_rate=2.0)])
def test_pattern_validation(kw):
    with pytest.raises(ConfigError):
        TrafficPattern(**kw)
