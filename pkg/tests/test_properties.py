from hypothesis import HealthCheck, given, settings, strategies as st

from hybridnoc.ni import HeaderFormat, Message, depacketize, packetize

from scenario import Scenario, violations

scenarios = st.builds(
    Scenario,
    width=st.integers(1, 3), height=st.integers(1, 3),
    local_ips=st.integers(1, 2), vcs=st.integers(1, 2),
    depth=st.sampled_from([4, 8, 16]),
    rate=st.floats(0.02, 0.45),
    sizes=st.lists(st.integers(1, 60), min_size=1, max_size=3).map(tuple),
    seed=st.integers(0, 2**31 - 1),
    cycles=st.integers(50, 300),
    with_circuit=st.booleans(),
)


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(scenarios)
def test_invariants_hold(sc):
    assert violations(sc) == []


def test_checker_catches_reordering(monkeypatch):
    # the invariant check has teeth: a swapped delivery is reported
    from hybridnoc.sim import engine
    real = engine.Simulation.on_eject
    seen = []

    def swapped(self, ni, flit, now):
        real(self, ni, flit, now)
        for flow, ids in self.stats.delivery_order.items():
            if len(ids) == 2 and flow not in seen:
                seen.append(flow)
                ids.reverse()

    monkeypatch.setattr(engine.Simulation, "on_eject", swapped)
    sc = Scenario(2, 1, 1, 1, 16, 0.3, (3,), 1, 200)
    assert any("out of order" in v for v in violations(sc))


@settings(max_examples=200, deadline=None)
@given(st.binary(min_size=1, max_size=300), st.sampled_from([8, 16]), st.sampled_from([4, 8, 16]))
def test_packetize_round_trip(payload, width, depth):
    fmt = HeaderFormat.for_mesh(depth, 4, 4)
    pkts = packetize(Message("a", "b", payload), width, depth, fmt)
    assert depacketize(pkts, width) == payload
    assert all(p.flit_count <= depth for p in pkts)
