import itertools

import pytest

from hybridnoc.errors import SizeOutOfRange, UnknownIp
from hybridnoc.model import Coord, FlitKind, IpAssignment, Layer, RouterConfig, build_mesh
from hybridnoc.ni import (ClockCrossingFifo, HeaderFormat, Message, Mode, choose_mode, circuit_words,
                          decode_header, depacketize, encode_header, fifo_cross, header_from_flits,
                          join_words, packet_flits, packetize, split_words)

from conftest import make_mesh


@pytest.fixture
def fig1():
    """Router (0,0) hosts four IPs, IP0 and IP3 on the C-layer; a second router sits to its east."""
    return make_mesh(2, 1, local_ips=4, c_members={Coord(0, 0): {0, 3}})


class TestChooseMode:
    def test_c_pair(self, fig1):
        assert choose_mode(fig1, "ip00_0", "ip00_3") is Mode.CIRCUIT
        assert choose_mode(fig1, "ip00_0", ("ip00_3",)) is Mode.CIRCUIT

    def test_same_router_p_member(self, fig1):
        assert choose_mode(fig1, "ip00_0", "ip00_1") is Mode.PACKET
        assert choose_mode(fig1, "ip00_1", "ip00_3") is Mode.PACKET

    def test_other_router(self, fig1):
        assert choose_mode(fig1, "ip00_0", "ip10_0") is Mode.PACKET

    def test_unknown(self, fig1):
        with pytest.raises(UnknownIp):
            choose_mode(fig1, "ip00_0", "nope")

    def test_p_route_exists_only_for_packet_pairs(self, fig1):
        """Soundness against the arbiter: PACKET pairs on one router never hit a reduced FSM pair."""
        from hybridnoc.player import PRouter, SetupPipeline
        cfg = fig1.routers[Coord(0, 0)]
        r = PRouter(Coord(0, 0), cfg, SetupPipeline(), HeaderFormat(16), 1, (), fig1.c_members(Coord(0, 0)))
        for a, b in itertools.permutations(fig1.ips_at(Coord(0, 0)).items(), 2):
            pair = (4 + a[0], 4 + b[0])
            reduced = pair in r.arb.reduced_pairs
            assert reduced == (choose_mode(fig1, a[1], b[1]) is Mode.CIRCUIT)


class TestPacketize:
    def test_56_bits(self):
        pk = packetize(Message("a", "b", bytes(7)), 8, 16)
        assert [p.flit_count for p in pk] == [8]

    def test_8_bits(self):
        assert [p.flit_count for p in packetize(Message("a", "b", b"\x01"), 8, 16)] == [2]

    def test_1024_bits(self):
        payload = bytes(range(128))
        pk = packetize(Message("a", "b", payload), 8, 16)
        assert [p.flit_count for p in pk] == [16] * 8 + [9]
        assert [p.payload_bits for p in pk] == [120] * 8 + [64]
        assert depacketize(pk, 8) == payload

    @pytest.mark.parametrize("n", [1, 2, 7, 15, 16, 29, 30, 31, 100])
    def test_reassembly_bruteforce(self, n):
        payload = bytes((i * 37 + 11) % 256 for i in range(n))
        for width, depth in ((8, 16), (8, 4), (16, 8), (32, 2)):
            pk = packetize(Message("a", "b", payload), width, depth)
            assert all(p.flit_count <= depth for p in pk)
            assert depacketize(pk, width) == payload

    def test_overhead_fraction_decreases(self):
        fracs = []
        for n in (1, 4, 16, 64, 256):
            pk = packetize(Message("a", "b", bytes(n)), 8, 16)
            fracs.append(len(pk) / sum(p.flit_count for p in pk))
        assert fracs == sorted(fracs, reverse=True)

    def test_depth_too_small(self):
        with pytest.raises(SizeOutOfRange):
            packetize(Message("a", "b", b"x"), 8, 1)


class TestHeader:
    def test_examples(self):
        fmt = HeaderFormat.for_mesh(16, 4, 4)
        bits = encode_header(8, Coord(2, 1), fmt)
        assert bits >> (fmt.x_bits + fmt.y_bits) == 8
        assert decode_header(bits, fmt) == (8, Coord(2, 1))
        assert decode_header(encode_header(16, Coord(3, 3), fmt), fmt) == (16, Coord(3, 3))
        with pytest.raises(SizeOutOfRange):
            encode_header(17, Coord(0, 0), fmt)

    def test_round_trip_exhaustive(self):
        for depth, w, h in ((16, 4, 4), (8, 3, 5), (1, 1, 1), (64, 8, 8)):
            fmt = HeaderFormat.for_mesh(depth, w, h)
            for f in range(1, depth + 1):
                for x, y in itertools.product(range(w), range(h)):
                    assert decode_header(encode_header(f, Coord(x, y), fmt), fmt) == (f, Coord(x, y))

    def test_size_field_width(self):
        assert HeaderFormat(16).size_bits == 5
        assert HeaderFormat.for_mesh(16, 4, 4).bits == 9
        assert HeaderFormat.for_mesh(16, 2, 2).flits(8) == 1
        assert HeaderFormat.for_mesh(16, 4, 4).flits(8) == 2

    def test_multi_flit_header(self):
        fmt = HeaderFormat.for_mesh(16, 4, 4)
        pk = packetize(Message("a", "b", bytes(7)), 8, 16, fmt)
        assert pk[0].flit_count == 9
        flits = packet_flits(pk[0], Coord(3, 2), fmt, 8)
        assert [f.kind for f in flits[:3]] == [FlitKind.HEADER, FlitKind.HEADER_EXT, FlitKind.PAYLOAD]
        assert header_from_flits(flits, fmt, 8) == (9, Coord(3, 2))


def test_words_round_trip():
    for n in range(1, 20):
        payload = bytes(range(n))
        for width in (8, 32, 12):
            words, nbits = split_words(payload, width)
            assert all(0 <= w < 1 << width for w in words)
            assert join_words(words, width, nbits) == payload
    assert circuit_words(Message("a", "b", bytes(5))) == (0, 0)


class TestFifo:
    def test_equal_clocks(self):
        run = fifo_cross(ClockCrossingFifo(100, 100, 4), list(range(200)), 100 * 10_000)
        got = [w for w, *_ in run.delivered]
        assert got == list(range(99))     # written at cycle k, read at k+1
        assert run.write_stalls == 0
        assert all(r - w == 10_000 for _, w, r in run.delivered)

    def test_fast_writer(self):
        fifo = ClockCrossingFifo(200, 100, 4)
        run = fifo_cross(fifo, list(range(5000)), 1000 * 10_000)
        reads = len(run.delivered)
        assert abs(reads - 1000) <= 1                       # throughput = read clock
        assert run.write_stalls == pytest.approx(1000, abs=5)   # half of 2000 write edges
        assert [w for w, *_ in run.delivered] == list(range(reads))
        assert all(r > w for _, w, r in run.delivered)

    def test_empty_read(self):
        fifo = ClockCrossingFifo(100, 100, 4)
        assert fifo.read(10) is None
        fifo.write(1, 10)
        assert fifo.read(10) is None
        assert fifo.read(11) == (1, 10)

    def test_full_write_stalls(self):
        fifo = ClockCrossingFifo(100, 100, 2)
        assert fifo.write(1, 0) and fifo.write(2, 0)
        assert not fifo.write(3, 0)
        assert fifo.occupancy == 2
