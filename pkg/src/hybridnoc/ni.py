"""
Network interface: layer selection, packetization, header encoding and
the dual-clock FIFO that separates an IP's clock from its router's.

Header layout, most-significant bits first::

    | size (ceil(log2 depth) + 1 bits) | dest_x | dest_y |

``size`` is the raw flit count of the packet (header flits included), so a
packet exactly as deep as the buffer is representable. When the header is
wider than the P-layer channel it occupies several flits, all counted in the
packet's flit count.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, List, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import NocError, SizeOutOfRange, UnknownIp
from .model import Coord, Flit, FlitKind, Layer, MeshTopology, Packet, coord_bits, period_ps


class MessageClass(str, Enum):
    CONTROL = "control"
    DATA = "data"


@dataclass(frozen=True)
class Message:
    src_ip: str
    dst_ip: Union[str, Tuple[str, ...]]   # a tuple is a C-layer multicast
    payload: bytes
    cls: MessageClass = MessageClass.DATA

    def __post_init__(self):
        if len(self.payload) < 1:
            raise NocError("message payload must be at least 1 byte")

    @property
    def bits(self) -> int:
        return 8 * len(self.payload)

    @property
    def destinations(self) -> Tuple[str, ...]:
        return self.dst_ip if isinstance(self.dst_ip, tuple) else (self.dst_ip,)


class Mode(str, Enum):
    CIRCUIT = "circuit"
    PACKET = "packet"


def choose_mode(topology: MeshTopology, src_ip: str, dst_ip: Union[str, Sequence[str]]) -> Mode:
    """Circuit iff source and every destination are C-layer members of one router."""
    dsts = (dst_ip,) if isinstance(dst_ip, str) else tuple(dst_ip)
    for ip in (src_ip, *dsts):
        if ip not in topology.ip_assignments:
            raise UnknownIp(f"unknown IP {ip!r}")
    s = topology.ip_assignments[src_ip]
    if s.layer is not Layer.C:
        return Mode.PACKET
    for d in dsts:
        a = topology.ip_assignments[d]
        if a.router != s.router or a.layer is not Layer.C:
            return Mode.PACKET
    return Mode.CIRCUIT


class Header(NamedTuple):
    size_code: int
    dest_x: int
    dest_y: int


@dataclass(frozen=True)
class HeaderFormat:
    buffer_depth: int
    x_bits: int = 1
    y_bits: int = 1

    @classmethod
    def for_mesh(cls, buffer_depth: int, width: int, height: int) -> "HeaderFormat":
        return cls(buffer_depth, coord_bits(width), coord_bits(height))

    @property
    def size_bits(self) -> int:
        return math.ceil(math.log2(self.buffer_depth)) + 1

    @property
    def bits(self) -> int:
        return self.size_bits + self.x_bits + self.y_bits

    def flits(self, channel_width: int) -> int:
        return max(1, math.ceil(self.bits / channel_width))


def encode_header(flit_count: int, dest: Coord, fmt: HeaderFormat) -> int:
    if not 1 <= flit_count <= fmt.buffer_depth:
        raise SizeOutOfRange(f"flit count {flit_count} outside [1, {fmt.buffer_depth}]")
    if not (0 <= dest.x < 1 << fmt.x_bits and 0 <= dest.y < 1 << fmt.y_bits):
        raise SizeOutOfRange(f"destination {dest} does not fit the header's coordinate fields")
    return (flit_count << (fmt.x_bits + fmt.y_bits)) | (dest.x << fmt.y_bits) | dest.y


def decode_header(bits: int, fmt: HeaderFormat) -> Tuple[int, Coord]:
    y = bits & ((1 << fmt.y_bits) - 1)
    x = (bits >> fmt.y_bits) & ((1 << fmt.x_bits) - 1)
    size = bits >> (fmt.x_bits + fmt.y_bits)
    if not 1 <= size <= fmt.buffer_depth:
        raise SizeOutOfRange(f"decoded flit count {size} outside [1, {fmt.buffer_depth}]")
    return size, Coord(x, y)


def split_words(payload: bytes, width: int) -> Tuple[Tuple[int, ...], int]:
    """Cut ``payload`` into ``width``-bit words, MSB first; the last word is zero-padded."""
    nbits = 8 * len(payload)
    n = math.ceil(nbits / width)
    value = int.from_bytes(payload, "big") << (n * width - nbits)
    mask = (1 << width) - 1
    return tuple((value >> (width * (n - 1 - i))) & mask for i in range(n)), nbits


def join_words(words: Sequence[int], width: int, nbits: int) -> bytes:
    value = 0
    for w in words:
        value = (value << width) | w
    value >>= len(words) * width - nbits
    return value.to_bytes(nbits // 8, "big")


def packetize(msg: Message, channel_width_p: int, buffer_depth: int,
              fmt: Optional[HeaderFormat] = None, first_id: int = 0,
              created_at: int = 0, message_id: int = 0) -> List[Packet]:
    """Greedy split into packets of at most ``buffer_depth`` flits, header included."""
    fmt = fmt or HeaderFormat(buffer_depth)
    hdr = fmt.flits(channel_width_p)
    room = buffer_depth - hdr
    if room < 1:
        raise SizeOutOfRange(
            f"buffer depth {buffer_depth} cannot hold a {hdr}-flit header plus payload")
    words, nbits = split_words(msg.payload, channel_width_p)
    packets = []
    for k, i in enumerate(range(0, len(words), room)):
        chunk = words[i:i + room]
        bits = min(len(chunk) * channel_width_p, nbits - i * channel_width_p)
        packets.append(Packet(first_id + k, msg.src_ip, msg.dst_ip, hdr + len(chunk),
                              chunk, created_at, bits, message_id))
    return packets


def depacketize(packets: Sequence[Packet], channel_width_p: int) -> bytes:
    words = [w for p in packets for w in p.payload]
    return join_words(words, channel_width_p, sum(p.payload_bits for p in packets))


def packet_flits(packet: Packet, dest: Coord, fmt: HeaderFormat, channel_width_p: int) -> List[Flit]:
    """Header flit(s) followed by payload flits."""
    hdr_bits = encode_header(packet.flit_count, dest, fmt)
    n = fmt.flits(channel_width_p)
    fields = (packet.flit_count, dest.x, dest.y)
    mask = (1 << channel_width_p) - 1
    out = []
    for i in range(n):
        chunk = (hdr_bits >> (channel_width_p * (n - 1 - i))) & mask
        if i == 0:
            out.append(Flit(packet.id, FlitKind.HEADER, 0, chunk, fields))
        else:
            out.append(Flit(packet.id, FlitKind.HEADER_EXT, i, chunk))
    for j, w in enumerate(packet.payload):
        out.append(Flit(packet.id, FlitKind.PAYLOAD, n + j, w))
    return out


def header_from_flits(flits: Sequence[Flit], fmt: HeaderFormat, channel_width_p: int) -> Tuple[int, Coord]:
    bits = 0
    for f in flits[:fmt.flits(channel_width_p)]:
        bits = (bits << channel_width_p) | f.data
    return decode_header(bits, fmt)


def circuit_words(msg: Message, width: int = 32) -> Tuple[int, ...]:
    """C-layer transfers carry no header: the schedule does the addressing."""
    return split_words(msg.payload, width)[0]


@dataclass
class ClockCrossingFifo:
    """Dual-clock FIFO; a word becomes readable on the first read edge after its write edge."""
    write_mhz: float
    read_mhz: float
    depth: int
    items: Deque[Tuple[int, int]] = field(default_factory=deque)   # (word, write tick)

    @property
    def occupancy(self) -> int:
        return len(self.items)

    @property
    def full(self) -> bool:
        return len(self.items) >= self.depth

    def write(self, word: int, tick: int) -> bool:
        if self.full:
            return False
        self.items.append((word, tick))
        return True

    def read(self, tick: int) -> Optional[Tuple[int, int]]:
        if self.items and self.items[0][1] < tick:
            return self.items.popleft()
        return None


@dataclass
class FifoRun:
    delivered: List[Tuple[int, int, int]]   # (word, write tick, read tick)
    write_stalls: int
    read_idles: int
    duration_ps: int

    def throughput_words_per_us(self) -> float:
        return len(self.delivered) / (self.duration_ps / 1e6)


def fifo_cross(fifo: ClockCrossingFifo, words: Sequence[int], duration_ps: int) -> FifoRun:
    """Push ``words`` through ``fifo`` with a greedy writer and an always-ready reader.

    A full FIFO stalls the writer; nothing is dropped.
    """
    pw, pr = period_ps(fifo.write_mhz), period_ps(fifo.read_mhz)
    pending = deque(words)
    delivered, stalls, idles = [], 0, 0
    tw, tr = pw, pr
    while min(tw, tr) <= duration_ps:
        # write edge first on ties; the word is still not readable until a later read edge
        if tw <= tr:
            if pending:
                if fifo.write(pending[0], tw):
                    pending.popleft()
                else:
                    stalls += 1
            tw += pw
        else:
            got = fifo.read(tr)
            if got is None:
                idles += 1
            else:
                delivered.append((got[0], got[1], tr))
            tr += pr
    return FifoRun(delivered, stalls, idles, duration_ps)
