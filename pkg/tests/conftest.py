from typing import Dict, Iterable, Optional

import pytest

from hybridnoc.model import Coord, IpAssignment, Layer, build_mesh, mesh_router_config


def make_mesh(width: int, height: int, local_ips: int = 1, freq: float = 100.0,
              c_members: Optional[Dict[Coord, Iterable[int]]] = None, **cfg_kw):
    """Mesh with an IP named ``ip<x><y>_<port>`` on every local port.

    ``c_members`` marks local ports as C-layer members; the C-layer clock
    equals the router clock.
    """
    c_members = {c: set(p) for c, p in (c_members or {}).items()}
    cfgs = {}
    ips = {}
    for y in range(height):
        for x in range(width):
            c = Coord(x, y)
            cp = c_members.get(c, set())
            cfgs[c] = mesh_router_config(c, width, height, local_ips=local_ips, c_ports=len(cp), **cfg_kw)
            for p in range(local_ips):
                ips[f"ip{x}{y}_{p}"] = IpAssignment(c, p, Layer.C if p in cp else Layer.P)
    return build_mesh(width, height, cfgs, ips, router_freq={c: freq for c in cfgs})


@pytest.fixture
def line2():
    """Two routers side by side, one IP each, 100 MHz (10 ns period)."""
    return make_mesh(2, 1)


ACCEPTANCE = {}


class criterion:
    """Context manager recording one PASS/FAIL line for an acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        line = f"{'PASS' if ok else 'FAIL'} criterion {self.number:>2}: {self.title}"
        ACCEPTANCE[self.number] = line + (f" ({detail})" if detail else "")
        print(ACCEPTANCE[self.number])
        return False


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
