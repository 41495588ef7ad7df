"""
TOML topology files.

::

    [mesh]
    width = 4
    height = 4
    auto_ips = true           # one P-layer IP on every unassigned local port

    [router_defaults]         # any RouterConfig field, plus clocks
    local_ips = 1
    buffer_depth = 16
    freq_mhz = 300

    [router.1.1]              # per-router override, keyed by x then y
    local_ips = 4
    c_ports = 3
    c_freq_mhz = 318

    [ip.cpu0]
    router = [1, 1]
    port = 0
    layer = "C"

Router clocks not given here come from the component library.
"""

import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

try:
    import tomllib
except ModuleNotFoundError:   # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, ParseError
from .model import Coord, IpAssignment, Layer, MeshTopology, build_mesh, mesh_router_config

MESH_KEYS = {"width", "height", "auto_ips"}
ROUTER_KEYS = {"local_ips", "c_ports", "channel_width_p", "channel_width_c", "vcs_per_port",
               "buffer_depth", "c_port_cap", "freq_mhz", "c_freq_mhz"}
IP_KEYS = {"router", "port", "layer", "freq_mhz"}
TOP_KEYS = {"mesh", "router_defaults", "router", "ip"}


def line_of(text: str, key: str, after: Optional[str] = None) -> int:
    """Best-effort 1-based line of ``key = ...`` (or a table header), searching after ``after``."""
    lines = text.splitlines()
    start = 0
    if after is not None:
        pat = re.compile(r"^\s*\[+\s*" + re.escape(after) + r"\s*\]+")
        for i, ln in enumerate(lines):
            if pat.match(ln):
                start = i
                break
    kpat = re.compile(r"^\s*\[*\s*\"?" + re.escape(key) + r"\"?\s*[=\]]")
    for i in range(start, len(lines)):
        if kpat.match(lines[i]):
            return i + 1
    return start + 1 if after is not None else 0


def read_toml(path: Union[str, Path]) -> Tuple[Dict[str, Any], str]:
    text = Path(path).read_text()
    try:
        return tomllib.loads(text), text
    except tomllib.TOMLDecodeError as e:
        raise ParseError(f"{path}: {e}") from None


def _coord(value, where: str, errors: List[str]) -> Optional[Coord]:
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
        return Coord(value[0], value[1])
    errors.append(f"{where}: expected [x, y], got {value!r}")
    return None


def _check_keys(table: dict, allowed: set, where: str, path, text, header, errors):
    for k in table:
        if k not in allowed:
            errors.append(f"{path}:{line_of(text, k, header)}: unknown key {k!r} in {where} "
                          f"(allowed: {', '.join(sorted(allowed))})")


def _int_fields(table: dict, where: str, errors: List[str]) -> Dict[str, Any]:
    out = {}
    for k, v in table.items():
        if k in ("freq_mhz", "c_freq_mhz"):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                errors.append(f"{where}: {k} must be a number")
                continue
            out[k] = float(v)
        elif k in ROUTER_KEYS:
            if not isinstance(v, int) or isinstance(v, bool):
                errors.append(f"{where}: {k} must be an integer")
                continue
            out[k] = v
    return out


def topology_from_dict(doc: Dict[str, Any], text: str = "", path: str = "<topology>") -> MeshTopology:
    errors: List[str] = []
    _check_keys(doc, TOP_KEYS, "the top level", path, text, None, errors)
    mesh = doc.get("mesh")
    if not isinstance(mesh, dict):
        raise ParseError(f"{path}: missing [mesh] table")
    _check_keys(mesh, MESH_KEYS, "[mesh]", path, text, "mesh", errors)
    w, h = mesh.get("width"), mesh.get("height")
    for name, v in (("width", w), ("height", h)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            errors.append(f"{path}:{line_of(text, name, 'mesh')}: [mesh] {name} must be an integer >= 1")
    defaults = doc.get("router_defaults", {})
    _check_keys(defaults, ROUTER_KEYS, "[router_defaults]", path, text, "router_defaults", errors)
    base = _int_fields(defaults, f"{path}: [router_defaults]", errors)
    overrides: Dict[Coord, Dict[str, Any]] = {}
    routers = doc.get("router", {})
    if not isinstance(routers, dict):
        errors.append(f"{path}: 'router' must be tables named [router.<x>.<y>]")
        routers = {}
    for xs, col in routers.items():
        if not isinstance(col, dict) or not all(isinstance(v, dict) for v in col.values()):
            errors.append(f"{path}:{line_of(text, 'router.' + xs)}: expected [router.<x>.<y>] tables")
            continue
        for ys, r in col.items():
            header = f"router.{xs}.{ys}"
            where = f"{path}:{line_of(text, header)}: [{header}]"
            if not (xs.isdigit() and ys.isdigit()):
                errors.append(f"{where}: router coordinates must be non-negative integers")
                continue
            _check_keys(r, ROUTER_KEYS, f"[{header}]", path, text, header, errors)
            overrides[Coord(int(xs), int(ys))] = _int_fields(r, where, errors)
    ips: Dict[str, IpAssignment] = {}
    ip_freq: Dict[str, float] = {}
    for name, t in sorted(doc.get("ip", {}).items()):
        where = f"{path}:{line_of(text, 'ip.' + name)}: [ip.{name}]"
        if not isinstance(t, dict):
            errors.append(f"{where}: must be a table")
            continue
        _check_keys(t, IP_KEYS, f"[ip.{name}]", path, text, "ip." + name, errors)
        c = _coord(t.get("router"), f"{where} router", errors)
        port = t.get("port", 0)
        if not isinstance(port, int) or isinstance(port, bool):
            errors.append(f"{where}: port must be an integer")
            continue
        try:
            layer = Layer(str(t.get("layer", "P")).upper())
        except ValueError:
            errors.append(f"{where}: layer must be 'P' or 'C', got {t.get('layer')!r}")
            continue
        if "freq_mhz" in t:
            ip_freq[name] = float(t["freq_mhz"])
        if c is not None:
            ips[name] = IpAssignment(c, port, layer)
    valid_dims = all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in (w, h))
    coords = [Coord(x, y) for y in range(h) for x in range(w)] if valid_dims else []
    for c in overrides:
        if valid_dims and c not in coords:
            errors.append(f"{path}:{line_of(text, f'router.{c.x}.{c.y}')}: [router.{c.x}.{c.y}] "
                          f"is outside the {w}x{h} mesh")
    if errors:
        raise ParseError("\n".join(errors), errors)
    cfgs, rf, cf = {}, {}, {}
    for c in coords:
        f = dict(base)
        f.update(overrides.get(c, {}))
        if "freq_mhz" in f:
            rf[c] = f.pop("freq_mhz")
        if "c_freq_mhz" in f:
            cf[c] = f.pop("c_freq_mhz")
        cfgs[c] = mesh_router_config(c, w, h, **f)
    if mesh.get("auto_ips", False):
        used = {(a.router, a.port) for a in ips.values()}
        for c in coords:
            for p in range(cfgs[c].local_ips):
                if (c, p) not in used:
                    ips[f"ip_{c.x}_{c.y}_{p}"] = IpAssignment(c, p)
    return build_mesh(w, h, cfgs, ips, rf, ip_freq, cf)


def load_topology(path: Union[str, Path]) -> MeshTopology:
    doc, text = read_toml(path)
    try:
        return topology_from_dict(doc, text, str(path))
    except ParseError:
        raise
    except ConfigError as e:
        raise type(e)(f"{path}: {e}", [f"{path}: {p}" for p in e.problems]) from None
