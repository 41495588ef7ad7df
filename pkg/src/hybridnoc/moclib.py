"""
MoClib: area / frequency characterization of hybrid router instances.

MC(x, y, z) names an instance with x total ports, y C-layer ports and z
P-layer ports. The shipped calibration file holds the twelve placed-and-routed
Virtex-4 instances; anything else is estimated from per-axis linear fits.
"""

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, InsufficientData, NoMatchWithinTolerance
from .model import RouterConfig

# Published claim for the area-matched comparison, printed next to our numbers.
PUBLISHED_MEAN_GAIN_PCT = 20.4
PUBLISHED_MAX_GAIN_PCT = 24.0

CALIBRATED_MAX_PORTS = 8
DEFAULT_TOLERANCE_PCT = 5.0
DEFAULT_C_SLOT_SHARE = 0.5
SCHEDULE_BITS_PER_SLICE = 64


@dataclass(frozen=True)
class MoClibEntry:
    x: int
    y: int
    z: int
    area: float        # slices
    frequency: float   # MHz
    source: str = "interpolated"
    extrapolated: bool = False

    @property
    def label(self) -> str:
        return f"MC({self.x},{self.y},{self.z})"

    @property
    def is_hybrid(self) -> bool:
        return self.y > 0


def _parse_rows(text: str, origin: str) -> Tuple[MoClibEntry, ...]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        e = MoClibEntry(int(rec["x"]), int(rec["y"]), int(rec["z"]),
                        float(rec["area_slices"]), float(rec["freq_mhz"]), rec["source"])
        if e.x != e.y + e.z:
            raise ConfigError(f"{origin}: {e.label} has x != y + z")
        if e.area <= 0 or e.frequency <= 0:
            raise ConfigError(f"{origin}: {e.label} needs positive area and frequency")
        rows.append(e)
    return tuple(rows)


def load_library(path: Union[str, Path, None] = None) -> Tuple[MoClibEntry, ...]:
    """Calibration rows, from ``path`` or the bundled Virtex-4 data."""
    if path is None:
        text = resources.files("hybridnoc").joinpath("data/moclib.csv").read_text()
        return _parse_rows(text, "moclib.csv")
    return _parse_rows(Path(path).read_text(), str(path))


_DEFAULT: Optional[Tuple[MoClibEntry, ...]] = None


def default_library() -> Tuple[MoClibEntry, ...]:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_library()
    return _DEFAULT


@dataclass(frozen=True)
class AxisFit:
    slope: float
    intercept: float
    residuals: Tuple[float, ...]

    def __call__(self, v: float) -> float:
        return self.intercept + self.slope * v


def fit_line(xs: Sequence[float], ys: Sequence[float]) -> AxisFit:
    if len(xs) < 2 or len(set(xs)) < 2:
        raise InsufficientData("need at least two distinct points for a linear fit")
    a = np.column_stack([np.asarray(xs, float), np.ones(len(xs))])
    (slope, icpt), *_ = np.linalg.lstsq(a, np.asarray(ys, float), rcond=None)
    res = tuple(float(y - (icpt + slope * x)) for x, y in zip(xs, ys))
    return AxisFit(float(slope), float(icpt), res)


@dataclass(frozen=True)
class ScaleModel:
    """Marginal per-port deltas, fitted one axis at a time.

    The P-port axis is fitted on the pure packet-switched rows (y = 0). The
    C-port delta is then the through-origin slope of what the P-axis fit
    leaves unexplained in the hybrid rows.
    """
    area_p: AxisFit
    freq_p: AxisFit
    area_per_c_port: float
    freq_per_c_port: float
    area_c_residuals: Tuple[float, ...]
    freq_c_residuals: Tuple[float, ...]

    def area(self, y: int, z: int) -> float:
        return self.area_p(z) + self.area_per_c_port * y

    def frequency(self, y: int, z: int) -> float:
        return self.freq_p(z) + self.freq_per_c_port * y

    def report(self) -> str:
        rms = lambda r: float(np.sqrt(np.mean(np.square(r)))) if r else 0.0
        return "\n".join([
            "per-port scaling fit",
            f"  area      {self.area_p.slope:+8.2f} slices/P-port  {self.area_per_c_port:+8.2f} slices/C-port"
            f"  rms residual P {rms(self.area_p.residuals):.2f}, C {rms(self.area_c_residuals):.2f}",
            f"  frequency {self.freq_p.slope:+8.2f} MHz/P-port     {self.freq_per_c_port:+8.2f} MHz/C-port"
            f"  rms residual P {rms(self.freq_p.residuals):.2f}, C {rms(self.freq_c_residuals):.2f}",
        ])


def scale_model(library: Optional[Iterable[MoClibEntry]] = None) -> ScaleModel:
    lib = list(library if library is not None else default_library())
    base = sorted((e for e in lib if e.y == 0), key=lambda e: e.z)
    hyb = sorted((e for e in lib if e.y > 0), key=lambda e: (e.x, e.y))
    if len({e.z for e in base}) < 2:
        raise InsufficientData("need >= 2 baseline (y = 0) entries with distinct z")
    if len({e.y for e in hyb}) < 1 or len(hyb) < 2:
        raise InsufficientData("need >= 2 hybrid (y > 0) entries")
    area_p = fit_line([e.z for e in base], [e.area for e in base])
    freq_p = fit_line([e.z for e in base], [e.frequency for e in base])

    def through_origin(fit, attr):
        ys = np.array([e.y for e in hyb], float)
        r = np.array([getattr(e, attr) - fit(e.z) for e in hyb])
        k = float(ys @ r / (ys @ ys))
        return k, tuple(float(v) for v in r - k * ys)

    ka, ra = through_origin(area_p, "area")
    kf, rf = through_origin(freq_p, "frequency")
    return ScaleModel(area_p, freq_p, ka, kf, ra, rf)


def lookup(x: int, y: int, z: int,
           library: Optional[Iterable[MoClibEntry]] = None) -> MoClibEntry:
    """Exact calibration row when present, otherwise a fitted estimate."""
    if x != y + z:
        raise ConfigError(f"MC({x},{y},{z}): x must equal y + z")
    lib = list(library if library is not None else default_library())
    for e in lib:
        if (e.x, e.y, e.z) == (x, y, z):
            return e
    m = scale_model(lib)
    xs = [e.x for e in lib]
    extrap = x > CALIBRATED_MAX_PORTS or x < min(xs) or x > max(xs)
    return MoClibEntry(x, y, z, m.area(y, z), m.frequency(y, z), "interpolated", extrap)


class Accounting(str, Enum):
    AGGREGATE = "aggregate"
    TDM_SHARED = "tdm-shared"


@dataclass(frozen=True)
class Bandwidth:
    aggregate_mbps: float
    per_port_mbps: float
    accounting: Accounting


def switch_bandwidth(entry: MoClibEntry, cfg: Optional[RouterConfig] = None,
                     accounting: Union[Accounting, str] = Accounting.AGGREGATE,
                     c_slot_shares: Union[float, Sequence[float]] = DEFAULT_C_SLOT_SHARE) -> Bandwidth:
    """Ports x frequency x channel width, in MB/s.

    ``aggregate`` credits every C-port with the full cross-point width each
    cycle. ``tdm-shared`` credits C-port i with only its share of schedule
    slots as a source (``c_slot_shares``, one value or one per C-port).
    """
    accounting = Accounting(accounting)
    cfg = cfg or RouterConfig.mc(entry.x, entry.y, entry.z)
    if (cfg.total_ports, cfg.c_ports, cfg.p_ports) != (entry.x, entry.y, entry.z):
        raise ConfigError(f"{cfg.label} does not match {entry.label}")
    f = entry.frequency
    p_bits = entry.z * cfg.channel_width_p
    if accounting is Accounting.AGGREGATE:
        c_bits = entry.y * cfg.channel_width_c
    else:
        shares = ([c_slot_shares] * entry.y if isinstance(c_slot_shares, (int, float))
                  else list(c_slot_shares))
        if len(shares) != entry.y:
            raise ConfigError(f"{entry.label}: need {entry.y} slot shares, got {len(shares)}")
        c_bits = sum(cfg.channel_width_c * s for s in shares)
    agg = (p_bits + c_bits) * f / 8.0
    return Bandwidth(agg, agg / entry.x if entry.x else 0.0, accounting)


@dataclass(frozen=True)
class GainRow:
    hybrid: MoClibEntry
    baseline: MoClibEntry
    bw_hybrid: float
    bw_baseline: float
    accounting: Accounting

    @property
    def gain_pct(self) -> float:
        return (self.bw_hybrid - self.bw_baseline) / self.bw_baseline * 100.0


@dataclass
class GainReport:
    rows: List[GainRow]
    unmatched: List[MoClibEntry] = field(default_factory=list)
    tolerance_pct: float = DEFAULT_TOLERANCE_PCT

    def for_accounting(self, acc) -> List[GainRow]:
        acc = Accounting(acc)
        return [r for r in self.rows if r.accounting is acc]

    def mean_gain(self, acc) -> float:
        rows = self.for_accounting(acc)
        return sum(r.gain_pct for r in rows) / len(rows)

    def max_gain(self, acc) -> float:
        return max(r.gain_pct for r in self.for_accounting(acc))

    def accountings(self) -> List[Accounting]:
        seen = []
        for r in self.rows:
            if r.accounting not in seen:
                seen.append(r.accounting)
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hybrid", "baseline", "area_h", "area_b", "bw_h", "bw_b", "gain_pct", "accounting"])
        for r in self.rows:
            w.writerow([r.hybrid.label, r.baseline.label, f"{r.hybrid.area:g}", f"{r.baseline.area:g}",
                        f"{r.bw_hybrid:.3f}", f"{r.bw_baseline:.3f}", f"{r.gain_pct:.3f}",
                        r.accounting.value])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"area-matched hybrid vs baseline, tolerance {self.tolerance_pct:g}% of slices"]
        for acc in self.accountings():
            lines.append(f"  {acc.value:<11} mean gain {self.mean_gain(acc):7.2f}%  "
                         f"max gain {self.max_gain(acc):7.2f}%  ({len(self.for_accounting(acc))} pairs)")
        lines.append(f"  published   mean gain {PUBLISHED_MEAN_GAIN_PCT:7.2f}%  max gain {PUBLISHED_MAX_GAIN_PCT:7.2f}%")
        lines.append("  note: the published figures do not state their bandwidth accounting; "
                     "they are shown for comparison, not reproduced")
        if self.unmatched:
            lines.append("  unmatched: " + ", ".join(e.label for e in self.unmatched))
        return "\n".join(lines)


def _key(e: MoClibEntry):
    return (e.x, e.y, e.z)


def area_matched_comparison(library: Optional[Iterable[MoClibEntry]] = None,
                            tolerance_pct: float = DEFAULT_TOLERANCE_PCT,
                            accountings: Sequence[Union[Accounting, str]] = tuple(Accounting),
                            c_slot_share: float = DEFAULT_C_SLOT_SHARE) -> GainReport:
    """Pair each hybrid instance with the nearest-area baseline and compare per-port bandwidth.

    Area distance is relative to the hybrid's area. Hybrids with no baseline
    inside the tolerance are listed as unmatched; if none match at all,
    NoMatchWithinTolerance is raised.
    """
    lib = sorted(library if library is not None else default_library(), key=_key)
    hybrids = [e for e in lib if e.y > 0]
    bases = [e for e in lib if e.y == 0]
    if not hybrids or not bases:
        raise InsufficientData("library needs both hybrid (y > 0) and baseline (y = 0) entries")
    accs = [Accounting(a) for a in accountings]
    rows, unmatched = [], []
    pairs = []
    for h in hybrids:
        best = min(bases, key=lambda b: (abs(b.area - h.area), _key(b)))
        if abs(best.area - h.area) / h.area * 100.0 <= tolerance_pct:
            pairs.append((h, best))
        else:
            unmatched.append(h)
    if not pairs:
        raise NoMatchWithinTolerance(
            f"no hybrid instance has a baseline within {tolerance_pct}% area")
    for acc in accs:
        for h, b in pairs:
            bh = switch_bandwidth(h, accounting=acc, c_slot_shares=c_slot_share).per_port_mbps
            bb = switch_bandwidth(b, accounting=acc, c_slot_shares=c_slot_share).per_port_mbps
            rows.append(GainRow(h, b, bh, bb, acc))
    return GainReport(rows, unmatched, tolerance_pct)


def schedule_area_slices(c_ports: int, slots: int, bits_per_slice: int = SCHEDULE_BITS_PER_SLICE) -> float:
    """Slice-equivalents of schedule memory for ``slots`` TDM slots."""
    from .clayer import schedule_bits
    return schedule_bits(c_ports, slots) / bits_per_slice


def table_text(library: Optional[Iterable[MoClibEntry]] = None) -> str:
    """Calibration rows rendered like the published tables."""
    lib = list(library if library is not None else default_library())
    out = []
    for title, pick in (("C-layer port scaling", lambda e: e.y > 0),
                        ("P-layer port scaling", lambda e: e.y == 0)):
        out.append(title)
        out.append(f"{'MoClib Component':<18}{'Area (Slices)':>14}{'Frequency (MHz)':>17}")
        for e in (e for e in lib if pick(e)):
            out.append(f"{'MC (%d,%d,%d)' % (e.x, e.y, e.z):<18}{e.area:>14g}{e.frequency:>17g}")
        out.append("")
    return "\n".join(out)


def table_csv(library: Optional[Iterable[MoClibEntry]] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "x", "y", "z", "area_slices", "freq_mhz", "source"])
    for e in (library if library is not None else default_library()):
        w.writerow([e.label, e.x, e.y, e.z, f"{e.area:g}", f"{e.frequency:g}", e.source])
    return buf.getvalue()


def schedule_memory_csv(c_ports: Sequence[int] = (2, 3, 4), slots: Sequence[int] = (1, 2, 4, 8, 16, 32, 64),
                        bits_per_slice: int = SCHEDULE_BITS_PER_SLICE) -> str:
    """Schedule-memory growth data (bits and slice-equivalents) for plotting."""
    from .clayer import schedule_bits
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["c_ports", "slots", "bits", "slices"])
    for c in c_ports:
        for s in slots:
            b = schedule_bits(c, s)
            w.writerow([c, s, b, f"{b / bits_per_slice:g}"])
    return buf.getvalue()
