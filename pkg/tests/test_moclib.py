import random

import pytest

from hybridnoc import moclib
from hybridnoc.errors import InsufficientData, NoMatchWithinTolerance
from hybridnoc.model import RouterConfig
from hybridnoc.moclib import (Accounting, MoClibEntry, area_matched_comparison, default_library, lookup,
                              scale_model, schedule_area_slices, switch_bandwidth)

# (x, y, z) -> (slices, MHz), typed in from the published synthesis tables
GOLDEN = {
    (4, 2, 2): (314, 336), (5, 3, 2): (326, 318), (5, 2, 3): (341, 303),
    (6, 3, 3): (394, 240), (6, 2, 4): (382, 258), (7, 3, 4): (440, 221),
    (3, 0, 3): (296, 378), (4, 0, 4): (318, 362), (5, 0, 5): (349, 324),
    (6, 0, 6): (390, 296), (7, 0, 7): (435, 267), (8, 0, 8): (493, 229),
}


def closed_form_slope(xs, ys):
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)


class TestLookup:
    def test_golden(self):
        assert len(default_library()) == 12
        for (x, y, z), (a, f) in GOLDEN.items():
            e = lookup(x, y, z)
            assert (e.area, e.frequency) == (a, f)
            assert e.source == ("table-1" if y else "table-2")

    def test_examples(self):
        assert (lookup(4, 2, 2).area, lookup(4, 2, 2).frequency) == (314, 336)
        assert (lookup(6, 0, 6).area, lookup(6, 0, 6).frequency) == (390, 296)
        assert (lookup(7, 3, 4).area, lookup(7, 3, 4).frequency) == (440, 221)

    def test_interpolated(self):
        e = lookup(6, 1, 5)
        assert e.source == "interpolated" and not e.extrapolated
        m = scale_model()
        assert e.area == pytest.approx(m.area_p(5) + m.area_per_c_port)
        assert lookup(5, 0, 5).area < e.area < lookup(7, 3, 4).area

    def test_extrapolation_flagged(self):
        assert lookup(9, 2, 7).extrapolated
        assert lookup(10, 0, 10).extrapolated


class TestScaleModel:
    def test_p_axis_slope(self):
        m = scale_model()
        zs = [z for (x, y, z) in GOLDEN if y == 0]
        areas = [GOLDEN[(z, 0, z)][0] for z in zs]
        assert m.area_p.slope == pytest.approx(closed_form_slope(zs, areas), rel=1e-12)
        assert m.area_p.slope == pytest.approx(39.34, abs=0.01)
        assert len(m.area_p.residuals) == 6

    def test_p_port_step_in_table(self):
        assert lookup(6, 3, 3).area - lookup(5, 3, 2).area == 68

    def test_published_frequency_monotone(self):
        for hybrid in (True, False):
            rows = sorted((k, v) for k, v in GOLDEN.items() if (k[1] > 0) == hybrid)
            by_x = {}
            for (x, y, z), (a, f) in rows:
                by_x.setdefault(x, []).append(f)
            xs = sorted(by_x)
            for lo, hi in zip(xs, xs[1:]):
                assert max(by_x[hi]) < min(by_x[lo])

    def test_model_frequency_nonincreasing(self):
        m = scale_model()
        for y in range(0, 5):
            for z in range(0, 9 - y):
                if y + z + 1 > moclib.CALIBRATED_MAX_PORTS:
                    continue
                f = m.frequency(y, z)
                assert m.frequency(y + 1, z) <= f
                assert m.frequency(y, z + 1) <= f

    def test_insufficient(self):
        lib = [e for e in default_library() if e.y > 0] + [lookup(4, 0, 4)]
        with pytest.raises(InsufficientData):
            scale_model(lib)


class TestBandwidth:
    def test_mc505(self):
        bw = switch_bandwidth(lookup(5, 0, 5))
        assert bw.aggregate_mbps == pytest.approx(1620)
        assert bw.per_port_mbps == pytest.approx(324)

    def test_mc422(self):
        assert switch_bandwidth(lookup(4, 2, 2)).aggregate_mbps == pytest.approx(3360)

    def test_tdm_shared(self):
        bw = switch_bandwidth(lookup(4, 2, 2), accounting="tdm-shared", c_slot_shares=[1.0, 0.25])
        assert bw.aggregate_mbps == pytest.approx((2 * 8 + 32 * 1.25) * 336 / 8)

    def test_zero_frequency(self):
        e = MoClibEntry(4, 2, 2, 314, 0.0)
        for acc in Accounting:
            assert switch_bandwidth(e, accounting=acc).aggregate_mbps == 0

    def test_linear(self):
        e = lookup(5, 2, 3)
        e2 = MoClibEntry(5, 2, 3, e.area, 2 * e.frequency)
        for acc in Accounting:
            assert switch_bandwidth(e2, accounting=acc).aggregate_mbps == pytest.approx(
                2 * switch_bandwidth(e, accounting=acc).aggregate_mbps)
        wide = RouterConfig.mc(5, 2, 3, channel_width_p=16, channel_width_c=64)
        assert switch_bandwidth(e, wide).aggregate_mbps == pytest.approx(2 * switch_bandwidth(e).aggregate_mbps)


class TestComparison:
    def test_pairs(self):
        rep = area_matched_comparison()
        pairs = {(r.hybrid.label, r.baseline.label) for r in rep.rows}
        assert ("MC(4,2,2)", "MC(4,0,4)") in pairs
        assert len(pairs) == 6
        assert not rep.unmatched

    def test_all_gains_positive(self):
        rep = area_matched_comparison()
        for acc in Accounting:
            rows = rep.for_accounting(acc)
            assert len(rows) == 6
            assert all(r.gain_pct > 0 for r in rows)

    def test_tight_tolerance(self):
        with pytest.raises(NoMatchWithinTolerance):
            area_matched_comparison(tolerance_pct=0.1)

    def test_order_independent(self):
        lib = list(default_library())
        ref = area_matched_comparison(lib).to_csv()
        rng = random.Random(3)
        for _ in range(10):
            rng.shuffle(lib)
            assert area_matched_comparison(lib).to_csv() == ref

    def test_csv_columns_and_summary(self):
        rep = area_matched_comparison()
        assert rep.to_csv().splitlines()[0] == "hybrid,baseline,area_h,area_b,bw_h,bw_b,gain_pct,accounting"
        s = rep.summary()
        assert "20.40%" in s and "24.00%" in s


def test_schedule_area_linear():
    vals = [schedule_area_slices(4, s) for s in range(1, 33)]
    steps = {round(b - a, 9) for a, b in zip(vals, vals[1:])}
    assert steps == {8 / 64}    # 4 selects x 2 bits per slot, 64 bits per slice
