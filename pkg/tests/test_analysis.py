import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scartrack.analysis import (
    AreaEntry,
    AreaSeries,
    area,
    area_series,
    boundary,
    detect_spikes,
    expansion_diff,
    interannual_pairs,
    percent_change,
    relative_error,
    seasonal_split,
    series_from_csv,
    series_to_csv,
)
from scartrack.errors import ArgumentError, DimensionError
from scartrack.raster import BinaryMask
from scartrack.synthetic import growing_scar_sequence

from oracles import spikes_oracle


def mask_of(bits, cell=1.0):
    return BinaryMask.from_bits(np.asarray(bits, dtype=bool), cell_size=cell)


def series_of(areas, start=dt.date(2018, 1, 1), step=10, cell=1.0):
    entries = [
        AreaEntry(frame_index=i, date=start + dt.timedelta(days=step * i), area_m2=float(a))
        for i, a in enumerate(areas)
    ]
    return AreaSeries(entries=entries, cell_size=cell)


class TestArea:
    def test_empty_mask(self):
        assert area(mask_of(np.zeros((4, 4)))) == 0.0

    def test_ten_cells_at_two_meters(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits.ravel()[:10] = True
        assert area(mask_of(bits, cell=2.0)) == 40.0

    def test_full_mask(self):
        assert area(mask_of(np.ones((3, 7)), cell=10.0)) == 3 * 7 * 100.0

    def test_additive_over_disjoint_and_monotone(self):
        rng = np.random.default_rng(0)
        a = rng.random((8, 8)) < 0.3
        b = (rng.random((8, 8)) < 0.3) & ~a
        assert area(mask_of(a | b)) == area(mask_of(a)) + area(mask_of(b))
        assert area(mask_of(a | b)) >= area(mask_of(a))


class TestAreaSeries:
    def test_entries_follow_frames(self):
        seq, truths = growing_scar_sequence(n_frames=5, size=48, start_cells=40, end_cells=200)
        series = area_series(truths, seq)
        assert len(series) == 5
        assert [e.frame_index for e in series.entries] == list(range(5))
        assert [e.date for e in series.entries] == [f.date for f in seq.frames]
        areas = series.areas()
        assert areas == sorted(areas)  # generator growth is monotone

    def test_missing_mask_is_gap_error(self):
        seq, truths = growing_scar_sequence(n_frames=3, size=32, start_cells=20, end_cells=60)
        with pytest.raises(ArgumentError, match="frame 1"):
            area_series([truths[0], None, truths[2]], seq)

    def test_count_mismatch(self):
        seq, truths = growing_scar_sequence(n_frames=3, size=32, start_cells=20, end_cells=60)
        with pytest.raises(ArgumentError):
            area_series(truths[:2], seq)

    def test_csv_round_trip(self):
        series = series_of([100.0, 250.5, 90.25])
        rt = series_from_csv(series_to_csv(series), cell_size=series.cell_size)
        assert rt.entries == series.entries


class TestPaperArithmetic:
    def test_relative_error_matches_reported_value(self):
        assert relative_error(2.32e5, 2.28e5) == pytest.approx(1.75, abs=0.01)

    def test_relative_error_of_exact_match(self):
        assert relative_error(123.0, 123.0) == 0.0

    def test_relative_error_needs_positive_reference(self):
        with pytest.raises(ArgumentError):
            relative_error(1.0, 0.0)

    def test_percent_change_53(self):
        assert percent_change(2.32e5, 3.55e5) == pytest.approx(53.0, abs=0.5)

    def test_percent_change_330(self):
        assert percent_change(2.823e4, 1.212e5) == pytest.approx(329.3, abs=1.0)

    def test_percent_change_signed(self):
        assert percent_change(200.0, 100.0) == -50.0
        assert percent_change(100.0, 100.0) == 0.0

    def test_percent_change_needs_positive_baseline(self):
        with pytest.raises(ArgumentError):
            percent_change(0.0, 10.0)


class TestSeasonalSplit:
    def test_paper_examples(self):
        series = series_of([1, 2], start=dt.date(2018, 6, 5), step=155)
        # entries on 2018-06-05 and 2018-11-07
        parts = seasonal_split(series)
        assert [e.date.month for e in parts["summer_autumn"].entries] == [6]
        assert [e.date.month for e in parts["winter_spring"].entries] == [11]

    @given(st.lists(st.integers(0, 1000), min_size=1, max_size=40), st.integers(0, 2**20))
    @settings(max_examples=40)
    def test_partition_property(self, areas, seed):
        rng = np.random.default_rng(seed)
        start = dt.date(2017, 1, 1) + dt.timedelta(days=int(rng.integers(0, 365)))
        series = series_of(areas, start=start, step=int(rng.integers(1, 90)))
        parts = seasonal_split(series)
        merged = sorted(parts["summer_autumn"].entries + parts["winter_spring"].entries,
                        key=lambda e: e.frame_index)
        assert merged == series.entries
        months = {e.date.month for e in parts["summer_autumn"].entries}
        assert months <= {6, 7, 8, 9, 10}


class TestSpikes:
    def test_single_spike_detected(self):
        series = series_of([100, 105, 110, 108, 112, 400])
        events = detect_spikes(series, factor=2.0, window=5)
        assert len(events) == 1
        e = events[0]
        assert e.frame_index == 5
        assert e.baseline_m2 == 108.0
        assert e.ratio == pytest.approx(400 / 108)

    def test_constant_series_has_no_spikes(self):
        assert detect_spikes(series_of([50] * 10), 2.0, 5) == []

    def test_constant_zero_series_has_no_spikes(self):
        assert detect_spikes(series_of([0] * 10), 2.0, 5) == []

    def test_slow_growth_has_no_spikes(self):
        areas = [100.0 * 1.01 ** i for i in range(40)]
        assert detect_spikes(series_of(areas), 2.0, 5) == []

    def test_zero_baseline_jump_is_spike(self):
        events = detect_spikes(series_of([0, 0, 0, 0, 0, 300]), 2.0, 5)
        assert len(events) == 1 and events[0].ratio == float("inf")

    def test_window_validation(self):
        with pytest.raises(ArgumentError):
            detect_spikes(series_of([1, 2, 3]), 2.0, 3)
        with pytest.raises(ArgumentError):
            detect_spikes(series_of([1, 2, 3]), 1.0, 1)

    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=2, max_size=200),
           st.floats(1.1, 5.0), st.integers(1, 10))
    @settings(max_examples=60)
    def test_matches_brute_force(self, areas, factor, window):
        if window >= len(areas):
            window = len(areas) - 1
        series = series_of(areas)
        events = detect_spikes(series, factor=factor, window=window)
        assert [e.frame_index for e in events] == spikes_oracle(areas, factor, window)


class TestBoundary:
    def test_single_cell(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits[2, 2] = True
        out = boundary(mask_of(bits))
        assert out.bits.tolist() == bits.tolist()

    def test_solid_3x3_block_gives_perimeter(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits[1:4, 1:4] = True
        out = boundary(mask_of(bits))
        expected = bits.copy()
        expected[2, 2] = False
        assert np.array_equal(out.bits, expected)
        assert out.count == 8

    def test_empty_mask(self):
        assert boundary(mask_of(np.zeros((3, 3)))).count == 0

    def test_full_grid_boundary_is_grid_edge(self):
        out = boundary(mask_of(np.ones((4, 6))))
        expected = np.ones((4, 6), dtype=bool)
        expected[1:-1, 1:-1] = False
        assert np.array_equal(out.bits, expected)

    @given(st.integers(0, 2**31))
    @settings(max_examples=40)
    def test_boundary_subset_and_neighbor_rule(self, seed):
        rng = np.random.default_rng(seed)
        bits = rng.random((7, 9)) < 0.5
        out = boundary(mask_of(bits)).bits
        assert not np.any(out & ~bits)
        h, w = bits.shape
        for r in range(h):
            for c in range(w):
                if not bits[r, c]:
                    continue
                exposed = False
                for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    nr, nc = r + dr, c + dc
                    if not (0 <= nr < h and 0 <= nc < w) or not bits[nr, nc]:
                        exposed = True
                assert out[r, c] == exposed


class TestExpansionDiff:
    def test_identical_masks(self):
        m = mask_of(np.eye(4), cell=2.0)
        diff = expansion_diff(m, m)
        assert diff.new_area.count == 0 and diff.lost_area.count == 0
        assert diff.net_m2 == 0.0

    def test_reference_subset_of_current(self):
        ref = mask_of([[True, False, False]], cell=2.0)
        cur = mask_of([[True, True, False]], cell=2.0)
        diff = expansion_diff(ref, cur)
        assert diff.lost_area.count == 0
        assert diff.new_area.bits.tolist() == [[False, True, False]]
        assert diff.net_m2 == 4.0

    def test_antisymmetry(self):
        rng = np.random.default_rng(3)
        a = mask_of(rng.random((6, 6)) < 0.5, cell=3.0)
        b = mask_of(rng.random((6, 6)) < 0.5, cell=3.0)
        fwd = expansion_diff(a, b)
        rev = expansion_diff(b, a)
        assert np.array_equal(fwd.new_area.bits, rev.lost_area.bits)
        assert np.array_equal(fwd.lost_area.bits, rev.new_area.bits)
        assert fwd.net_m2 == -rev.net_m2

    @given(st.integers(0, 2**31))
    @settings(max_examples=40)
    def test_net_equals_new_minus_lost(self, seed):
        rng = np.random.default_rng(seed)
        a = mask_of(rng.random((8, 8)) < 0.4, cell=2.0)
        b = mask_of(rng.random((8, 8)) < 0.4, cell=2.0)
        diff = expansion_diff(a, b)
        assert area(diff.new_area) - area(diff.lost_area) == pytest.approx(diff.net_m2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            expansion_diff(mask_of([[True]]), mask_of([[True, False]]))


class TestInterannualPairs:
    def entry(self, i, date, a=100.0):
        return AreaEntry(frame_index=i, date=date, area_m2=a)

    def test_november_pairing(self):
        series = AreaSeries(entries=[
            self.entry(0, dt.date(2018, 11, 27)),
            self.entry(1, dt.date(2019, 11, 27)),
        ], cell_size=1.0)
        pairs = interannual_pairs(series, 11)
        assert len(pairs) == 1
        assert pairs[0][0].date.year == 2018 and pairs[0][1].date.year == 2019

    def test_year_without_window_frame_is_excluded(self):
        series = AreaSeries(entries=[
            self.entry(0, dt.date(2018, 11, 10)),
            self.entry(1, dt.date(2019, 5, 1)),
            self.entry(2, dt.date(2020, 11, 20)),
        ], cell_size=1.0)
        pairs = interannual_pairs(series, 11)
        assert len(pairs) == 1
        assert (pairs[0][0].date.year, pairs[0][1].date.year) == (2018, 2020)

    def test_nearest_to_midpoint_wins(self):
        series = AreaSeries(entries=[
            self.entry(0, dt.date(2018, 11, 2)),
            self.entry(1, dt.date(2018, 11, 14)),
            self.entry(2, dt.date(2018, 11, 30)),
            self.entry(3, dt.date(2019, 11, 16)),
        ], cell_size=1.0)
        pairs = interannual_pairs(series, 11)
        assert pairs[0][0].frame_index == 1  # Nov 14 nearest Nov 15 midpoint

    def test_month_range_window(self):
        series = AreaSeries(entries=[
            self.entry(0, dt.date(2018, 6, 20)),
            self.entry(1, dt.date(2019, 9, 1)),
        ], cell_size=1.0)
        pairs = interannual_pairs(series, (6, 10))
        assert len(pairs) == 1

    def test_bad_window_rejected(self):
        series = AreaSeries(entries=[self.entry(0, dt.date(2018, 1, 1))], cell_size=1.0)
        with pytest.raises(ArgumentError):
            interannual_pairs(series, 13)
