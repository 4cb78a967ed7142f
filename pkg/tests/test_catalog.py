import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from etaslin.catalog import (CatalogError, CatalogParseError,
                             EmptyCatalogError, EventCatalog,
                             ObservationWindow, history_before, parse_catalog,
                             read_catalog, write_catalog)

W = ObservationWindow(0.0, 10.0, 3.0)


def test_parse_sorts_rows():
    cat = parse_catalog("time,magnitude\n0.0,6.0\n1.5,3.2\n0.7,4.1\n", W)
    assert len(cat) == 3
    np.testing.assert_array_equal(cat.times, [0.0, 0.7, 1.5])
    np.testing.assert_array_equal(cat.magnitudes, [6.0, 4.1, 3.2])
    assert cat.n_dropped == 0


def test_parse_drops_below_cutoff():
    cat = parse_catalog("time,magnitude\n0.0,6.0\n1.0,2.9\n2.0,3.0\n", W)
    assert cat.n_dropped == 1
    np.testing.assert_array_equal(cat.times, [0.0, 2.0])


def test_parse_drops_outside_window():
    cat = parse_catalog("time magnitude\n-1 4\n5 4\n10.5 4\n", W)
    assert cat.n_dropped == 2 and len(cat) == 1


def test_parse_error_names_line():
    text = "time,magnitude\n0.0,6.0\n# comment\nabc,3.2\n"
    with pytest.raises(CatalogParseError, match="line 4") as info:
        parse_catalog(text, W)
    assert info.value.line == 4


def test_parse_extra_columns_and_whitespace():
    text = "# exported\nid  magnitude depth time\n1 4.0 10 2.0\n2 3.5 11 1.0\n"
    cat = parse_catalog(text, W)
    np.testing.assert_array_equal(cat.times, [1.0, 2.0])


def test_parse_missing_column():
    with pytest.raises(CatalogParseError, match="header"):
        parse_catalog("t,magnitude\n1,4\n", W)


def test_parse_short_row():
    with pytest.raises(CatalogParseError, match="line 3"):
        parse_catalog("time,magnitude\n1,4\n2\n", W)


def test_empty_after_filtering():
    with pytest.raises(EmptyCatalogError):
        parse_catalog("time,magnitude\n1,2.0\n", W)
    with pytest.raises(EmptyCatalogError):
        parse_catalog("", W)


def test_ties_rejected_by_default():
    with pytest.raises(CatalogError, match="tied"):
        parse_catalog("time,magnitude\n1,4\n1,5\n", W)


def test_ties_jittered():
    cat = parse_catalog("time,magnitude\n1,4\n1,5\n1,6\n2,3\n", W,
                        jitter_ties=1e-9)
    assert np.all(np.diff(cat.times) > 0)
    np.testing.assert_allclose(cat.times[:3], [1 - 2e-9, 1 - 1e-9, 1.0])
    # the k-th duplicate in file order keeps its own magnitude
    np.testing.assert_array_equal(cat.magnitudes[:3], [6, 5, 4])


def test_window_invariants():
    with pytest.raises(CatalogError):
        ObservationWindow(5.0, 5.0, 3.0)
    with pytest.raises(CatalogError):
        EventCatalog([2.0, 1.0], [4, 4], W)
    with pytest.raises(CatalogError):
        EventCatalog([1.0], [2.0], W)
    with pytest.raises(CatalogError):
        EventCatalog([11.0], [4.0], W)


def test_catalog_is_read_only():
    cat = EventCatalog([1.0, 2.0], [4.0, 5.0], W)
    with pytest.raises(ValueError):
        cat.times[0] = 0.5


def test_history_before_examples():
    cat = EventCatalog([0.0, 0.7, 1.5], [6.0, 4.1, 3.2], W)
    assert [e.time for e in history_before(cat, 0.7)] == [0.0]
    assert history_before(cat, W.t_start) == []
    assert len(history_before(cat, W.t_end)) == 3


def test_relative_times_and_pairs():
    cat = EventCatalog([3.0, 4.0, 6.0], [3.0, 3.5, 4.0],
                       ObservationWindow(2.0, 8.0, 3.0))
    np.testing.assert_array_equal(cat.rel_times, [1.0, 2.0, 4.0])
    np.testing.assert_array_equal(cat.rel_magnitudes, [0.0, 0.5, 1.0])
    target, source = cat.pairs
    assert list(zip(target, source)) == [(1, 0), (2, 0), (2, 1)]


def test_file_round_trip(tmp_path):
    cat = EventCatalog([0.1, 1 / 3, 2.0], [3.1, 4.0 + 1e-12, 5.5], W)
    path = tmp_path / "c.csv"
    write_catalog(cat, path)
    assert read_catalog(path, W) == cat


catalogs = st.lists(
    st.tuples(st.floats(0, 10, allow_nan=False),
              st.floats(3, 9, allow_nan=False)),
    min_size=1, max_size=40, unique_by=lambda r: r[0])


@given(catalogs)
@settings(max_examples=60, deadline=None)
def test_serialize_parse_identity(rows):
    rows.sort()
    cat = EventCatalog([r[0] for r in rows], [r[1] for r in rows], W)
    again = parse_catalog(cat.to_text(), W)
    assert again == cat
    assert again.to_text() == cat.to_text()


@given(catalogs, st.floats(0, 10))
@settings(max_examples=60, deadline=None)
def test_history_partitions_catalog(rows, t):
    rows.sort()
    cat = EventCatalog([r[0] for r in rows], [r[1] for r in rows], W)
    before = history_before(cat, t)
    after = [e for e in cat if e.time >= t]
    assert all(e.time < t for e in before)
    assert before + after == cat.events
