import pytest

from meshbal.errors import EmptyReport
from meshbal.report import COLUMNS, ReportRow, csv_text, summarize, summary_text


def row(value, policy, seed, thr):
    metrics = {c: 0.0 for c in COLUMNS[4:]}
    metrics["throughput_bps"] = thr
    return ReportRow("num_stations", value, policy, seed, metrics)


def test_single_row():
    text = csv_text([row(5, "rssi", 1, 100.0)])
    lines = text.splitlines()
    assert lines[0] == ",".join(COLUMNS) and len(lines) == 2
    (_, _, n, _, imp), = summarize([row(5, "rssi", 1, 100.0)])
    assert n == 1 and imp is None


def test_improvement_and_averaging():
    rows = [row(5, "rssi", 1, 100.0), row(5, "airtime", 1, 130.0), row(5, "airtime", 2, 150.0)]
    out = {p: (n, imp) for _, p, n, _, imp in summarize(rows)}
    assert out["airtime"] == (2, pytest.approx(40.0))
    assert out["rssi"] == (1, None)
    assert "+40.0%" in summary_text(rows)


def test_stable_order():
    rows = [row(15, "rssi", 2, 1.0), row(5, "rssi", 1, 1.0), row(15, "airtime", 1, 1.0),
            row(15, "rssi", 1, 1.0)]
    keys = [tuple(line.split(",")[1:4]) for line in csv_text(rows).splitlines()[1:]]
    assert keys == [("5", "rssi", "1"), ("15", "airtime", "1"), ("15", "rssi", "1"),
                    ("15", "rssi", "2")]
    assert csv_text(rows) == csv_text(list(reversed(rows)))


def test_empty():
    with pytest.raises(EmptyReport):
        csv_text([])
    with pytest.raises(EmptyReport):
        summarize([])
