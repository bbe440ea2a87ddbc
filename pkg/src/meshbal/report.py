"""CSV rows and a plain-text summary for one or more runs."""

import csv
import io
from collections import OrderedDict
from dataclasses import dataclass

from .errors import EmptyReport

COLUMNS = (
    "sweep_var", "sweep_value", "policy", "seed", "throughput_bps", "avg_tx_delay_us",
    "client_access_delay_us", "ap_access_delay_us", "e2e_delay_us", "dropped_bits",
    "handoffs", "mean_balance_index",
)

# CSV column -> RunMetrics attribute
METRIC_FIELDS = OrderedDict([
    ("throughput_bps", "throughput_bps"),
    ("avg_tx_delay_us", "avg_tx_delay_us"),
    ("client_access_delay_us", "avg_client_access_delay_us"),
    ("ap_access_delay_us", "avg_ap_access_delay_us"),
    ("e2e_delay_us", "avg_e2e_delay_us"),
    ("dropped_bits", "dropped_bits"),
    ("handoffs", "handoffs"),
    ("mean_balance_index", "mean_balance_index"),
])


@dataclass
class ReportRow:
    sweep_var: str
    sweep_value: object
    policy: str
    seed: int
    metrics: dict      # CSV metric column -> value

    @classmethod
    def from_metrics(cls, sweep_var, sweep_value, policy, seed, run_metrics):
        values = {col: getattr(run_metrics, attr) for col, attr in METRIC_FIELDS.items()}
        return cls(sweep_var, sweep_value, policy, seed, values)

    def sort_key(self):
        return (_value_key(self.sweep_value), self.policy, self.seed)


def _value_key(v):
    # Numbers sort numerically and before any text value.
    if isinstance(v, (int, float)):
        return (0, float(v), "")
    return (1, 0.0, str(v))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def csv_text(rows):
    if not rows:
        raise EmptyReport("no rows to report")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in sorted(rows, key=ReportRow.sort_key):
        w.writerow([r.sweep_var, _fmt(r.sweep_value), r.policy, r.seed]
                   + [_fmt(r.metrics[c]) for c in METRIC_FIELDS])
    return buf.getvalue()


def summarize(rows, baseline="rssi"):
    """Mean of every metric per (value, policy), with the run count.

    Returns ``[(value, policy, count, means, improvement)]`` where
    ``improvement`` is the throughput change over ``baseline`` in percent,
    or None when the baseline is absent (or is this row).
    """
    if not rows:
        raise EmptyReport("no rows to summarize")
    groups = OrderedDict()
    for r in sorted(rows, key=ReportRow.sort_key):
        groups.setdefault((r.sweep_value, r.policy), []).append(r)
    means = {}
    for key, members in groups.items():
        means[key] = {c: sum(m.metrics[c] for m in members) / len(members)
                      for c in METRIC_FIELDS}
    out = []
    for (value, policy), members in groups.items():
        m = means[(value, policy)]
        base = means.get((value, baseline))
        improvement = None
        if base is not None and policy != baseline and base["throughput_bps"] != 0:
            improvement = improvement_pct(m["throughput_bps"], base["throughput_bps"])
        out.append((value, policy, len(members), m, improvement))
    return out


def improvement_pct(x, base):
    return (x - base) / base * 100.0


def summary_text(rows, baseline="rssi"):
    lines = [f"{'value':>10} {'policy':<22} {'n':>3} {'thr Mb/s':>9} {'e2e ms':>9} "
             f"{'drop kb':>9} {'handoffs':>8} {'b':>6} {'vs ' + baseline:>10}"]
    for value, policy, n, m, imp in summarize(rows, baseline):
        lines.append(
            f"{_fmt(value):>10} {policy:<22} {n:>3} {m['throughput_bps'] / 1e6:>9.3f} "
            f"{m['e2e_delay_us'] / 1e3:>9.2f} {m['dropped_bits'] / 1e3:>9.1f} "
            f"{m['handoffs']:>8.1f} {m['mean_balance_index']:>6.3f} "
            f"{'' if imp is None else f'{imp:+.1f}%':>10}")
    return "\n".join(lines) + "\n"
