"""Throughput, energy efficiency and the transition-count activity proxy.

Units follow the usual TM hardware reporting convention: throughput in Op/s
(``2 F C K`` operations per inference), energy efficiency in TOp/J computed
from throughput in GOp/s and power in watts.
"""

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Optional

MODULE_SCOPES = ("pipeline", "clause_eval", "classifier", "bridge", "time_domain", "arbiter")
TIME_DOMAIN_SCOPES = ("bridge", "time_domain", "arbiter")


def ops_per_inference(F: int, C: int, K: int) -> int:
    return 2 * F * C * K


def throughput(F: int, C: int, K: int, f_infer: float) -> float:
    """Operations per second for ``f_infer`` inferences per second."""
    if min(F, C, K) <= 0 or f_infer <= 0:
        raise ValueError("dimensions and f_infer must be positive")
    return ops_per_inference(F, C, K) * f_infer


def energy_efficiency(throughput_gops: float, power_w: float) -> float:
    """TOp/J from GOp/s and watts."""
    if power_w <= 0:
        raise ValueError("power must be positive")
    return throughput_gops / (1000.0 * power_w)


def power_for(throughput_gops: float, efficiency_topj: float) -> float:
    """Power (W) that makes :func:`energy_efficiency` return ``efficiency_topj``."""
    if efficiency_topj <= 0:
        raise ValueError("efficiency must be positive")
    return throughput_gops / (1000.0 * efficiency_topj)


def infer_frequency(inferences: int, t_first_injection: int, t_last_result: int) -> float:
    """Completed inferences per second of simulated time (times in ps)."""
    if inferences < 1:
        raise ValueError("need at least one completed inference")
    span = t_last_result - t_first_injection
    if span <= 0:
        raise ValueError("zero-duration run")
    return inferences / (span * 1e-12)


def collect_transitions(kernel, scopes=MODULE_SCOPES) -> dict:
    """Sum of per-net transition counts grouped by module scope.

    Every name in ``scopes`` appears in the result (zero if the run never
    registered it); scopes outside the list are appended after them.
    """
    counts = {s: 0 for s in scopes}
    for sig in kernel.signals.values():
        counts[sig.scope] = counts.get(sig.scope, 0) + sig.transition_count
    return counts


@dataclass
class MetricsReport:
    F: int
    C: int
    K: int
    mode: str
    arbiter: str
    samples: int
    f_infer: float
    throughput: float
    agreement_rate: float
    meta_events: int
    transitions: dict = field(default_factory=dict)
    power_w: Optional[float] = None
    energy_efficiency: Optional[float] = None
    first_injection_ps: int = 0
    last_result_ps: int = 0

    @classmethod
    def build(cls, F, C, K, mode, arbiter, samples, f_infer, agreement_rate, meta_events,
              transitions, power_w=None, first_injection_ps=0, last_result_ps=0):
        tp = throughput(F, C, K, f_infer)
        ee = energy_efficiency(tp / 1e9, power_w) if power_w else None
        return cls(F, C, K, mode, arbiter, samples, f_infer, tp, agreement_rate, meta_events,
                   dict(transitions), power_w, ee, first_injection_ps, last_result_ps)

    @property
    def total_transitions(self) -> int:
        return sum(self.transitions.values())

    def row(self) -> dict:
        d = asdict(self)
        trans = d.pop("transitions")
        out = {k: d[k] for k in ("F", "C", "K", "mode", "arbiter", "samples")}
        out["f_infer_hz"] = _num(self.f_infer)
        out["throughput_gops"] = _num(self.throughput / 1e9)
        out["agreement_rate"] = _num(self.agreement_rate)
        out["meta_events"] = self.meta_events
        out["power_w"] = "" if self.power_w is None else _num(self.power_w)
        out["energy_efficiency_topj"] = "" if self.energy_efficiency is None else _num(self.energy_efficiency)
        for scope, n in trans.items():
            out[f"transitions_{scope}"] = n
        out["transitions_total"] = self.total_transitions
        out["first_injection_ps"] = self.first_injection_ps
        out["last_result_ps"] = self.last_result_ps
        return out

    def text(self) -> str:
        lines = [
            f"model        F={self.F} C={self.C} K={self.K}",
            f"mode         {self.mode} (arbiter {self.arbiter})",
            f"samples      {self.samples}",
            f"f_infer      {self.f_infer / 1e6:.3f} MHz",
            f"throughput   {self.throughput / 1e9:.4f} GOp/s",
            f"agreement    {self.agreement_rate * 100:.2f} %",
            f"meta events  {self.meta_events}",
        ]
        if self.energy_efficiency is not None:
            lines.append(f"efficiency   {self.energy_efficiency:.4f} TOp/J at P={self.power_w:g} W")
        lines.append("transition proxy (non-physical activity count):")
        for scope, n in self.transitions.items():
            lines.append(f"  {scope:<12} {n}")
        lines.append(f"  {'total':<12} {self.total_transitions}")
        return "\n".join(lines) + "\n"


def _num(x: float) -> str:
    return repr(float(x))


def rows_to_csv(rows) -> str:
    rows = list(rows)
    if not rows:
        return ""
    keys = list(dict.fromkeys(k for r in rows for k in r))
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=keys, lineterminator="\n", restval="")
    w.writeheader()
    w.writerows(rows)
    return out.getvalue()
