"""End-to-end accelerator model on one event kernel.

Samples enter a three-stage click pipeline (clause evaluation, class-sum
computation, output latch). The last stage hands its token either to a
digital argmax classifier or, through a two-phase/four-phase bridge, to the
time-domain race path and the winner-takes-all arbiter. The arbiter's grant,
joined with the four-phase request in a C-element, is the completion signal
that closes the handshake.
"""

from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence, get_args

import numpy as np

from .arbitration import DETERMINISTIC, MESH, TBA, MutexModel, build_arbiter
from .handshake import CElementGate, ClickPipeline, PhaseBridge, TokenSource, Violation
from .kernel import ANY, RISING, Kernel, OrGate, Wire
from .metrics import MODULE_SCOPES, MetricsReport, collect_transitions, infer_frequency
from .model import COALESCED, MULTICLASS, Sample, TmModel
from .reference import argmax_class, infer
from .timedomain import (ARCHITECTURAL, IDEAL, RacePath, TimeDomainConfig, TimingConfigError,
                         resolve_config, sum_bit_width)

DIGITAL = "digital-oracle"
HAMMING = "hamming-td"
COTM_IDEAL = "cotm-ideal"
COTM_ARCH = "cotm-architectural"
MODES = (DIGITAL, HAMMING, COTM_IDEAL, COTM_ARCH)
TOPOLOGIES = (TBA, MESH)


class ConfigError(ValueError):
    """Invalid run configuration (unknown key, bad value, mode/model mismatch)."""


@dataclass(frozen=True)
class PipelineConfig:
    forward_delay: int = 100
    fire_to_phase_delay: int = 20
    ack_delay: int = 0
    clause_delay: int = 60
    sum_delay: int = 80
    latch_delay: int = 10


@dataclass(frozen=True)
class BridgeConfig:
    delay: int = 10
    timeout: int = 1_000_000
    done_delay: int = 0


@dataclass(frozen=True)
class ArbiterConfig:
    d_mutex: int = 30
    delta_meta: int = 5
    meta_penalty: int = 0
    policy: str = DETERMINISTIC
    d_or: int = 15
    d_celement: int = 25

    def mutex(self) -> MutexModel:
        return MutexModel(self.d_mutex, self.delta_meta, self.meta_penalty, self.policy)


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run besides the model and the samples."""
    mode: str = HAMMING
    arbiter: str = TBA
    seed: int = 0
    serialized: bool = False
    gap: int = 0
    digital_delay: int = 100
    power_w: Optional[float] = None
    pipeline: PipelineConfig = PipelineConfig()
    bridge: BridgeConfig = BridgeConfig()
    timing: TimeDomainConfig = TimeDomainConfig()
    mutex: ArbiterConfig = ArbiterConfig()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.arbiter not in TOPOLOGIES:
            raise ConfigError(f"unknown arbiter {self.arbiter!r}; expected tba or mesh")
        if self.gap < 0 or self.digital_delay <= 0:
            raise ConfigError("run.gap must be >= 0 and run.digital_delay > 0")
        if self.power_w is not None and self.power_w <= 0:
            raise ConfigError("run.power_w must be positive")
        try:
            self.mutex.mutex()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


# -- flat key = value configuration -------------------------------------------

_SECTIONS = {"pipeline": PipelineConfig, "bridge": BridgeConfig, "timing": TimeDomainConfig,
             "arbiter": ArbiterConfig}
_ATTR = {"pipeline": "pipeline", "bridge": "bridge", "timing": "timing", "arbiter": "mutex"}
_RUN_KEYS = ("mode", "arbiter", "seed", "serialized", "gap", "digital_delay", "power_w")

CONFIG_HELP = {
    "run.mode": "digital-oracle | hamming-td | cotm-ideal | cotm-architectural",
    "run.arbiter": "winner-takes-all topology: tba | mesh",
    "run.seed": "seed for metastability policy draws",
    "run.serialized": "inject the next sample only after the previous result",
    "run.gap": "ps between an input acknowledgment and the next injection",
    "run.digital_delay": "ps from token arrival to one-hot class output (digital-oracle)",
    "run.power_w": "user-supplied power for energy efficiency (empty: not reported)",
    "pipeline.forward_delay": "matched request delay per stage, ps",
    "pipeline.fire_to_phase_delay": "fire rise to phase toggle, ps",
    "pipeline.ack_delay": "acknowledgment wire delay between stages, ps",
    "pipeline.clause_delay": "clause evaluation datapath delay, ps",
    "pipeline.sum_delay": "class-sum datapath delay, ps",
    "pipeline.latch_delay": "output latch datapath delay, ps",
    "bridge.delay": "two-phase/four-phase interface delay, ps",
    "bridge.timeout": "ps before a missing completion is reported as a deadlock",
    "bridge.done_delay": "completion C-element delay, ps",
    "timing.tau": "coarse unit delay, ps",
    "timing.e": "fine resolution bits (fine unit tau/2^e)",
    "timing.tdc_resolution": "Vernier TDC step, ps",
    "timing.dcde_step": "DCDE delay per code step, ps",
    "timing.dcde_base": "DCDE base delay, ps (empty: sized from the model)",
    "timing.tau_hamming": "per-unit Hamming distance delay, ps",
    "timing.mode": "overridden by run.mode for coalesced runs",
    "timing.decode": "TDC code mapping: linear | lod",
    "timing.launch_skew": "extra delay of the M rail launch, ps",
    "timing.tdc_latency": "TDC conversion latency, ps",
    "timing.reset_delay": "race net return-to-zero delay, ps",
    "arbiter.d_mutex": "Mutex propagation delay, ps",
    "arbiter.delta_meta": "metastability window, ps",
    "arbiter.meta_penalty": "extra grant delay of a metastable resolution, ps",
    "arbiter.policy": "deterministic-low-index | seeded-random",
    "arbiter.d_or": "tree OR gate delay, ps",
    "arbiter.d_celement": "tree C-element delay, ps",
}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def config_items(cfg: RunConfig) -> list[tuple[str, str]]:
    items = [(f"run.{k}", _fmt(getattr(cfg, k))) for k in _RUN_KEYS]
    for section, attr in _ATTR.items():
        sub = getattr(cfg, attr)
        items += [(f"{section}.{f.name}", _fmt(getattr(sub, f.name))) for f in fields(sub)]
    return items


def dump_config(cfg: RunConfig, comments: bool = True) -> str:
    lines = []
    section = None
    for key, value in config_items(cfg):
        sec = key.split(".")[0]
        if sec != section:
            if section is not None:
                lines.append("")
            lines.append(f"# [{sec}]")
            section = sec
        if comments and key in CONFIG_HELP:
            lines.append(f"# {CONFIG_HELP[key]}")
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _coerce(key: str, raw: str, annotation):
    raw = raw.strip()
    args = [a for a in get_args(annotation) if a is not type(None)]
    kind = args[0] if args else annotation
    if raw == "" or raw.lower() == "none":
        if args:    # Optional[...]
            return None
        raise ConfigError(f"{key}: value required")
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {raw!r}")
    if kind in (int, float):
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from None
    return raw


def apply_overrides(cfg: RunConfig, pairs: Sequence[tuple[str, str]]) -> RunConfig:
    """Return ``cfg`` with dotted ``key = value`` overrides applied."""
    run_fields = {f.name: f for f in fields(RunConfig)}
    run_updates: dict = {}
    sub_updates: dict = {s: {} for s in _SECTIONS}
    for key, raw in pairs:
        key = key.strip()
        if "." not in key:
            raise ConfigError(f"unknown config key {key!r} (use section.name)")
        section, name = key.split(".", 1)
        if section == "run":
            if name not in _RUN_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            f = run_fields[name]
            run_updates[name] = _coerce(key, raw, f.type)
        elif section in _SECTIONS:
            sub_fields = {f.name: f for f in fields(_SECTIONS[section])}
            if name not in sub_fields:
                raise ConfigError(f"unknown config key {key!r}")
            sub_updates[section][name] = _coerce(key, raw, sub_fields[name].type)
        else:
            raise ConfigError(f"unknown config section {section!r}")
    try:
        for section, upd in sub_updates.items():
            if upd:
                run_updates[_ATTR[section]] = replace(getattr(cfg, _ATTR[section]), **upd)
        out = replace(cfg, **run_updates)
    except (TimingConfigError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    out.validate()
    return out


def parse_config_text(text: str) -> list[tuple[str, str]]:
    pairs = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def scaled_fine_unit(cfg: TimeDomainConfig, e: int) -> TimeDomainConfig:
    """Change ``e`` while keeping the fine unit fixed, so tau = unit * 2^e."""
    return replace(cfg, e=e, tau=cfg.fine_unit << e)


# -- per-sample record ----------------------------------------------------------

@dataclass
class SampleRecord:
    index: int
    label: Optional[int]
    oracle: int
    sums: list
    prediction: Optional[int] = None
    inject_time: Optional[int] = None
    grant_time: Optional[int] = None
    meta_events: int = 0
    delays: list = field(default_factory=list)
    S: list = field(default_factory=list)
    M: list = field(default_factory=list)
    kf_s: list = field(default_factory=list)
    kf_m: list = field(default_factory=list)
    dc: list = field(default_factory=list)
    code: list = field(default_factory=list)

    @property
    def agree(self) -> bool:
        return self.prediction == self.oracle

    def row(self) -> dict:
        j = lambda xs: ";".join(str(int(x)) for x in xs)
        kf = lambda xs: ";".join(f"{k}:{f}" for k, f in xs)
        return {
            "sample": self.index,
            "label": "" if self.label is None else self.label,
            "oracle": self.oracle,
            "prediction": "" if self.prediction is None else self.prediction,
            "agree": int(self.agree),
            "sums": j(self.sums),
            "S": j(self.S),
            "M": j(self.M),
            "kf_S": kf(self.kf_s),
            "kf_M": kf(self.kf_m),
            "dc": j(self.dc),
            "code": j(self.code),
            "delays_ps": j(self.delays),
            "inject_ps": "" if self.inject_time is None else self.inject_time,
            "grant_ps": "" if self.grant_time is None else self.grant_time,
            "meta_events": self.meta_events,
        }


@dataclass
class SimulationResult:
    config: RunConfig
    model: TmModel
    records: list
    kernel: Kernel
    violations: list
    diagnostics: list
    report: Optional[MetricsReport]

    @property
    def agreement_rate(self) -> float:
        return sum(r.agree for r in self.records) / len(self.records) if self.records else 0.0

    @property
    def predictions(self) -> list:
        return [r.prediction for r in self.records]


# -- the system -----------------------------------------------------------------

def check_compatible(model: TmModel, mode: str) -> None:
    if mode == HAMMING and model.variant != MULTICLASS:
        raise ConfigError("hamming-td needs a multiclass model")
    if mode in (COTM_IDEAL, COTM_ARCH) and model.variant != COALESCED:
        raise ConfigError(f"{mode} needs a coalesced model")


def _bits(value: int, width: int) -> list[int]:
    return [(int(value) >> i) & 1 for i in range(width)]


class Accelerator:
    """One kernel instance holding the full datapath for ``model``."""

    def __init__(self, model: TmModel, cfg: RunConfig, kernel: Optional[Kernel] = None):
        cfg.validate()
        check_compatible(model, cfg.mode)
        self.model, self.cfg = model, cfg
        self.kernel = k = kernel or Kernel()
        pc = cfg.pipeline
        if cfg.mode in (COTM_IDEAL, COTM_ARCH):
            kind = IDEAL if cfg.mode == COTM_IDEAL else ARCHITECTURAL
            try:
                self.timing = resolve_config(model, replace(cfg.timing, mode=kind))
            except TimingConfigError as exc:
                raise ConfigError(str(exc)) from None
        else:
            self.timing = cfg.timing
        self.records: dict[int, SampleRecord] = {}
        self._current: Optional[int] = None
        self._diagnostics: list[str] = []

        self.pipeline = ClickPipeline(
            k, 3, pc.forward_delay, pc.fire_to_phase_delay, pc.ack_delay,
            datapath_delays=[pc.clause_delay, pc.sum_delay, pc.latch_delay],
            stage_functions=[self._evaluate_clauses, self._compute_sums, None])
        self._build_datapath_nets()
        self.source: Optional[TokenSource] = None
        if cfg.mode == DIGITAL:
            self._build_digital()
        else:
            self._build_time_domain()

    # -- datapath nets (activity only; values come from the reference model) --
    def _build_datapath_nets(self) -> None:
        k, m = self.kernel, self.model
        self.lit_nets = [k.signal(f"lit_{i}", "clause_eval") for i in range(2 * m.num_features)]
        n_clauses = m.num_clauses * (m.num_classes if m.variant == MULTICLASS else 1)
        self.clause_nets = [k.signal(f"clause_{j}", "clause_eval") for j in range(n_clauses)]
        K = m.num_classes
        if self.cfg.mode == DIGITAL:
            self.width = sum_bit_width(m) + 1   # two's complement sums
            self.sum_nets = [[k.signal(f"sum_{i}_b{b}", "classifier") for b in range(self.width)]
                             for i in range(K)]
        elif self.cfg.mode == HAMMING:
            self.width = int(m.num_clauses).bit_length()
            self.sum_nets = [[k.signal(f"score_{i}_b{b}", "time_domain") for b in range(self.width)]
                             for i in range(K)]
        else:
            self.width = sum_bit_width(m)
            self.s_nets = [[k.signal(f"S_{i}_b{b}", "time_domain") for b in range(self.width)]
                           for i in range(K)]
            self.m_nets = [[k.signal(f"M_{i}_b{b}", "time_domain") for b in range(self.width)]
                           for i in range(K)]

    def _drive(self, nets, values, delay) -> None:
        k = self.kernel
        for net, v in zip(nets, values):
            k.schedule(net, v, k.now + delay)

    def _evaluate_clauses(self, token):
        idx, sample = token
        res = infer(self.model, sample)
        self._drive(self.lit_nets, res.literals, self.cfg.pipeline.clause_delay)
        self._drive(self.clause_nets, np.ravel(res.clauses), self.cfg.pipeline.clause_delay)
        return idx, res

    def _compute_sums(self, token):
        idx, res = token
        rec = self.records[idx]
        d = self.cfg.pipeline.sum_delay
        m = self.model
        if self.cfg.mode == DIGITAL:
            for nets, s in zip(self.sum_nets, res.sums):
                self._drive(nets, _bits(int(s) & ((1 << self.width) - 1), self.width), d)
        elif self.cfg.mode == HAMMING:
            for nets, s in zip(self.sum_nets, res.sums):
                self._drive(nets, _bits(int(s) + m.num_clauses // 2, self.width), d)
        else:
            w = m.weights * res.clauses[None, :]
            S = np.where(w < 0, -w, 0).sum(axis=1)
            M = np.where(w > 0, w, 0).sum(axis=1)
            rec.S, rec.M = [int(x) for x in S], [int(x) for x in M]
            for i in range(m.num_classes):
                self._drive(self.s_nets[i], _bits(S[i], self.width), d)
                self._drive(self.m_nets[i], _bits(M[i], self.width), d)
        return idx, res

    # -- digital argmax back end ----------------------------------------------
    def _build_digital(self) -> None:
        k = self.kernel
        self.class_nets = [k.signal(f"class_{i}", "classifier") for i in range(self.model.num_classes)]
        k.on_edge(self.pipeline.out_req, ANY, self._digital_request)

    def _digital_request(self, _sig) -> None:
        k = self.kernel
        idx, res = self.pipeline.data[-1]
        pred = argmax_class(res.sums)
        t = k.now + self.cfg.digital_delay
        for i, net in enumerate(self.class_nets):
            k.schedule(net, int(i == pred), t)

        def done() -> None:
            rec = self.records[idx]
            rec.prediction, rec.grant_time = pred, k.now
            k.schedule(self.pipeline.out_ack, 1 - k.value(self.pipeline.out_ack), k.now)
        k.call_at(t, done)

    # -- time-domain back end -------------------------------------------------
    def _build_time_domain(self) -> None:
        k, cfg = self.kernel, self.cfg
        bc = cfg.bridge
        self.bridge = PhaseBridge(k, self.pipeline.out_req, bc.delay, bc.timeout)
        Wire(k, self.bridge.ack2, self.pipeline.out_ack, 0)
        # registered before the race path so the payload is loaded at launch
        k.on_edge(self.bridge.req4, RISING, self._launch)
        kind = {HAMMING: "hamming", COTM_IDEAL: IDEAL, COTM_ARCH: ARCHITECTURAL}[cfg.mode]
        self.race = RacePath(k, self.model, self.timing, kind, self.bridge.req4)
        mc = cfg.mutex
        self.arbiter = build_arbiter(k, cfg.arbiter, self.race.race, mc.mutex(), mc.d_or, mc.d_celement)
        self.any_grant = k.signal("any_grant", "arbiter")
        OrGate(k, self.arbiter.grant, self.any_grant)
        CElementGate(k, [self.bridge.req4, self.any_grant], self.bridge.done4, bc.done_delay)
        for i, g in enumerate(self.arbiter.grant):
            k.on_edge(g, RISING, self._granted(i))

    def sample_seed(self, idx: int) -> int:
        return int(np.random.SeedSequence([self.cfg.seed, idx]).generate_state(1)[0])

    def _launch(self, _sig) -> None:
        idx, res = self.pipeline.data[-1]
        self._current = idx
        self.race.load(res.clauses)
        self.arbiter.begin(self.sample_seed(idx))

    def _granted(self, i: int):
        def on(_sig) -> None:
            idx = self._current
            if idx is None:
                self._diagnostics.append(f"grant_{i} at t={self.kernel.now} ps with no sample in flight")
                return
            rec = self.records[idx]
            if rec.prediction is not None:
                self._diagnostics.append(f"sample {idx}: second grant at t={self.kernel.now} ps")
                return
            gv = self.arbiter.results[-1]
            rec.prediction, rec.grant_time, rec.meta_events = i, self.kernel.now, gv.meta_events
            plan = self.race.plan
            rec.delays = [int(x) for x in plan.arrivals]
            if self.cfg.mode == COTM_ARCH:
                rec.kf_s = [tuple(c.s_cf) for c in plan.classes]
                rec.kf_m = [tuple(c.m_cf) for c in plan.classes]
                rec.dc = [m["dc"] for m in self.race.measured]
                rec.code = [m["code"] for m in self.race.measured]
            elif self.cfg.mode == COTM_IDEAL:
                rec.code = [int(c.code) for c in plan.classes]
        return on

    # -- running --------------------------------------------------------------
    def run(self, samples: Sequence) -> SimulationResult:
        k, cfg = self.kernel, self.cfg
        tokens = []
        for idx, s in enumerate(samples):
            if not isinstance(s, Sample):
                s = Sample(np.asarray(s, dtype=np.uint8))
            ref = infer(self.model, s)
            self.records[idx] = SampleRecord(idx, s.label, ref.prediction, [int(x) for x in ref.sums])
            tokens.append((idx, s))
        self.source = TokenSource(k, self.pipeline, tokens, [cfg.gap] * len(tokens),
                                  serialized=cfg.serialized)
        if cfg.serialized:
            k.on_edge(self.pipeline.out_ack, ANY, lambda _s: self.source.release())
        k.run()
        records = [self.records[i] for i in range(len(tokens))]
        for rec, t in zip(records, self.source.inject_times):
            rec.inject_time = t
        return self._finish(records)

    def violations(self) -> list[Violation]:
        out = list(self.pipeline.violations)
        if self.cfg.mode != DIGITAL:
            out += self.bridge.violations
            out += [Violation(t, "arbiter", f"grant vector not one-hot: {v}")
                    for t, v in self.arbiter.monitor.violations]
        return sorted(out, key=lambda v: v.time)

    def _finish(self, records) -> SimulationResult:
        diags = list(self._diagnostics)
        if self.cfg.mode != DIGITAL:
            diags += self.bridge.diagnostics
        missing = [r.index for r in records if r.prediction is None]
        if missing:
            diags.append(f"no result for samples {missing}")
        report = None
        done = [r for r in records if r.grant_time is not None]
        if done:
            t0 = min(r.inject_time for r in records if r.inject_time is not None)
            t1 = max(r.grant_time for r in done)
            m = self.model
            meta = sum(r.meta_events for r in records)
            try:
                f = infer_frequency(len(done), t0, t1)
                report = MetricsReport.build(
                    m.num_features, m.num_clauses, m.num_classes, self.cfg.mode, self.cfg.arbiter,
                    len(records), f, sum(r.agree for r in records) / len(records), meta,
                    collect_transitions(self.kernel, MODULE_SCOPES), self.cfg.power_w, t0, t1)
            except ValueError as exc:
                diags.append(str(exc))
        return SimulationResult(self.cfg, self.model, records, self.kernel, self.violations(), diags, report)


def simulate(model: TmModel, samples: Sequence, cfg: RunConfig = RunConfig()) -> SimulationResult:
    """Run ``samples`` through a fresh accelerator instance."""
    return Accelerator(model, cfg).run(samples)


def records_rows(result: SimulationResult) -> list[dict]:
    rows = []
    for r in result.records:
        row = {"mode": result.config.mode, "arbiter": result.config.arbiter}
        row.update(r.row())
        rows.append(row)
    return rows


def default_mode(model: TmModel) -> str:
    return HAMMING if model.variant == MULTICLASS else COTM_ARCH


__all__ = [
    "Accelerator", "ArbiterConfig", "BridgeConfig", "ConfigError", "PipelineConfig", "RunConfig",
    "SampleRecord", "SimulationResult", "apply_overrides", "config_items", "dump_config",
    "parse_config_text", "records_rows", "scaled_fine_unit", "simulate", "check_compatible",
    "default_mode", "DIGITAL", "HAMMING", "COTM_IDEAL", "COTM_ARCH", "MODES",
]
