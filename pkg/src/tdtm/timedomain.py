"""Time-domain classification datapath.

Multi-class models race one pulse per class whose delay shrinks with the
class's Hamming score. Coalesced models split each signed class sum into a
positive part ``M`` and a negative magnitude ``S``, log-compress both with a
leading-one detector into ``(k, f)`` pairs, race the two rails, digitise the
interval with a Vernier TDC and replay the code through a digitally
controlled delay element (DCDE) so that one single-rail pulse per class
reaches the winner-takes-all arbiter.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .handshake import CElementGate
from .kernel import ANY, RISING, Kernel
from .model import COALESCED, MULTICLASS, TmModel
from .reference import VariantError, argmax_class, cotm_sums

IDEAL = "ideal"
ARCHITECTURAL = "architectural"
LINEAR = "linear"
LOD = "lod"


class TimingConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TimeDomainConfig:
    tau: int = 160
    e: int = 4
    tdc_resolution: int = 10
    dcde_step: int = 10
    dcde_base: Optional[int] = None   # None: derive from the model's weight bounds
    tau_hamming: int = 50
    mode: str = ARCHITECTURAL
    decode: str = LINEAR
    launch_skew: int = 0
    tdc_latency: int = 20
    reset_delay: int = 10

    def __post_init__(self):
        if self.e < 0:
            raise TimingConfigError("e must be non-negative")
        for name in ("tau", "tdc_resolution", "dcde_step", "tau_hamming"):
            if getattr(self, name) <= 0:
                raise TimingConfigError(f"{name} must be a positive integer number of ps")
        if self.tau % (1 << self.e):
            raise TimingConfigError(
                f"tau={self.tau} ps is not divisible by 2^e={1 << self.e}; fine unit must be integer ps")
        if self.mode not in (IDEAL, ARCHITECTURAL):
            raise TimingConfigError(f"unknown mode {self.mode!r}")
        if self.decode not in (LINEAR, LOD):
            raise TimingConfigError(f"unknown decode {self.decode!r}")
        if self.tdc_latency < 0 or self.reset_delay < 0 or self.launch_skew < 0:
            raise TimingConfigError("latencies and launch skew must be non-negative")
        if self.dcde_base is not None and self.dcde_base <= 0:
            raise TimingConfigError("dcde_base must be positive")

    @property
    def fine_unit(self) -> int:
        return self.tau >> self.e


class CoarseFine(tuple):
    """``(k, f)`` pair of a leading-one detector plus its valid flag.

    ``valid`` is the detector's "any bit set" output: it tells the value 1
    (``k = 0``, nothing below) apart from the value 0, which both encode as
    ``(0, 0)``. It does not take part in equality, so a CoarseFine compares
    equal to the plain ``(k, f)`` tuple. When omitted it is inferred from the
    pair, treating ``(0, 0)`` as zero.
    """

    def __new__(cls, k: int, f: int, valid: Optional[bool] = None):
        obj = super().__new__(cls, (int(k), int(f)))
        obj.valid = bool(k or f) if valid is None else bool(valid)
        return obj

    @property
    def k(self) -> int:
        return self[0]

    @property
    def f(self) -> int:
        return self[1]

    def __repr__(self):
        return f"CoarseFine(k={self[0]}, f={self[1]})"


class SignedSplit(NamedTuple):
    S: int
    M: int


def lod_extract(value: int, e: int, bit_width: int = 32) -> CoarseFine:
    """Leading-one position ``k`` and the residual below it normalised to ``e`` bits."""
    value = int(value)
    if value < 0 or value >= 1 << bit_width:
        raise ValueError(f"{value} does not fit in {bit_width} unsigned bits")
    k = None
    for i in range(bit_width - 1, -1, -1):
        if (value >> i) & 1:
            k = i
            break
    if k is None:
        return CoarseFine(0, 0, valid=False)
    mask = (1 << k) - 1
    f = value & mask
    if k >= e:
        f >>= k - e
    else:
        f <<= e - k
    return CoarseFine(k, f, valid=True)


def coarse_fine_delay(cf: CoarseFine, cfg: TimeDomainConfig) -> int:
    return cf.k * cfg.tau + cf.f * cfg.fine_unit


def lod_reconstruct(cf, e: int) -> int:
    k, f = cf
    valid = getattr(cf, "valid", bool(k or f))
    if not valid:
        return 0
    mant = (1 << e) + f
    return mant << (k - e) if k >= e else mant >> (e - k)


def split_signed(weight_row, clause_vector) -> SignedSplit:
    w = np.asarray(weight_row, dtype=np.int64)
    c = np.asarray(clause_vector, dtype=np.int64)
    if w.shape != c.shape:
        raise ValueError("weight row and clause vector lengths differ")
    sel = w * c
    return SignedSplit(int(-sel[sel < 0].sum()), int(sel[sel > 0].sum()))


def vernier_tdc(t_start: int, t_stop: int, resolution: int) -> int:
    """Signed code for the interval ``t_stop - t_start`` (truncated toward zero)."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    delta = int(t_stop) - int(t_start)
    q = abs(delta) // resolution
    return q if delta >= 0 else -q


def decode_code(dc: int, cfg: TimeDomainConfig) -> int:
    """Map a TDC code to the DCDE setting (monotone in the measured interval)."""
    if cfg.decode == LINEAR or dc == 0:
        return dc
    span = abs(dc) * cfg.tdc_resolution
    cf = CoarseFine(span // cfg.tau, (span % cfg.tau) // cfg.fine_unit, valid=True)
    mag = lod_reconstruct(cf, cfg.e)
    return mag if dc > 0 else -mag


def dcde_delay(dc: int, cfg: TimeDomainConfig) -> int:
    base = cfg.dcde_base
    if base is None:
        raise TimingConfigError("dcde_base unresolved; call resolve_config first")
    d = base - dc * cfg.dcde_step
    if d <= 0:
        raise TimingConfigError(
            f"DCDE delay for code {dc} is {d} ps; dcde_base must exceed |dc|*dcde_step")
    return d


# -- configuration against a model ------------------------------------------

def sum_bit_width(model: TmModel) -> int:
    return max(1, int(max_magnitude(model)).bit_length())


def max_magnitude(model: TmModel) -> int:
    """Largest value either rail (or an ideal-mode |sum|) can take."""
    if model.variant == MULTICLASS:
        return model.num_clauses
    w = model.weights
    pos = np.where(w > 0, w, 0).sum(axis=1)
    neg = np.where(w < 0, -w, 0).sum(axis=1)
    return int(max(pos.max(), neg.max(), 0))


def max_code(model: TmModel, cfg: TimeDomainConfig) -> int:
    """Bound on ``|decode(dc)|`` over every input, for both cotm modes."""
    mag = max_magnitude(model)
    ideal = mag
    span = coarse_fine_delay(lod_extract(mag, cfg.e, sum_bit_width(model)), cfg) + abs(cfg.launch_skew)
    dc = span // cfg.tdc_resolution
    arch = abs(decode_code(dc, cfg))
    return max(ideal, arch)


def resolve_config(model: TmModel, cfg: TimeDomainConfig) -> TimeDomainConfig:
    """Fill in ``dcde_base`` and check the DCDE stays strictly positive."""
    need = max_code(model, cfg) * cfg.dcde_step
    if cfg.dcde_base is None:
        return replace(cfg, dcde_base=need + cfg.dcde_step)
    if cfg.dcde_base <= need:
        raise TimingConfigError(
            f"dcde_base={cfg.dcde_base} ps must exceed max|dc|*dcde_step = {need} ps")
    return cfg


# -- per-sample race plans --------------------------------------------------

def argmin_class(delays) -> int:
    """Earliest arrival; ties go to the lowest index (the arbiter's policy)."""
    return int(np.argmin(np.asarray(delays)))


def hamming_scores(model: TmModel, clause_vectors) -> np.ndarray:
    if model.variant != MULTICLASS:
        raise VariantError("hamming mode needs a multiclass model")
    cv = np.asarray(clause_vectors, dtype=np.int64)
    pos = model.polarities == 1
    return cv[:, pos].sum(axis=1) + (1 - cv[:, ~pos]).sum(axis=1)


def hamming_race_delays(model: TmModel, clause_vectors, cfg: TimeDomainConfig) -> np.ndarray:
    """Per-class delay ``(C - score) * tau_hamming``.

    ``score`` counts positive clauses that fire plus negative clauses that do
    not, which equals the signed vote sum plus ``C/2``.
    """
    scores = hamming_scores(model, clause_vectors)
    return (model.num_clauses - scores) * cfg.tau_hamming


def ideal_delays(sums, cfg: TimeDomainConfig) -> np.ndarray:
    return np.array([dcde_delay(int(s), cfg) for s in sums], dtype=np.int64)


@dataclass
class ClassRace:
    """Per-class intermediate values of the coalesced datapath."""
    sum: int
    S: int = 0
    M: int = 0
    s_cf: CoarseFine = CoarseFine(0, 0)
    m_cf: CoarseFine = CoarseFine(0, 0)
    t_s: int = 0
    t_m: int = 0
    dc: int = 0
    code: int = 0
    delay: int = 0


@dataclass
class RacePlan:
    """Arrival offsets (from the launch event) of the single-rail race pulses."""
    arrivals: np.ndarray
    classes: list = field(default_factory=list)
    sr_launch: int = 0

    @property
    def winner(self) -> int:
        return argmin_class(self.arrivals)


def cotm_race_delays(model: TmModel, clause_vector, cfg: TimeDomainConfig) -> RacePlan:
    if model.variant != COALESCED:
        raise VariantError("cotm race needs a coalesced model")
    cfg = resolve_config(model, cfg)
    sums = cotm_sums(model, clause_vector)
    if cfg.mode == IDEAL:
        d = ideal_delays(sums, cfg)
        return RacePlan(d, [ClassRace(int(s), code=int(s), delay=int(x)) for s, x in zip(sums, d)], 0)
    width = sum_bit_width(model)
    races = []
    for i, s in enumerate(sums):
        S, M = split_signed(model.weights[i], clause_vector)
        s_cf, m_cf = lod_extract(S, cfg.e, width), lod_extract(M, cfg.e, width)
        t_s = coarse_fine_delay(s_cf, cfg)
        t_m = cfg.launch_skew + coarse_fine_delay(m_cf, cfg)
        dc = vernier_tdc(t_s, t_m, cfg.tdc_resolution)
        code = decode_code(dc, cfg)
        races.append(ClassRace(int(s), S, M, s_cf, m_cf, t_s, t_m, dc, code, dcde_delay(code, cfg)))
    sr_launch = max(max(r.t_s, r.t_m) for r in races) + cfg.tdc_latency
    arrivals = np.array([sr_launch + r.delay for r in races], dtype=np.int64)
    return RacePlan(arrivals, races, sr_launch)


def race_agrees(plan: RacePlan) -> bool:
    return plan.winner == argmax_class([r.sum for r in plan.classes])


# -- kernel component -------------------------------------------------------

class RacePath:
    """Launches class race pulses on the kernel when ``launch`` rises.

    ``load(token)`` must be called with the per-sample payload before the
    launch edge; for hamming mode the payload carries the class clause
    vectors, for coalesced modes the shared clause vector. Pulses return to
    zero ``reset_delay`` after ``launch`` falls.
    """

    def __init__(self, kernel: Kernel, model: TmModel, cfg: TimeDomainConfig, kind: str,
                 launch: str, scope: str = "time_domain"):
        if kind not in ("hamming", IDEAL, ARCHITECTURAL):
            raise ValueError(f"unknown race kind {kind!r}")
        if kind == "hamming" and model.variant != MULTICLASS:
            raise VariantError("hamming mode needs a multiclass model")
        if kind != "hamming" and model.variant != COALESCED:
            raise VariantError(f"cotm-{kind} mode needs a coalesced model")
        if kind != "hamming":
            cfg = resolve_config(model, replace(cfg, mode=kind))
        self.kernel, self.model, self.cfg, self.kind = kernel, model, cfg, kind
        self.launch = launch
        K = model.num_classes
        self.race = [kernel.signal(f"race_{i}", scope) for i in range(K)]
        self._owned = list(self.race)
        if kind == ARCHITECTURAL:
            self.race_dr = kernel.signal("race_dr", scope)
            self.race_s = [kernel.signal(f"race_s_{i}", scope) for i in range(K)]
            self.race_m = [kernel.signal(f"race_m_{i}", scope) for i in range(K)]
            self.tdc_done = [kernel.signal(f"tdc_done_{i}", scope) for i in range(K)]
            self.race_sr = kernel.signal("race_sr", scope)
            self._owned += [self.race_dr, *self.race_s, *self.race_m, *self.tdc_done]
            CElementGate(kernel, self.tdc_done, self.race_sr)
            for i in range(K):
                kernel.on_edge(self.race_s[i], RISING, self._tdc_arrival(i))
                kernel.on_edge(self.race_m[i], RISING, self._tdc_arrival(i))
            kernel.on_edge(self.race_sr, RISING, self._on_sr)
        kernel.on_edge(launch, ANY, self._on_launch)
        self.token = None
        self.plan: Optional[RacePlan] = None
        self.t_launch = 0
        self.measured: list[dict] = []
        self._arrived: dict = {}

    def load(self, token) -> None:
        self.token = token

    def _on_launch(self, sig) -> None:
        if sig.value:
            self._start()
        else:
            k = self.kernel
            # pulses still in flight are discarded with the race
            k.cancel_pending(self._owned)
            for net in self._owned:
                k.schedule(net, 0, k.now + self.cfg.reset_delay)

    def _start(self) -> None:
        k = self.kernel
        self.t_launch = k.now
        self._arrived = {}
        if self.kind == "hamming":
            d = hamming_race_delays(self.model, self.token, self.cfg)
            self.plan = RacePlan(d)
            for net, x in zip(self.race, d):
                k.schedule(net, 1, k.now + int(x))
            return
        self.plan = cotm_race_delays(self.model, self.token, self.cfg)
        if self.kind == IDEAL:
            for net, x in zip(self.race, self.plan.arrivals):
                k.schedule(net, 1, k.now + int(x))
            return
        self.measured = [dict() for _ in self.race]
        k.schedule(self.race_dr, 1, k.now)
        for i, r in enumerate(self.plan.classes):
            k.schedule(self.race_s[i], 1, k.now + r.t_s)
            k.schedule(self.race_m[i], 1, k.now + r.t_m)

    def _tdc_arrival(self, i: int):
        def arrive(sig) -> None:
            k = self.kernel
            rail = "s" if sig.id == self.race_s[i] else "m"
            self.measured[i][rail] = k.now
            if len(self.measured[i]) == 2:
                dc = vernier_tdc(self.measured[i]["s"], self.measured[i]["m"], self.cfg.tdc_resolution)
                self.measured[i]["dc"] = dc
                self.measured[i]["code"] = decode_code(dc, self.cfg)
                k.schedule(self.tdc_done[i], 1, k.now + self.cfg.tdc_latency)
        return arrive

    def _on_sr(self, _sig) -> None:
        k = self.kernel
        for i, net in enumerate(self.race):
            k.schedule(net, 1, k.now + dcde_delay(self.measured[i]["code"], self.cfg))
