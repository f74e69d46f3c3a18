"""Two-phase bundled-data control: click stages, Muller C-element and the
four-phase/two-phase boundary.

A click stage keeps two phase bits. ``req_out`` *is* ``phase_in`` and
``ack_out`` *is* ``phase_out``; both toggle ``fire_to_phase_delay`` after a
rising edge of ``fire``, which in turn clears ``fire``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .kernel import ANY, FALLING, RISING, Kernel, Wire

FORWARD_DELAY = 100
FIRE_TO_PHASE_DELAY = 20


class BundledDataError(ValueError):
    """A datapath delay exceeds the matched request delay of its stage."""


def click_fire(req_in: int, phase_in: int, ack_in: int, phase_out: int) -> int:
    return int(bool(req_in ^ phase_in) and not (ack_in ^ phase_out))


def c_element(a: int, b: int, c_prev: int) -> int:
    if a and b:
        return 1
    if not a and not b:
        return 0
    return c_prev


class CElementGate:
    """N-input Muller C-element living on kernel nets."""

    def __init__(self, kernel: Kernel, inputs: Sequence[str], output: str, delay: int = 0):
        self.kernel, self.inputs, self.output, self.delay = kernel, list(inputs), output, int(delay)
        self._target = kernel.value(output)
        for net in self.inputs:
            kernel.on_edge(net, ANY, self._eval)

    def _eval(self, _sig=None) -> None:
        vals = [self.kernel.value(n) for n in self.inputs]
        if all(vals):
            v = 1
        elif not any(vals):
            v = 0
        else:
            return
        if v != self._target:
            self._target = v
            self.kernel.schedule(self.output, v, self.kernel.now + self.delay)


@dataclass
class Violation:
    time: int
    where: str
    message: str


class ProtocolMonitor:
    """Checks that request transitions alternate with acknowledgments."""

    def __init__(self, kernel: Kernel, name: str, req: str, ack: str, fire: Optional[str] = None):
        self.kernel, self.name, self.fire = kernel, name, fire
        self.violations: list[Violation] = []
        self.outstanding = False
        kernel.on_edge(req, ANY, self._on_req)
        kernel.on_edge(ack, ANY, self._on_ack)

    def _flag(self, msg: str) -> None:
        self.violations.append(Violation(self.kernel.now, self.name, msg))

    def _on_req(self, _sig) -> None:
        if self.fire is not None and self.kernel.value(self.fire):
            self._flag("bundled-data violation: request changed while fire pending")
        if self.outstanding:
            self._flag("request toggled twice without acknowledgment")
        self.outstanding = True

    def _on_ack(self, _sig) -> None:
        if not self.outstanding:
            self._flag("acknowledgment without request")
        self.outstanding = False

    def reset(self) -> None:
        self.outstanding = False


class ClickStage:
    def __init__(self, kernel: Kernel, name: str, req_in: str, ack_in: str,
                 fire_to_phase_delay: int = FIRE_TO_PHASE_DELAY, scope: str = "pipeline"):
        self.kernel, self.name = kernel, name
        self.req_in, self.ack_in = req_in, ack_in
        self.req_out = kernel.signal(f"{name}_req_out", scope)
        self.ack_out = kernel.signal(f"{name}_ack_out", scope)
        self.fire = kernel.signal(f"{name}_fire", scope)
        self.fire_to_phase_delay = int(fire_to_phase_delay)
        self.fire_hooks: list[Callable[["ClickStage"], None]] = []
        self.fire_times: list[int] = []
        self.in_reset = False
        self._fire_target = 0
        for net in (req_in, ack_in, self.req_out, self.ack_out):
            kernel.on_edge(net, ANY, self._evaluate)
        kernel.on_edge(self.fire, RISING, self._on_fire)

    @property
    def phase_in(self) -> int:
        return self.kernel.value(self.req_out)

    @property
    def phase_out(self) -> int:
        return self.kernel.value(self.ack_out)

    @property
    def nets(self) -> tuple:
        return self.req_out, self.ack_out, self.fire

    def _evaluate(self, _sig=None) -> None:
        if self.in_reset:
            return
        k = self.kernel
        f = click_fire(k.value(self.req_in), self.phase_in, k.value(self.ack_in), self.phase_out)
        if f != self._fire_target:
            self._fire_target = f
            k.schedule(self.fire, f, k.now)

    def _on_fire(self, _sig) -> None:
        k = self.kernel
        self.fire_times.append(k.now)
        for hook in self.fire_hooks:
            hook(self)
        t = k.now + self.fire_to_phase_delay
        k.schedule(self.req_out, 1 - self.phase_in, t)
        k.schedule(self.ack_out, 1 - self.phase_out, t)


class ClickPipeline:
    """Linear chain of click stages with matched forward delays.

    Environment-facing nets: ``in_req`` (driven by the producer), ``in_ack``
    (stage 0 ``ack_out``), ``out_req`` (delayed last ``req_out``) and
    ``out_ack`` (driven by the consumer).

    ``stage_functions[i]`` transforms the token latched by stage ``i`` on its
    fire edge; ``data[i]`` holds the latched value.
    """

    def __init__(self, kernel: Kernel, stages: int = 3, forward_delay: int = FORWARD_DELAY,
                 fire_to_phase_delay: int = FIRE_TO_PHASE_DELAY, ack_delay: int = 0,
                 datapath_delays: Optional[Sequence[int]] = None,
                 stage_functions: Optional[Sequence[Callable]] = None, scope: str = "pipeline"):
        if stages < 1:
            raise ValueError("need at least one stage")
        if forward_delay <= 0 or fire_to_phase_delay <= 0 or ack_delay < 0:
            raise ValueError("stage delays must be positive")
        datapath_delays = list(datapath_delays or [0] * stages)
        if len(datapath_delays) != stages:
            raise ValueError("one datapath delay per stage")
        for i, d in enumerate(datapath_delays):
            if d > forward_delay:
                raise BundledDataError(
                    f"stage {i}: datapath delay {d} ps exceeds matched delay {forward_delay} ps")
        self.kernel = kernel
        self.scope = scope
        self.forward_delay = int(forward_delay)
        self.datapath_delays = datapath_delays
        self.functions = list(stage_functions or [None] * stages)
        self.in_req = kernel.signal("in_req", scope)
        self.out_ack = kernel.signal("out_ack", scope)
        self.input_data = None
        self.data = [None] * stages
        self.resetting = False

        # forward request nets first so stage i can see stage i-1's delayed req
        req_ins = [self.in_req] + [kernel.signal(f"s{i}_req_in", scope) for i in range(1, stages)]
        ack_ins = [kernel.signal(f"s{i}_ack_in", scope) for i in range(stages - 1)] + [self.out_ack]
        self.stages = [ClickStage(kernel, f"s{i}", req_ins[i], ack_ins[i], fire_to_phase_delay, scope)
                       for i in range(stages)]
        self.out_req = kernel.signal("out_req", scope)
        for i, st in enumerate(self.stages):
            nxt = req_ins[i + 1] if i + 1 < stages else self.out_req
            Wire(kernel, st.req_out, nxt, forward_delay)
            if i > 0:
                Wire(kernel, st.ack_out, ack_ins[i - 1], ack_delay)
            st.fire_hooks.append(self._latch_hook(i))
        self.in_ack = self.stages[0].ack_out
        self.monitors = [ProtocolMonitor(kernel, st.name, st.req_in, st.ack_out, st.fire)
                         for st in self.stages]

    def _latch_hook(self, i: int):
        def latch(_stage):
            src = self.input_data if i == 0 else self.data[i - 1]
            fn = self.functions[i]
            self.data[i] = fn(src) if fn is not None else src
        return latch

    @property
    def violations(self) -> list[Violation]:
        out = [v for m in self.monitors for v in m.violations]
        return sorted(out, key=lambda v: v.time)

    @property
    def nets(self) -> list[str]:
        out = [self.in_req, self.out_ack, self.out_req]
        for st in self.stages:
            out += [st.req_in, st.ack_in, *st.nets]
        return list(dict.fromkeys(out))

    def reset(self) -> None:
        """Assert reset: drop pending activity, clear every phase and fire."""
        k = self.kernel
        nets = self.nets
        self.resetting = True
        k.cancel_pending(nets)
        for st in self.stages:
            st.in_reset = True
            st._fire_target = 0
        for net in nets:
            if k.value(net):
                k.schedule(net, 0, k.now)
        k.run_until(k.now)
        k.cancel_pending(nets)
        for st in self.stages:
            st.in_reset = False
        self.resetting = False
        for m in self.monitors:
            m.reset()
        self.data = [None] * len(self.stages)
        self.input_data = None


def build_pipeline(kernel: Kernel, stages: int = 3, **delays) -> ClickPipeline:
    return ClickPipeline(kernel, stages, **delays)


class TokenSource:
    """Two-phase producer feeding ``pipeline.in_req``.

    In pipelined mode a new token follows each stage-0 acknowledgment after
    ``gaps[i]`` ps. With ``serialized=True`` the next token additionally waits
    for :meth:`release`.
    """

    def __init__(self, kernel: Kernel, pipeline: ClickPipeline, tokens: Sequence, gaps=None,
                 start: int = 0, serialized: bool = False):
        self.kernel, self.pipeline, self.tokens = kernel, pipeline, list(tokens)
        self.gaps = list(gaps) if gaps is not None else [0] * len(self.tokens)
        self.serialized = serialized
        self.sent: list = []
        self.inject_times: list[int] = []
        self._acked = True
        self._released = True
        kernel.on_edge(pipeline.in_ack, ANY, self._on_ack)
        if self.tokens:
            self._acked = False
            self._released = not serialized
            kernel.call_at(start + self.gaps[0], self._inject)

    def _inject(self) -> None:
        i = len(self.sent)
        token = self.tokens[i]
        self.pipeline.input_data = token
        self.sent.append(token)
        self.inject_times.append(self.kernel.now)
        k = self.kernel
        k.schedule(self.pipeline.in_req, 1 - k.value(self.pipeline.in_req), k.now)

    def _maybe_next(self) -> None:
        if len(self.sent) < len(self.tokens) and self._acked and self._released:
            self._acked = False
            self._released = not self.serialized
            self.kernel.call_at(self.kernel.now + self.gaps[len(self.sent)], self._inject)

    def _on_ack(self, _sig) -> None:
        if self.pipeline.resetting:
            return
        self._acked = True
        self._maybe_next()

    def release(self) -> None:
        self._released = True
        self._maybe_next()

    @property
    def done(self) -> bool:
        return len(self.sent) == len(self.tokens)


class TokenSink:
    """Two-phase consumer on ``pipeline.out_req``; acknowledges after a delay."""

    def __init__(self, kernel: Kernel, pipeline: ClickPipeline, ack_delays=None, default_delay: int = 0):
        self.kernel, self.pipeline = kernel, pipeline
        self.ack_delays = list(ack_delays) if ack_delays is not None else None
        self.default_delay = default_delay
        self.received: list = []
        self.receive_times: list[int] = []
        kernel.on_edge(pipeline.out_req, ANY, self._on_req)

    def _on_req(self, _sig) -> None:
        if self.pipeline.resetting:
            return
        k = self.kernel
        i = len(self.received)
        self.received.append(self.pipeline.data[-1])
        self.receive_times.append(k.now)
        d = self.ack_delays[i] if self.ack_delays and i < len(self.ack_delays) else self.default_delay
        k.schedule(self.pipeline.out_ack, 1 - k.value(self.pipeline.out_ack), k.now + d)


class PhaseBridge:
    """Two-phase to four-phase converter at the classifier boundary.

    Each transition on ``two_req`` raises ``req4``. When the downstream
    completion ``done4`` rises, ``req4`` returns to zero; when ``done4`` falls
    the toggle flip-flop flips ``ack2`` back to the two-phase side.
    """

    def __init__(self, kernel: Kernel, two_req: str, delay: int = 10, timeout: int = 1_000_000,
                 scope: str = "bridge"):
        self.kernel, self.delay, self.timeout = kernel, int(delay), int(timeout)
        self.two_req = two_req
        self.req4 = kernel.signal("req4", scope)
        self.done4 = kernel.signal("done4", scope)
        self.ack2 = kernel.signal("ack2", scope)
        self.violations: list[Violation] = []
        self.diagnostics: list[str] = []
        self.transactions = 0
        self.pulses: list[tuple[int, Optional[int]]] = []
        self._busy = False
        self._awaiting_done = False
        self._req4_high = False
        kernel.on_edge(two_req, ANY, self._on_two_req)
        kernel.on_edge(self.req4, ANY, self._on_req4)
        kernel.on_edge(self.done4, RISING, self._on_done_rise)
        kernel.on_edge(self.done4, FALLING, self._on_done_fall)

    def _on_two_req(self, _sig) -> None:
        k = self.kernel
        if self._busy:
            self.violations.append(Violation(k.now, "bridge", "two-phase request while busy"))
            return
        self._busy = True
        self._awaiting_done = True
        self.transactions += 1
        txn = self.transactions
        k.schedule(self.req4, 1, k.now + self.delay)
        k.call_at(k.now + self.delay + self.timeout, lambda: self._check_timeout(txn))

    def _check_timeout(self, txn: int) -> None:
        if txn == self.transactions and self._awaiting_done:
            self.diagnostics.append(
                f"deadlock: no completion for transaction {txn} within {self.timeout} ps")

    def _on_req4(self, sig) -> None:
        k = self.kernel
        if sig.value:
            if self._req4_high:
                self.violations.append(Violation(k.now, "bridge", "req4 rose twice"))
            self._req4_high = True
            self.pulses.append((k.now, None))
        else:
            self._req4_high = False
            self.pulses[-1] = (self.pulses[-1][0], k.now)

    def _on_done_rise(self, _sig) -> None:
        self._awaiting_done = False
        self.kernel.schedule(self.req4, 0, self.kernel.now + self.delay)

    def _on_done_fall(self, _sig) -> None:
        k = self.kernel
        self._busy = False
        k.schedule(self.ack2, 1 - k.value(self.ack2), k.now + self.delay)


def phase_bridge_2to4(kernel: Kernel, two_phase_net: str, **kwargs) -> PhaseBridge:
    return PhaseBridge(kernel, two_phase_net, **kwargs)
