"""Agent hosting: simulated clock, behaviour scheduling, mailboxes, routing.

The scheduler is a discrete-event loop with a deterministic total order on
work items: (due time, agent address, insertion sequence). A strictly
sequential run is the reference mode; fixed seeds plus a fixed scenario
config therefore yield bit-identical traces.
"""

from __future__ import annotations

import heapq
import logging
import random
import threading
import time as _time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .messaging import (
    Envelope,
    Performative,
    REQUEST_RESPONSE,
    CONTRACT_NET,
)

log = logging.getLogger("a2sc.runtime")


class DuplicateAddress(Exception):
    pass


class SimClock:
    """Monotone simulated clock; ``speed`` 0 runs as fast as possible."""

    def __init__(self, speed: float = 0.0):
        self.now: int = 0
        self.speed = speed

    def advance_to(self, t: int) -> None:
        if t < self.now:
            return
        if self.speed > 0:
            _time.sleep((t - self.now) / 1000.0 / self.speed)
        self.now = t


@dataclass(frozen=True)
class Behaviour:
    """An agent activation rule.

    kind: "one_shot" runs once at start; "periodic" at t0 + k*interval;
    "reactive" on delivery of a matching envelope.
    """

    kind: str
    action: str
    interval: int = 0
    protocol_id: Optional[str] = None
    performatives: frozenset = frozenset()

    @staticmethod
    def one_shot(action: str) -> "Behaviour":
        return Behaviour(kind="one_shot", action=action)

    @staticmethod
    def periodic(action: str, interval: int) -> "Behaviour":
        return Behaviour(kind="periodic", action=action, interval=interval)

    @staticmethod
    def reactive(action: str, protocol_id: str, *performatives: Performative) -> "Behaviour":
        return Behaviour(
            kind="reactive",
            action=action,
            protocol_id=protocol_id,
            performatives=frozenset(performatives),
        )


@dataclass
class AgentConfig:
    address: str
    agent_type: str
    behaviours: list[Behaviour] = field(default_factory=list)
    params: dict[str, Any] = field(default_factory=dict)
    rng_seed: int = 0


class Agent:
    """Base agent: serialized handlers, seeded private RNG, envelope I/O.

    Subclasses implement behaviour actions as ``action_<name>`` methods and
    envelope handling via ``on_envelope``.
    """

    def __init__(self, config: AgentConfig):
        self.config = config
        self.address = config.address
        self.agent_type = config.agent_type
        self.runtime: "Runtime" = None  # set by spawn
        self.rng = random.Random()

    # -- wiring -------------------------------------------------------------

    def attach(self, runtime: "Runtime", scenario_seed: int) -> None:
        self.runtime = runtime
        # Per-agent stream keyed by (scenario seed, address): adding an agent
        # does not perturb the randomness of others.
        self.rng.seed(f"{scenario_seed}:{self.address}")

    @property
    def now(self) -> int:
        return self.runtime.clock.now

    def send(self, envelope: Envelope) -> None:
        self.runtime.route(envelope.with_time(self.now))

    def run_action(self, action: str) -> None:
        getattr(self, f"action_{action}")()

    # -- overridables -------------------------------------------------------

    def on_start(self) -> None:
        pass

    def on_envelope(self, envelope: Envelope) -> None:
        pass


class Runtime:
    """Hosts agents over one simulated clock and one deterministic scheduler."""

    def __init__(self, clock: Optional[SimClock] = None, scenario_seed: int = 0):
        self.clock = clock or SimClock()
        self.scenario_seed = scenario_seed
        self.agents: dict[str, Agent] = {}
        self.trace: list[Envelope] = []
        self.observers: list[Callable[[Envelope], None]] = []
        self.violations: list[str] = []
        self.lock = threading.RLock()
        self._queue: list[tuple[int, str, int, Callable[[], None]]] = []
        self._seq = 0
        self._dialogue_seq = 0

    # -- scheduling ---------------------------------------------------------

    def schedule(self, t: int, address: str, fn: Callable[[], None]) -> None:
        with self.lock:
            self._seq += 1
            heapq.heappush(self._queue, (t, address, self._seq, fn))

    def next_dialogue_id(self, prefix: str) -> str:
        with self.lock:
            self._dialogue_seq += 1
            return f"{prefix}-{self._dialogue_seq:04d}"

    def spawn(self, agent: Agent) -> Agent:
        with self.lock:
            if agent.address in self.agents:
                raise DuplicateAddress(agent.address)
            agent.attach(self, self.scenario_seed)
            self.agents[agent.address] = agent
            now = self.clock.now
            self.schedule(now, agent.address, agent.on_start)
            for behaviour in agent.config.behaviours:
                if behaviour.kind == "one_shot":
                    self.schedule(
                        now, agent.address,
                        lambda a=agent, b=behaviour: a.run_action(b.action),
                    )
                elif behaviour.kind == "periodic":
                    self._schedule_periodic(agent, behaviour, now)
        return agent

    def _schedule_periodic(self, agent: Agent, behaviour: Behaviour, t: int) -> None:
        def tick():
            agent.run_action(behaviour.action)
            self._schedule_periodic(agent, behaviour, t + behaviour.interval)

        self.schedule(t, agent.address, tick)

    # -- routing ------------------------------------------------------------

    def route(self, envelope: Envelope) -> None:
        """Append to the receiver's mailbox; FIFO per sender-receiver pair."""
        with self.lock:
            self.trace.append(envelope)
            for observer in self.observers:
                observer(envelope)
            receiver = self.agents.get(envelope.receiver)
            if receiver is None:
                log.warning("unknown receiver %s; bouncing failure", envelope.receiver)
                self._bounce(envelope)
                return
            self.schedule(
                self.clock.now, envelope.receiver,
                lambda: self._deliver(receiver, envelope),
            )

    def _bounce(self, envelope: Envelope) -> None:
        sender = self.agents.get(envelope.sender)
        if sender is None or envelope.performative is Performative.FAILURE:
            return
        failure_perf = (
            Performative.RESPONSE
            if envelope.protocol_id == REQUEST_RESPONSE
            else Performative.FAILURE
        )
        bounce = Envelope(
            sender=envelope.receiver,
            receiver=envelope.sender,
            protocol_id=envelope.protocol_id,
            ontology_id=envelope.ontology_id,
            performative=failure_perf,
            dialogue_id=envelope.dialogue_id,
            content={"error": "unknown_receiver"},
            in_reply_to=envelope.reply_with,
            sent_at=self.clock.now,
        )
        self.trace.append(bounce)
        for observer in self.observers:
            observer(bounce)
        self.schedule(
            self.clock.now, envelope.sender,
            lambda: self._deliver(sender, bounce),
        )

    def _deliver(self, agent: Agent, envelope: Envelope) -> None:
        try:
            agent.on_envelope(envelope)
        except Exception as exc:  # protocol violations are logged and dropped
            self.violations.append(f"{agent.address}: {exc}")
            log.warning("handler error at %s: %s", agent.address, exc)

    def record_violation(self, message: str) -> None:
        with self.lock:
            self.violations.append(message)

    # -- execution ----------------------------------------------------------

    def step(self) -> bool:
        """Process the single next work item; returns False when idle."""
        with self.lock:
            if not self._queue:
                return False
            t, _addr, _seq, fn = heapq.heappop(self._queue)
        self.clock.advance_to(t)
        with self.lock:
            fn()
        return True

    def run_until(self, t_end: int) -> list[Envelope]:
        """Run every item due up to and including t_end; returns the trace."""
        while True:
            with self.lock:
                if not self._queue or self._queue[0][0] > t_end:
                    break
            self.step()
        self.clock.advance_to(t_end)
        return list(self.trace)

    def run_idle(self) -> list[Envelope]:
        """Run until the queue drains completely."""
        while self.step():
            pass
        return list(self.trace)

    def pending(self) -> bool:
        with self.lock:
            return bool(self._queue)

    def next_due(self) -> Optional[int]:
        with self.lock:
            return self._queue[0][0] if self._queue else None
