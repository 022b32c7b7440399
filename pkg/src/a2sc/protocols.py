"""Dialogue state machines for contract-net and request-response.

Step functions are pure: (dialogue, event) -> (dialogue, envelopes to send).
The enclosing agent serializes all steps for its own dialogues; illegal events
raise ProtocolViolation and leave the caller's state untouched.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional

from .messaging import (
    CONTRACT_NET,
    REQUEST_RESPONSE,
    Envelope,
    Performative,
)

DEFAULT_CFP_DEADLINE_MS = 5_000


class ProtocolViolation(Exception):
    """Event is illegal in the dialogue's current state."""


class UnknownDialogue(Exception):
    """Event addressed to a dialogue this engine does not track."""


class InitiatorState(Enum):
    START = "start"
    CFP_SENT = "cfp_sent"
    EVALUATING = "evaluating"
    AWAITING_RESULT = "awaiting_result"
    CONCLUDED = "concluded"


class Outcome(Enum):
    COMPLETED = "completed"
    ALL_REFUSED = "all_refused"
    FAILED = "failed"
    TIMED_OUT = "timed_out"


class ParticipantState(Enum):
    IDLE = "idle"
    CFP_RECEIVED = "cfp_received"
    PROPOSAL_SENT = "proposal_sent"
    AWARDED = "awarded"
    REFUSED = "refused"
    REJECTED = "rejected"
    DONE = "done"
    FAILED = "failed"


class RequestState(Enum):
    START = "start"
    REQUEST_SENT = "request_sent"
    TERMINATED = "terminated"


# Local-decision events fed to the step functions.


@dataclass(frozen=True)
class SendCfp:
    content: Mapping[str, Any]


@dataclass(frozen=True)
class Award:
    winner: str
    content: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SendProposal:
    content: Mapping[str, Any]


@dataclass(frozen=True)
class SendRefusal:
    reason: str


@dataclass(frozen=True)
class TaskCompleted:
    content: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class TaskFailed:
    content: Mapping[str, Any] = field(default_factory=dict)


@dataclass
class Dialogue:
    """Per-conversation protocol context, including the message transcript."""

    dialogue_id: str
    protocol_id: str
    role: str  # "initiator" | "participant"
    self_address: str
    ontology_id: str
    counterparties: set[str] = field(default_factory=set)
    state: Any = None
    outcome: Optional[Outcome] = None
    deadline: int = 0
    transcript: list[Envelope] = field(default_factory=list)
    proposals: dict[str, dict[str, Any]] = field(default_factory=dict)
    refusals: set[str] = field(default_factory=set)
    winner: Optional[str] = None
    _token_counter: int = 0

    def __post_init__(self):
        if self.state is None:
            if self.protocol_id == REQUEST_RESPONSE:
                self.state = RequestState.START
            elif self.role == "initiator":
                self.state = InitiatorState.START
            else:
                self.state = ParticipantState.IDLE

    def next_token(self) -> str:
        # Dialogue-scoped monotone counter keeps traces reproducible.
        self._token_counter += 1
        return f"{self.dialogue_id}#{self._token_counter}"

    def record(self, envelope: Envelope) -> None:
        if envelope.dialogue_id != self.dialogue_id:
            raise ProtocolViolation(
                f"envelope dialogue {envelope.dialogue_id!r} does not match {self.dialogue_id!r}"
            )
        self.transcript.append(envelope)

    def make_envelope(
        self,
        receiver: str,
        performative: Performative,
        content: Mapping[str, Any],
        now: int,
        in_reply_to: Optional[str] = None,
    ) -> Envelope:
        return Envelope(
            sender=self.self_address,
            receiver=receiver,
            protocol_id=self.protocol_id,
            ontology_id=self.ontology_id,
            performative=performative,
            dialogue_id=self.dialogue_id,
            content=dict(content),
            reply_with=self.next_token(),
            in_reply_to=in_reply_to,
            sent_at=now,
        )

    @property
    def concluded(self) -> bool:
        if self.protocol_id == REQUEST_RESPONSE:
            return self.state is RequestState.TERMINATED
        if self.role == "initiator":
            return self.state is InitiatorState.CONCLUDED
        return self.state in (
            ParticipantState.REFUSED,
            ParticipantState.REJECTED,
            ParticipantState.DONE,
            ParticipantState.FAILED,
        )


def _clone(dialogue: Dialogue) -> Dialogue:
    return copy.deepcopy(dialogue)


def initiator_step(dialogue: Dialogue, event: Any, now: int = 0):
    """Advance an initiator dialogue; returns (dialogue, envelopes to send)."""
    if dialogue.role != "initiator" or dialogue.protocol_id != CONTRACT_NET:
        raise ProtocolViolation("initiator_step requires a contract-net initiator dialogue")
    d = _clone(dialogue)
    out: list[Envelope] = []

    if isinstance(event, SendCfp):
        if d.state is not InitiatorState.START:
            raise ProtocolViolation(f"cfp not allowed in state {d.state}")
        if not d.counterparties:
            raise ProtocolViolation("cfp requires at least one counterparty")
        for receiver in sorted(d.counterparties):
            env = d.make_envelope(receiver, Performative.CFP, event.content, now)
            d.record(env)
            out.append(env)
        d.state = InitiatorState.CFP_SENT
        return d, out

    if isinstance(event, Award):
        if d.state is not InitiatorState.EVALUATING:
            raise ProtocolViolation(f"award not allowed in state {d.state}")
        if event.winner not in d.proposals:
            raise ProtocolViolation(f"award to non-proposer {event.winner!r}")
        accept = d.make_envelope(
            event.winner, Performative.ACCEPT_PROPOSAL, event.content, now
        )
        d.record(accept)
        out.append(accept)
        for other in sorted(d.proposals):
            if other == event.winner:
                continue
            reject = d.make_envelope(
                other, Performative.REJECT_PROPOSAL, {"sku": event.content.get("sku", "")}, now
            )
            d.record(reject)
            out.append(reject)
        d.winner = event.winner
        d.state = InitiatorState.AWAITING_RESULT
        return d, out

    if isinstance(event, Envelope):
        if event.dialogue_id != d.dialogue_id:
            raise UnknownDialogue(event.dialogue_id)
        if d.state is InitiatorState.CONCLUDED:
            raise ProtocolViolation("dialogue already concluded")
        p = event.performative
        if d.state is InitiatorState.CFP_SENT and p is Performative.PROPOSE:
            if event.sender not in d.counterparties or event.sender in d.proposals:
                raise ProtocolViolation(f"unexpected propose from {event.sender!r}")
            d.record(event)
            d.proposals[event.sender] = dict(event.content)
            if len(d.proposals) + len(d.refusals) == len(d.counterparties):
                d.state = InitiatorState.EVALUATING
            return d, out
        if d.state is InitiatorState.CFP_SENT and p is Performative.REFUSE:
            if event.sender not in d.counterparties or event.sender in d.refusals:
                raise ProtocolViolation(f"unexpected refuse from {event.sender!r}")
            d.record(event)
            d.refusals.add(event.sender)
            if len(d.refusals) == len(d.counterparties):
                d.state = InitiatorState.CONCLUDED
                d.outcome = Outcome.ALL_REFUSED
            elif len(d.proposals) + len(d.refusals) == len(d.counterparties):
                d.state = InitiatorState.EVALUATING
            return d, out
        if d.state is InitiatorState.AWAITING_RESULT and p is Performative.INFORM:
            if event.sender != d.winner:
                raise ProtocolViolation(f"inform from non-winner {event.sender!r}")
            d.record(event)
            d.state = InitiatorState.CONCLUDED
            d.outcome = Outcome.COMPLETED
            return d, out
        if d.state is InitiatorState.AWAITING_RESULT and p is Performative.FAILURE:
            if event.sender != d.winner:
                raise ProtocolViolation(f"failure from non-winner {event.sender!r}")
            d.record(event)
            d.state = InitiatorState.CONCLUDED
            d.outcome = Outcome.FAILED
            return d, out
        if p is Performative.FAILURE:
            # Transport failure (e.g. unreachable receiver) concludes the dialogue.
            d.record(event)
            d.state = InitiatorState.CONCLUDED
            d.outcome = Outcome.FAILED
            return d, out
        raise ProtocolViolation(f"{p.value} illegal in state {d.state}")

    raise ProtocolViolation(f"unsupported initiator event {event!r}")


def participant_step(dialogue: Dialogue, event: Any, now: int = 0):
    """Advance a participant dialogue; returns (dialogue, envelopes to send)."""
    if dialogue.role != "participant" or dialogue.protocol_id != CONTRACT_NET:
        raise ProtocolViolation("participant_step requires a contract-net participant dialogue")
    d = _clone(dialogue)
    out: list[Envelope] = []
    initiator = next(iter(d.counterparties)) if d.counterparties else None

    if isinstance(event, SendProposal):
        if d.state is not ParticipantState.CFP_RECEIVED:
            raise ProtocolViolation(f"propose not allowed in state {d.state}")
        env = d.make_envelope(initiator, Performative.PROPOSE, event.content, now)
        d.record(env)
        d.state = ParticipantState.PROPOSAL_SENT
        return d, [env]

    if isinstance(event, SendRefusal):
        if d.state is not ParticipantState.CFP_RECEIVED:
            raise ProtocolViolation(f"refuse not allowed in state {d.state}")
        env = d.make_envelope(initiator, Performative.REFUSE, {"reason": event.reason}, now)
        d.record(env)
        d.state = ParticipantState.REFUSED
        return d, [env]

    if isinstance(event, TaskCompleted):
        if d.state is not ParticipantState.AWARDED:
            raise ProtocolViolation(f"completion not allowed in state {d.state}")
        env = d.make_envelope(initiator, Performative.INFORM, event.content, now)
        d.record(env)
        d.state = ParticipantState.DONE
        return d, [env]

    if isinstance(event, TaskFailed):
        if d.state is not ParticipantState.AWARDED:
            raise ProtocolViolation(f"failure not allowed in state {d.state}")
        env = d.make_envelope(initiator, Performative.FAILURE, event.content, now)
        d.record(env)
        d.state = ParticipantState.FAILED
        return d, [env]

    if isinstance(event, Envelope):
        if event.dialogue_id != d.dialogue_id:
            raise UnknownDialogue(event.dialogue_id)
        p = event.performative
        if d.state is ParticipantState.IDLE and p is Performative.CFP:
            d.counterparties = {event.sender}
            d.record(event)
            d.state = ParticipantState.CFP_RECEIVED
            return d, out
        if d.state is ParticipantState.PROPOSAL_SENT and p is Performative.ACCEPT_PROPOSAL:
            d.record(event)
            d.state = ParticipantState.AWARDED
            return d, out
        if d.state is ParticipantState.PROPOSAL_SENT and p is Performative.REJECT_PROPOSAL:
            d.record(event)
            d.state = ParticipantState.REJECTED
            return d, out
        raise ProtocolViolation(f"{p.value} illegal in state {d.state}")

    raise ProtocolViolation(f"unsupported participant event {event!r}")


@dataclass(frozen=True)
class SendRequest:
    performative: Performative  # REQUEST_GET or REQUEST_POST
    content: Mapping[str, Any]


@dataclass(frozen=True)
class SendResponse:
    content: Mapping[str, Any]


def request_step(dialogue: Dialogue, event: Any, now: int = 0):
    """Advance a request-response dialogue: one request, one response, done."""
    if dialogue.protocol_id != REQUEST_RESPONSE:
        raise ProtocolViolation("request_step requires a request_response dialogue")
    d = _clone(dialogue)

    if isinstance(event, SendRequest):
        if d.state is not RequestState.START or d.role != "initiator":
            raise ProtocolViolation(f"request not allowed in state {d.state}")
        if event.performative not in (Performative.REQUEST_GET, Performative.REQUEST_POST):
            raise ProtocolViolation(f"{event.performative.value} is not a request")
        receiver = next(iter(d.counterparties))
        env = d.make_envelope(receiver, event.performative, event.content, now)
        d.record(env)
        d.state = RequestState.REQUEST_SENT
        return d, [env]

    if isinstance(event, SendResponse):
        if d.state is not RequestState.REQUEST_SENT or d.role != "participant":
            raise ProtocolViolation(f"response not allowed in state {d.state}")
        request = d.transcript[-1]
        env = d.make_envelope(
            request.sender, Performative.RESPONSE, event.content, now,
            in_reply_to=request.reply_with,
        )
        d.record(env)
        d.state = RequestState.TERMINATED
        return d, [env]

    if isinstance(event, Envelope):
        if event.dialogue_id != d.dialogue_id:
            raise UnknownDialogue(event.dialogue_id)
        p = event.performative
        if p in (Performative.REQUEST_GET, Performative.REQUEST_POST):
            if d.state is not RequestState.START or d.role != "participant":
                raise ProtocolViolation("second request in one dialogue")
            d.counterparties = {event.sender}
            d.record(event)
            d.state = RequestState.REQUEST_SENT
            return d, []
        if p is Performative.RESPONSE:
            if d.state is not RequestState.REQUEST_SENT or d.role != "initiator":
                raise ProtocolViolation("response without a pending request")
            d.record(event)
            d.state = RequestState.TERMINATED
            return d, []
        raise ProtocolViolation(f"{p.value} illegal for request_response")

    raise ProtocolViolation(f"unsupported request event {event!r}")


def expire(dialogue: Dialogue, now: int):
    """Apply the deadline rule; no-op before the deadline or once concluded."""
    if now < dialogue.deadline or dialogue.concluded:
        return dialogue, []
    d = _clone(dialogue)
    if d.protocol_id == CONTRACT_NET and d.role == "initiator":
        if d.state is InitiatorState.CFP_SENT:
            if d.proposals:
                d.state = InitiatorState.EVALUATING
            else:
                d.state = InitiatorState.CONCLUDED
                d.outcome = Outcome.TIMED_OUT
        elif d.state is InitiatorState.AWAITING_RESULT:
            d.state = InitiatorState.CONCLUDED
            d.outcome = Outcome.FAILED
    return d, []
