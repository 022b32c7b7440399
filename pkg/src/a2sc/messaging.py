"""Agent communication language: envelopes, performatives, ontologies, wire codec.

Envelopes are immutable value objects. The wire form is a line-oriented text
encoding (magic line, fixed-order headers, blank line, canonical JSON body)
chosen so traces stay human-readable and diffable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Optional

WIRE_MAGIC = "A2SC1"

CONTRACT_NET = "contract_net"
REQUEST_RESPONSE = "request_response"


class Performative(Enum):
    CFP = "cfp"
    PROPOSE = "propose"
    REFUSE = "refuse"
    ACCEPT_PROPOSAL = "accept_proposal"
    REJECT_PROPOSAL = "reject_proposal"
    INFORM = "inform"
    FAILURE = "failure"
    REQUEST_GET = "request_get"
    REQUEST_POST = "request_post"
    RESPONSE = "response"


# Each performative belongs to exactly one protocol's legal set.
PROTOCOL_PERFORMATIVES: dict[str, frozenset[Performative]] = {
    CONTRACT_NET: frozenset(
        {
            Performative.CFP,
            Performative.PROPOSE,
            Performative.REFUSE,
            Performative.ACCEPT_PROPOSAL,
            Performative.REJECT_PROPOSAL,
            Performative.INFORM,
            Performative.FAILURE,
        }
    ),
    REQUEST_RESPONSE: frozenset(
        {
            Performative.REQUEST_GET,
            Performative.REQUEST_POST,
            Performative.RESPONSE,
        }
    ),
}


def performative_legal(protocol_id: str, performative: Performative) -> bool:
    """Classify a (protocol, performative) pair against the fixed legal-set table."""
    legal = PROTOCOL_PERFORMATIVES.get(protocol_id)
    return legal is not None and performative in legal


class MessagingError(Exception):
    """Base class for messaging-layer errors."""


class InvalidEnvelope(MessagingError):
    """An envelope violates a structural invariant; names the first failing field."""

    def __init__(self, field_name: str, reason: str):
        self.field_name = field_name
        self.reason = reason
        super().__init__(f"{field_name}: {reason}")


class MalformedMessage(MessagingError):
    """Bytes do not form a canonical wire encoding."""


class UnknownOntology(MessagingError):
    """Content validation requested for an unregistered ontology."""


# Header lines of the wire format, in their fixed order.
_HEADER_FIELDS = (
    "sender",
    "receiver",
    "protocol_id",
    "ontology_id",
    "performative",
    "dialogue_id",
    "reply_with",
    "in_reply_to",
    "sent_at",
)


@dataclass(frozen=True)
class Envelope:
    """One FIPA-ACL-style message.

    ``content`` is a flat key-value body; values are JSON-serializable.
    ``sent_at`` is simulated-clock milliseconds.
    """

    sender: str
    receiver: str
    protocol_id: str
    ontology_id: str
    performative: Performative
    dialogue_id: str
    content: Mapping[str, Any] = field(default_factory=dict)
    reply_with: Optional[str] = None
    in_reply_to: Optional[str] = None
    sent_at: int = 0

    def with_time(self, sent_at: int) -> "Envelope":
        return replace(self, sent_at=sent_at)


def _check_envelope(envelope: Envelope) -> None:
    if not envelope.sender:
        raise InvalidEnvelope("sender", "must be non-empty")
    if not envelope.receiver:
        raise InvalidEnvelope("receiver", "must be non-empty")
    if envelope.protocol_id not in PROTOCOL_PERFORMATIVES:
        raise InvalidEnvelope("protocol_id", f"unknown protocol {envelope.protocol_id!r}")
    if not isinstance(envelope.performative, Performative):
        raise InvalidEnvelope("performative", "not a Performative")
    if not performative_legal(envelope.protocol_id, envelope.performative):
        raise InvalidEnvelope(
            "performative",
            f"{envelope.performative.value} is illegal for protocol {envelope.protocol_id}",
        )
    if not envelope.dialogue_id:
        raise InvalidEnvelope("dialogue_id", "must be non-empty")
    if envelope.sent_at < 0:
        raise InvalidEnvelope("sent_at", "must be non-negative")
    for name in _HEADER_FIELDS:
        value = getattr(envelope, name)
        if isinstance(value, str) and ("\n" in value or "=" in value):
            raise InvalidEnvelope(name, "header values may not contain '=' or newlines")
    if not isinstance(envelope.content, Mapping):
        raise InvalidEnvelope("content", "must be a mapping")


def encode(envelope: Envelope) -> bytes:
    """Encode an envelope into its canonical wire form.

    Deterministic: equal envelopes produce identical byte sequences.
    Raises InvalidEnvelope on any invariant violation.
    """
    _check_envelope(envelope)
    lines = [WIRE_MAGIC]
    for name in _HEADER_FIELDS:
        value = getattr(envelope, name)
        if name == "performative":
            value = value.value
        elif name == "sent_at":
            value = str(value)
        elif value is None:
            value = ""
        lines.append(f"{name}={value}")
    lines.append("")
    body = json.dumps(dict(envelope.content), sort_keys=True, separators=(",", ":"))
    lines.append(body)
    return ("\n".join(lines) + "\n").encode("utf-8")


def decode(data: bytes) -> Envelope:
    """Decode a canonical wire encoding back into an envelope.

    Raises MalformedMessage for unparseable input and InvalidEnvelope when the
    parsed envelope violates an invariant.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedMessage(f"not UTF-8: {exc}") from None
    if not text.endswith("\n"):
        raise MalformedMessage("missing trailing newline")
    lines = text[:-1].split("\n")
    expected = 1 + len(_HEADER_FIELDS) + 2  # magic + headers + blank + body
    if len(lines) != expected:
        raise MalformedMessage(f"expected {expected} lines, got {len(lines)}")
    if lines[0] != WIRE_MAGIC:
        raise MalformedMessage(f"bad magic line {lines[0]!r}")
    headers: dict[str, str] = {}
    for expected_key, line in zip(_HEADER_FIELDS, lines[1 : 1 + len(_HEADER_FIELDS)]):
        key, sep, value = line.partition("=")
        if not sep or key != expected_key:
            raise MalformedMessage(f"expected header {expected_key!r}, got {line!r}")
        headers[key] = value
    if lines[1 + len(_HEADER_FIELDS)] != "":
        raise MalformedMessage("missing blank separator line")
    body_line = lines[-1]
    try:
        content = json.loads(body_line)
    except json.JSONDecodeError as exc:
        raise MalformedMessage(f"bad content JSON: {exc}") from None
    if not isinstance(content, dict):
        raise MalformedMessage("content body must be a JSON object")
    canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
    if canonical != body_line:
        raise MalformedMessage("content body is not canonical JSON")
    try:
        performative = Performative(headers["performative"])
    except ValueError:
        raise InvalidEnvelope("performative", f"unknown performative {headers['performative']!r}")
    try:
        sent_at = int(headers["sent_at"])
    except ValueError:
        raise MalformedMessage(f"sent_at is not an integer: {headers['sent_at']!r}")
    envelope = Envelope(
        sender=headers["sender"],
        receiver=headers["receiver"],
        protocol_id=headers["protocol_id"],
        ontology_id=headers["ontology_id"],
        performative=performative,
        dialogue_id=headers["dialogue_id"],
        reply_with=headers["reply_with"] or None,
        in_reply_to=headers["in_reply_to"] or None,
        sent_at=sent_at,
        content=content,
    )
    _check_envelope(envelope)
    return envelope


# --- Ontologies ------------------------------------------------------------
#
# An ontology is a named content schema: per performative, the required fields
# and their semantic types. Performatives not listed for an ontology accept
# any body (they carry free-form notifications or reasons).

_NUMBER = (int, float)

OntologySchema = dict[Performative, dict[str, tuple[type, ...]]]

ONTOLOGIES: dict[str, OntologySchema] = {
    "meat_trade": {
        Performative.CFP: {"sku": (str,), "quantity_kg": _NUMBER},
        Performative.PROPOSE: {
            "sku": (str,),
            "quantity_kg": _NUMBER,
            "unit_price": _NUMBER,
            "delivery_options": (list,),
        },
        Performative.ACCEPT_PROPOSAL: {"sku": (str,), "quantity_kg": _NUMBER},
        Performative.REJECT_PROPOSAL: {"sku": (str,)},
        Performative.REFUSE: {"reason": (str,)},
        Performative.INFORM: {"sku": (str,), "quantity_kg": _NUMBER},
    },
    "delivery_service": {
        Performative.REQUEST_GET: {"kind": (str,)},
        Performative.REQUEST_POST: {"kind": (str,)},
        Performative.RESPONSE: {},
    },
    "telemetry": {
        Performative.INFORM: {
            "tracking_id": (str,),
            "t_ms": _NUMBER,
            "lat": _NUMBER,
            "lon": _NUMBER,
            "temp_c": _NUMBER,
            "humidity_pct": _NUMBER,
        },
    },
    "discovery": {
        Performative.REQUEST_GET: {"query": (list,)},
        Performative.REQUEST_POST: {"action": (str,)},
        Performative.RESPONSE: {},
    },
}


def validate_content(
    ontology_id: str, performative: Performative, content: Mapping[str, Any]
) -> list[str]:
    """Check content against the (ontology, performative) schema.

    Returns a list of violations; empty means ok. Raises UnknownOntology for
    unregistered ontology identifiers.
    """
    schema = ONTOLOGIES.get(ontology_id)
    if schema is None:
        raise UnknownOntology(ontology_id)
    required = schema.get(performative)
    if required is None:
        return []
    violations = []
    for name, types in sorted(required.items()):
        if name not in content:
            violations.append(f"missing {name}")
        elif not isinstance(content[name], types) or isinstance(content[name], bool):
            violations.append(f"{name} has wrong type {type(content[name]).__name__}")
    return violations
