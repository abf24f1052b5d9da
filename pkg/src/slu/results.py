"""Parse result types, serialized with the field names of the NLU output format."""
from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class Slot:
    slot_name: str
    entity: str
    span: tuple
    raw_value: str
    token_range: tuple = None
    value: object = None  # str for custom entities, resolved value object for built-ins

    def resolved(self, value):
        return replace(self, value=value)

    def to_json(self):
        if self.value is None:
            value = self.raw_value
        elif isinstance(self.value, str):
            value = self.value
        else:
            value = self.value.to_json()
        return {
            "rawValue": self.raw_value,
            "value": value,
            "entity": self.entity,
            "slot_name": self.slot_name,
            "range": {"start": self.span[0], "end": self.span[1]},
        }


@dataclass(frozen=True)
class ParseResult:
    text: str
    intent: str | None
    probability: float
    slots: tuple = field(default_factory=tuple)

    def to_json(self):
        return {
            "text": self.text,
            "intent": {"intentName": self.intent, "probability": self.probability},
            "slots": [s.to_json() for s in self.slots],
        }
