"""OpenAI-compatible function-calling wire format for router decisions.

Exactly two functions exist on the wire: `call_model` dispatches a downstream
model, `select_response` adopts a prior call's response verbatim. A plain
content message is a direct answer before any tool call has happened in the
episode and a final synthesis afterwards; the wire carries no extra field
for that distinction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .ledger import CallRecord
from .money import usd_string

CALL_MODEL = "call_model"
SELECT_RESPONSE = "select_response"


class ProtocolError(ValueError):
    """Wire document rejected; `code` is machine-readable."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class CallModel:
    model_name: str
    payload: str
    system_prompt_override: str | None = None
    temperature: float | None = None
    top_p: float | None = None


@dataclass(frozen=True)
class SelectResponse:
    source_call_id: str


ToolCall = Union[CallModel, SelectResponse]


@dataclass(frozen=True)
class DirectAnswer:
    text: str


@dataclass(frozen=True)
class FinalSynthesis:
    text: str


@dataclass(frozen=True)
class ToolCalls:
    calls: tuple[ToolCall, ...]


RouterMessage = Union[DirectAnswer, FinalSynthesis, ToolCalls]


def _decode_document(raw: bytes | str | dict) -> dict:
    if isinstance(raw, dict):
        return raw
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError("invalid-document", f"not UTF-8: {exc}") from exc
    if isinstance(raw, str):
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError("invalid-document", f"not JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ProtocolError("invalid-document", "message must be a JSON object")
        return doc
    raise ProtocolError("invalid-document", f"unsupported message type {type(raw).__name__}")


def _parse_arguments(entry: dict, index: int) -> dict:
    function = entry.get("function")
    if not isinstance(function, dict):
        raise ProtocolError("malformed-arguments", f"tool_calls[{index}]: missing function block")
    raw_args = function.get("arguments", "{}")
    if isinstance(raw_args, dict):
        return raw_args
    try:
        args = json.loads(raw_args)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ProtocolError(
            "malformed-arguments", f"tool_calls[{index}]: arguments are not JSON: {exc}"
        ) from exc
    if not isinstance(args, dict):
        raise ProtocolError("malformed-arguments", f"tool_calls[{index}]: arguments not an object")
    return args


def _parse_tool_call(entry: object, index: int) -> ToolCall:
    if not isinstance(entry, dict):
        raise ProtocolError("malformed-arguments", f"tool_calls[{index}] must be an object")
    function = entry.get("function") or {}
    name = function.get("name") if isinstance(function, dict) else None
    if name == CALL_MODEL:
        args = _parse_arguments(entry, index)
        model = args.get("model")
        payload = args.get("payload")
        if not isinstance(model, str) or not isinstance(payload, str):
            raise ProtocolError(
                "malformed-arguments",
                f"tool_calls[{index}]: call_model needs string 'model' and 'payload'",
            )
        temperature = args.get("temperature")
        top_p = args.get("top_p")
        if temperature is not None and not isinstance(temperature, (int, float)):
            raise ProtocolError("malformed-arguments", f"tool_calls[{index}]: bad temperature")
        if top_p is not None and not isinstance(top_p, (int, float)):
            raise ProtocolError("malformed-arguments", f"tool_calls[{index}]: bad top_p")
        system_prompt = args.get("system_prompt")
        if system_prompt is not None and not isinstance(system_prompt, str):
            raise ProtocolError("malformed-arguments", f"tool_calls[{index}]: bad system_prompt")
        return CallModel(
            model_name=model,
            payload=payload,
            system_prompt_override=system_prompt,
            temperature=float(temperature) if temperature is not None else None,
            top_p=float(top_p) if top_p is not None else None,
        )
    if name == SELECT_RESPONSE:
        args = _parse_arguments(entry, index)
        call_id = args.get("call_id")
        if not isinstance(call_id, str):
            raise ProtocolError(
                "malformed-arguments", f"tool_calls[{index}]: select_response needs 'call_id'"
            )
        return SelectResponse(source_call_id=call_id)
    raise ProtocolError("unknown-function", f"tool_calls[{index}]: unknown function {name!r}")


def parse_router_message(raw: bytes | str | dict, after_tool_calls: bool = False) -> RouterMessage:
    """Parse a chat message into a typed router decision.

    `after_tool_calls` disambiguates plain content: it is a direct answer only
    while no tool call has happened in the episode yet, otherwise a final
    synthesis. Never crashes on garbage input; raises ProtocolError instead.
    """
    doc = _decode_document(raw)
    tool_calls = doc.get("tool_calls")
    if tool_calls is None:
        content = doc.get("content")
        if not isinstance(content, str):
            raise ProtocolError("missing-content", "message has neither content nor tool_calls")
        return FinalSynthesis(content) if after_tool_calls else DirectAnswer(content)
    if not isinstance(tool_calls, list):
        raise ProtocolError("invalid-document", "tool_calls must be an array")
    if not tool_calls:
        raise ProtocolError("empty-tool-calls", "tool_calls array is empty")
    calls = tuple(_parse_tool_call(entry, i) for i, entry in enumerate(tool_calls))
    return ToolCalls(calls=calls)


def serialize_router_message(message: RouterMessage) -> dict:
    """Inverse of parse_router_message (round-trips under the matching phase)."""
    if isinstance(message, (DirectAnswer, FinalSynthesis)):
        return {"role": "assistant", "content": message.text}
    entries = []
    for i, call in enumerate(message.calls):
        if isinstance(call, CallModel):
            args: dict = {"model": call.model_name, "payload": call.payload}
            if call.system_prompt_override is not None:
                args["system_prompt"] = call.system_prompt_override
            if call.temperature is not None:
                args["temperature"] = call.temperature
            if call.top_p is not None:
                args["top_p"] = call.top_p
            name = CALL_MODEL
        else:
            args = {"call_id": call.source_call_id}
            name = SELECT_RESPONSE
        entries.append(
            {
                "id": f"tc-{i}",
                "type": "function",
                "function": {"name": name, "arguments": json.dumps(args, separators=(",", ":"))},
            }
        )
    return {"role": "assistant", "content": None, "tool_calls": entries}


def validate_calls(
    calls: Sequence[ToolCall],
    *,
    model_names: Iterable[str],
    prior_call_ids: Iterable[str],
    fan_out_cap: int,
) -> list[dict]:
    """Check a turn's calls against the catalog snapshot and episode limits.

    Returns the full list of violations (empty means the turn may dispatch).
    A turn mixing select_response with anything else is rejected: adopting a
    response is terminal, so extra calls in the same turn would be dead spend.
    """
    violations: list[dict] = []
    known_models = set(model_names)
    known_ids = set(prior_call_ids)
    selects = [c for c in calls if isinstance(c, SelectResponse)]
    model_calls = [c for c in calls if isinstance(c, CallModel)]
    if len(selects) + len(model_calls) != len(calls):
        violations.append({"code": "unknown-call-kind"})
    if selects and model_calls:
        violations.append({"code": "mixed-call-kinds"})
    if len(selects) > 1:
        violations.append({"code": "multiple-select"})
    if len(model_calls) > fan_out_cap:
        violations.append(
            {"code": "fan-out-exceeded", "count": len(model_calls), "cap": fan_out_cap}
        )
    for call in model_calls:
        if call.model_name not in known_models:
            violations.append({"code": "unknown-model", "model": call.model_name})
        if call.temperature is not None and not 0.0 <= call.temperature <= 2.0:
            violations.append({"code": "temperature-out-of-range", "value": call.temperature})
        if call.top_p is not None and not 0.0 < call.top_p <= 1.0:
            violations.append({"code": "top-p-out-of-range", "value": call.top_p})
    for call in selects:
        if call.source_call_id not in known_ids:
            violations.append({"code": "unknown-call-id", "call_id": call.source_call_id})
    return violations


def serialize_tool_result(
    record: CallRecord, response_text: str, correctness_hint: bool | None = None
) -> dict:
    """Tool-role message carrying one call's outcome, usage, and cost.

    Field order is fixed so the same inputs always serialize to the same
    bytes. Failed calls carry an empty text and the outcome as error marker.
    The correctness hint (simulated/cached pools only) rides along so policies
    that accept-or-escalate can work from the wire alone.
    """
    ok = record.outcome == "ok"
    message = {
        "role": "tool",
        "tool_call_id": record.call_id,
        "content": response_text if ok else "",
        "metadata": {
            "model": record.model_name,
            "outcome": record.outcome,
            "error": None if ok else record.outcome,
            "usage": {
                "prompt_tokens": record.usage.prompt_tokens,
                "completion_tokens": record.usage.completion_tokens,
            },
            "cost_nano_usd": record.cost,
            "cost_usd": usd_string(record.cost),
            "latency_ms": record.latency_ms,
            "cached": record.cached,
        },
    }
    if correctness_hint is not None:
        message["metadata"]["correctness_hint"] = correctness_hint
    return message
