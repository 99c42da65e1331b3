"""LLM-backed policy over a minimal chat wire protocol.

Request: ``POST {"messages": [{"role", "content"}, ...]}`` with a bearer token.
Response: ``{"content": str}``; the first fenced JSON block is the plan.
"""

from __future__ import annotations

import json
import os
import re
import time
from typing import Any, Callable, Optional, Sequence

import httpx

from .. import canonical
from ..errors import ParseError, PlanError, TransportError
from ..toolkit import signatures
from .plan import PlanProgram

ENDPOINT_VAR = "AGRO_LLM_ENDPOINT"
KEY_VAR = "AGRO_LLM_KEY"
_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)

SYSTEM_PROMPT = """You solve agricultural analysis tasks by writing a JSON tool plan.
Reply with one fenced ```json block holding {"steps": [{"id": ..., "call": {"tool": ..., "args": {...}}}], "answer": {...}}.
Any argument or answer leaf may be {"ref": "<earlier step id>", "path": "dotted.path"}.
The answer must match the output schema exactly. Available tools:
"""


def parse_plan(content: str) -> PlanProgram:
    """Extract and decode the first fenced JSON block of a model reply."""
    m = _FENCE.search(content or "")
    if m is None:
        raise ParseError("reply holds no fenced JSON block", observed=(content or "")[:200])
    try:
        doc = json.loads(m.group(1))
    except json.JSONDecodeError as exc:
        raise ParseError(f"fenced block is not valid JSON: {exc.msg}", observed=m.group(1)[:200]) from None
    try:
        plan = PlanProgram.from_json(doc)
    except PlanError as exc:
        raise ParseError(f"JSON block is not a plan: {exc.message}", observed=doc) from None
    return plan


def build_messages(memory: Any) -> list[dict[str, str]]:
    task = memory.task
    msgs = [
        {"role": "system", "content": SYSTEM_PROMPT + canonical.dumps(signatures(memory.ctx))},
        {"role": "user", "content": "Task:\n" + canonical.dumps(task.public_view())},
    ]
    for turn in memory.turns:
        msgs.append({"role": "assistant", "content": "```json\n" + canonical.dumps(turn.plan.to_json()) + "\n```"})
        feedback = {"observations": turn.observations, "answer": turn.answer, "diagnostics": turn.feedback}
        msgs.append({"role": "user", "content": "Result:\n" + canonical.dumps(feedback) + "\nFix the plan."})
    return msgs


class RemotePolicy:
    name = "remote"
    reflective = False

    def __init__(
        self,
        endpoint: str,
        key: Optional[str] = None,
        *,
        timeout: float = 60.0,
        backoff: Sequence[float] = (0.5, 1.0),
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.endpoint = endpoint
        self.key = key
        self.timeout = timeout
        self.backoff = tuple(backoff)
        self.client = client or httpx.Client(timeout=timeout)
        self.sleep = sleep

    @classmethod
    def from_env(cls, **kwargs: Any) -> "RemotePolicy":
        endpoint = os.environ.get(ENDPOINT_VAR)
        if not endpoint:
            raise TransportError(f"{ENDPOINT_VAR} is not set", path=ENDPOINT_VAR)
        return cls(endpoint, os.environ.get(KEY_VAR), **kwargs)

    def fault_for(self, task: Any) -> None:
        return None

    def _post(self, messages: list[dict[str, str]]) -> str:
        headers = {"Authorization": f"Bearer {self.key}"} if self.key else {}
        last: Optional[Exception] = None
        for attempt in range(len(self.backoff) + 1):
            if attempt:
                self.sleep(self.backoff[attempt - 1])
            try:
                resp = self.client.post(self.endpoint, json={"messages": messages}, headers=headers)
                resp.raise_for_status()
                body = resp.json()
            except (httpx.HTTPError, ValueError) as exc:
                last = exc
                continue
            if not isinstance(body, dict) or not isinstance(body.get("content"), str):
                raise ParseError("response body lacks a string 'content' field", observed=str(body)[:200])
            return body["content"]
        raise TransportError(
            f"endpoint unreachable after {len(self.backoff)} retries: {last!r}", path=ENDPOINT_VAR, observed=repr(last)
        )

    def propose(self, memory: Any) -> PlanProgram:
        """One round trip; parse failures become an empty plan carrying the diagnostic."""
        try:
            content = self._post(build_messages(memory))
            return parse_plan(content)
        except ParseError as exc:
            return PlanProgram(diagnostic=exc.to_diagnostic())
