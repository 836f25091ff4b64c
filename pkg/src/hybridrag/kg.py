"""Structured-fact retrieval from the mock knowledge-graph API.

Two planners produce function-call plans: a deterministic rule table
keyed on (domain, entity, query keywords), and an LLM function-calling
prompt whose JSON output is parsed leniently. Plans execute against
either an in-process stub or the HTTP mock API; per-call failures
degrade to fewer facts, never errors.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .providers import GenerationProvider, GenerationRequest

logger = logging.getLogger(__name__)

MAX_CALLS_PER_PLAN = 8
KG_CALL_TIMEOUT_S = 2.0


class MalformedPlanError(Exception):
    """No JSON array found, or an element violates the call schema."""


@dataclass(frozen=True)
class FunctionCall:
    function_name: str
    args: tuple[str, ...]

    def render(self) -> str:
        return f'{{"function_name": "{self.function_name}", "args": {json.dumps(list(self.args))}}}'


@dataclass(frozen=True)
class KGFact:
    text: str
    source_call: FunctionCall


@dataclass(frozen=True)
class Endpoint:
    name: str
    description: str
    arity: int = 1


# The mock API's true surface is configurable; this default registry has
# the two endpoints the function-calling examples use plus three more
# for rule coverage across domains.
DEFAULT_ENDPOINTS = (
    Endpoint(
        "finance_get_market_capitalization",
        "finance_get_market_capitalization(ticker: str) -> market capitalization for the ticker",
    ),
    Endpoint(
        "music_get_members",
        "music_get_members(band_name: str) -> list of member names of the band",
    ),
    Endpoint(
        "finance_get_stock_price",
        "finance_get_stock_price(ticker: str) -> latest stock price for the ticker",
    ),
    Endpoint(
        "music_get_artist_birth_date",
        "music_get_artist_birth_date(artist_name: str) -> birth date of the artist",
    ),
    Endpoint(
        "sports_get_team_last_match",
        "sports_get_team_last_match(team_name: str) -> result of the team's last match",
    ),
)


@dataclass
class EndpointRegistry:
    endpoints: dict[str, Endpoint] = field(default_factory=dict)

    @classmethod
    def default(cls) -> "EndpointRegistry":
        return cls({e.name: e for e in DEFAULT_ENDPOINTS})

    @classmethod
    def from_file(cls, path: str) -> "EndpointRegistry":
        with open(path, encoding="utf-8") as fh:
            entries = json.load(fh)
        endpoints = {
            e["name"]: Endpoint(e["name"], e.get("description", ""), e.get("arity", 1))
            for e in entries
        }
        return cls(endpoints)

    def __contains__(self, name: str) -> bool:
        return name in self.endpoints

    def tools_text(self) -> str:
        return "\n".join(f"- {e.description}" for e in self.endpoints.values())


_KG_SYSTEM_TEMPLATE = """
You are a helpful assistant in function calling. I have a knowledge graph and a set of functions that can be called. You will be given a question and the query time. Your task is to generate several function calls that can help me answer the question. Here are functions and their descriptions:
{tools}
Remember your rules:
1. You **MUST** follow the function signature.
2. You **MUST** output the JSON format that can be read by `json.loads`. Return empty list if no useful function calls can be found.
3. For each function call, you should output its function name and corresponding arguments.

Here are examples:

# Example 1:
Query: which company have larger market cap, hri or imppp?
Query time: 03/13/2024, 10:19:56 PT
Output: [
    {{"function_name": "finance_get_market_capitalization", "args": ["hri"]}},
    {{"function_name": "finance_get_market_capitalization", "args": ["imppp"]}}
]

# Example 2:
Query: who are the current members of the band eagles?
Query time: 03/05/2024, 23:17:59 PT
Output: [
    {{"function_name": "music_get_members", "args": ["eagles"]}}
]
"""

_KG_USER_RULES = """
Remember your rules:
1. You **MUST** follow the function signature.
2. You **MUST** output the JSON format that can be read by `json.loads`.
3. For each function call, you should output its function name and corresponding arguments.
"""


def build_call_prompt(
    query: str, query_time: str, registry: EndpointRegistry
) -> GenerationRequest:
    user_message = f"Question: {query}\n"
    user_message += f"Query time: {query_time}\n"
    user_message += "Using the tools listed above and based on the question, generate useful function calls for me. \n"
    user_message += _KG_USER_RULES
    return GenerationRequest(
        system_prompt=_KG_SYSTEM_TEMPLATE.format(tools=registry.tools_text()),
        user_prompt=user_message,
        n_samples=1,
        temperature=0.0,
        max_tokens=256,
    )


def _iter_json_arrays(text: str):
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\[", text):
        try:
            value, _ = decoder.raw_decode(text, match.start())
        except ValueError:
            continue
        if isinstance(value, list):
            yield value


def _calls_from_array(array: list) -> list[FunctionCall]:
    calls: list[FunctionCall] = []
    for element in array:
        if not isinstance(element, dict):
            raise MalformedPlanError(f"plan element is not an object: {element!r}")
        name = element.get("function_name")
        args = element.get("args")
        if not isinstance(name, str) or not name:
            raise MalformedPlanError(f"bad function_name in {element!r}")
        if not isinstance(args, list) or not all(isinstance(a, str) for a in args):
            raise MalformedPlanError(f"args must be a list of strings in {element!r}")
        calls.append(FunctionCall(name, tuple(args)))
    return calls


def parse_call_plan(
    completion: str, registry: EndpointRegistry | None = None
) -> list[FunctionCall]:
    """Extract the first conforming JSON call array from a completion.

    Surrounding prose and code fences are tolerated; arrays that do not
    match the call schema are skipped in favor of a later one that does.
    Unregistered function names are dropped with a warning when a
    registry is given.
    """
    first_error: MalformedPlanError | None = None
    calls = None
    for array in _iter_json_arrays(completion):
        try:
            calls = _calls_from_array(array)
            break
        except MalformedPlanError as exc:
            first_error = first_error or exc
    if calls is None:
        raise first_error or MalformedPlanError("no JSON array in completion")
    kept: list[FunctionCall] = []
    for call in calls:
        if registry is not None and call.function_name not in registry:
            logger.warning("dropping call to unregistered function %s", call.function_name)
            continue
        kept.append(call)
    return kept


_BIRTH_WORDS = re.compile(r"\b(born|birth|birthday)\b", re.IGNORECASE)
_PRICE_WORDS = re.compile(r"\b(price|stock|share)\b", re.IGNORECASE)


def rule_based_plan(
    query: str,
    query_time: str,
    entities: Sequence[str],
    domain: str,
) -> list[FunctionCall]:
    """Deterministic per-domain call plan over extracted entities.

    Music maps to the members endpoint (plus birth date when the query
    asks about one), finance to market cap (plus price on price/stock
    wording), sports to the last-match endpoint. Other domains produce
    an empty plan.
    """
    calls: list[FunctionCall] = []
    for entity in entities:
        entity = entity.strip().lower()
        if not entity:
            continue
        if domain == "music":
            calls.append(FunctionCall("music_get_members", (entity,)))
            if _BIRTH_WORDS.search(query):
                calls.append(FunctionCall("music_get_artist_birth_date", (entity,)))
        elif domain == "finance":
            calls.append(FunctionCall("finance_get_market_capitalization", (entity,)))
            if _PRICE_WORDS.search(query):
                calls.append(FunctionCall("finance_get_stock_price", (entity,)))
        elif domain == "sports":
            calls.append(FunctionCall("sports_get_team_last_match", (entity,)))
    return calls[:MAX_CALLS_PER_PLAN]


ENTITY_SYSTEM_PROMPT = (
    "You are a helpful assistant. You will be given a question. Your task is to "
    "extract the named entities in the question that could be used to query a "
    "knowledge base. You **MUST** output a JSON list of strings that can be read "
    "by `json.loads`. Return an empty list if there is no useful entity. "
    "You **MUST NOT** output any other words."
)


def extract_entities(query: str, provider: GenerationProvider) -> list[str]:
    """One LLM call to pull query entities; degrades to [] on any failure."""
    req = GenerationRequest(
        system_prompt=ENTITY_SYSTEM_PROMPT,
        user_prompt=f"Question: {query}\nExtract the entities for me.",
        n_samples=1,
        temperature=0.0,
        max_tokens=64,
    )
    try:
        completion = provider.generate(req).completions[0]
    except Exception:
        return []
    for array in _iter_json_arrays(completion):
        return [e for e in array if isinstance(e, str) and e.strip()]
    return []


class KgApi(Protocol):
    def call(self, function_name: str, args: Sequence[str]) -> str: ...


class StubKgApi:
    """In-process mock API: function name -> handler(args) -> JSON-able."""

    def __init__(self, handlers: dict[str, Callable[[Sequence[str]], object]]):
        self.handlers = handlers

    def call(self, function_name: str, args: Sequence[str]) -> str:
        handler = self.handlers.get(function_name)
        if handler is None:
            raise KeyError(function_name)
        return json.dumps(handler(args))


class HttpKgApi:
    """Client for the mock API wire: POST /<function_name> {"args": [...]}."""

    def __init__(self, endpoint: str, timeout: float = KG_CALL_TIMEOUT_S):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def call(self, function_name: str, args: Sequence[str]) -> str:
        import requests

        resp = requests.post(
            f"{self.endpoint}/{function_name}",
            json={"args": list(args)},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return resp.text


def execute_plan(plan: Sequence[FunctionCall], api: KgApi) -> list[KGFact]:
    """Run calls in order; failures skip that call, order is preserved."""
    facts: list[KGFact] = []
    for call in plan[:MAX_CALLS_PER_PLAN]:
        try:
            body = api.call(call.function_name, call.args)
        except Exception as exc:
            logger.warning("kg call %s failed: %s", call.function_name, exc)
            continue
        rendered_args = ", ".join(repr(a) for a in call.args)
        facts.append(KGFact(f"{call.function_name}({rendered_args}) -> {body}", call))
    return facts


def render_plan(plan: Sequence[FunctionCall]) -> str:
    """Plan as the JSON array format the function-calling prompt expects."""
    return json.dumps(
        [{"function_name": c.function_name, "args": list(c.args)} for c in plan]
    )
