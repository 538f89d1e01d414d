"""Code-generation backends, response extraction, and patch vetting.

Two interchangeable backends produce candidate C code from a rendered
prompt: an HTTP chat-completion client (always temperature 0, one system
message for the cue and one user message for the rest) and an offline
knowledge-base backend that resolves element names to canonical snippets
and is fully deterministic, which makes it the test oracle.
"""

from __future__ import annotations

import json
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from halgen.errors import HalgenError
from halgen.analysis import (
    ElementKind,
    MissingElement,
    SymbolTable,
    collect_external_references,
)
from halgen.c_ast import (
    FunctionDef,
    GlobalDecl,
    IncludeDirective,
    LexError,
    MacroConst,
    ParseError,
    TopLevelItem,
    item_name,
    parse,
)
from halgen.prompting import RenderedPrompt

NETWORK = "network"
AUTH = "auth"
RATE_LIMIT = "rate_limit"
MALFORMED_RESPONSE = "malformed_response"

_RETRYABLE = (NETWORK, RATE_LIMIT)


class BackendError(HalgenError):
    def __init__(self, category: str, message: str):
        super().__init__(f"{category}: {message}")
        self.category = category


class EmptyGeneration(HalgenError):
    pass


class KnowledgeBaseError(HalgenError):
    pass


@dataclass
class ChatRequest:
    model: str
    temperature: int
    messages: list[tuple[str, str]]  # (role, content)


@dataclass
class GenerationResult:
    raw_text: str
    extracted_code: str
    backend_id: str
    call_index: int  # 1-based within one backend instance
    provisional: bool = False  # True for knowledge-base fallback stubs


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def extract_code(raw_text: str) -> str:
    """Contents of the first fenced code block, else the trimmed raw text."""
    match = _FENCE_RE.search(raw_text)
    code = match.group(1) if match else raw_text
    code = code.strip()
    if not code:
        raise EmptyGeneration("generation produced no code")
    return code


def chat_request_from_prompt(prompt: RenderedPrompt, model: str) -> ChatRequest:
    """Map the five sections onto a two-message chat: cue is the system
    message, the remaining sections joined by blank lines are the user one."""
    cue = prompt.sections[0][1]
    user = "\n\n".join(text for _, text in prompt.sections[1:])
    return ChatRequest(model=model, temperature=0, messages=[("system", cue), ("user", user)])


def generate(backend, prompt: RenderedPrompt) -> GenerationResult:
    """Invoke `backend` exactly once for `prompt`."""
    return backend.generate(prompt)


# --- HTTP backend ----------------------------------------------------------


@dataclass
class HttpBackendConfig:
    endpoint: str
    model: str = "gpt-4o-mini"
    auth_env: str = "HALGEN_API_KEY"
    timeout_s: float = 30.0
    max_retries: int = 2
    backoff_s: tuple[float, ...] = (1.0, 4.0)


class HttpBackend:
    """POSTs the chat wire format to a configured endpoint.

    The bearer token comes from the configured environment variable only.
    Network and rate-limit failures are retried with backoff; auth failures
    and malformed responses are not.
    """

    backend_id = "http"

    def __init__(self, config: HttpBackendConfig, sleep=time.sleep):
        self.config = config
        self._sleep = sleep
        self._calls = 0

    def generate(self, prompt: RenderedPrompt) -> GenerationResult:
        request = chat_request_from_prompt(prompt, self.config.model)
        body = json.dumps({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{"role": role, "content": content} for role, content in request.messages],
        })
        attempt = 0
        while True:
            try:
                raw = self._post(body)
                break
            except BackendError as err:
                if err.category not in _RETRYABLE or attempt >= self.config.max_retries:
                    raise
                delay = self.config.backoff_s[min(attempt, len(self.config.backoff_s) - 1)] \
                    if self.config.backoff_s else 0.0
                if delay:
                    self._sleep(delay)
                attempt += 1
        self._calls += 1
        return GenerationResult(raw, extract_code(raw), self.backend_id, self._calls)

    def _post(self, body: str) -> str:
        token = os.environ.get(self.config.auth_env)
        if not token:
            raise BackendError(AUTH, f"environment variable {self.config.auth_env} is not set")
        request = urllib.request.Request(
            self.config.endpoint,
            data=body.encode("utf-8"),
            headers={"Authorization": f"Bearer {token}", "Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout_s) as response:
                payload = response.read()
        except urllib.error.HTTPError as err:
            if err.code in (401, 403):
                raise BackendError(AUTH, f"HTTP {err.code}") from err
            if err.code == 429:
                raise BackendError(RATE_LIMIT, "HTTP 429") from err
            raise BackendError(NETWORK, f"HTTP {err.code}") from err
        except (urllib.error.URLError, TimeoutError, OSError) as err:
            raise BackendError(NETWORK, str(err)) from err
        try:
            data = json.loads(payload.decode("utf-8"))
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise BackendError(MALFORMED_RESPONSE, f"unexpected response body: {err}") from err
        if not isinstance(content, str):
            raise BackendError(MALFORMED_RESPONSE, "message content is not a string")
        return content


# --- knowledge-base backend -------------------------------------------------


@dataclass
class KnowledgeBase:
    """Canonical element-name -> source-text store backing the offline backend."""

    entries: dict[str, str]
    kinds: dict[str, ElementKind]

    @classmethod
    def load(cls, directory: str | Path) -> "KnowledgeBase":
        """Load `<name>.c` snippets listed by `manifest.json`.

        Every entry must parse and define exactly its keyed name.
        """
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if not manifest_path.is_file():
            raise KnowledgeBaseError(f"missing manifest: {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        entries: dict[str, str] = {}
        kinds: dict[str, ElementKind] = {}
        for record in manifest.get("entries", []):
            name = record["name"]
            kind = ElementKind(record["kind"])
            snippet_path = directory / f"{name}.c"
            if not snippet_path.is_file():
                raise KnowledgeBaseError(f"manifest entry '{name}' has no snippet file")
            text = snippet_path.read_text(encoding="utf-8")
            try:
                unit = parse(text, snippet_path.name)
            except (ParseError, LexError) as err:
                raise KnowledgeBaseError(f"entry '{name}' does not parse: {err}") from err
            defined = [item_name(i) for i in unit.items if item_name(i) is not None]
            if defined != [name]:
                raise KnowledgeBaseError(
                    f"entry '{name}' must define exactly that name, found {defined}")
            entries[name] = text
            kinds[name] = kind
        return cls(entries, kinds)


_QUOTED_NAME_RE = re.compile(r"'([A-Za-z_][A-Za-z0-9_]*)'")
_ARITY_RE = re.compile(r"with (\d+) parameters")


def _fallback_stub(name: str, kind: ElementKind, arity: int) -> str:
    if kind is ElementKind.CONSTANT:
        return f"#define {name} 0x00"
    params = ", ".join(f"uint32_t p{i}" for i in range(arity)) or "void"
    return f"uint32_t {name}({params}) {{\n    return 0;\n}}"


class KbBackend:
    """Deterministic offline backend: looks the requested element name up in
    the knowledge base and falls back to a provisional stub on a miss."""

    backend_id = "kb"

    def __init__(self, kb: KnowledgeBase):
        self.kb = kb
        self._calls = 0

    def generate(self, prompt: RenderedPrompt) -> GenerationResult:
        instructions = prompt.section("Instructions")
        match = _QUOTED_NAME_RE.search(instructions)
        if not match:
            raise BackendError(MALFORMED_RESPONSE, "prompt instructions name no element")
        name = match.group(1)
        self._calls += 1
        text = self.kb.entries.get(name)
        if text is not None:
            return GenerationResult(text, extract_code(text), self.backend_id, self._calls)
        kind = ElementKind.CONSTANT if "`#define` constant definition" in instructions \
            else ElementKind.FUNCTION
        arity_match = _ARITY_RE.search(instructions)
        arity = int(arity_match.group(1)) if arity_match else 0
        stub = _fallback_stub(name, kind, arity)
        return GenerationResult(stub, extract_code(stub), "kb-fallback", self._calls, provisional=True)


# --- vetting ----------------------------------------------------------------


class RejectionReason(Enum):
    PARSE_FAILED = "ParseFailed"
    WRONG_NAME = "WrongName"
    WRONG_ARITY = "WrongArity"
    FORBIDDEN_REFERENCE = "ForbiddenReference"
    UNKNOWN_REFERENCE = "UnknownReference"
    MULTIPLE_DEFINITIONS = "MultipleDefinitions"


# Defaults target the vendor HAL namespace. The uppercase HAL_ prefix is
# matched case-sensitively: lowercase hal_* is the naming scheme of the
# generated layer itself and must stay legal.
DEFAULT_FORBIDDEN_PATTERNS = (r"^HAL_", r"(?i)^stm32", r"(?i)_hal")


@dataclass
class VetPolicy:
    forbidden_name_patterns: tuple[str, ...] = DEFAULT_FORBIDDEN_PATTERNS
    allowed_external_names: frozenset[str] = frozenset()
    strict: bool = False  # reject references to names nobody defines yet


@dataclass
class VettedPatch:
    name: str
    kind: ElementKind
    items: list[TopLevelItem]
    source_text: str


@dataclass
class Rejection:
    reasons: list[str]  # RejectionReason values, sorted, unique


def _matches_forbidden(name: str, patterns: tuple[str, ...]) -> bool:
    return any(re.search(pattern, name) for pattern in patterns)


def vet_patch(
    code: str,
    elem: MissingElement,
    table: SymbolTable,
    policy: VetPolicy | None = None,
) -> VettedPatch | Rejection:
    """Accept `code` only if it cleanly defines the requested element.

    Checks: parses; defines exactly the requested name with the right kind
    (and arity, for functions); no referenced or defined name matches a
    forbidden pattern; and, in strict mode, no reference to a name that is
    neither defined, already expected, nor allowed by the policy.
    """
    policy = policy or VetPolicy()
    try:
        unit = parse(code, "<patch>")
    except (ParseError, LexError):
        return Rejection([RejectionReason.PARSE_FAILED.value])

    reasons: set[str] = set()
    named_items = [item for item in unit.items if item_name(item) is not None]
    targets = [item for item in named_items if item_name(item) == elem.name]
    if not targets:
        reasons.add(RejectionReason.WRONG_NAME.value)
    elif len(targets) > 1:
        reasons.add(RejectionReason.MULTIPLE_DEFINITIONS.value)
    else:
        target = targets[0]
        if elem.kind is ElementKind.FUNCTION:
            if not isinstance(target, FunctionDef):
                reasons.add(RejectionReason.WRONG_NAME.value)
            elif elem.arity is not None and len(target.params) != elem.arity:
                reasons.add(RejectionReason.WRONG_ARITY.value)
        elif not isinstance(target, (MacroConst, GlobalDecl)):
            reasons.add(RejectionReason.WRONG_NAME.value)

    if policy.strict and (len(named_items) > 1 or any(
            isinstance(item, IncludeDirective) for item in unit.items)):
        reasons.add(RejectionReason.MULTIPLE_DEFINITIONS.value)

    defined_names = {item_name(item) for item in named_items}
    referenced = {ref.name for ref in collect_external_references(unit)} - defined_names

    for name in sorted(defined_names | referenced):
        if name and _matches_forbidden(name, policy.forbidden_name_patterns):
            reasons.add(RejectionReason.FORBIDDEN_REFERENCE.value)

    unknown = referenced - set(table.definitions) - set(policy.allowed_external_names) - {elem.name}
    if unknown and policy.strict:
        reasons.add(RejectionReason.UNKNOWN_REFERENCE.value)

    # extra definitions that collide with existing ones would corrupt the
    # project on insertion, in any mode
    collisions = (defined_names - {elem.name}) & set(table.definitions)
    if collisions:
        reasons.add(RejectionReason.MULTIPLE_DEFINITIONS.value)

    if reasons:
        return Rejection(sorted(reasons))
    insertable = [item for item in unit.items if not isinstance(item, IncludeDirective)]
    return VettedPatch(elem.name, elem.kind, insertable, code)
