"""Few-shot prompting of a text-generation service for Prolog programs.

A completion service is anything with ``complete(prompt, stop) -> str``.
HttpCompletionService talks JSON over HTTP; tests and offline runs use
other implementations or load_offline.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol

import httpx

from .parser import ParseDiagnostic, ParseError, SourceProgram, parse_program, parse_program_ex

log = logging.getLogger(__name__)

PROBLEM_MARK = "### Problem:"
PROGRAM_MARK = "### Prolog:"
FENCE_OPEN = "```prolog"
FENCE_CLOSE = "```"

ENDPOINT_ENV = "PROOFTRACE_ENDPOINT"
TOKEN_ENV = "PROOFTRACE_TOKEN"


class EmptyTemplate(ValueError):
    pass


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Demonstration:
    problem_text: str
    program_text: str


@dataclass(frozen=True)
class PromptTemplate:
    demonstrations: tuple
    header: Optional[str] = None
    stop_markers: tuple = (PROBLEM_MARK,)

    def __post_init__(self):
        demos = tuple(d if isinstance(d, Demonstration) else Demonstration(**d) for d in self.demonstrations)
        object.__setattr__(self, "demonstrations", demos)
        object.__setattr__(self, "stop_markers", tuple(self.stop_markers))
        for i, d in enumerate(demos):
            try:
                parse_program(d.program_text)
            except ParseError as exc:
                raise TemplateError(f"demonstration {i} does not parse: {exc}") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "PromptTemplate":
        return cls(tuple(d["demonstrations"]), d.get("header"),
                   tuple(d.get("stop_markers", (PROBLEM_MARK,))))

    @classmethod
    def load(cls, path) -> "PromptTemplate":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _block(problem: str) -> str:
    return f"{PROBLEM_MARK}\n{problem.strip()}\n\n{PROGRAM_MARK}\n"


def build_prompt(t: PromptTemplate, problem_text: str) -> str:
    if not t.demonstrations:
        raise EmptyTemplate("template has no demonstrations")
    parts = []
    if t.header:
        parts.append(t.header.strip() + "\n\n")
    for d in t.demonstrations:
        parts.append(_block(d.problem_text))
        parts.append(f"{FENCE_OPEN}\n{d.program_text.strip()}\n{FENCE_CLOSE}\n\n")
    parts.append(_block(problem_text))
    parts.append(FENCE_OPEN + "\n")
    return "".join(parts)


class Status(str, Enum):
    OK = "ok"
    EXTRACTION_FAILED = "extraction_failed"
    PARSE_FAILED = "parse_failed"
    SERVICE_ERROR = "service_error"


@dataclass
class GenerationResult:
    raw_text: str
    extracted_program: Optional[SourceProgram]
    status: Status
    attempts: int
    diagnostics: list = field(default_factory=list)
    kb: object = None

    @property
    def ok(self) -> bool:
        return self.status is Status.OK


_FENCED = re.compile(r"```[A-Za-z]*[ \t]*\n(.*?)```", re.S)


def extract_program(text: str) -> Optional[str]:
    """First fenced code block; failing that, the text up to a closing fence.

    The prompt ends inside an open block, so a well-behaved completion is
    just the program followed by ``````.
    """
    m = _FENCED.search(text)
    if m:
        return m.group(1)
    if FENCE_CLOSE in text:
        return text.split(FENCE_CLOSE, 1)[0]
    return None


def _interpret(raw: str, origin: str, attempts: int) -> GenerationResult:
    body = extract_program(raw)
    if body is None or not body.strip():
        return GenerationResult(raw, None, Status.EXTRACTION_FAILED, attempts,
                                ["no code block in completion"])
    program = SourceProgram(body, origin)
    kb, diags = parse_program_ex(program)
    if kb is None:
        return GenerationResult(raw, program, Status.PARSE_FAILED, attempts, diags)
    return GenerationResult(raw, program, Status.OK, attempts, diags, kb)


class CompletionService(Protocol):
    def complete(self, prompt: str, stop: list) -> str: ...


class ServiceError(RuntimeError):
    pass


@dataclass
class ServiceConfig:
    model: str = "default"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    max_in_flight: int = 4

    @classmethod
    def load(cls, path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


class HttpCompletionService:
    """Single-turn completion over HTTP.

    POSTs ``{model, prompt, temperature, max_tokens, stop}`` with a bearer
    token and accepts either ``{"text": ...}`` or ``{"choices": [{"text": ...}]}``.
    Endpoint and token come from the environment unless given.
    """

    def __init__(self, config: ServiceConfig = ServiceConfig(), endpoint: Optional[str] = None,
                 token: Optional[str] = None, transport: Optional[httpx.BaseTransport] = None):
        self.config = config
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        if not self.endpoint:
            raise ServiceError(f"no endpoint configured; set {ENDPOINT_ENV}")
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        self._client = httpx.Client(transport=transport, headers=headers, timeout=config.timeout)
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))

    def complete(self, prompt: str, stop: list) -> str:
        payload = {
            "model": self.config.model,
            "prompt": prompt,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "stop": list(stop),
        }
        with self._slots:
            try:
                resp = self._client.post(self.endpoint, json=payload)
                resp.raise_for_status()
                data = resp.json()
            except (httpx.HTTPError, ValueError) as exc:
                raise ServiceError(str(exc)) from exc
        if isinstance(data, dict):
            if isinstance(data.get("text"), str):
                return data["text"]
            choices = data.get("choices")
            if choices and isinstance(choices[0], dict) and isinstance(choices[0].get("text"), str):
                return choices[0]["text"]
        raise ServiceError("unexpected response shape")

    def close(self):
        self._client.close()


def generate_program(service: CompletionService, prompt: str, retries: int = 2,
                     stop=(PROBLEM_MARK,), origin: str = "<generated>") -> GenerationResult:
    """Ask the service for a program, retrying the same prompt on failure.

    Never raises; the outcome is in ``status``.
    """
    result = None
    for attempt in range(1, retries + 2):
        try:
            raw = service.complete(prompt, list(stop))
        except Exception as exc:  # anything the service throws is a service error
            log.warning("completion attempt %d failed: %s", attempt, exc)
            result = GenerationResult("", None, Status.SERVICE_ERROR, attempt, [str(exc)])
            continue
        if not isinstance(raw, str):
            result = GenerationResult("", None, Status.SERVICE_ERROR, attempt, ["non-text completion"])
            continue
        # the prompt leaves a block open, so close it if the service stopped early
        if FENCE_CLOSE not in raw and prompt.endswith(FENCE_OPEN + "\n"):
            raw_for_extract = raw + "\n" + FENCE_CLOSE
        else:
            raw_for_extract = raw
        result = _interpret(raw_for_extract, origin, attempt)
        result.raw_text = raw
        if result.ok:
            return result
    return result


def load_offline(directory, instance_id: str) -> GenerationResult:
    """Read ``<directory>/<instance_id>.pl`` as if the service had returned it."""
    path = Path(directory) / f"{instance_id}.pl"
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        return GenerationResult("", None, Status.SERVICE_ERROR, 1, [f"cannot read {path}: {exc}"])
    program = SourceProgram(text, str(path))
    kb, diags = parse_program_ex(program)
    if kb is None:
        return GenerationResult(text, program, Status.PARSE_FAILED, 1, diags)
    return GenerationResult(text, program, Status.OK, 1, diags, kb)


def format_diagnostics(diags) -> list[str]:
    out = []
    for d in diags:
        if isinstance(d, ParseDiagnostic):
            out.append(f"{d.line}:{d.column} {d.kind}: {d.message}")
        else:
            out.append(str(d))
    return out
