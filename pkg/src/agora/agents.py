"""Agent panels: persona generation and per-agent parse helpers."""

from __future__ import annotations

import json
import re
from typing import Optional

from . import prompts
from .domain import AgentProfile, Agreement, Persona, ResponseGeneratorKind
from .gateway import Backend, chat_request


class PersonaParseFailure(Exception):
    pass


class PersonaUniquenessFailure(Exception):
    pass


class TraitOutOfRange(Exception):
    pass


TRAIT_NAMES = (
    "Extraversion",
    "Agreeableness",
    "Conscientiousness",
    "Neuroticism",
    "Openness",
)

# Shipped option scale; a plain engine default, overridable per call.
DEFAULT_TRAIT_OPTIONS: dict[str, list[str]] = {
    name: ["very low", "low", "average", "high", "very high"] for name in TRAIT_NAMES
}

_AGREEMENT_RE = re.compile(r"\[(agree|disagree)\]", re.IGNORECASE)

# Three tries each before giving up on malformed or colliding personas.
_MAX_PARSE_ATTEMPTS = 3
_MAX_DUPLICATE_ATTEMPTS = 3


def parse_agreement(text: str) -> Optional[Agreement]:
    """Last bracketed marker wins; None means the response was unmarked."""
    last = None
    for match in _AGREEMENT_RE.finditer(text):
        last = match.group(1).lower()
    if last is None:
        return None
    return Agreement.AGREE if last == "agree" else Agreement.DISAGREE


def neutral_panel(n: int) -> list[Persona]:
    if n < 1:
        raise ValueError("panel size must be >= 1")
    return [Persona(name=f"Participant {i}") for i in range(1, n + 1)]


def extract_json_object(text: str) -> dict:
    """First {...} span in the text parsed as an object; fences tolerated."""
    return _extract_json_object(text)


def _extract_json_object(text: str) -> dict:
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end <= start:
        raise ValueError(f"no JSON object in {text[:80]!r}")
    obj = json.loads(text[start : end + 1])
    if not isinstance(obj, dict):
        raise ValueError("top-level JSON value is not an object")
    return obj


def generate_expert_persona(
    task_text: str,
    existing: list[Persona],
    backend: Backend,
    model_name: str = "",
) -> tuple[Persona, str]:
    """One persona complementing `existing`; returns it with the raw response."""
    messages = [("system", prompts.render_expert_system())]
    # Prior acceptances ride along as assistant turns so the model sees what
    # it already produced and diversifies.
    for persona in existing:
        messages.append(
            ("assistant", json.dumps({"role": persona.name, "description": persona.description}))
        )
    messages.append(("user", prompts.render_expert_user(task_text)))
    req = chat_request(messages, model_name=model_name)

    taken = {p.name.strip().lower() for p in existing}
    parse_failures = 0
    duplicates = 0
    while True:
        resp = backend.complete(req)
        try:
            obj = _extract_json_object(resp.text)
            role = obj["role"]
            description = obj["description"]
            if not isinstance(role, str) or not role.strip():
                raise ValueError("empty role")
            if not isinstance(description, str):
                raise ValueError("description is not a string")
        except (ValueError, KeyError, json.JSONDecodeError):
            parse_failures += 1
            if parse_failures >= _MAX_PARSE_ATTEMPTS:
                raise PersonaParseFailure(
                    f"{parse_failures} malformed persona responses, last: {resp.text[:120]!r}"
                )
            continue
        if role.strip().lower() in taken:
            duplicates += 1
            if duplicates >= _MAX_DUPLICATE_ATTEMPTS:
                raise PersonaUniquenessFailure(
                    f"{duplicates} duplicate personas for role {role.strip()!r}"
                )
            continue
        return Persona(name=role.strip(), description=description.strip()), resp.text


def generate_ipip_persona(
    task_text: str,
    existing: list[Persona],
    backend: Backend,
    model_name: str = "",
    trait_options: Optional[dict[str, list[str]]] = None,
) -> tuple[Persona, str]:
    options = trait_options or DEFAULT_TRAIT_OPTIONS
    messages = [("system", prompts.render_ipip_system(options))]
    for persona in existing:
        messages.append(
            ("assistant", json.dumps({"role": persona.name, "traits": persona.traits or {}}))
        )
    messages.append(("user", prompts.render_ipip_user(task_text)))
    req = chat_request(messages, model_name=model_name)

    seen_vectors = {
        tuple((p.traits or {}).get(name) for name in options) for p in existing
    }
    parse_failures = 0
    duplicates = 0
    while True:
        resp = backend.complete(req)
        try:
            obj = _extract_json_object(resp.text)
            role = obj["role"]
            traits = obj["traits"]
            if not isinstance(role, str) or not role.strip():
                raise ValueError("empty role")
            if not isinstance(traits, dict):
                raise ValueError("traits is not an object")
            missing = [name for name in options if name not in traits]
            if missing:
                raise ValueError(f"missing traits {missing}")
        except (ValueError, KeyError, json.JSONDecodeError):
            parse_failures += 1
            if parse_failures >= _MAX_PARSE_ATTEMPTS:
                raise PersonaParseFailure(
                    f"{parse_failures} malformed persona responses, last: {resp.text[:120]!r}"
                )
            continue
        for name in options:
            if traits[name] not in options[name]:
                raise TraitOutOfRange(f"{name}={traits[name]!r} not in {options[name]}")
        vector = tuple(traits[name] for name in options)
        if vector in seen_vectors:
            duplicates += 1
            if duplicates >= _MAX_DUPLICATE_ATTEMPTS:
                raise PersonaUniquenessFailure(
                    f"{duplicates} duplicate trait vectors for role {role.strip()!r}"
                )
            continue
        chosen = {name: traits[name] for name in options}
        description = "; ".join(f"{name}: {value}" for name, value in chosen.items())
        return Persona(name=role.strip(), description=description, traits=chosen), resp.text


def build_panel(
    n: int,
    persona_generator: str,
    response_generator: ResponseGeneratorKind,
    task_text: str,
    backend: Backend,
    model_name: str = "",
) -> tuple[list[AgentProfile], list[dict]]:
    """Panel of n agents plus their persona log entries (raw text included)."""
    profiles: list[AgentProfile] = []
    log_entries: list[dict] = []
    if persona_generator == "none":
        for i, persona in enumerate(neutral_panel(n), start=1):
            profiles.append(AgentProfile(i, persona, response_generator))
            log_entries.append(persona.to_log(i))
        return profiles, log_entries

    generate = {
        "expert": generate_expert_persona,
        "ipip": generate_ipip_persona,
    }.get(persona_generator)
    if generate is None:
        raise ValueError(f"unknown persona generator {persona_generator!r}")
    personas: list[Persona] = []
    for i in range(1, n + 1):
        persona, raw = generate(task_text, personas, backend, model_name)
        personas.append(persona)
        profiles.append(AgentProfile(i, persona, response_generator))
        log_entries.append(persona.to_log(i, raw_text=raw))
    return profiles, log_entries


def extract_final_answer_response(
    persona: Persona,
    task_text: str,
    input_text: str,
    previous_response: str,
    backend: Backend,
    model_name: str = "",
):
    """Full gateway response for an extraction call (text plus latency)."""
    if not previous_response:
        raise ValueError("previous response must be non-empty")
    req = chat_request(
        [
            ("system", prompts.render_role_system(persona)),
            ("user", prompts.render_extraction_user(task_text, input_text, previous_response)),
        ],
        model_name=model_name,
    )
    return backend.complete(req)


def extract_final_answer(
    persona: Persona,
    task_text: str,
    input_text: str,
    previous_response: str,
    backend: Backend,
    model_name: str = "",
) -> str:
    return extract_final_answer_response(
        persona, task_text, input_text, previous_response, backend, model_name
    ).text
