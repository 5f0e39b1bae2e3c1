"""Batch configuration: key vocabulary, overlay expansion, typed job parameters."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

CONFIG_KEYS = frozenset(
    {
        "task_instruction_prompt_template",
        "endpoint_url",
        "api_key",
        "model_name",
        "input_json_file_path",
        "output_json_file_path",
        "concurrent_api_requests",
        "num_samples",
        "max_turns",
        "response_generator",
        "decision_protocol",
        "use_baseline",
        "use_chain_of_thought",
        "persona_generator",
        "discussion_paradigm",
        "num_agents",
        "seed",
        "cumulative_points",
        "voting_after_turns",
        "debate_exchanges",
    }
)

REQUIRED_KEYS = (
    "endpoint_url",
    "model_name",
    "input_json_file_path",
    "output_json_file_path",
)

RESPONSE_GENERATORS = frozenset({"simple", "critical", "reasoning"})
PERSONA_GENERATORS = frozenset({"none", "expert", "ipip"})
DISCUSSION_PARADIGMS = frozenset({"memory", "relay", "report", "debate"})
DECISION_PROTOCOLS = frozenset(
    {
        "majority_consensus",
        "supermajority_consensus",
        "unanimity_consensus",
        "simple_voting",
        "approval_voting",
        "ranked_voting",
        "cumulative_voting",
        "judge",
    }
)


class ConfigError(Exception):
    pass


class ConfigKeyUnknown(ConfigError):
    def __init__(self, key: str):
        super().__init__(f"unknown config key {key!r}")
        self.key = key


class ConfigMissingRequired(ConfigError):
    def __init__(self, keys: list[str], run_index: int):
        super().__init__(
            f"run {run_index} is missing required key(s) after overlay: {', '.join(keys)}"
        )
        self.keys = keys


@dataclass(frozen=True)
class BatchConfig:
    name: str
    repeats: int
    common: dict[str, Any]
    runs: tuple[dict[str, Any], ...]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BatchConfig":
        repeats = data.get("repeats", 1)
        if isinstance(repeats, bool) or not isinstance(repeats, int) or repeats < 1:
            raise ConfigError("repeats must be an integer >= 1")
        common = data.get("common", {})
        if not isinstance(common, Mapping):
            raise ConfigError("common must be an object")
        runs = data.get("runs")
        if not isinstance(runs, list) or not runs:
            raise ConfigError("runs must be a non-empty list")
        for key in common:
            if key not in CONFIG_KEYS:
                raise ConfigKeyUnknown(key)
        for index, run in enumerate(runs, 1):
            if not isinstance(run, Mapping):
                raise ConfigError(f"run {index} must be an object")
            for key in run:
                if key not in CONFIG_KEYS:
                    raise ConfigKeyUnknown(key)
        return cls(
            name=str(data.get("name", "")),
            repeats=repeats,
            common=dict(common),
            runs=tuple(dict(run) for run in runs),
        )

    @classmethod
    def load(cls, path: str | Path) -> "BatchConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"no such config file: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class JobSpec:
    name: str
    params: dict[str, Any]
    repeat_index: int

    @property
    def output_path(self) -> str:
        return str(self.params["output_json_file_path"])


def _suffix_output(path: str, repeat_index: int) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}-r{repeat_index}{ext}"


def expand_config(cfg: BatchConfig, scripted_backend: bool = False) -> list[JobSpec]:
    """Overlay each run onto common (run wins) and fan out over repeats."""
    required = list(REQUIRED_KEYS)
    if scripted_backend:
        required = ["input_json_file_path", "output_json_file_path"]
    jobs: list[JobSpec] = []
    for index, run in enumerate(cfg.runs, 1):
        merged = {**cfg.common, **run}
        missing = [key for key in required if key not in merged]
        if missing:
            raise ConfigMissingRequired(missing, index)
        output = str(merged["output_json_file_path"])
        name = Path(output).stem
        for repeat in range(1, cfg.repeats + 1):
            params = dict(merged)
            params["output_json_file_path"] = _suffix_output(output, repeat)
            jobs.append(JobSpec(name=name, params=params, repeat_index=repeat))
    return jobs


@dataclass(frozen=True)
class JobParams:
    """Typed view of one job's overlaid key→value map, defaults filled in."""

    endpoint_url: str = ""
    api_key: str = ""
    model_name: str = ""
    input_json_file_path: str = ""
    output_json_file_path: str = ""
    task_instruction_prompt_template: str = ""
    concurrent_api_requests: int = 8
    num_samples: Optional[int] = None
    max_turns: int = 7
    response_generator: str = "simple"
    decision_protocol: str = "majority_consensus"
    use_baseline: bool = False
    use_chain_of_thought: bool = True
    persona_generator: str = "none"
    discussion_paradigm: str = "memory"
    num_agents: int = 3
    seed: int = 0
    cumulative_points: int = 10
    voting_after_turns: int = 3
    debate_exchanges: int = 2

    def to_log(self) -> dict[str, Any]:
        # api_key never lands in logs.
        entry = {
            key: getattr(self, key)
            for key in sorted(CONFIG_KEYS)
            if key != "api_key"
        }
        if entry["num_samples"] is None:
            del entry["num_samples"]
        return entry


def _as_int(value: Any, key: str, minimum: int = 1) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be an integer, got a boolean")
    if isinstance(value, int):
        result = value
    elif isinstance(value, str):
        try:
            result = int(value.strip())
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
    else:
        raise ConfigError(f"{key} must be an integer, got {type(value).__name__}")
    if result < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {result}")
    return result


def _as_bool(value: Any, key: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "false"):
        return value.strip().lower() == "true"
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def _as_choice(value: Any, key: str, choices: frozenset[str]) -> str:
    text = str(value)
    if text not in choices:
        raise ConfigError(
            f"{key} must be one of {', '.join(sorted(choices))}; got {text!r}"
        )
    return text


def resolve_job_params(params: Mapping[str, Any]) -> JobParams:
    """Type-check and default one overlaid job map; AGORA_API_KEY fills api_key."""
    for key in params:
        if key not in CONFIG_KEYS:
            raise ConfigKeyUnknown(key)
    get = params.get
    api_key = str(get("api_key") or "") or os.environ.get("AGORA_API_KEY", "")
    num_samples = get("num_samples")
    return JobParams(
        endpoint_url=str(get("endpoint_url", "")),
        api_key=api_key,
        model_name=str(get("model_name", "")),
        input_json_file_path=str(get("input_json_file_path", "")),
        output_json_file_path=str(get("output_json_file_path", "")),
        task_instruction_prompt_template=str(
            get("task_instruction_prompt_template", "")
        ),
        concurrent_api_requests=_as_int(
            get("concurrent_api_requests", 8), "concurrent_api_requests"
        ),
        num_samples=None if num_samples is None else _as_int(num_samples, "num_samples"),
        max_turns=_as_int(get("max_turns", 7), "max_turns"),
        response_generator=_as_choice(
            get("response_generator", "simple"), "response_generator", RESPONSE_GENERATORS
        ),
        decision_protocol=_as_choice(
            get("decision_protocol", "majority_consensus"),
            "decision_protocol",
            DECISION_PROTOCOLS,
        ),
        use_baseline=_as_bool(get("use_baseline", False), "use_baseline"),
        use_chain_of_thought=_as_bool(
            get("use_chain_of_thought", True), "use_chain_of_thought"
        ),
        persona_generator=_as_choice(
            get("persona_generator", "none"), "persona_generator", PERSONA_GENERATORS
        ),
        discussion_paradigm=_as_choice(
            get("discussion_paradigm", "memory"),
            "discussion_paradigm",
            DISCUSSION_PARADIGMS,
        ),
        num_agents=_as_int(get("num_agents", 3), "num_agents", minimum=2),
        seed=_as_int(get("seed", 0), "seed", minimum=0),
        cumulative_points=_as_int(get("cumulative_points", 10), "cumulative_points"),
        voting_after_turns=_as_int(get("voting_after_turns", 3), "voting_after_turns"),
        debate_exchanges=_as_int(get("debate_exchanges", 2), "debate_exchanges"),
    )
