"""Tool configuration: defaults, JSON config files, and bundled data paths."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from halgen.errors import HalgenError

_DATA_DIR = Path(__file__).resolve().parent / "data"


class ConfigFileError(HalgenError):
    pass


def data_path(*parts: str) -> Path:
    return _DATA_DIR.joinpath(*parts)


def default_board_map_path() -> Path:
    return data_path("boards", "stm32f407.json")


def default_scenario_path() -> Path:
    return data_path("scenarios", "demo_scenario.json")


def default_kb_path() -> Path:
    return data_path("kb")


def default_project_path() -> Path:
    return data_path("demo_project")


@dataclass
class HttpSettings:
    endpoint: str = "http://localhost:8080/v1/chat/completions"
    model: str = "gpt-4o-mini"
    auth_env: str = "HALGEN_API_KEY"
    timeout_s: float = 30.0
    max_retries: int = 2


@dataclass
class Config:
    backend: str = "kb"
    http: HttpSettings = field(default_factory=HttpSettings)
    retrieval_k: int = 3
    strict_vetting: bool = False
    strict_gating: bool = False
    board_map_path: str = str(default_board_map_path())
    template_path: str | None = None
    kb_path: str = str(default_kb_path())
    seed: int = 42

    def validate(self) -> None:
        if self.backend not in ("kb", "http"):
            raise ConfigFileError(f"backend must be 'kb' or 'http', not {self.backend!r}")
        for name, value in (("retrieval_k", self.retrieval_k), ("seed", self.seed),
                            ("http.max_retries", self.http.max_retries)):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigFileError(f"{name} must be an integer, not {value!r}")
        for name, value in (("strict_vetting", self.strict_vetting),
                            ("strict_gating", self.strict_gating)):
            if not isinstance(value, bool):
                raise ConfigFileError(f"{name} must be a boolean, not {value!r}")
        if not isinstance(self.http.timeout_s, (int, float)) or isinstance(self.http.timeout_s, bool):
            raise ConfigFileError(f"http.timeout_s must be a number, not {self.http.timeout_s!r}")
        if self.retrieval_k < 1:
            raise ConfigFileError("retrieval_k must be at least 1")
        if self.http.max_retries < 0:
            raise ConfigFileError("http.max_retries cannot be negative")
        if not 0 <= self.seed < (1 << 64):
            raise ConfigFileError("seed must fit in 64 bits")
        if not Path(self.board_map_path).is_file():
            raise ConfigFileError(f"board map not found: {self.board_map_path}")
        if self.template_path is not None and not Path(self.template_path).is_file():
            raise ConfigFileError(f"template not found: {self.template_path}")
        if self.backend == "kb" and not Path(self.kb_path).is_dir():
            raise ConfigFileError(f"knowledge base not found: {self.kb_path}")


def load_config(path: str | Path | None = None) -> Config:
    """Build a Config from defaults overlaid with an optional JSON file."""
    config = Config()
    if path is None:
        config.validate()
        return config
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigFileError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigFileError(f"{path}: top level must be an object")
    known = {"backend", "http", "retrieval_k", "strict_vetting", "strict_gating",
             "board_map_path", "template_path", "kb_path", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigFileError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
    http_data = data.pop("http", {})
    if not isinstance(http_data, dict):
        raise ConfigFileError(f"{path}: 'http' must be an object")
    http_known = {"endpoint", "model", "auth_env", "timeout_s", "max_retries"}
    http_unknown = set(http_data) - http_known
    if http_unknown:
        raise ConfigFileError(f"{path}: unknown http keys: {', '.join(sorted(http_unknown))}")
    config = replace(config, http=replace(config.http, **http_data), **data)
    config.validate()
    return config
