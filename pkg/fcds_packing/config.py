"""Run configuration: flat key=value files, CLI overrides and graph source specs."""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Tuple, Union

from .graph_core import Graph, generate_harary, generate_ring_clique, load_graph
from .oracle_verifier import EXACT_MATCHING_CAP, MAX_DISJOINT_PATHS_CAP, VERIFY_LEVELS


class ConfigError(Exception):
    """Raised for unknown keys, bad values or a missing graph source."""
    pass


GENERATORS = {
    "harary": (2, generate_harary),
    "ringclique": (2, generate_ring_clique),
    "complete": (1, lambda n: generate_harary(n, n - 1)),
}


@dataclass
class RunConfig:
    """Everything one run or sweep needs; keys match the long CLI flags."""
    graph: str
    t: Optional[int] = None
    lmul: float = 1.0
    seed: int = 0
    seeds: int = 1
    out: Optional[str] = None
    verify_level: str = "structural"
    jobs: int = 1
    verbose: bool = False
    exact_matching_cap: int = EXACT_MATCHING_CAP
    max_disjoint_paths_cap: int = MAX_DISJOINT_PATHS_CAP

    def __post_init__(self) -> None:
        if not self.graph:
            raise ConfigError("A graph source is required (file path or generator spec)")
        if self.t is not None and self.t < 1:
            raise ConfigError(f"t must be at least 1, got {self.t}")
        if self.lmul <= 0:
            raise ConfigError(f"lmul must be positive, got {self.lmul}")
        if self.seeds < 1:
            raise ConfigError(f"seeds must be at least 1, got {self.seeds}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        if self.verify_level not in VERIFY_LEVELS:
            raise ConfigError(
                f"verify_level must be one of {', '.join(VERIFY_LEVELS)}, got {self.verify_level!r}"
            )

    def as_dict(self) -> Dict[str, object]:
        """Echo of the settings that determine a run's result."""
        return {
            "graph": self.graph,
            "t": self.t,
            "lmul": self.lmul,
            "seed": self.seed,
            "verify_level": self.verify_level,
            "exact_matching_cap": self.exact_matching_cap,
            "max_disjoint_paths_cap": self.max_disjoint_paths_cap,
        }


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_optional_int(value: str) -> Optional[int]:
    if value.strip().lower() in ("", "none", "auto"):
        return None
    return int(value)


def _parse_optional_str(value: str) -> Optional[str]:
    return value or None


_PARSERS: Dict[str, Callable[[str], object]] = {
    "graph": str,
    "t": _parse_optional_int,
    "lmul": float,
    "seed": int,
    "seeds": int,
    "out": _parse_optional_str,
    "verify_level": str,
    "jobs": int,
    "verbose": _parse_bool,
    "exact_matching_cap": int,
    "max_disjoint_paths_cap": int,
}


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a flat config file of "key = value" lines.

    '#' starts a comment; keys may use dashes or underscores.

    Raises:
        ConfigError: unreadable file, malformed line, unknown or repeated key.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")

    values: Dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_number}: expected 'key = value', got {raw.strip()!r}")

        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{line_number}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{line_number}: key {key!r} given twice")
        values[key] = value

    return values


def build_config(file_values: Optional[Mapping[str, str]] = None,
                 overrides: Optional[Mapping[str, object]] = None) -> RunConfig:
    """
    Merge config file values with CLI overrides; overrides that are None
    leave the file value in place.
    """
    merged: Dict[str, object] = {}

    for key, raw in (file_values or {}).items():
        try:
            merged[key] = _PARSERS[key](raw)
        except (KeyError, ValueError) as e:
            raise ConfigError(f"Bad value for {key!r}: {raw!r} ({e})")

    for key, value in (overrides or {}).items():
        if key not in _PARSERS:
            raise ConfigError(f"Unknown setting {key!r}")
        if value is not None:
            merged[key] = value

    if "graph" not in merged:
        raise ConfigError("A graph source is required (--graph or 'graph =' in the config file)")

    return RunConfig(**merged)


def parse_generator_spec(spec: str) -> Optional[Tuple[str, Tuple[int, ...]]]:
    """Split "name:a:b" into the generator name and integer arguments, or None for a path."""
    name, _, rest = spec.partition(":")
    if name not in GENERATORS or not rest:
        return None

    arity, _ = GENERATORS[name]
    parts = rest.split(":")
    if len(parts) != arity:
        raise ConfigError(f"Generator {name!r} takes {arity} argument(s), got {spec!r}")
    try:
        return name, tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"Generator arguments must be integers, got {spec!r}")


def load_graph_source(spec: str) -> Graph:
    """
    Build the graph named by a source spec.

    Raises:
        GraphFormatError: the file is malformed.
        GraphParameterError: generator arguments are invalid.
        OSError: the file cannot be read.
    """
    generator = parse_generator_spec(spec)
    if generator is None:
        return load_graph(spec)
    name, args = generator
    return GENERATORS[name][1](*args)
