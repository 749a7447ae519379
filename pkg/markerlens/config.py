import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

from .exceptions import ConfigError, FormatError
from .hypothesis import DEFAULT_LEVEL
from .regions import RegionKind
from .simlab import PRESET_STUDIES, SimulationParams, SweepGrid
from .utils import parse_float_list

logger = logging.getLogger(__name__)

UNMATCHED_POLICIES = ("strict", "abstain")
OUTPUT_FORMATS = ("table", "csv", "json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class ComparisonConfig:
    """Everything one `compare` run needs."""

    scores_path: Any
    markers_path: Any
    ks: List[int]
    kinds: List[RegionKind] = field(default_factory=lambda: list(RegionKind))
    level: float = DEFAULT_LEVEL
    unmatched_policy: str = "strict"
    output_format: str = "table"
    aggregation: str = "majority"

    def validate(self) -> "ComparisonConfig":
        """
        Check field ranges.

        Raises:
            ConfigError: naming the offending field
        """
        if not self.ks:
            raise ConfigError("k", "at least one region size is required")
        for k in self.ks:
            if isinstance(k, bool) or int(k) != k or k < 1:
                raise ConfigError("k", f"region sizes must be integers >= 1, got {k!r}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level", f"must lie in (0, 1), got {self.level}")
        if not self.kinds:
            raise ConfigError("tests", "at least one test is required")
        try:
            self.kinds = [kind if isinstance(kind, RegionKind) else RegionKind.parse(kind) for kind in self.kinds]
        except ValueError as e:
            raise ConfigError("tests", str(e))
        if self.unmatched_policy not in UNMATCHED_POLICIES:
            raise ConfigError("unmatched", f"must be one of {', '.join(UNMATCHED_POLICIES)}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError("format", f"must be one of {', '.join(OUTPUT_FORMATS)}")
        return self


class ConfigManager:
    """
    Configuration manager for simulation config files and environment settings.
    Parses flat key = value files into sweep grids and parameter studies.
    """

    INT_FIELDS = ("n", "k", "seed")
    GRID_KEYS = ("alphas", "betas", "repeats", "level", "vary_param", "vary_values", "study")

    def __init__(self):
        """Initialize configuration manager."""
        self.param_fields = [f.name for f in dataclasses.fields(SimulationParams)]
        self.known_keys = set(self.param_fields) | set(self.GRID_KEYS)

    def load_key_value_file(self, path: Union[str, os.PathLike]) -> Dict[str, str]:
        """
        Read a flat key = value file.

        Args:
            path: Config file path

        Returns:
            Mapping of keys to raw string values

        Raises:
            FormatError: malformed or duplicate lines, with line number
        """
        name = str(path)
        try:
            with open(path, "r", encoding="utf-8") as handle:
                lines = handle.read().splitlines()
        except OSError as e:
            raise FormatError(f"cannot read config ({e.strerror})", source=name)
        return self.parse_key_values(lines, name)

    def parse_key_values(self, lines: Sequence[str], name: str = "<config>") -> Dict[str, str]:
        values: Dict[str, str] = {}
        for line_no, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError("expected 'key = value'", source=name, line=line_no)
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise FormatError("empty key", source=name, line=line_no)
            if key in values:
                raise FormatError(f"duplicate key {key!r}", source=name, line=line_no)
            values[key] = value
        logger.debug("Parsed %d config keys from %s", len(values), name)
        return values

    def _check_keys(self, values: Dict[str, str]) -> None:
        unknown = sorted(set(values) - self.known_keys)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")

    def _parse_param(self, key: str, raw: str) -> Union[int, float]:
        try:
            if key in self.INT_FIELDS:
                return int(raw)
            return float(raw)
        except ValueError:
            kind = "an integer" if key in self.INT_FIELDS else "a number"
            raise ConfigError(key, f"expected {kind}, got {raw!r}")

    def build_params(self, values: Dict[str, str]) -> SimulationParams:
        """SimulationParams from config values; missing fields keep their defaults."""
        overrides = {key: self._parse_param(key, raw) for key, raw in values.items() if key in self.param_fields}
        return SimulationParams(**overrides)

    def build_sweep_grid(self, values: Dict[str, str]) -> SweepGrid:
        """
        Build a SweepGrid from parsed config values.

        Args:
            values: Output of load_key_value_file

        Returns:
            Validated SweepGrid

        Raises:
            ConfigError: unknown keys, missing grids or unparsable values, naming the key
        """
        self._check_keys(values)
        for key in ("alphas", "betas"):
            if key not in values:
                raise ConfigError(key, "required")

        try:
            alphas = parse_float_list(values["alphas"], "alphas")
        except ValueError as e:
            raise ConfigError("alphas", str(e).split(": ", 1)[-1])
        try:
            betas = parse_float_list(values["betas"], "betas")
        except ValueError as e:
            raise ConfigError("betas", str(e).split(": ", 1)[-1])

        repeats = self._parse_scalar(values, "repeats", int, 1)
        level = self._parse_scalar(values, "level", float, DEFAULT_LEVEL)

        base = self.build_params(values)
        grid = SweepGrid(alphas=tuple(alphas), betas=tuple(betas), repeats=repeats, base=base, level=level)
        try:
            return grid.validate()
        except ValueError as e:
            raise ConfigError(self._blame(str(e)), str(e))

    def build_study_variants(self, values: Dict[str, str]) -> List[Dict[str, Union[int, float]]]:
        """
        Parameter-study overrides of a config: vary_param/vary_values or a named study.

        Returns:
            List of override mappings; empty when no study is configured
        """
        self._check_keys(values)
        if "study" in values:
            if "vary_param" in values or "vary_values" in values:
                raise ConfigError("study", "cannot be combined with vary_param/vary_values")
            name = values["study"]
            if name not in PRESET_STUDIES:
                raise ConfigError("study", f"unknown study {name!r} (known: {', '.join(sorted(PRESET_STUDIES))})")
            return [dict(v) for v in PRESET_STUDIES[name]]

        if "vary_param" not in values and "vary_values" not in values:
            return []
        if "vary_param" not in values or "vary_values" not in values:
            missing = "vary_param" if "vary_param" not in values else "vary_values"
            raise ConfigError(missing, "vary_param and vary_values must be given together")

        param = values["vary_param"]
        if param not in self.param_fields or param in ("alpha", "beta", "seed"):
            raise ConfigError("vary_param", f"cannot vary {param!r}")
        raw_values = [part.strip() for part in values["vary_values"].split(",") if part.strip()]
        if not raw_values:
            raise ConfigError("vary_values", "expected at least one value")
        try:
            return [{param: self._parse_param(param, raw)} for raw in raw_values]
        except ConfigError as e:
            raise ConfigError("vary_values", str(e).split(": ", 1)[-1])

    def get_runtime_settings(self) -> Dict[str, Optional[Union[str, int]]]:
        """
        Read runtime settings from the environment.

        Returns:
            Dictionary with 'log_level' (default INFO) and 'workers' (None when unset)
        """
        log_level = (os.getenv("MARKERLENS_LOG_LEVEL") or "INFO").strip().upper()
        if log_level not in LOG_LEVELS:
            raise ConfigError("MARKERLENS_LOG_LEVEL", f"must be one of {', '.join(LOG_LEVELS)}")

        workers_raw = (os.getenv("MARKERLENS_WORKERS") or "").strip()
        workers = None
        if workers_raw:
            try:
                workers = int(workers_raw)
            except ValueError:
                raise ConfigError("MARKERLENS_WORKERS", f"expected an integer, got {workers_raw!r}")
            if workers < 1:
                raise ConfigError("MARKERLENS_WORKERS", "must be >= 1")
        return {"log_level": log_level, "workers": workers}

    def _parse_scalar(self, values: Dict[str, str], key: str, kind, default):
        if key not in values:
            return default
        try:
            return kind(values[key])
        except ValueError:
            raise ConfigError(key, f"cannot parse {values[key]!r}")

    def _blame(self, message: str) -> str:
        """Config key a validation message refers to (its leading word)."""
        head = message.split(" ", 1)[0].split("=", 1)[0]
        return head if head in self.known_keys else "config"
