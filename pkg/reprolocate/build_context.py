"""the central configuration of a run, resolved from flags, environment variables and a config file"""

import json
import logging
import os

from collections.abc import Callable, Mapping
from pathlib import Path
from typing import Any

from .corpus import DEFAULT_SIZE_CAP, IngestOptions
from .errors import ConfigError
from .evaluation import PipelineConfig
from .logparse import DEFAULT_DIFF_HEADER_PATTERN, DEFAULT_ENTER_PATTERN, DEFAULT_LEAVE_PATTERN, LogPatterns
from .ranker import DEFAULT_ALPHA, DEFAULT_AUGMENT_TOP_K, LocalizeOptions, Variant
from .rules import builtin_rules, load_rules, Rule
from .vsm import WeightScheme

log = logging.getLogger(__name__)

ENV_PREFIX = "REPROLOCATE_"
DEFAULT_CONFIG_FILE = "reprolocate.json"
OUTPUT_FORMATS = ("tsv", "json")

_TRUE = frozenset(("1", "true", "yes", "on"))
_FALSE = frozenset(("0", "false", "no", "off", ""))


def _to_bool(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    if (s := str(v).strip().lower()) in _TRUE | _FALSE:
        return s in _TRUE

    raise ValueError(f"not a boolean: {v!r}")


def _to_tuple(v: Any) -> tuple[str, ...]:
    if isinstance(v, str):
        return tuple(s for s in (p.strip() for p in v.split(",")) if s)

    return tuple(str(s) for s in v)


def _to_optional_int(v: Any) -> int | None:
    return None if v is None or v == "" else int(v)


def _to_optional_path(v: Any) -> Path | None:
    return Path(v) if v else None


_FIELDS: dict[str, Callable[[Any], Any]] = {
    "alpha": float,
    "top_n": int,
    "weighting": WeightScheme,
    "augment_top_k": int,
    "variant": Variant,
    "output_format": str,
    "rules_file": _to_optional_path,
    "enter_regex": str,
    "leave_regex": str,
    "diff_header_regex": str,
    "size_cap": int,
    "include": _to_tuple,
    "exclude": _to_tuple,
    "follow_symlinks": _to_bool,
    "workers": _to_optional_int,
}


def _convert(values: Mapping[str, Any], source: str) -> dict[str, Any]:
    """Converts raw values to the types of the `Context` fields.

    Args:
        values (Mapping[str, Any]): field name -> raw value.
        source (str): Where the values come from, for error messages.

    Raises:
        ConfigError: If a field is unknown or a value cannot be converted.

    Returns:
        dict[str, Any]: field name -> converted value.
    """
    out = {}
    for k, v in values.items():
        if k not in _FIELDS:
            raise ConfigError(f"Unknown setting '{k}' in {source}")

        try:
            out[k] = _FIELDS[k](v)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"Invalid value {v!r} for '{k}' in {source}: {e}") from e

    return out


class Context:
    """Collects the settings of a run and derives the option objects of the library from them."""

    def __init__(self, alpha: float = DEFAULT_ALPHA, top_n: int = 10, weighting: WeightScheme = WeightScheme.LINEAR, augment_top_k: int = DEFAULT_AUGMENT_TOP_K,
                 variant: Variant = Variant.FULL, output_format: str = "tsv", rules_file: Path | None = None, enter_regex: str = DEFAULT_ENTER_PATTERN,
                 leave_regex: str = DEFAULT_LEAVE_PATTERN, diff_header_regex: str = DEFAULT_DIFF_HEADER_PATTERN, size_cap: int = DEFAULT_SIZE_CAP,
                 include: tuple[str, ...] = (), exclude: tuple[str, ...] = (), follow_symlinks: bool = False, workers: int | None = None) -> None:
        """Initializer, creates a new `Context` and validates every setting.

        Args:
            alpha (float, optional): The weight of heuristic filtering, in `[0, 1]`. Defaults to 0.3.
            top_n (int, optional): The number of ranked files to print. Defaults to 10.
            weighting (WeightScheme, optional): The TF-IDF weighting scheme. Defaults to WeightScheme.LINEAR.
            augment_top_k (int, optional): The number of build log segments appended to the query. Defaults to 1.
            variant (Variant, optional): The variant to rank with. Defaults to Variant.FULL.
            output_format (str, optional): `tsv` or `json`. Defaults to "tsv".
            rules_file (Path, optional): A JSON Lines file of extra rules. Defaults to None.
            enter_regex (str, optional): Matches the build log lines entering a directory. Defaults to make's `Entering directory`.
            leave_regex (str, optional): Matches the build log lines leaving a directory. Defaults to make's `Leaving directory`.
            diff_header_regex (str, optional): Matches the member header lines of diff logs. Defaults to the diffoscope text format.
            size_cap (int, optional): Source files larger than this many bytes are skipped. Defaults to 8 MiB.
            include (tuple[str, ...], optional): Only ingest files matching one of these globs. Defaults to ().
            exclude (tuple[str, ...], optional): Never ingest files matching one of these globs. Defaults to ().
            follow_symlinks (bool, optional): Follow symbolic links when ingesting. Defaults to False.
            workers (int, optional): The number of worker threads.  Defaults to None (the library default).

        Raises:
            ConfigError: If a setting is invalid.
        """
        self.alpha = float(alpha)
        self.top_n = int(top_n)
        self.augment_top_k = int(augment_top_k)
        self.output_format = output_format
        self.rules_file = rules_file
        self.size_cap = int(size_cap)
        self.include = tuple(include)
        self.exclude = tuple(exclude)
        self.follow_symlinks = bool(follow_symlinks)
        self.workers = workers

        try:
            self.weighting = WeightScheme(weighting)
            self.variant = Variant(variant)
        except ValueError as e:
            raise ConfigError(str(e)) from e

        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.top_n < 1:
            raise ConfigError(f"top must be at least 1, got {self.top_n}")
        if self.augment_top_k < 0:
            raise ConfigError(f"augment-top-k must not be negative, got {self.augment_top_k}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"format must be one of {OUTPUT_FORMATS}, got '{self.output_format}'")
        if self.size_cap < 1:
            raise ConfigError(f"size-cap must be positive, got {self.size_cap}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")

        self.patterns = LogPatterns(enter_regex, leave_regex, diff_header_regex)

    @classmethod
    def resolve(cls, flags: Mapping[str, Any] | None = None, config_file: Path | None = None, env: Mapping[str, str] | None = None, cwd: Path = Path(".")) -> "Context":
        """Creates a `Context` from every configuration layer.  Command-line flags take precedence over `REPROLOCATE_*` environment variables, which take precedence over the config file, which takes precedence over the defaults.

        Args:
            flags (Mapping[str, Any], optional): field name -> value of the command-line flags.  Unknown names and `None` values are ignored. Defaults to None.
            config_file (Path, optional): A JSON object of field name -> value.  Defaults to None (`reprolocate.json` in `cwd`, if present).
            env (Mapping[str, str], optional): The environment variables. Defaults to None (`os.environ`).
            cwd (Path, optional): The directory to look for the default config file in. Defaults to Path(".").

        Raises:
            ConfigError: If the config file cannot be read, or a setting is invalid.

        Returns:
            Context: The new `Context`.
        """
        settings = {}

        if config_file is None and (default := cwd / DEFAULT_CONFIG_FILE).is_file():
            config_file = default

        if config_file is not None:
            try:
                raw = json.loads(Path(config_file).read_text())
            except (OSError, ValueError) as e:
                raise ConfigError(f"Unable to read config file '{config_file}': {e}") from e

            if not isinstance(raw, dict):
                raise ConfigError(f"Config file '{config_file}' must hold a JSON object")

            settings |= _convert(raw, f"'{config_file}'")
            log.debug("read settings %s from '%s'", sorted(raw), config_file)

        env = os.environ if env is None else env
        settings |= _convert({k: env[name] for k in _FIELDS if (name := f"{ENV_PREFIX}{k.upper()}") in env}, "the environment")
        settings |= _convert({k: v for k, v in (flags or {}).items() if k in _FIELDS and v is not None}, "the command line")

        return cls(**settings)

    def ingest_options(self) -> IngestOptions:
        """Convenience method, gets the options for reading source trees.

        Returns:
            IngestOptions: The ingestion options.
        """
        return IngestOptions(self.size_cap, self.include, self.exclude, self.follow_symlinks, workers=self.workers)

    def load_rules(self) -> list[Rule]:
        """Gets the built-in rules, followed by the rules of the rules file if there is one.

        Raises:
            InputError: If the rules file cannot be read or holds an invalid rule.

        Returns:
            list[Rule]: The rules.
        """
        return load_rules(self.rules_file) if self.rules_file else builtin_rules()

    def localize_options(self, rules: list[Rule] | None = None) -> LocalizeOptions:
        """Convenience method, gets the options for localizing a package.

        Args:
            rules (list[Rule], optional): The rules to use.  Defaults to None (loads them with `load_rules()`).

        Returns:
            LocalizeOptions: The localization options.
        """
        return LocalizeOptions(self.variant, self.augment_top_k, self.weighting, self.patterns, tuple(rules or self.load_rules()), self.workers)

    def pipeline_config(self, rules: list[Rule] | None = None) -> PipelineConfig:
        """Convenience method, gets the settings for evaluating a dataset.

        Args:
            rules (list[Rule], optional): The rules to use.  Defaults to None (loads them with `load_rules()`).

        Returns:
            PipelineConfig: The pipeline settings.
        """
        return PipelineConfig(self.alpha, self.localize_options(rules), self.ingest_options(), self.workers)
