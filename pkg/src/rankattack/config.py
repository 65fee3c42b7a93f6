"""Experiment configuration: sectioned key-value files plus flag overrides.

Precedence is flag > config file > default. Key names are unique across
sections so every key maps to exactly one command-line flag; the resolved
configuration is echoed into output artifacts for reproducibility.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, MissingInput

# (section, type, default, help) per key; None default = must be provided
# before the key is used.
SCHEMA = {
    "collection": ("paths", str, "", "collection file (TSV or JSONL)"),
    "queries": ("paths", str, "", "queries TSV file"),
    "qrels": ("paths", str, "", "optional qrels TSV file"),
    "lexicon": ("paths", str, "", "synonym lexicon TSV (word substitution only)"),
    "out_dir": ("paths", str, "out", "artifact output directory"),
    "order": ("lm", int, 3, "language model order"),
    "discount": ("lm", float, 0.75, "absolute discount mass in (0,1)"),
    "k1": ("retrieval", float, 0.9, "BM25 k1"),
    "b": ("retrieval", float, 0.4, "BM25 b"),
    "candidates": ("retrieval", int, 200, "first-stage candidate pool size"),
    "top_r": ("surrogate", int, 29, "ranking prefix used to build preference pairs"),
    "epochs": ("surrogate", int, 300, "surrogate training epochs"),
    "learning_rate": ("surrogate", float, 0.05, "surrogate training step size"),
    "margin": ("surrogate", float, 1.0, "pairwise hinge margin"),
    "train_queries": ("surrogate", str, "", "file listing training query ids (empty = all)"),
    "method": ("attack", str, "idem", "attack method: idem|query_plus|token_append|word_sub"),
    "prompt": ("attack", str, "It is known that", "prompt text for sentence generation"),
    "sample_rounds": ("attack", int, 10, "generation rounds"),
    "samples_per_round": ("attack", int, 50, "samples per generation round"),
    "max_kept": ("attack", int, 100, "maximum connection sentences kept"),
    "max_words": ("attack", int, 12, "maximum words per connection sentence"),
    "top_k": ("attack", int, 50, "sampling truncation"),
    "alpha": ("attack", str, "auto", "coherence weight in [0,1], or 'auto' (0.5 easy5 / 0.1 hard5)"),
    "append_budget": ("attack", int, 12, "token budget for the prefix-append baseline"),
    "sub_budget": ("attack", int, 20, "token budget for the word-substitution baseline"),
    "append_vocab": ("attack", int, 5000, "candidate vocabulary size for the append baseline"),
    "seed": ("attack", int, 13, "global experiment seed"),
    "workers": ("attack", int, 1, "parallel workers over targets"),
    "rbo_p": ("eval", float, 0.7, "rank-biased overlap persistence"),
    "rbo_depth": ("eval", int, 1000, "rank-biased overlap evaluation depth"),
    "targets": ("eval", str, "hard5", "target kind: easy5|hard5"),
    "query_limit": ("eval", int, 0, "limit target selection to the first N queries (0 = all)"),
    "backend": ("backend", str, "builtin", "coherence backend: builtin|bridge"),
    "bridge_endpoint": ("backend", str, "", "bridge endpoint URL"),
    "bridge_timeout": ("backend", float, 10.0, "bridge request timeout in seconds"),
    "window": ("backend", int, 8, "builtin adjacency scoring window in tokens"),
}

SECTIONS = ("paths", "lm", "retrieval", "surrogate", "attack", "eval", "backend")


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, (_, _, default, _) in SCHEMA.items():
            self.values.setdefault(key, default)

    def __getattr__(self, key):
        values = self.__dict__.get("values", {})
        if key in values:
            return values[key]
        raise AttributeError(key)

    def resolved(self) -> dict:
        """Section -> {key: value} mapping for artifact headers."""
        out: dict[str, dict] = {section: {} for section in SECTIONS}
        for key in sorted(SCHEMA):
            out[SCHEMA[key][0]][key] = self.values[key]
        return out

    def require_path(self, key: str) -> Path:
        value = self.values.get(key, "")
        if not value:
            raise MissingInput(f"config key {key!r} is required but not set")
        path = Path(value)
        if not path.exists():
            raise MissingInput(f"config key {key!r}: no such file {value!r}")
        return path

    def resolve_alpha(self) -> float:
        raw = self.values["alpha"]
        if raw == "auto":
            return 0.5 if self.values["targets"] == "easy5" else 0.1
        try:
            alpha = float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"alpha must be a number or 'auto', got {raw!r}") from None
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
        return alpha

    @property
    def out_path(self) -> Path:
        return Path(self.values["out_dir"])


def _coerce(key: str, raw: str):
    _, typ, _, _ = SCHEMA[key]
    if typ is str:
        return raw
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ.__name__}") from None


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build the configuration from an optional file plus explicit overrides."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise MissingInput(f"config file not found: {path}") from None
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from None
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA:
                    raise ConfigError(f"unknown config key {key!r} in [{section}]")
                if SCHEMA[key][0] != section:
                    raise ConfigError(
                        f"key {key!r} belongs in [{SCHEMA[key][0]}], found in [{section}]"
                    )
                values[key] = _coerce(key, raw)
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value) if isinstance(value, str) else value
    return ExperimentConfig(values)


def write_config(config: ExperimentConfig, path) -> None:
    """Write the resolved configuration back out as a sectioned file."""
    parser = configparser.ConfigParser()
    for section, keys in config.resolved().items():
        parser[section] = {key: str(value) for key, value in keys.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
