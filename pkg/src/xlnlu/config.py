"""Flat key-value experiment configuration.

File syntax: one ``key = value`` per line, ``#`` comments, blank lines
ignored.  Lists are comma-separated.  Unknown keys are rejected so typos
fail loudly instead of silently running defaults.
"""

from dataclasses import dataclass, field, fields
from typing import Optional

MODES = (
    "target_only",
    "multilingual",
    "zeroshot_nomt",
    "zeroshot_hardalign",
    "zeroshot_softalign",
)

PAIR_MODES = ("zeroshot_hardalign", "zeroshot_softalign")
ZEROSHOT_MODES = ("zeroshot_nomt", "zeroshot_hardalign", "zeroshot_softalign")

DATA_ROLES = ("src", "tgt")
DATA_SPLITS = ("train", "dev", "test")


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text):
    return [int(part) for part in text.split(",") if part.strip() != ""]


@dataclass
class ExperimentConfig:
    mode: str = "target_only"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    d_e: int = 256
    d_h: int = 128
    d: Optional[int] = None  # attention width; encoder output width when unset
    d_ff: Optional[int] = None  # reconstruction hidden width; 2x encoder width when unset
    temperature: float = 0.1
    dropout: float = 0.1
    lam: float = 4.0
    p0: float = 0.08
    em_iterations: int = 5
    selection: str = "auto"  # auto | dev_best | last_epoch
    dev_language: str = "tgt"
    no_reconstruction: bool = False
    no_joint_src: bool = False
    target_sizes: Optional[list] = None
    clip_norm: Optional[float] = None

    # synthetic data block, used whenever no data paths are given
    synthetic_train: int = 500
    synthetic_dev: int = 200
    synthetic_test: int = 200
    grammar_seed: int = 11
    pseudo: Optional[bool] = None  # None resolves per mode
    lexicon_seed: int = 3
    reversal_window: int = 1
    fertility_rate: float = 0.0
    bitext_seed: int = 5

    # file data block: {("src"|"tgt", "train"|"dev"|"test"): path}
    data_paths: dict = field(default_factory=dict)
    translations: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.selection not in ("auto", "dev_best", "last_epoch"):
            raise ValueError(f"unknown selection rule {self.selection!r}")
        if self.dev_language not in DATA_ROLES:
            raise ValueError(f"dev_language must be one of {DATA_ROLES}, got {self.dev_language!r}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.pseudo is None:
            self.pseudo = self.mode != "target_only"
        if self.is_zeroshot and self.selection == "dev_best" and self.dev_language == "tgt":
            # model selection on labeled target dev data breaks the zero-shot
            # premise; selecting on source dev is fine
            raise ValueError(
                "zero-shot modes cannot select on target dev data; use"
                " dev_language = src or selection = last_epoch"
            )
        if self.uses_files:
            self._check_file_fields()

    @property
    def uses_files(self):
        return bool(self.data_paths) or self.translations is not None

    @property
    def uses_pairs(self):
        return self.mode in PAIR_MODES

    @property
    def is_zeroshot(self):
        return self.mode in ZEROSHOT_MODES

    @property
    def selection_resolved(self):
        """Supervised runs pick the best dev epoch; zero-shot keeps the last."""
        if self.selection != "auto":
            return self.selection
        return "last_epoch" if self.is_zeroshot else "dev_best"

    def _check_file_fields(self):
        def need(role, split):
            if (role, split) not in self.data_paths:
                raise ValueError(f"mode {self.mode} requires data.{role}.{split}")

        need("tgt", "test")
        if self.mode == "target_only":
            need("tgt", "train")
        elif self.mode == "multilingual":
            need("src", "train")
            need("tgt", "train")
        else:
            need("src", "train")
            if self.uses_pairs and self.translations is None:
                raise ValueError(f"mode {self.mode} requires translations")
        if self.selection_resolved == "dev_best":
            need(self.dev_language, "dev")

    def to_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "data_paths":
                for (role, split), path in sorted(value.items()):
                    out[f"data.{role}.{split}"] = path
            else:
                out[f.name] = value
        return out


_CONVERTERS = {
    "mode": str,
    "seeds": _parse_int_list,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "d_e": int,
    "d_h": int,
    "d": int,
    "d_ff": int,
    "temperature": float,
    "dropout": float,
    "lam": float,
    "p0": float,
    "em_iterations": int,
    "selection": str,
    "dev_language": str,
    "no_reconstruction": _parse_bool,
    "no_joint_src": _parse_bool,
    "target_sizes": _parse_int_list,
    "clip_norm": float,
    "synthetic_train": int,
    "synthetic_dev": int,
    "synthetic_test": int,
    "grammar_seed": int,
    "pseudo": _parse_bool,
    "lexicon_seed": int,
    "reversal_window": int,
    "fertility_rate": float,
    "bitext_seed": int,
    "translations": str,
}


def parse_config_text(text, source="<string>"):
    values = {}
    data_paths = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}: line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key.startswith("data."):
            parts = key.split(".")
            if len(parts) != 3 or parts[1] not in DATA_ROLES or parts[2] not in DATA_SPLITS:
                raise ValueError(
                    f"{source}: line {lineno}: data keys look like data.<src|tgt>.<train|dev|test>, got {key!r}"
                )
            if (parts[1], parts[2]) in data_paths:
                raise ValueError(f"{source}: line {lineno}: duplicate key {key!r}")
            data_paths[(parts[1], parts[2])] = value
            continue
        if key not in _CONVERTERS:
            raise ValueError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{source}: line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as err:
            raise ValueError(f"{source}: line {lineno}: bad value for {key!r}: {err}") from err
    if data_paths:
        values["data_paths"] = data_paths
    return ExperimentConfig(**values)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))
