"""Experiment configuration: a line-oriented `key = value` format with
dotted keys and `#` comments.

Example:

    # MSE-vs-sample-size run
    model.m = 8
    model.p = 16
    model.s = 2
    model.sigma_a = 1.0
    model.sigma = 0.1
    model.r = 0.25
    model.dictionary_kind = dirac_hadamard
    experiment.n_grid = 128, 256, 512, 1024
    experiment.master_seed = 1234
    output.csv_path = out/curve.csv

Unknown keys, duplicates, missing required keys and unparsable values
are all hard errors that name the offending line and key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .learners import ItkmSettings

_BUILTIN_KINDS = ("identity", "dirac_hadamard")


class ConfigError(ValueError):
    """One or more problems in a config text; str() lists them all."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    m: int
    p: int
    s: int
    sigma_a: float
    sigma: float
    r: float
    dictionary_kind: str
    n_grid: tuple[int, ...]
    trials: int
    master_seed: int
    learner: str
    itkm: ItkmSettings
    c0: float
    csv_path: str
    svg_path: str | None
    experiment_id: str


def _parse_int(raw: str) -> int:
    return int(raw, 10)


def _parse_float(raw: str) -> float:
    return float(raw)

def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    raise ValueError(f"expected true or false, got {raw!r}")


def _parse_int_list(raw: str) -> tuple[int, ...]:
    parts = [part.strip() for part in raw.split(",")]
    if not parts or any(not part for part in parts):
        raise ValueError("expected a comma-separated list of integers")
    return tuple(int(part, 10) for part in parts)


def _parse_token(raw: str) -> str:
    if "," in raw or "\n" in raw:
        raise ValueError("value may not contain commas or newlines")
    return raw


# key -> (parser, required, default)
_SCHEMA = {
    "model.m": (_parse_int, True, None),
    "model.p": (_parse_int, True, None),
    "model.s": (_parse_int, True, None),
    "model.sigma_a": (_parse_float, True, None),
    "model.sigma": (_parse_float, True, None),
    "model.r": (_parse_float, True, None),
    "model.dictionary_kind": (_parse_token, True, None),
    "experiment.n_grid": (_parse_int_list, True, None),
    "experiment.trials": (_parse_int, False, 50),
    "experiment.master_seed": (_parse_int, True, None),
    "experiment.learner": (_parse_token, False, "itkm"),
    "experiment.id": (_parse_token, False, None),
    "experiment.itkm.s_tilde": (_parse_int, False, 1),
    "experiment.itkm.iterations": (_parse_int, False, 50),
    "experiment.itkm.init": (_parse_token, False, "oracle"),
    "experiment.itkm.normalize_signals": (_parse_bool, False, True),
    "bound.c0": (_parse_float, False, 1.0),
    "output.csv_path": (_parse_token, True, None),
    "output.svg_path": (_parse_token, False, None),
}


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a config text; defaults are filled in,
    every problem is reported via ConfigError."""
    problems: list[str] = []
    values: dict[str, object] = {}
    seen_lines: dict[str, int] = {}

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected `key = value`, got {raw_line.strip()!r}")
            continue
        key, raw_value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen_lines:
            problems.append(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen_lines[key]})"
            )
            continue
        seen_lines[key] = lineno
        parser = _SCHEMA[key][0]
        try:
            values[key] = parser(raw_value)
        except ValueError as exc:
            problems.append(f"line {lineno}: key {key!r}: cannot parse {raw_value!r} ({exc})")

    for key, (_, required, default) in _SCHEMA.items():
        if key in values:
            continue
        if required:
            problems.append(f"missing required key {key!r}")
        else:
            values[key] = default

    if problems:
        raise ConfigError(problems)

    def check(cond: bool, message: str):
        if not cond:
            problems.append(message)

    m, p, s = values["model.m"], values["model.p"], values["model.s"]
    check(m >= 1, f"model.m must be >= 1, got {m}")
    check(p >= m, f"model.p must be >= model.m, got p={p}, m={m}")
    check(1 <= s <= m, f"model.s must satisfy 1 <= s <= m, got s={s}, m={m}")
    check(values["model.sigma_a"] >= 0, "model.sigma_a must be >= 0")
    check(values["model.sigma"] >= 0, "model.sigma must be >= 0")
    check(values["model.r"] > 0, "model.r must be > 0")

    kind = values["model.dictionary_kind"]
    if kind == "identity":
        check(p == m, f"identity dictionary needs model.p == model.m, got p={p}, m={m}")
    elif kind == "dirac_hadamard":
        check(_is_power_of_two(m), f"dirac_hadamard needs model.m a power of two, got {m}")
        check(p == 2 * m, f"dirac_hadamard needs model.p == 2*model.m, got p={p}, m={m}")
    # any other value is a file path, checked when the file is loaded

    grid = values["experiment.n_grid"]
    check(all(n >= 1 for n in grid), "experiment.n_grid entries must be >= 1")
    check(all(a < b for a, b in zip(grid, grid[1:])),
          "experiment.n_grid must be strictly increasing")
    check(values["experiment.trials"] >= 2, "experiment.trials must be >= 2")
    check(0 <= values["experiment.master_seed"] < (1 << 64),
          "experiment.master_seed must be a 64-bit unsigned integer")
    check(values["experiment.learner"] in ("itkm", "oracle_ls"),
          f"experiment.learner must be itkm or oracle_ls, got {values['experiment.learner']!r}")
    check(values["bound.c0"] > 0, "bound.c0 must be > 0")

    try:
        itkm = ItkmSettings(
            s_tilde=values["experiment.itkm.s_tilde"],
            iterations=values["experiment.itkm.iterations"],
            init=values["experiment.itkm.init"],
            normalize_signals=values["experiment.itkm.normalize_signals"],
        )
    except ValueError as exc:
        problems.append(f"experiment.itkm: {exc}")
        itkm = ItkmSettings()
    check(itkm.s_tilde <= p, f"experiment.itkm.s_tilde must be <= model.p, got {itkm.s_tilde}")

    if problems:
        raise ConfigError(problems)

    experiment_id = values["experiment.id"]
    if experiment_id is None:
        if values["model.sigma"] > 0 and values["model.sigma_a"] > 0:
            snr_db = 10.0 * math.log10((values["model.sigma_a"] / values["model.sigma"]) ** 2)
            tag = f"{snr_db:g}"
        else:
            tag = "inf"
        experiment_id = f"{_kind_tag(kind)}-snr{tag}dB"

    return ExperimentConfig(
        m=m, p=p, s=s,
        sigma_a=values["model.sigma_a"],
        sigma=values["model.sigma"],
        r=values["model.r"],
        dictionary_kind=kind,
        n_grid=grid,
        trials=values["experiment.trials"],
        master_seed=values["experiment.master_seed"],
        learner=values["experiment.learner"],
        itkm=itkm,
        c0=values["bound.c0"],
        csv_path=values["output.csv_path"],
        svg_path=values["output.svg_path"],
        experiment_id=experiment_id,
    )


def _kind_tag(kind: str) -> str:
    if kind in _BUILTIN_KINDS:
        return kind
    stem = kind.replace("\\", "/").rsplit("/", 1)[-1]
    return stem.rsplit(".", 1)[0] or "file"
