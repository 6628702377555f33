"""Run configuration: ``key = value`` files, overrides and figure presets."""

from __future__ import annotations

import ast
import logging
import math
import operator
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from qtripod.dynamics import AtomInit, ModelParams
from qtripod.qalgebra import Convention, DeformationSpec, FieldSpec

log = logging.getLogger(__name__)

ENGINES = ("closed-form", "ode", "auto")
FIDELITY_MODES = ("exact", "paper-literal", "both")
THETA_AUTO_NORMALIZE = 1e-6


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RunConfig:
    M: int = 30
    q: float = 0.9
    tau: float = 0.0007
    convention: str = "standard"
    mu_over_lambda: float = 0.0
    delta_over_lambda: tuple = (0.0, 0.0, 0.0)
    chi_over_lambda: float = 0.0
    lambda_ratios: tuple = (1.0, 1.0, 1.0)
    theta: tuple = (1 + 0j, 0j, 0j, 0j)
    t_max: float = 50.0
    samples: int = 5001
    engine: str = "auto"
    fidelity_mode: str = "both"
    step: float = 1e-3
    output: str = "timeseries.csv"
    # verbatim value text per key, used for stable file names and echoing
    labels: dict = field(default_factory=dict, compare=False, repr=False)

    def model(self) -> ModelParams:
        f = FieldSpec(self.M, self.tau, DeformationSpec(self.q, Convention(self.convention)))
        return ModelParams(
            f,
            lambdas=self.lambda_ratios,
            mu=self.mu_over_lambda,
            deltas=self.delta_over_lambda,
            chi=self.chi_over_lambda,
        )

    def atom(self) -> AtomInit:
        return AtomInit(self.theta)

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.samples)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "labels":
                continue
            lines.append(f"{f.name} = {format_value(f.name, getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


KEYS = tuple(f.name for f in fields(RunConfig) if f.name != "labels")
SCALAR_KEYS = ("M", "q", "tau", "mu_over_lambda", "delta_over_lambda", "chi_over_lambda", "t_max", "samples", "step")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_real(text: str) -> float:
    """Real number or a small arithmetic expression in ``pi`` such as ``pi/2``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"not a real number: {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"not a real number: {text!r}") from exc
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def _split_top_level(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ValueError("unbalanced parentheses")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise ValueError("unbalanced parentheses")
    parts.append("".join(cur))
    return [p.strip() for p in parts]


_PAIR = re.compile(r"^\((.*),(.*)\)$")


def parse_complex(text: str) -> complex:
    """``(re, im)`` pair, a Python complex literal like ``0.5+0.5j``, or a real."""
    text = text.strip()
    m = _PAIR.match(text)
    if m:
        return complex(parse_real(m.group(1)), parse_real(m.group(2)))
    if text.startswith("("):
        raise ValueError(f"malformed complex pair {text!r}; expected (re, im)")
    try:
        return complex(parse_real(text))
    except ValueError:
        try:
            return complex(text.replace(" ", ""))
        except ValueError:
            raise ValueError(f"malformed complex value {text!r}") from None


def _triple(text):
    vals = [parse_real(v) for v in _split_top_level(text)]
    if len(vals) == 1:
        return (vals[0],) * 3
    if len(vals) != 3:
        raise ValueError(f"expected 1 or 3 values, got {len(vals)}")
    return tuple(vals)


def _integer(text):
    v = parse_real(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _choice(options):
    def parse(text):
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return t

    return parse


def _theta(text):
    vals = _split_top_level(text)
    if len(vals) != 4:
        raise ValueError(f"theta needs 4 amplitudes, got {len(vals)}")
    return tuple(parse_complex(v) for v in vals)


PARSERS = {
    "M": _integer,
    "q": parse_real,
    "tau": parse_real,
    "convention": _choice(tuple(c.value for c in Convention)),
    "mu_over_lambda": parse_real,
    "delta_over_lambda": _triple,
    "chi_over_lambda": parse_real,
    "lambda_ratios": _triple,
    "theta": _theta,
    "t_max": parse_real,
    "samples": _integer,
    "engine": _choice(ENGINES),
    "fidelity_mode": _choice(FIDELITY_MODES),
    "step": parse_real,
    "output": str.strip,
}


def _validate(key, value):
    """Range checks; returns the (possibly normalized) value."""
    if key == "M" and value < 0:
        raise ValueError(f"M must be >= 0, got {value}")
    if key == "q" and not 0 < value <= 1:
        raise ValueError(f"q must lie in (0, 1], got {value}")
    if key == "tau" and not 0 < value < 1:
        raise ValueError(f"tau must lie in the open interval (0, 1), got {value}")
    if key == "t_max" and not value > 0:
        raise ValueError(f"t_max must be > 0, got {value}")
    if key == "samples" and value < 2:
        raise ValueError(f"samples must be >= 2, got {value}")
    if key == "step" and not 0 < value <= 0.1:
        raise ValueError(f"step must lie in (0, 0.1], got {value}")
    if key == "output" and not value:
        raise ValueError("output path is empty")
    if key == "theta":
        norm = math.sqrt(sum(abs(t) ** 2 for t in value))
        if abs(norm - 1.0) > THETA_AUTO_NORMALIZE:
            raise ValueError(f"theta has norm {norm:.9g}; must be 1 (within {THETA_AUTO_NORMALIZE:g})")
        if abs(norm - 1.0) > 1e-15:
            log.warning("theta norm %.12g != 1, renormalizing", norm)
            value = tuple(t / norm for t in value)
    return value


def _apply(values, labels, key, text, line):
    if key not in PARSERS:
        raise ConfigError(f"unknown key {key!r}", line)
    try:
        values[key] = _validate(key, PARSERS[key](text))
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}", line) from None
    labels[key] = text.strip()


def load_config(text: str, overrides=()) -> RunConfig:
    """Parse ``key = value`` lines (``#`` comments), then ``key=value`` overrides."""
    values, labels = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        _apply(values, labels, key, val, lineno)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = (s.strip() for s in item.split("=", 1))
        _apply(values, labels, key, val, None)
    return RunConfig(**values, labels=labels)


def with_value(c: RunConfig, key: str, text: str) -> RunConfig:
    values, labels = {}, dict(c.labels)
    _apply(values, labels, key, text, None)
    return replace(c, **values, labels=labels)


def format_value(key, value) -> str:
    if key == "theta":
        return ", ".join(f"({v.real!r}, {v.imag!r})" for v in value)
    if isinstance(value, tuple):
        if len(set(value)) == 1:
            return repr(value[0])
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# figure presets: caption values; left panels start in |1>, right panels in the equal superposition
PRESET_TAU = {"2": 0.0007, "3": 0.07, "4": 0.8}
PRESET_SWEEPS = {
    "ab": ("mu_over_lambda", ("0", "pi/2", "pi")),
    "cd": ("delta_over_lambda", ("2", "4", "6")),
    "ef": ("chi_over_lambda", ("0.01", "0.1", "0.8")),
}
GROUND_THETA = "1, 0, 0, 0"
EQUAL_THETA = "0.5, 0.5, 0.5, 0.5"
FIGURE_IDS = tuple(
    f"{fig}{panel}" for fig in "234" for panel in ("abcd" if fig == "2" else "abcdef")
)


def preset_configs(figure_id: str) -> list[tuple[str, RunConfig]]:
    """One (name, config) per curve of a figure panel, e.g. ``"2a"``."""
    figure_id = figure_id.strip().lower()
    if figure_id not in FIGURE_IDS:
        raise ConfigError(f"unknown figure id {figure_id!r}; expected one of {', '.join(FIGURE_IDS)}")
    fig, panel = figure_id[0], figure_id[1]
    key, tokens = next(v for k, v in PRESET_SWEEPS.items() if panel in k)
    theta = GROUND_THETA if panel in "ace" else EQUAL_THETA
    base = load_config(
        f"M = 30\nq = 0.9\ntau = {PRESET_TAU[fig]}\ntheta = {theta}\nt_max = 50\nsamples = 5001\n"
    )
    out = []
    for tok in tokens:
        c = with_value(base, key, tok)
        name = f"fig{figure_id}_{key}={label(c, key)}"
        out.append((name, replace(c, output=name + ".csv")))
    return out


def label(c: RunConfig, key: str) -> str:
    """File-name-safe, deterministic text for one config value."""
    value = getattr(c, key)
    if isinstance(value, tuple):
        value = value[0] if len(set(value)) == 1 else "-".join(f"{v:.12g}" for v in value)
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)
