"""Line-oriented model document: parsing, validation, serialization.

The format is a plain text file with one directive per line so safety
inputs stay human-auditable and diffable:

    state <label> <goal|forbidden|taboo>
    action <id>
    transition <from> <action> <to> <prob>
    policy <state> <action> <prob>
    metric <absdiff|matrix>
    metricrow <label> <d1> ... <dn>     (matrix metric only)
    delta <value>
    p <value>

Blank lines and ``#`` comments are ignored.  Probabilities must be
decimal literals.  Unknown directives are an error in strict mode and a
warning otherwise.  Serialization is canonical (sorted sections), and a
parse/serialize round trip is lossless.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metric import GroundMetric
from .model import (
    MdpModel,
    ModelError,
    PolicyTable,
    validate_model,
    validate_policy,
)

_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class ModelSyntaxError(ValueError):
    """Malformed document; carries the offending location."""

    def __init__(self, message: str, source: str, line: int):
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: {message}")


class DuplicateEntry(ModelSyntaxError):
    """The same transition, policy, or state line appears twice."""


class UnknownDirectiveWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Defaults:
    delta: float | None = None
    p: float | None = None


@dataclass(frozen=True, eq=False)
class ParsedModel:
    model: MdpModel
    policy: PolicyTable
    defaults: Defaults
    metric: GroundMetric  # absdiff over labels unless given explicitly
    explicit_metric: bool


def _number(token: str, source: str, line: int, what: str) -> float:
    if not _DECIMAL.match(token):
        raise ModelSyntaxError(f"{what} must be a decimal literal, got {token!r}",
                               source, line)
    return float(token)


def _int(token: str, source: str, line: int, what: str) -> int:
    if not re.match(r"^[+-]?\d+$", token):
        raise ModelSyntaxError(f"{what} must be an integer, got {token!r}",
                               source, line)
    return int(token)


def parse_model_text(text: str, strict: bool = True,
                     source: str = "<string>") -> ParsedModel:
    states: list[tuple[int, str]] = []
    seen_states: set[int] = set()
    actions: list[int] = []
    transitions: dict[tuple[int, int, int], float] = {}
    policy_entries: dict[tuple[int, int], float] = {}
    metric_kind: str | None = None
    metric_rows: dict[int, list[float]] = {}
    delta: float | None = None
    p: float | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        directive, args = tokens[0], tokens[1:]

        if directive == "state":
            if len(args) != 2:
                raise ModelSyntaxError("state takes <label> <class>", source, lineno)
            label = _int(args[0], source, lineno, "state label")
            if label in seen_states:
                raise DuplicateEntry(f"state {label} declared twice", source, lineno)
            if args[1] not in ("goal", "forbidden", "taboo"):
                raise ModelSyntaxError(
                    f"state class must be goal, forbidden or taboo, got {args[1]!r}",
                    source, lineno)
            seen_states.add(label)
            states.append((label, args[1]))
        elif directive == "action":
            if len(args) != 1:
                raise ModelSyntaxError("action takes <id>", source, lineno)
            a = _int(args[0], source, lineno, "action id")
            if a in actions:
                raise DuplicateEntry(f"action {a} declared twice", source, lineno)
            actions.append(a)
        elif directive == "transition":
            if len(args) != 4:
                raise ModelSyntaxError(
                    "transition takes <from> <action> <to> <prob>", source, lineno)
            key = (
                _int(args[0], source, lineno, "source state"),
                _int(args[1], source, lineno, "action"),
                _int(args[2], source, lineno, "target state"),
            )
            if key in transitions:
                raise DuplicateEntry(
                    f"transition {key} appears twice", source, lineno)
            transitions[key] = _number(args[3], source, lineno, "probability")
        elif directive == "policy":
            if len(args) != 3:
                raise ModelSyntaxError(
                    "policy takes <state> <action> <prob>", source, lineno)
            key = (
                _int(args[0], source, lineno, "state"),
                _int(args[1], source, lineno, "action"),
            )
            if key in policy_entries:
                raise DuplicateEntry(f"policy entry {key} appears twice",
                                     source, lineno)
            policy_entries[key] = _number(args[2], source, lineno, "probability")
        elif directive == "metric":
            if len(args) != 1 or args[0] not in ("absdiff", "matrix"):
                raise ModelSyntaxError(
                    "metric takes 'absdiff' or 'matrix'", source, lineno)
            if metric_kind is not None:
                raise DuplicateEntry("metric declared twice", source, lineno)
            metric_kind = args[0]
        elif directive == "metricrow":
            if len(args) < 2:
                raise ModelSyntaxError(
                    "metricrow takes <label> <distances...>", source, lineno)
            label = _int(args[0], source, lineno, "state label")
            if label in metric_rows:
                raise DuplicateEntry(f"metricrow {label} appears twice",
                                     source, lineno)
            metric_rows[label] = [
                _number(t, source, lineno, "distance") for t in args[1:]
            ]
        elif directive == "delta":
            if len(args) != 1:
                raise ModelSyntaxError("delta takes <value>", source, lineno)
            if delta is not None:
                raise DuplicateEntry("delta declared twice", source, lineno)
            delta = _number(args[0], source, lineno, "delta")
        elif directive == "p":
            if len(args) != 1:
                raise ModelSyntaxError("p takes <value>", source, lineno)
            if p is not None:
                raise DuplicateEntry("p declared twice", source, lineno)
            p = _number(args[0], source, lineno, "p")
        else:
            if strict:
                raise ModelSyntaxError(
                    f"unknown directive {directive!r}", source, lineno)
            warnings.warn(
                UnknownDirectiveWarning(
                    f"{source}:{lineno}: ignoring unknown directive {directive!r}"
                ),
                stacklevel=2,
            )

    kernel: dict[tuple[int, int], dict[int, float]] = {}
    for (x, a, to), prob in transitions.items():
        kernel.setdefault((x, a), {})[to] = prob

    try:
        model = validate_model(
            {"states": states, "actions": actions, "kernel": kernel}
        )
        policy = validate_policy(model, policy_entries)
    except ModelError as err:
        raise type(err)(f"{source}: {err}") from None

    if metric_kind == "matrix":
        missing = [lab for lab in model.labels if lab not in metric_rows]
        if missing:
            raise ModelSyntaxError(
                f"metric matrix is missing rows for states {missing}", source, 0)
        matrix = np.array([
            metric_rows[lab] for lab in model.labels
        ])
        if matrix.shape != (model.n_states, model.n_states):
            raise ModelSyntaxError(
                "metricrow lines must have one distance per state", source, 0)
        metric = GroundMetric.from_matrix(matrix)
    else:
        metric = GroundMetric.abs_diff(model.labels)

    return ParsedModel(
        model=model,
        policy=policy,
        defaults=Defaults(delta=delta, p=p),
        metric=metric,
        explicit_metric=metric_kind is not None,
    )


def parse_model(path, strict: bool = True) -> ParsedModel:
    """Parse and validate a model document from disk."""
    path = Path(path)
    return parse_model_text(path.read_text(), strict=strict, source=str(path))


def serialize_model(parsed: ParsedModel) -> str:
    """Canonical text form: sorted sections, shortest decimal literals."""
    model, policy = parsed.model, parsed.policy
    lines = []
    for lab, cls in zip(model.labels, model.classes):
        lines.append(f"state {lab} {cls.value}")
    for a in model.actions:
        lines.append(f"action {a}")
    for (x, a) in model.pairs():
        row = model.row(x, a)
        for to in model.labels:
            prob = float(row[model.index_of(to)])
            if prob > 0.0:
                lines.append(f"transition {x} {a} {to} {prob!r}")
    for (x, a) in model.pairs():
        lines.append(f"policy {x} {a} {float(policy.prob(x, a))!r}")
    if parsed.explicit_metric:
        if parsed.metric.is_abs_diff:
            lines.append("metric absdiff")
        else:
            lines.append("metric matrix")
            for i, lab in enumerate(model.labels):
                cells = " ".join(repr(float(v)) for v in parsed.metric.matrix[i])
                lines.append(f"metricrow {lab} {cells}")
    if parsed.defaults.delta is not None:
        lines.append(f"delta {parsed.defaults.delta!r}")
    if parsed.defaults.p is not None:
        lines.append(f"p {parsed.defaults.p!r}")
    return "\n".join(lines) + "\n"


def bundled_model_path() -> Path:
    """Path of the eleven-state example shipped with the package."""
    return Path(__file__).parent / "data" / "eleven_state.model"
