"""Scenario files: a line-oriented text format with section headers.

Example::

    # two entangled particles
    [box]
    L = 6.283185307179586
    T = 10
    origin = (0, 0, 0, 0)

    [particles]
    mass = 1
    mass = 1

    [terms]
    # (re, im) coefficient, then one momentum index triple per particle
    (0.8944271909999159, 0) | 1 0 0 | 0 1 0
    (0.4472135954999579, 0) | 0 0 1 | -1 0 0

    [run]
    initial = (1, 0.2, 0.3, 0.4) | (2, 0.5, 0.6, 0.7)
    s_max = 0.002
    ds = 2e-05

Everything after ``#`` on a line is ignored.  Keys in ``[run]`` are
optional; see ``RunParameters`` for defaults.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np

from .kinematics import FourVector, SpacetimeBox
from .wavefunction import MultiParticleWaveFunction


class ScenarioError(ValueError):
    """Malformed or invalid scenario; the message names line and field."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        self.line = line
        self.field = field
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class RunParameters:
    initial: list[np.ndarray] = field(default_factory=list)
    s_max: float = 1.0
    ds: float = 0.01
    local_ds: float | None = None  # derived from ds when absent
    samples: int = 2000
    burn_in: int = 400
    thinning: int = 1
    proposal_scale: float = 0.1
    seed: int = 0
    equivariance_s: float | None = None
    grid: int = 10

    def __eq__(self, other):
        if not isinstance(other, RunParameters):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if f.name == "initial":
                if len(a) != len(b) or not all(np.array_equal(x, y) for x, y in zip(a, b)):
                    return False
            elif a != b:
                return False
        return True


@dataclass
class Term:
    coefficient: complex
    momenta: tuple[tuple[int, int, int], ...]


@dataclass
class Scenario:
    box: SpacetimeBox
    masses: list[float]
    terms: list[Term]
    run: RunParameters = field(default_factory=RunParameters)
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.masses)

    def wavefunction(self) -> MultiParticleWaveFunction:
        return MultiParticleWaveFunction(
            self.box, self.masses, [(t.momenta, t.coefficient) for t in self.terms]
        )

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.box == other.box
            and self.masses == other.masses
            and self.terms == other.terms
            and self.run == other.run
        )


_TUPLE = re.compile(r"^\(\s*(.*?)\s*\)$")

_INT_KEYS = {"samples", "burn_in", "thinning", "seed", "grid"}
_FLOAT_KEYS = {"s_max", "ds", "local_ds", "proposal_scale", "equivariance_s"}
_POSITIVE = {"ds", "local_ds", "samples", "thinning", "proposal_scale", "grid"}
_NONNEGATIVE = {"s_max", "burn_in", "seed", "equivariance_s"}


def _parse_float(text: str, line: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ScenarioError(f"expected a number, got {text!r}", line, name) from None
    if not np.isfinite(value):
        raise ScenarioError(f"value must be finite, got {text!r}", line, name)
    return value


def _parse_int(text: str, line: int, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioError(f"expected an integer, got {text!r}", line, name) from None


def _parse_tuple(text: str, size: int, line: int, name: str) -> list[float]:
    m = _TUPLE.match(text.strip())
    if not m:
        raise ScenarioError(f"expected a parenthesized {size}-tuple, got {text.strip()!r}", line, name)
    parts = [p.strip() for p in m.group(1).split(",")]
    if len(parts) != size:
        raise ScenarioError(f"expected {size} components, got {len(parts)}", line, name)
    return [_parse_float(p, line, name) for p in parts]


def parse_scenario(text: str, name: str = "") -> Scenario:
    """Parse and validate a scenario document."""
    section = None
    seen = set()
    box_values: dict[str, tuple[str, int]] = {}
    masses: list[tuple[float, int]] = []
    terms: list[tuple[Term, int]] = []
    run = RunParameters()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = re.fullmatch(r"\[\s*(\w+)\s*\]", line)
        if header:
            section = header.group(1)
            if section not in ("box", "particles", "terms", "run"):
                raise ScenarioError(f"unknown section [{section}]", lineno)
            if section in seen:
                raise ScenarioError(f"duplicate section [{section}]", lineno)
            seen.add(section)
            continue
        if section is None:
            raise ScenarioError("content before the first section header", lineno)

        if section == "terms":
            parts = line.split("|")
            coeff = _parse_tuple(parts[0], 2, lineno, f"term {len(terms) + 1} coefficient")
            momenta = []
            for j, p in enumerate(parts[1:], start=1):
                tokens = p.split()
                label = f"term {len(terms) + 1} momentum {j}"
                if len(tokens) != 3:
                    raise ScenarioError(f"expected 3 integers, got {p.strip()!r}", lineno, label)
                momenta.append(tuple(_parse_int(t, lineno, label) for t in tokens))
            if not momenta:
                raise ScenarioError("term has no momentum triples", lineno, f"term {len(terms) + 1}")
            terms.append((Term(complex(*coeff), tuple(momenta)), lineno))
            continue

        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {line!r}", lineno, f"[{section}]")
        key, value = (s.strip() for s in line.split("=", 1))

        if section == "box":
            if key not in ("L", "T", "origin"):
                raise ScenarioError(f"unknown key {key!r}", lineno, "[box]")
            if key in box_values:
                raise ScenarioError("duplicate key", lineno, f"box.{key}")
            box_values[key] = (value, lineno)
        elif section == "particles":
            if key != "mass":
                raise ScenarioError(f"unknown key {key!r}", lineno, "[particles]")
            mass = _parse_float(value, lineno, f"particle {len(masses) + 1} mass")
            if mass < 0:
                raise ScenarioError(f"negative mass {mass}", lineno, f"particle {len(masses) + 1} mass")
            masses.append((mass, lineno))
        else:
            label = f"run.{key}"
            if key == "initial":
                points = [_parse_tuple(p, 4, lineno, label) for p in value.split("|")]
                run.initial.append(np.array(points))
            elif key in _INT_KEYS:
                setattr(run, key, _parse_int(value, lineno, label))
            elif key in _FLOAT_KEYS:
                setattr(run, key, _parse_float(value, lineno, label))
            else:
                raise ScenarioError(f"unknown key {key!r}", lineno, "[run]")
            v = getattr(run, key, None)
            if key in _POSITIVE and not v > 0:
                raise ScenarioError(f"must be positive, got {value}", lineno, label)
            if key in _NONNEGATIVE and not v >= 0:
                raise ScenarioError(f"must be non-negative, got {value}", lineno, label)

    for key in ("L", "T"):
        if key not in box_values:
            raise ScenarioError("missing required key", None, f"box.{key}")
    L = _parse_float(*box_values["L"], "box.L")
    T = _parse_float(*box_values["T"], "box.T")
    for key, v in (("L", L), ("T", T)):
        if not v > 0:
            raise ScenarioError(f"must be positive, got {v}", box_values[key][1], f"box.{key}")
    origin = FourVector(0.0)
    if "origin" in box_values:
        text, lineno = box_values["origin"]
        origin = FourVector(*_parse_tuple(text, 4, lineno, "box.origin"))
    box = SpacetimeBox(L, T, origin)

    if not masses:
        raise ScenarioError("no particles declared", None, "[particles]")
    n = len(masses)
    if not terms:
        raise ScenarioError("no terms", None, "[terms]")
    for i, (term, lineno) in enumerate(terms, start=1):
        if len(term.momenta) != n:
            raise ScenarioError(
                f"term {i} has {len(term.momenta)} momentum triples but {n} particle(s) are declared",
                lineno, f"term {i}",
            )
        for a, triple in enumerate(term.momenta):
            if masses[a][0] == 0 and triple == (0, 0, 0):
                raise ScenarioError(f"massless particle {a + 1} cannot have zero momentum", lineno, f"term {i}")
    if all(t.coefficient == 0 for t, _ in terms):
        raise ScenarioError("all coefficients are zero (zero state)", terms[0][1], "[terms]")
    for k, points in enumerate(run.initial, start=1):
        if len(points) != n:
            raise ScenarioError(f"initial configuration {k} has {len(points)} points for {n} particles",
                                None, "run.initial")
        if np.any(points[:, 0] < box.t_start) or np.any(points[:, 0] > box.t_end):
            raise ScenarioError(f"initial configuration {k} lies outside the box time extent",
                                None, "run.initial")

    return Scenario(box, [m for m, _ in masses], [t for t, _ in terms], run, name)


def _g(v: float) -> str:
    return f"{float(v):.17g}"


def serialize_scenario(sc: Scenario) -> str:
    """Inverse of ``parse_scenario`` (comments are not preserved)."""
    o = sc.box.origin
    out = ["[box]", f"L = {_g(sc.box.L)}", f"T = {_g(sc.box.T)}",
           f"origin = ({_g(o.t)}, {_g(o.x)}, {_g(o.y)}, {_g(o.z)})", "", "[particles]"]
    out += [f"mass = {_g(m)}" for m in sc.masses]
    out += ["", "[terms]"]
    for t in sc.terms:
        cols = [f"({_g(t.coefficient.real)}, {_g(t.coefficient.imag)})"]
        cols += [" ".join(str(v) for v in triple) for triple in t.momenta]
        out.append(" | ".join(cols))
    out += ["", "[run]"]
    r = sc.run
    for points in r.initial:
        out.append("initial = " + " | ".join("(" + ", ".join(_g(c) for c in p) + ")" for p in points))
    for f in fields(r):
        if f.name == "initial":
            continue
        v = getattr(r, f.name)
        if v is None:
            continue
        out.append(f"{f.name} = {v if f.name in _INT_KEYS else _g(v)}")
    return "\n".join(out) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, name=str(path))


CORPUS = ("single_mode", "product", "entangled", "interference", "spacelike")


def corpus_scenario(name: str) -> Scenario:
    """One of the scenarios shipped with the package (see ``CORPUS``)."""
    ref = resources.files("relbohm").joinpath("scenarios", f"{name}.scn")
    return parse_scenario(ref.read_text(encoding="utf-8"), name=name)
