"""
Line-oriented diagram files.

    # comment
    var X = 1.0          error variance (1.0 when omitted)
    X -> Y = 0.5         directed edge, path coefficient
    X <-> Y = 0.2        bidirected edge, error covariance

Nodes are declared by first mention. Header comments of the form
``# key: value`` for the keys below are read back as metadata.
"""
import math
import re
from pathlib import Path as FilePath
from typing import Iterable

from pydantic import BaseModel, ConfigDict, ValidationError

from .diagram import Edge, PathDiagram
from .exceptions import DiagramParseError

NAME = r"[A-Za-z0-9_]+"
COMMENT_RE = re.compile(r"^#\s?(.*)$")
META_RE = re.compile(r"^(query|given|seed|trial|split):\s*(.*)$")
VAR_RE = re.compile(rf"^var\s+({NAME})\s*=\s*(\S+)$")
BIDIRECTED_RE = re.compile(rf"^({NAME})\s*<->\s*({NAME})\s*=\s*(\S+)$")
DIRECTED_RE = re.compile(rf"^({NAME})\s*->\s*({NAME})\s*=\s*(\S+)$")


class DiagramFile(BaseModel):
    model_config = ConfigDict(frozen=True)

    diagram: PathDiagram
    # first value of each recognised header key
    meta: dict[str, str] = {}
    comments: tuple[str, ...] = ()


def _real(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DiagramParseError(line, f"not a number: {token!r}") from None
    if not math.isfinite(value):
        raise DiagramParseError(line, f"not a finite number: {token!r}")
    return value


def parse_diagram(text: str) -> DiagramFile:
    nodes: list[str] = []
    seen: set[str] = set()
    variance: dict[str, float] = {}
    edges: list[Edge] = []
    meta: dict[str, str] = {}
    comments: list[str] = []

    def mention(*names: str) -> None:
        for n in names:
            if n not in seen:
                seen.add(n)
                nodes.append(n)

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue

        comment = COMMENT_RE.match(line)
        if comment:
            body = comment.group(1).strip()
            comments.append(body)
            tagged = META_RE.match(body)
            if tagged:
                meta.setdefault(tagged.group(1), tagged.group(2).strip())
            continue

        declared = VAR_RE.match(line)
        if declared:
            name, value = declared.group(1), _real(declared.group(2), number)
            if name in variance:
                raise DiagramParseError(number, f"variance of {name} declared twice")
            mention(name)
            variance[name] = value
            continue

        for pattern, build in ((BIDIRECTED_RE, Edge.bidirected), (DIRECTED_RE, Edge.directed)):
            found = pattern.match(line)
            if found:
                a, b = found.group(1), found.group(2)
                weight = _real(found.group(3), number)
                try:
                    edges.append(build(a, b, weight))
                except ValidationError as exc:
                    raise DiagramParseError(number, exc.errors()[0]["msg"]) from None
                mention(a, b)
                break
        else:
            raise DiagramParseError(number, f"unrecognised line: {line!r}")

    diagram = PathDiagram(nodes=tuple(nodes), edges=tuple(edges), error_variance=variance)
    return DiagramFile(diagram=diagram, meta=meta, comments=tuple(comments))


def read_diagram(path: str | FilePath) -> DiagramFile:
    return parse_diagram(FilePath(path).read_text(encoding="utf-8"))


def format_diagram(diagram: PathDiagram, header: Iterable[str] = ()) -> str:
    """Canonical text: header comments, variances by node, then edges; parse_diagram inverts it."""
    lines = [f"# {h}" for h in header]
    for n in diagram.nodes:
        lines.append(f"var {n} = {diagram.error_variance[n]!r}")
    for e in diagram.edges:
        lines.append(f"{e.label()} = {e.weight!r}")
    return "\n".join(lines) + "\n"


def query_header(x: str, y: str, s: Iterable[str], seed: int | None = None, trial: int | None = None) -> list[str]:
    header = [f"query: {x} {y}", f"given: {' '.join(sorted(s))}"]
    if seed is not None:
        header.append(f"seed: {seed}")
    if trial is not None:
        header.append(f"trial: {trial}")
    return header
