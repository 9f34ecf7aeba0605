"""Line-oriented text format for PL tree maps.

Example::

    [meta]
    name = tent
    numeric = rational

    [vertices]
    a
    b

    [edges]
    # id u v length
    0 a b 1

    [pieces]
    # edge lo hi start_edge start_offset end_edge end_offset path
    0 0 1/2 0 0 0 1 0
    0 1/2 1 0 1 0 0 0

``path`` lists the edge ids of the image arc separated by commas, or ``-``
for a constant piece.  Rational numbers are written ``p/q``.  ``#`` starts a
comment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from treedyn.errors import InputError, ParseError
from treedyn.plmap import PLTreeMap, make_piece
from treedyn.space import MetricTree, Number, TreePoint

SECTIONS = ("meta", "vertices", "edges", "pieces")
NUMERIC_MODES = ("rational", "float")


def format_number(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def parse_number(text: str, numeric: str) -> Number:
    """Parse ``p/q``, an integer or a decimal; exact in rational mode."""
    try:
        if numeric == "rational":
            return Fraction(text)
        if "/" in text:
            num, den = text.split("/")
            return int(num) / int(den)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


@dataclass
class MapDocument:
    name: str
    numeric: str
    vertices: List[str]
    edges: List[Tuple[int, str, str, Number]]
    pieces: List[Tuple[int, Number, Number, int, Number, int, Number, Optional[List[int]]]]
    lines: Dict[str, List[int]] = field(default_factory=dict, repr=False)


def parse_document(text: str) -> MapDocument:
    """Syntax-level parse; raises :class:`ParseError` with the line number."""
    section = None
    meta: Dict[str, str] = {}
    raw: Dict[str, List[Tuple[int, List[str]]]] = {s: [] for s in SECTIONS}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in SECTIONS:
                raise ParseError(f"unknown section header {line!r}", line=lineno)
            section = line[1:-1].strip()
            continue
        if section is None:
            raise ParseError("content before the first section header", line=lineno)
        if section == "meta":
            if "=" not in line:
                raise ParseError("meta entries look like 'key = value'", line=lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            meta[key] = value
        else:
            raw[section].append((lineno, line.split()))

    numeric = meta.get("numeric", "rational")
    if numeric not in NUMERIC_MODES:
        raise ParseError(f"numeric must be rational or float, got {numeric!r}", field="numeric")
    doc = MapDocument(meta.get("name", ""), numeric, [], [], [])

    def num(tok, lineno, fname):
        try:
            return parse_number(tok, numeric)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, field=fname) from None

    def integer(tok, lineno, fname):
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected an integer, got {tok!r}", line=lineno, field=fname) from None

    for lineno, toks in raw["vertices"]:
        if len(toks) != 1:
            raise ParseError("one vertex id per line", line=lineno, field="id")
        doc.vertices.append(toks[0])
    for lineno, toks in raw["edges"]:
        if len(toks) != 4:
            raise ParseError("edge lines are 'id u v length'", line=lineno)
        doc.edges.append((integer(toks[0], lineno, "id"), toks[1], toks[2], num(toks[3], lineno, "length")))
    names = ("edge", "lo", "hi", "start_edge", "start_offset", "end_edge", "end_offset")
    for lineno, toks in raw["pieces"]:
        if len(toks) != 8:
            raise ParseError("piece lines are 'edge lo hi start_edge start_offset end_edge end_offset path'",
                             line=lineno)
        vals = []
        for tok, fname in zip(toks, names):
            vals.append(integer(tok, lineno, fname) if "edge" in fname else num(tok, lineno, fname))
        path = None if toks[7] == "-" else [integer(t, lineno, "path") for t in toks[7].split(",")]
        doc.pieces.append((*vals, path))
        doc.lines.setdefault("pieces", []).append(lineno)
    return doc


def build_map(doc: MapDocument) -> PLTreeMap:
    """Turn a parsed document into a validated map.

    Raises:
        TreeStructureError, PartitionError, InputError: semantic violations.
    """
    tree = MetricTree(doc.vertices, doc.edges)
    pieces: Dict[int, list] = {}
    for k, (eid, lo, hi, se, so, ee, eo, path) in enumerate(doc.pieces):
        lineno = doc.lines["pieces"][k]
        try:
            start, end = tree.point(se, so), tree.point(ee, eo)
            pc = make_piece(tree, lo, hi, start, end, [] if path is None else path)
        except InputError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
        pieces.setdefault(eid, []).append(pc)
    return PLTreeMap(tree, pieces, doc.name)


def loads(text: str) -> PLTreeMap:
    return build_map(parse_document(text))


def load(path: str) -> PLTreeMap:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dumps(fmap: PLTreeMap) -> str:
    tree = fmap.tree
    for v in tree.vertices:
        if not v or any(c.isspace() for c in v) or "#" in v:
            raise InputError(f"vertex id {v!r} cannot be written")
    out = ["[meta]", f"name = {fmap.name}", f"numeric = {tree.numeric}", "", "[vertices]"]
    out.extend(tree.vertices)
    out += ["", "[edges]", "# id u v length"]
    for eid in sorted(tree.edges):
        e = tree.edges[eid]
        out.append(f"{e.id} {e.u} {e.v} {format_number(e.length)}")
    out += ["", "[pieces]", "# edge lo hi start_edge start_offset end_edge end_offset path"]
    for eid in sorted(fmap.pieces):
        for pc in fmap.pieces[eid]:
            path = ",".join(str(s.edge) for s in pc.path) or "-"
            out.append(" ".join([
                str(eid), format_number(pc.lo), format_number(pc.hi),
                str(pc.start.edge), format_number(pc.start.offset),
                str(pc.end.edge), format_number(pc.end.offset), path,
            ]))
    return "\n".join(out) + "\n"


def dump(fmap: PLTreeMap, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(fmap))


@dataclass
class ValidationReport:
    ok: bool
    violations: List[str]
    fmap: Optional[PLTreeMap] = None

    def to_json(self) -> dict:
        out = {"ok": self.ok, "violations": self.violations}
        if self.fmap is not None:
            stats = self.fmap.lipschitz_bound()
            out.update({
                "name": self.fmap.name,
                "numeric": self.fmap.tree.numeric,
                "vertices": len(self.fmap.tree.vertices),
                "edges": len(self.fmap.tree.edges),
                "pieces": stats.piece_count,
                "lipschitz": format_number(stats.lipschitz),
            })
        return out


def validate_text(text: str) -> ValidationReport:
    """Semantic validation of a document; :class:`ParseError` propagates."""
    doc = parse_document(text)
    try:
        fmap = build_map(doc)
    except InputError as exc:
        return ValidationReport(False, [str(exc)])
    gaps = fmap.validate_continuity()
    violations = [
        f"discontinuity at {v.location}: {v.left} vs {v.right} (gap {format_number(v.gap)})" for v in gaps
    ]
    return ValidationReport(not violations, violations, fmap)
