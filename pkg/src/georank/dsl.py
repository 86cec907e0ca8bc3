"""A small textual query language that bypasses question parsing.

Grammar (keywords are case-insensitive, whitespace and newlines are free)::

    query    := shape [distance] [category]
    shape    := "point" "(" coord { ";" coord } ")"
              | "route" "(" coord ";" coord ")"
              | "region" "(" STRING ")"
    coord    := NUMBER "," NUMBER              -- lon, lat in degrees
    distance := ("radius" | "buffer") NUMBER UNIT
    UNIT     := "km" | "m"
    category := "category" NAME

``point`` takes ``radius``, ``route`` takes ``buffer`` and ``region`` takes no
distance.  A missing distance falls back to the kind default (1 km for
points, 2000 m for routes).  Examples::

    point(-73.985, 40.758) radius 1.0km category restaurant
    route(-73.99,40.75 ; -73.97,40.76) buffer 1000m category cafe
    region("manhattan") category restaurant
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Optional

from . import geometry as geo
from .query import KNOWN_CATEGORIES, POINT_DEFAULT_KM, ROUTE_DEFAULT_KM, QueryKind, SpatialQuery


class DslError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass
class _Tok:
    kind: str  # NUM NAME STR PUNCT EOF
    text: str
    line: int
    col: int


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<NUM>[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)"
    r"|(?P<NAME>[A-Za-z_][A-Za-z_0-9]*)|(?P<STR>\"[^\"\n]*\")|(?P<PUNCT>[(),;])"
)


def _tokenize(text: str) -> list[_Tok]:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DslError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("EOF", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.cur
        raise DslError(msg, tok.line, tok.col)

    def take(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self.cur
        if tok.kind != kind or (text is not None and tok.text.lower() != text):
            want = repr(text) if text else kind.lower()
            got = repr(tok.text) if tok.kind != "EOF" else "end of input"
            self.fail(f"expected {want}, found {got}")
        self.i += 1
        return tok

    def peek_name(self, *names: str) -> bool:
        return self.cur.kind == "NAME" and self.cur.text.lower() in names

    def number(self) -> float:
        return float(self.take("NUM").text)

    def coord(self) -> geo.Point:
        tok = self.cur
        lon = self.number()
        self.take("PUNCT", ",")
        lat = self.number()
        try:
            return geo.Point(lon, lat)
        except geo.InvalidGeometry as exc:
            self.fail(str(exc), tok)


def parse_dsl(text: str, gazetteer: Any = None) -> SpatialQuery:
    """Parse one query expression into a :class:`SpatialQuery`."""
    p = _Parser(text)
    head = p.take("NAME")
    shape = head.text.lower()
    refs: list = []
    region_name = None
    p.take("PUNCT", "(")
    if shape == "point":
        refs.append(p.coord())
        while p.cur.kind == "PUNCT" and p.cur.text == ";":
            p.take("PUNCT", ";")
            refs.append(p.coord())
        kind, dist_word, default = QueryKind.POINT_RADIUS, "radius", POINT_DEFAULT_KM
    elif shape == "route":
        refs.append(p.coord())
        p.take("PUNCT", ";")
        refs.append(p.coord())
        if refs[0] == refs[1]:
            p.fail("route endpoints coincide", head)
        kind, dist_word, default = QueryKind.ROUTE_BUFFER, "buffer", ROUTE_DEFAULT_KM
    elif shape == "region":
        tok = p.take("STR")
        region_name = tok.text[1:-1]
        poly = None
        if gazetteer is not None:
            getter = getattr(gazetteer, "geometry_by_name", None)
            poly = getter(region_name) if getter else gazetteer.get(region_name.lower())
        if poly is None:
            p.fail(f"unknown region {region_name!r}", tok)
        refs.append(poly)
        kind, dist_word, default = QueryKind.REGION_CONTAIN, None, None
    else:
        p.fail(f"expected 'point', 'route' or 'region', found {head.text!r}", head)
    p.take("PUNCT", ")")

    eps = default
    if p.peek_name("radius", "buffer"):
        word = p.take("NAME")
        if dist_word is None:
            p.fail("region queries take no distance", word)
        if word.text.lower() != dist_word:
            p.fail(f"{shape} queries use '{dist_word}', not '{word.text}'", word)
        num_tok = p.cur
        value = p.number()
        unit = p.take("NAME")
        if unit.text.lower() not in ("km", "m"):
            p.fail(f"unit must be 'km' or 'm', found {unit.text!r}", unit)
        eps = value if unit.text.lower() == "km" else value / 1000.0
        if eps <= 0:
            p.fail("distance must be positive", num_tok)

    category = None
    if p.peek_name("category"):
        p.take("NAME")
        tok = p.take("NAME")
        category = tok.text.lower()
        if category not in KNOWN_CATEGORIES:
            p.fail(f"unknown category {tok.text!r}", tok)
    if p.cur.kind != "EOF":
        p.fail(f"unexpected {p.cur.text!r}")
    return SpatialQuery(kind, tuple(refs), category, eps, text, region_name=region_name)
