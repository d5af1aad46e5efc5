"""Lex MongoDB filter strings and derive the engineered filter features.

The lexer is total: injection payloads are frequently not valid JSON, so
anything unrecognised degrades to a field-name or punctuation token instead
of raising.  String literals are opaque, which keeps ``{"$where": "a > 1"}``
from reporting a ``>`` comparison.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, fields

OPERATOR = "operator"
BARE_DOLLAR = "bare_dollar"
FIELD = "field"
STRING = "string"
NUMBER = "number"
NULL = "null"
BOOLEAN = "boolean"
PUNCT = "punct"
COMPARISON = "comparison"

CATEGORIES = {
    "comparison": ("$eq", "$gt", "$gte", "$in", "$lt", "$lte", "$ne", "$nin"),
    "logical": ("$and", "$not", "$nor", "$or"),
    "element": ("$exists", "$type"),
    "evaluation": ("$expr", "$jsonSchema", "$mod", "$regex", "$text", "$where"),
    "array": ("$all", "$elemMatch", "$size"),
    "bitwise": ("$bitsAllClear", "$bitsAllSet", "$bitsAnyClear", "$bitsAnySet"),
    # "$" (the positional projection) is a bare-dollar token, handled apart.
    "projection": ("$elemMatch", "$meta", "$slice"),
    "misc": ("$comment", "$rand", "$natural"),
}
SELECTOR_CATEGORIES = ("comparison", "logical", "element", "evaluation", "array", "bitwise")

# Filter-document keywords outside the selector taxonomy.  They are named
# operators (never bare-dollar) but belong to no category.
QUERY_MODIFIERS = (
    "$options", "$search", "$language", "$caseSensitive", "$diacriticSensitive",
    "$geoWithin", "$geoIntersects", "$near", "$nearSphere", "$geometry",
    "$maxDistance", "$minDistance", "$box", "$center", "$centerSphere", "$polygon",
)

KNOWN_OPERATORS = frozenset(
    [op for ops in CATEGORIES.values() for op in ops] + list(QUERY_MODIFIERS)
)

# Operators with their own presence column, in column order.
NAMED_OPERATORS = (
    "$eq", "$gt", "$in", "$ne", "$nin", "$type", "$mod",
    "$regex", "$where", "$elemMatch", "$size",
)
COMPARISON_SYMBOLS = (">=", "<=", "<", ">")

_WS = re.compile(r"\s+")
_NUMBER = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_WORD = re.compile(r"[\w.]+")
_DOLLAR_WORD = re.compile(r"\$[\w]*")


@dataclass(frozen=True)
class FilterToken:
    kind: str
    text: str
    position: int

    @property
    def value(self) -> str:
        """Token text with surrounding quotes removed."""
        if self.kind in (OPERATOR, BARE_DOLLAR, FIELD, STRING) and self.text[:1] in "\"'":
            body = self.text[1:]
            if body.endswith(self.text[0]) and len(self.text) >= 2:
                body = body[:-1]
            return body
        return self.text


def _scan_string(text: str, start: int) -> int:
    """Index just past the closing quote (or end of input if unterminated)."""
    quote = text[start]
    i = start + 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == quote:
            return i + 1
        i += 1
    return n


def _next_significant(text: str, i: int) -> str:
    m = _WS.match(text, i)
    if m:
        i = m.end()
    return text[i] if i < len(text) else ""


def _dollar_kind(word: str) -> str:
    return OPERATOR if word in KNOWN_OPERATORS else BARE_DOLLAR


def tokenize_filter(text: str) -> list[FilterToken]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i = _WS.match(text, i).end()
            continue
        if ch in "\"'":
            end = _scan_string(text, i)
            raw = text[i:end]
            tok = FilterToken(STRING, raw, i)
            if _next_significant(text, end) == ":":
                body = tok.value
                kind = _dollar_kind(body) if body.startswith("$") else FIELD
                tok = FilterToken(kind, raw, i)
            tokens.append(tok)
            i = end
            continue
        if ch == "$":
            m = _DOLLAR_WORD.match(text, i)
            word = m.group()
            tokens.append(FilterToken(_dollar_kind(word), word, i))
            i = m.end()
            continue
        if ch in "<>":
            sym = text[i:i + 2] if text[i + 1:i + 2] == "=" else ch
            tokens.append(FilterToken(COMPARISON, sym, i))
            i += len(sym)
            continue
        m = _NUMBER.match(text, i)
        if m and (ch.isdigit() or ch == "-"):
            tokens.append(FilterToken(NUMBER, m.group(), i))
            i = m.end()
            continue
        m = _WORD.match(text, i)
        if m:
            word = m.group()
            if word == "null":
                kind = NULL
            elif word in ("true", "false"):
                kind = BOOLEAN
            else:
                kind = FIELD
            tokens.append(FilterToken(kind, word, i))
            i = m.end()
            continue
        tokens.append(FilterToken(PUNCT, ch, i))
        i += 1
    return tokens


def _null_operand_owners(tokens: list[FilterToken]) -> set[str]:
    """Operators that take a null literal as (part of) their operand."""
    owners = set()
    # One entry per open bracket: the operator owning that container, if any.
    stack: list[str | None] = []
    for idx, tok in enumerate(tokens):
        prev = tokens[idx - 1] if idx >= 1 else None
        prev2 = tokens[idx - 2] if idx >= 2 else None
        direct_owner = None
        if prev is not None and prev.text == ":" and prev2 is not None and prev2.kind == OPERATOR:
            direct_owner = prev2.value
        if tok.kind == PUNCT and tok.text == "[":
            stack.append(direct_owner)
        elif tok.kind == PUNCT and tok.text == "{":
            stack.append(None)
        elif tok.kind == PUNCT and tok.text in "]}":
            if stack:
                stack.pop()
        elif tok.kind == NULL:
            if direct_owner is not None:
                owners.add(direct_owner)
            elif stack and stack[-1] is not None and prev is not None and prev.text in "[,":
                owners.add(stack[-1])
    return owners


def keywords_only_from_tokens(tokens: list[FilterToken]) -> str:
    parts = []
    for tok in tokens:
        if tok.kind in (OPERATOR, BARE_DOLLAR):
            parts.append(tok.value)
        elif tok.kind in (PUNCT, COMPARISON, NULL, BOOLEAN):
            parts.append(tok.text)
        elif tok.kind == STRING and tok.value in KNOWN_OPERATORS:
            parts.append(tok.value)
    return "".join(parts)


def keywords_only(text: str) -> str:
    """Keep operator keywords and structure; drop names and literal values."""
    return keywords_only_from_tokens(tokenize_filter(text))


@dataclass(frozen=True)
class FilterFeatures:
    op_eq: bool
    op_gt: bool
    op_in: bool
    op_ne: bool
    op_nin: bool
    op_type: bool
    op_mod: bool
    op_regex: bool
    op_where: bool
    op_elemMatch: bool
    op_size: bool
    dollar: bool
    cmp_ge: bool
    cmp_le: bool
    cmp_lt: bool
    cmp_gt: bool
    selector_comparison: bool
    selector_logical: bool
    selector_element: bool
    selector_evaluation: bool
    selector_array: bool
    selector_bitwise: bool
    projection: bool
    misc: bool
    selector: bool
    standard_logical: bool
    all_operators: bool
    null_operand: bool
    regex_null_operand: bool
    text: str
    query_length_raw: int
    keywords_only: str
    query_length_keywords_only: int

    def columns(self) -> dict:
        """Feature values keyed by their dataset column names."""
        return {COLUMN_NAMES.get(k, k): v for k, v in asdict(self).items()}


# Dataset column names follow the log-data table ("$ne", ">=", ...).
COLUMN_NAMES = {f"op_{op[1:]}": op for op in NAMED_OPERATORS}
COLUMN_NAMES.update({
    "dollar": "$",
    "cmp_ge": ">=",
    "cmp_le": "<=",
    "cmp_lt": "<",
    "cmp_gt": ">",
})
FEATURE_COLUMNS = tuple(COLUMN_NAMES.get(f.name, f.name) for f in fields(FilterFeatures))
TEXT_COLUMNS = ("text", "keywords_only")
NUMERIC_COLUMNS = ("query_length_raw", "query_length_keywords_only")
BOOLEAN_COLUMNS = tuple(c for c in FEATURE_COLUMNS if c not in TEXT_COLUMNS + NUMERIC_COLUMNS)


def extract(text: str) -> FilterFeatures:
    tokens = tokenize_filter(text)
    operators = {t.value for t in tokens if t.kind == OPERATOR}
    bare = [t.value for t in tokens if t.kind == BARE_DOLLAR]
    symbols = {t.text for t in tokens if t.kind == COMPARISON}
    cats = {name: bool(operators.intersection(ops)) for name, ops in CATEGORIES.items()}
    cats["projection"] = cats["projection"] or "$" in bare
    null_owners = _null_operand_owners(tokens)
    kw = keywords_only_from_tokens(tokens)

    flags = {f"op_{op[1:]}": op in operators for op in NAMED_OPERATORS}
    return FilterFeatures(
        **flags,
        dollar=bool(bare),
        cmp_ge=">=" in symbols,
        cmp_le="<=" in symbols,
        cmp_lt="<" in symbols,
        cmp_gt=">" in symbols,
        selector_comparison=cats["comparison"],
        selector_logical=cats["logical"],
        selector_element=cats["element"],
        selector_evaluation=cats["evaluation"],
        selector_array=cats["array"],
        selector_bitwise=cats["bitwise"],
        projection=cats["projection"],
        misc=cats["misc"],
        selector=any(cats[c] for c in SELECTOR_CATEGORIES),
        standard_logical=cats["logical"],
        all_operators=bool(operators) or bool(bare),
        null_operand=bool(null_owners),
        regex_null_operand="$regex" in null_owners,
        text=text,
        query_length_raw=len(text),
        keywords_only=kw,
        query_length_keywords_only=len(kw),
    )
