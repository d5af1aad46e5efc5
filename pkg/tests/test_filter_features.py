import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from logsentinel.filter_features import (
    BARE_DOLLAR,
    CATEGORIES,
    COMPARISON,
    FIELD,
    NAMED_OPERATORS,
    NULL,
    OPERATOR,
    PUNCT,
    SELECTOR_CATEGORIES,
    extract,
    keywords_only,
    tokenize_filter,
)


def kinds(text):
    return [(t.kind, t.text) for t in tokenize_filter(text)]


def test_tokenize_ne_null():
    assert kinds('{"a":{"$ne":null}}') == [
        (PUNCT, "{"), (FIELD, '"a"'), (PUNCT, ":"), (PUNCT, "{"), (OPERATOR, '"$ne"'),
        (PUNCT, ":"), (NULL, "null"), (PUNCT, "}"), (PUNCT, "}"),
    ]


def test_string_literals_are_opaque():
    toks = tokenize_filter('{"$where":"this.x > 1"}')
    assert any(t.kind == OPERATOR and t.value == "$where" for t in toks)
    assert not any(t.kind == COMPARISON for t in toks)


def test_malformed_payload():
    toks = tokenize_filter("'; return true; var x='")
    assert toks
    assert not any(t.kind == OPERATOR for t in toks)


def test_bare_dollar_tokens():
    toks = tokenize_filter('{"$function":1, "a.$": 1, $ : 2, "$sort": 3}')
    bare = [t.value for t in toks if t.kind == BARE_DOLLAR]
    assert bare == ["$function", "$", "$sort"]
    assert extract('{"a.$": 1}').query_length_raw == 10


def test_unquoted_operator_keys():
    f = extract("{username: {$ne: 1}, $where: 'x'}")
    assert f.op_ne and f.op_where and not f.dollar


@pytest.mark.parametrize("text, expected", [
    ("{}", "{}"),
    ('{"username":{"$ne":null}}', "{:{$ne:null}}"),
    ('{"$where":"this.a > 1"}', "{$where:}"),
    ('{"a":{"$gt":"$ne"}}', "{:{$gt:$ne}}"),
    ('{"a":{"$in":[1,2,true]}}', "{:{$in:[,,true]}}"),
    ("{ 'x' : { $regex : '^a', $options : 'i' } }", "{:{$regex:,$options:}}"),
])
def test_keywords_only(text, expected):
    assert keywords_only(text) == expected


def test_extract_ne_null():
    f = extract('{"username":{"$ne":null}}')
    assert f.op_ne and f.null_operand and f.selector_comparison and f.selector
    assert f.query_length_raw == 25
    assert f.keywords_only == "{:{$ne:null}}" and f.query_length_keywords_only == 13
    assert not f.regex_null_operand and not f.dollar


def test_extract_empty():
    f = extract("{}")
    flags = [v for k, v in f.__dict__.items() if isinstance(v, bool)]
    assert not any(flags)
    assert f.query_length_raw == 2


def test_keyword_is_not_symbol():
    f = extract('{"a":{"$gt":""}}')
    assert f.op_gt and not f.cmp_gt


def test_symbols_outside_strings():
    f = extract("{a: {x >= 1 || y < 2 || z <= 3 || w > 4}}")
    assert f.cmp_ge and f.cmp_lt and f.cmp_le and f.cmp_gt


def test_null_operand_variants():
    assert extract('{"a":{"$regex":null}}').regex_null_operand
    assert extract('{"a":{"$in":[1,null]}}').null_operand
    assert not extract('{"a":null}').null_operand
    assert not extract('{"$or":[{"a":null}]}').null_operand


def test_categories():
    assert extract('{"$or":[{"a":1}]}').selector_logical
    assert extract('{"a":{"$bitsAllSet":3}}').selector_bitwise
    assert extract('{"a":{"$slice":2}}').projection
    assert extract('{a: {$: 1}}').projection
    assert not extract('{"a.$":1}').projection  # quoted paths are field names
    assert extract('{"$comment":"hi"}').misc
    assert not extract('{"$comment":"hi"}').selector
    assert extract('{"$text":{"$search":"x"}}').selector_evaluation
    assert not extract('{"$text":{"$search":"x"}}').dollar


def test_unicode_length():
    f = extract('{"név":"ő"}')
    assert f.query_length_raw == 11


def test_columns_use_table_names():
    cols = extract("{}").columns()
    assert "$ne" in cols and "$" in cols and ">=" in cols and "op_ne" not in cols


def test_large_input_total():
    blob = '{"a":"' + "x\\\"$ne" * 180000 + '"}'
    assert len(blob) > 1_000_000
    f = extract(blob)
    assert not f.op_ne


texts = st.one_of(
    st.text(max_size=200),
    st.text(alphabet='{}[]:,"\'$ne<>=ablt null true 0123.-\\', max_size=200),
)


@given(texts)
def test_extract_invariants(text):
    f = extract(text)
    assert f.query_length_raw == len(text)
    assert f.query_length_keywords_only == len(f.keywords_only)
    assert f.query_length_keywords_only <= f.query_length_raw
    assert f.selector == any(getattr(f, f"selector_{c}") for c in SELECTOR_CATEGORIES)
    named = [getattr(f, f"op_{op[1:]}") for op in NAMED_OPERATORS]
    cats = [getattr(f, f"selector_{c}") for c in SELECTOR_CATEGORIES] + [f.projection, f.misc]
    assert f.all_operators == (f.all_operators or any(named) or any(cats) or f.dollar)
    if any(named) or any(cats) or f.dollar:
        assert f.all_operators
    for op in NAMED_OPERATORS:
        if getattr(f, f"op_{op[1:]}"):
            assert op in text
    assert not re.search(r"\s", f.keywords_only)
    assert extract(text) == f


@given(texts)
def test_token_texts_rebuild_input(text):
    toks = tokenize_filter(text)
    rebuilt = []
    pos = 0
    for t in toks:
        gap = text[pos:t.position]
        assert gap.strip() == ""
        rebuilt.append(gap + t.text)
        pos = t.position + len(t.text)
    assert text[pos:].strip() == ""
    assert "".join(rebuilt) + text[pos:] == text
    for t in toks:
        if t.kind == OPERATOR:
            assert t.value.startswith("$")


@given(st.dictionaries(st.from_regex(r"[a-z]{1,6}", fullmatch=True),
                       st.one_of(st.from_regex(r"[a-z]{1,6}", fullmatch=True),
                                 st.integers(0, 10**6)), max_size=4))
def test_keywords_only_drops_literals(doc):
    import json
    text = json.dumps(doc)
    kw = keywords_only(text)
    for key, value in doc.items():
        assert f'"{key}"' not in kw
        assert str(value) not in kw or str(value) in ("null", "true", "false")


def test_category_table_shape():
    assert set(CATEGORIES) == {"comparison", "logical", "element", "evaluation", "array",
                               "bitwise", "projection", "misc"}
