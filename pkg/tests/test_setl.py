"""SETL front end: lexer errors, parser, printer round trip, compiler."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from snapshot_tool import CORPUS, SNAPSHOTS, render, snapshot_name, tree_of

from fastset.claims import Guard, Transfer, When
from fastset.oracle import alias_address
from fastset.setl import ast as A
from fastset.setl import compiler as C
from fastset.setl.parser import ParseError, parse, parse_expr, parse_statements
from fastset.setl.printer import print_expr, print_script, print_statements
from fastset.values import Code

SCRIPTS = [p for p in CORPUS if p.suffix == ".setl"]
STATEMENTS = [p for p in CORPUS if p.suffix == ".stmts"]
# block listings that extend another listing's fields
HOSTS = {"alice_info_set_name": "alice_info_code"}


def ids(paths):
    return [f"{p.parent.name}/{p.stem}" for p in paths]


@pytest.mark.parametrize("path", CORPUS, ids=ids(CORPUS))
def test_ast_snapshot_is_stable(path):
    expected = (SNAPSHOTS / snapshot_name(path)).read_text()
    assert render(tree_of(path)) == expected


def test_every_corpus_file_has_a_snapshot():
    assert len(list(SNAPSHOTS.glob("*.json"))) == len(CORPUS) > 30


@pytest.mark.parametrize("path", SCRIPTS, ids=ids(SCRIPTS))
def test_printer_round_trip(path):
    tree = parse(path.read_text())
    printed = print_script(tree)
    assert parse(printed) == tree
    assert print_script(parse(printed)) == printed


@pytest.mark.parametrize("path", STATEMENTS, ids=ids(STATEMENTS))
def test_statement_round_trip(path):
    stmts = parse_statements(path.read_text())
    assert parse_statements(print_statements(stmts)) == stmts


def _source(path):
    text = path.read_text()
    if path.stem in HOSTS:
        text = (path.parent / f"{HOSTS[path.stem]}.setl").read_text() + text
    return text


def compile_listing(path):
    """Lower a listing to claims once names and parameters are bound.

    Block parameters are tried as integers first and as quoted code when
    the block splices them.
    """
    s = parse(_source(path))
    s = C.instantiate(s, {p: alias_address(p.lower()) for p in s.template_params})
    s = C.link(s, {n: alias_address(n) for n in C.free_names(s)})
    assert C.free_names(s) == []
    loaded = C.LoadedScript(s)
    owner, contract, inst = (alias_address(n) for n in ("owner", "contract", "inst"))
    claims = list(C.compile_constructor(loaded, owner, contract, None))
    claims += C.compile_constructor(loaded, owner, contract, inst, instance=True)
    for b in s.blocks:
        target, instance = (inst, inst) if b.is_instance else (contract, None)
        err = None
        for value in (1, Code("1 == 1;")):
            scope = C._scope_for(loaded, target, contract, instance, {p: value for p in b.params})
            try:
                claims += C.compile_body(b.body, scope)
                break
            except C.CompileError as exc:
                err = exc
        else:
            raise err
    assert claims or not (s.blocks or s.contract_constructor or s.instance_constructor)


@pytest.mark.parametrize("path", SCRIPTS, ids=ids(SCRIPTS))
def test_corpus_compiles(path):
    compile_listing(path)


def test_parse_error_has_position():
    with pytest.raises(ParseError) as info:
        parse("T:\n    x : Int;\n    constructor {\n        x := ;\n    }\n")
    assert info.value.line == 4
    assert info.value.column > 0
    with pytest.raises(ParseError):
        parse_statements("transfer(bob 1)")


def test_precedence():
    e = parse_expr("1 + 2 < 4 and not(x == y) or z")
    assert e.op == "or"
    assert e.left.op == "and"
    assert e.left.left.op == "<"


def test_unbound_names_are_reported():
    with pytest.raises(C.CompileError, match="unbound"):
        C.load_script("T:\n    constructor {\n        transfer(mystery, 1);\n    }\n", ())


def test_template_arity_is_checked():
    with pytest.raises(C.ArityMismatch):
        C.instantiate(parse("T[A,B]:\n    constructor {\n        A == B;\n    }\n"), (1,))


def test_user_statements_compile_to_claims(alice, bob):
    claims = C.compile_user("transfer(bob, 3); 1 < 2;", alice, {"bob": bob})
    assert isinstance(claims[0], Transfer) and claims[0].issuer == alice
    assert isinstance(claims[1], Guard)


def test_if_lowers_to_a_conditional_claim(alice):
    src = "T:\n    constructor {\n        if (time < 5) {\n            transfer(instance.owner, 1);\n        }\n    }\n"
    s = C.link(parse(src), {})
    loaded = C.LoadedScript(s)
    (claim,) = C.compile_constructor(loaded, alice, alice, alice)
    assert isinstance(claim, When)


# ---------------------------------------------------------------- round-trip property

names = st.sampled_from(["x", "y", "balance", "amount"])
leaves = st.one_of(
    st.integers(-50, 50).map(A.Const),
    st.booleans().map(A.Const),
    st.text(alphabet="ab \"\\", max_size=4).map(A.Const),
    names.map(A.Name),
)


def _extend(children):
    ops = st.sampled_from(["+", "-", "==", "!=", "<", "<=", ">", ">=", "and", "or", "in"])
    return st.one_of(
        st.builds(A.Binary, ops, children, children),
        st.builds(lambda e: A.Unary("not", e), children),
        st.builds(A.Member, children.filter(lambda n: isinstance(n, A.Name)), names),
        st.builds(A.Index, names.map(A.Name), children),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_expression_print_parse_round_trip(e):
    assert parse_expr(print_expr(e)) == parse_expr(print_expr(parse_expr(print_expr(e))))
    assert print_expr(parse_expr(print_expr(e))) == print_expr(e)
