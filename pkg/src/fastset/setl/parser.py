"""Recursive-descent parser for SETL scripts and client statements.

The grammar is written out in ``docs/grammar.ebnf``.  A few liberties
taken by real-world listings are accepted on purpose: the ``:`` after a
script header may be missing, ``;`` between statements is optional, and a
``;`` may follow a block body.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from ..values import INFINITY, Address
from . import ast as A
from .lexer import ParseError, Token, tokenize

TYPE_NAMES = {"Int", "Bool", "String", "Bytes", "Set", "List", "Address", "Map"}
METHOD_OPS = {"add", "remove", "sub", "next", "append"}
ASSIGN_OPS = {":=", "=", "+=", "-="}
COMPARE_OPS = {"==", "!=", "<", ">", "<=", ">=", "in"}


class Parser:
    def __init__(self, source: str) -> None:
        self.tokens = tokenize(source)
        self.pos = 0
        # parameters of the block being parsed; a bare parameter name used
        # as a statement is a splice, any other bare name is a guard
        self.params: frozenset = frozenset()

    # ------------------------------------------------------------ helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("OP", "KW") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        t = self.tok
        self.pos += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "IDENT":
            self.fail("identifier")
        t = self.tok
        self.pos += 1
        return t.text

    def fail(self, expected: str):
        t = self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        raise ParseError(t.line, t.column, f"{expected}, found {found}")

    def span(self, t: Token) -> Tuple[int, int]:
        return (t.line, t.column)

    # ------------------------------------------------------------- script

    def script(self) -> A.Script:
        if self.tok.kind == "EOF":
            self.fail("a script")
        if self.at("contract") and self.peek().text == "(":
            # inline creation form: contract( <members> )
            self.pos += 2
            script = self.members(None, (), closer=")")
            self.expect(")")
        else:
            name, params = self.header()
            script = self.members(name, params, closer=None)
        if self.tok.kind != "EOF":
            self.fail("end of input")
        return script

    def header(self):
        t, nxt = self.tok, self.peek()
        if t.kind != "IDENT":
            return None, ()
        is_header = nxt.text == "["
        if nxt.text == ":" and nxt.kind == "OP":
            after = self.peek(2)
            is_header = after.kind == "KW" or (after.kind == "IDENT" and after.text not in TYPE_NAMES) \
                or after.kind == "EOF" or after.text == "..."
        if not is_header:
            return None, ()
        name = self.ident()
        params: List[str] = []
        if self.accept("["):
            if not self.at("]"):
                params.append(self.ident())
                while self.accept(","):
                    params.append(self.ident())
            self.expect("]")
        self.accept(":")
        return name, tuple(params)

    def members(self, name, params, closer) -> A.Script:
        cfields: List[A.FieldDecl] = []
        ifields: List[A.FieldDecl] = []
        cctor = ictor = None
        blocks: List[A.BlockDef] = []
        elided = False
        seen_blocks = set()
        while self.tok.kind != "EOF" and not (closer and self.at(closer)):
            start = self.tok
            if self.accept("..."):
                elided = True
                self.accept(";")
                continue
            is_instance = False
            if self.at("instance") and self.peek().text != "(":
                self.pos += 1
                is_instance = True
            if self.accept("constructor"):
                body = self.body()
                self.accept(";")
                if is_instance:
                    if ictor is not None:
                        raise ParseError(start.line, start.column, "a single instance constructor")
                    ictor = body
                else:
                    if cctor is not None:
                        raise ParseError(start.line, start.column, "a single constructor")
                    cctor = body
                continue
            member = self.ident()
            if self.accept(":"):
                decl = A.FieldDecl(member, self.type_annotation(), span=self.span(start))
                self.accept(";")
                scope = ifields if is_instance else cfields
                if any(d.name == member for d in scope):
                    raise ParseError(start.line, start.column, f"a new field name, {member} is declared twice")
                scope.append(decl)
                continue
            self.expect("(")
            bparams: List[str] = []
            if not self.at(")"):
                bparams.append(self.ident())
                while self.accept(","):
                    bparams.append(self.ident())
            self.expect(")")
            self.params = frozenset(bparams)
            try:
                body = self.body()
            finally:
                self.params = frozenset()
            self.accept(";")
            if member in seen_blocks:
                raise ParseError(start.line, start.column, f"a new block name, {member} is defined twice")
            seen_blocks.add(member)
            blocks.append(A.BlockDef(member, tuple(bparams), is_instance, body, span=self.span(start)))
        return A.Script(name, params, tuple(cfields), tuple(ifields), cctor, ictor, tuple(blocks), elided)

    def type_annotation(self) -> str:
        first = self.ident()
        if self.accept("->"):
            return f"{first} -> {self.ident()}"
        return first

    # --------------------------------------------------------- statements

    def body(self) -> Tuple[A.Node, ...]:
        self.expect("{")
        stmts = self.statements(("}",))
        self.expect("}")
        return stmts

    def statements(self, closers) -> Tuple[A.Node, ...]:
        out: List[A.Node] = []
        while not any(self.at(c) for c in closers) and self.tok.kind != "EOF":
            if self.accept(";"):
                continue
            out.append(self.statement())
        return tuple(out)

    def statement(self) -> A.Node:
        t = self.tok
        sp = self.span(t)
        if self.accept("..."):
            return A.EllipsisStmt(span=sp)
        if t.kind == "KW":
            nxt = self.peek().text
            if t.text == "verify" and nxt == "(":
                self.pos += 2
                signers = self.expr()
                self.expect(",")
                quorum = self.expr()
                self.expect(")")
                return A.VerifyStmt(signers, quorum, span=sp)
            if t.text == "transfer" and nxt == "(":
                self.pos += 2
                to = self.expr()
                self.expect(",")
                value = self.expr()
                self.expect(")")
                return A.TransferStmt(to, value, span=sp)
            if t.text == "claim" and nxt == "(":
                self.pos += 1
                return A.ClaimStmt(self.expr_args(), span=sp)
            if t.text == "isSettled" and nxt == "(":
                self.pos += 2
                inner = self.expr()
                self.expect(")")
                return A.IsSettledStmt(inner, span=sp)
            if t.text == "apply" and nxt == "(":
                self.pos += 2
                inner = self.expr()
                self.expect(")")
                return A.ApplyStmt(inner, span=sp)
            if t.text == "if":
                self.pos += 1
                cond = self.expr()
                return A.IfStmt(cond, self.body(), span=sp)
            if t.text == "contract" and nxt == "(":
                return self.create_contract()
            if t.text == "instance" and nxt == "(":
                self.pos += 2
                target = self.expr()
                self.expect(")")
                return A.CreateInstanceStmt(target, span=sp)
        # assignment to a field: x := e, x[k] += e, x.add(e)
        if t.kind == "IDENT":
            nxt = self.peek()
            if nxt.kind == "OP" and nxt.text in ASSIGN_OPS:
                self.pos += 2
                return A.AssignStmt(t.text, None, nxt.text, self.expr(), span=sp)
            if nxt.text == "[" and nxt.kind == "OP":
                save = self.pos
                self.pos += 2
                key = self.expr()
                self.expect("]")
                if self.tok.kind == "OP" and self.tok.text in ASSIGN_OPS:
                    op = self.tok.text
                    self.pos += 1
                    return A.AssignStmt(t.text, key, op, self.expr(), span=sp)
                self.pos = save
            if nxt.text == "." and self.peek(2).text in METHOD_OPS and self.peek(3).text == "(":
                method = self.peek(2).text
                self.pos += 4
                arg = self.expr()
                self.expect(")")
                return A.AssignStmt(t.text, None, method, arg, span=sp)
        expr = self.expr()
        if self.at("(") and isinstance(expr, A.Member):
            args = self.call_args()
            return A.CallStmt(expr.obj, expr.name, args, span=sp)
        if isinstance(expr, A.Name) and t.kind == "IDENT" and expr.id in self.params:
            return A.SpliceStmt(expr.id, span=sp)
        return A.GuardStmt(expr, span=sp)

    def create_contract(self) -> A.Node:
        sp = self.span(self.tok)
        self.expect("contract")
        self.expect("(")
        # named template, optionally instantiated: contract(NAME[args])
        if self.tok.kind == "IDENT" and self.peek().text in ("[", ")"):
            name = self.ident()
            args: Tuple[A.Node, ...] = ()
            if self.accept("["):
                items = []
                if not self.at("]"):
                    items.append(self.expr())
                    while self.accept(","):
                        items.append(self.expr())
                self.expect("]")
                args = tuple(items)
            self.expect(")")
            return A.CreateContractStmt(name, args, span=sp)
        script = self.members(None, (), closer=")")
        self.expect(")")
        return A.CreateContractStmt(script, (), span=sp)

    def call_args(self) -> Tuple[A.Node, ...]:
        """Block-call arguments: expressions or statement lists."""
        self.expect("(")
        args: List[A.Node] = []
        if self.at(")"):
            self.pos += 1
            return ()
        while True:
            start = self.tok
            stmts = self.statements((",", ")"))
            if len(stmts) == 1 and isinstance(stmts[0], A.GuardStmt):
                args.append(stmts[0].expr)
            elif len(stmts) == 1 and isinstance(stmts[0], A.SpliceStmt):
                args.append(A.Name(stmts[0].param, span=stmts[0].span))
            else:
                args.append(A.CodeArg(stmts, span=self.span(start)))
            if self.accept(","):
                continue
            self.expect(")")
            return tuple(args)

    def expr_args(self) -> Tuple[A.Node, ...]:
        self.expect("(")
        items: List[A.Node] = []
        if not self.at(")"):
            items.append(self.expr())
            while self.accept(","):
                items.append(self.expr())
        self.expect(")")
        return tuple(items)

    # -------------------------------------------------------- expressions

    def expr(self) -> A.Node:
        return self.or_expr()

    def or_expr(self) -> A.Node:
        left = self.and_expr()
        while self.at("or"):
            sp = self.span(self.tok)
            self.pos += 1
            left = A.Binary("or", left, self.and_expr(), span=sp)
        return left

    def and_expr(self) -> A.Node:
        left = self.not_expr()
        while self.at("and"):
            sp = self.span(self.tok)
            self.pos += 1
            left = A.Binary("and", left, self.not_expr(), span=sp)
        return left

    def not_expr(self) -> A.Node:
        if self.at("not"):
            sp = self.span(self.tok)
            self.pos += 1
            return A.Unary("not", self.not_expr(), span=sp)
        return self.cmp_expr()

    def cmp_expr(self) -> A.Node:
        left = self.add_expr()
        t = self.tok
        if t.kind in ("OP", "KW") and t.text in COMPARE_OPS:
            self.pos += 1
            return A.Binary(t.text, left, self.add_expr(), span=self.span(t))
        return left

    def add_expr(self) -> A.Node:
        left = self.postfix()
        while self.tok.kind == "OP" and self.tok.text in ("+", "-"):
            t = self.tok
            self.pos += 1
            left = A.Binary(t.text, left, self.postfix(), span=self.span(t))
        return left

    def postfix(self) -> A.Node:
        node = self.primary()
        while True:
            if self.at(".") and self.peek().kind == "IDENT":
                sp = self.span(self.tok)
                self.pos += 1
                node = A.Member(node, self.ident(), span=sp)
            elif self.at("["):
                sp = self.span(self.tok)
                self.pos += 1
                key = self.expr()
                self.expect("]")
                node = A.Index(node, key, span=sp)
            else:
                return node

    def primary(self) -> A.Node:
        t = self.tok
        sp = self.span(t)
        if t.kind == "INT":
            self.pos += 1
            return A.Const(t.value, span=sp)
        if self.at("-") and self.peek().kind == "INT":
            self.pos += 2
            return A.Const(-self.tokens[self.pos - 1].value, span=sp)
        if t.kind == "STRING":
            self.pos += 1
            return A.Const(t.value, span=sp)
        if t.kind == "HEX":
            self.pos += 1
            return A.Const(t.value, span=sp)
        if t.kind == "ADDR":
            self.pos += 1
            return A.Const(Address(t.value), span=sp)
        if t.kind == "KW":
            simple = {"true": True, "false": False, "infinity": INFINITY, "none": None,
                      "empty": frozenset(), "nil": ()}
            if t.text in simple:
                self.pos += 1
                return A.Const(simple[t.text], span=sp)
            if t.text in ("time", "contract", "instance"):
                self.pos += 1
                return A.Name(t.text, span=sp)
            if t.text == "claim":
                self.pos += 1
                return A.ClaimExpr(self.expr_args(), span=sp)
        if t.kind == "IDENT":
            self.pos += 1
            if self.at("(") and t.text in FUNCTIONS:
                return A.FuncCall(t.text, self.expr_args(), span=sp)
            return A.Name(t.text, span=sp)
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if self.accept("{"):
            items = self.items("}")
            return fold(A.SetLit(items, span=sp))
        if self.accept("["):
            items = self.items("]")
            return fold(A.ListLit(items, span=sp))
        self.fail("an expression")

    def items(self, closer: str) -> Tuple[A.Node, ...]:
        out: List[A.Node] = []
        if not self.at(closer):
            out.append(self.expr())
            while self.accept(","):
                out.append(self.expr())
        self.expect(closer)
        return tuple(out)


FUNCTIONS = {"size"}


def fold(node: A.Node) -> A.Node:
    """Collapse set/list literals whose items are all constants."""
    if isinstance(node, (A.SetLit, A.ListLit)) and all(isinstance(i, A.Const) for i in node.items):
        values = [i.value for i in node.items]
        value = frozenset(values) if isinstance(node, A.SetLit) else tuple(values)
        return A.Const(value, span=node.span)
    return node


def parse(source: str) -> A.Script:
    """Parse a script; raises ``ParseError`` with line and column."""
    return Parser(source).script()


def parse_statements(source: str) -> Tuple[A.Node, ...]:
    """Parse a client statement list such as ``transfer(bob, 1); X.do(C)``."""
    p = Parser(source)
    stmts = p.statements(())
    if p.tok.kind != "EOF":
        p.fail("end of input")
    return stmts


def parse_expr(source: str) -> A.Node:
    p = Parser(source)
    e = p.expr()
    if p.tok.kind != "EOF":
        p.fail("end of input")
    return e


__all__ = ["ParseError", "parse", "parse_statements", "parse_expr", "fold"]
