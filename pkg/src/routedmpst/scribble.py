"""Scribble-style frontend: parse protocol modules and elaborate `do` calls
(including role-permuting self-calls) into recursive global types.

Grammar accepted here:

    module       = { typeDecl | protocolDecl }*
    typeDecl     = "type" "<" Ident ">" String "from" String "as" Ident ";"
    protocolDecl = ["aux"] "global" "protocol" Ident "(" roleList ")" "{" stmt* "}"
    roleList     = [ "role" Ident { "," "role" Ident } ]
    stmt         = msg | choice | doCall
    msg          = Ident "(" sortList? ")" "from" Ident "to" Ident ";"
    choice       = "choice" "at" Ident block { "or" block }
    block        = "{" stmt* "}"
    doCall       = "do" Ident "(" identList ")" ";"

Comments run from `//` to the end of the line.  A `do` or a `choice` must be
the last statement of its block; general continuations after them have no
counterpart in the type grammar and are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import (
    GComm, GEnd, GRec, GVar, GlobalType, MsgLabel, Role, free_vars, validate,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self):
        assert (self.start_line, self.start_col) <= (self.end_line, self.end_col), \
            "span must not end before it starts"

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


class ScribbleError(Exception):
    def __init__(self, message: str, span: SourceSpan | None = None):
        self.span = span
        self.message = message
        super().__init__(f"{span}: {message}" if span else message)


class SyntaxProblem(ScribbleError):
    def __init__(self, span: SourceSpan, expected: set[str], found: str):
        self.expected = frozenset(expected)
        self.found = found
        want = ", ".join(sorted(expected))
        super().__init__(f"expected {want}, found {found}", span)


class DuplicateRole(ScribbleError):
    pass


class UnknownRole(ScribbleError):
    pass


class UnknownProtocol(ScribbleError):
    pass


class ArityMismatch(ScribbleError):
    pass


class NonTailCall(ScribbleError):
    """A `do` (or a `choice`) followed by further statements."""


class UnboundedCall(ScribbleError):
    """A call chain that never closes into a recursion back-edge."""


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MsgStmt:
    label: str
    payload_sorts: tuple[str, ...]
    sender: str
    receiver: str
    span: SourceSpan = field(compare=False)


@dataclass(frozen=True)
class ChoiceStmt:
    at: str
    blocks: tuple[tuple["Stmt", ...], ...]
    span: SourceSpan = field(compare=False)


@dataclass(frozen=True)
class DoStmt:
    protocol: str
    args: tuple[str, ...]
    span: SourceSpan = field(compare=False)


Stmt = MsgStmt | ChoiceStmt | DoStmt


@dataclass(frozen=True)
class TypeAlias:
    alias: str
    language: str
    remote_name: str
    source: str
    span: SourceSpan = field(compare=False)


@dataclass(frozen=True)
class ProtocolDecl:
    name: str
    role_params: tuple[str, ...]
    is_aux: bool
    body: tuple[Stmt, ...]
    type_aliases: tuple[TypeAlias, ...]
    span: SourceSpan = field(compare=False)

    def roles(self) -> tuple[Role, ...]:
        return tuple(Role(r) for r in self.role_params)


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

_KEYWORDS = {"global", "protocol", "role", "from", "to", "choice", "at", "or",
             "do", "aux", "type", "as"}
_PUNCT = {"(", ")", "{", "}", ",", ";", "<", ">"}


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident", "string", "punct", "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str, filename: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise SyntaxProblem(SourceSpan(filename, line, col, line, col),
                                        {"closing quote"}, "newline")
                j += 1
            if j >= n:
                raise SyntaxProblem(SourceSpan(filename, line, col, line, col),
                                    {"closing quote"}, "end of input")
            tokens.append(_Token("string", text[i + 1:j], line, col))
            col += j - i + 1
            i = j + 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise SyntaxProblem(SourceSpan(filename, line, col, line, col),
                            {"identifier", "punctuation"}, repr(ch))
    tokens.append(_Token("eof", "", line, col))
    return tokens


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, filename: str):
        self.filename = filename
        self.tokens = _tokenize(text, filename)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def span_here(self) -> SourceSpan:
        tok = self.peek()
        return SourceSpan(self.filename, tok.line, tok.col, tok.line,
                          tok.col + max(len(tok.text), 1))

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "string":
            raise SyntaxProblem(self.span_here(), {repr(text)},
                                repr(tok.text) if tok.text else "end of input")
        return self.take()

    def expect_ident(self, what: str = "identifier") -> _Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in _KEYWORDS:
            raise SyntaxProblem(self.span_here(), {what},
                                repr(tok.text) if tok.text else "end of input")
        return self.take()

    def expect_string(self) -> _Token:
        tok = self.peek()
        if tok.kind != "string":
            raise SyntaxProblem(self.span_here(), {"string literal"}, repr(tok.text))
        return self.take()

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind != "string" and tok.text == text

    def span_from(self, start: _Token) -> SourceSpan:
        prev = self.tokens[self.pos - 1]
        return SourceSpan(self.filename, start.line, start.col,
                          prev.line, prev.col + len(prev.text))

    # module = { typeDecl | protocolDecl }*
    def module(self) -> list[ProtocolDecl]:
        aliases: list[TypeAlias] = []
        decls: list[ProtocolDecl] = []
        while not self.at("") or self.peek().kind != "eof":
            if self.peek().kind == "eof":
                break
            if self.at("type"):
                aliases.append(self.type_decl())
            elif self.at("aux") or self.at("global"):
                decls.append(self.protocol_decl(tuple(aliases)))
            else:
                raise SyntaxProblem(self.span_here(), {"'type'", "'global'", "'aux'"},
                                    repr(self.peek().text))
        return decls

    def type_decl(self) -> TypeAlias:
        start = self.expect("type")
        self.expect("<")
        lang = self.expect_ident("host language").text
        self.expect(">")
        remote = self.expect_string().text
        self.expect("from")
        source = self.expect_string().text
        self.expect("as")
        alias = self.expect_ident("alias name").text
        self.expect(";")
        return TypeAlias(alias, lang, remote, source, self.span_from(start))

    def protocol_decl(self, aliases: tuple[TypeAlias, ...]) -> ProtocolDecl:
        start = self.peek()
        is_aux = False
        if self.at("aux"):
            self.take()
            is_aux = True
        self.expect("global")
        self.expect("protocol")
        name = self.expect_ident("protocol name").text
        self.expect("(")
        roles: list[str] = []
        spans: dict[str, SourceSpan] = {}
        if not self.at(")"):
            while True:
                self.expect("role")
                tok_span = self.span_here()
                role = self.expect_ident("role name").text
                if role in roles:
                    raise DuplicateRole(f"role {role} declared twice", tok_span)
                roles.append(role)
                spans[role] = tok_span
                if self.at(","):
                    self.take()
                    continue
                break
        self.expect(")")
        self.expect("{")
        body = self.statements()
        self.expect("}")
        decl = ProtocolDecl(name, tuple(roles), is_aux, body, aliases,
                            self.span_from(start))
        self._check_roles(decl)
        return decl

    def statements(self) -> tuple[Stmt, ...]:
        out: list[Stmt] = []
        while not self.at("}"):
            stmt = self.statement()
            if out and isinstance(out[-1], (DoStmt, ChoiceStmt)):
                kind = "do" if isinstance(out[-1], DoStmt) else "choice"
                raise NonTailCall(f"statements after a tail {kind!r} are not supported",
                                  out[-1].span)
            out.append(stmt)
        return tuple(out)

    def statement(self) -> Stmt:
        if self.at("choice"):
            return self.choice_stmt()
        if self.at("do"):
            return self.do_stmt()
        return self.msg_stmt()

    def msg_stmt(self) -> MsgStmt:
        start = self.peek()
        label = self.expect_ident("message label").text
        self.expect("(")
        sorts: list[str] = []
        if not self.at(")"):
            while True:
                sorts.append(self.expect_ident("payload sort").text)
                if self.at(","):
                    self.take()
                    continue
                break
        self.expect(")")
        self.expect("from")
        sender = self.expect_ident("role name").text
        self.expect("to")
        receiver = self.expect_ident("role name").text
        self.expect(";")
        return MsgStmt(label, tuple(sorts), sender, receiver, self.span_from(start))

    def choice_stmt(self) -> ChoiceStmt:
        start = self.expect("choice")
        self.expect("at")
        at = self.expect_ident("role name").text
        blocks = [self.block()]
        while self.at("or"):
            self.take()
            blocks.append(self.block())
        return ChoiceStmt(at, tuple(blocks), self.span_from(start))

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        stmts = self.statements()
        self.expect("}")
        return stmts

    def do_stmt(self) -> DoStmt:
        start = self.expect("do")
        name = self.expect_ident("protocol name").text
        self.expect("(")
        args: list[str] = []
        if not self.at(")"):
            while True:
                args.append(self.expect_ident("role name").text)
                if self.at(","):
                    self.take()
                    continue
                break
        self.expect(")")
        self.expect(";")
        return DoStmt(name, tuple(args), self.span_from(start))

    def _check_roles(self, decl: ProtocolDecl) -> None:
        declared = set(decl.role_params)

        def walk(stmts) -> None:
            for stmt in stmts:
                if isinstance(stmt, MsgStmt):
                    for role in (stmt.sender, stmt.receiver):
                        if role not in declared:
                            raise UnknownRole(f"role {role} not declared", stmt.span)
                elif isinstance(stmt, ChoiceStmt):
                    if stmt.at not in declared:
                        raise UnknownRole(f"role {stmt.at} not declared", stmt.span)
                    for blk in stmt.blocks:
                        walk(blk)
                elif isinstance(stmt, DoStmt):
                    for role in stmt.args:
                        if role not in declared:
                            raise UnknownRole(f"role {role} not declared", stmt.span)

        walk(decl.body)


def parse_module(text: str, filename: str = "<string>") -> list[ProtocolDecl]:
    """Parse a protocol module; `do` targets are resolved against the module."""
    decls = _Parser(text, filename).module()
    by_name = {d.name: d for d in decls}

    def check_calls(decl: ProtocolDecl, stmts) -> None:
        for stmt in stmts:
            if isinstance(stmt, DoStmt):
                target = by_name.get(stmt.protocol)
                if target is None:
                    raise UnknownProtocol(f"protocol {stmt.protocol} not defined", stmt.span)
                if len(stmt.args) != len(target.role_params):
                    raise ArityMismatch(
                        f"{stmt.protocol} takes {len(target.role_params)} roles, "
                        f"got {len(stmt.args)}", stmt.span)
            elif isinstance(stmt, ChoiceStmt):
                for blk in stmt.blocks:
                    check_calls(decl, blk)

    for decl in decls:
        check_calls(decl, decl.body)
    return decls


# --------------------------------------------------------------------------
# Pretty printing (round-trips through parse_module)
# --------------------------------------------------------------------------


def pretty_module(decls: list[ProtocolDecl]) -> str:
    out: list[str] = []
    seen_aliases: set[tuple] = set()
    for decl in decls:
        for alias in decl.type_aliases:
            key = (alias.alias, alias.language, alias.remote_name, alias.source)
            if key in seen_aliases:
                continue
            seen_aliases.add(key)
            out.append(f'type <{alias.language}> "{alias.remote_name}" '
                       f'from "{alias.source}" as {alias.alias};')
        header = "aux global protocol" if decl.is_aux else "global protocol"
        params = ", ".join(f"role {r}" for r in decl.role_params)
        out.append(f"{header} {decl.name}({params}) {{")
        out.extend(_pretty_stmts(decl.body, 1))
        out.append("}")
    return "\n".join(out) + "\n"


def _pretty_stmts(stmts, depth: int) -> list[str]:
    pad = "  " * depth
    out = []
    for stmt in stmts:
        if isinstance(stmt, MsgStmt):
            sorts = ", ".join(stmt.payload_sorts)
            out.append(f"{pad}{stmt.label}({sorts}) from {stmt.sender} to {stmt.receiver};")
        elif isinstance(stmt, DoStmt):
            out.append(f"{pad}do {stmt.protocol}({', '.join(stmt.args)});")
        elif isinstance(stmt, ChoiceStmt):
            out.append(f"{pad}choice at {stmt.at} {{")
            first = True
            for blk in stmt.blocks:
                if not first:
                    out.append(f"{pad}}} or {{")
                first = False
                out.extend(_pretty_stmts(blk, depth + 1))
            out.append(f"{pad}}}")
    return out


# --------------------------------------------------------------------------
# Elaboration
# --------------------------------------------------------------------------


def elaborate(decls: list[ProtocolDecl], entry: str,
              args: tuple[Role, ...] | None = None) -> GlobalType:
    """Expand `do` calls into recursion and produce a closed global type.

    Expansion is memoised on (protocol, concrete role tuple): revisiting a key
    emits a back-edge to the binder introduced at its first expansion, so
    role-permuting self-calls close after at most one cycle of the
    permutation.
    """
    by_name = {d.name: d for d in decls}
    if entry not in by_name:
        raise UnknownProtocol(f"protocol {entry} not defined")
    root = by_name[entry]
    if root.is_aux:
        raise UnknownProtocol(f"protocol {entry} is aux-only and cannot be an entry point")
    if args is None:
        args = root.roles()
    if len(args) != len(root.role_params):
        raise ArityMismatch(f"{entry} takes {len(root.role_params)} roles, got {len(args)}")

    alias_map = {a.alias: a.remote_name for a in root.type_aliases}
    binders: dict[tuple[str, tuple[Role, ...]], str] = {}
    used_binders: set[str] = set()
    counter = [0]

    def resolve_sort(sort: str) -> str:
        return alias_map.get(sort, sort)

    def expand(decl: ProtocolDecl, actuals: tuple[Role, ...],
               is_entry: bool = False) -> GlobalType:
        key = (decl.name, actuals)
        binder = f"t{counter[0]}"
        counter[0] += 1
        binders[key] = binder
        env = dict(zip(decl.role_params, actuals))
        body = seq(decl.body, env)
        del binders[key]
        # Call expansions are always binder-wrapped; the entry protocol only
        # when its own key is revisited.  Unused binders vanish under
        # canonicalisation.  Wrapping a bare end/variable would be vacuous or
        # non-contractive, so those pass through.
        if (binder in used_binders or not is_entry) \
                and not isinstance(body, (GEnd, GVar)):
            return GRec(binder, body)
        return body

    def seq(stmts, env) -> GlobalType:
        if not stmts:
            return GEnd()
        head, rest = stmts[0], stmts[1:]
        if isinstance(head, MsgStmt):
            if env[head.sender] == env[head.receiver]:
                raise ScribbleError("message sender and receiver coincide", head.span)
            lbl = MsgLabel(head.label, tuple(resolve_sort(s) for s in head.payload_sorts))
            return GComm(env[head.sender], env[head.receiver], ((lbl, seq(rest, env)),))
        if isinstance(head, DoStmt):
            # Tail position is guaranteed by the parser.
            target = by_name[head.protocol]
            actuals = tuple(env[a] for a in head.args)
            key = (head.protocol, actuals)
            if key in binders:
                used_binders.add(binders[key])
                return GVar(binders[key])
            return expand(target, actuals)
        if isinstance(head, ChoiceStmt):
            chooser = env[head.at]
            receiver = None
            branches = []
            for blk in head.blocks:
                if not blk or not isinstance(blk[0], MsgStmt):
                    raise ScribbleError(
                        "every choice branch must start with a message from the "
                        "deciding role", head.span)
                first = blk[0]
                if env[first.sender] != chooser:
                    raise ScribbleError(
                        f"branch starts with a message from {first.sender}, "
                        f"but the choice is at {head.at}", first.span)
                if receiver is None:
                    receiver = env[first.receiver]
                elif env[first.receiver] != receiver:
                    raise ScribbleError(
                        "all branches of a choice must first message the same role",
                        first.span)
                if env[first.sender] == env[first.receiver]:
                    raise ScribbleError("message sender and receiver coincide", first.span)
                lbl = MsgLabel(first.label,
                               tuple(resolve_sort(s) for s in first.payload_sorts))
                if any(lbl.name == b[0].name for b in branches):
                    raise ScribbleError(f"duplicate branch label {lbl.name}", first.span)
                # The parser guarantees nothing follows a choice, so the
                # branch continuation is just the rest of its own block.
                branches.append((lbl, seq(tuple(blk[1:]), env)))
            return GComm(chooser, receiver, tuple(branches))
        raise TypeError(type(head).__name__)

    result = expand(root, tuple(args), is_entry=True)
    if free_vars(result):
        raise UnboundedCall(f"expansion left unbound recursion: {sorted(free_vars(result))}")
    validate(result)
    return result
