"""Lexer and recursive-descent parser for the program language."""
import logging
import re
from dataclasses import dataclass
from typing import List

from xnm.errors import LexError, ParseError, UnknownModuleError
from xnm.program import SIGNATURES, Expr, check_structure

logger = logging.getLogger(__name__)

WORD = "word"
PUNCT = "punct"
EOF = "eof"

_WORD_RE = re.compile(r"[A-Za-z0-9_:]+")
_PUNCTUATION = "()[],"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int
    end: int


def _byte_offsets(text: str) -> List[int]:
    offsets = [0]
    for ch in text:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))
    return offsets


def tokenize(text: str) -> List[Token]:
    """Split into words and punctuation; offsets are byte offsets into the UTF-8 text"""
    at = _byte_offsets(text)
    tokens: List[Token] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _PUNCTUATION:
            tokens.append(Token(PUNCT, ch, at[i], at[i + 1]))
            i += 1
            continue
        match = _WORD_RE.match(text, i)
        if match is None:
            raise LexError(f"Unexpected character {ch!r}", at[i], (at[i], at[i + 1]))
        tokens.append(Token(WORD, match.group(), at[i], at[match.end()]))
        i = match.end()
    tokens.append(Token(EOF, "", at[len(text)], at[len(text)]))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != EOF:
            self.pos += 1
        return token

    def expect_punct(self, ch: str, what: str) -> Token:
        token = self.peek()
        if token.kind != PUNCT or token.text != ch:
            raise ParseError(f"expected {what}", token.offset, (token.offset, token.end))
        return self.advance()

    def parse(self) -> Expr:
        expr = self.parse_expr()
        token = self.peek()
        if token.kind != EOF:
            raise ParseError("expected end of input", token.offset, (token.offset, token.end))
        return expr

    def parse_expr(self) -> Expr:
        name = self.peek()
        if name.kind != WORD:
            raise ParseError("expected expression", name.offset, (name.offset, name.end))
        self.advance()
        if name.text not in SIGNATURES:
            raise UnknownModuleError(f"Unknown module '{name.text}'", name.offset, (name.offset, name.end))

        token = None
        if self.peek().kind == PUNCT and self.peek().text == "[":
            self.advance()
            word = self.peek()
            if word.kind != WORD:
                raise ParseError("expected bracket token", word.offset, (word.offset, word.end))
            token = self.advance().text
            self.expect_punct("]", "']'")

        self.expect_punct("(", "'('")
        children = []
        if self.peek().kind == PUNCT and self.peek().text == ")":
            close = self.advance()
        else:
            while True:
                children.append(self.parse_expr())
                nxt = self.peek()
                if nxt.kind == PUNCT and nxt.text == ",":
                    self.advance()
                    continue
                close = self.expect_punct(")", "',' or ')'")
                break
        return Expr(name.text, token, tuple(children), span=(name.offset, close.end))


def parse(text: str, require_feature: bool = True) -> Expr:
    """Parse and type-check; the root must produce a feature unless require_feature is off"""
    program = Parser(text).parse()
    check_structure(program, root=require_feature)
    return program
