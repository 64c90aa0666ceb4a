"""Pre-tokenization of mixed text and inline LaTeX math.

Text outside ``$...$`` is split on whitespace and kept verbatim. Inside
math, every command, symbol, letter, digit and grouping brace becomes one
math token rendered as ``<name>``, with commands canonicalized through a
synonym table (``\\dfrac`` and ``\\frac`` both become ``<frac>``).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from importlib import resources
from os import PathLike
from typing import Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

IGNORE = "_ignore"


class TokenKind(enum.Enum):
    WORD = "word"
    MATH = "math"


@dataclass(frozen=True)
class MathToken:
    kind: TokenKind
    surface: str

    def __post_init__(self):
        if not self.surface:
            raise ValueError("empty token surface")
        if self.kind is TokenKind.MATH and not (
                len(self.surface) > 2 and self.surface[0] == "<"
                and self.surface[-1] == ">"):
            raise ValueError(f"math token must be wrapped as <...>: {self.surface!r}")

    def __str__(self):
        return self.surface


TokenSequence = tuple  # tuple[MathToken, ...]


def word(surface: str) -> MathToken:
    return MathToken(TokenKind.WORD, surface)


def math(name: str) -> MathToken:
    return MathToken(TokenKind.MATH, f"<{name}>")


class SynonymTable:
    """Canonical name -> set of aliases, with reverse lookup by alias."""

    def __init__(self, entries: Mapping[str, Iterable[str]] | None = None):
        self.entries: dict[str, frozenset[str]] = {}
        self._lookup: dict[str, str] = {}
        for canonical, aliases in (entries or {}).items():
            self.add(canonical, aliases)

    def add(self, canonical: str, aliases: Iterable[str]) -> None:
        aliases = frozenset(aliases)
        for alias in aliases:
            owner = self._lookup.get(alias)
            if owner is not None and owner != canonical:
                raise ValueError(
                    f"alias {alias!r} maps to both {owner!r} and {canonical!r}")
        self.entries[canonical] = self.entries.get(canonical, frozenset()) | aliases
        for alias in aliases:
            self._lookup[alias] = canonical

    def canonical(self, alias: str) -> str | None:
        return self._lookup.get(alias)

    def __eq__(self, other):
        return isinstance(other, SynonymTable) and self.entries == other.entries

    def __repr__(self):
        return f"SynonymTable({len(self.entries)} entries)"

    @classmethod
    def parse(cls, text: str) -> SynonymTable:
        table = cls()
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            canonical, sep, rest = line.partition(":")
            canonical = canonical.strip()
            if not sep or not canonical or any(c.isspace() for c in canonical):
                raise ValueError(f"synonym table line {line_no}: expected "
                                 f"'canonical: alias ...', got {line!r}")
            table.add(canonical, rest.split())
        return table

    @classmethod
    def load(cls, path: str | PathLike) -> SynonymTable:
        with open(path, encoding="utf-8") as f:
            return cls.parse(f.read())

    @classmethod
    def default(cls) -> SynonymTable:
        text = resources.files("mathfuse").joinpath("data/synonyms.txt").read_text("utf-8")
        return cls.parse(text)


_DEFAULT_TABLE: SynonymTable | None = None


def default_table() -> SynonymTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = SynonymTable.default()
    return _DEFAULT_TABLE


def split_math(text: str, display_math: bool = False) -> list[tuple[bool, str]]:
    """Split ``text`` into (is_math, segment) pieces.

    ``$`` delimiters pair left to right; ``\\$`` is a literal dollar, and an
    unmatched opening ``$`` stays in the text. ``$$...$$`` and ``\\[...\\]``
    are recognized only with ``display_math=True``.
    """
    if display_math:
        delim = re.compile(r"(?<!\\)(\$\$|\$|\\\[|\\\])")
        closing = {"$$": "$$", "$": "$", "\\[": "\\]"}
    else:
        delim = re.compile(r"(?<!\\)\$")
        closing = {"$": "$"}

    pieces: list[tuple[bool, str]] = []
    pos = 0
    text_start = 0
    while True:
        m = delim.search(text, pos)
        if m is None:
            break
        opener = m.group(0)
        if opener not in closing:
            pos = m.end()
            continue
        close = text.find(closing[opener], m.end())
        while close != -1 and text[close - 1] == "\\" and closing[opener] == "$":
            close = text.find("$", close + 1)
        if close == -1:
            break
        pieces.append((False, text[text_start:m.start()]))
        pieces.append((True, text[m.end():close]))
        pos = text_start = close + len(closing[opener])
    pieces.append((False, text[text_start:]))
    return [(is_math, seg) for is_math, seg in pieces if seg or is_math]


_MATH_LEXEME = re.compile(r"\\[A-Za-z]+|\\.|\\$|\s+|.", re.DOTALL)


def tokenize_math(latex: str, table: SynonymTable) -> list[MathToken]:
    tokens = []
    for lexeme in _MATH_LEXEME.findall(latex):
        if lexeme.isspace():
            continue
        if lexeme == "{" or lexeme == "}":
            tokens.append(math(lexeme))
            continue
        name = table.canonical(lexeme)
        if name == IGNORE:
            continue
        if name is None:
            if lexeme == "\\":
                name = "backslash"
            elif lexeme.startswith("\\"):
                name = lexeme[1:]
            else:
                name = lexeme
        tokens.append(math(name))
    return tokens


def pretokenize(text: str, table: SynonymTable | None = None,
                display_math: bool = False) -> TokenSequence:
    if table is None:
        table = default_table()
    tokens: list[MathToken] = []
    for is_math, segment in split_math(text, display_math):
        if is_math:
            tokens.extend(tokenize_math(segment, table))
        else:
            tokens.extend(word(w) for w in segment.split())
    return tuple(tokens)


def render(tokens: Sequence[MathToken]) -> str:
    return " ".join(t.surface for t in tokens)


def surfaces(tokens: Sequence[MathToken]) -> list[str]:
    return [t.surface for t in tokens]


def vocabulary_of(corpus: Iterable[Sequence[MathToken]]) -> set[str]:
    return {t.surface for seq in corpus for t in seq if t.kind is TokenKind.MATH}


class MathPreTokenizer(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`pretokenize`.

    ``fit`` records the math vocabulary seen in the training texts;
    ``transform`` maps an iterable of strings to token sequences.
    """

    def __init__(self, synonyms_path=None, display_math=False):
        self.synonyms_path = synonyms_path
        self.display_math = display_math

    def _table(self) -> SynonymTable:
        if self.synonyms_path is None:
            return default_table()
        return SynonymTable.load(self.synonyms_path)

    def fit(self, X, y=None):
        self.table_ = self._table()
        self.vocabulary_ = vocabulary_of(self._run(X, self.table_))
        return self

    def _run(self, X, table):
        return [pretokenize(text, table, self.display_math) for text in X]

    def transform(self, X):
        table = getattr(self, "table_", None) or self._table()
        return self._run(X, table)
