"""Masked instruction templates: extraction from seed text and length-matched sampling.

A template is a token sequence where object noun phrases were replaced by
``__O__`` and standalone action words by ``__A__``. Noun phrases come from a
lexicon and are matched longest-first; an article directly in front of a
matched phrase is absorbed into the mask.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DataError

O_MARK = "__O__"
A_MARK = "__A__"

ARTICLES = {"a", "an", "the"}
REQUIRED_ACTIONS = {"left", "right", "forward", "around"}

# A template whose object-slot count can never be matched by a trajectory
# (at most 8 viewpoints) would always over-trigger the scarce-caption rule.
MAX_OBJECT_MASKS = 10

_TOKEN_RE = re.compile(r"\w+(?:['’-]\w+)*|[^\w\s]")
_PUNCT_ATTACH_RE = re.compile(r"\s+([.,!?;:])")


class TemplateRejected(DataError):
    """Seed instruction produced no usable template."""


@dataclass(frozen=True)
class Template:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("template token list is empty")
        if self.l < 1:
            raise ValueError("template needs at least one object mask")

    @property
    def l(self) -> int:
        return sum(1 for t in self.tokens if t == O_MARK)

    @property
    def n(self) -> int:
        return sum(1 for t in self.tokens if t == A_MARK)

    @property
    def id(self) -> str:
        digest = hashlib.sha256(" ".join(self.tokens).encode("utf-8")).hexdigest()
        return digest[:16]

    def line(self) -> str:
        """Bank-file form: tokens joined by single spaces."""
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Lexicon:
    rooms: frozenset[str]
    objects: frozenset[str]
    actions: frozenset[str]

    def __post_init__(self):
        for name, vals in (("rooms", self.rooms), ("objects", self.objects), ("actions", self.actions)):
            if not vals:
                raise ValueError(f"lexicon section {name!r} is empty")
            if any(v != v.lower() or not v.strip() for v in vals):
                raise ValueError(f"lexicon section {name!r} must be lowercase, non-blank phrases")
        missing = REQUIRED_ACTIONS - set(self.actions)
        if missing:
            raise ValueError(f"lexicon actions must include {sorted(missing)}")

    @property
    def noun_phrases(self) -> frozenset[str]:
        return self.rooms | self.objects


def tokenize(text: str) -> list[str]:
    """Whitespace split with punctuation detached as separate tokens."""
    return _TOKEN_RE.findall(text)


def extract_template(instruction: str, lexicon: Lexicon) -> Template:
    """Mask lexicon noun phrases (longest match) and standalone action words.

    Raises TemplateRejected when no object mask results; such a seed
    instruction carries nothing the filler could anchor captions to.
    """
    if not instruction.strip():
        raise TemplateRejected("empty instruction")
    tokens = tokenize(instruction)
    lowered = [t.lower() for t in tokens]

    phrases = {tuple(p.split()): None for p in lexicon.noun_phrases}
    max_len = max(len(p) for p in phrases)

    out: list[str] = []
    i = 0
    while i < len(tokens):
        matched = 0
        for span in range(min(max_len, len(tokens) - i), 0, -1):
            if tuple(lowered[i : i + span]) in phrases:
                matched = span
                break
        if matched:
            if out and out[-1].lower() in ARTICLES:
                out.pop()  # the article rides along inside the mask
            out.append(O_MARK)
            i += matched
        elif lowered[i] in lexicon.actions:
            out.append(A_MARK)
            i += 1
        else:
            out.append(tokens[i])
            i += 1

    collapsed: list[str] = []
    for tok in out:
        if tok in (O_MARK, A_MARK) and collapsed and collapsed[-1] == tok:
            continue
        collapsed.append(tok)

    if O_MARK not in collapsed:
        raise TemplateRejected(f"no object mask in {instruction!r}")
    return Template(tokens=tuple(collapsed))


def build_bank(instructions: Iterable[str], lexicon: Lexicon) -> tuple[list[Template], int]:
    """Extract templates from seed instructions; returns (bank, rejected count).

    Duplicates (same token sequence) are kept once; templates with more than
    MAX_OBJECT_MASKS object slots are rejected.
    """
    bank: list[Template] = []
    seen: set[str] = set()
    rejected = 0
    for line in instructions:
        try:
            tpl = extract_template(line, lexicon)
        except TemplateRejected:
            rejected += 1
            continue
        if tpl.l > MAX_OBJECT_MASKS:
            rejected += 1
            continue
        if tpl.id not in seen:
            seen.add(tpl.id)
            bank.append(tpl)
    return bank, rejected


def sample_template(bank: Sequence[Template], n_v: int, rng: np.random.Generator) -> Template:
    """Template whose object-slot count is closest to n_v; ties uniform via rng."""
    if not bank:
        raise DataError("template bank is empty")
    if n_v < 2:
        raise ValueError("n_v must be at least 2")
    best = min(abs(t.l - n_v) for t in bank)
    candidates = [t for t in bank if abs(t.l - n_v) == best]
    return candidates[int(rng.integers(len(candidates)))]


def save_bank(templates: Sequence[Template], sink: IO[str]) -> None:
    for tpl in templates:
        sink.write(tpl.line() + "\n")


def load_bank(source: IO[str] | str) -> list[Template]:
    text = source if isinstance(source, str) else source.read()
    bank = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            bank.append(Template(tokens=tuple(line.split())))
        except ValueError as e:
            raise DataError(f"template bank line {lineno}: {e}") from None
    return bank


def load_lexicon(source: IO[str] | str) -> Lexicon:
    """Parse the three-section lexicon file ([rooms], [objects], [actions])."""
    text = source if isinstance(source, str) else source.read()
    sections: dict[str, set[str]] = {"rooms": set(), "objects": set(), "actions": set()}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in sections:
                raise DataError(f"lexicon line {lineno}: unknown section {name!r}")
            current = name
            continue
        if current is None:
            raise DataError(f"lexicon line {lineno}: phrase before any section header")
        sections[current].add(line.lower())
    try:
        return Lexicon(
            rooms=frozenset(sections["rooms"]),
            objects=frozenset(sections["objects"]),
            actions=frozenset(sections["actions"]),
        )
    except ValueError as e:
        raise DataError(str(e)) from None


def render_tokens(tokens: Sequence[str]) -> str:
    """Join final tokens into clean instruction text.

    Single-space join, punctuation pulled against the preceding word,
    sentence starts capitalized, runs of spaces collapsed.
    """
    text = " ".join(t for t in tokens if t)
    text = _PUNCT_ATTACH_RE.sub(r"\1", text)
    text = re.sub(r" {2,}", " ", text).strip()
    chars = list(text)
    capitalize_next = True
    for idx, ch in enumerate(chars):
        if capitalize_next and ch.isalpha():
            chars[idx] = ch.upper()
            capitalize_next = False
        elif ch in ".!?":
            capitalize_next = True
    return "".join(chars)
