"""Pronoun lexicon: the closed list of markable surfaces.

The lexicon is data, not code. A default English lexicon covering all
eight categories ships with the package; deployments can replace it with
their own file. Interrogative, relative, and indefinite pronouns rarely
corefer but are kept in the list; annotators mark those No Reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

CATEGORIES = (
    "personal",
    "possessive",
    "reflexive",
    "demonstrative",
    "interrogative",
    "relative",
    "indefinite",
    "reciprocal",
)


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class PronounLexicon:
    """Maps lowercase pronoun surfaces to their category.

    Surfaces may span several words ("each other"); detection matches
    them token-bounded, longest first.
    """

    entries: dict[str, str]  # surface -> category

    def __post_init__(self) -> None:
        for surface, category in self.entries.items():
            if category not in CATEGORIES:
                raise LexiconError(f"unknown category {category!r} for {surface!r}")
            if surface != surface.lower():
                raise LexiconError(f"lexicon surface must be lowercase: {surface!r}")

    def category(self, surface: str) -> str | None:
        return self.entries.get(surface.lower())

    def __contains__(self, surface: str) -> bool:
        return surface.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def max_words(self) -> int:
        return max(len(s.split()) for s in self.entries) if self.entries else 0

    def surfaces(self, category: str | None = None) -> list[str]:
        if category is None:
            return sorted(self.entries)
        return sorted(s for s, c in self.entries.items() if c == category)

    @classmethod
    def from_mapping(cls, by_category: dict[str, list[str]]) -> "PronounLexicon":
        entries: dict[str, str] = {}
        for category, surfaces in by_category.items():
            for surface in surfaces:
                key = surface.lower()
                if key in entries:
                    raise LexiconError(f"duplicate lexicon surface: {surface!r}")
                entries[key] = category
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "PronounLexicon":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_mapping(data["entries"])


def default_lexicon() -> PronounLexicon:
    """The English lexicon shipped with the package."""
    data = json.loads(
        resources.files("groundcoref").joinpath("data/pronouns.json").read_text(encoding="utf-8")
    )
    return PronounLexicon.from_mapping(data["entries"])
