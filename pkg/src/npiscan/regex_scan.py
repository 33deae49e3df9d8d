"""Rule-based character scanner.

Per-entity regex patterns (everything except PERSON and BACKGROUND) are
wrapped in prefix/suffix encapsulators that require matches to be properly
delimited. Every pattern is applied over the whole text; each matched byte
accumulates candidate entities, unmatched bytes are BACKGROUND, and ties are
split evenly by deterministic round-robin over the tied entities in canonical
label order, indexed by byte position.
"""
from __future__ import annotations

import codecs
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .labels import BACKGROUND, LABEL_DTYPE, label_id, label_name

_UNPORTABLE: dict[str, str] = {
    # Unbalanced lookbehind in the upstream body; the closing paren of the
    # intended "not preceded by a literal (" guard got swallowed by escaping.
    # See pattern_port_notes.md.
    r"(?<!\\()(?:\#\d{1,3}|\d{1,3}[\.\)\:])(?=\W|\$)":
        r"(?<!\()(?:\#\d{1,3}|\d{1,3}[\.\)\:])(?=\W|\$)",
}


class PatternError(ValueError):
    pass


@dataclass
class PatternRegistry:
    """Compiled byte-level patterns per entity plus the encapsulator pair."""

    entries: list[tuple[int, list[re.Pattern]]]
    start_guard: str
    end_guard: str

    @property
    def entity_ids(self) -> list[int]:
        return [eid for eid, _ in self.entries]

    def pattern_count(self, entity: str) -> int:
        eid = label_id(entity)
        for e, pats in self.entries:
            if e == eid:
                return len(pats)
        raise PatternError(f"no patterns for entity {entity}")


def _parse_line(line: str) -> str:
    """Return the final regex body of one pattern line."""
    raw = line.startswith("r'")
    first = line.index("'")
    last = line.rindex("'")
    if last <= first:
        raise PatternError(f"unterminated pattern line: {line!r}")
    body = line[first + 1:last]
    if not raw:
        # Plain-quoted bodies behave like host-language string literals:
        # \\ collapses, \xNN and \' materialize, unknown escapes pass through.
        body = codecs.decode(body, "unicode_escape")
    return _UNPORTABLE.get(body, body)


def _parse_pattern_file(text: str) -> tuple[dict[str, list[str]], str, str]:
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith(("'", "r'")):
            if current is None:
                raise PatternError(f"pattern before any section header: {line!r}")
            sections[current].append(_parse_line(stripped))
        else:
            current = stripped
            sections.setdefault(current, [])
    guards = sections.pop("ENCAPSULATORS", [])
    if len(guards) != 2:
        raise PatternError("ENCAPSULATORS section must hold exactly two lines")
    return sections, guards[0], guards[1]


def compile_registry(source: str | None = None) -> PatternRegistry:
    """Compile the pattern file (the bundled one when ``source`` is None).

    Patterns compile as byte-level regexes so offsets line up with byte
    labels; each body is wrapped as ``start_guard (body) end_guard`` and the
    span of the inner group is what gets labeled.
    """
    if source is None:
        text = resources.files("npiscan.data").joinpath("patterns.txt").read_text()
    else:
        with open(source, "r", encoding="utf-8") as f:
            text = f.read()
    sections, start_guard, end_guard = _parse_pattern_file(text)
    if not sections:
        raise PatternError("pattern file defines no entity sections")
    entries = []
    for entity, bodies in sections.items():
        eid = label_id(entity)
        if not bodies:
            raise PatternError(f"entity {entity} has no patterns")
        compiled = []
        for idx, body in enumerate(bodies):
            wrapped = f"{start_guard}({body}){end_guard}"
            try:
                compiled.append(re.compile(wrapped.encode("latin-1")))
            except re.error as exc:
                raise PatternError(
                    f"pattern {idx} for entity {entity} does not compile: {exc}"
                ) from exc
        entries.append((eid, compiled))
    entries.sort(key=lambda e: e[0])
    return PatternRegistry(entries=entries, start_guard=start_guard, end_guard=end_guard)


_DEFAULT_REGISTRY: PatternRegistry | None = None


def default_registry() -> PatternRegistry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        _DEFAULT_REGISTRY = compile_registry()
    return _DEFAULT_REGISTRY


def scan_candidates(text: bytes, registry: PatternRegistry | None = None) -> np.ndarray:
    """Boolean candidate matrix [n_entities, len(text)] in registry order."""
    registry = registry or default_registry()
    cand = np.zeros((len(registry.entries), len(text)), dtype=bool)
    for row, (eid, patterns) in enumerate(registry.entries):
        for pat in patterns:
            for m in pat.finditer(text):
                s, e = m.span(1)
                if e > s:
                    cand[row, s:e] = True
    return cand


def scan_chars(text: bytes, registry: PatternRegistry | None = None) -> np.ndarray:
    """Label every byte: unmatched -> BACKGROUND, ties split round-robin."""
    registry = registry or default_registry()
    cand = scan_candidates(text, registry)
    ids = np.array(registry.entity_ids, dtype=LABEL_DTYPE)
    labels = np.full(len(text), BACKGROUND, dtype=LABEL_DTYPE)
    counts = cand.sum(axis=0)
    single = counts == 1
    if single.any():
        labels[single] = ids[np.argmax(cand[:, single], axis=0)]
    for t in np.flatnonzero(counts >= 2):
        tied = ids[cand[:, t]]
        labels[t] = tied[t % len(tied)]
    return labels
