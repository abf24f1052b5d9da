"""Regular-expression intent parser built from the training utterances.

Each training utterance becomes an anchored pattern over normalized text in
which every slot is a named alternation over all known values of its
entity. Built-in slots match a placeholder token (``%SNIPS_NUMBER%``) that
stands for whatever the built-in extractor found in the query, so patterns
never contain open wildcards. A second, placeholder-free variant of every
pattern is kept too: it matches the literal annotated text and is what makes
the parser exact on its own training data.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .builtin_entities import BuiltinKind, builtin_candidates, select_matches
from .dataset import SlotChunk, entity_forms, normalize_utterance
from .errors import TooManyAlternations
from .normalize import normalize
from .results import ParseResult, Slot

__all__ = ["Pattern", "PatternSet", "build_patterns", "parse_deterministic", "placeholder"]

MAX_ALTERNATIONS = 10_000
RAW, PLACEHOLDER = "raw", "placeholder"
# only the spans matter when substituting placeholders
_ANY_TIME = "2000-01-01T00:00:00+00:00"
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def placeholder(kind):
    return f"%SNIPS_{BuiltinKind(kind).short.upper()}%"


@dataclass
class Pattern:
    intent: str
    mode: str
    pieces: list  # ["lit", word] | ["slot", slot_name, entity]
    regex: str
    groups: dict  # group name -> [slot_name, entity]
    literal_weight: int

    def __post_init__(self):
        self.compiled = re.compile(self.regex)

    def to_json(self):
        return {"intent": self.intent, "mode": self.mode, "pieces": self.pieces,
                "regex": self.regex, "groups": self.groups}


class PatternSet:
    def __init__(self, patterns, alternatives, builtin_kinds):
        self.patterns = patterns
        # (mode, entity) -> list of normalized forms, in alternation order
        self.alternatives = alternatives
        self.builtin_kinds = list(builtin_kinds)

    def by_intent(self):
        out = {}
        for p in self.patterns:
            out.setdefault(p.intent, []).append(p)
        return out

    def to_json(self):
        return {
            "builtin_kinds": self.builtin_kinds,
            "alternatives": [{"mode": m, "entity": e, "forms": [" ".join(f) for f in forms]}
                             for (m, e), forms in self.alternatives.items()],
            "patterns": [p.to_json() for p in self.patterns],
        }

    @classmethod
    def from_json(cls, obj):
        alternatives = {(a["mode"], a["entity"]): [tuple(f.split(" ")) for f in a["forms"]]
                        for a in obj["alternatives"]}
        patterns = []
        for p in obj["patterns"]:
            pat = _make_pattern(p["intent"], p["mode"], p["pieces"], alternatives)
            patterns.append(pat)
        return cls(patterns, alternatives, obj["builtin_kinds"])

    def with_forms(self, entity, forms):
        """Copy with extra surface forms for a custom entity (entity injection)."""
        alternatives = dict(self.alternatives)
        for mode in (RAW, PLACEHOLDER):
            key = (mode, entity)
            if key not in alternatives:
                continue
            current = list(alternatives[key])
            extra = [f for f in forms if f not in current]
            if mode == PLACEHOLDER:
                extra += [s for s in (_substituted(f, self.builtin_kinds) for f in extra)
                          if s not in current and s not in extra]
            alternatives[key] = current + extra
        patterns = [_make_pattern(p.intent, p.mode, p.pieces, alternatives) for p in self.patterns]
        return PatternSet(patterns, alternatives, self.builtin_kinds)


def _alternation(forms):
    return "|".join(" ".join(re.escape(w) for w in form) for form in forms)


def _make_pattern(intent, mode, pieces, alternatives):
    parts, groups, used, weight = [], {}, set(), 0
    for piece in pieces:
        if piece[0] == "lit":
            parts.append(re.escape(piece[1]) if not piece[1].startswith("%SNIPS_") else piece[1])
            weight += 1
            continue
        _, slot_name, entity = piece
        name = slot_name
        if not _IDENT_RE.match(name) or name in used:
            k = len(groups)
            while f"g{k}" in used:
                k += 1
            name = f"g{k}"
        used.add(name)
        groups[name] = [slot_name, entity]
        forms = alternatives.get((mode, entity), [])
        parts.append(f"(?P<{name}>{_alternation(forms)})")
    return Pattern(intent, mode, pieces, " ".join(parts), groups, weight)


def _substituted(form, kinds):
    """Words of ``form`` with built-in matches replaced by placeholders."""
    if not kinds:
        return form
    matches = select_matches(builtin_candidates(list(form), kinds, _ANY_TIME))
    return tuple(_placeholder_words(list(form), matches)[0])


def _placeholder_words(words, matches):
    """Replace match token ranges by placeholders; returns (words, origin ranges)."""
    out, origin, i = [], [], 0
    starts = {m.token_range[0]: m for m in matches}
    while i < len(words):
        m = starts.get(i)
        if m is not None:
            out.append(placeholder(m.kind))
            origin.append(m.token_range)
            i = m.token_range[1] + 1
        else:
            out.append(words[i])
            origin.append((i, i))
            i += 1
    return out, origin


def _utterance_pieces(d, utt, mode, kinds):
    nt, chunk_ids = normalize_utterance(utt)
    words = nt.words
    matches = []
    if mode == PLACEHOLDER:
        matches = select_matches(builtin_candidates(nt, kinds, _ANY_TIME))
    by_start = {m.token_range[0]: m for m in matches}
    pieces, i = [], 0
    while i < len(words):
        chunk = utt.chunks[chunk_ids[i]]
        j = i
        while j + 1 < len(words) and chunk_ids[j + 1] == chunk_ids[i]:
            j += 1
        if isinstance(chunk, SlotChunk):
            ent = d.entities[chunk.entity]
            if mode == PLACEHOLDER:
                inside = [m for m in matches if not (m.token_range[1] < i or m.token_range[0] > j)]
                if ent.is_builtin:
                    if len(inside) != 1 or inside[0].token_range != (i, j) \
                            or inside[0].kind != ent.kind:
                        return None
                elif inside:
                    return None
            pieces.append(["slot", chunk.slot_name, chunk.entity])
            i = j + 1
            continue
        while i <= j:
            m = by_start.get(i)
            if m is not None:
                if m.token_range[1] > j:
                    return None
                pieces.append(["lit", placeholder(m.kind)])
                i = m.token_range[1] + 1
            else:
                if any(m.token_range[0] < i <= m.token_range[1] for m in matches):
                    return None
                pieces.append(["lit", words[i]])
                i += 1
    return pieces


def build_patterns(d):
    """Compile one raw pattern per utterance, plus a placeholder variant when
    the utterance has built-in slots. Duplicates are dropped."""
    kinds = d.builtin_kinds
    alternatives = {}
    for name, ent in d.entities.items():
        forms = entity_forms(d, name)
        if len(forms) > MAX_ALTERNATIONS:
            raise TooManyAlternations(f"entity {name!r} has {len(forms)} values "
                                      f"(limit {MAX_ALTERNATIONS})")
        alternatives[(RAW, name)] = forms
        if not ent.is_builtin:
            extra = []
            for f in forms:
                s = _substituted(f, kinds)
                if s != f and s not in forms and s not in extra:
                    extra.append(s)
            alternatives[(PLACEHOLDER, name)] = forms + extra
        else:
            alternatives[(PLACEHOLDER, name)] = [(placeholder(ent.kind),)]

    patterns, seen = [], set()
    for intent, utt in d.utterances():
        modes = [RAW]
        if any(d.entities[c.entity].is_builtin for c in utt.slot_chunks):
            modes.append(PLACEHOLDER)
        for mode in modes:
            pieces = _utterance_pieces(d, utt, mode, kinds)
            if not pieces:
                continue
            pat = _make_pattern(intent, mode, pieces, alternatives)
            key = (intent, mode, pat.regex)
            if key in seen:
                continue
            seen.add(key)
            patterns.append(pat)
    return PatternSet(patterns, alternatives, kinds)


def _char_to_token(words):
    starts, pos = {}, 0
    ends = {}
    for k, w in enumerate(words):
        starts[pos] = k
        ends[pos + len(w)] = k
        pos += len(w) + 1
    return starts, ends


def parse_deterministic(ps, query, ref=_ANY_TIME, nt=None, candidates=None):
    """Exact-match parse; ``None`` unless exactly one intent matches.

    Slot spans refer to ``query`` (after NFC normalization). Built-in slot
    values are left unresolved; the engine resolves them.
    """
    if nt is None:
        nt = normalize(query)
    words = nt.words
    if not words:
        return None
    texts = {RAW: (words, [(i, i) for i in range(len(words))])}
    if ps.builtin_kinds:
        if candidates is None:
            candidates = builtin_candidates(nt, ps.builtin_kinds, ref)
        matches = select_matches(candidates, ps.builtin_kinds)
        texts[PLACEHOLDER] = _placeholder_words(words, matches)

    best = {}
    for mode, (seq, origin) in texts.items():
        text = " ".join(seq)
        starts, ends = _char_to_token(seq)
        for pat in ps.patterns:
            if pat.mode != mode:
                continue
            m = pat.compiled.fullmatch(text)
            if m is None:
                continue
            prev = best.get(pat.intent)
            if prev is not None and prev[0].literal_weight >= pat.literal_weight:
                continue
            slots = []
            for gname, (slot_name, entity) in pat.groups.items():
                s, e = m.span(gname)
                first, last = origin[starts[s]][0], origin[ends[e]][1]
                span = nt.span_of(first, last)
                slots.append(Slot(slot_name, entity, span, nt.original[span[0]:span[1]],
                                  (first, last)))
            slots.sort(key=lambda sl: sl.span)
            best[pat.intent] = (pat, slots)
    if len(best) != 1:
        return None
    intent, (_, slots) = next(iter(best.items()))
    return ParseResult(nt.original, intent, 1.0, tuple(slots))
