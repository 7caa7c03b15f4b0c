"""Templated hypothesis grammar.

Owns the per-environment template corpora: loading, instantiation into
surface text, tokenization against a closed vocabulary, and parsing surface
text back into (template, slot bindings).

Corpus file format (UTF-8, line oriented):
    [PRE] / [ACTION] / [POST] / [GENERAL] / [SPECIAL]   open template sections
    [VALUES <SLOT>]                                     opens a slot-value section
    blank lines are ignored; every other line is a template or a slot value.
A line consisting of exactly ``""`` denotes the empty template (environments
whose action clause is empty).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from importlib import resources
from random import Random
from typing import Iterator, Optional

ENV_IDS = ("colorswitch", "pushblock", "crafting", "cartpole")

KIND_TRIPLET = "triplet"
KIND_GENERAL = "general"
KIND_SPECIAL = "special"

TEMPLATE_SECTIONS = ("PRE", "ACTION", "POST", "GENERAL", "SPECIAL")
EMPTY_TEMPLATE = '""'

# Slot markers are uppercase-with-underscores tokens inside a template.
_SLOT_RE = re.compile(r"^[A-Z][A-Z_]*$")
_HEADER_RE = re.compile(r"^\[([A-Z_ ]+)\]$")


class GrammarError(ValueError):
    """Malformed corpus or illegal grammar operation."""


class ParseError(ValueError):
    """Surface text does not parse against the library."""


class AmbiguousParseError(ParseError):
    def __init__(self, text: str, candidates: list["SemanticForm"]):
        super().__init__(
            f"{len(candidates)} templates match {text!r}: "
            + ", ".join(c.template_id for c in candidates)
        )
        self.candidates = candidates


class TokenizeError(ValueError):
    """Token outside the library vocabulary."""


@dataclass(frozen=True)
class SemanticForm:
    """Parsed meaning of a hypothesis: which template, which slot values."""

    env_id: str
    template_id: str
    slots: dict
    kind: str
    # For kind=triplet: the (pre, action, post) component template ids.
    triplet_parts: Optional[tuple] = None

    def __post_init__(self):
        if self.kind == KIND_TRIPLET and self.triplet_parts is None:
            raise GrammarError("triplet form requires triplet_parts")


@dataclass(frozen=True)
class Hypothesis:
    """A hypothesis as the agent sees it: text, token ids, parsed form."""

    text: str
    tokens: tuple
    form: SemanticForm


def template_slots(template: str) -> list:
    """Slot markers appearing in a template, in order, without duplicates."""
    seen = []
    for tok in template.split():
        if _SLOT_RE.match(tok) and tok not in seen:
            seen.append(tok)
    return seen


def instantiate_template(template: str, binding: dict) -> str:
    if template == EMPTY_TEMPLATE:
        return ""
    out = []
    for tok in template.split():
        out.append(binding[tok] if _SLOT_RE.match(tok) else tok)
    return " ".join(out)


@dataclass
class TemplateLibrary:
    """Immutable-after-load template corpus for one environment."""

    env_id: str
    pre_templates: list
    action_templates: list
    post_templates: list
    general_templates: list
    special_templates: list
    slot_domains: dict
    vocabulary: tuple = ()
    _token_ids: dict = field(default_factory=dict, repr=False)
    _matchers: list = field(default_factory=list, repr=False)

    # -- template addressing -------------------------------------------------

    def section(self, name: str) -> list:
        return {
            "pre": self.pre_templates,
            "action": self.action_templates,
            "post": self.post_templates,
            "general": self.general_templates,
            "special": self.special_templates,
        }[name]

    def template_text(self, template_id: str) -> str:
        """Raw (uninstantiated) template string for a template id.

        Triplet ids look like ``triplet:0.1.2`` (pre.action.post indices);
        section ids look like ``general:3``.
        """
        section, _, idx = template_id.partition(":")
        if section == "triplet":
            i, j, k = (int(x) for x in idx.split("."))
            parts = [self.pre_templates[i], self.action_templates[j], self.post_templates[k]]
            return " ".join(p for p in parts if p != EMPTY_TEMPLATE)
        return self.section(section)[int(idx)]

    def triplet_ids(self) -> Iterator[str]:
        for i in range(len(self.pre_templates)):
            for j in range(len(self.action_templates)):
                for k in range(len(self.post_templates)):
                    yield f"triplet:{i}.{j}.{k}"

    def template_ids(self, kind: str) -> Iterator[str]:
        if kind == KIND_TRIPLET:
            yield from self.triplet_ids()
        elif kind == KIND_GENERAL:
            yield from (f"general:{i}" for i in range(len(self.general_templates)))
        elif kind == KIND_SPECIAL:
            yield from (f"special:{i}" for i in range(len(self.special_templates)))
        else:
            raise GrammarError(f"unknown template kind {kind!r}")

    def kind_of(self, template_id: str) -> str:
        section = template_id.partition(":")[0]
        if section == "triplet":
            return KIND_TRIPLET
        if section in ("general", "special"):
            return section
        raise GrammarError(f"template id {template_id!r} has no hypothesis kind")

    # -- instantiation / sampling --------------------------------------------

    def form(self, template_id: str, slots: dict) -> SemanticForm:
        parts = None
        if template_id.startswith("triplet:"):
            i, j, k = (int(x) for x in template_id.split(":")[1].split("."))
            parts = (f"pre:{i}", f"action:{j}", f"post:{k}")
        needed = template_slots(self.template_text(template_id))
        if sorted(slots) != sorted(needed):
            raise GrammarError(f"binding {slots} does not cover slots {needed}")
        for name, value in slots.items():
            if value not in self.slot_domains.get(name, ()):
                raise GrammarError(f"value {value!r} outside domain of {name}")
        return SemanticForm(self.env_id, template_id, dict(slots), self.kind_of(template_id), parts)

    def instantiate(self, form: SemanticForm) -> Hypothesis:
        text = instantiate_template(self.template_text(form.template_id), form.slots)
        return Hypothesis(text, self.tokenize(text), form)

    def hypothesis(self, template_id: str, slots: dict) -> Hypothesis:
        return self.instantiate(self.form(template_id, slots))

    def _fill_slots(self, template_id: str, rng: Random) -> Hypothesis:
        binding = {}
        for name in template_slots(self.template_text(template_id)):
            domain = self.slot_domains[name]
            binding[name] = domain[rng.randrange(len(domain))]
        return self.hypothesis(template_id, binding)

    def sample_triplet(self, rng: Random) -> Hypothesis:
        """Draw one pre, one action, one post template, then fill all slots."""
        if not (self.pre_templates and self.action_templates and self.post_templates):
            raise GrammarError(f"{self.env_id}: corpus has an empty triplet section")
        i = rng.randrange(len(self.pre_templates))
        j = rng.randrange(len(self.action_templates))
        k = rng.randrange(len(self.post_templates))
        return self._fill_slots(f"triplet:{i}.{j}.{k}", rng)

    def sample_general(self, rng: Random) -> Hypothesis:
        """Draw a single non-triplet template (general or special) and fill it."""
        n_gen, n_spec = len(self.general_templates), len(self.special_templates)
        if n_gen + n_spec == 0:
            raise GrammarError(f"{self.env_id}: no non-triplet templates")
        pick = rng.randrange(n_gen + n_spec)
        tid = f"general:{pick}" if pick < n_gen else f"special:{pick - n_gen}"
        return self._fill_slots(tid, rng)

    def sample_kind(self, kind: str, rng: Random) -> Hypothesis:
        if kind == KIND_TRIPLET:
            return self.sample_triplet(rng)
        if kind == "nontriplet":
            return self.sample_general(rng)
        ids = list(self.template_ids(kind))
        return self._fill_slots(ids[rng.randrange(len(ids))], rng)

    # -- enumeration -----------------------------------------------------------

    def enumerate_instantiations(self, kind: str) -> Iterator[Hypothesis]:
        """Every hypothesis of the given kind, in deterministic order."""
        for tid in self.template_ids(kind):
            names = template_slots(self.template_text(tid))
            domains = [self.slot_domains[n] for n in names]
            for values in itertools.product(*domains):
                yield self.hypothesis(tid, dict(zip(names, values)))

    def count_instantiations(self, kind: str) -> int:
        total = 0
        for tid in self.template_ids(kind):
            n = 1
            for name in template_slots(self.template_text(tid)):
                n *= len(self.slot_domains[name])
            total += n
        return total

    # -- tokenization ------------------------------------------------------------

    def tokenize(self, text: str) -> tuple:
        ids = []
        for tok in text.lower().split():
            if tok not in self._token_ids:
                raise TokenizeError(f"token {tok!r} not in {self.env_id} vocabulary")
            ids.append(self._token_ids[tok])
        return tuple(ids)

    def detokenize(self, token_ids) -> str:
        return " ".join(self.vocabulary[i] for i in token_ids)

    # -- parsing -------------------------------------------------------------------

    def parse_all(self, text: str) -> list:
        return [self.form(tid, dict(m.groupdict())) for tid, rx in self._matchers
                if (m := rx.fullmatch(text))]

    def parse(self, text: str) -> SemanticForm:
        """Unique (template, binding) whose instantiation equals text."""
        matches = self.parse_all(text)
        if not matches:
            raise ParseError(f"no {self.env_id} template matches {text!r}")
        if len(matches) > 1:
            raise AmbiguousParseError(text, matches)
        return matches[0]

    # -- validation -------------------------------------------------------------

    def self_check(self) -> int:
        """Corpus sanity sweep: unique surface texts, exact round trips,
        vocabulary closure. Returns the number of instantiations checked."""
        seen = {}
        n = 0
        for kind in (KIND_TRIPLET, KIND_GENERAL, KIND_SPECIAL):
            for hyp in self.enumerate_instantiations(kind):
                n += 1
                if hyp.text in seen and seen[hyp.text] != hyp.form:
                    raise GrammarError(
                        f"text {hyp.text!r} generated by both "
                        f"{seen[hyp.text].template_id} and {hyp.form.template_id}")
                seen[hyp.text] = hyp.form
                if self.detokenize(hyp.tokens) != hyp.text:
                    raise GrammarError(f"tokenize round trip failed for {hyp.text!r}")
                if self.parse(hyp.text) != hyp.form:
                    raise GrammarError(f"parse round trip failed for {hyp.text!r}")
        return n


def _build_matchers(lib: TemplateLibrary) -> list:
    matchers = []
    ids = itertools.chain(
        lib.triplet_ids(), lib.template_ids(KIND_GENERAL), lib.template_ids(KIND_SPECIAL))
    for tid in ids:
        pattern, seen = [], set()
        for tok in lib.template_text(tid).split():
            if _SLOT_RE.match(tok):
                if tok in seen:
                    pattern.append(f"(?P={tok})")
                else:
                    alts = "|".join(re.escape(v) for v in lib.slot_domains[tok])
                    pattern.append(f"(?P<{tok}>{alts})")
                    seen.add(tok)
            else:
                pattern.append(re.escape(tok))
        matchers.append((tid, re.compile(" ".join(pattern))))
    return matchers


def load_template_library(env_id: str, source: str) -> TemplateLibrary:
    """Parse a corpus file into a TemplateLibrary.

    Raises GrammarError on malformed section headers, on slot markers with no
    declared value domain, and on empty required sections.
    """
    sections = {name: [] for name in TEMPLATE_SECTIONS}
    domains = {}
    current = None
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("["):
            m = _HEADER_RE.match(line)
            if not m:
                raise GrammarError(f"line {lineno}: malformed section header {line!r}")
            head = m.group(1)
            if head in TEMPLATE_SECTIONS:
                current = sections[head]
            elif head.startswith("VALUES "):
                slot = head.split(None, 1)[1]
                if not _SLOT_RE.match(slot):
                    raise GrammarError(f"line {lineno}: bad slot name {slot!r}")
                current = domains.setdefault(slot, [])
            else:
                raise GrammarError(f"line {lineno}: unknown section {head!r}")
            continue
        if current is None:
            raise GrammarError(f"line {lineno}: content before any section header")
        current.append(line)

    for name in TEMPLATE_SECTIONS:
        if not sections[name]:
            raise GrammarError(f"{env_id}: required section {name} is empty")
    lib = TemplateLibrary(
        env_id=env_id,
        pre_templates=sections["PRE"],
        action_templates=sections["ACTION"],
        post_templates=sections["POST"],
        general_templates=sections["GENERAL"],
        special_templates=sections["SPECIAL"],
        slot_domains=domains,
    )
    for name in TEMPLATE_SECTIONS:
        for template in sections[name]:
            for slot in template_slots(template):
                if not domains.get(slot):
                    raise GrammarError(
                        f"{env_id}: slot {slot} used in {template!r} has no declared values")

    # Vocabulary is closed over every instantiation of every template.
    tokens = set()
    for name in TEMPLATE_SECTIONS:
        for template in sections[name]:
            if template == EMPTY_TEMPLATE:
                continue
            for tok in template.split():
                if not _SLOT_RE.match(tok):
                    tokens.add(tok.lower())
    for domain in domains.values():
        for value in domain:
            tokens.update(value.lower().split())
    lib.vocabulary = tuple(sorted(tokens))
    lib._token_ids = {tok: i for i, tok in enumerate(lib.vocabulary)}
    lib._matchers = _build_matchers(lib)
    return lib


_CACHE = {}


def library(env_id: str) -> TemplateLibrary:
    """The shipped corpus for an environment (cached)."""
    if env_id not in _CACHE:
        if env_id not in ENV_IDS:
            raise GrammarError(f"unknown environment {env_id!r}")
        source = resources.files("veriworld.data").joinpath(f"{env_id}.txt").read_text("utf-8")
        _CACHE[env_id] = load_template_library(env_id, source)
    return _CACHE[env_id]


def sample_triplet_hypothesis(lib: TemplateLibrary, rng: Random) -> Hypothesis:
    return lib.sample_triplet(rng)


def sample_general_hypothesis(lib: TemplateLibrary, rng: Random) -> Hypothesis:
    return lib.sample_general(rng)
