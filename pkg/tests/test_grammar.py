import random

import pytest

from veriworld.grammar import (
    AmbiguousParseError,
    GrammarError,
    ParseError,
    TokenizeError,
    library,
    load_template_library,
    sample_general_hypothesis,
    sample_triplet_hypothesis,
)

KINDS = ("triplet", "general", "special")


def test_section_counts_match_shipped_corpora(libs):
    counts = {env: (len(lib.pre_templates), len(lib.action_templates),
                    len(lib.post_templates), len(lib.general_templates),
                    len(lib.special_templates))
              for env, lib in libs.items()}
    assert counts["crafting"][0] == 3 and counts["crafting"][2] == 5
    assert counts["colorswitch"][0] == 3 and counts["colorswitch"][2] == 4
    assert counts == {
        "colorswitch": (3, 1, 4, 16, 8),
        "pushblock": (3, 1, 4, 16, 4),
        "crafting": (3, 2, 5, 16, 8),
        "cartpole": (3, 1, 4, 17, 8),
    }


def test_slot_domains(libs):
    assert libs["colorswitch"].slot_domains["COLOR"] == ["blue", "red", "green", "black"]
    assert libs["colorswitch"].slot_domains["ON_OFF_SWITCHSTATE"] == ["on", "off"]
    assert libs["pushblock"].slot_domains["PUSHBLOCK_POSITION"] == \
        ["left", "right", "top", "bottom"]
    assert libs["crafting"].slot_domains["CRAFTING_ITEM"] == \
        ["iron", "wood", "stick", "pickaxe", "coal"]
    assert len(libs["crafting"].slot_domains["CRAFTING_ITEM"]) == 5
    assert libs["cartpole"].slot_domains["MULTIPLIER"] == ["decreased", "increased"]


def test_corpus_self_check(any_env):
    # unique texts, exact parse/tokenize round trips, vocabulary closure
    assert library(any_env).self_check() > 0


def test_roundtrip_exhaustive(any_env):
    lib = library(any_env)
    for kind in KINDS:
        for hyp in lib.enumerate_instantiations(kind):
            form = lib.parse(hyp.text)
            assert form == hyp.form
            assert lib.detokenize(hyp.tokens) == hyp.text
            assert hyp.form.kind == kind


def test_triplet_join_is_single_space(libs):
    hyp = libs["crafting"].hypothesis(
        "triplet:0.0.4", {"LOCATION": "craftingtable", "CRAFTING_ITEM": "stick",
                          "CRAFTING_ACTION": "craft", "CREATED_ITEM": "torch"})
    assert hyp.text == ("when you are at craftingtable and you have stick "
                        "and you do craft then torch is made")


def test_empty_action_contributes_nothing(libs):
    lib = libs["colorswitch"]
    hyp = lib.hypothesis("triplet:0.0.0", {"COLOR": "green", "ON_OFF_SWITCHSTATE": "on"})
    assert hyp.text == "if the green switch is on then the door is open"
    assert "  " not in hyp.text


def test_sampling_deterministic(any_env):
    lib = library(any_env)
    a = [sample_triplet_hypothesis(lib, random.Random(11)) for _ in range(20)]
    b = [sample_triplet_hypothesis(lib, random.Random(11)) for _ in range(20)]
    assert a == b
    c = [sample_general_hypothesis(lib, random.Random(3)) for _ in range(20)]
    d = [sample_general_hypothesis(lib, random.Random(3)) for _ in range(20)]
    assert c == d


def test_sample_general_covers_both_kinds(libs):
    rng = random.Random(0)
    kinds = {sample_general_hypothesis(libs["colorswitch"], rng).form.kind
             for _ in range(200)}
    assert kinds == {"general", "special"}


def test_parse_example_pushblock(libs):
    form = libs["pushblock"].parse("open door implies pushblock left")
    assert form.template_id.startswith("general:")
    assert form.slots == {"PUSHBLOCK_POSITION": "left"}
    text = libs["pushblock"].template_text(form.template_id)
    assert text == "open door implies pushblock PUSHBLOCK_POSITION"


def test_parse_no_match(libs):
    with pytest.raises(ParseError):
        libs["colorswitch"].parse("garbage text")


def test_parse_reports_all_candidates_when_ambiguous():
    source = "\n".join([
        "[PRE]", "the VAL light", "[ACTION]", '""', "[POST]", "is VAL",
        "[GENERAL]", "the VAL light is VAL", "[SPECIAL]", "nothing here",
        "[VALUES VAL]", "red", "blue",
    ])
    lib = load_template_library("toy", source)
    with pytest.raises(AmbiguousParseError) as err:
        lib.parse("the red light is red")
    assert len(err.value.candidates) == 2


def test_tokenize_examples(libs):
    lib = libs["colorswitch"]
    ids = lib.tokenize("the door will open")
    assert len(ids) == 4
    assert lib.detokenize(ids) == "the door will open"
    assert lib.tokenize("") == ()
    with pytest.raises(TokenizeError):
        lib.tokenize("the quantum door")


def test_vocabulary_closure_and_size(libs):
    # crafting vocabulary size frozen from brute-force enumeration of the corpus
    crafting_tokens = set()
    for kind in KINDS:
        for hyp in libs["crafting"].enumerate_instantiations(kind):
            crafting_tokens.update(hyp.text.split())
    assert crafting_tokens == set(libs["crafting"].vocabulary)
    assert len(libs["crafting"].vocabulary) == 58


def test_enumeration_counts(libs):
    # colorswitch: COLOR x ON_OFF = 4 x 2 bindings for every slot-pair template
    lib = libs["colorswitch"]
    per_template = 4 * 2
    assert lib.count_instantiations("triplet") == 3 * 1 * 4 * per_template
    counted = sum(1 for _ in lib.enumerate_instantiations("triplet"))
    assert counted == lib.count_instantiations("triplet")


def test_enumeration_empty_kindless_library():
    source = "\n".join([
        "[PRE]", "a B", "[ACTION]", '""', "[POST]", "c B",
        "[GENERAL]", "g B", "[SPECIAL]", "s B", "[VALUES B]", "x",
    ])
    lib = load_template_library("toy", source)
    assert lib.count_instantiations("general") == 1


def test_loader_errors():
    with pytest.raises(GrammarError, match="malformed"):
        load_template_library("toy", "[THIS IS BAD\nx")
    with pytest.raises(GrammarError, match="no declared values"):
        load_template_library("toy", "\n".join([
            "[PRE]", "a UNKNOWN_SLOT", "[ACTION]", '""', "[POST]", "c",
            "[GENERAL]", "g", "[SPECIAL]", "s",
        ]))
    with pytest.raises(GrammarError, match="required section"):
        load_template_library("toy", "\n".join([
            "[PRE]", "a", "[ACTION]", '""', "[POST]", "c", "[GENERAL]", "g",
        ]))


def test_hypothesis_invariants(any_env):
    lib = library(any_env)
    rng = random.Random(5)
    for _ in range(50):
        hyp = sample_triplet_hypothesis(lib, rng)
        assert hyp.form.kind == "triplet"
        assert hyp.form.triplet_parts is not None
        for name, value in hyp.form.slots.items():
            assert value in lib.slot_domains[name]
