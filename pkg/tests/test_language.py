import pytest

from foldkit import language
from foldkit.errors import CategoryMismatchError, UnknownInstructionError
from foldkit.garments import (
    BOTTOM_UP,
    CATEGORY_STAGES,
    LEFT_LEG_ONTO_RIGHT,
    LEFT_SLEEVE,
    LONG_SLEEVE,
    NO_SLEEVE,
    PANTS,
    RIGHT_SLEEVE,
    SHORT_SLEEVE,
)
from foldkit.language import Lexicon, default_lexicon, paraphrase_match, parse


def test_three_stage_instruction_in_order():
    ins = parse(
        "Fold the left sleeve first, then the right sleeve, then fold the bottom up",
        SHORT_SLEEVE,
    )
    assert ins.parsed == [LEFT_SLEEVE, RIGHT_SLEEVE, BOTTOM_UP]


def test_reordered_instruction_not_in_default_library():
    ins = parse("fold bottom up, then left sleeve, then right sleeve", SHORT_SLEEVE)
    assert ins.parsed == [BOTTOM_UP, LEFT_SLEEVE, RIGHT_SLEEVE]


def test_garment_only_instruction_gives_default_sequence():
    assert parse("fold the pants", PANTS).parsed == [LEFT_LEG_ONTO_RIGHT, BOTTOM_UP]
    assert parse("fold the vest", NO_SLEEVE).parsed == [BOTTOM_UP]
    assert parse("fold the t-shirt", SHORT_SLEEVE).parsed == [
        LEFT_SLEEVE, RIGHT_SLEEVE, BOTTOM_UP,
    ]


def test_sleeve_on_pants_is_category_mismatch():
    with pytest.raises(CategoryMismatchError):
        parse("fold the sleeve", PANTS)


def test_garment_noun_mismatch():
    with pytest.raises(CategoryMismatchError):
        parse("fold the pants", SHORT_SLEEVE)


def test_unknown_instruction_lists_segments():
    with pytest.raises(UnknownInstructionError) as e:
        parse("preheat the oven, then fold the left sleeve", SHORT_SLEEVE)
    assert any("oven" in seg for seg in e.value.segments)


def test_empty_instruction():
    with pytest.raises(UnknownInstructionError):
        parse("   ", SHORT_SLEEVE)


def test_every_lexicon_description_round_trips():
    lex = default_lexicon()
    for pattern, stage in lex.entries:
        category = next(
            c for c in CATEGORY_STAGES if stage in CATEGORY_STAGES[c]
        )
        assert parse(pattern, category).parsed == [stage], pattern


def test_parse_idempotent_on_canonical_output():
    ins = parse("fold bottom up, then left sleeve, then right sleeve", LONG_SLEEVE)
    canon = language.canonical_text(ins.parsed)
    assert parse(canon, LONG_SLEEVE).parsed == ins.parsed


def test_reordering_segments_permutes_output():
    a = parse("fold the left sleeve, then fold the bottom up", SHORT_SLEEVE)
    b = parse("fold the bottom up, then fold the left sleeve", SHORT_SLEEVE)
    assert a.parsed == [LEFT_SLEEVE, BOTTOM_UP]
    assert b.parsed == [BOTTOM_UP, LEFT_SLEEVE]


# --------------------------------------------------------- paraphrase match

def test_exact_phrase_scores_one():
    m = paraphrase_match("fold the left sleeve")
    assert m.stage_id == LEFT_SLEEVE
    assert m.score == pytest.approx(1.0)
    assert m.accepted


def test_sleeve_arm_synonymy_paraphrase():
    # {tuck, left, sleeve} vs {fold, left, sleeve}: jaccard 2/4 = 0.5
    m = paraphrase_match("tuck the left arm in")
    assert m.stage_id == LEFT_SLEEVE
    assert m.score >= 0.34
    assert m.accepted


def test_unrelated_text_rejected():
    m = paraphrase_match("preheat the oven")
    assert not m.accepted


def test_paraphrase_with_synonyms_parses():
    assert parse("fold the left arm in", SHORT_SLEEVE).parsed == [LEFT_SLEEVE]
    assert parse("bring the hem up", NO_SLEEVE).parsed == [BOTTOM_UP]


# ----------------------------------------------------------------- lexicon

def test_lexicon_file_roundtrip(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("fold the left sleeve\tleft_sleeve\n# comment\n"
                    "fold the bottom up\tbottom_up\n", encoding="utf-8")
    lex = Lexicon.load(path)
    assert len(lex.entries) == 2
    assert parse("fold the bottom up", NO_SLEEVE, lexicon=lex).parsed == [BOTTOM_UP]


def test_lexicon_rejects_conflicting_pattern():
    with pytest.raises(ValueError):
        Lexicon([("fold the thing", LEFT_SLEEVE), ("fold the thing", RIGHT_SLEEVE)])


def test_lexicon_rejects_unknown_stage():
    with pytest.raises(ValueError):
        Lexicon([("fold the thing", "inside_out")])
