from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from slvideo.annotations import (
    Annotation,
    AnnotationStore,
    Origin,
    TierRole,
    TierRoleConfig,
    VideoRecord,
    parse_eaf,
    read_parsed_json,
    write_parsed_json,
)
from slvideo.errors import (
    ConcurrentEditConflict,
    DanglingReference,
    EmptyGloss,
    EmptyQuery,
    InvalidInterval,
    MalformedEaf,
    UnknownVideo,
    UnresolvedTimeSlot,
)
from slvideo.textnorm import normalize

from conftest import read_eaf


def make_store(tmp_path: Path, tier_config: TierRoleConfig) -> AnnotationStore:
    store = AnnotationStore(overlay_path=tmp_path / "overlay.json")
    for name, video_id, duration in [
        ("wolf.eaf", "wolf", 5000),
        ("multi_tier.eaf", "story", 10000),
    ]:
        anns = parse_eaf(read_eaf(name), video_id, tier_config)
        store.add_video(
            VideoRecord(video_id, None, fps=25.0, duration_ms=duration), anns
        )
    return store


class TestParseEaf:
    def test_wolf_fixture(self, tier_config):
        # expected values read by hand from tests/data/eaf/wolf.eaf
        anns = parse_eaf(read_eaf("wolf.eaf"), "wolf", tier_config)
        assert len(anns) == 1
        a = anns[0]
        assert a.annotation_id == "a7"
        assert a.gloss == "Lobo"
        assert a.start_ms == 1000
        assert a.end_ms == 2500
        assert a.tier_role is TierRole.FACIAL_EXPRESSION
        assert a.revision == 0
        assert a.origin is Origin.PARSED

    def test_zero_tiers(self, tier_config):
        raw = b"""<?xml version="1.0"?><ANNOTATION_DOCUMENT><TIME_ORDER/></ANNOTATION_DOCUMENT>"""
        assert parse_eaf(raw, "empty", tier_config) == []

    def test_multi_tier_roles_and_sorting(self, tier_config):
        anns = parse_eaf(read_eaf("multi_tier.eaf"), "story", tier_config)
        # r1 is a REF_ANNOTATION and must be skipped
        assert [a.annotation_id for a in anns] == ["a1", "a2", "a3", "m1", "t1"]
        roles = {a.annotation_id: a.tier_role for a in anns}
        assert roles["a1"] is TierRole.FACIAL_EXPRESSION
        assert roles["m1"] is TierRole.MANUAL_GLOSS
        assert roles["t1"] is TierRole.TRANSLATION
        assert [a.gloss for a in anns if a.tier_role is TierRole.FACIAL_EXPRESSION] == [
            "Dúvida", "Então", "Não",
        ]

    def test_dangling_reference(self, tier_config):
        with pytest.raises(DanglingReference):
            parse_eaf(read_eaf("dangling.eaf"), "v1", tier_config)

    def test_unresolved_time_slot(self, tier_config):
        with pytest.raises(UnresolvedTimeSlot):
            parse_eaf(read_eaf("unresolved.eaf"), "v1", tier_config)

    def test_malformed_xml(self, tier_config):
        with pytest.raises(MalformedEaf):
            parse_eaf(b"<ANNOTATION_DOCUMENT><broken", "v1", tier_config)

    def test_wrong_root(self, tier_config):
        with pytest.raises(MalformedEaf):
            parse_eaf(b"<NOT_AN_EAF/>", "v1", tier_config)

    def test_order_independence(self, tier_config):
        """Shuffling tier order in the XML does not change parse output."""
        raw = read_eaf("multi_tier.eaf").decode("utf-8")
        # crude but effective: swap the two glossing tiers wholesale
        head, tier1, rest = raw.partition('<TIER TIER_ID="GLOSA_EXP_FACIAL">')
        body1, tier2, tail = rest.partition('<TIER TIER_ID="GLOSA_MANUAL_D">')
        reordered = head + tier2 + tail.replace("</ANNOTATION_DOCUMENT>", "") \
            + tier1 + body1 + "</ANNOTATION_DOCUMENT>"
        original = parse_eaf(raw.encode(), "story", tier_config)
        shuffled = parse_eaf(reordered.encode(), "story", tier_config)
        assert original == shuffled


class TestTierRoleConfig:
    def test_fallback_is_other(self, tier_config):
        assert tier_config.resolve("SOMETHING_ELSE") is TierRole.OTHER

    def test_requires_exactly_one_facial_pattern(self):
        with pytest.raises(MalformedEaf):
            TierRoleConfig.from_json_bytes(json.dumps({
                "tier_patterns": [
                    {"pattern": "A*", "role": "FacialExpression"},
                    {"pattern": "B*", "role": "FacialExpression"},
                ]
            }).encode())
        with pytest.raises(MalformedEaf):
            TierRoleConfig.from_json_bytes(b'{"tier_patterns": []}')


class TestParsedJson:
    def test_empty_annotation_list(self):
        video = VideoRecord("v1", None, 25.0, 1000)
        payload = json.loads(write_parsed_json([], video))
        assert payload["annotations"] == []
        assert payload["video_id"] == "v1"

    def test_fixture_serialization(self, tier_config):
        anns = parse_eaf(read_eaf("wolf.eaf"), "wolf", tier_config)
        video = VideoRecord("wolf", None, 25.0, 5000)
        raw = write_parsed_json(anns, video)
        text = raw.decode("utf-8")
        assert '"gloss": "Lobo"' in text
        assert '"start_ms": 1000' in text

    def test_determinism(self, tier_config):
        anns = parse_eaf(read_eaf("multi_tier.eaf"), "story", tier_config)
        video = VideoRecord("story", None, 25.0, 10000)
        assert write_parsed_json(anns, video) == write_parsed_json(anns, video)

    def test_round_trip(self, tier_config):
        anns = parse_eaf(read_eaf("multi_tier.eaf"), "story", tier_config)
        video = VideoRecord("story", None, 25.0, 10000)
        video2, anns2 = read_parsed_json(write_parsed_json(anns, video))
        assert anns2 == anns
        assert video2.fps == video.fps
        assert video2.duration_ms == video.duration_ms

    def test_rejects_foreign_annotations(self, tier_config):
        anns = parse_eaf(read_eaf("wolf.eaf"), "wolf", tier_config)
        with pytest.raises(UnknownVideo):
            write_parsed_json(anns, VideoRecord("other", None, 25.0, 5000))


class TestUpsert:
    def test_create(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        ann = Annotation("new1", "wolf", "GLOSA_EXP_FACIAL", TierRole.FACIAL_EXPRESSION,
                         "Grande", 3000, 3500)
        stored = store.upsert_annotation(ann)
        assert stored.revision == 0
        assert stored.origin is Origin.USER_CREATED

    def test_edit_increments_revision(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        edited = store.upsert_annotation(Annotation(
            "a7", "wolf", "GLOSA_EXP_FACIAL", TierRole.FACIAL_EXPRESSION,
            "Lobo Mau", 1000, 2600, revision=0))
        assert edited.revision == 1
        assert edited.origin is Origin.USER_EDITED
        assert store.get_annotation("wolf", "a7").gloss == "Lobo Mau"

    def test_stale_revision_conflict(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        store.upsert_annotation(Annotation(
            "a7", "wolf", "GLOSA_EXP_FACIAL", TierRole.FACIAL_EXPRESSION,
            "Lobo Mau", 1000, 2600, revision=0))
        with pytest.raises(ConcurrentEditConflict) as exc:
            store.upsert_annotation(Annotation(
                "a7", "wolf", "GLOSA_EXP_FACIAL", TierRole.FACIAL_EXPRESSION,
                "Lobo Feroz", 1000, 2600, revision=0))
        assert exc.value.current_revision == 1

    def test_invalid_interval(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        with pytest.raises(InvalidInterval):
            store.upsert_annotation(Annotation(
                "x", "wolf", "T", TierRole.OTHER, "g", 500, 500))

    def test_empty_gloss(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        with pytest.raises(EmptyGloss):
            store.upsert_annotation(Annotation(
                "x", "wolf", "T", TierRole.OTHER, "   ", 500, 600))

    def test_unknown_video(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        with pytest.raises(UnknownVideo):
            store.upsert_annotation(Annotation(
                "x", "nope", "T", TierRole.OTHER, "g", 500, 600))

    def test_monotone_revisions(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        ann = Annotation("seq", "wolf", "GLOSA_EXP_FACIAL",
                         TierRole.FACIAL_EXPRESSION, "Muito", 100, 200)
        stored = store.upsert_annotation(ann)
        for k in range(1, 5):
            stored = store.upsert_annotation(stored)
            assert stored.revision == k

    def test_overlay_persisted_and_reloadable(self, tmp_path, tier_config):
        corpus = tmp_path / "corpus"
        (corpus / "annotations").mkdir(parents=True)
        anns = parse_eaf(read_eaf("wolf.eaf"), "wolf", tier_config)
        video = VideoRecord("wolf", None, 25.0, 5000)
        (corpus / "annotations" / "wolf.json").write_bytes(write_parsed_json(anns, video))

        store = AnnotationStore.load(corpus)
        store.upsert_annotation(Annotation(
            "a7", "wolf", "GLOSA_EXP_FACIAL", TierRole.FACIAL_EXPRESSION,
            "Lobo Mau", 1000, 2600, revision=0))
        assert (corpus / "overlay.json").exists()

        reloaded = AnnotationStore.load(corpus)
        again = reloaded.get_annotation("wolf", "a7")
        assert again.gloss == "Lobo Mau"
        assert again.revision == 1
        assert again.origin is Origin.USER_EDITED

    def test_mark_deleted_round_trip(self, tmp_path, tier_config):
        corpus = tmp_path / "corpus"
        (corpus / "annotations").mkdir(parents=True)
        anns = parse_eaf(read_eaf("wolf.eaf"), "wolf", tier_config)
        video = VideoRecord("wolf", None, 25.0, 5000)
        (corpus / "annotations" / "wolf.json").write_bytes(write_parsed_json(anns, video))

        store = AnnotationStore.load(corpus)
        store.mark_deleted("wolf", "a7", revision=0)
        assert store.get_annotation("wolf", "a7") is None
        reloaded = AnnotationStore.load(corpus)
        assert reloaded.get_annotation("wolf", "a7") is None


class TestExportEaf:
    CANONICAL = ("annotation_id", "tier_id", "gloss", "start_ms", "end_ms")

    @staticmethod
    def canonical(anns):
        return sorted(
            tuple(getattr(a, f) for f in TestExportEaf.CANONICAL) for a in anns
        )

    def test_round_trip_fixpoint(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        for video_id in ("wolf", "story"):
            exported = store.export_eaf(video_id)
            reparsed = parse_eaf(exported, video_id, tier_config)
            assert self.canonical(reparsed) == self.canonical(
                store.annotations_for(video_id)
            )

    def test_round_trip_includes_edits(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        store.upsert_annotation(Annotation(
            "extra", "wolf", "GLOSA_EXP_FACIAL", TierRole.FACIAL_EXPRESSION,
            "Correr", 3000, 4000))
        reparsed = parse_eaf(store.export_eaf("wolf"), "wolf", tier_config)
        assert self.canonical(reparsed) == self.canonical(store.annotations_for("wolf"))
        assert len(reparsed) == 2

    def test_count_preserved_without_edits(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        reparsed = parse_eaf(store.export_eaf("story"), "story", tier_config)
        assert len(reparsed) == len(store.annotations_for("story"))

    def test_unknown_video(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        with pytest.raises(UnknownVideo):
            store.export_eaf("missing")


class TestPlainTextLookup:
    def test_casefold_match(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        hits = store.plain_text_lookup("lobo")
        # gloss "Lobo" matches exactly; the story translation contains "lobo"
        assert [a.annotation_id for a in hits] == ["t1", "a7"]

    def test_diacritic_strip(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        hits = store.plain_text_lookup("duvida")
        assert "a1" in [a.annotation_id for a in hits]

    def test_translation_substring(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        hits = store.plain_text_lookup("uma dúvida")
        assert "t1" in [a.annotation_id for a in hits]

    def test_gloss_requires_exact_match(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        # "enta" is a substring of gloss "Então" but gloss tiers need equality
        hits = store.plain_text_lookup("enta")
        assert [a.annotation_id for a in hits] == []

    def test_no_match(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        assert store.plain_text_lookup("zzz") == []

    def test_empty_query(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        with pytest.raises(EmptyQuery):
            store.plain_text_lookup("   ")

    def test_sorted_by_video_then_start(self, tmp_path, tier_config):
        store = make_store(tmp_path, tier_config)
        store.upsert_annotation(Annotation(
            "dup1", "story", "GLOSA_EXP_FACIAL", TierRole.FACIAL_EXPRESSION,
            "Lobo", 5000, 6000))
        hits = store.plain_text_lookup("Lobo")
        keys = [(a.video_id, a.start_ms) for a in hits]
        assert keys == sorted(keys)


class TestNormalize:
    def test_diacritics(self):
        assert normalize("Dúvida") == "duvida"
        assert normalize("NÃO") == "nao"

    @given(st.text(max_size=60))
    def test_idempotent(self, text):
        once = normalize(text)
        assert normalize(once) == once
