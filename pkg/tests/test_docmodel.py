import xml.etree.ElementTree as ET
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screenlens.docmodel import (
    FIELD_ORDER,
    DuplicateId,
    InvalidSubject,
    SchemaError,
    ScreenshotDocument,
    TimestampError,
    batch_to_xml,
    from_xml,
    link_timeline,
    make_id,
    to_xml,
)

UTC = timezone.utc


def doc(doc_id="s01_20170302T140509", **kw):
    defaults = dict(
        id=doc_id,
        timestamp=datetime(2017, 3, 2, 14, 5, 9, tzinfo=UTC),
        category=None,
        text="",
    )
    defaults.update(kw)
    return ScreenshotDocument(**defaults)


safe_text = st.text(
    alphabet=st.characters(
        blacklist_categories=("Cs",),
        blacklist_characters="".join(
            chr(c) for c in range(0x20) if chr(c) not in "\t\n"
        ),
    ),
    max_size=60,
)


class TestMakeId:
    def test_format(self):
        assert make_id("s01", datetime(2017, 3, 2, 14, 5, 9, tzinfo=UTC)) == "s01_20170302T140509"

    def test_empty_subject_rejected(self):
        with pytest.raises(InvalidSubject):
            make_id("", datetime.now(UTC))

    def test_underscore_subject_rejected(self):
        with pytest.raises(InvalidSubject):
            make_id("a_b", datetime.now(UTC))

    def test_injective_at_second_resolution(self):
        base = datetime(2020, 1, 1, tzinfo=UTC)
        ids = {make_id("s1", base + timedelta(seconds=k)) for k in range(100)}
        assert len(ids) == 100

    def test_naive_datetime_treated_as_utc(self):
        assert make_id("s1", datetime(2020, 1, 1)) == "s1_20200101T000000"


class TestToXml:
    def test_six_fields_in_schema_order(self):
        root = ET.fromstring(to_xml(doc()).encode())
        assert root.tag == "add"
        (doc_el,) = list(root)
        assert doc_el.tag == "doc"
        assert [f.get("name") for f in doc_el] == list(FIELD_ORDER)
        assert all(f.tag == "field" for f in doc_el)

    def test_escaping_round_trips(self):
        d = doc(text="a < b & c > d \"quoted\" 'single'")
        (back,) = from_xml(to_xml(d))
        assert back.text == d.text

    def test_absent_category_is_empty_element(self):
        root = ET.fromstring(to_xml(doc(category=None)).encode())
        cat = root.find("./doc/field[@name='category']")
        assert cat is not None and (cat.text or "") == ""

    def test_timestamp_wire_format(self):
        root = ET.fromstring(to_xml(doc()).encode())
        ts = root.find("./doc/field[@name='timestamp']")
        assert ts.text == "2017-03-02T14:05:09Z"

    def test_image_path_not_serialized(self):
        xml = to_xml(doc(image_path="/data/x.png"))
        assert "image_path" not in xml and "/data/x.png" not in xml

    def test_control_characters_rejected(self):
        with pytest.raises(ValueError):
            to_xml(doc(text="bad\x01char"))
        with pytest.raises(ValueError):
            to_xml(doc(text="bad\rchar"))


class TestFromXml:
    def test_round_trip(self):
        d = doc(category="web", text="hello\nworld", previous_image="p", next_image="n")
        assert from_xml(to_xml(d)) == [d]

    def test_accepts_bytes(self):
        d = doc()
        assert from_xml(to_xml(d).encode("utf-8")) == [d]

    def test_missing_id_field(self):
        xml = "<add><doc><field name='timestamp'>2017-03-02T14:05:09Z</field></doc></add>"
        with pytest.raises(SchemaError, match="id"):
            from_xml(xml)

    def test_two_docs(self):
        docs = [doc("s01_20170302T140509"), doc("s01_20170302T140514")]
        assert from_xml(batch_to_xml(docs)) == docs

    def test_wrong_root(self):
        with pytest.raises(SchemaError, match="add"):
            from_xml("<docs></docs>")

    def test_unknown_field_named(self):
        xml = (
            "<add><doc><field name='id'>s_20170302T140509</field>"
            "<field name='bogus'>x</field></doc></add>"
        )
        with pytest.raises(SchemaError, match="bogus"):
            from_xml(xml)

    def test_bad_timestamp_carries_raw_value(self):
        xml = (
            "<add><doc><field name='id'>s_20170302T140509</field>"
            "<field name='timestamp'>yesterday</field></doc></add>"
        )
        with pytest.raises(TimestampError, match="yesterday"):
            from_xml(xml)

    def test_empty_timestamp_falls_back_to_id(self):
        xml = (
            "<add><doc><field name='id'>s_20170302T140509</field>"
            "<field name='timestamp'></field></doc></add>"
        )
        (d,) = from_xml(xml)
        assert d.timestamp == datetime(2017, 3, 2, 14, 5, 9, tzinfo=UTC)

    def test_compact_timestamp_accepted(self):
        xml = (
            "<add><doc><field name='id'>s_20170302T140509</field>"
            "<field name='timestamp'>20170302T140509</field></doc></add>"
        )
        (d,) = from_xml(xml)
        assert d.timestamp == datetime(2017, 3, 2, 14, 5, 9, tzinfo=UTC)

    def test_not_xml(self):
        with pytest.raises(SchemaError):
            from_xml("this is not xml")

    @given(safe_text, st.booleans(), safe_text)
    @settings(max_examples=150, deadline=None)
    def test_round_trip_hostile_text(self, text, with_category, category):
        d = doc(text=text, category=(category or None) if with_category else None)
        assert from_xml(to_xml(d)) == [d]


class TestLinkTimeline:
    def ts(self, seconds):
        return datetime(2020, 5, 1, 10, 0, 0, tzinfo=UTC) + timedelta(seconds=seconds)

    def make(self, subject, seconds, **kw):
        return doc(make_id(subject, self.ts(seconds)), timestamp=self.ts(seconds), **kw)

    def test_single_doc_has_no_links(self):
        (out,) = link_timeline([self.make("a", 0)])
        assert out.previous_image is None and out.next_image is None

    def test_three_docs_middle_links_both_ways(self):
        docs = [self.make("a", s, image_path=f"/img/{s}.png") for s in (0, 5, 10)]
        out = link_timeline(docs)
        assert out[1].previous_image == "/img/0.png"
        assert out[1].next_image == "/img/10.png"
        assert out[0].previous_image is None
        assert out[2].next_image is None

    def test_links_fall_back_to_ids_without_image_paths(self):
        docs = [self.make("a", s) for s in (0, 5)]
        out = link_timeline(docs)
        assert out[0].next_image == docs[1].id

    def test_subjects_never_cross(self):
        import random

        rng = random.Random(13)
        docs = []
        for subject in ("a", "b", "c"):
            for s in rng.sample(range(0, 600, 5), 12):
                docs.append(self.make(subject, s))
        rng.shuffle(docs)
        out = link_timeline(docs)
        by_id = {d.id: d for d in out}
        for subject in ("a", "b", "c"):
            chain = sorted(
                (d for d in out if d.id.startswith(subject + "_")),
                key=lambda d: d.timestamp,
            )
            # oracle: a per-subject sorted walk
            for i, d in enumerate(chain):
                want_prev = chain[i - 1].id if i > 0 else None
                want_next = chain[i + 1].id if i + 1 < len(chain) else None
                assert d.previous_image == want_prev
                assert d.next_image == want_next
                if d.previous_image:
                    assert by_id[d.previous_image].id.startswith(subject + "_")

    def test_next_chain_visits_every_doc_once(self):
        import random

        rng = random.Random(17)
        seconds = rng.sample(range(0, 1000, 5), 20)
        docs = [self.make("subj", s) for s in seconds]
        out = link_timeline(docs)
        by_id = {d.id: d for d in out}
        start = [d for d in out if d.previous_image is None]
        assert len(start) == 1
        visited = []
        cur = start[0]
        while cur is not None:
            visited.append(cur.id)
            cur = by_id[cur.next_image] if cur.next_image else None
        assert len(visited) == len(docs) and len(set(visited)) == len(docs)

    def test_duplicate_ids_rejected(self):
        d = self.make("a", 0)
        with pytest.raises(DuplicateId):
            link_timeline([d, d])

    def test_preserves_input_order(self):
        docs = [self.make("a", 10), self.make("a", 0), self.make("a", 5)]
        out = link_timeline(docs)
        assert [d.id for d in out] == [d.id for d in docs]
