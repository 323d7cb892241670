import json
import string
from email.message import EmailMessage

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mailtopics.errors import EmptyDocument, UnparsableMessage
from mailtopics.ingest import (
    EmailDoc,
    IngestConfig,
    RawEmail,
    doc_from_fields,
    filter_corpus,
    load_corpus,
    parse_email,
    read_corpus_jsonl,
    sanitize_text,
    strip_html,
    write_corpus_jsonl,
)

RECEIPT_BODY = "Hello, PIease acknowledge upon receipt of my today payment. via (e-transfer) Thanks Kristen Abalos."


def make_message(subject, plain=None, html=None, attachment=None) -> bytes:
    msg = EmailMessage()
    msg["From"] = "sender@example.com"
    msg["To"] = "victim@example.com"
    msg["Subject"] = subject
    if plain is not None:
        msg.set_content(plain)
    if html is not None:
        if plain is None:
            msg.set_content(html, subtype="html")
        else:
            msg.add_alternative(html, subtype="html")
    if attachment is not None:
        msg.add_attachment(attachment, maintype="application", subtype="octet-stream", filename="a.bin")
    return msg.as_bytes()


def test_subject_is_prepended_to_body():
    doc = parse_email(RawEmail("m1", make_message("Payment receipt", RECEIPT_BODY)))
    assert doc.full_text.startswith("Payment receipt Hello, PIease acknowledge")
    assert doc.full_text == "Payment receipt " + RECEIPT_BODY
    assert doc.char_len == len(doc.full_text)


def test_empty_body_leaves_subject_only():
    doc = parse_email(RawEmail("m2", make_message("Invoice", "")))
    assert doc.full_text == "Invoice"
    assert doc.body_text == ""


def test_html_only_body_is_stripped():
    doc = parse_email(RawEmail("m3", make_message("Hi", html="<p>open <b>now</b></p>")))
    assert doc.body_text == "open now"


def test_plain_part_preferred_over_html():
    doc = parse_email(RawEmail("m4", make_message("Hi", plain="plain words", html="<p>html words</p>")))
    assert doc.body_text == "plain words"


def test_attachments_are_not_parsed():
    doc = parse_email(RawEmail("m5", make_message("Hi", plain="body", attachment=b"MZ\x90\x00payload")))
    assert doc.body_text == "body"


def test_rfc2047_subject_is_decoded():
    raw = (b"Subject: =?utf-8?b?UGFnYW1lbnRvIHJlY2liaWRv?=\r\n"
           b"Content-Type: text/plain; charset=utf-8\r\n\r\nhola\r\n")
    assert parse_email(RawEmail("m6", raw)).subject == "Pagamento recibido"


def test_script_style_and_entities_removed():
    html = "<html><style>p{color:red}</style><script>alert(1)</script><p>a &amp; b&nbsp;c</p></html>"
    text = strip_html(html)
    assert "color" not in text and "alert" not in text
    assert text.split() == ["a", "&", "b", "c"]


def test_no_text_part_is_unparsable():
    raw = (b"Subject: x\r\nMIME-Version: 1.0\r\nContent-Type: application/pdf\r\n"
           b"Content-Transfer-Encoding: base64\r\n\r\nJVBERi0=\r\n")
    with pytest.raises(UnparsableMessage):
        parse_email(RawEmail("m7", raw))


def test_empty_message_raises():
    with pytest.raises(EmptyDocument):
        parse_email(RawEmail("m8", b"Subject: \r\nContent-Type: text/plain\r\n\r\n   \r\n"))
    with pytest.raises(EmptyDocument):
        RawEmail("m9", b"")


@pytest.mark.parametrize(
    "text, expected",
    [
        ("pay now AAAA1111BBBB2222CCCC3333 thanks", "pay now thanks"),
        ("hello world", "hello world"),
        ("a   b\t\tc", "a b c"),
        ("x " + "#" * 25 + " y", "x y"),
        ("supercalifragilisticexpialidocious stays", "supercalifragilisticexpialidocious stays"),
        ("short1234 kept", "short1234 kept"),
    ],
)
def test_sanitize_examples(text, expected):
    assert sanitize_text(text) == expected


@given(st.text(alphabet=string.printable + "éü€ ", max_size=200))
@settings(max_examples=300)
def test_sanitize_idempotent(text):
    once = sanitize_text(text)
    assert sanitize_text(once) == once


@given(st.text(max_size=300))
@settings(max_examples=200)
def test_html_stripping_leaves_no_angle_brackets(markup):
    raw = make_message("s", html=f"<div>{markup}</div>")
    try:
        doc = parse_email(RawEmail("h", raw))
    except EmptyDocument:
        return
    assert "<" not in doc.body_text and ">" not in doc.body_text


def _doc(i, subject, n_chars=50):
    body = "x" * max(0, n_chars - len(subject) - 1)
    return EmailDoc.assemble(f"d{i}", subject, body)


def test_filter_rules_and_ledger():
    docs = [
        _doc(0, "Virus Alert: message blocked"),
        _doc(1, "Payment receipt", 120),
        _doc(2, "cheap SPAM here"),
        _doc(3, "Long one", 7001),
        _doc(4, "Exactly at limit", 7000),
        _doc(5, "system ALERT"),
    ]
    kept, ledger = filter_corpus(docs)
    assert [d.id for d in kept] == ["d1", "d4"]
    assert ledger.removed["subject_blocklist"] == ["d0", "d2", "d5"]
    assert ledger.removed["too_long"] == ["d3"]
    assert ledger.retained_count + sum(ledger.counts.values()) == ledger.input_count == 6


@given(st.lists(st.tuples(st.sampled_from(["virus", "hello", "Spam offer", "alerted", "ok"]),
                          st.integers(1, 8000)), max_size=30))
@settings(max_examples=100)
def test_filter_properties(specs):
    docs = [_doc(i, s, n) for i, (s, n) in enumerate(specs)]
    cfg = IngestConfig()
    kept, ledger = filter_corpus(docs, cfg)
    ids = [d.id for d in docs]
    positions = [ids.index(d.id) for d in kept]
    assert positions == sorted(positions)  # order-preserving subsequence
    assert ledger.retained_count + sum(ledger.counts.values()) == len(docs)
    for d in kept:
        assert d.char_len <= cfg.max_chars
        assert not any(w in d.subject.lower() for w in cfg.subject_blocklist)


def test_char_len_counts_unicode_scalars():
    doc = EmailDoc.assemble("u", "Zahlung", "über €")
    assert doc.char_len == len("Zahlung über €") == 14


def test_config_validation():
    with pytest.raises(ValueError):
        IngestConfig(max_chars=0)
    with pytest.raises(ValueError):
        IngestConfig(junk_run_min_len=3)


def test_load_corpus_directory(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    (raw / "a.eml").write_bytes(make_message("Payment receipt", RECEIPT_BODY))
    (raw / "b.eml").write_bytes(make_message("Spam warning", "buy"))
    (raw / "c.eml").write_bytes(b"Subject: pdf\r\nContent-Type: application/pdf\r\n\r\nxx\r\n")
    docs, ledger, failures = load_corpus(raw)
    assert [d.id for d in docs] == ["a.eml"]
    assert ledger.removed["subject_blocklist"] == ["b.eml"]
    assert failures == [{"id": "c.eml", "error": "UnparsableMessage"}]


def test_jsonl_roundtrip(tmp_path):
    src = tmp_path / "in.jsonl"
    src.write_text("\n".join(json.dumps(r) for r in [
        {"id": "1", "subject": "Invoice due", "body": "<b>pay</b> today"},
        {"id": "2", "subject": "virus found", "body": "x"},
        {"id": "3", "subject": "", "body": ""},
    ]) + "\n")
    docs, ledger, failures = load_corpus(src)
    assert [(d.id, d.full_text) for d in docs] == [("1", "Invoice due pay today")]
    assert failures == [{"id": "3", "error": "EmptyDocument"}]
    out = tmp_path / "corpus.jsonl"
    write_corpus_jsonl(docs, out)
    assert json.loads(out.read_text()) == {"id": "1", "subject": "Invoice due",
                                           "full_text": "Invoice due pay today", "char_len": 21}
    assert read_corpus_jsonl(out) == docs
    again, _, _ = load_corpus(out)
    assert again == docs


def test_doc_from_fields_matches_parse():
    a = doc_from_fields("x", "Payment receipt", RECEIPT_BODY)
    b = parse_email(RawEmail("x", make_message("Payment receipt", RECEIPT_BODY)))
    assert a == b
