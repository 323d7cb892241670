"""Parse raw email messages into sanitized text entries and filter the corpus.

Each entry is the decoded subject followed by the body text. Bodies come from
the first text/plain part, falling back to HTML with markup stripped;
attachments are never opened.
"""

from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass, field
from email import policy
from email.message import EmailMessage
from email.parser import BytesParser
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmptyDocument, UnparsableMessage

DEFAULT_BLOCKLIST = ("virus", "spam", "alert")

# Tags whose boundaries separate words when the markup is removed.
_BLOCK_TAGS = frozenset(
    "address article aside blockquote br dd div dl dt fieldset figcaption figure "
    "footer form h1 h2 h3 h4 h5 h6 header hr li main nav ol p pre section table "
    "tbody td tfoot th thead title tr ul".split()
)
_SKIP_TAGS = frozenset({"script", "style", "head", "noscript", "template"})


@dataclass(frozen=True)
class RawEmail:
    id: str
    bytes: bytes
    source_path: str = ""

    def __post_init__(self):
        if not self.bytes:
            raise EmptyDocument(f"raw message {self.id!r} has no content")


@dataclass(frozen=True)
class EmailDoc:
    id: str
    subject: str
    body_text: str
    full_text: str
    char_len: int
    language_hint: str | None = None

    @classmethod
    def assemble(cls, id: str, subject: str, body_text: str, language_hint: str | None = None) -> "EmailDoc":
        full_text = " ".join(part for part in (subject, body_text) if part)
        return cls(id, subject, body_text, full_text, len(full_text), language_hint)

    def to_record(self) -> dict:
        return {"id": self.id, "subject": self.subject, "full_text": self.full_text, "char_len": self.char_len}


@dataclass
class IngestConfig:
    subject_blocklist: list[str] = field(default_factory=lambda: list(DEFAULT_BLOCKLIST))
    max_chars: int = 7000
    junk_run_min_len: int = 20
    strip_html: bool = True

    def __post_init__(self):
        if self.max_chars <= 0:
            raise ValueError("max_chars must be positive")
        if self.junk_run_min_len < 4:
            raise ValueError("junk_run_min_len must be at least 4")
        self.subject_blocklist = [s.lower() for s in self.subject_blocklist]


@dataclass
class FilterLedger:
    """Counts (and ids) of documents removed by each filter rule."""

    input_count: int = 0
    retained_count: int = 0
    removed: dict[str, list[str]] = field(
        default_factory=lambda: {"subject_blocklist": [], "too_long": []}
    )

    @property
    def counts(self) -> dict[str, int]:
        return {reason: len(ids) for reason, ids in self.removed.items()}

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "retained_count": self.retained_count,
            "removed_counts": self.counts,
            "removed_ids": self.removed,
        }


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_startendtag(self, tag, attrs):
        if tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_data(self, data):
        if not self._skip_depth:
            self.parts.append(data)


def strip_html(markup: str) -> str:
    """Return the visible text of an HTML fragment.

    Script/style content is dropped, entities are decoded, and any angle
    bracket left over (from entities like ``&lt;`` or broken markup) is
    replaced by a space so the result never contains ``<`` or ``>``.
    """
    parser = _TextExtractor()
    parser.feed(markup)
    parser.close()
    text = html.unescape("".join(parser.parts))
    return text.replace("<", " ").replace(">", " ")


def _is_junk(token: str, min_len: int) -> bool:
    if len(token) < min_len:
        return False
    if token.isalnum():
        return any(ch.isdigit() for ch in token)
    return not any(ch.isalnum() for ch in token)


def sanitize_text(text: str, cfg: IngestConfig | None = None) -> str:
    """Drop long ID/base64-like blobs and symbol runs, then normalize whitespace."""
    min_len = (cfg or IngestConfig()).junk_run_min_len
    return " ".join(tok for tok in text.split() if not _is_junk(tok, min_len))


def _decode_part(part: EmailMessage) -> str | None:
    try:
        content = part.get_content()
    except (LookupError, UnicodeError, AssertionError):
        payload = part.get_payload(decode=True)
        if payload is None:
            return None
        content = payload.decode("utf-8", errors="replace")
    if isinstance(content, bytes):
        content = content.decode("utf-8", errors="replace")
    return content if isinstance(content, str) else None


def _text_parts(msg: EmailMessage) -> Iterator[EmailMessage]:
    for part in msg.walk():
        if part.is_multipart():
            continue
        if part.get_content_maintype() != "text":
            continue
        if part.get_content_disposition() == "attachment":
            continue
        yield part


def parse_email(raw: RawEmail, cfg: IngestConfig | None = None) -> EmailDoc:
    cfg = cfg or IngestConfig()
    msg = BytesParser(policy=policy.default).parsebytes(raw.bytes)

    try:
        subject = str(msg.get("subject", "") or "")
    except (ValueError, TypeError, IndexError):  # malformed encoded-word
        subject = str(msg.get_all("subject", [""])[0])

    plain = html_body = None
    for part in _text_parts(msg):
        subtype = part.get_content_subtype()
        if subtype == "plain" and plain is None:
            plain = _decode_part(part)
        elif subtype == "html" and html_body is None:
            html_body = _decode_part(part)
        if plain is not None:
            break

    if plain is not None:
        body = strip_html(plain) if cfg.strip_html else plain
    elif html_body is not None:
        body = strip_html(html_body) if cfg.strip_html else html_body
    else:
        raise UnparsableMessage(f"message {raw.id!r} has no decodable text part")

    subject = sanitize_text(subject, cfg)
    body = sanitize_text(body, cfg)
    if not subject and not body:
        raise EmptyDocument(f"message {raw.id!r} is empty after decoding")
    return EmailDoc.assemble(raw.id, subject, body)


def doc_from_fields(id: str, subject: str, body: str, cfg: IngestConfig | None = None) -> EmailDoc:
    """Build an entry from already-separated subject/body text (JSONL input)."""
    cfg = cfg or IngestConfig()
    if cfg.strip_html:
        body = strip_html(body)
    subject = sanitize_text(subject, cfg)
    body = sanitize_text(body, cfg)
    if not subject and not body:
        raise EmptyDocument(f"record {id!r} is empty")
    return EmailDoc.assemble(id, subject, body)


def filter_corpus(docs: Iterable[EmailDoc], cfg: IngestConfig | None = None) -> tuple[list[EmailDoc], FilterLedger]:
    cfg = cfg or IngestConfig()
    kept: list[EmailDoc] = []
    ledger = FilterLedger()
    for doc in docs:
        ledger.input_count += 1
        subject = doc.subject.lower()
        if any(word in subject for word in cfg.subject_blocklist):
            ledger.removed["subject_blocklist"].append(doc.id)
        elif doc.char_len > cfg.max_chars:
            ledger.removed["too_long"].append(doc.id)
        else:
            kept.append(doc)
    ledger.retained_count = len(kept)
    return kept, ledger


def read_raw_dir(path: str | Path) -> list[RawEmail]:
    """One message per regular file, sorted by relative path; the path is the id."""
    root = Path(path)
    out = []
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        data = p.read_bytes()
        if data:
            out.append(RawEmail(str(p.relative_to(root)), data, str(p)))
    return out


def load_corpus(path: str | Path, cfg: IngestConfig | None = None) -> tuple[list[EmailDoc], FilterLedger, list[dict]]:
    """Parse and filter a directory of messages or a JSONL file of records.

    Returns retained docs, the filter ledger, and a list of per-document
    parse failures ``{"id", "error"}``.
    """
    cfg = cfg or IngestConfig()
    path = Path(path)
    docs: list[EmailDoc] = []
    failures: list[dict] = []
    if path.is_dir():
        for raw in read_raw_dir(path):
            try:
                docs.append(parse_email(raw, cfg))
            except (UnparsableMessage, EmptyDocument) as exc:
                failures.append({"id": raw.id, "error": type(exc).__name__})
    else:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                subject = rec.get("subject") or ""
                body = rec.get("body")
                if body is None and "full_text" in rec:  # re-ingesting our own output
                    full = rec["full_text"]
                    body = full[len(subject):] if full.startswith(subject) else full
                try:
                    docs.append(doc_from_fields(str(rec["id"]), subject, body or "", cfg))
                except EmptyDocument as exc:
                    failures.append({"id": str(rec["id"]), "error": type(exc).__name__})
    kept, ledger = filter_corpus(docs, cfg)
    return kept, ledger, failures


def write_corpus_jsonl(docs: Iterable[EmailDoc], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_record(), ensure_ascii=False) + "\n")


def read_corpus_jsonl(path: str | Path) -> list[EmailDoc]:
    """Read back a corpus written by :func:`write_corpus_jsonl`."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            subject, full = rec["subject"], rec["full_text"]
            body = full[len(subject):].lstrip(" ") if full.startswith(subject) else full
            docs.append(EmailDoc(rec["id"], subject, body, full, len(full)))
    return docs
