"""Seeded synthetic phishing-style corpus with matching embeddings and ground truth.

Each template has its own subject lines and core vocabulary (no word is
shared between templates); bodies mix core words with a shared pool of
filler and noise words. Embeddings are the template's unit-norm mean
direction plus isotropic Gaussian noise, so cluster structure is known.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingMatrix, save_embeddings

TEMPLATES: list[dict] = [
    {"name": "payment", "subjects": ["Payment receipt", "Payment confirmation", "Remittance advice"],
     "core": ["payment", "receipt", "acknowledge", "transfer", "remittance", "bank", "funds", "etransfer",
              "deposit", "transaction", "wire", "paid"]},
    {"name": "voicemail", "subjects": ["New voicemail", "Missed call notification", "Voice message waiting"],
     "core": ["voicemail", "voice", "mailbox", "missed", "call", "caller", "listen", "recording",
              "duration", "extension", "phone", "audio"]},
    {"name": "photo", "subjects": ["My photos", "Pictures from the weekend", "Photo album"],
     "core": ["photo", "photos", "pictures", "images", "album", "camera", "snapshot", "gallery",
              "picture", "portrait", "selfie", "photosdownload"]},
    {"name": "invoice", "subjects": ["Invoice attached", "Outstanding invoice", "Invoice due"],
     "core": ["invoice", "invoices", "billing", "due", "amount", "overdue", "outstanding", "balance",
              "settle", "net", "terms", "statement"]},
    {"name": "shipping", "subjects": ["Shipment notification", "Your parcel is on the way", "Delivery failed"],
     "core": ["shipment", "parcel", "tracking", "courier", "delivery", "package", "dispatch", "customs",
              "warehouse", "waybill", "carrier", "consignment"]},
    {"name": "password", "subjects": ["Password expiry notice", "Account verification required", "Security notice"],
     "core": ["password", "expire", "credentials", "login", "verify", "quota", "reset", "security",
              "username", "authentication", "suspended", "deactivation"]},
    {"name": "contract", "subjects": ["Signed contract", "Agreement for review", "Contract amendment"],
     "core": ["contract", "agreement", "signature", "sign", "clause", "amendment", "legal", "nda",
              "counterparty", "executed", "draft", "docusign"]},
    {"name": "meeting", "subjects": ["Meeting agenda", "Conference call invitation", "Schedule for tomorrow"],
     "core": ["meeting", "agenda", "schedule", "conference", "invite", "calendar", "attendees", "minutes",
              "zoom", "room", "participants", "reschedule"]},
    {"name": "tax", "subjects": ["Tax refund notice", "Tax return documents", "Revenue service notification"],
     "core": ["tax", "refund", "revenue", "irs", "return", "filing", "deduction", "fiscal",
              "taxpayer", "assessment", "reimbursement", "withholding"]},
    {"name": "payroll", "subjects": ["Salary adjustment", "Payroll update", "Bonus payout"],
     "core": ["salary", "payroll", "bonus", "payslip", "compensation", "employee", "wages", "raise",
              "hr", "benefits", "payout", "increment"]},
    {"name": "order", "subjects": ["Purchase order", "New order request", "Quotation request"],
     "core": ["order", "purchase", "quotation", "quote", "supplier", "specification", "quantity", "product",
              "procurement", "catalogue", "sample", "inquiry"]},
    {"name": "fax", "subjects": ["Incoming fax", "Scanned document", "Fax received"],
     "core": ["fax", "scanned", "scan", "pages", "scanner", "copier", "document", "pdf",
              "printer", "transmission", "efax", "resolution"]},
    {"name": "bank_statement", "subjects": ["Monthly financial report", "Account statement", "Financial summary"],
     "core": ["financial", "monthly", "report", "accounting", "audit", "ledger", "quarterly", "disapproval",
              "responding", "evaluation", "summary", "review"]},
    {"name": "legal_notice", "subjects": ["Court notice", "Legal action pending", "Subpoena"],
     "core": ["court", "lawsuit", "attorney", "subpoena", "hearing", "claim", "summons", "litigation",
              "judge", "complaint", "plaintiff", "case"]},
    {"name": "prize", "subjects": ["You have won", "Lottery winner", "Claim your reward"],
     "core": ["winner", "lottery", "prize", "reward", "winnings", "congratulations", "jackpot", "draw",
              "ticket", "claimant", "sweepstakes", "lucky"]},
    {"name": "cloud_share", "subjects": ["Shared folder", "File shared with you", "Access the shared file"],
     "core": ["shared", "folder", "drive", "cloud", "access", "link", "onedrive", "dropbox",
              "sharepoint", "storage", "files", "permission"]},
]

FILLER = ["please", "kindly", "hello", "thanks", "regards", "attached", "find", "see", "today", "dear",
          "sir", "madam", "soon", "below", "asap", "team", "best", "note", "urgent", "open"]
NOISE = ["weather", "river", "garden", "yellow", "window", "coffee", "music", "table", "mountain", "pencil",
         "orange", "silver", "forest", "bridge", "candle", "rabbit", "planet", "marble", "violin", "harbor",
         "meadow", "lantern", "copper", "tunnel", "velvet", "thunder", "saddle", "pepper", "ladder", "falcon"]


@dataclass
class SyntheticCorpus:
    records: list[dict]  # {"id", "subject", "body"}
    embeddings: EmbeddingMatrix
    truth: np.ndarray  # template index per document
    template_names: list[str]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"corpus": out / "corpus.jsonl", "embeddings": out / "embeddings.emb1", "truth": out / "truth.json"}
        with open(paths["corpus"], "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        save_embeddings(self.embeddings, paths["embeddings"])
        paths["truth"].write_text(json.dumps({
            "templates": self.template_names,
            "labels": {rec["id"]: int(t) for rec, t in zip(self.records, self.truth)},
        }, indent=1) + "\n", encoding="utf-8")
        return paths


def _template_seed(name: str, seed: int) -> int:
    digest = hashlib.sha256(f"{name}:{seed}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def generate_synthetic_corpus(n_templates: int = 12, docs_per_template: int = 100, seed: int = 0,
                              dim: int = 64, sigma: float = 0.15) -> SyntheticCorpus:
    if not 2 <= n_templates <= len(TEMPLATES):
        raise ValueError(f"n_templates must be in [2, {len(TEMPLATES)}]")
    templates = TEMPLATES[:n_templates]
    rng = np.random.default_rng(seed)

    means = []
    for t in templates:
        direction = np.random.default_rng(_template_seed(t["name"], seed)).standard_normal(dim)
        means.append(direction / np.linalg.norm(direction))

    records, truth, rows = [], [], []
    for ti, t in enumerate(templates):
        for j in range(docs_per_template):
            subject = t["subjects"][int(rng.integers(len(t["subjects"])))]
            n_core = int(rng.integers(12, 25))
            n_fill = int(rng.integers(4, 10))
            n_noise = int(rng.integers(2, 6))
            words = (list(rng.choice(t["core"], size=n_core))
                     + list(rng.choice(FILLER, size=n_fill))
                     + list(rng.choice(NOISE, size=n_noise)))
            order = rng.permutation(len(words))
            body = " ".join(str(words[k]) for k in order)
            records.append({"id": f"{t['name']}-{j:04d}", "subject": subject, "body": body.capitalize() + "."})
            truth.append(ti)
            rows.append(means[ti] + sigma * rng.standard_normal(dim))

    # interleave templates so corpus order carries no label information
    perm = rng.permutation(len(records))
    records = [records[i] for i in perm]
    truth = np.asarray(truth, dtype=np.int64)[perm]
    vectors = np.asarray(rows, dtype=np.float64)[perm].astype(np.float32)
    ids = [r["id"] for r in records]
    return SyntheticCorpus(records, EmbeddingMatrix(vectors, ids), truth, [t["name"] for t in templates])
