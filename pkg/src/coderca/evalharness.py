"""Automatic scoring of diagnoses against labeled ground truth."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import MissingGroundTruth
from .inference.prompt import Diagnosis
from .report import GroundTruth

# Deliberately empty: component names are compared after case/whitespace
# normalization only. Callers may register aliases here.
COMPONENT_ALIASES: dict[str, str] = {}

METRICS = ("exact_match", "top3", "top5", "bleu4", "rouge1_f")
RESERVED = ("meteor", "semantics")

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def normalize_component(name: str, aliases: dict[str, str] | None = None) -> str:
    key = " ".join(name.lower().split())
    table = COMPONENT_ALIASES if aliases is None else aliases
    return table.get(key, key)


def tokenize(text: str) -> list[str]:
    """Whitespace split with punctuation as separate tokens, lowercased."""
    return _TOKEN_RE.findall((text or "").lower())


def exact_match(pred: Diagnosis, gt: GroundTruth) -> int:
    predicted = {normalize_component(c) for c in pred.primary_components}
    return int(bool(predicted) and predicted == {normalize_component(c) for c in gt.components})


def top_k(pred: Diagnosis, gt: GroundTruth, k: int) -> int:
    if k < 1:
        raise ValueError("k must be at least 1")
    head = {normalize_component(c) for c in pred.ranked_components[:k]}
    return int(all(normalize_component(c) in head for c in gt.components))


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: str, reference: str) -> float:
    """Sentence BLEU, n = 1..4, uniform weights, brevity penalty.

    Orders 2..4 use add-one smoothing, (matches + 1) / (total + 1); unigram
    precision is left unsmoothed, so a candidate sharing no token with the
    reference scores 0.
    """
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        c_grams, r_grams = _ngrams(cand, n), _ngrams(ref, n)
        matches = sum(min(cnt, r_grams[g]) for g, cnt in c_grams.items())
        total = max(len(cand) - n + 1, 0)
        if n == 1:
            if matches == 0:
                return 0.0
            p = matches / total
        else:
            p = (matches + 1) / (total + 1)
        log_sum += math.log(p) / 4
    c, r = len(cand), len(ref)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return min(1.0, bp * math.exp(log_sum))


def rouge1_f(candidate: str, reference: str) -> float:
    cand, ref = Counter(tokenize(candidate)), Counter(tokenize(reference))
    if not cand or not ref:
        return 0.0
    overlap = sum((cand & ref).values())
    if overlap == 0:
        return 0.0
    p = overlap / sum(cand.values())
    r = overlap / sum(ref.values())
    return 2 * p * r / (p + r)


def score_issue(pred: Diagnosis, gt: GroundTruth) -> dict:
    row = {
        "issue_id": gt.issue_id,
        "system": gt.system,
        "exact_match": exact_match(pred, gt),
        "top3": top_k(pred, gt, 3),
        "top5": top_k(pred, gt, 5),
        "bleu4": bleu4(pred.summary, gt.summary),
        "rouge1_f": rouge1_f(pred.summary, gt.summary),
        "flagged": bool(pred.flags),
    }
    for name in RESERVED:
        row[name] = None
    return row


def _mean(rows: list[dict]) -> dict:
    return {m: sum(r[m] for r in rows) / len(rows) for m in METRICS} | {"n": len(rows)}


@dataclass
class ScoreCard:
    per_issue: list[dict]
    per_system: dict[str, dict]
    overall: dict
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "metadata": self.metadata,
            "overall": self.overall,
            "per_system": self.per_system,
            "per_issue": self.per_issue,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def table(self) -> str:
        head = ["scope", "n", *METRICS]
        rows = [[r["issue_id"], "1", *(f"{r[m]:.3f}" for m in METRICS)] for r in self.per_issue]
        rows += [[f"[{s or '-'}]", str(a["n"]), *(f"{a[m]:.3f}" for m in METRICS)] for s, a in self.per_system.items()]
        if self.overall:
            rows.append(["overall", str(self.overall["n"]), *(f"{self.overall[m]:.3f}" for m in METRICS)])
        widths = [max(len(x) for x in col) for col in zip(head, *rows)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        lines = [fmt.format(*head), fmt.format(*("-" * w for w in widths))]
        lines += [fmt.format(*r) for r in rows]
        return "\n".join(lines) + "\n"


METADATA = {
    "bleu": "sentence BLEU-4, uniform weights, brevity penalty, add-one smoothing on 2..4-grams",
    "rouge": "ROUGE-1 F1 with multiset unigram overlap",
    "tokenization": r"lowercase, \w+ runs and single punctuation characters",
    "component_normalization": "lowercase, trim, collapse whitespace",
    "reserved_metrics": list(RESERVED),
}


def evaluate_corpus(diagnoses: dict[str, Diagnosis], truths: dict[str, GroundTruth], jobs: int = 1) -> ScoreCard:
    """Score every diagnosis; rows ordered by system then issue id."""
    for issue_id in diagnoses:
        if issue_id not in truths:
            raise MissingGroundTruth(issue_id)
    ids = sorted(diagnoses, key=lambda i: (truths[i].system, i))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda i: score_issue(diagnoses[i], truths[i]), ids))
    else:
        rows = [score_issue(diagnoses[i], truths[i]) for i in ids]
    by_system: dict[str, list[dict]] = {}
    for r in rows:
        by_system.setdefault(r["system"], []).append(r)
    per_system = {s: _mean(rs) for s, rs in by_system.items()}
    overall = _mean(rows) if rows else {}
    return ScoreCard(rows, per_system, overall, dict(METADATA))
