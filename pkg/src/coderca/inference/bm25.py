"""BM25 selection of similar historical issues."""

from __future__ import annotations

import math
import re
from collections import Counter

from ..report import HistoricalExample, IssueReport

K1 = 1.2
B = 0.75
DEFAULT_EXAMPLES = 5

_HUMPS = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs, with camelCase humps split apart."""
    out = []
    for run in re.findall(r"[A-Za-z0-9]+", text or ""):
        out.extend(h.lower() for h in _HUMPS.findall(run))
    return out


def query_text(report: IssueReport) -> str:
    return f"{report.title}\n{report.description}"


def document_text(example: HistoricalExample) -> str:
    r = example.report
    return f"{r.title}\n{r.description}\n{' '.join(example.components)}"


class BM25Index:
    def __init__(self, documents: list[list[str]], k1: float = K1, b: float = B):
        self.k1 = k1
        self.b = b
        self.tfs = [Counter(d) for d in documents]
        self.lengths = [len(d) for d in documents]
        self.n_docs = len(documents)
        self.avgdl = sum(self.lengths) / self.n_docs if self.n_docs else 0.0
        df = Counter(t for tf in self.tfs for t in tf)
        self.idf = {t: math.log((self.n_docs - n + 0.5) / (n + 0.5) + 1.0) for t, n in df.items()}

    def score(self, query: list[str], i: int) -> float:
        tf = self.tfs[i]
        norm = self.k1 * (1.0 - self.b + self.b * self.lengths[i] / self.avgdl) if self.avgdl else self.k1
        total = 0.0
        for term in query:
            f = tf.get(term)
            if f:
                total += self.idf[term] * f * (self.k1 + 1.0) / (f + norm)
        return total

    def scores(self, query: list[str]) -> list[float]:
        return [self.score(query, i) for i in range(self.n_docs)]


def bm25_scores(query: IssueReport, corpus) -> list[tuple[HistoricalExample, float]]:
    """``(example, score)`` for every corpus entry except the query itself, best first."""
    pool = [ex for ex in corpus if ex.id != query.id]
    index = BM25Index([tokenize(document_text(ex)) for ex in pool])
    scored = list(zip(pool, index.scores(tokenize(query_text(query)))))
    scored.sort(key=lambda p: (-p[1], p[0].id))
    return scored


def bm25_rank(query: IssueReport, corpus, n: int = DEFAULT_EXAMPLES) -> list[HistoricalExample]:
    return [ex for ex, _ in bm25_scores(query, corpus)[:n]]
