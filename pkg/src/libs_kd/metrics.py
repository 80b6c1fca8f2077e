"""Edit-distance error rates and clipped unigram BLEU."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import exp
from typing import Iterable, Sequence

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class ErrorRateReport:
    """Counts from one optimal edit alignment of hypothesis to reference."""

    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def edits(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> float:
        if self.ref_len == 0:
            raise DomainError("error rate undefined for an empty reference")
        return self.edits / self.ref_len


def edit_distance(ref: Sequence, hyp: Sequence) -> ErrorRateReport:
    """Minimal-cost alignment with unit costs for S/D/I.

    The counts come from one optimal backtrace; where several are optimal
    the backtrace prefers substitution, then deletion, then insertion.
    """
    n_r, n_h = len(ref), len(hyp)
    dp = [[0] * (n_h + 1) for _ in range(n_r + 1)]
    for i in range(n_r + 1):
        dp[i][0] = i
    for j in range(n_h + 1):
        dp[0][j] = j
    for i in range(1, n_r + 1):
        for j in range(1, n_h + 1):
            sub = dp[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])
            dele = dp[i - 1][j] + 1
            ins = dp[i][j - 1] + 1
            dp[i][j] = min(sub, dele, ins)

    subs = dels = inss = 0
    i, j = n_r, n_h
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            inss += 1
            j -= 1
    return ErrorRateReport(subs, dels, inss, n_r)


def error_rate(ref: str, hyp: str, unit: str = "char") -> float:
    """Character or word error rate between two strings."""
    if unit == "char":
        return edit_distance(list(ref), list(hyp)).rate
    if unit == "word":
        return edit_distance(ref.split(), hyp.split()).rate
    raise ConfigError(f"unit must be 'char' or 'word', got {unit!r}")


def corpus_error_rate(pairs: Iterable[tuple[Sequence, Sequence]]) -> float:
    """Micro-averaged error rate: total edits over total reference length."""
    edits = 0
    ref_len = 0
    for ref, hyp in pairs:
        report = edit_distance(ref, hyp)
        edits += report.edits
        ref_len += report.ref_len
    if ref_len == 0:
        raise DomainError("corpus error rate undefined: empty references")
    return edits / ref_len


def bleu_unigram(ref: Sequence, hyp: Sequence) -> float:
    """Clipped unigram precision times the brevity penalty; empty hyp -> 0."""
    if len(hyp) == 0:
        return 0.0
    ref_counts = Counter(ref)
    hyp_counts = Counter(hyp)
    clipped = sum(min(c, ref_counts[tok]) for tok, c in hyp_counts.items())
    precision = clipped / len(hyp)
    brevity = exp(min(0.0, 1.0 - len(ref) / len(hyp)))
    return precision * brevity
