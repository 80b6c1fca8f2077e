"""Longest-common-subsequence matching under a token-equivalence relation.

Distillation pairs are formed only at positions where the teacher's
prediction and the ground truth agree, where "agree" is pluggable: tokens
can be grouped into equivalence classes (the synthetic analog of treating
homophones as identical), and unlisted tokens stay in singleton classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError


@dataclass(frozen=True)
class EquivRelation:
    """Total map from token id to equivalence-class id.

    Built from class ids, so reflexivity/symmetry/transitivity hold by
    construction. The identity relation maps every token to itself.
    """

    class_ids: tuple[int, ...]

    @classmethod
    def identity(cls, vocab_size: int) -> "EquivRelation":
        return cls(tuple(range(vocab_size)))

    def class_of(self, token_id: int) -> int:
        return self.class_ids[token_id]

    def same(self, a: int, b: int) -> bool:
        return self.class_ids[a] == self.class_ids[b]


def class_equiv(classes: Sequence[Sequence[int]], vocab_size: int) -> EquivRelation:
    """Build an EquivRelation from disjoint token-id sets.

    Tokens not mentioned in any set become singleton classes.
    """
    class_ids = [-1] * vocab_size
    for cid, group in enumerate(classes):
        for tok in group:
            if not 0 <= tok < vocab_size:
                raise ConfigError(f"token id {tok} outside vocab of size {vocab_size}")
            if class_ids[tok] != -1:
                raise ConfigError(f"token id {tok} appears in more than one class")
            class_ids[tok] = cid
    next_id = len(classes)
    for tok in range(vocab_size):
        if class_ids[tok] == -1:
            class_ids[tok] = next_id
            next_id += 1
    return EquivRelation(tuple(class_ids))


@dataclass(frozen=True)
class LcsMatch:
    """Matched index pairs: pred_idx[m] into the prediction, truth_idx[m]
    into the ground truth, strictly increasing in both coordinates."""

    pred_idx: tuple[int, ...]
    truth_idx: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.pred_idx)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.pred_idx, self.truth_idx))


def lcs_match(pred: Sequence[int], truth: Sequence[int],
              equiv: EquivRelation | None = None) -> LcsMatch:
    """Maximum-length common subsequence between pred and truth under equiv.

    O(len(pred) * len(truth)) dynamic programming over suffixes, then a
    greedy front-to-back walk. Among maximal solutions the walk prefers
    matching the earliest prediction index first (and, for that index, the
    earliest truth index), so the returned pred indices are the
    lexicographically smallest among all optimal solutions.
    """
    same = equiv.same if equiv is not None else (lambda a, b: a == b)
    n_p, n_t = len(pred), len(truth)
    # dp[i][j] = LCS length of pred[i:] vs truth[j:]
    dp = [[0] * (n_t + 1) for _ in range(n_p + 1)]
    for i in range(n_p - 1, -1, -1):
        row_i, row_n = dp[i], dp[i + 1]
        p_i = pred[i]
        for j in range(n_t - 1, -1, -1):
            best = row_n[j] if row_n[j] >= row_i[j + 1] else row_i[j + 1]
            if same(p_i, truth[j]) and row_n[j + 1] + 1 > best:
                best = row_n[j + 1] + 1
            row_i[j] = best

    pred_idx: list[int] = []
    truth_idx: list[int] = []
    i = j = 0
    while i < n_p and j < n_t and dp[i][j] > 0:
        if same(pred[i], truth[j]) and dp[i + 1][j + 1] + 1 == dp[i][j]:
            pred_idx.append(i)
            truth_idx.append(j)
            i += 1
            j += 1
        elif dp[i][j + 1] == dp[i][j]:
            j += 1  # keep pred[i] available for a later truth position
        else:
            i += 1
    return LcsMatch(tuple(pred_idx), tuple(truth_idx))
