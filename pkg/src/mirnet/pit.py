"""Permutation-invariant identity loss and exhaustive assignment.

With N output slots and N reference labels the loss is the minimum, over all
N! slot-to-label bijections, of the summed cross-entropies.  The minimum is a
hard selection: gradients flow only through the winning assignment.  N is
capped at 8, which keeps exhaustive enumeration exact and cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import numerics as nx

MAX_SLOTS = 8


@dataclass
class PermutationAssignment:
    mapping: tuple[int, ...]       # slot i is scored against labels[mapping[i]]
    loss: nx.Tensor                # scalar node for the winning assignment
    all_losses: tuple[float, ...]  # one total per permutation, lexicographic order


def pit_loss(logits, labels) -> PermutationAssignment:
    """Minimum summed cross-entropy over all slot/label assignments.

    `logits` is a sequence of N 1-D tensors, `labels` a sequence of N distinct
    class indices.  Ties pick the lexicographically smallest permutation.
    """
    logits = list(logits)
    labels = [int(l) for l in labels]
    n = len(logits)
    if n == 0:
        raise ValueError("pit_loss needs at least one slot")
    if n > MAX_SLOTS:
        raise ValueError(f"pit_loss enumerates permutations exhaustively; "
                         f"{n} slots exceeds the cap of {MAX_SLOTS}")
    if len(labels) != n:
        raise ValueError(f"{n} logit slots but {len(labels)} labels")
    if len(set(labels)) != n:
        raise ValueError(f"labels must be distinct, got {labels}")

    # one CE node per slot/label pair; permutations reuse them
    ce = [[nx.cross_entropy(logits[i], labels[j]) for j in range(n)]
          for i in range(n)]
    perms = list(permutations(range(n)))
    totals = [sum(ce[i][p[i]].item() for i in range(n)) for p in perms]
    best = 0
    for k in range(1, len(perms)):
        if totals[k] < totals[best]:  # strict: earlier (smaller) perm wins ties
            best = k
    winner = perms[best]
    loss = ce[0][winner[0]]
    if n > 1:
        loss = nx.add_n([ce[i][winner[i]] for i in range(n)])
    return PermutationAssignment(winner, loss, tuple(totals))


def assign(cost) -> tuple[int, ...]:
    """Minimum-total-cost bijection rows -> columns of a square matrix.

    Exhaustive over permutations (rows capped at 8); ties resolve to the
    lexicographically smallest permutation.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {c.shape}")
    n = c.shape[0]
    if n == 0:
        raise ValueError("cost matrix is empty")
    if n > MAX_SLOTS:
        raise ValueError(f"{n} rows exceeds the exhaustive-assignment cap of {MAX_SLOTS}")
    if not np.isfinite(c).all():
        raise ValueError("cost matrix contains non-finite entries")
    best_perm = None
    best_total = np.inf
    for p in permutations(range(n)):
        total = float(sum(c[i, p[i]] for i in range(n)))
        if total < best_total:
            best_total = total
            best_perm = p
    return best_perm
