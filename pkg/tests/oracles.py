"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except plain data types, so a
bug in the library cannot silently make its own oracle agree with it.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

CONFLICT = "conflict"

# literal rule table: link kind -> {child value: contributed value}
RULES = {
    "make": {-2: -2, -1: -1, 0: 0, 1: 1, 2: 2},
    "help": {-2: -1, -1: -1, 0: 0, 1: 1, 2: 1},
    "hurt": {-2: 1, -1: 1, 0: 0, 1: -1, 2: -1},
    "break": {-2: 2, -1: 1, 0: 0, 1: -1, 2: -2},
}


def combine_literal(values):
    positives = [v for v in values if v > 0]
    negatives = [v for v in values if v < 0]
    pos = max(positives) if positives else 0
    neg = min(negatives) if negatives else 0
    if pos == 2 and neg == -2:
        return CONFLICT
    if abs(pos) > abs(neg):
        return pos
    if abs(neg) > abs(pos):
        return neg
    return 0


def evaluate(nodes, links, decomposition, initial):
    """Brute-force labeling by memoized recursion on each node's definition.

    nodes: iterable of ids; links: iterable of (source, target, kind);
    decomposition: None or (parent, children, "and"|"or");
    initial: id -> value for leaves.
    """
    memo = {}

    def numeric(label):
        return 0 if label == CONFLICT else label

    def value(n):
        if n in memo:
            return memo[n]
        inputs = [RULES[k][numeric(value(s))] for s, t, k in links if t == n]
        has_decomp = decomposition is not None and decomposition[0] == n
        if has_decomp:
            vals = [numeric(value(c)) for c in decomposition[1]]
            inputs.append(min(vals) if decomposition[2] == "and" else max(vals))
        if not inputs and not has_decomp:
            result = initial.get(n, 0)
        else:
            result = combine_literal(inputs)
        memo[n] = result
        return result

    return {n: value(n) for n in nodes}


def count_rows(keys, assignment, key_values, selectivity, cardinality):
    """Rows scanned by enumerating every materialized fact row."""
    scope = key_values or set(range(cardinality))
    touched = {assignment[v] for v in scope}
    rows = sum(1 for k in keys.tolist() if assignment[k] in touched)
    # exact decimal product, rounded up
    num, den = _decimal_fraction(selectivity)
    return -(-num * rows // den), len(touched)


def _decimal_fraction(x):
    text = repr(float(x))
    if "e" in text or "E" in text:
        raise ValueError(text)
    whole, _, frac = text.partition(".")
    den = 10 ** len(frac)
    return int(whole + frac), den


def range_blocks(cardinality, fragments):
    """Contiguous blocks; block i starts at floor-free greedy positions."""
    out = []
    size = -(-cardinality // fragments)
    start = 0
    for i in range(fragments):
        left_after = fragments - i - 1
        end = min(start + size, cardinality - left_after)
        out += [i] * (end - start)
        start = end
    return out


def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def enumerate_small_sigs(max_nodes=4, max_links=3, kinds=("make", "help", "hurt", "break")):
    """Every small SIG shape exactly once up to isomorphism.

    Any acyclic graph has a topological numbering, so restricting edges to
    i < j still covers every shape; duplicates reached through different
    numberings are then dropped by a canonical form taken over all node
    permutations.  Parallel links of different kinds on the same pair are
    included.  Yields (node_count, links, decomposition).
    """
    seen = set()
    for n, links, d in _numbered_sigs(max_nodes, max_links, kinds):
        key = (n, _canonical(n, links, d))
        if key not in seen:
            seen.add(key)
            yield n, links, d


def _canonical(n, links, d):
    best = None
    for perm in itertools.permutations(range(n)):
        form = (
            tuple(sorted((perm[i], perm[j], k) for i, j, k in links)),
            () if d is None else (perm[d[0]], tuple(sorted(perm[c] for c in d[1])), d[2]),
        )
        if best is None or form < best:
            best = form
    return best


def _numbered_sigs(max_nodes, max_links, kinds):
    for n in range(1, max_nodes + 1):
        pairs = [(i, j) for i in range(n) for j in range(n) if i < j]
        candidates = [(i, j, k) for i, j in pairs for k in kinds]
        decomps = [None]
        for parent in range(n):
            below = list(range(parent))
            for r in range(1, len(below) + 1):
                for children in itertools.combinations(below, r):
                    for mode in ("and", "or"):
                        decomps.append((parent, children, mode))
        for m in range(max_links + 1):
            for links in itertools.combinations(candidates, m):
                for d in decomps:
                    yield n, links, d
