"""Slow, loop-based reference implementations used only by the tests.

Nothing here imports from the package's numerical code, so a bug in a
vectorized path cannot hide behind the same bug in its check.
"""
import math
from collections import Counter, deque

import numpy as np


def color_components(image):
    """4-connected flood fill over pixels with exactly equal RGB."""
    h, w = image.shape[:2]
    labels = -np.ones((h, w), dtype=np.int64)
    n = 0
    for r0 in range(h):
        for c0 in range(w):
            if labels[r0, c0] >= 0:
                continue
            labels[r0, c0] = n
            queue = deque([(r0, c0)])
            while queue:
                r, c = queue.popleft()
                for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    rr, cc = r + dr, c + dc
                    if (0 <= rr < h and 0 <= cc < w and labels[rr, cc] < 0
                            and np.array_equal(image[rr, cc], image[r, c])):
                        labels[rr, cc] = n
                        queue.append((rr, cc))
            n += 1
    return labels, n


def is_4_connected(mask):
    pts = list(zip(*np.nonzero(mask)))
    if not pts:
        return False
    seen = {pts[0]}
    queue = deque([pts[0]])
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            p = (r + dr, c + dc)
            if 0 <= p[0] < mask.shape[0] and 0 <= p[1] < mask.shape[1] and mask[p] and p not in seen:
                seen.add(p)
                queue.append(p)
    return len(seen) == len(pts)


def entropy_bits(values):
    n = len(values)
    return -sum(c / n * math.log2(c / n) for c in Counter(values).values())


def mutual_information(x, y):
    """I(X;Y) = H(X) + H(Y) - H(X,Y), in bits."""
    x = [int(v) for v in x]
    y = [int(v) for v in y]
    return entropy_bits(x) + entropy_bits(y) - entropy_bits(list(zip(x, y)))


def greedy_mrmr(states, target, count, tie_tol=1e-12):
    """Mutual-information-difference greedy selection, one score at a time."""
    n_feat = states.shape[1]
    cols = [list(states[:, f]) for f in range(n_feat)]
    relevance = [mutual_information(col, target) for col in cols]
    selected = []
    while len(selected) < min(count, n_feat):
        remaining = [f for f in range(n_feat) if f not in selected]
        if selected and all(relevance[f] <= tie_tol for f in remaining):
            break
        scores = {}
        for f in remaining:
            if selected:
                red = sum(mutual_information(cols[f], cols[s]) for s in selected) / len(selected)
            else:
                red = 0.0
            scores[f] = relevance[f] - red
        best = max(scores.values())
        selected.append(min(f for f in remaining if scores[f] >= best - tie_tol))
    return selected


def global_votes(blocks, classes, conf, counts, values, weight="voter"):
    """Double loop over (target, voter) then class."""
    n = len(blocks)
    m = values.shape[0]
    out = np.zeros((n, m))
    for j in range(n):
        for q in range(n):
            if blocks[q] == blocks[j]:
                continue
            w = (conf[q] if weight == "voter" else conf[j]) * counts[q]
            for c in range(m):
                out[j, c] += w * values[classes[q], c, blocks[q], blocks[j]]
    return out


def local_votes(neighbors, classes, conf, counts, values, weight="voter"):
    n = len(classes)
    m = values.shape[0]
    out = np.zeros((n, m))
    for j in range(n):
        for q in neighbors[j]:
            w = (conf[q] if weight == "voter" else conf[j]) * counts[q]
            for c in range(m):
                out[j, c] += w * values[classes[q], c]
    return out


def global_prior(corpus, n_blocks, n_classes):
    """Pixel-pair counts between superpixels of different blocks, normalized over c.

    ``corpus`` is a list of images, each a list of ``(block, label, pixels)``
    superpixels.  Rows with no mass are uniform; same-block rows are zero.
    """
    counts = np.zeros((n_classes, n_classes, n_blocks, n_blocks))
    for sps in corpus:
        for b1, l1, n1 in sps:
            for b2, l2, n2 in sps:
                if b1 != b2 and l1 >= 0 and l2 >= 0:
                    counts[l1, l2, b1, b2] += n1 * n2
    out = np.zeros_like(counts)
    for a in range(n_classes):
        for k1 in range(n_blocks):
            for k2 in range(n_blocks):
                if k1 == k2:
                    continue
                total = sum(counts[a, c, k1, k2] for c in range(n_classes))
                for c in range(n_classes):
                    out[a, c, k1, k2] = counts[a, c, k1, k2] / total if total else 1.0 / n_classes
    return out


def local_prior(pairs, n_classes):
    counts = np.zeros((n_classes, n_classes))
    for a, c in pairs:
        counts[a, c] += 1
    out = np.zeros_like(counts)
    for a in range(n_classes):
        total = counts[a].sum()
        out[a] = counts[a] / total if total else 1.0 / n_classes
    return out


def random_scene(rng, max_superpixels=20, max_classes=4, n_blocks=4):
    """A segmentation-free context scene: blocks, top class, confidence, size, adjacency."""
    n = int(rng.integers(1, max_superpixels + 1))
    m = int(rng.integers(2, max_classes + 1))
    blocks = rng.integers(0, n_blocks, n)
    classes = rng.integers(0, m, n)
    conf = rng.uniform(1.0 / m, 1.0, n)
    counts = rng.integers(1, 400, n)
    adj = np.triu(rng.random((n, n)) < 0.3, 1)
    adj = adj | adj.T
    neighbors = tuple(np.flatnonzero(adj[j]) for j in range(n))
    gvals = rng.random((m, m, n_blocks, n_blocks))
    gvals /= gvals.sum(axis=1, keepdims=True)
    lvals = rng.random((m, m))
    lvals /= lvals.sum(axis=1, keepdims=True)
    return dict(m=m, blocks=blocks, classes=classes, conf=conf, counts=counts,
                neighbors=neighbors, gvals=gvals, lvals=lvals)
