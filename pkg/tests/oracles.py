"""Independent reference implementations used by the tests.

Everything here works from pixel masks and plain loops so that it shares no
bookkeeping with the package code it checks.
"""
import math

import numpy as np
from scipy.optimize import linprog


def mask_area(mask):
    return int(mask.sum())


def mask_centroid(mask):
    ys, xs = np.nonzero(mask)
    return np.array([xs.mean(), ys.mean()])


def mask_border(mask):
    """Pixel sides of ``mask`` lying on the image border."""
    return int(mask[0].sum() + mask[-1].sum() + mask[:, 0].sum() + mask[:, -1].sum())


def mask_contact(a, b):
    """4-neighbour pixel sides shared by masks ``a`` and ``b``."""
    h, w = a.shape
    n = 0
    for y in range(h):
        for x in range(w):
            if not a[y, x]:
                continue
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and b[yy, xx]:
                    n += 1
    return n


def mask_perimeter(mask):
    """All pixel sides separating ``mask`` from the outside (border included)."""
    return mask_contact(mask, ~mask) + mask_border(mask)


def masks_of(labels):
    return [labels == k for k in range(int(labels.max()) + 1)]


def label_adjacency(labels):
    """Set of adjacent label pairs ``(i, j)`` with ``i < j`` from a pixel scan."""
    h, w = labels.shape
    out = set()
    for y in range(h):
        for x in range(w):
            for yy, xx in ((y + 1, x), (y, x + 1)):
                if yy < h and xx < w and labels[y, x] != labels[yy, xx]:
                    a, b = int(labels[y, x]), int(labels[yy, xx])
                    out.add((min(a, b), max(a, b)))
    return out


def brute_force_bpt(labels, lab):
    """Merge sequence of a BPT rescanning every region pair at every step.

    The current label map is the only state: adjacency, areas and mean
    colours are recomputed from the pixels before each merge. Costs and
    tie-breaking follow ``min(|Ri|,|Rj|) * ||mean_i - mean_j||`` with the
    lowest ``(i, j)``.
    """
    labels = np.array(labels, dtype=np.int64)
    next_id = int(labels.max()) + 1
    merges = []
    while True:
        ids = sorted(int(v) for v in np.unique(labels))
        if len(ids) == 1:
            return merges
        adjacent = label_adjacency(labels)
        means, areas = {}, {}
        for k in ids:
            px = lab[labels == k]
            areas[k] = px.shape[0]
            means[k] = [math.fsum(px[:, c]) / px.shape[0] for c in range(3)]
        best = None
        for a_idx, i in enumerate(ids):
            for j in ids[a_idx + 1:]:
                if (i, j) not in adjacent:
                    continue
                d = math.sqrt(sum((p - q) ** 2 for p, q in zip(means[i], means[j])))
                cost = min(areas[i], areas[j]) * d
                if best is None or (cost, i, j) < best:
                    best = (cost, i, j)
        _, i, j = best
        labels[(labels == i) | (labels == j)] = next_id
        merges.append((i, j, next_id))
        next_id += 1


def emd_lp(ca, wa, cb, wb):
    """Earth Mover's Distance as a linear program (HiGHS)."""
    ca, cb = np.asarray(ca, float), np.asarray(cb, float)
    m, n = len(wa), len(wb)
    cost = np.sqrt(((ca[:, None, :] - cb[None, :, :]) ** 2).sum(-1)).ravel()
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1
    for j in range(n):
        a_eq[m + j, j::n] = 1
    res = linprog(cost, A_eq=a_eq, b_eq=np.concatenate([wa, wb]), bounds=(0, None), method="highs")
    assert res.status == 0
    return float(res.fun)


def naive_local(labels, dist, params=None):
    """Local contrast by double loop over region masks."""
    masks = masks_of(labels)
    n = len(masks)
    out = np.zeros(n)
    for i in range(n):
        perim = mask_perimeter(masks[i])
        for j in range(n):
            if i == j:
                continue
            c = mask_contact(masks[i], masks[j])
            if c:
                out[i] += c / perim * dist[i, j]
        if params is not None and params.use_boundary_prior:
            out[i] *= math.exp(-(mask_border(masks[i]) / perim) / params.sigma_b2)
    return out


def naive_global(labels, dist, params):
    """Global contrast by double loop over region masks."""
    masks = masks_of(labels)
    h, w = labels.shape
    diag = math.hypot(h, w)
    n = len(masks)
    out = np.zeros(n)
    for i in range(n):
        ci = mask_centroid(masks[i])
        for j in range(n):
            if i == j:
                continue
            cj = mask_centroid(masks[j])
            dd = math.hypot(*(ci - cj))
            if params.normalize_centroids:
                dd /= diag
            if params.squared_distance:
                dd = dd**2
            out[i] += mask_area(masks[j]) * math.exp(-dd / params.sigma_s2) * dist[i, j]
        if params.use_boundary_prior:
            out[i] *= math.exp(-(mask_border(masks[i]) / mask_perimeter(masks[i])) / params.sigma_b2)
    return out


def node_masks(h):
    """Pixel mask of every node of a hierarchy, by recursive union."""
    masks = [h.leaf_labels == k for k in range(h.n_leaves)]
    masks += [None] * (h.n_nodes - h.n_leaves)
    for left, right, new in h.merges:
        masks[new] = masks[left] | masks[right]
    return masks


def naive_center_weight(mask, sigma2):
    h, w = mask.shape
    half = math.hypot(h, w) / 2
    cy, cx = (h - 1) / 2, (w - 1) / 2
    ds = [math.hypot(x - cx, y - cy) / half for y, x in zip(*np.nonzero(mask))]
    return math.exp(-(sum(ds) / len(ds)) ** 2 / sigma2)


def naive_soh(h, params, distance):
    """Node saliency with the live partition materialised for every node.

    ``distance(mask_a, mask_b)`` compares two regions from their pixels.
    Leaves are scored against the initial partition, node ``N + t`` against
    the partition right after merge ``t``.
    """
    masks = node_masks(h)
    height, width = h.shape
    diag = math.hypot(height, width)
    n = h.n_leaves

    def score(i, live):
        mi = masks[i]
        wb = math.exp(-(mask_border(mi) / mask_perimeter(mi)) / params.sigma_b2) if params.boundary_prior else 1.0
        wc = naive_center_weight(mi, params.sigma_center2) if params.center_prior else 1.0
        ci = mask_centroid(mi)
        total = 0.0
        for j in live:
            if j == i:
                continue
            mj = masks[j]
            dd = math.hypot(*(ci - mask_centroid(mj))) / diag
            if params.squared_distance:
                dd = dd**2
            wbj = math.exp(-(mask_border(mj) / mask_perimeter(mj)) / params.sigma_b2) if params.boundary_prior else 1.0
            total += mask_area(mj) * wbj * math.exp(-dd / params.sigma_s2) * distance(mi, mj)
        return wb * wc * total

    values = np.zeros(h.n_nodes)
    live = list(range(n))
    for i in range(n):
        values[i] = score(i, live)
    evaluations = n
    for left, right, new in h.merges:
        live = [k for k in live if k not in (left, right)] + [new]
        values[new] = score(new, live)
        evaluations += 1
    return values, evaluations


def naive_integrate(h, values):
    """Per-pixel mean over every node whose pixel set contains the pixel."""
    masks = node_masks(h)
    out = np.zeros(h.shape)
    for y in range(h.shape[0]):
        for x in range(h.shape[1]):
            members = [values[node] for node, m in enumerate(masks) if m[y, x]]
            out[y, x] = math.fsum(members) / len(members)
    return out


def naive_otsu(hist):
    """Exhaustive Otsu threshold on a 256-bin histogram (foreground ``>= t``)."""
    total = hist.sum()
    levels = np.arange(256)
    best_t, best_v = 0, -1.0
    for t in range(1, 256):
        w0 = hist[:t].sum() / total
        w1 = 1 - w0
        if w0 == 0 or w1 == 0:
            continue
        m0 = (levels[:t] * hist[:t]).sum() / hist[:t].sum()
        m1 = (levels[t:] * hist[t:]).sum() / hist[t:].sum()
        v = w0 * w1 * (m0 - m1) ** 2
        if v > best_v + 1e-12:
            best_t, best_v = t, v
    return best_t
