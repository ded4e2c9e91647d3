"""Naive reference implementations used as test oracles.

Every function here recomputes a production operation with plain Python
loops over lists, sharing no code with the fast paths. They are meant for
small instances only.
"""
from __future__ import annotations

import math

__all__ = [
    "oracle_topk",
    "oracle_scores",
    "oracle_search",
    "oracle_proxy",
    "oracle_correlation_transform",
    "oracle_mae",
    "oracle_f_curve",
    "oracle_s_measure",
    "oracle_e_mean",
]

_EPS = 1e-8
_TAUS = [k / 256.0 for k in range(256)]


def oracle_topk(scores, k):
    """Sort-and-slice top-k: score descending, ties to the smaller index."""
    s = [float(v) for v in scores]
    order = sorted(range(len(s)), key=lambda i: (-s[i], i))
    return order[:k]


def oracle_scores(features, proxy_vec):
    """Per-location proxy correlation, image-major row-major, one loop per axis."""
    f = _tolist4(features)
    p = [float(v) for v in proxy_vec]
    out = []
    for img in f:
        d = len(img)
        h = len(img[0])
        w = len(img[0][0])
        for y in range(h):
            for x in range(w):
                s = 0.0
                for c in range(d):
                    s += p[c] * img[c][y][x]
                out.append(s)
    return out


def oracle_search(features, proxy_vec, k):
    """Brute-force selection: score, sort, slice, gather."""
    f = _tolist4(features)
    h = len(f[0][0])
    w = len(f[0][0][0])
    scores = oracle_scores(features, proxy_vec)
    idx = oracle_topk(scores, k)
    coords = []
    gathered = []
    picked = []
    for flat in idx:
        n = flat // (h * w)
        y = (flat % (h * w)) // w
        x = flat % w
        coords.append((n, y, x))
        gathered.append([f[n][c][y][x] for c in range(len(f[0]))])
        picked.append(scores[flat])
    return coords, gathered, picked


def oracle_proxy(features, maps, eps=1e-12):
    """Masked global average over the group, Euclidean-normalized.

    Mirrors the fallback contract: a sub-eps masked average falls back to the
    all-ones mask and reports degenerate=True.
    """
    f = _tolist4(features)
    m = _tolist3(maps)
    vec, nrm = _masked_mean(f, m)
    if nrm >= eps:
        return [v / nrm for v in vec], False
    ones = [[[1.0] * len(row) for row in img] for img in m]
    vec2, nrm2 = _masked_mean(f, ones)
    if nrm2 >= eps:
        return [v / nrm2 for v in vec2], True
    return [0.0] * len(vec), True


def _masked_mean(f, m):
    n_images = len(f)
    d = len(f[0])
    h = len(f[0][0])
    w = len(f[0][0][0])
    acc = [0.0] * d
    for n in range(n_images):
        for c in range(d):
            s = 0.0
            for y in range(h):
                for x in range(w):
                    s += m[n][y][x] * f[n][c][y][x]
            acc[c] += s / (h * w)
    vec = [a / n_images for a in acc]
    nrm = math.sqrt(sum(v * v for v in vec))
    return vec, nrm


def oracle_correlation_transform(features, proxy_vec, corep_embeddings):
    """Quadruple-loop version of the correlation transform."""
    f = _tolist4(features)
    p = [float(v) for v in proxy_vec]
    c_rows = [[float(v) for v in row] for row in corep_embeddings]
    d = len(f[0])
    h = len(f[0][0])
    w = len(f[0][0][0])
    out = []
    for img in f:
        per_k = []
        for row in c_rows:
            grid = []
            for y in range(h):
                line = []
                for x in range(w):
                    s = 0.0
                    for c in range(d):
                        s += p[c] * img[c][y][x]
                    a = 0.0
                    for c in range(d):
                        a += row[c] * (s * img[c][y][x])
                    line.append(a)
                grid.append(line)
            per_k.append(grid)
        out.append(per_k)
    return out


def oracle_mae(pred, gt):
    p = _tolist3(pred)
    g = _binarize(_tolist3(gt))
    per_image = []
    for n in range(len(p)):
        total = 0.0
        count = 0
        for y in range(len(p[n])):
            for x in range(len(p[n][0])):
                total += abs(p[n][y][x] - g[n][y][x])
                count += 1
        per_image.append(total / count)
    return sum(per_image) / len(per_image)


def oracle_f_curve(pred, gt, beta_sq=0.3):
    """Group-averaged F scores over the 256-threshold grid."""
    p = _tolist3(pred)
    g = _binarize(_tolist3(gt))
    curves = []
    for n in range(len(p)):
        n_fg = sum(v for row in g[n] for v in row)
        curve = []
        for tau in _TAUS:
            if n_fg == 0:
                curve.append(0.0)
                continue
            tp = fp = 0
            for y in range(len(p[n])):
                for x in range(len(p[n][0])):
                    if p[n][y][x] > tau:
                        if g[n][y][x] >= 0.5:
                            tp += 1
                        else:
                            fp += 1
            prec = tp / (tp + fp) if tp + fp > 0 else 0.0
            rec = tp / n_fg
            den = beta_sq * prec + rec
            curve.append((1 + beta_sq) * prec * rec / den if den > 0 else 0.0)
        curves.append(curve)
    return [sum(c[i] for c in curves) / len(curves) for i in range(256)]


def oracle_s_measure(pred, gt, alpha=0.5):
    p = _tolist3(pred)
    g = _binarize(_tolist3(gt))
    vals = [_s_single(p[n], g[n], alpha) for n in range(len(p))]
    return sum(vals) / len(vals)


def _s_single(p, g, alpha):
    h = len(g)
    w = len(g[0])
    flat_g = [v for row in g for v in row]
    if sum(flat_g) == 0:
        mean_p = sum(v for row in p for v in row) / (h * w)
        return min(1.0, max(0.0, 1.0 - mean_p))
    if sum(flat_g) == h * w:
        mean_p = sum(v for row in p for v in row) / (h * w)
        return min(1.0, max(0.0, mean_p))
    mu = sum(flat_g) / (h * w)
    fg_vals = [p[y][x] for y in range(h) for x in range(w) if g[y][x] >= 0.5]
    bg_vals = [1.0 - p[y][x] for y in range(h) for x in range(w) if g[y][x] < 0.5]
    s_o = mu * _obj_sim(fg_vals) + (1 - mu) * _obj_sim(bg_vals)

    ys = [y for y in range(h) for x in range(w) if g[y][x] >= 0.5]
    xs = [x for y in range(h) for x in range(w) if g[y][x] >= 0.5]
    cy = math.floor(sum(ys) / len(ys) + 0.5)
    cx = math.floor(sum(xs) / len(xs) + 0.5)
    s_r = 0.0
    for r0, r1 in ((0, cy + 1), (cy + 1, h)):
        for c0, c1 in ((0, cx + 1), (cx + 1, w)):
            size = (r1 - r0) * (c1 - c0)
            if size <= 0:
                continue
            px = [p[y][x] for y in range(r0, r1) for x in range(c0, c1)]
            gx = [g[y][x] for y in range(r0, r1) for x in range(c0, c1)]
            s_r += (size / (h * w)) * _ssim_vals(px, gx)
    return min(1.0, max(0.0, alpha * s_o + (1 - alpha) * s_r))


def _obj_sim(vals):
    n = len(vals)
    m = sum(vals) / n
    var = sum((v - m) ** 2 for v in vals) / n
    return 2.0 * m / (m * m + 1.0 + 2.0 * math.sqrt(var) + _EPS)


def _ssim_vals(x, y):
    n = len(x)
    xm = sum(x) / n
    ym = sum(y) / n
    if n > 1:
        sx = sum((v - xm) ** 2 for v in x) / (n - 1)
        sy = sum((v - ym) ** 2 for v in y) / (n - 1)
        sxy = sum((a - xm) * (b - ym) for a, b in zip(x, y)) / (n - 1)
    else:
        sx = sy = sxy = 0.0
    return (4.0 * xm * ym * sxy + _EPS) / ((xm * xm + ym * ym) * (sx + sy) + _EPS)


def oracle_e_mean(pred, gt):
    p = _tolist3(pred)
    g = _binarize(_tolist3(gt))
    vals = [_e_single(p[n], g[n]) for n in range(len(p))]
    return sum(vals) / len(vals)


def _e_single(p, g):
    h = len(g)
    w = len(g[0])
    hw = h * w
    n_fg_gt = sum(v for row in g for v in row)
    total = 0.0
    for tau in _TAUS:
        b = [[1.0 if p[y][x] > tau else 0.0 for x in range(w)] for y in range(h)]
        n_fg_b = sum(v for row in b for v in row)
        if n_fg_gt == 0:
            total += 1.0 - n_fg_b / hw
            continue
        if n_fg_gt == hw:
            total += n_fg_b / hw
            continue
        mu_g = n_fg_gt / hw
        mu_b = n_fg_b / hw
        acc = 0.0
        for y in range(h):
            for x in range(w):
                phi_g = g[y][x] - mu_g
                phi_b = b[y][x] - mu_b
                xi = (2.0 * phi_g * phi_b + _EPS) / (phi_g * phi_g + phi_b * phi_b + _EPS)
                acc += (xi + 1.0) ** 2 / 4.0
        total += acc / hw
    return total / 256.0


def _binarize(maps):
    return [[[1.0 if v >= 0.5 else 0.0 for v in row] for row in img] for img in maps]


def _tolist4(x):
    if hasattr(x, "embeddings"):
        return x.embeddings.tolist()
    if hasattr(x, "tolist"):
        return x.tolist()
    return x


def _tolist3(x):
    if hasattr(x, "maps"):
        return x.maps.tolist()
    if hasattr(x, "tolist"):
        return x.tolist()
    return x
