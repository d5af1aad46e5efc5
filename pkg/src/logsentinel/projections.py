"""Separability projections: Fisher LDA, PCA and exact t-SNE.

Callers standardize features first (see ``standardize``); the projection
functions themselves only center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .errors import IoFailure, PerplexityTooLarge, SingleClass


@dataclass
class Embedding:
    coords: np.ndarray
    labels: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        self.labels = np.asarray(self.labels, dtype=int)
        if self.coords.shape[0] != self.labels.shape[0]:
            raise ValueError("coords and labels disagree on n")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("non-finite embedding coordinates")


def standardize(X):
    """Column-wise z-scores using the sample (n-1) standard deviation.

    Zero-variance columns are centered but not scaled.  Returns
    ``(Z, means, stds)``.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("need at least two rows to standardize")
    means = X.mean(axis=0)
    stds = X.std(axis=0, ddof=1)
    scale = np.where(stds > 0, stds, 1.0)
    return (X - means) / scale, means, stds


def _fix_signs(components):
    """Flip each column so its largest-magnitude entry is positive."""
    comps = components.copy()
    for j in range(comps.shape[1]):
        col = comps[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            comps[:, j] = -col
    return comps


def pca(X, k=2, labels=None):
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs n >= 2")
    if k > d:
        raise ValueError("k must not exceed the feature count")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = _fix_signs(evecs[:, order])
    total = evals.sum()
    ratios = evals / total if total > 0 else np.zeros_like(evals)
    comps = evecs[:, :k]
    labels = np.zeros(n, dtype=int) if labels is None else labels
    return Embedding(
        centered @ comps, labels, "pca",
        {"explained_variance_ratio": ratios[:k].tolist(), "components": comps.T.tolist()},
    )


def lda_direction(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise SingleClass("LDA needs both classes present")
    n, d = X.shape
    if n < d + 2:
        raise ValueError("LDA needs n >= d + 2")
    mu0 = X[y == 0].mean(axis=0)
    mu1 = X[y == 1].mean(axis=0)
    r0 = X[y == 0] - mu0
    r1 = X[y == 1] - mu1
    sw = r0.T @ r0 + r1.T @ r1
    eps = 1e-6 * np.trace(sw) / d
    if eps <= 0:
        eps = 1e-12
    w = np.linalg.solve(sw + eps * np.eye(d), mu1 - mu0)
    norm = np.linalg.norm(w)
    return w / norm if norm > 0 else w


def lda(X, y):
    """One-dimensional Fisher discriminant of the centered data.

    Centering on the grand mean puts the injection-class mean on the
    positive side of the axis.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    w = lda_direction(X, y)
    coords = (X - X.mean(axis=0)) @ w
    if coords[y == 1].mean() < 0:
        w, coords = -w, -coords
    return Embedding(coords[:, None], y, "lda", {"direction": w.tolist()})


def separation_ratio(coords, y):
    """|difference of class means| / pooled within-class std of a 1-D projection."""
    coords = np.asarray(coords, dtype=float).ravel()
    y = np.asarray(y, dtype=int)
    a, b = coords[y == 1], coords[y == 0]
    pooled = ((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2)
    return abs(a.mean() - b.mean()) / math.sqrt(pooled)


# -- t-SNE ----------------------------------------------------------------

def _sq_distances(X):
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def _row_entropy(dist_row, beta):
    P = np.exp(-dist_row * beta)
    sum_p = P.sum()
    if sum_p == 0.0:
        sum_p = np.finfo(float).tiny
    H = math.log(sum_p) + beta * float(np.dot(dist_row, P)) / sum_p
    return H, P / sum_p


def conditional_probabilities(X, perplexity, tol=1e-5, max_tries=50):
    """Row-stochastic P with each row's entropy matched to log(perplexity)."""
    D = _sq_distances(np.asarray(X, dtype=float))
    n = D.shape[0]
    target = math.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        beta, lo, hi = 1.0, -np.inf, np.inf
        row = np.delete(D[i], i)
        H, p = _row_entropy(row, beta)
        tries = 0
        while abs(H - target) > tol and tries < max_tries:
            if H > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == -np.inf else (beta + lo) / 2.0
            H, p = _row_entropy(row, beta)
            tries += 1
        P[i, np.arange(n) != i] = p
    return P


def _kl(P, Q):
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne(X, perplexity=30.0, iters=1000, seed=0, labels=None, learning_rate=200.0,
         exaggeration=12.0, exaggeration_iters=250):
    """Exact O(n^2) t-SNE to two dimensions.

    Gradient descent with momentum 0.5 (0.8 after the exaggeration phase) and
    per-coordinate adaptive gains.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 4:
        raise ValueError("t-SNE needs n >= 4")
    if perplexity >= n:
        raise PerplexityTooLarge(f"perplexity {perplexity} must be < n = {n}")
    rng = np.random.default_rng(seed)

    P = conditional_probabilities(X, perplexity)
    P = (P + P.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)

    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl_after_exaggeration = None
    Q = None
    for it in range(iters):
        exag = exaggeration if it < exaggeration_iters else 1.0
        momentum = 0.5 if it < exaggeration_iters else 0.8
        num = 1.0 / (1.0 + _sq_distances(Y))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        if it == exaggeration_iters:
            kl_after_exaggeration = _kl(P, Q)
        PQ = (exag * P - Q) * num
        grad = 4.0 * (np.diag(PQ.sum(axis=1)) - PQ) @ Y
        same = (grad > 0) == (update > 0)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)

    num = 1.0 / (1.0 + _sq_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), 1e-12)
    labels = np.zeros(n, dtype=int) if labels is None else labels
    meta = {"kl": _kl(P, Q), "kl_after_exaggeration": kl_after_exaggeration,
            "seed": seed, "perplexity": perplexity, "iters": iters}
    return Embedding(Y, labels, "tsne", meta)


# -- output ---------------------------------------------------------------

def coords_csv(e: Embedding) -> str:
    lines = ["x,y,label"]
    for row, label in zip(e.coords, e.labels):
        y = repr(float(row[1])) if e.coords.shape[1] > 1 else "0.0"
        lines.append(f"{float(row[0])!r},{y},{int(label)}")
    return "\n".join(lines) + "\n"


def _svg_text(e: Embedding, seed=0, width=480, height=480, margin=48):
    coords = e.coords
    n = coords.shape[0]
    if coords.shape[1] == 1:
        jitter = np.random.default_rng(seed).uniform(-1.0, 1.0, size=n)
        coords = np.column_stack([coords[:, 0], jitter])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{escape(e.kind)} projection</title>',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    x0, x1 = margin, width - margin
    y0, y1 = height - margin, margin
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    if n:
        lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        for axis, (a, b) in enumerate(zip(lo, hi)):
            if axis == 0:
                parts.append(f'<text x="{x0}" y="{y0 + 18}" font-size="11">{a:.3g}</text>')
                parts.append(f'<text x="{x1}" y="{y0 + 18}" font-size="11" text-anchor="end">{b:.3g}</text>')
            else:
                parts.append(f'<text x="{x0 - 6}" y="{y0}" font-size="11" text-anchor="end">{a:.3g}</text>')
                parts.append(f'<text x="{x0 - 6}" y="{y1 + 4}" font-size="11" text-anchor="end">{b:.3g}</text>')
        for (cx, cy), label in zip(coords, e.labels):
            px = x0 + (cx - lo[0]) / span[0] * (x1 - x0)
            py = y0 - (cy - lo[1]) / span[1] * (y0 - y1)
            color = "red" if label == 1 else "blue"
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" fill="{color}" fill-opacity="0.6"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_svg(e: Embedding, path, seed=0) -> str:
    """Write a standalone SVG scatter (blue benign, red injection)."""
    text = _svg_text(e, seed)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return text
