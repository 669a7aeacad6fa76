"""Seed-competition shortest-path forests on the pixel grid.

Multiple labeled seeds grow simultaneously over an active pixel domain; each
domain pixel ends up owned by the seed offering the cheapest path, where a
path's cost is the sum of arc weights raised to a contrast exponent. Arcs
connect 8-neighbors, their weight is the mean of the two endpoint weights,
and an optional region map confines arcs to pixels sharing a region id, so
ownership can never leak across region boundaries.

Ties are FIFO: among equal-cost queue entries the earliest-inserted pops
first, and an equal-cost re-offer never displaces an owner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import NoSeeds, OverlappingInteriors, SeedOutsideDomain

_BOX3 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SeedSet:
    """Labeled seed pixels; label 0 means background.

    ``xy`` is (n, 2) int64 of (x, y); ``labels`` is (n,) int32. Order matters
    (it is the queue insertion order). A pixel may not carry two different
    labels.
    """

    xy: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=np.int64).reshape(-1, 2)
        labels = np.asarray(self.labels, dtype=np.int32).reshape(-1)
        if len(xy) != len(labels):
            raise ValueError("seed coordinates and labels differ in length")
        seen: dict[tuple[int, int], int] = {}
        for (x, y), lab in zip(xy, labels):
            key = (int(x), int(y))
            if seen.setdefault(key, int(lab)) != int(lab):
                raise ValueError(f"seed pixel {key} carries two labels")
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class IftConfig:
    """Knobs for the forest transform.

    ``domain`` marks the active pixels; ``regions`` (optional int map) adds
    the same-region arc constraint; ``eta`` is the contrast exponent applied
    to each arc weight.
    """

    domain: np.ndarray
    eta: float = 1.5
    regions: np.ndarray | None = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")


@dataclass
class Forest:
    """Result of seed competition.

    ``cost`` is +inf on unreached pixels, ``label`` 0 there; ``pred`` and
    ``root`` hold flat pixel indices (-1 where undefined). ``pops`` counts
    domain pixels extracted from the queue (each at most once).
    """

    cost: np.ndarray
    label: np.ndarray
    pred: np.ndarray
    root: np.ndarray
    domain: np.ndarray
    pops: int = 0
    shape: tuple[int, int] = field(init=False)

    def __post_init__(self):
        self.shape = self.cost.shape


@njit(cache=True)
def _ift_kernel(weights, in_domain, regions, seeds_flat, seed_labels, eta, h, w):
    n = h * w
    INF = np.inf
    cost = np.full(n, INF)
    label = np.zeros(n, np.int32)
    pred = np.full(n, -1, np.int64)
    root = np.full(n, -1, np.int64)
    state = np.zeros(n, np.uint8)  # 0 unseen, 1 queued, 2 done

    # binary heap with decrease-key; entries keyed by (cost, insertion ctr)
    hpix = np.empty(n, np.int64)
    pos = np.full(n, -1, np.int64)
    kctr = np.zeros(n, np.int64)
    hsize = 0
    ctr = 0

    def less(a, b):
        if cost[a] != cost[b]:
            return cost[a] < cost[b]
        return kctr[a] < kctr[b]

    def sift_up(i):
        while i > 0:
            parent = (i - 1) >> 1
            if less(hpix[i], hpix[parent]):
                hpix[i], hpix[parent] = hpix[parent], hpix[i]
                pos[hpix[i]] = i
                pos[hpix[parent]] = parent
                i = parent
            else:
                break

    def sift_down(i, size):
        while True:
            left = 2 * i + 1
            if left >= size:
                break
            best = left
            right = left + 1
            if right < size and less(hpix[right], hpix[left]):
                best = right
            if less(hpix[best], hpix[i]):
                hpix[i], hpix[best] = hpix[best], hpix[i]
                pos[hpix[i]] = i
                pos[hpix[best]] = best
                i = best
            else:
                break

    for i in range(len(seeds_flat)):
        p = seeds_flat[i]
        cost[p] = 0.0
        label[p] = seed_labels[i]
        root[p] = p
        kctr[p] = ctr
        ctr += 1
        hpix[hsize] = p
        pos[p] = hsize
        state[p] = 1
        hsize += 1
        sift_up(hsize - 1)

    pops = 0
    while hsize > 0:
        u = hpix[0]
        hsize -= 1
        hpix[0] = hpix[hsize]
        pos[hpix[0]] = 0
        pos[u] = -1
        if hsize > 0:
            sift_down(0, hsize)
        state[u] = 2
        if in_domain[u]:
            pops += 1
        uy = u // w
        ux = u % w
        for dy in range(-1, 2):
            vy = uy + dy
            if vy < 0 or vy >= h:
                continue
            for dx in range(-1, 2):
                if dx == 0 and dy == 0:
                    continue
                vx = ux + dx
                if vx < 0 or vx >= w:
                    continue
                v = vy * w + vx
                if not in_domain[v]:
                    continue
                if state[v] == 2:
                    continue
                if regions[u] != regions[v]:
                    continue
                arc = (weights[u] + weights[v]) * 0.5
                c = cost[u] + arc**eta
                if c < cost[v]:
                    cost[v] = c
                    label[v] = label[u]
                    pred[v] = u
                    root[v] = root[u]
                    kctr[v] = ctr
                    ctr += 1
                    if state[v] == 0:
                        hpix[hsize] = v
                        pos[v] = hsize
                        state[v] = 1
                        hsize += 1
                        sift_up(hsize - 1)
                    else:
                        sift_up(pos[v])
    return cost, label, pred, root, pops


def ift_sc(weights: np.ndarray, seeds: SeedSet, cfg: IftConfig) -> Forest:
    """Run seed competition over ``cfg.domain`` on the given weight raster.

    Seeds start at cost 0 and may sit just outside the domain (8-adjacent),
    acting as pure sources. Raises NoSeeds / SeedOutsideDomain on bad input.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2:
        raise ValueError("weights must be a 2D raster")
    if (weights < 0).any():
        raise ValueError("arc weights must be non-negative")
    domain = np.asarray(cfg.domain, dtype=bool)
    if domain.shape != weights.shape:
        raise ValueError("domain and weights shapes differ")
    if len(seeds) == 0:
        raise NoSeeds("seed set is empty")
    h, w = weights.shape
    xs, ys = seeds.xy[:, 0], seeds.xy[:, 1]
    if (xs < 0).any() or (xs >= w).any() or (ys < 0).any() or (ys >= h).any():
        raise SeedOutsideDomain("seed pixel outside the raster")
    near = ndimage.binary_dilation(domain, structure=_BOX3)
    if not near[ys, xs].all():
        bad = np.nonzero(~near[ys, xs])[0][0]
        raise SeedOutsideDomain(
            f"seed at {tuple(seeds.xy[bad])} is not in or adjacent to the domain"
        )
    if cfg.regions is not None:
        regions = np.asarray(cfg.regions, dtype=np.int64)
        if regions.shape != weights.shape:
            raise ValueError("region map and weights shapes differ")
        regions = regions.ravel()
    else:
        regions = np.zeros(h * w, dtype=np.int64)
    cost, label, pred, root, pops = _ift_kernel(
        weights.ravel(),
        domain.ravel(),
        regions,
        (ys * w + xs).astype(np.int64),
        seeds.labels,
        float(cfg.eta),
        h,
        w,
    )
    return Forest(
        cost=cost.reshape(h, w),
        label=label.reshape(h, w),
        pred=pred.reshape(h, w),
        root=root.reshape(h, w),
        domain=domain,
        pops=int(pops),
    )


def label_uncertainty(forest: Forest, interiors: dict[int, np.ndarray]) -> np.ndarray:
    """Compose a label map from fixed interiors plus forest ownership.

    Pixels inside a given interior mask take that label; remaining domain
    pixels take the forest label (0 where unreached); everything else is 0.
    Interior masks must be pairwise disjoint.
    """
    out = np.zeros(forest.shape, dtype=np.int32)
    claimed = np.zeros(forest.shape, dtype=bool)
    for lab in sorted(interiors):
        m = np.asarray(interiors[lab], dtype=bool)
        if (claimed & m).any():
            raise OverlappingInteriors(f"interior of label {lab} overlaps another")
        claimed |= m
    sel = forest.domain & ~claimed
    out[sel] = forest.label[sel]
    for lab in sorted(interiors):
        out[np.asarray(interiors[lab], dtype=bool)] = lab
    return out
