"""Spectral analysis of measure matrices.

Covers Perron-root computation for nonnegative matrices, the communication
class decomposition of a matrix spec's support pattern, the per-class root
alpha_c solving "spectral radius of the class block = 1", the derived
classification (overall exponent, classes attaining it, renewal heights and
asymptotic regime tags), and lattice/non-lattice detection of the cycle
length spectrum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._roots import expand_bracket, illinois
from .errors import DegenerateClass, NoConvergence
from .matrix import DEFAULT_REL_TOL, MeasureMatrixSpec, entry_value

_RADIUS_TOL = 1e-13
_MAX_POWER_ITER = 1_000_000


# ---------------------------------------------------------------------------
# Perron root
# ---------------------------------------------------------------------------

def spectral_radius(mat: np.ndarray, tol: float = _RADIUS_TOL) -> float:
    """Largest-modulus eigenvalue of a nonnegative matrix.

    Computed per irreducible diagonal block.  Power iteration runs on
    (B + I)/2, which maps the Perron root lam to (lam + 1)/2 and kills the
    periodicity that stalls plain iteration on cyclic blocks.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 0:
        return 0.0
    best = 0.0
    for block_idx in _support_sccs(mat != 0.0):
        if len(block_idx) == 1:
            i = block_idx[0]
            best = max(best, mat[i, i])
            continue
        sub = mat[np.ix_(block_idx, block_idx)]
        best = max(best, _power_iteration(sub, tol))
    return best


def _power_iteration(block: np.ndarray, tol: float) -> float:
    n = block.shape[0]
    if not np.all(np.isfinite(block)):
        return math.inf
    # Half-shifted iteration matrix; plain Python lists beat numpy by an
    # order of magnitude at these sizes.
    half = [[0.5 * block[i, j] + (0.5 if i == j else 0.0) for j in range(n)] for i in range(n)]
    rng_n = range(n)
    v = [1.0 / n] * n
    lam_hist = [0.0, 0.0, 0.0]
    accel_prev = None
    for it in range(_MAX_POWER_ITER):
        w = []
        for i in rng_n:
            row = half[i]
            acc = 0.0
            for j in rng_n:
                acc += row[j] * v[j]
            w.append(acc)
        num = 0.0
        den = 0.0
        nw = 0.0
        for i in rng_n:
            num += v[i] * w[i]
            den += v[i] * v[i]
            nw += w[i]
        lam = num / den
        if nw <= 0.0 or not math.isfinite(nw):
            return math.inf if not math.isfinite(nw) else 0.0
        inv = 1.0 / nw
        v = [wi * inv for wi in w]
        lam_hist = [lam_hist[1], lam_hist[2], lam]
        if it >= 2:
            # Aitken extrapolation of the linearly convergent Rayleigh
            # sequence; accept once two successive estimates agree.
            d1 = lam_hist[1] - lam_hist[0]
            d2 = lam_hist[2] - lam_hist[1]
            denom = d2 - d1
            accel = lam if abs(denom) < 1e-300 else lam_hist[0] - d1 * d1 / denom
            if abs(d2) < tol * max(1.0, abs(lam)):
                return 2.0 * lam - 1.0
            if accel_prev is not None and abs(accel - accel_prev) < 0.25 * tol * max(
                1.0, abs(accel)
            ):
                return 2.0 * accel - 1.0
            accel_prev = accel
    raise NoConvergence(f"power iteration did not settle in {_MAX_POWER_ITER} iterations")


def _support_sccs(support: np.ndarray) -> list[list[int]]:
    """SCCs of a boolean adjacency matrix, ordered by smallest member."""
    n = support.shape[0]
    adj = [list(np.nonzero(support[i])[0]) for i in range(n)]
    from .gifs import _tarjan

    comp = _tarjan(n, adj)
    groups: dict[int, list[int]] = {}
    for v, c in enumerate(comp):
        groups.setdefault(c, []).append(v)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


# ---------------------------------------------------------------------------
# Communication classes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassDecomposition:
    classes: tuple[tuple[int, ...], ...]  # row indices per class
    class_of: tuple[int, ...]  # row -> class index
    degenerate: tuple[bool, ...]  # class has no internal cycle
    class_edges: tuple[tuple[int, int], ...]  # direct edges between classes
    accessibility: tuple[tuple[bool, ...], ...]  # transitive closure incl. self
    final_flags: tuple[bool, ...]  # no access to any other class
    scc_of_class: tuple[int, ...]  # graph component per class

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def is_irreducible(self) -> bool:
        return self.num_classes == 1 and not self.degenerate[0]


def communication_classes(spec: MeasureMatrixSpec) -> ClassDecomposition:
    """Partition indices by mutual accessibility in the support pattern.

    The partition depends only on which entries are structurally nonzero,
    never on (q, alpha).
    """
    support = spec.support()
    classes = _support_sccs(support)
    k = len(classes)
    class_of = [0] * spec.n
    for ci, members in enumerate(classes):
        for i in members:
            class_of[i] = ci

    degenerate = []
    for members in classes:
        if len(members) > 1:
            degenerate.append(False)
        else:
            i = members[0]
            degenerate.append(not support[i, i])

    edges = set()
    for i in range(spec.n):
        for j in range(spec.n):
            if support[i, j] and class_of[i] != class_of[j]:
                edges.add((class_of[i], class_of[j]))

    reach = [[False] * k for _ in range(k)]
    adj = [[] for _ in range(k)]
    for a, b in edges:
        adj[a].append(b)
    for c in range(k):
        stack = [c]
        seen = {c}
        while stack:
            x = stack.pop()
            reach[c][x] = True
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)

    final = [not any(reach[c][d] for d in range(k) if d != c) for c in range(k)]
    scc_of_class = [spec.scc_of[members[0]] for members in classes]
    return ClassDecomposition(
        classes=tuple(tuple(m) for m in classes),
        class_of=tuple(class_of),
        degenerate=tuple(degenerate),
        class_edges=tuple(sorted(edges)),
        accessibility=tuple(tuple(row) for row in reach),
        final_flags=tuple(final),
        scc_of_class=tuple(scc_of_class),
    )


# ---------------------------------------------------------------------------
# Per-class roots
# ---------------------------------------------------------------------------

def _block_radius(spec, members, q, alpha, rel_tol):
    m = len(members)
    block = np.zeros((m, m))
    for a, i in enumerate(members):
        for b, j in enumerate(members):
            entry = spec.entries[i][j]
            if not entry.is_zero:
                block[a, b] = entry_value(entry, q, alpha, rel_tol)
    return spectral_radius(block)


def block_domain_sup(spec: MeasureMatrixSpec, members, q: float) -> float | None:
    sups = []
    for i in members:
        for j in members:
            for fam in spec.entries[i][j].families:
                sup = fam.domain_sup(q)
                if sup is not None:
                    sups.append(sup)
    return min(sups) if sups else None


def class_root(
    spec: MeasureMatrixSpec,
    members,
    q: float,
    bracket_hint: float | None = None,
    xtol: float = 1e-12,
    rel_tol: float = DEFAULT_REL_TOL,
) -> float:
    """Unique alpha where the class block's spectral radius equals one.

    Every entry is strictly increasing in alpha, hence so is the radius;
    the bracket doubles outward from alpha = 0 (or a warm hint) and is
    clamped inside the open convergence domain, where the radius blows up,
    so the root always precedes the boundary.
    """
    members = list(members)
    if len(members) == 1:
        i = members[0]
        if spec.entries[i][i].is_zero:
            raise DegenerateClass(f"class {{{spec.labels[i]}}} has no cycle")

    sup = block_domain_sup(spec, members, q)

    def f(alpha: float) -> float:
        return _block_radius(spec, members, q, alpha, rel_tol) - 1.0

    start = 0.0 if bracket_hint is None else bracket_hint
    margin = None if sup is None else sup - 1e-15 * max(1.0, abs(sup))
    lo, hi, flo, fhi = expand_bracket(f, start, margin)
    root = illinois(f, lo, hi, flo, fhi, xtol=xtol)
    # Contract: the radius at the root is within 1e-11 of one.
    if abs(f(root)) > 1e-11:
        root = illinois(f, *_tight_bracket(f, root, xtol), xtol=xtol * 1e-2)
    return root


def _tight_bracket(f, root, xtol):
    step = max(8.0 * xtol, 1e-11)
    lo, hi = root - step, root + step
    flo, fhi = f(lo), f(hi)
    while flo > 0.0:
        lo -= step
        step *= 2.0
        flo = f(lo)
    step = max(8.0 * xtol, 1e-11)
    while fhi < 0.0:
        hi += step
        step *= 2.0
        fhi = f(hi)
    return lo, hi, flo, fhi


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tag:
    """Asymptotic regime of one cell index.

    kind is one of 'periodic_or_constant' (attaining class, height 1),
    'polynomial' (attaining class, height order+1), 'decays_to_zero',
    'fed_by_S0', 'fed_by_Sm'; order carries the polynomial degree m where
    applicable.
    """

    kind: str
    order: int | None = None

    def as_text(self) -> str:
        if self.order is None:
            return self.kind
        return f"{self.kind}({self.order})"


@dataclass(frozen=True)
class LatticeVerdict:
    lattice: bool
    span: float | None = None  # common generator of the length spectrum
    detail: str = ""


@dataclass(frozen=True)
class ClassificationResult:
    decomposition: ClassDecomposition
    roots: dict  # class index -> alpha_c (non-degenerate classes only)
    tau: float
    basic_classes: tuple[int, ...]  # class indices tying at tau
    heights: dict  # class index -> height (basic classes)
    s_sets: dict  # m -> tuple of labels in S_m
    tags: dict  # label -> Tag
    lattice: dict  # class index -> LatticeVerdict (classes with a cycle)
    tie_tol: float

    def labels_of_class(self, spec: MeasureMatrixSpec, ci: int) -> tuple[int, ...]:
        return tuple(spec.labels[i] for i in self.decomposition.classes[ci])


def classify(
    spec: MeasureMatrixSpec,
    q: float,
    class_tie_tol: float = 1e-9,
    bracket_hints: dict | None = None,
    with_lattice: bool = True,
    rel_tol: float = DEFAULT_REL_TOL,
) -> ClassificationResult:
    """Roots, attaining classes, heights, and per-cell regime tags at q.

    The overall exponent is the minimum of the class roots.  Classes whose
    root ties with the minimum (within class_tie_tol) attain the spectral
    condition; their height counts the non-degenerate classes that reach
    them through chains avoiding degenerate links, each of which satisfies
    the radius-one condition under its own component exponent.  Cells
    outside the attaining set are tagged by whether an attaining class
    reaches them in the support digraph.
    """
    deco = communication_classes(spec)
    k = deco.num_classes
    hints = bracket_hints or {}

    roots: dict[int, float] = {}
    for ci in range(k):
        if deco.degenerate[ci]:
            continue
        roots[ci] = class_root(
            spec, deco.classes[ci], q, bracket_hint=hints.get(ci), rel_tol=rel_tol
        )
    if not roots:
        raise DegenerateClass("no class carries a cycle; no root exists")

    tau = min(roots.values())
    basic = tuple(sorted(ci for ci, a in roots.items() if abs(a - tau) <= class_tie_tol))

    heights = {ci: _height(deco, ci) for ci in basic}
    s_sets: dict[int, tuple[int, ...]] = {}
    for ci in basic:
        m = heights[ci] - 1
        labels = tuple(spec.labels[i] for i in deco.classes[ci])
        s_sets[m] = tuple(sorted(s_sets.get(m, ()) + labels))

    tags: dict[int, Tag] = {}
    basic_set = set(basic)
    for i in range(spec.n):
        ci = deco.class_of[i]
        label = spec.labels[i]
        if ci in basic_set:
            m = heights[ci] - 1
            tags[label] = Tag("periodic_or_constant") if m == 0 else Tag("polynomial", m)
            continue
        feeder_heights = [heights[b] for b in basic if deco.accessibility[b][ci]]
        if not feeder_heights:
            tags[label] = Tag("decays_to_zero")
        elif max(feeder_heights) == 1:
            tags[label] = Tag("fed_by_S0")
        else:
            tags[label] = Tag("fed_by_Sm", max(feeder_heights) - 1)

    lattice: dict[int, LatticeVerdict] = {}
    if with_lattice:
        for ci in range(k):
            if not deco.degenerate[ci]:
                lattice[ci] = lattice_check(spec, deco.classes[ci])

    return ClassificationResult(
        decomposition=deco,
        roots=roots,
        tau=tau,
        basic_classes=basic,
        heights=heights,
        s_sets=s_sets,
        tags=tags,
        lattice=lattice,
        tie_tol=class_tie_tol,
    )


def _height(deco: ClassDecomposition, target: int) -> int:
    """Count non-degenerate classes chaining into ``target``.

    Reachability is taken in the class digraph restricted to non-degenerate
    nodes: a chain that can only pass through a cycle-free class is broken,
    since that link contributes no renewal accumulation.
    """
    k = deco.num_classes
    adj = [[] for _ in range(k)]
    for a, b in deco.class_edges:
        if not deco.degenerate[a] and not deco.degenerate[b]:
            adj[a].append(b)
    count = 1
    for src in range(k):
        if src == target or deco.degenerate[src]:
            continue
        stack = [src]
        seen = {src}
        found = False
        while stack and not found:
            x = stack.pop()
            for y in adj[x]:
                if y == target:
                    found = True
                    break
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if found:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Lattice detection
# ---------------------------------------------------------------------------

def lattice_check(
    spec: MeasureMatrixSpec,
    members,
    max_denominator: int = 10**6,
    residual_tol: float = 1e-9,
) -> LatticeVerdict:
    """Decide whether the class's log-length spectrum sits on a lattice.

    Generators: the summed base log-lengths -ln(rho0) along every simple
    cycle of the class (one choice per atom family on each edge), plus the
    step log-length -ln(r) of every multi-atom family on a cycle edge.
    The verdict is Lattice(span) when all generators are integer multiples
    of a common span, located by continued-fraction rational detection; a
    numeric procedure can only certify lattices, so NonLattice means no
    rational structure within the stated denominator bound and tolerance.
    """
    members = list(members)
    index = {i: a for a, i in enumerate(members)}
    m = len(members)
    adj = [[] for _ in range(m)]
    for i in members:
        for j in members:
            if not spec.entries[i][j].is_zero:
                adj[index[i]].append(index[j])

    generators: list[float] = []
    for cycle in _simple_cycles(m, adj):
        edge_fams = []
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            entry = spec.entries[members[a]][members[b]]
            edge_fams.append(entry.families)
        for choice in itertools.product(*edge_fams):
            generators.append(sum(-math.log(f.base_ratio) for f in choice))
    for i in members:
        for j in members:
            for fam in spec.entries[i][j].families:
                if fam.k_end is None or fam.k_end > fam.k_start:
                    generators.append(-math.log(fam.step_ratio))

    if not generators:
        return LatticeVerdict(False, detail="no cycle generators")

    span = generators[0]
    for g in generators[1:]:
        span = _real_gcd(span, g, max_denominator, residual_tol)
        if span is None:
            return LatticeVerdict(
                False,
                detail=f"no rational ratio within denominator {max_denominator} "
                f"and residual {residual_tol:g}",
            )
    for g in generators:
        if abs(g - round(g / span) * span) > residual_tol:
            return LatticeVerdict(False, detail="residual check failed")
    return LatticeVerdict(True, span=span, detail=f"{len(generators)} generators")


def _real_gcd(x: float, y: float, max_den: int, tol: float) -> float | None:
    """Largest d with x, y both near-integer multiples of d, or None."""
    if x < y:
        x, y = y, x
    frac = Fraction(x / y).limit_denominator(max_den)
    if frac.numerator == 0:
        return None
    if abs(x / y - float(frac)) > tol:
        return None
    return y / frac.denominator


def _simple_cycles(n: int, adj: list[list[int]]):
    """All simple cycles of a small digraph, each rooted at its minimal node."""
    cycles: list[list[int]] = []
    for s in range(n):
        stack = [(s, [s])]
        while stack:
            v, path = stack.pop()
            for w in adj[v]:
                if w == s:
                    cycles.append(path)
                elif w > s and w not in path:
                    stack.append((w, path + [w]))
    return cycles
