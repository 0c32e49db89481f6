"""Finite-rank tensor algebra over a symbol table with a symplectic matrix.

Elements are finite sums of words (tuples of generator indices) with complex
coefficients.  The CCR ideal is generated by x_a x_b - x_b x_a - i G[a, b];
`symmetrize` maps an element to the unique totally symmetric representative
of its class.
"""
import itertools
from collections import defaultdict
from dataclasses import dataclass
from math import factorial

import numpy as np

ZERO_SNAP = 1e-12
ORACLE_MAX_DEGREE = 4
ORACLE_MAX_GENERATORS = 3


class SymbolTable:
    """Generator labels, symplectic matrix and optional source pairings."""

    def __init__(self, labels, G, sources=None, forms=None, asym_tol=1e-12):
        G = np.array(G, dtype=complex)
        n = len(labels)
        if G.shape != (n, n):
            raise ValueError("symplectic matrix shape does not match labels")
        scale = max(1.0, float(np.abs(G).max()) if n else 1.0)
        if np.abs(G + G.T).max(initial=0.0) > asym_tol * scale:
            raise ValueError("symplectic matrix is not antisymmetric")
        self.labels = tuple(str(x) for x in labels)
        self.G = G
        self.sources = None if sources is None else np.array(sources, dtype=complex)
        if self.sources is not None and self.sources.shape != (n,):
            raise ValueError("source pairings do not match labels")
        self.forms = forms

    @property
    def size(self):
        return len(self.labels)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, SymbolTable):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.G, other.G)

    __hash__ = object.__hash__

    def generator(self, i):
        return TensorElement(self, {(int(i),): 1.0})

    def unit(self):
        return TensorElement(self, {(): 1.0})

    def __repr__(self):
        return f"SymbolTable({list(self.labels)})"


def table_from_forms(forms, m, labels=None, solution=None, method=None):
    """Symbol table with G[i, j] = <F_i, G_m F_j> computed by the solver.

    The computed matrix is antisymmetrized; the defect is kept on the table.
    ``solution`` is a classical solution whose pairings <φ, F_i> are attached.
    """
    from .geometry import pairing
    from .solver import proca_green

    n = len(forms)
    GF = [proca_green(F, m, "causal", method) for F in forms]
    raw = np.array([[pairing(forms[i], GF[j]) for j in range(n)] for i in range(n)])
    G = 0.5 * (raw - raw.T)
    src = None if solution is None else [pairing(solution, F) for F in forms]
    tab = SymbolTable(labels or [f"F{i}" for i in range(n)], G, src, forms)
    tab.raw_G = raw
    tab.asymmetry = float(np.abs(raw + raw.T).max() / max(np.abs(raw).max(), 1e-300))
    return tab


def _clean(terms):
    return {w: c for w, c in terms.items() if abs(c) > ZERO_SNAP}


class TensorElement:
    """Immutable finite combination of words; the empty word is the unit."""

    __slots__ = ("table", "terms")

    def __init__(self, table, terms=None):
        self.table = table
        clean = {}
        for w, c in (terms or {}).items():
            w = tuple(int(x) for x in w)
            if any(x < 0 or x >= table.size for x in w):
                raise ValueError(f"generator index out of range in {w}")
            clean[w] = clean.get(w, 0) + complex(c)
        self.terms = _clean(clean)

    def _same(self, other):
        if not isinstance(other, TensorElement):
            return False
        if self.table != other.table:
            raise ValueError("mismatched tables")
        return True

    def _lift(self, other):
        if isinstance(other, TensorElement):
            self._same(other)
            return other
        if np.isscalar(other):
            return TensorElement(self.table, {(): other})
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        t = dict(self.terms)
        for w, c in o.terms.items():
            t[w] = t.get(w, 0) + c
        return TensorElement(self.table, t)

    __radd__ = __add__

    def __neg__(self):
        return TensorElement(self.table, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TensorElement):
            self._same(other)
            t = defaultdict(complex)
            for w1, c1 in self.terms.items():
                for w2, c2 in other.terms.items():
                    t[w1 + w2] += c1 * c2
            return TensorElement(self.table, t)
        if np.isscalar(other):
            return TensorElement(self.table, {w: c * other for w, c in self.terms.items()})
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return NotImplemented

    def star(self):
        return TensorElement(self.table, {w[::-1]: np.conj(c) for w, c in self.terms.items()})

    def degree_part(self, N):
        return TensorElement(self.table, {w: c for w, c in self.terms.items() if len(w) == N})

    @property
    def degrees(self):
        return sorted({len(w) for w in self.terms})

    @property
    def max_degree(self):
        return max(self.degrees, default=0)

    def scalar(self):
        return self.terms.get((), 0j)

    def norm(self):
        return float(np.sqrt(sum(abs(c) ** 2 for c in self.terms.values())))

    def is_zero(self, tol=0.0):
        return all(abs(c) <= tol for c in self.terms.values())

    def is_symmetric(self, tol=1e-12):
        for w, c in self.terms.items():
            for p in set(itertools.permutations(w)):
                if abs(self.terms.get(p, 0) - c) > tol * max(1.0, abs(c)):
                    return False
        return True

    def close_to(self, other, tol=1e-12):
        return (self - other).is_zero(tol)

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for w in sorted(self.terms, key=lambda w: (len(w), w)):
            name = "⊗".join(self.table.labels[i] for i in w) or "1"
            parts.append(f"({self.terms[w]:.6g})·{name}")
        return " + ".join(parts)


def element(table, terms):
    return TensorElement(table, terms)


def word_element(table, *idx, coef=1.0):
    return TensorElement(table, {tuple(idx): coef})


# ---------------------------------------------------------------------------
# symmetrization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceStep:
    word: tuple
    coef: complex
    rule: str

    def format(self, labels):
        name = "⊗".join(labels[i] for i in self.word) or "1"
        return f"{name}\t{self.coef.real:+.12g}{self.coef.imag:+.12g}j\t{self.rule}"


def _sort_word(w, G, trace=None, c=1.0):
    """Rewrite c·w into sorted words using u a b v ≡ u b a v + i G[a,b] u v."""
    out = defaultdict(complex)
    stack = [(tuple(w), complex(c))]
    while stack:
        u, cu = stack.pop()
        k = next((k for k in range(len(u) - 1) if u[k] > u[k + 1]), None)
        if k is None:
            out[u] += cu
            continue
        a, b = u[k], u[k + 1]
        sw = u[:k] + (b, a) + u[k + 2:]
        stack.append((sw, cu))
        g = 1j * G[a, b]
        if abs(g * cu) > 0:
            low = u[:k] + u[k + 2:]
            stack.append((low, cu * g))
            if trace is not None:
                trace.append(TraceStep(low, cu * g, f"swap {k},{k + 1}: contract ({a},{b})"))
    return out


def _distinct_perms(w):
    perms = set(itertools.permutations(w))
    return sorted(perms)


def symmetrize(f, trace=None):
    """Projection S onto totally symmetric elements along the CCR ideal.

    Each word is brought to sorted order by adjacent transpositions; a sorted
    word s is then split as sym(s) plus s - sym(s), and the latter, being an
    average of s - σs, rewrites into strictly lower degree.  Degrees are
    processed from the top down so the recursion terminates.
    """
    G = f.table.G
    pending = defaultdict(complex, f.terms)
    out = defaultdict(complex)
    while pending:
        N = max(len(w) for w in pending)
        top = {w: pending.pop(w) for w in sorted(pending) if len(w) == N}
        sorted_terms = defaultdict(complex)
        for w, c in top.items():
            for u, cu in _sort_word(w, G, trace, c).items():
                if len(u) == N:
                    sorted_terms[u] += cu
                else:
                    pending[u] += cu
        for s, c in sorted(sorted_terms.items()):
            if abs(c) <= ZERO_SNAP:
                continue
            perms = _distinct_perms(s)
            wgt = c / len(perms)
            for p in perms:
                out[p] += wgt
                if p == s:
                    continue
                for u, cu in _sort_word(p, G, None, -wgt).items():
                    if len(u) < N:
                        pending[u] += cu
            if trace is not None:
                trace.append(TraceStep(s, c, f"symmetrize over {len(perms)} orderings"))
        pending = defaultdict(complex, _clean(pending))
    return TensorElement(f.table, out)


def format_trace(trace, labels):
    return "\n".join(step.format(labels) for step in trace)


def _matchings(idx):
    """All partial matchings of the position list as (pairs, unmatched)."""
    if not idx:
        yield [], []
        return
    first, rest = idx[0], idx[1:]
    for pairs, free in _matchings(rest):
        yield pairs, [first] + free
    for k, j in enumerate(rest):
        for pairs, free in _matchings(rest[:k] + rest[k + 1:]):
            yield [(first, j)] + pairs, free


def symmetrize_wick(f):
    """Independent route: w = Σ_matchings Π (i/2) G[w_i, w_j] · sym(unmatched)."""
    G = f.table.G
    out = defaultdict(complex)
    for w, c in f.terms.items():
        for pairs, free in _matchings(list(range(len(w)))):
            amp = c
            for i, j in pairs:
                amp *= 0.5j * G[w[i], w[j]]
            if amp == 0:
                continue
            rest = tuple(w[i] for i in free)
            perms = list(itertools.permutations(rest))
            for p in perms:
                out[p] += amp / factorial(len(rest))
    return TensorElement(f.table, out)


# ---------------------------------------------------------------------------
# ideal membership oracle
# ---------------------------------------------------------------------------

def _words(n, D):
    for N in range(D + 1):
        yield from itertools.product(range(n), repeat=N)


def ideal_spanning_set(table, max_degree):
    """Elements h·(x_a x_b - x_b x_a - iG_ab)·h' of degree <= max_degree."""
    n = table.size
    out = []
    for a, b in itertools.combinations(range(n), 2):
        for la in range(max_degree - 1):
            for lb in range(max_degree - 1 - la):
                for h in itertools.product(range(n), repeat=la):
                    for h2 in itertools.product(range(n), repeat=lb):
                        out.append({h + (a, b) + h2: 1.0, h + (b, a) + h2: -1.0,
                                    h + h2: -1j * table.G[a, b]})
    return out


def ideal_membership_oracle(f, max_degree=ORACLE_MAX_DEGREE, budget=ORACLE_MAX_GENERATORS, tol=1e-10):
    """Brute-force membership test in the CCR ideal by least squares."""
    if f.max_degree > max_degree or max_degree > ORACLE_MAX_DEGREE or f.table.size > budget \
            or budget > ORACLE_MAX_GENERATORS:
        raise ValueError("oracle scale exceeded")
    if f.is_zero():
        return True
    index = {w: i for i, w in enumerate(_words(f.table.size, max_degree))}
    span = ideal_spanning_set(f.table, max_degree)
    if not span:
        return False
    M = np.zeros((len(index), len(span)), complex)
    for j, g in enumerate(span):
        for w, c in g.items():
            M[index[w], j] += c
    v = np.zeros(len(index), complex)
    for w, c in f.terms.items():
        v[index[w]] = c
    x = np.linalg.lstsq(M, v, rcond=None)[0]
    res = np.linalg.norm(M @ x - v)
    return bool(res <= tol * max(1.0, np.linalg.norm(v)))


# ---------------------------------------------------------------------------
# source shift and commutators
# ---------------------------------------------------------------------------

def source_shift(f, direction="forward", sources=None):
    """Unit-preserving homomorphism x_i -> x_i - s_i (forward) or x_i + s_i (inverse)."""
    s = f.table.sources if sources is None else np.asarray(sources, complex)
    if s is None:
        raise ValueError("missing pairings")
    if direction not in ("forward", "inverse"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = -1.0 if direction == "forward" else 1.0
    out = defaultdict(complex)
    for w, c in f.terms.items():
        # expand Π (x_{w_k} + sign s_{w_k}) over subsets of kept letters
        for keep in itertools.product((True, False), repeat=len(w)):
            amp = c
            for k, kept in enumerate(keep):
                if not kept:
                    amp *= sign * s[w[k]]
            if amp != 0:
                out[tuple(x for x, kept in zip(w, keep) if kept)] += amp
    return TensorElement(f.table, out)


def ccr_generator(table, a, b):
    """(-iG(a,b), 0, x_a⊗x_b - x_b⊗x_a, 0, ...)."""
    return (word_element(table, a, b) - word_element(table, b, a)
            + TensorElement(table, {(): -1j * table.G[a, b]}))


def commutator_reduce(table, i, j, trace=None):
    return symmetrize(word_element(table, i, j) - word_element(table, j, i), trace)


def random_element(table, rng, max_degree=4, n_terms=5, symmetric=False):
    terms = {}
    for _ in range(n_terms):
        N = int(rng.integers(0, max_degree + 1))
        w = tuple(int(x) for x in rng.integers(0, table.size, size=N))
        terms[w] = terms.get(w, 0) + complex(rng.normal(), rng.normal())
    f = TensorElement(table, terms)
    if symmetric:
        out = defaultdict(complex)
        for w, c in f.terms.items():
            perms = list(itertools.permutations(w))
            for p in perms:
                out[p] += c / len(perms)
        f = TensorElement(table, out)
    return f


def random_table(rng, n=3, sources=False):
    A = rng.normal(size=(n, n))
    G = A - A.T
    s = rng.normal(size=n) + 1j * rng.normal(size=n) if sources else None
    return SymbolTable([f"x{i}" for i in range(n)], G, s)
