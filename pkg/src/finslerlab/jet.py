"""Forward-mode automatic differentiation with truncated multivariate Taylor jets.

A :class:`Jet` stores the Taylor coefficients of a function of ``nvars``
variables, truncated at total degree ``order``.  Arithmetic and the elementary
functions propagate the coefficients exactly, so every partial derivative up
to ``order`` is available without finite differencing.  Coefficient arrays may
carry leading batch dimensions; all operations broadcast over them.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


class JetSpace:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``.

    Monomials are sorted by total degree, then lexicographically, so the
    space of a lower order is a prefix of this one and truncation is a slice.
    """

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monos = []
        for deg in range(order + 1):
            block = [m for m in itertools.product(range(deg + 1), repeat=nvars) if sum(m) == deg]
            monos.extend(sorted(block, reverse=True))
        self.monomials = monos
        self.size = len(monos)
        self.index = {m: i for i, m in enumerate(monos)}
        self.degree = np.array([sum(m) for m in monos])

        pairs = []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                if self.degree[i] + self.degree[j] <= order:
                    out = self.index[tuple(p + q for p, q in zip(a, b))]
                    pairs.append((out, i, j))
        pairs.sort()
        pairs = np.array(pairs, dtype=np.intp)
        self._mul_a = pairs[:, 1]
        self._mul_b = pairs[:, 2]
        # every output monomial has at least the pair (m, 1) so reduceat is safe
        self._mul_starts = np.searchsorted(pairs[:, 0], np.arange(self.size))

        self.factorial = np.array([math.prod(math.factorial(k) for k in m) for m in monos], dtype=float)

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = a[..., self._mul_a] * b[..., self._mul_b]
        return np.add.reduceat(prod, self._mul_starts, axis=-1)

    @lru_cache(maxsize=None)
    def diff_map(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        """Source indices and factors mapping d/d(var) into the order-1 space."""
        lower = jet_space(self.nvars, self.order - 1)
        src = np.empty(lower.size, dtype=np.intp)
        fac = np.empty(lower.size)
        for k, m in enumerate(lower.monomials):
            up = list(m)
            up[var] += 1
            src[k] = self.index[tuple(up)]
            fac[k] = up[var]
        return src, fac

    def multi_index(self, variables) -> int:
        m = [0] * self.nvars
        for v in variables:
            m[v] += 1
        return self.index[tuple(m)]

    def variable(self, var: int, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (self.size,))
        c[..., 0] = value
        if self.order >= 1:
            c[..., 1 + var] = 1.0
        return Jet(self, c)

    def constant(self, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (self.size,))
        c[..., 0] = value
        return Jet(self, c)


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    if order < 0:
        raise ValueError("jet order must be non-negative")
    return JetSpace(nvars, order)


def variables(values, order: int) -> list["Jet"]:
    """Independent jet variables seeded at ``values`` (one per entry)."""
    values = [np.asarray(v, dtype=float) for v in values]
    space = jet_space(len(values), order)
    return [space.variable(i, v) for i, v in enumerate(values)]


@lru_cache(maxsize=None)
def _tensor_index(space: JetSpace, variables: tuple, k: int):
    idx = np.empty((len(variables),) * k, dtype=np.intp)
    for pos in itertools.product(range(len(variables)), repeat=k):
        idx[pos] = space.multi_index([variables[p] for p in pos])
    return idx, space.factorial[idx]


def derivatives(j: "Jet", variables, k: int) -> np.ndarray:
    """All k-th partials over ``variables`` as an array of shape batch + (m,)*k."""
    idx, fac = _tensor_index(j.space, tuple(variables), k)
    return j.c[..., idx] * fac


def _binom_series(p: float, order: int) -> list[float]:
    out = [1.0]
    for k in range(1, order + 1):
        out.append(out[-1] * (p - k + 1) / k)
    return out


class Jet:
    __slots__ = ("space", "c")
    __array_priority__ = 100

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.c = coeffs

    # ---- inspection ----
    @property
    def value(self):
        return self.c[..., 0]

    @property
    def order(self) -> int:
        return self.space.order

    def partial(self, *variables: int):
        """Exact partial derivative, e.g. ``jet.partial(0, 0, 2)`` for f_xxz."""
        k = self.space.multi_index(variables)
        return self.c[..., k] * self.space.factorial[k]

    def diff(self, var: int) -> "Jet":
        src, fac = self.space.diff_map(var)
        return Jet(jet_space(self.space.nvars, self.order - 1), self.c[..., src] * fac)

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        sp = jet_space(self.space.nvars, order)
        return Jet(sp, self.c[..., : sp.size])

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, value={self.value!r})"

    # ---- arithmetic ----
    def _coerce(self, other) -> "Jet | None":
        if isinstance(other, Jet):
            if other.space is not self.space:
                if other.space.nvars != self.space.nvars:
                    raise ValueError("jets live in different variable spaces")
                k = min(self.order, other.order)
                return other.truncate(k)
            return other
        return None

    def _add_const(self, v, sign=1.0) -> "Jet":
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(self.c.shape[:-1], v.shape)
        c = np.array(np.broadcast_to(sign * self.c, shape + (self.space.size,)))
        c[..., 0] += v
        return Jet(self.space, c)

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return self._add_const(other)
        a = self.truncate(o.order)
        return Jet(a.space, a.c + o.c)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return self._add_const(-np.asarray(other, dtype=float))
        a = self.truncate(o.order)
        return Jet(a.space, a.c - o.c)

    def __rsub__(self, other):
        return self._add_const(other, sign=-1.0)

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return Jet(self.space, self.c * np.asarray(other, dtype=float)[..., None])
        a = self.truncate(o.order)
        return Jet(a.space, a.space.multiply(a.c, o.c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return Jet(self.space, self.c / np.asarray(other, dtype=float)[..., None])
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(log(self) * p)
        p = float(p)
        if p == int(p) and 0 <= p <= 4:
            out = self.space.constant(np.ones(self.c.shape[:-1]))
            for _ in range(int(p)):
                out = out * self
            return out
        c0 = self.value
        series = _binom_series(p, self.order)
        return self._compose([s * c0 ** (p - k) for k, s in enumerate(series)])

    # ---- composition with a univariate function ----
    def _compose(self, coeffs) -> "Jet":
        """f(self) given f^(k)(c0)/k! for k = 0..order."""
        h = self.c.copy()
        h[..., 0] = 0.0
        out = np.zeros(np.broadcast_shapes(self.c.shape[:-1], np.shape(coeffs[-1])) + (self.space.size,))
        out[..., 0] = coeffs[-1]
        for k in range(self.order - 1, -1, -1):
            out = self.space.multiply(out, h)
            out[..., 0] += coeffs[k]
        return Jet(self.space, out)

    def reciprocal(self) -> "Jet":
        c0 = self.value
        return self._compose([(-1.0) ** k / c0 ** (k + 1) for k in range(self.order + 1)])


# ---- elementary functions dispatching on jets or plain numbers ----

def exp(u):
    if isinstance(u, Jet):
        e = np.exp(u.value)
        return u._compose([e / math.factorial(k) for k in range(u.order + 1)])
    return np.exp(u)


def log(u):
    if isinstance(u, Jet):
        c0 = u.value
        coeffs = [np.log(c0)] + [(-1.0) ** (k + 1) / (k * c0 ** k) for k in range(1, u.order + 1)]
        return u._compose(coeffs)
    return np.log(u)


def sin(u):
    if isinstance(u, Jet):
        s, c = np.sin(u.value), np.cos(u.value)
        cyc = [s, c, -s, -c]
        return u._compose([cyc[k % 4] / math.factorial(k) for k in range(u.order + 1)])
    return np.sin(u)


def cos(u):
    if isinstance(u, Jet):
        s, c = np.sin(u.value), np.cos(u.value)
        cyc = [c, -s, -c, s]
        return u._compose([cyc[k % 4] / math.factorial(k) for k in range(u.order + 1)])
    return np.cos(u)


def sqrt(u):
    if isinstance(u, Jet):
        return u ** 0.5
    return np.sqrt(u)


def value(u):
    return u.value if isinstance(u, Jet) else u


# ---- matrices of jets, stored as a single Jet with trailing (n, n) batch axes ----

def stack(items) -> Jet:
    """Pack a (nested) list of jets from one space into a single Jet."""

    def build(x):
        if isinstance(x, Jet):
            return x.c, 0
        parts = [build(e) for e in x]
        depth = parts[0][1]
        arrays = np.broadcast_arrays(*[p[0] for p in parts])
        return np.stack(arrays, axis=-(depth + 2)), depth + 1

    space = _first_space(items)
    return Jet(space, build(items)[0])


def _first_space(items):
    while not isinstance(items, Jet):
        items = items[0]
    return items.space


def unstack(j: Jet) -> list:
    """Inverse of :func:`stack` for the outermost batch axis."""
    return [Jet(j.space, j.c[..., k, :]) for k in range(j.c.shape[-2])]


def matmul(a: Jet, b: Jet) -> Jet:
    """Matrix product over the last two batch axes."""
    sp = a.space
    pa = a.c[..., :, :, None, sp._mul_a]
    pb = b.c[..., None, :, :, sp._mul_b]
    prod = (pa * pb).sum(axis=-3)
    return Jet(sp, np.add.reduceat(prod, sp._mul_starts, axis=-1))


def matvec(a: Jet, v: Jet) -> Jet:
    sp = a.space
    prod = (a.c[..., :, :, sp._mul_a] * v.c[..., None, :, sp._mul_b]).sum(axis=-2)
    return Jet(sp, np.add.reduceat(prod, sp._mul_starts, axis=-1))


def inverse(a: Jet) -> Jet:
    """Inverse of a jet-valued matrix via the terminating Neumann series."""
    sp = a.space
    a0 = a.c[..., 0]
    x0 = np.linalg.inv(a0)
    nil = a.c.copy()
    nil[..., 0] = 0.0
    x = sp.constant(x0)
    step = Jet(sp, -np.einsum("...ij,...jkm->...ikm", x0, nil))
    out = x
    term = x
    for _ in range(sp.order):
        term = matmul(step, term)
        out = Jet(sp, out.c + term.c)
    return out
