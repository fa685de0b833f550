"""Test-side constructions that do not go through the package's solvers.

Additive losses are built by summing weights directly, risks are brute-force
sums over joint cells, and marginal matrices are rebuilt from their
definition, so assertions compare two independent routes.
"""
import itertools
import random
from fractions import Fraction

from cfrisk.spaces import LossTensor, Spaces


def rand_frac(rng, lo=-6, hi=6, den=4):
    return Fraction(rng.randint(lo * den, hi * den), rng.randint(1, den))


def additive_loss(spaces, rng, intercept=True):
    """Random loss of the form sum_k w_k(d, y_k) + v(y), plus the weights used."""
    K, M = spaces.K, spaces.M
    w = {x: {(k, d, y): rand_frac(rng) for k in range(K) for d in range(K) for y in range(M)}
         for x in spaces.strata}
    v = {x: {y: (rand_frac(rng) if intercept else Fraction(0)) for y in spaces.y_vectors} for x in spaces.strata}

    def f(d, y, x):
        return sum(w[x][(k, d, y[k])] for k in range(K)) + v[x][y]
    return LossTensor.from_function(spaces, f), w, v


def random_joint(spaces, rng, scale=30):
    out = {}
    for x in spaces.strata:
        a = [rng.randint(1, scale) for _ in range(spaces.N)]
        out[x] = [Fraction(t, sum(a)) for t in a]
    return out


def brute_risk(loss, p, spaces, x):
    total = Fraction(0)
    for d in range(spaces.K):
        for y in itertools.product(range(spaces.M), repeat=spaces.K):
            total += loss(d, y, x) * p[x][d * spaces.M ** spaces.K + sum(v * spaces.M ** (spaces.K - 1 - i) for i, v in enumerate(y))]
    return total


def brute_marginals(p_vec, spaces):
    """Pr(D*=d, Y(k)=y) by summing over the other coordinates."""
    K, M = spaces.K, spaces.M
    out = {}
    for i, (d, y) in enumerate(itertools.product(range(K), itertools.product(range(M), repeat=K))):
        for k in range(K):
            out[(d, k, y[k])] = out.get((d, k, y[k]), Fraction(0)) + p_vec[i]
    return out


def definition_matrix(K, M):
    """Marginal matrix rows straight from the definition."""
    cells = [(d, y) for d in range(K) for y in itertools.product(range(M), repeat=K)]
    return [[int(dd == d and yy[k] == y) for dd, yy in cells] for d in range(K) for k in range(K) for y in range(M)]


def binary_spaces(K=2):
    return Spaces(K, 2)
