"""Odd N-cycle quantum realizations and their noncontextual bounds.

The realization places N unit vectors a_i on a regular cone around the z axis
so that adjacent vectors are orthogonal; b_i completes each context
{a_i, b_i, a_{i+1}} to an orthonormal basis.  Classical bounds come from
exhaustive enumeration of deterministic outcome assignments, never from the
closed-form constants they are expected to equal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantBreachError, UnsupportedScenarioError

ORTHO_TOL = 1e-12

_HANDLE = np.array([0.0, 0.0, 1.0])
_HANDLE.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Quantum realization of an odd cycle of length ``n``.

    ``a_vectors`` and ``b_vectors`` are (n, 3) float arrays; ``handle`` is the
    symmetry-axis state (0, 0, 1) that maximally violates both inequalities.
    """

    n: int
    a_vectors: np.ndarray
    b_vectors: np.ndarray
    handle: np.ndarray

    def a(self, i: int) -> np.ndarray:
        return self.a_vectors[i % self.n]

    def b(self, i: int) -> np.ndarray:
        return self.b_vectors[i % self.n]


@dataclass(frozen=True)
class ClassicalBounds:
    """Facet constants of the noncontextual polytope, found by enumeration."""

    alpha_bound: int
    beta_bound: int
    correlator_bound: int


def build_scenario(n: int) -> Scenario:
    """Construct the odd-n realization.

    a_i = K (cos(i*pi*(n-1)/n), sin(i*pi*(n-1)/n), sqrt(cos(pi/n))) with
    K = 1/sqrt(1 + cos(pi/n)).  b_i is the unit normal of span{a_i, a_{i+1}}
    with a deterministic sign: positive third component, or if that vanishes,
    positive first nonzero component.
    """
    if n % 2 == 0 or n < 5:
        raise UnsupportedScenarioError(
            f"unsupported scenario: n must be odd and >= 5, got {n} "
            "(n=3 admits no quantum violation)"
        )
    k = 1.0 / math.sqrt(1.0 + math.cos(math.pi / n))
    z = k * math.sqrt(math.cos(math.pi / n))
    a = np.empty((n, 3))
    for i in range(n):
        theta = i * math.pi * (n - 1) / n
        a[i] = (k * math.cos(theta), k * math.sin(theta), z)
    b = np.empty((n, 3))
    for i in range(n):
        c = np.cross(a[i], a[(i + 1) % n])
        c /= np.linalg.norm(c)
        b[i] = _fix_sign(c)
    a.setflags(write=False)
    b.setflags(write=False)
    sc = Scenario(n=n, a_vectors=a, b_vectors=b, handle=_HANDLE)
    _validate(sc)
    return sc


def _fix_sign(v: np.ndarray) -> np.ndarray:
    if v[2] < 0.0:
        return -v
    if v[2] == 0.0:
        for x in v:
            if x != 0.0:
                return -v if x < 0.0 else v
    return v


def _validate(sc: Scenario) -> None:
    n, a, b = sc.n, sc.a_vectors, sc.b_vectors
    nxt = np.roll(np.arange(n), -1)
    checks = [
        np.abs(np.linalg.norm(a, axis=1) - 1.0).max(),
        np.abs(np.linalg.norm(b, axis=1) - 1.0).max(),
        np.abs(np.einsum("ij,ij->i", a, a[nxt])).max(),
        np.abs(np.einsum("ij,ij->i", b, a)).max(),
        np.abs(np.einsum("ij,ij->i", b, a[nxt])).max(),
    ]
    if max(checks) > ORTHO_TOL:
        raise InvariantBreachError(
            f"scenario invariant breach for n={n}: worst residual {max(checks):.3e}"
        )
    # each context must resolve the identity: an orthonormal-basis check
    eye = np.eye(3)
    for i in range(n):
        s = (
            np.outer(a[i], a[i])
            + np.outer(b[i], b[i])
            + np.outer(a[(i + 1) % n], a[(i + 1) % n])
        )
        if np.abs(s - eye).max() > ORTHO_TOL:
            raise InvariantBreachError(
                f"context {i} of n={n} does not resolve the identity"
            )


def enumerate_classical_bounds(n: int) -> ClassicalBounds:
    """Exhaustively enumerate deterministic assignments for the length-n cycle.

    Two separate enumerations, both exact over integers:

    * all 2**n choices of o_i in {-1, +1}; ``correlator_bound`` is the minimum
      of sum_i o_i * o_{i+1};
    * all 0/1 assignments to the 2n vertices {a_i} and {b_i} with exactly one
      true vertex per context {a_i, b_i, a_{i+1}}.  Requiring exactly one true
      a- or b-vertex per context forces b_i = (1 - a_i)(1 - a_{i+1}) and rules
      out adjacent true a's, so the admissible set is exactly the independent
      sets of the cycle with the b-values they induce.
    """
    if n % 2 == 0 or n < 3:
        raise UnsupportedScenarioError(
            f"unsupported scenario: enumeration needs odd n >= 3, got {n}"
        )
    shifts = np.arange(n, dtype=np.uint64)
    alpha_max = -1
    beta_min = n + 1
    corr_min = n + 1
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n), dtype=np.uint64)
        bits = ((masks[:, None] >> shifts) & 1).astype(np.int64)
        nxt = np.roll(bits, -1, axis=1)
        # +-1 correlator: sum o_i o_{i+1} = n - 2 * (number of disagreements)
        corr = n - 2 * (bits ^ nxt).sum(axis=1)
        corr_min = min(corr_min, int(corr.min()))
        ok = ~np.any(bits & nxt, axis=1)
        if ok.any():
            alpha_max = max(alpha_max, int(bits[ok].sum(axis=1).max()))
            beta = ((1 - bits[ok]) & (1 - nxt[ok])).sum(axis=1)
            beta_min = min(beta_min, int(beta.min()))
    return ClassicalBounds(
        alpha_bound=alpha_max, beta_bound=beta_min, correlator_bound=corr_min
    )


def scenario_to_json(sc: Scenario) -> str:
    """Serialize as {"n": ..., "a": [[...]], "b": [[...]]} with 17-significant-digit floats."""

    def vec(v: np.ndarray) -> str:
        return "[" + ", ".join(format(x, ".17g") for x in v) + "]"

    def mat(m: np.ndarray) -> str:
        return "[" + ", ".join(vec(row) for row in m) + "]"

    return '{"n": %d, "a": %s, "b": %s}' % (sc.n, mat(sc.a_vectors), mat(sc.b_vectors))


def scenario_from_json(text: str) -> Scenario:
    data = json.loads(text)
    n = int(data["n"])
    a = np.asarray(data["a"], dtype=float)
    b = np.asarray(data["b"], dtype=float)
    if a.shape != (n, 3) or b.shape != (n, 3):
        raise InvariantBreachError(
            f"serialized scenario shape mismatch: n={n}, a{a.shape}, b{b.shape}"
        )
    a.setflags(write=False)
    b.setflags(write=False)
    sc = Scenario(n=n, a_vectors=a, b_vectors=b, handle=_HANDLE)
    _validate(sc)
    return sc
