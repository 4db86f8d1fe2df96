"""Exact per-player inequality sequences, asymptotes, and K_max tables.

Three independent computation paths produce the same per-player values:

* :func:`protocol1_sequence` propagates the aggregated outcome-probability
  vector with the 3x3 bistochastic transition matrix (complete measurements);
* :func:`recurrence_sequence` uses the affine one-step relation
  ``value_k = slope * value_{k-1} + offset`` of the dichotomic protocols, with
  coefficients extracted from the average channel;
* :func:`channel_sequence` iterates the average measurement channel directly
  and traces against the functional operator (the oracle path).

All sequences contract geometrically onto the common asymptote n/3, so
crossing points (K_max) are found exactly by extension with the stored
contraction factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DecompositionFailureError,
    InvariantBreachError,
    NoConvergenceError,
    PairingError,
    SymmetryBreachError,
)
from .protocols import (
    InequalityId,
    ProtocolId,
    Verdict,
    evaluate,
    functional_operator,
)
from .quantum import (
    DensityMatrix,
    average_protocol_channel,
    born_probability,
    handle_state,
    projector_onto,
    random_pure_state,
)
from .scenario import Scenario, build_scenario

#: Defensive cap on sequence extension; geometric contraction always crosses
#: far earlier, so hitting the cap indicates a logic bug, not slow convergence.
EXTENSION_CAP = 10_000

_V_ALPHA = np.array([0.5, 0.0, 0.5])
_V_BETA = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True, eq=False)
class MarkovMatrix:
    """Bistochastic transition matrix of the complete-measurement protocol.

    Fully determined by the scalar ``t`` through the symmetry pattern
    ``[[t, 1-2t, t], [1-2t, 4t-1, 1-2t], [t, 1-2t, t]]``.
    """

    t: float
    m: np.ndarray

    def __post_init__(self) -> None:
        t = self.t
        pattern = np.array(
            [
                [t, 1 - 2 * t, t],
                [1 - 2 * t, 4 * t - 1, 1 - 2 * t],
                [t, 1 - 2 * t, t],
            ]
        )
        if not np.array_equal(pattern, self.m):
            raise InvariantBreachError("transition matrix deviates from its t-pattern")
        if not 0.25 <= t <= 0.5:
            raise InvariantBreachError(f"t={t!r} outside [1/4, 1/2]")
        if np.abs(self.m.sum(axis=0) - 1.0).max() > 1e-12:
            raise InvariantBreachError("transition matrix is not bistochastic")
        u = np.full(3, 1.0 / 3.0)
        if np.abs(self.m @ u - u).max() > 1e-12:
            raise InvariantBreachError("uniform vector is not a fixed point")
        self.m.setflags(write=False)

    @property
    def decay_rate(self) -> float:
        """Second-largest eigenvalue 6t - 2; the third eigenvalue is 0."""
        return 6.0 * self.t - 2.0


@dataclass(frozen=True)
class RecurrenceCoeffs:
    """Affine one-step coefficients of a dichotomic protocol.

    ``lambda0``/``lambda1`` are the block eigenvalues of the functional
    operator (in-plane doublet and handle axis).
    """

    slope: float
    offset: float
    lambda0: float
    lambda1: float

    @property
    def fixed_point(self) -> float:
        return self.offset / (1.0 - self.slope)


@dataclass(frozen=True, eq=False)
class SequenceResult:
    """Per-player inequality values with violation verdicts and crossing points.

    ``values[i]`` is player ``k = i + 1``.  ``kmax_fixed`` and ``kmax_uniform``
    describe the full geometric sequence: if the requested length stops while
    still violating, the sequence is extended internally (exactly, via
    ``decay_rate``) until the crossing is found.
    """

    n: int
    protocol: ProtocolId
    ineq: InequalityId
    values: tuple[float, ...]
    verdicts: tuple[bool, ...]
    kmax_fixed: int
    kmax_uniform: int
    asymptote: float
    decay_rate: float

    def verdict(self, k: int) -> Verdict:
        return evaluate(self.values[k - 1], self.ineq, self.n)


def t_coefficient(n: int) -> float:
    """(1/n) sum_i <a_0, a_i>^2; lies strictly between 1/3 and 1/2 for n >= 5."""
    return _t_from_scenario(build_scenario(n))


def _t_from_scenario(sc: Scenario) -> float:
    overlaps = sc.a_vectors @ sc.a_vectors[0]
    return float(np.sum(overlaps**2)) / sc.n


def markov_matrix(n: int) -> MarkovMatrix:
    """Build the t-patterned transition matrix and verify it against the
    definitional average of squared-overlap matrices for every anchor choice."""
    sc = build_scenario(n)
    t = _t_from_scenario(sc)
    mm = MarkovMatrix(
        t=t,
        m=np.array(
            [
                [t, 1 - 2 * t, t],
                [1 - 2 * t, 4 * t - 1, 1 - 2 * t],
                [t, 1 - 2 * t, t],
            ]
        ),
    )
    if not 1.0 / 3.0 < t < 0.5:
        raise InvariantBreachError(f"t={t!r} outside (1/3, 1/2) for n={n}")
    worst = 0.0
    for anchor in range(n):
        worst = max(worst, np.abs(_markov_from_overlaps(sc, anchor) - mm.m).max())
    if worst > 1e-10:
        raise SymmetryBreachError(
            f"symmetry breach: overlap-built transition matrix deviates by {worst:.3e}"
        )
    return mm


def _markov_from_overlaps(sc: Scenario, anchor: int) -> np.ndarray:
    """(1/n) sum over the current player's choice of the 3x3 squared-overlap
    matrix between its outcome vectors and the previous player's (``anchor``)."""

    def outcome_vectors(i: int) -> np.ndarray:
        return np.stack([sc.a(i), sc.b(i), sc.a(i + 1)])

    cols = outcome_vectors(anchor)
    total = np.zeros((3, 3))
    for i in range(sc.n):
        rows = outcome_vectors(i)
        total += (rows @ cols.T) ** 2
    return total / sc.n


def context_probabilities(sc: Scenario, state: DensityMatrix, i: int) -> np.ndarray:
    """Outcome distribution (p(a_i), p(b_i), p(a_{i+1})) of context i."""
    p = np.array(
        [
            born_probability(state, projector_onto(sc.a(i))),
            born_probability(state, projector_onto(sc.b(i))),
            born_probability(state, projector_onto(sc.a(i + 1))),
        ]
    )
    if abs(p.sum() - 1.0) > 1e-12:
        raise InvariantBreachError(f"context {i} probabilities sum to {p.sum()!r}")
    return p


def aggregate_probability_vector(sc: Scenario, state: DensityMatrix) -> np.ndarray:
    """Sum of the per-context distributions; its entries total n."""
    q = sum(context_probabilities(sc, state, i) for i in range(sc.n))
    if abs(q.sum() - sc.n) > 1e-10:
        raise InvariantBreachError(f"aggregate probability vector sums to {q.sum()!r}")
    return q


def _check_pairing(protocol: ProtocolId, ineq: InequalityId) -> None:
    ok = (
        protocol is ProtocolId.FULL
        or (protocol is ProtocolId.A_ONLY and ineq is InequalityId.ALPHA)
        or (protocol is ProtocolId.B_ONLY and ineq is InequalityId.BETA)
    )
    if not ok:
        raise PairingError(
            f"pairing error: protocol {protocol.value!r} does not evaluate "
            f"inequality {ineq.value!r}"
        )


def protocol1_sequence(
    sc: Scenario, ineq: InequalityId, initial: DensityMatrix, k_max: int
) -> SequenceResult:
    """Per-player values under the complete-measurement protocol.

    The first player's aggregated outcome vector comes from Born probabilities;
    later players follow by repeated application of the transition matrix, and
    each value is the contraction with (1/2, 0, 1/2) or (0, 1, 0).
    """
    if k_max < 1:
        raise InvariantBreachError(f"k_max must be >= 1, got {k_max}")
    mm = markov_matrix(sc.n)
    v = _V_ALPHA if ineq is InequalityId.ALPHA else _V_BETA
    q = aggregate_probability_vector(sc, initial)
    values = []
    for _ in range(k_max):
        values.append(float(v @ q))
        q = mm.m @ q
    return _finish(sc.n, ProtocolId.FULL, ineq, values, mm.decay_rate)


def extract_recurrence(
    sc: Scenario, protocol: ProtocolId, ineq: InequalityId
) -> RecurrenceCoeffs:
    """Slope and offset of the affine relation trace(F Lambda(rho)) =
    slope * trace(F rho) + offset.

    The average channel is self-adjoint, so its image of the functional
    operator decomposes in span{F, identity}; the two block eigenvalue sectors
    give a 2x2 linear system for (slope, offset).  The result is cross-checked
    against the closed forms implied by the block spectrum:
    z = (2 lambda0^2 + lambda1^2)/n, u = n + z - 2(lambda0 + lambda1),
    slope = (z + u)/n, offset = 2 lambda0 lambda1 / n.
    """
    if protocol is ProtocolId.FULL:
        raise PairingError("pairing error: recurrence coefficients need a dichotomic protocol")
    _check_pairing(protocol, ineq)
    fop = functional_operator(sc, ineq)
    lam0, lam1 = fop.sector_eigenvalues(sc.handle)
    lam = average_protocol_channel(sc, protocol)
    image = lam.on_matrix(fop.op)
    e1 = float(sc.handle @ image @ sc.handle)
    e0 = (float(np.trace(image)) - e1) / 2.0
    slope = (e0 - e1) / (lam0 - lam1)
    offset = e1 - slope * lam1
    residual = np.abs(image - slope * fop.op - offset * np.eye(3)).max()
    if residual > 1e-10:
        raise DecompositionFailureError(
            f"decomposition failure: channel image leaves span{{F, I}} by {residual:.3e}"
        )
    z = (2.0 * lam0**2 + lam1**2) / sc.n
    u = sc.n + z - 2.0 * (lam0 + lam1)
    if abs(slope - (z + u) / sc.n) > 1e-10 or abs(offset - 2.0 * lam0 * lam1 / sc.n) > 1e-10:
        raise InvariantBreachError(
            "extracted recurrence coefficients disagree with their closed forms"
        )
    if not abs(slope) < 1.0:
        raise InvariantBreachError(f"recurrence slope {slope!r} is not contracting")
    return RecurrenceCoeffs(slope=slope, offset=offset, lambda0=lam0, lambda1=lam1)


def recurrence_sequence(
    sc: Scenario,
    protocol: ProtocolId,
    ineq: InequalityId,
    initial: DensityMatrix,
    k_max: int,
) -> SequenceResult:
    """Per-player values of a dichotomic protocol via the affine recurrence."""
    if k_max < 1:
        raise InvariantBreachError(f"k_max must be >= 1, got {k_max}")
    coeffs = extract_recurrence(sc, protocol, ineq)
    fop = functional_operator(sc, ineq)
    values = [fop.value(initial.m)]
    for _ in range(k_max - 1):
        values.append(coeffs.slope * values[-1] + coeffs.offset)
    return _finish(sc.n, protocol, ineq, values, coeffs.slope)


def channel_sequence(
    sc: Scenario,
    protocol: ProtocolId,
    ineq: InequalityId,
    initial: DensityMatrix,
    k_max: int,
) -> SequenceResult:
    """Oracle path: values[k] = trace(F Lambda^(k-1)(rho)) by direct iteration."""
    if k_max < 1:
        raise InvariantBreachError(f"k_max must be >= 1, got {k_max}")
    _check_pairing(protocol, ineq)
    fop = functional_operator(sc, ineq)
    lam = average_protocol_channel(sc, protocol)
    m = initial.m
    values = []
    for _ in range(k_max):
        values.append(fop.value(m))
        m = lam.on_matrix(m)
    if protocol is ProtocolId.FULL:
        rate = markov_matrix(sc.n).decay_rate
    else:
        rate = extract_recurrence(sc, protocol, ineq).slope
    return _finish(sc.n, protocol, ineq, values, rate)


def _finish(
    n: int,
    protocol: ProtocolId,
    ineq: InequalityId,
    values: list[float],
    rate: float,
) -> SequenceResult:
    verdicts = [evaluate(v, ineq, n).violates for v in values]
    return SequenceResult(
        n=n,
        protocol=protocol,
        ineq=ineq,
        values=tuple(values),
        verdicts=tuple(verdicts),
        kmax_fixed=_kmax_fixed(values, rate, ineq, n),
        kmax_uniform=_kmax_uniform(values, rate, ineq, n),
        asymptote=n / 3.0,
        decay_rate=rate,
    )


def _extended(values: list[float] | tuple[float, ...], rate: float, n: int):
    """Yield the sequence values, continuing exactly past the stored range."""
    asym = n / 3.0
    last = None
    for v in values:
        last = v
        yield v
    for _ in range(EXTENSION_CAP):
        last = asym + rate * (last - asym)
        yield last
    raise NoConvergenceError(
        f"no convergence: sequence still undecided after {EXTENSION_CAP} players"
    )


def _kmax_fixed(values, rate: float, ineq: InequalityId, n: int) -> int:
    """Largest player index whose own value still violates (0 if none).

    Values contract monotonically onto n/3, so violations form a prefix."""
    kmax = 0
    for k, v in enumerate(_extended(values, rate, n), start=1):
        if evaluate(v, ineq, n).violates:
            kmax = k
        else:
            return kmax
    return kmax


def _kmax_uniform(values, rate: float, ineq: InequalityId, n: int) -> int:
    """Largest K whose position-averaged value (1/K) sum_{k<=K} still violates."""
    kmax = 0
    total = 0.0
    for k, v in enumerate(_extended(values, rate, n), start=1):
        total += v
        if evaluate(total / k, ineq, n).violates:
            kmax = k
        else:
            return kmax
    return kmax


def kmax_uniform(seq: SequenceResult) -> int:
    """Largest environment size still violating under randomized access order.

    Auto-extends past the stored values using the sequence's own contraction
    factor; capped defensively at EXTENSION_CAP.
    """
    return _kmax_uniform(seq.values, seq.decay_rate, seq.ineq, seq.n)


@dataclass(frozen=True)
class Table1Row:
    """K_max values for one cycle length: fixed player order and randomized
    order, for the complete protocol (worse of the two inequalities is taken,
    i.e. the max) and each dichotomic protocol."""

    n: int
    fixed_full: int
    fixed_a: int
    fixed_b: int
    uniform_full: int
    uniform_a: int
    uniform_b: int

    def as_tuple(self) -> tuple[int, int, int, int, int, int]:
        return (
            self.fixed_full,
            self.fixed_a,
            self.fixed_b,
            self.uniform_full,
            self.uniform_a,
            self.uniform_b,
        )


def table1(n_list) -> list[Table1Row]:
    """K_max table rows for the handle initial state."""
    rows = []
    for n in n_list:
        sc = build_scenario(n)
        h = handle_state()
        full = [
            protocol1_sequence(sc, ineq, h, k_max=8)
            for ineq in (InequalityId.ALPHA, InequalityId.BETA)
        ]
        seq_a = recurrence_sequence(sc, ProtocolId.A_ONLY, InequalityId.ALPHA, h, k_max=8)
        seq_b = recurrence_sequence(sc, ProtocolId.B_ONLY, InequalityId.BETA, h, k_max=8)
        rows.append(
            Table1Row(
                n=n,
                fixed_full=max(s.kmax_fixed for s in full),
                fixed_a=seq_a.kmax_fixed,
                fixed_b=seq_b.kmax_fixed,
                uniform_full=max(s.kmax_uniform for s in full),
                uniform_a=seq_a.kmax_uniform,
                uniform_b=seq_b.kmax_uniform,
            )
        )
    return rows


@dataclass(frozen=True)
class OptimalityReport:
    """Outcome of comparing the handle state's sequence against random states."""

    passed: bool
    worst_margin: float
    trials: int
    k_checked: int


def optimal_initial_state_check(
    sc: Scenario,
    protocol: ProtocolId,
    ineq: InequalityId,
    trials: int,
    seed: int,
) -> OptimalityReport:
    """Check that the handle state dominates random pure states at every player.

    For the upper-bounded inequality the handle value must be >= each sampled
    state's value at the same k (<= for the lower-bounded one), within 1e-10.
    A failure is reported, not raised.
    """
    if trials < 1:
        raise InvariantBreachError(f"trials must be >= 1, got {trials}")
    _check_pairing(protocol, ineq)
    k_checked = 30
    rng = np.random.default_rng(seed)

    def seq(state: DensityMatrix) -> tuple[float, ...]:
        if protocol is ProtocolId.FULL:
            return protocol1_sequence(sc, ineq, state, k_checked).values
        return recurrence_sequence(sc, protocol, ineq, state, k_checked).values

    handle_vals = np.array(seq(handle_state()))
    sign = 1.0 if ineq is InequalityId.ALPHA else -1.0
    worst = np.inf
    for _ in range(trials):
        trial_vals = np.array(seq(random_pure_state(rng)))
        worst = min(worst, float((sign * (handle_vals - trial_vals)).min()))
    return OptimalityReport(
        passed=worst >= -1e-10,
        worst_margin=worst,
        trials=trials,
        k_checked=k_checked,
    )
