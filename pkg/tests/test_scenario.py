import itertools
import math

import numpy as np
import pytest

from ncycle import (
    InvariantBreachError,
    UnsupportedScenarioError,
    build_scenario,
    enumerate_classical_bounds,
    scenario_from_json,
    scenario_to_json,
)

from conftest import oracle_a_vectors, oracle_handle_overlap_sq

ODD_NS = list(range(5, 21, 2))


def test_first_vector_matches_closed_form():
    sc = build_scenario(5)
    k = 1.0 / math.sqrt(1.0 + math.cos(math.pi / 5))
    expected = np.array([k, 0.0, k * math.sqrt(math.cos(math.pi / 5))])
    assert np.abs(sc.a(0) - expected).max() < 1e-15
    # headline values
    assert sc.a(0)[0] == pytest.approx(0.7435, abs=5e-5)
    assert sc.a(0)[2] == pytest.approx(0.6687, abs=5e-5)


@pytest.mark.parametrize("n", ODD_NS)
def test_vectors_match_oracle(n):
    sc = build_scenario(n)
    assert np.abs(sc.a_vectors - oracle_a_vectors(n)).max() < 1e-14


@pytest.mark.parametrize("n", ODD_NS)
def test_adjacent_orthogonality(n):
    sc = build_scenario(n)
    for i in range(n):
        assert abs(np.dot(sc.a(i), sc.a(i + 1))) < 1e-12


def test_handle_overlap_n7():
    sc = build_scenario(7)
    got = float(np.dot(sc.a(0), sc.handle)) ** 2
    assert got == pytest.approx(oracle_handle_overlap_sq(7), abs=1e-14)
    assert got == pytest.approx(0.4740, abs=5e-5)


@pytest.mark.parametrize("n", ODD_NS)
def test_contexts_are_orthonormal_bases(n):
    sc = build_scenario(n)
    for i in range(n):
        basis = np.stack([sc.a(i), sc.b(i), sc.a(i + 1)])
        assert np.abs(basis @ basis.T - np.eye(3)).max() < 1e-12


@pytest.mark.parametrize("n", ODD_NS)
def test_gram_depends_only_on_index_difference(n):
    sc = build_scenario(n)
    gram = sc.a_vectors @ sc.a_vectors.T
    for d in range(n):
        vals = [gram[i, (i + d) % n] for i in range(n)]
        assert max(vals) - min(vals) < 1e-12


def test_b_sign_convention_is_deterministic():
    # the cross product of adjacent cone vectors always points upward, so the
    # convention resolves to a positive third component
    for n in ODD_NS:
        sc = build_scenario(n)
        assert (sc.b_vectors[:, 2] > 0).all()


@pytest.mark.parametrize("n", [3, 4, 6, 1, -5, 0])
def test_build_rejects_unsupported(n):
    with pytest.raises(UnsupportedScenarioError):
        build_scenario(n)


def test_enumerate_rejects_even():
    with pytest.raises(UnsupportedScenarioError):
        enumerate_classical_bounds(6)


def test_bounds_n5():
    cb = enumerate_classical_bounds(5)
    assert cb.correlator_bound == -3
    assert cb.alpha_bound == 2
    assert cb.beta_bound == 1


def test_bounds_n3():
    cb = enumerate_classical_bounds(3)
    assert (cb.alpha_bound, cb.beta_bound, cb.correlator_bound) == (1, 1, -1)


@pytest.mark.parametrize("n", ODD_NS)
def test_bounds_closed_forms(n):
    cb = enumerate_classical_bounds(n)
    assert cb.alpha_bound == (n - 1) // 2
    assert cb.beta_bound == 1
    assert cb.correlator_bound == 2 - n


def brute_force_hypergraph(n):
    """Fully independent oracle: try all 2^(2n) assignments to the a- and
    b-vertices and keep those with exactly one true vertex per context."""
    best_alpha = -1
    best_beta = n + 1
    admissible = 0
    for bits in itertools.product((0, 1), repeat=2 * n):
        a, b = bits[:n], bits[n:]
        if all(a[i] + b[i] + a[(i + 1) % n] == 1 for i in range(n)):
            admissible += 1
            best_alpha = max(best_alpha, sum(a))
            best_beta = min(best_beta, sum(b))
    return best_alpha, best_beta, admissible


@pytest.mark.parametrize("n", [5, 7])
def test_bounds_against_independent_brute_force(n):
    alpha, beta, admissible = brute_force_hypergraph(n)
    assert admissible > 0
    cb = enumerate_classical_bounds(n)
    assert cb.alpha_bound == alpha
    assert cb.beta_bound == beta


def test_n7_alpha_bound_adjudication():
    # the exclusivity polytope allows three simultaneous a-outcomes on the
    # 7-cycle: (n-1)/2 = 3, not (n-2)/2
    assert enumerate_classical_bounds(7).alpha_bound == 3


def test_brute_force_correlator_n5():
    best = min(
        sum(o[i] * o[(i + 1) % 5] for i in range(5))
        for o in itertools.product((-1, 1), repeat=5)
    )
    assert best == enumerate_classical_bounds(5).correlator_bound == -3


def test_per_context_truth_count_is_n():
    # every admissible assignment marks exactly one vertex per context true,
    # so the per-context totals add to n
    n = 5
    for bits in itertools.product((0, 1), repeat=2 * n):
        a, b = bits[:n], bits[n:]
        if all(a[i] + b[i] + a[(i + 1) % n] == 1 for i in range(n)):
            assert sum(a[i] + b[i] + a[(i + 1) % n] for i in range(n)) == n


def test_json_round_trip():
    sc = build_scenario(7)
    text = scenario_to_json(sc)
    back = scenario_from_json(text)
    assert back.n == 7
    assert np.array_equal(back.a_vectors, sc.a_vectors)
    assert np.array_equal(back.b_vectors, sc.b_vectors)


def test_json_uses_17_significant_digits():
    sc = build_scenario(5)
    text = scenario_to_json(sc)
    assert '"n": 5' in text
    # every float is rendered with %.17g, which round-trips binary64 exactly
    assert format(sc.a_vectors[0, 0], ".17g") in text
    assert format(sc.b_vectors[2, 1], ".17g") in text


def test_validation_catches_tampering():
    sc = build_scenario(5)
    text = scenario_to_json(sc).replace(
        format(sc.a_vectors[0, 0], ".17g"), "1.0", 1
    )
    with pytest.raises(InvariantBreachError):
        scenario_from_json(text)
