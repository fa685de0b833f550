import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from cfrisk.additivity import (
    FAMILY_FORMULAS,
    AdditiveDecomposition,
    NotAdditive,
    Regime,
    Variant,
    binary_weight_family,
    build_structure_matrix,
    classify,
    cross_column_balance,
    decompose,
    decomposition_from_document,
    decomposition_to_document,
    dump_decomposition,
    load_decomposition,
    standard_constraints_hold,
    within_column_balance,
)
from cfrisk.errors import RestrictionViolated
from cfrisk.losses import builtin_decomposition, builtin_example
from cfrisk.spaces import LossTensor, Spaces

from helpers import additive_loss

# Published K = M = 2 structure matrix: rows l(0;00), l(1;00), l(0;10),
# l(1;10), l(0;01), l(1;01), l(0;11), l(1;11); columns own-outcome weights,
# then the remaining weights, then the four intercepts.
PUBLISHED_GRID = [
    [1, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0],
    [0, 0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0],
    [0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1, 0],
    [1, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0],
    [0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 1],
    [0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1],
]

SP = Spaces(2, 2)


def test_published_grid_and_rank():
    m = build_structure_matrix(SP, Variant.FULL).published_layout()
    assert [list(r) for r in m.rows] == PUBLISHED_GRID
    assert m.rank() == 7
    assert m.row_labels[:2] == ("l(0;0,0)", "l(1;0,0)")
    assert m.column_labels[0] == "omega_0(0,0)"
    assert m.column_labels[-1] == "varpi(1,1)"


def test_restricted_rank_and_layout():
    full = build_structure_matrix(SP, Variant.FULL).published_layout()
    restricted = build_structure_matrix(SP, Variant.RESTRICTED).published_layout()
    assert [list(r) for r in restricted.rows] == [row[:8] for row in PUBLISHED_GRID]
    assert restricted.rank() == 6
    assert full.shape == (8, 12)


@pytest.mark.parametrize("K, M", [(2, 2), (2, 3), (3, 2), (3, 3)])
@pytest.mark.parametrize("variant", list(Variant))
def test_rank_matches_sympy(K, M, variant):
    m = build_structure_matrix(Spaces(K, M), variant)
    assert m.rank() == sympy.Matrix(m.rows).rank()


def test_restricted_dimensions_k3():
    assert build_structure_matrix(Spaces(3, 2), Variant.RESTRICTED).shape == (24, 18)


@pytest.mark.parametrize("K, M", [(2, 2), (3, 3)])
def test_row_structure(K, M):
    sp = Spaces(K, M)
    m = build_structure_matrix(sp, Variant.FULL)
    for row, (d, y) in zip(m.rows, sp.cells):
        ones = [c for c, v in enumerate(row) if v]
        expected = sorted([sp.weight_index(k, d, y[k]) for k in range(K)] + [sp.n_weights + sp.y_index(y)])
        assert ones == expected


ASYM = dict(lR0=1, lR1=0, lH0=3, lH1=0, l0=0, l1=0, c0=0, c1=0)


def test_asymmetric_residual_is_frozen():
    # Left-null vector of the structure matrix, derived by hand:
    # +1 at l(1;00), l(0;01), l(0;10), l(1;11) and -1 at the other four cells.
    # Its inner product with the loss is -2 and its squared norm 8.
    n = {(0, (0, 0)): -1, (0, (0, 1)): 1, (0, (1, 0)): 1, (0, (1, 1)): -1,
         (1, (0, 0)): 1, (1, (0, 1)): -1, (1, (1, 0)): -1, (1, (1, 1)): 1}
    result = decompose(builtin_example("asymmetric", ASYM))
    assert isinstance(result, NotAdditive)
    assert result.failing_strata == ["all"]
    expected = [Fraction(-n[c], 4) for c in SP.cells]
    assert list(result.residual["all"]) == expected


def test_zero_loss_decomposes_to_zero():
    dec = decompose(LossTensor.zeros(SP))
    assert all(v == 0 for v in dec.weights["all"]) and not dec.has_intercept


def test_classification_general_weights_up_to_free_directions():
    p = dict(l0=1, l1=0, lt0=0, lt1="1/2", c0=0, c1="1/10")
    loss = builtin_example("classification-general", p)
    dec = decompose(loss, Variant.RESTRICTED)
    closed = builtin_decomposition("classification-general", p)
    assert closed.reconstruct() == loss
    assert dec.reconstruct() == loss
    # the difference of two solutions lies in the span of the free directions
    diff = [a - b for a, b in zip(closed.weights["all"], dec.weights["all"])]
    basis = [list(v[: SP.n_weights]) for v in dec.free_directions]
    assert sympy.Matrix(basis + [diff]).rank() == sympy.Matrix(basis).rank()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=8, max_size=8))
def test_balance_equalities_match_image_membership(vals):
    loss = LossTensor(SP, {"all": vals})
    restricted = not isinstance(decompose(loss, Variant.RESTRICTED), NotAdditive)
    full = not isinstance(decompose(loss, Variant.FULL), NotAdditive)
    assert restricted == within_column_balance(loss)
    assert full == cross_column_balance(loss)
    if standard_constraints_hold(loss):
        assert restricted


def test_additive_reconstruction_random_instances():
    rng = random.Random(11)
    for i in range(1000):
        K, M = rng.choice([(2, 2), (2, 3), (3, 2), (3, 3)])
        sp = Spaces(K, M, ("a", "b") if i % 5 == 0 else ("all",))
        loss, _, _ = additive_loss(sp, rng, intercept=bool(i % 2))
        dec = decompose(loss, Variant.FULL)
        assert isinstance(dec, AdditiveDecomposition)
        assert dec.reconstruct() == loss


def test_free_directions_are_kernel_directions():
    rng = random.Random(3)
    loss, _, _ = additive_loss(Spaces(3, 2), rng)
    dec = decompose(loss)
    moved = dec.with_free_params({"all": [rng.randint(-3, 3) for _ in dec.free_directions]})
    assert moved.reconstruct() == loss
    assert len(dec.free_params) == len(dec.free_directions)


def test_classify_regimes():
    assert classify(builtin_example("classification", dict(l0=1, lt1=1, c0=0, c1="1/2"))).regime is Regime.EXACT
    pure_intercept = LossTensor.from_function(SP, lambda d, y, x: int(y == (0, 0)))
    label = classify(pure_intercept)
    assert label.regime is Regime.CONSTANT_ONLY
    assert label.witness.has_intercept
    assert classify(builtin_example("asymmetric", ASYM)).regime is Regime.UNIDENTIFIABLE
    rng = random.Random(0)
    generic = LossTensor(SP, {"all": [rng.randint(-100, 100) for _ in range(8)]})
    assert classify(generic).regime is Regime.UNIDENTIFIABLE


def test_all_four_decision0_cells_shifted_is_exact():
    # Raising every l(0; y) by one is a shift of w_0(0, .) and stays exact.
    loss = LossTensor.from_function(SP, lambda d, y, x: int(d == 0))
    assert classify(loss).regime is Regime.EXACT


def test_classify_weakest_stratum_wins():
    sp = Spaces(2, 2, ("good", "bad"))
    asym = builtin_example("asymmetric", ASYM)
    loss = LossTensor(sp, {"good": [0] * 8, "bad": asym.values["all"]})
    label = classify(loss)
    assert label.regime is Regime.UNIDENTIFIABLE
    assert label.per_stratum == {"good": Regime.EXACT, "bad": Regime.UNIDENTIFIABLE}
    assert label.witness.failing_strata == ["bad"]


def test_intercept_never_changes_full_membership():
    rng = random.Random(5)
    for _ in range(50):
        loss, _, _ = additive_loss(SP, rng)
        shift = LossTensor.from_function(SP, lambda d, y, x: (y[0] + 2 * y[1]) ** 2)
        assert classify(loss + shift).regime in (Regime.EXACT, Regime.CONSTANT_ONLY)


def test_binary_family_reconstructs():
    rng = random.Random(9)
    for _ in range(100):
        loss, _, _ = additive_loss(SP, rng)
        fam = binary_weight_family(loss)
        params = [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(5)]
        assert fam.evaluate(*params).reconstruct() == loss
    assert len(FAMILY_FORMULAS) == 12


def test_binary_family_standard_example():
    loss = builtin_example("classification-general", dict(l0=1, l1=0, lt0=0, lt1=0, c0=0, c1="1/2"))
    dec = binary_weight_family(loss).evaluate()
    assert dec.weight(0, 0, 0) == loss(0, (0, 1)) == 1
    assert dec.weight(1, 1, 1) == loss(1, (1, 1)) == Fraction(1, 2)


def test_binary_family_rejects_cross_column_violation():
    with pytest.raises(RestrictionViolated):
        binary_weight_family(builtin_example("asymmetric", ASYM))


def test_decomposition_document_roundtrip(tmp_path):
    rng = random.Random(4)
    loss, _, _ = additive_loss(Spaces(3, 2, ("p", "q")), rng)
    dec = decompose(loss)
    text = dump_decomposition(dec)
    back = load_decomposition(text)
    assert back.reconstruct() == loss
    assert back.free_params == dec.free_params
    assert decomposition_to_document(decomposition_from_document(decomposition_to_document(dec))) == \
        decomposition_to_document(dec)


@pytest.mark.parametrize("name, params", [
    ("classification", dict(l0=1, lt1="1/2", c0="1/5", c1="1/10")),
    ("classification-general", dict(l0=2, l1="1/3", lt0=1, lt1="1/2", c0=0, c1="1/10")),
    ("asymmetric", dict(lR0=2, lR1=1, lH0=3, lH1=2, l0="1/2", l1=0, c0=0, c1="1/5")),
    ("trichotomous", dict(l0=1, l1=0, c0=0, c1="1/10", c2="3/10", r0="1/3", r1="1/5")),
])
def test_builtin_closed_forms_reconstruct(name, params):
    loss = builtin_example(name, params)
    assert builtin_decomposition(name, params).reconstruct() == loss
