import numpy as np
import pytest

from ptstl.errors import BudgetError
from ptstl.formula import (
    ATOMS,
    And,
    CtrlEQ,
    Historically,
    Not,
    Or,
    Previously,
    Shift,
    Since,
    StateGT,
    TrueConst,
    walk,
)
from ptstl.monitor import eval_signal
from ptstl.rewrite import cnf_formula, is_guard, normalize, push_negations, to_cnf, to_x_normal_form

from generators import random_formula, random_trace

p, q, r = StateGT(0, 5.0), CtrlEQ(0, 1), CtrlEQ(1, 2)


def _key_set(clauses):
    return {frozenset(c.literals) for c in clauses}


class TestXNormalForm:
    def test_historically(self):
        assert to_x_normal_form(Historically(p, (2, 1))) == And(Shift(1, p), Shift(2, p))

    def test_previously_zero_window(self):
        assert to_x_normal_form(Previously(p, (0, 0))) == p

    def test_shift_distributes(self):
        assert to_x_normal_form(Shift(2, And(p, q))) == And(Shift(2, p), Shift(2, q))

    def test_shape(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            xnf = to_x_normal_form(random_formula(rng, 3))
            for node in walk(xnf):
                assert not isinstance(node, (Since, Previously, Historically))
                if isinstance(node, Shift):
                    assert isinstance(node.arg, ATOMS + (TrueConst,))

    def test_budget(self):
        with pytest.raises(BudgetError):
            to_x_normal_form(Since(p, q, (2000, 0)), budget=10_000)


class TestNegations:
    def test_negated_shift_carries_guard(self):
        # the unguarded X^2 !p would be wrong at k < 2
        assert push_negations(Not(Shift(2, p))) == Or(Shift(2, Not(p)), Not(Shift(2, TrueConst())))

    def test_double_negation(self):
        assert push_negations(Not(Not(p))) == p

    def test_de_morgan(self):
        assert push_negations(Not(And(p, q))) == Or(Not(p), Not(q))

    def test_rejects_temporal(self):
        with pytest.raises(ValueError):
            push_negations(Previously(p, (1, 0)))

    def test_negations_sit_on_literals(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            nnf = push_negations(to_x_normal_form(random_formula(rng, 3)))
            for node in walk(nnf):
                if isinstance(node, Not):
                    assert isinstance(node.arg, ATOMS + (TrueConst,)) or is_guard(node)


class TestCnf:
    def test_already_cnf(self):
        assert _key_set(to_cnf(And(Or(p, q), r))) == {frozenset({p, q}), frozenset({r})}

    def test_distribution(self):
        assert _key_set(to_cnf(Or(p, And(q, r)))) == {frozenset({p, q}), frozenset({p, r})}

    def test_pure_control_flag(self):
        phi = And(Or(CtrlEQ(0, 0), Shift(1, CtrlEQ(0, 1))), StateGT(0, 30))
        flags = {frozenset(c.literals): c.pure_control for c in to_cnf(phi)}
        assert flags[frozenset({CtrlEQ(0, 0), Shift(1, CtrlEQ(0, 1))})] is True
        assert flags[frozenset({StateGT(0, 30)})] is False

    def test_tautology_and_contradiction(self):
        assert to_cnf(Or(p, Not(p))) == []
        assert cnf_formula(to_cnf(Or(p, Not(p)))) == TrueConst()


def test_every_stage_preserves_semantics():
    rng = np.random.default_rng(12)
    for _ in range(250):
        phi = random_formula(rng, int(rng.integers(0, 4)))
        tr = random_trace(rng, 31)
        ref = eval_signal(tr, phi)
        xnf = to_x_normal_form(phi)
        nnf = push_negations(xnf)
        cnf = cnf_formula(normalize(phi))
        assert np.array_equal(eval_signal(tr, xnf), ref)
        assert np.array_equal(eval_signal(tr, nnf), ref)
        assert np.array_equal(eval_signal(tr, cnf), ref)
