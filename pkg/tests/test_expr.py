"""Expression kernel: grammar, exact derivatives, evaluation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osculator.expr import (
    EvaluationError,
    Evaluator,
    ParseError,
    const,
    differentiate,
    evaluate,
    free_variables,
    parse,
    substitute,
    var,
)
from osculator.tensor import finite_difference

VARS = ("x1", "x2", "y1_1")


def random_expression(rng, depth):
    """Random smooth expression over VARS; log and sqrt get positive arguments."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return VARS[rng.integers(len(VARS))]
        return f"{rng.uniform(-2, 2):.3f}"
    kind = rng.integers(8)
    a = random_expression(rng, depth - 1)
    if kind < 4:
        b = random_expression(rng, depth - 1)
        return f"({a}) {'+-*/'[kind]} ({b})" if kind != 3 else f"({a}) / (1.5 + ({b})^2)"
    if kind == 4:
        return f"({a})^{rng.integers(1, 4)}"
    if kind == 5:
        return f"{rng.choice(['sin', 'cos'])}({a})"
    if kind == 6:
        return f"exp(0.3*sin({a}))"
    return f"{rng.choice(['log', 'sqrt'])}(1 + ({a})^2)"


def corpus(count=200, seed=5):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        text = random_expression(rng, 4)
        point = rng.uniform(-1, 1, size=len(VARS))
        out.append((text, VARS[rng.integers(len(VARS))], point))
    return out


def fd_oracle(e, name, point):
    idx = VARS.index(name)
    return finite_difference(lambda p: evaluate(e, dict(zip(VARS, p))), point, idx, h=1e-6)


class TestParse:
    def test_tree_shape(self):
        e = parse("x1^2 * sin(u1)")
        assert e.op == "mul"
        left, right = e.args
        assert left.op == "pow" and left.args[0] is var("x1")
        assert right.op == "func" and right.value == "sin" and right.args[0] is var("u1")

    def test_constant(self):
        assert parse("1") is const(1.0)

    def test_incomplete_input_offset(self):
        with pytest.raises(ParseError) as exc:
            parse("x1 +")
        assert exc.value.offset == 4

    @pytest.mark.parametrize(
        "text, offset",
        [("x1 * (x2", 8), ("foo(x1)", 0), ("x1 $ 2", 3), ("x1^1.5", 3), ("x1 x2", 3)],
    )
    def test_error_offsets(self, text, offset):
        with pytest.raises(ParseError) as exc:
            parse(text)
        assert exc.value.offset == offset

    def test_precedence(self):
        env = {"x1": 3.0}
        assert evaluate(parse("-x1^2"), env) == -9.0
        assert evaluate(parse("2*x1+1"), env) == 7.0
        assert evaluate(parse("2*(x1+1)"), env) == 8.0
        assert evaluate(parse("x1/3/2"), env) == 0.5

    def test_hash_consing(self):
        assert parse("x1*sin(x2)") is parse("x1 * sin( x2 )")

    def test_free_variables(self):
        assert free_variables(parse("x1*y1_2 + cos(u3)")) == {"x1", "y1_2", "u3"}


class TestDerivative:
    def test_power_rule_structure(self):
        assert str(differentiate(parse("x1^2"), "x1")) == "2*x1^1"

    def test_independent_variable(self):
        assert differentiate(parse("x1"), "y1_2") is const(0.0)

    def test_product_value(self):
        d = differentiate(parse("sin(x1)*x2"), "x1")
        env = {"x1": 0.3, "x2": 2.0}
        expected = finite_difference(lambda p: evaluate(parse("sin(x1)*x2"), {"x1": p[0], "x2": 2.0}), [0.3], 0)
        assert evaluate(d, env) == pytest.approx(1.910672978251212, abs=1e-12)
        assert abs(evaluate(d, env) - expected) < 1e-8

    def test_generated_corpus_against_finite_differences(self):
        worst = 0.0
        for text, name, point in corpus():
            e = parse(text)
            exact = evaluate(differentiate(e, name), dict(zip(VARS, point)))
            approx = fd_oracle(e, name, point)
            worst = max(worst, abs(exact - approx) / max(1.0, abs(exact)))
        assert worst < 1e-6

    def test_mixed_partials_commute(self):
        e = parse("exp(x1*x2) * sin(x1 - y1_1^2)")
        a = differentiate(differentiate(e, "x1"), "y1_1")
        b = differentiate(differentiate(e, "y1_1"), "x1")
        env = {"x1": 0.4, "x2": -0.7, "y1_1": 0.2}
        assert evaluate(a, env) == pytest.approx(evaluate(b, env), rel=1e-13)

    def test_substitution_chain_rule(self):
        e = parse("sin(x1)^2")
        inner = parse("u1^3")
        composed = substitute(e, {"x1": inner})
        d = evaluate(differentiate(composed, "u1"), {"u1": 0.8})
        expected = 2 * math.sin(0.8**3) * math.cos(0.8**3) * 3 * 0.8**2
        assert d == pytest.approx(expected, rel=1e-14)


class TestEvaluate:
    def test_square(self):
        assert evaluate(parse("x1^2"), {"x1": 3}) == 9.0

    def test_division_by_zero(self):
        with pytest.raises(EvaluationError):
            evaluate(parse("1/x1"), {"x1": 0})

    @pytest.mark.parametrize("text, env", [("log(x1)", {"x1": -1.0}), ("sqrt(x1)", {"x1": -0.5})])
    def test_domain_errors(self, text, env):
        with pytest.raises(EvaluationError):
            evaluate(parse(text), env)

    def test_unbound_variable(self):
        with pytest.raises(EvaluationError):
            evaluate(parse("x1 + x2"), {"x1": 1.0})

    def test_inverse_functions(self):
        assert abs(evaluate(parse("exp(log(x1))"), {"x1": 2.5}) - 2.5) < 1e-14

    def test_deterministic(self):
        e = parse(random_expression(np.random.default_rng(3), 5))
        env = {"x1": 0.1, "x2": 0.2, "y1_1": 0.3}
        values = {evaluate(e, env) for _ in range(5)}
        values.add(Evaluator(env)(e))
        assert len(values) == 1


expressions = st.builds(
    lambda seed, depth: random_expression(np.random.default_rng(seed), depth),
    st.integers(0, 2**32 - 1),
    st.integers(1, 4),
)
points = st.lists(st.floats(-1, 1), min_size=len(VARS), max_size=len(VARS))


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(expressions, expressions, st.floats(-3, 3), points)
    def test_linearity(self, a, b, c, p):
        ea, eb = parse(a), parse(b)
        env = dict(zip(VARS, p))
        combo = differentiate(ea + const(c) * eb, "x1")
        expected = evaluate(differentiate(ea, "x1"), env) + c * evaluate(differentiate(eb, "x1"), env)
        assert evaluate(combo, env) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(expressions, points)
    def test_printed_form_reparses(self, text, p):
        e = parse(text)
        env = dict(zip(VARS, p))
        assert evaluate(parse(str(e)), env) == pytest.approx(evaluate(e, env), rel=1e-12, abs=1e-12)
