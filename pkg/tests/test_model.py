from __future__ import annotations

import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccagen.errors import ModelError
from ccagen.model import (ParameterSpec, SutModel, clause_to_forbidden_tuples, parse_casa,
                          parse_casa_clauses, parse_native, serialize_native, to_casa)

from .conftest import grid_model, random_small_model


class TestNative:
    def test_drupal_fixture(self, drupal):
        assert drupal.cardinalities == [3, 3, 3, 2]
        assert len(drupal.constraints) == 3
        assert drupal.labels([2, 2, 0, 1]) == ["macOS", "MS Edge", "MySQL", "Nginx"]

    def test_case_study_fixture(self, case_study):
        assert sorted(case_study.cardinalities, reverse=True) == [7, 6, 3, 3] + [2] * 8
        assert len(case_study.constraints) == 6

    def test_zero_constraints(self):
        doc = {"parameters": [{"name": "A", "values": ["x", "y"]}, {"name": "B", "values": ["u", "v"]}]}
        model = parse_native(json.dumps(doc))
        assert model.constraints == ()

    def test_unknown_value(self):
        doc = {"parameters": [{"name": "Browser", "values": ["Chrome", "Edge"]},
                              {"name": "OS", "values": ["Linux", "Windows"]}],
               "constraints": [[{"parameter": "Browser", "value": "Safari"}]]}
        with pytest.raises(ModelError, match="unknown value 'Safari'"):
            parse_native(json.dumps(doc))

    def test_syntax_error_has_position(self):
        with pytest.raises(ModelError) as info:
            parse_native('{\n  "parameters": [,]\n}')
        assert info.value.line == 2
        assert info.value.column is not None

    @pytest.mark.parametrize("doc, match", [
        ({"parameters": [{"name": "A", "values": ["x", "y"]}]}, "at least 2 parameters"),
        ({"parameters": [{"name": "A", "values": ["x"]}, {"name": "B", "values": ["u", "v"]}]},
         "at least 2 values"),
        ({"parameters": [{"name": "A", "values": ["x", "y"]}, {"name": "A", "values": ["u", "v"]}]},
         "duplicate parameter"),
        ({"parameters": [{"name": "A", "values": ["x", "y"]}, {"name": "B", "values": ["u", "v"]}],
          "constraints": [[{"parameter": "A", "value": "x"}, {"parameter": "A", "value": "y"}]]},
         "duplicate pair"),
        ({"parameters": [{"name": "A", "values": ["x", "y"]}, {"name": "B", "values": ["u", "v"]}],
          "constraints": [[]]}, "non-empty"),
    ])
    def test_validation(self, doc, match):
        with pytest.raises(ModelError, match=match):
            parse_native(json.dumps(doc))

    def test_round_trip(self, drupal, case_study):
        for model in (drupal, case_study):
            assert parse_native(serialize_native(model)) == model

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_round_trip_random(self, seed):
        model = random_small_model(seed)
        assert parse_native(serialize_native(model)) == model


class TestGlobalIndex:
    def test_bijection(self, case_study):
        seen = []
        for p, spec in enumerate(case_study.parameters):
            for v in range(spec.cardinality):
                g = case_study.global_index(p, v)
                assert case_study.from_global(g) == (p, v)
                seen.append(g)
        assert seen == list(range(case_study.total_values))

    def test_out_of_range(self, drupal):
        with pytest.raises(ModelError, match="out of range"):
            drupal.from_global(drupal.total_values)


def truth_table_tuples(clause, model: SutModel):
    """Minimal forbidden tuples of a clause, from a truth table over its parameters only."""
    params = sorted({model.from_global(g)[0] for _, g in clause})
    falsifying = set()
    for values in itertools.product(*(range(model.cardinalities[p]) for p in params)):
        assign = dict(zip(params, values))
        sat = False
        for positive, g in clause:
            p, v = model.from_global(g)
            if (assign[p] == v) == positive:
                sat = True
        if not sat:
            falsifying.add(frozenset(assign.items()))
    return falsifying


class TestCasa:
    MODEL = "2\n3\n2 2 2\n"

    def test_model_and_clause(self):
        model, strength = parse_casa(self.MODEL, "1\n2\n- 1 - 4\n")
        assert strength == 2
        assert model.cardinalities == [2, 2, 2]
        # global 1 is (p0, v1); global 4 is (p2, v0)
        assert model.constraints == (frozenset({(0, 1), (2, 0)}),)

    def test_empty_constraints(self):
        model, _ = parse_casa(self.MODEL, "")
        assert model.constraints == ()
        model, _ = parse_casa(self.MODEL, "0\n")
        assert model.constraints == ()

    def test_index_out_of_range(self):
        with pytest.raises(ModelError, match="index out of range") as info:
            parse_casa(self.MODEL, "1\n2\n- 1\n- 6\n")
        assert info.value.line == 4

    def test_malformed_count(self):
        with pytest.raises(ModelError) as info:
            parse_casa("2\nthree\n2 2 2\n")
        assert info.value.line == 2
        with pytest.raises(ModelError, match="end of file"):
            parse_casa("2\n4\n2 2 2\n")

    def test_bad_sign(self):
        with pytest.raises(ModelError, match="expected '\\+' or '-'"):
            parse_casa(self.MODEL, "1\n1\n* 1\n")

    def test_all_negative_clause_is_one_tuple(self):
        model = grid_model([2, 3, 2])
        assert clause_to_forbidden_tuples([(False, 0), (False, 3)], model) == {frozenset({(0, 0), (1, 1)})}

    def test_positive_literal_expands(self):
        # +a on a 3-valued parameter: falsified by its two other values
        model = grid_model([2, 3, 2])
        a = model.global_index(1, 0)
        b = model.global_index(0, 1)
        got = clause_to_forbidden_tuples([(True, a), (False, b)], model)
        assert got == {frozenset({(1, 1), (0, 1)}), frozenset({(1, 2), (0, 1)})}

    def test_tautology(self):
        model = grid_model([2, 2])
        assert clause_to_forbidden_tuples([(True, 0), (True, 1)], model) == set()

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_clause_matches_truth_table(self, data):
        cards = data.draw(st.lists(st.integers(2, 4), min_size=2, max_size=4))
        model = grid_model(cards)
        literal = st.tuples(st.booleans(), st.integers(0, model.total_values - 1))
        clause = data.draw(st.lists(literal, min_size=1, max_size=4))
        assert clause_to_forbidden_tuples(clause, model) == truth_table_tuples(clause, model)

    def test_native_casa_round_trip(self, drupal):
        model_text, cons_text = to_casa(drupal)
        assert cons_text.splitlines()[0] == "3"
        assert all(line.count("-") == 2 for line in cons_text.splitlines()[2::2])
        back, strength = parse_casa(model_text, cons_text)
        assert strength == 2
        assert back.cardinalities == drupal.cardinalities
        assert set(back.constraints) == set(drupal.constraints)

    def test_clause_parse_literals(self):
        assert parse_casa_clauses("1\n2\n+ 0 - 3\n", 6) == [[(True, 0), (False, 3)]]


def test_parameter_spec_cardinality():
    assert ParameterSpec("A", ["x", "y", "z"]).cardinality == 3
