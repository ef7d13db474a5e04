import math

import pytest
from hypothesis import given, settings, strategies as st

from fracsym import expr as ex
from fracsym.errors import PreconditionError
from fracsym.fracop import FracSpec, SeriesControl, rl_quadrature
from fracsym.jet import jet_of
from fracsym.parse import parse
from fracsym.prolong import (
    VectorField,
    classical_phi_sigma,
    corollary_phi_p_1d,
    corollary_phi_p_2d,
    general_phi_p,
    mu_p,
    osler_expand_phi,
    prolonged,
    rl_u,
)
from fracsym.special import gamma, gen_binomial, recip_gamma

from strategies import SECTIONS, fractional_orders, terminal_fields

CTL = SeriesControl(60, 1e-13)


def field(xi, phi, axes=("x",)):
    return VectorField.of(axes, {a: parse(s) if isinstance(s, str) else s for a, s in xi.items()}, phi)


def jet1(src, x, K=12):
    return jet_of(parse(src), {"x": x}, K)


class TestVectorField:
    def test_rejects_foreign_variables(self):
        with pytest.raises(ValueError):
            VectorField.of(("x",), {"x": "y"}, 0)

    def test_characteristic(self):
        v = field({"x": "x"}, "u")
        assert ex.is_zero(ex.sub(v.characteristic(), parse("u - x*u_x")))

    def test_json_round_trip(self):
        v = field({"t": "t", "x": "2*x"}, "u", ("t", "x"))
        back = VectorField.from_json(v.to_json())
        assert back.xi == v.xi and back.phi == v.phi

    def test_sum_and_scale(self):
        v = field({"x": "x"}, "u") + field({"x": "1"}, "0").scaled(3)
        assert ex.is_zero(ex.sub(v.xi[0], parse("x + 3")))


class TestClassical:
    def test_first_prolongation_without_xi(self):
        v = field({}, "x*u^2")
        coef = classical_phi_sigma(v, (0,))
        assert ex.is_zero(ex.sub(coef, parse("u^2 + 2*x*u*u_x")))

    def test_scaling_x(self):
        assert ex.is_zero(ex.sub(classical_phi_sigma(field({"x": "x"}, "0"), (0,)), parse("-u_x")))

    def test_scaling_u(self):
        assert ex.is_zero(ex.sub(classical_phi_sigma(field({}, "u"), (0, 0)), parse("u_xx")))

    def test_mixed_index(self):
        v = field({"t": "t", "x": "2*x"}, "0", ("t", "x"))
        # a scaling of weight (1, 2) acts on u_tx with weight -3
        assert ex.is_zero(ex.sub(classical_phi_sigma(v, (0, 1)), parse("-3*u_tx")))


class TestGeneral:
    def test_scaling_field_acts_linearly(self):
        j = jet1("exp(x/2)", 0.8)
        spec = FracSpec.single("x", 0.5)
        assert general_phi_p(field({}, "u"), spec, j, CTL) == pytest.approx(rl_u(j, 0.5, ctl=CTL), rel=1e-12)

    def test_x_scaling(self):
        j = jet1("exp(x/2)", 0.8)
        for p in (0.5, 1.5):
            spec = FracSpec.single("x", p)
            assert general_phi_p(field({"x": "x"}, "0"), spec, j, CTL) == pytest.approx(-p * rl_u(j, p, ctl=CTL), rel=1e-10)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_classical_recovery(self, p):
        v = field({"x": "x^2 + u"}, "x*u^2 + sin(u)")
        j = jet1("cos(x/2) + x", 0.7)
        expected = j.evaluate(classical_phi_sigma(v, (0,) * p))
        assert general_phi_p(v, FracSpec.single("x", float(p)), j, CTL) == pytest.approx(expected, rel=1e-12)

    def test_section_mode_agrees(self):
        v = field({"x": "x*(1 + u/4)"}, "u/2 + x*u")
        j = jet1("exp(x/2)", 0.9)
        spec = FracSpec.single("x", 0.5)
        a = general_phi_p(v, spec, j, CTL, mode="jet")
        b = general_phi_p(v, spec, j, mode="section", nodes=96)
        assert a == pytest.approx(b, rel=1e-8)

    def test_section_mode_needs_section(self):
        j = jet1("x", 1.0)
        bare = type(j)(j.space, j.base, j.values, j.K)
        with pytest.raises(PreconditionError):
            general_phi_p(field({}, "u"), FracSpec.single("x", 0.5), bare, mode="section")

    @settings(max_examples=20, deadline=None)
    @given(terminal_fields(), terminal_fields(), st.floats(-2, 2), st.sampled_from(SECTIONS))
    def test_linear_in_field(self, f1, f2, c, src):
        v1, v2 = field({"x": f1[0]}, f1[1]), field({"x": f2[0]}, f2[1])
        j = jet1(src, 0.8)
        spec = FracSpec.single("x", 0.5)
        lhs = general_phi_p(v1 + v2.scaled(ex.Const(c)), spec, j, CTL)
        rhs = general_phi_p(v1, spec, j, CTL) + c * general_phi_p(v2, spec, j, CTL)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


class TestCorollary1d:
    def test_translation(self):
        # xi constant: only the fractional total derivative of phi survives
        j = jet1("exp(x/2)", 0.8)
        v = field({"x": "1"}, "x*u")
        direct = general_phi_p(field({}, "x*u"), FracSpec.single("x", 0.5), j, CTL)
        assert corollary_phi_p_1d(v, 0.5, 0.0, j, CTL) == pytest.approx(direct, rel=1e-12)

    def test_x_scaling(self):
        j = jet1("exp(x/2)", 0.8)
        assert corollary_phi_p_1d(field({"x": "x"}, "0"), 0.5, 0.0, j, CTL) == pytest.approx(-0.5 * rl_u(j, 0.5, ctl=CTL), rel=1e-12)

    def test_quadratic_xi_term_by_term(self):
        j = jet1("x", 1.0, 6)
        spec = lambda p: FracSpec.single("x", p)
        rl = lambda p: rl_quadrature(parse("x"), spec(p), {"x": 1.0})
        expected = -0.5 * 2 * rl(0.5) - gen_binomial(0.5, 2) * 2 * rl(-0.5)
        got = corollary_phi_p_1d(field({"x": "x^2"}, "0"), 0.5, 0.0, j, CTL)
        assert got == pytest.approx(expected, rel=1e-10)

    def test_needs_one_axis(self):
        j = jet_of(parse("x*t"), {"t": 1.0, "x": 1.0}, 3, ("t", "x"))
        with pytest.raises(PreconditionError):
            corollary_phi_p_1d(field({}, "u", ("t", "x")), 0.5, 0.0, j)

    @settings(max_examples=40, deadline=None)
    @given(terminal_fields(), fractional_orders, st.floats(0.3, 1.0), st.sampled_from(SECTIONS))
    def test_matches_general(self, fld, p, x, src):
        v = field({"x": fld[0]}, fld[1])
        j = jet1(src, x)
        g = general_phi_p(v, FracSpec.single("x", p), j)
        c = corollary_phi_p_1d(v, p, 0.0, j)
        assert c == pytest.approx(g, rel=1e-8, abs=1e-10)

    def test_branch_point_section_converges_in_k(self):
        # sqrt(1+x) is singular at -1, so K=12 leaves a visible series tail;
        # the two evaluators close in on each other as K grows
        v = field({"x": "x*(1/2 - u/4)"}, "u/2 + x*u - u^2/4")
        gaps = []
        for K in (12, 24):
            j = jet1("(1 + x)^(1/2)", 0.99, K)
            gaps.append(abs(corollary_phi_p_1d(v, 0.5, 0.0, j) - general_phi_p(v, FracSpec.single("x", 0.5), j)))
        assert gaps[1] < 1e-9 and gaps[1] < gaps[0] / 100

    def test_translation_breaks_general_equality(self):
        # the corollary assumes xi(a) = 0; a translation violates it
        v = field({"x": "1"}, "0")
        j = jet1("exp(x/2)", 0.8)
        g = general_phi_p(v, FracSpec.single("x", 0.5), j, CTL)
        c = corollary_phi_p_1d(v, 0.5, 0.0, j, CTL)
        assert abs(g - c) > 1e-3


class TestOsler:
    def test_linear_phi_has_no_mu(self):
        j = jet1("exp(x/2)", 0.8)
        assert mu_p(parse("(1 + x^2)*u"), 0.5, j) == 0.0

    def test_pure_x_phi(self):
        j = jet1("exp(x/2)", 0.8)
        split = osler_expand_phi(parse("exp(x/3)"), 0.5, j, CTL)
        ref = rl_quadrature(parse("exp(x/3)"), FracSpec.single("x", 0.5), {"x": 0.8})
        assert split.total == pytest.approx(ref, rel=1e-10)
        assert split.minus_u_rl_phi_u == split.linear == split.mu == 0.0

    def test_square(self):
        j = jet1("x", 1.0)
        split = osler_expand_phi(parse("u^2"), 0.5, j, CTL)
        assert split.total == pytest.approx(gamma(3) * recip_gamma(2.5), rel=1e-10)
        assert split.mu != 0.0

    @settings(max_examples=25, deadline=None)
    @given(terminal_fields(), st.sampled_from((0.3, 0.5, 1.5)), st.floats(0.3, 0.9), st.sampled_from(SECTIONS))
    def test_groups_sum_to_total_derivative(self, fld, p, x, src):
        from fracsym.jet import frac_total_derivative

        j = jet1(src, x, 14)
        phi = fld[1]
        direct = frac_total_derivative(phi, FracSpec.single("x", p), j, CTL)
        split = osler_expand_phi(phi, p, j, CTL)
        assert split.total == pytest.approx(direct.value, rel=1e-7, abs=1e-10)

    def test_rejects_negative_order(self):
        with pytest.raises(PreconditionError):
            osler_expand_phi(parse("u"), -0.5, jet1("x", 1.0))


def jet2(src, t, x, K=12):
    return jet_of(parse(src), {"x": x, "t": t}, K, ("x", "t"))


class TestCorollary2d:
    def spec(self, p):
        return FracSpec.of(("x", 0.0, 0.0), ("t", p, 0.0))

    def test_translations_vanish(self):
        v = field({"x": "1", "t": "1"}, "0", ("x", "t"))
        assert corollary_phi_p_2d(v, 0.5, jet2("exp(t/2)*(1 + x)", 0.8, 0.6)) == 0.0

    def test_time_scaling(self):
        v = field({"t": "t"}, "0", ("x", "t"))
        j = jet2("exp(t/2)*(1 + x)", 0.8, 0.6)
        rl_t = rl_quadrature(parse("exp(t/2)*(1 + 0.6)"), FracSpec.single("t", 0.5), {"t": 0.8})
        assert corollary_phi_p_2d(v, 0.5, j, CTL) == pytest.approx(-0.5 * rl_t, rel=1e-9)

    def test_space_scaling_has_no_cross_term(self):
        v = field({"x": "x"}, "0", ("x", "t"))
        j = jet2("exp(x*t/2)", 0.8, 0.6)
        assert corollary_phi_p_2d(v, 0.5, j, CTL) == pytest.approx(general_phi_p(v, self.spec(0.5), j, CTL), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("xi, tau, phi", [("x*t", "t^2", "u*t + x"), ("x + t", "t*(1 + x)", "u^2/4"), ("u", "t*u/2", "x*u")])
    def test_matches_general(self, xi, tau, phi):
        v = field({"x": xi, "t": tau}, phi, ("x", "t"))
        j = jet2("exp(t/2)*(1 + x/3)", 0.7, 0.6)
        assert corollary_phi_p_2d(v, 0.5, j, CTL) == pytest.approx(general_phi_p(v, self.spec(0.5), j, CTL), rel=1e-8)


class TestProlonged:
    def test_tags(self):
        v = field({"x": "x"}, "u")
        j = jet1("exp(x/2)", 0.8)
        c = prolonged(v, (0,))
        assert c.tag == ("classical", (0,)) and c.evaluate(j) == pytest.approx(0.0, abs=1e-15)
        f = prolonged(v, FracSpec.single("x", 0.5))
        assert f.evaluate(j, CTL) == pytest.approx(0.5 * rl_u(j, 0.5, ctl=CTL), rel=1e-10)
