import math

import pytest

from fracsym import diffusion as d
from fracsym import expr as ex
from fracsym.fracop import SeriesControl
from fracsym.errors import CertificationError, PreconditionError, TerminalError
from fracsym.parse import parse
from fracsym.prolong import VectorField
from fracsym.symmetry import (
    Axis,
    Equation,
    SolutionSample,
    apply_flow,
    certify,
    check_terminal_constraint,
    invariants_of_scaling,
    lie_residual,
    probe_points,
    transversality_rank,
)

SPEC = d.DiffusionSpec.single()
EQ = d.build_equation(SPEC)
SAMPLE = d.separable_solution(SPEC)
POINTS = probe_points(SAMPLE.box, 16, 0, {"x": 0.0}, axes=("t", "x"))
AXES = ("t", "x")


def vf(xi, phi="0"):
    return VectorField.of(AXES, xi, phi)


def linear_heat():
    eq = Equation((Axis("t"), Axis("x", 0.0, 0.5)), "u_t - RL[1/2, x](u)")
    return eq, d.linear_solution(d.DiffusionSpec.single(beta=0))


class TestEquation:
    def test_slots(self):
        eq = Equation.from_json({"axes": [{"name": "t", "a": 0, "p": None}, {"name": "x", "a": 0, "p": 0.5}], "residual": "u_t - k*RL[p,x](u)", "params": {"k": 2, "p": 0.5}})
        assert [n for n, _, _ in eq.slots] == ["RL_1"]
        assert eq.slots[0][2].axes[0].order == 0.5
        assert eq.jet_order == 1

    def test_slot_must_act_on_u(self):
        with pytest.raises(PreconditionError):
            Equation((Axis("t"), Axis("x")), "u_t - RL[1/2, x](u^2)")

    def test_unbound_order(self):
        with pytest.raises(PreconditionError):
            Equation((Axis("t"), Axis("x")), "u_t - RL[q, x](u)")

    def test_unknown_axis(self):
        with pytest.raises(PreconditionError):
            Equation((Axis("t"), Axis("x")), "u_t - RL[1/2, y](u)")

    def test_mixed_slot(self):
        eq = Equation((Axis("x"), Axis("y")), "RL[1/2, x, 1/3, y](u) - u")
        assert [a.name for a in eq.slots[0][2].axes] == ["x", "y"]

    def test_evolution_split(self):
        c, rest, ut = EQ.evolution()
        assert ut == "u_t" and ex.evaluate(c) == 1.0 and "u_t" not in rest.free_vars

    def test_json_round_trip(self):
        again = Equation.from_json(EQ.to_json())
        assert again.symbolic == EQ.symbolic


class TestCertify:
    def test_separable_sample(self):
        assert certify(EQ, SAMPLE) <= 1e-8

    def test_wrong_sample(self):
        bad = SolutionSample(parse("x^(1/2)*t"), SAMPLE.box)
        with pytest.raises(CertificationError):
            certify(EQ, bad)

    def test_probe_points_deterministic(self):
        a = probe_points({"t": (0, 1), "x": (0, 2)}, 8, 3, {"x": 0.0})
        assert a == probe_points({"t": (0, 1), "x": (0, 2)}, 8, 3, {"x": 0.0})
        assert all(p["x"] >= 0.1 for p in a)
        assert a != probe_points({"t": (0, 1), "x": (0, 2)}, 8, 4, {"x": 0.0})


class TestLieResidual:
    def test_time_translation_linear(self):
        eq, sample = linear_heat()
        res = lie_residual(eq, vf({"t": 1}), sample, POINTS[:6])
        assert max(map(abs, res)) <= 1e-12

    @pytest.mark.parametrize("name", ["v1", "v2", "v3"])
    def test_generators(self, name):
        res = lie_residual(EQ, d.generator(SPEC, name), SAMPLE, POINTS)
        assert max(map(abs, res)) <= 1e-6

    def test_jet_mode_converges_with_truncation(self):
        # x^(1/2) has its branch point on the terminal, so the jet-only series
        # converges slowly; the residual must still shrink as K grows
        sample = d.separable_solution(SPEC, b=0.0)
        v3 = d.generator(SPEC, "v3")
        ctl = SeriesControl(80, 1e-14)
        worst = [max(map(abs, lie_residual(EQ, v3, sample, POINTS[:3], ctl, mode="jet", K=K))) for K in (6, 12, 24)]
        assert worst[0] > worst[1] > worst[2]
        assert worst[2] < 3e-4

    def test_not_a_symmetry(self):
        res = lie_residual(EQ, vf({"t": "x"}), SAMPLE, POINTS)
        assert max(map(abs, res)) >= 1e-4

    def test_perturbed_coefficient(self):
        # 10% change in one coefficient of v2 breaks the symmetry
        res = lie_residual(EQ, vf({"t": "t", "x": "2.2*x"}), SAMPLE, POINTS)
        assert max(map(abs, res)) >= 1e-4

    def test_linear_in_field(self):
        v2, v3 = d.generator(SPEC, "v2"), d.generator(SPEC, "v3")
        w = vf({"x": "x^2"})
        a = lie_residual(EQ, v2 + w.scaled(2), SAMPLE, POINTS[:5])
        b = lie_residual(EQ, v2, SAMPLE, POINTS[:5])
        c = lie_residual(EQ, w, SAMPLE, POINTS[:5])
        assert a == pytest.approx([x + 2 * y for x, y in zip(b, c)], rel=1e-9, abs=1e-12)
        assert lie_residual(EQ, v3, SAMPLE, POINTS[:3]) is not None

    def test_terminal_constraint(self):
        with pytest.raises(TerminalError):
            lie_residual(EQ, vf({"x": 1}), SAMPLE, POINTS[:2])

    def test_axes_must_match(self):
        with pytest.raises(PreconditionError):
            lie_residual(EQ, VectorField.of(("x", "t"), {}, "u"), SAMPLE, POINTS[:2])


class TestTerminalConstraint:
    def test_symbolic(self):
        check_terminal_constraint(vf({"x": "x*u"}), EQ)
        with pytest.raises(TerminalError):
            check_terminal_constraint(vf({"x": "x + 1"}), EQ)

    def test_u_dependent(self):
        with pytest.raises(TerminalError):
            check_terminal_constraint(vf({"x": "x + u"}), EQ, POINTS[:1])


class TestFlows:
    def test_translation(self):
        moved = apply_flow(vf({"t": 1}), 0.3, SolutionSample(parse("t*x"), {"t": (0, 1), "x": (0, 1)}))
        assert ex.evaluate(moved.expr, {"t": 1.0, "x": 2.0}) == pytest.approx(1.4)
        assert moved.box["t"] == pytest.approx((0.3, 1.3))

    def test_v3_flow(self):
        moved = apply_flow(d.generator(SPEC, "v3"), 0.2, SolutionSample(parse("x"), {"x": (0, 1)}))
        # u -> e^eps u, x -> e^(2 eps) x
        assert ex.evaluate(moved.expr, {"x": 1.0}) == pytest.approx(math.exp(0.2) * math.exp(-0.4))

    def test_terminal_moved(self):
        v = VectorField.of(("x",), {"x": "x"}, 0)
        with pytest.raises(TerminalError):
            apply_flow(v, 0.1, SolutionSample(parse("x"), {"x": (1, 2)}), {"x": 1.0})

    def test_not_in_catalog(self):
        with pytest.raises(PreconditionError):
            apply_flow(vf({"x": "x^2"}), 0.1, SAMPLE)

    @pytest.mark.parametrize("name", ["v1", "v2", "v3"])
    @pytest.mark.parametrize("eps", [-0.5, -0.1, 0.1, 0.5])
    def test_solutions_map_to_solutions(self, name, eps):
        moved = apply_flow(d.generator(SPEC, name), eps, SAMPLE, {"x": 0.0})
        pts = probe_points(moved.box, 8, 1, {"x": 0.0}, axes=AXES)
        assert max(abs(EQ.residual_at(moved.expr, p)) for p in pts) <= 1e-5


class TestTransversality:
    def test_v2_v3(self):
        at = {"t": 1.0, "x": 1.0, "u": 1.0}
        assert transversality_rank([d.generator(SPEC, "v2"), d.generator(SPEC, "v3")], at) == (2, 2)

    def test_single_translation(self):
        assert transversality_rank([d.generator(SPEC, "v1")], {"t": 0.3, "x": 2.0, "u": -1.0}) == (1, 1)

    def test_vertical(self):
        assert transversality_rank([vf({}, "u")], {"t": 1.0, "x": 1.0, "u": 1.0}) == (0, 1)

    def test_empty(self):
        assert transversality_rank([], {}) == (0, 0)


class TestInvariants:
    def test_v2(self):
        inv = invariants_of_scaling(d.generator(SPEC, "v2"))
        assert inv.texts() == ["x/t^2", "u"]

    def test_v3_two_axes(self):
        spec = d.DiffusionSpec((1, 1), (1, 2), (0.5, 1.5))
        inv = invariants_of_scaling(d.generator(spec, "v3"))
        # v = x1^(-p1/beta1) u and z2 = x2 x1^(-beta2 p1/(beta1 p2))
        assert inv.reference == "x1"
        assert inv.texts() == ["t", "x2/x1^(2/3)", "u/x1^(1/2)"]

    def test_vertical(self):
        inv = invariants_of_scaling(vf({}, "u"))
        assert inv.vertical and inv.texts() == ["t", "x"]

    def test_not_scaling(self):
        with pytest.raises(PreconditionError):
            invariants_of_scaling(vf({"x": "x^2"}))

    def test_exact_annihilation(self):
        v = d.generator(d.DiffusionSpec((1, 3), (0.5, 2), (0.5, 1.25)), "v2")
        for z in invariants_of_scaling(v).invariants:
            assert ex.is_zero(v.apply(z))
