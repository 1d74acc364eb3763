import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracwave.duhamel import SourceTerm, direct_source_solve, duhamel_solve, quadrature_nodes, zero_source
from fracwave.errors import QuadratureUnderResolved
from fracwave.fracops import l2_norm
from fracwave.grid import Field, Grid
from fracwave.propagate import SolverState, StepperConfig, evolve

G = Grid(1, 64, np.pi)
X = G.x[0]
A = Field(G, 1 + 0.5 * np.cos(X))
B = Field(G, 0.3 + 0.2 * np.sin(2 * X) ** 2)
U0 = Field(G, np.exp(np.cos(X)) - 1)
U1 = Field(G, np.sin(X))
CFG = StepperConfig(0.75, 1 / 64, A, B)


def src(c=1.0):
    return SourceTerm(lambda t, g: Field(g, c * np.cos(2 * t) * np.cos(3 * g.x[0])), "cos")


def test_nodes_snapped():
    ks = quadrature_nodes(1.0, 1 / 64, 9)
    assert list(ks) == list(range(0, 65, 8))


def test_too_few_nodes():
    with pytest.raises(QuadratureUnderResolved):
        quadrature_nodes(1.0, 0.1, 2)


def test_zero_source_is_homogeneous():
    ref = evolve(SolverState(U0, U1), CFG, 1.0, keep_states=False).final
    for out in (duhamel_solve(U0, U1, CFG, zero_source(), 1.0, 9), direct_source_solve(U0, U1, CFG, zero_source(), 1.0)):
        assert np.array_equal(out.u.values, ref.u.values)
        assert np.array_equal(out.ut.values, ref.ut.values)


def test_agreement_second_order_in_nodes():
    # fine dt so the trapezoid error in tau dominates the difference
    cfg = StepperConfig(0.75, 1 / 512, A, B)
    r = direct_source_solve(U0, U1, cfg, src(), 1.0)
    errs = [l2_norm(duhamel_solve(U0, U1, cfg, src(), 1.0, M).u - r.u) for M in (9, 17, 33)]
    ratios = [e1 / e2 for e1, e2 in zip(errs, errs[1:])]
    assert all(3.0 < q < 5.0 for q in ratios), errs


def test_threads_identical():
    a = duhamel_solve(U0, U1, CFG, src(), 1.0, 9, threads=1)
    b = duhamel_solve(U0, U1, CFG, src(), 1.0, 9, threads=3)
    assert np.array_equal(a.u.values, b.u.values)


@settings(max_examples=10)
@given(c1=st.floats(-2, 2), c2=st.floats(-2, 2))
def test_linearity(c1, c2):
    def solve(u0, u1, c):
        return duhamel_solve(u0, u1, CFG, src(c), 1.0, 9)

    lhs = solve(c1 * U0, c1 * U1, c1 + c2)
    rhs1 = solve(c1 * U0, c1 * U1, c1)
    rhs2 = solve(G.zeros(), G.zeros(), c2)
    diff = lhs.u - (rhs1.u + rhs2.u)
    assert l2_norm(diff) <= 1e-10 * max(l2_norm(lhs.u), 1e-300) + 1e-14
