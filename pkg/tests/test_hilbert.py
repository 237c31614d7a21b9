"""Operator algebra, grid states, and phase-space representation tests."""

import math

import numpy as np
import pytest

from gridqec.errors import InvalidSpaceError, SpaceTagError, TruncationWarning
from gridqec.hilbert import (
    FiniteEnergyParams,
    FockSpace,
    GridCode,
    annihilation_op,
    characteristic_function,
    characteristic_function_grid,
    conditional_displacement_op,
    displacement_op,
    expectation,
    grid_state,
    make_density_matrix,
    marginal_distribution,
    partial_trace,
    pure_state,
    quadrature_ops,
    squeeze_op,
    vacuum_state,
    wigner,
    wigner_parity_point,
)

SQRT_PI = math.sqrt(math.pi)


def displaced_vacuum(beta, space):
    d = displacement_op(beta, space)
    v = vacuum_state(space)
    return make_density_matrix(d @ v.data @ d.conj().T, space)


class TestLadderOperators:
    def test_dim2_matrix(self):
        a = annihilation_op(FockSpace(2))
        assert np.array_equal(a, np.array([[0, 1], [0, 0]], dtype=complex))

    def test_dim4_superdiagonal(self):
        a = annihilation_op(FockSpace(4))
        assert np.allclose(np.diag(a, k=1), [1, math.sqrt(2), math.sqrt(3)])
        assert np.count_nonzero(a - np.diag(np.diag(a, k=1), k=1)) == 0

    def test_commutator_truncation_confined(self):
        space = FockSpace(12)
        a = annihilation_op(space)
        comm = a @ a.conj().T - a.conj().T @ a
        ident = np.eye(space.dim)
        # identity on all but the last level, where truncation bites
        assert np.allclose(comm[:-1, :-1], ident[:-1, :-1], atol=1e-12)
        assert abs(comm[-1, -1] - (1 - space.dim)) < 1e-9

    def test_invalid_space(self):
        with pytest.raises(InvalidSpaceError):
            FockSpace(1)


class TestDisplacement:
    def test_zero_is_identity(self):
        space = FockSpace(30)
        assert np.allclose(displacement_op(0.0, space), np.eye(30), atol=1e-13)

    def test_vacuum_matrix_element(self):
        # <0|D(beta)|0> = exp(-|beta|^2/4)
        space = FockSpace(60)
        d = displacement_op(1.3, space)
        assert abs(d[0, 0] - math.exp(-1.3 ** 2 / 4)) < 1e-10

    def test_loop_global_phase(self):
        # Composition law on matrix elements well inside the truncation
        # (displacements leak at the top Fock levels, so the comparison is
        # restricted to the leading dim/4 block).
        space = FockSpace(60)
        k = space.dim // 4
        alpha, beta = 1.0, 1.0j
        loop = (displacement_op(-beta, space) @ displacement_op(-alpha, space)
                @ displacement_op(beta, space) @ displacement_op(alpha, space))
        phase = np.exp(1j * (np.conj(alpha) * beta).imag)
        assert np.max(np.abs((loop - phase * np.eye(space.dim))[:k, :k])) < 1e-7

    def test_unitarity_randomized(self):
        rng = np.random.default_rng(11)
        space = FockSpace(100)
        eye = np.eye(space.dim)
        for _ in range(20):
            beta = rng.uniform(-6, 6) + 1j * rng.uniform(-6, 6)
            if abs(beta) > 6:
                beta *= 6 / abs(beta)
            d = displacement_op(beta, space)
            assert np.max(np.abs(d.conj().T @ d - eye)) < 1e-9

    def test_composition_phase_law_randomized(self):
        rng = np.random.default_rng(5)
        space = FockSpace(80)
        k = space.dim // 4
        eye = np.eye(space.dim)
        for _ in range(200):
            alpha = rng.uniform(-2, 2) + 1j * rng.uniform(-2, 2)
            beta = rng.uniform(-2, 2) + 1j * rng.uniform(-2, 2)
            loop = (displacement_op(-beta, space) @ displacement_op(-alpha, space)
                    @ displacement_op(beta, space) @ displacement_op(alpha, space))
            phase = np.exp(1j * (np.conj(alpha) * beta).imag)
            assert np.max(np.abs((loop - phase * eye)[:k, :k])) < 1e-6

    def test_truncation_warning(self):
        space = FockSpace(20)
        with pytest.warns(TruncationWarning):
            displacement_op(8.0, space)


class TestConditionalDisplacement:
    def test_zero_is_identity(self):
        space = FockSpace(20)
        assert np.allclose(conditional_displacement_op(0.0, space),
                           np.eye(space.joint_dim), atol=1e-13)

    def test_block_structure(self):
        space = FockSpace(40)
        beta = 1.1 - 0.3j
        cd = conditional_displacement_op(beta, space)
        n = space.dim
        assert np.allclose(cd[n:, n:], displacement_op(beta / 2, space), atol=1e-12)
        assert np.allclose(cd[:n, :n], displacement_op(-beta / 2, space), atol=1e-12)
        assert np.max(np.abs(cd[:n, n:])) == 0.0

    def test_ramsey_identity_random_states(self):
        # After CD(beta) on |+x> x |psi>, <sig_x - i sig_y> = Tr(rho_psi D(beta))
        rng = np.random.default_rng(42)
        space = FockSpace(40)
        for _ in range(20):
            amps = rng.normal(size=10) + 1j * rng.normal(size=10)
            ket = np.zeros(space.dim, dtype=complex)
            ket[:10] = amps / np.linalg.norm(amps)
            beta = rng.uniform(-1.5, 1.5) + 1j * rng.uniform(-1.5, 1.5)
            joint = conditional_displacement_op(beta, space) @ np.kron(
                np.array([1, 1]) / math.sqrt(2), ket)
            anc = partial_trace(pure_state(joint, space, "joint"), "ancilla").data
            val = 2 * anc[1, 0]  # <sig_x - i sig_y> = 2 <e|rho|g>
            want = characteristic_function(pure_state(ket, space), beta)
            assert abs(val - want) < 1e-8

    def test_doubling(self):
        space = FockSpace(60)
        beta = 0.7 + 0.2j
        cd = conditional_displacement_op(beta, space)
        cd2 = conditional_displacement_op(2 * beta, space)
        prod = cd @ cd
        # align global phase on the largest element
        idx = np.unravel_index(np.argmax(np.abs(cd2)), cd2.shape)
        phase = prod[idx] / cd2[idx]
        assert abs(abs(phase) - 1) < 1e-9
        assert np.max(np.abs(prod - phase * cd2)) < 1e-9

    def test_sign_convention_flip_is_relabelling(self):
        space = FockSpace(30)
        beta = 0.8 + 0.1j
        cd_plus = conditional_displacement_op(beta, space, excited_sign=+1)
        cd_minus = conditional_displacement_op(beta, space, excited_sign=-1)
        # flipping the convention equals swapping the ancilla basis labels
        n = space.dim
        swap = np.kron(np.array([[0, 1], [1, 0]]), np.eye(n))
        assert np.allclose(cd_minus, swap @ cd_plus @ swap, atol=1e-12)


class TestPartialTrace:
    def test_product_state_factors(self):
        space = FockSpace(12)
        osc = displaced_vacuum(0.7, space)
        anc = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
        joint = make_density_matrix(np.kron(anc, osc.data), space, "joint")
        assert np.allclose(partial_trace(joint, "oscillator").data, osc.data, atol=1e-12)
        assert np.allclose(partial_trace(joint, "ancilla").data, anc, atol=1e-12)

    def test_trace_preserved(self):
        space = FockSpace(15)
        rng = np.random.default_rng(3)
        m = rng.normal(size=(30, 30)) + 1j * rng.normal(size=(30, 30))
        rho = m @ m.conj().T
        rho /= np.trace(rho).real
        joint = make_density_matrix(rho, space, "joint", normalize=False)
        red = partial_trace(joint, "oscillator")
        assert abs(np.trace(red.data) - 1) < 1e-12

    def test_wrong_tag_rejected(self):
        space = FockSpace(10)
        with pytest.raises(SpaceTagError):
            partial_trace(vacuum_state(space), "oscillator")


class TestGridCode:
    def test_square_geometry(self):
        code = GridCode.square()
        assert abs(code.stab_a - 2 * SQRT_PI) < 1e-12
        assert abs(code.stab_b - 2j * SQRT_PI) < 1e-12
        assert abs((np.conj(code.stab_a) * code.stab_b).imag - 4 * math.pi) < 1e-9
        assert abs(code.pauli_x - SQRT_PI) < 1e-12
        assert abs(code.pauli_y - SQRT_PI * (1 + 1j)) < 1e-12

    def test_hexagonal_geometry(self):
        code = GridCode.hexagonal()
        a = math.sqrt(8 * math.pi / math.sqrt(3))
        assert abs(abs(code.stab_a) - a) < 1e-12
        assert abs((np.conj(code.stab_a) * code.stab_b).imag - 4 * math.pi) < 1e-12
        # all three Pauli displacement lengths equal
        lengths = {round(abs(code.pauli(w)), 12) for w in "XYZ"}
        assert len(lengths) == 1

    def test_area_condition_enforced(self):
        with pytest.raises(ValueError):
            GridCode(stab_a=2.0, stab_b=2.0j)


class TestGridStates:
    def test_small_delta_is_squeezed_vacuum(self):
        space = FockSpace(40)
        fe = FiniteEnergyParams(0.4)
        rho = grid_state(GridCode.square(), fe, "+X", space)
        # only the n=0 site survives: a squeezed vacuum along the comb axis
        r = -0.5 * math.log(2 * fe.peak_sigma ** 2)
        sq = squeeze_op(r * np.exp(2j * (-math.pi / 2)), space)[:, 0]
        overlap = np.real(sq.conj() @ rho.data @ sq)
        assert overlap > 0.99

    def test_orthogonality_and_marginal_overlap(self):
        space = FockSpace(150)
        code = GridCode.square()
        fe = FiniteEnergyParams(3.2)
        states = {lbl: grid_state(code, fe, lbl, space) for lbl in
                  ("+X", "-X", "+Y", "-Y")}
        ov_x = np.trace(states["+X"].data @ states["-X"].data).real
        ov_y = np.trace(states["+Y"].data @ states["-Y"].data).real
        # code words of opposite sign are numerically orthogonal
        assert ov_x < 1e-9 and ov_y < 1e-9

        # distinguishability along the measured axis: the overlap of the
        # +/- marginal distributions is ~4e-7 for Y and far smaller for X
        # (neighbouring Y peaks are sqrt(2) closer than X peaks)
        grid = np.linspace(-12, 12, 4001)

        def marg_overlap(which, theta):
            pp = marginal_distribution(states[f"+{which}"], theta, grid)
            pm = marginal_distribution(states[f"-{which}"], theta, grid)
            return np.trapezoid(np.sqrt(np.clip(pp, 0, None) * np.clip(pm, 0, None)),
                                grid) ** 2

        # truncation tails add a ~1e-4 floor to the Bhattacharyya integral,
        # so the Y value sits slightly above the ideal-comb 4e-7
        o_y = marg_overlap("Y", -math.pi / 4)
        o_x = marg_overlap("X", -math.pi / 2)
        assert 2e-7 < o_y < 1.6e-6
        assert o_x < o_y / 5

    def test_mixed_state(self):
        space = FockSpace(150)
        code = GridCode.square()
        fe = FiniteEnergyParams(3.2)
        rho = grid_state(code, fe, "mixed", space)
        assert rho.purity() <= 0.5 + 1e-6
        # zero up to the truncation error of the outermost comb sites
        for which in "XYZ":
            assert abs(characteristic_function(rho, code.pauli(which)).real) < 2e-5

    def test_stabilizer_monotone_in_delta(self):
        # |<S>| on a code word follows exp(-pi/(2 Delta^2)): 0.778 at
        # Delta=2.5 rising through 0.907 at Delta=4.
        space = FockSpace(200)
        code = GridCode.square()
        values = []
        for delta in (2.5, 3.2, 4.0):
            rho = grid_state(code, FiniteEnergyParams(delta), "+X", space)
            sa = abs(characteristic_function(rho, code.stab_a))
            sb = abs(characteristic_function(rho, code.stab_b))
            want = math.exp(-math.pi / (2 * delta ** 2))
            assert abs(sa - want) < 0.02 and abs(sb - want) < 0.02
            values.append(sa)
        assert values[0] < values[1] < values[2]
        assert values[0] > 0.75 and values[2] > 0.9

    def test_pauli_algebra_on_code_words(self):
        space = FockSpace(150)
        code = GridCode.square()
        fe = FiniteEnergyParams(3.2)
        rho = grid_state(code, fe, "+X", space)
        assert characteristic_function(rho, code.pauli_x).real > 0.9
        assert abs(characteristic_function(rho, code.pauli_y).real) < 0.1
        assert abs(characteristic_function(rho, code.pauli_z).real) < 0.1

    def test_hexagonal_code_words(self):
        space = FockSpace(150)
        code = GridCode.hexagonal()
        fe = FiniteEnergyParams(3.2)
        rho = grid_state(code, fe, "+Y", space)
        for stab in code.stabilizers:
            assert characteristic_function(rho, stab).real > 0.8
        assert characteristic_function(rho, code.pauli_y).real > 0.9
        assert abs(characteristic_function(rho, code.pauli_x).real) < 0.1


class TestCharacteristicFunction:
    def test_vacuum_gaussian(self):
        space = FockSpace(60)
        v = vacuum_state(space)
        for beta in (0.5, 1.3j, 1.0 + 0.7j):
            want = math.exp(-abs(beta) ** 2 / 4)
            assert abs(characteristic_function(v, beta) - want) < 1e-9

    def test_coherent_state(self):
        space = FockSpace(80)
        delta = 0.9 - 0.4j
        rho = displaced_vacuum(delta, space)
        beta = 1.1 + 0.3j
        want = math.exp(-abs(beta) ** 2 / 4) * np.exp(-1j * (delta * np.conj(beta)).imag)
        assert abs(characteristic_function(rho, beta) - want) < 1e-9

    def test_normalisation_and_symmetry(self):
        space = FockSpace(60)
        rng = np.random.default_rng(1)
        m = rng.normal(size=(60, 60)) + 1j * rng.normal(size=(60, 60))
        rho = make_density_matrix(m @ m.conj().T, space)
        assert abs(characteristic_function(rho, 0.0) - 1.0) < 1e-9
        beta = 0.4 + 0.2j
        c1 = characteristic_function(rho, beta)
        c2 = characteristic_function(rho, -beta)
        assert abs(c1 - np.conj(c2)) < 1e-9
        assert abs(c1) <= 1 + 1e-9

    def test_grid_evaluation_matches_pointwise(self):
        space = FockSpace(50)
        rho = displaced_vacuum(0.7 + 0.2j, space)
        re = np.linspace(-2, 2, 7)
        im = np.linspace(-2, 2, 5)
        grid = characteristic_function_grid(rho, re, im)
        for i, u in enumerate(re):
            for j, v in enumerate(im):
                assert abs(grid[i, j] - characteristic_function(rho, u + 1j * v)) < 1e-9


class TestWigner:
    def test_vacuum_peak_and_normalisation(self):
        space = FockSpace(40)
        v = vacuum_state(space)
        assert abs(wigner_parity_point(v, 0, 0) - 1 / math.pi) < 1e-10
        qs = np.linspace(-4.5, 4.5, 46)
        ps = np.linspace(-4.5, 4.5, 46)
        w = wigner(v, qs, ps)
        total = np.trapezoid(np.trapezoid(w, ps, axis=1), qs)
        assert abs(total - 1.0) < 1e-3

    def test_fock_one_negative_at_origin(self):
        space = FockSpace(40)
        ket = np.zeros(space.dim, dtype=complex)
        ket[1] = 1.0
        assert wigner_parity_point(pure_state(ket, space), 0, 0) < -0.3

    def test_grid_matches_direct_parity(self):
        space = FockSpace(35)
        rho = displaced_vacuum(0.8 - 0.5j, space)
        qs = np.linspace(-1.5, 1.5, 5)
        ps = np.linspace(-1.0, 1.0, 4)
        w = wigner(rho, qs, ps)
        for i, q in enumerate(qs):
            for j, p in enumerate(ps):
                assert abs(w[i, j] - wigner_parity_point(rho, q, p)) < 1e-10

    def test_mixed_grid_state_symmetry(self):
        space = FockSpace(150)
        rho = grid_state(GridCode.square(), FiniteEnergyParams(3.2), "mixed", space)
        qs = np.linspace(-3, 3, 13)
        w = wigner(rho, qs, qs)
        assert np.max(np.abs(w - w[::-1, ::-1])) < 1e-8

    def test_fourier_duality_spot_check(self):
        # C(beta) = int W(q,p) exp(i(Im(beta) q - Re(beta) p)) dq dp
        space = FockSpace(80)
        rho = displaced_vacuum(0.5 + 0.3j, space)
        qs = np.linspace(-5, 5, 101)
        ps = np.linspace(-5, 5, 101)
        w = wigner(rho, qs, ps)
        beta = 0.8 - 0.2j
        phase = np.exp(1j * (beta.imag * qs[:, None] - beta.real * ps[None, :]))
        val = np.trapezoid(np.trapezoid(w * phase, ps, axis=1), qs)
        assert abs(val - characteristic_function(rho, beta)) < 1e-3


class TestMarginals:
    def test_vacuum_isotropic(self):
        space = FockSpace(40)
        v = vacuum_state(space)
        grid = np.linspace(-6, 6, 601)
        for theta in (0.0, 0.7, math.pi / 2):
            m = marginal_distribution(v, theta, grid)
            assert np.all(m > -1e-9)
            assert abs(np.trapezoid(m, grid) - 1) < 1e-4
            std = math.sqrt(np.trapezoid(m * grid ** 2, grid))
            assert abs(std - 1 / math.sqrt(2)) < 1e-6

    def test_code_word_comb_structure(self):
        # +Z is a position comb: peaks at q = 0 mod 2 sqrt(pi), the odd
        # multiples of sqrt(pi) are suppressed; +X shows the same along p.
        space = FockSpace(150)
        code = GridCode.square()
        rho = grid_state(code, FiniteEnergyParams(3.2), "+Z", space)
        grid = np.linspace(-8, 8, 1601)
        m = marginal_distribution(rho, 0.0, grid)

        def density_near(x0):
            i = np.argmin(np.abs(grid - x0))
            return m[i]

        for k in (-2, 0, 2):
            assert density_near(k * SQRT_PI) > 0.1
        for k in (-1, 1):
            assert density_near(k * SQRT_PI) < 1e-4

        rho_x = grid_state(code, FiniteEnergyParams(3.2), "+X", space)
        wide = np.linspace(-14, 14, 2801)
        m_wide = marginal_distribution(rho_x, math.pi / 2, wide)
        assert abs(np.trapezoid(m_wide, wide) - 1) < 1e-3
        m_x = marginal_distribution(rho_x, math.pi / 2, grid)
        i0 = np.argmin(np.abs(grid - 0.0))
        i1 = np.argmin(np.abs(grid - SQRT_PI))
        assert m_x[i0] > 0.1 and m_x[i1] < 1e-4

    def test_displaced_state_peak_positions(self):
        space = FockSpace(60)
        grid = np.linspace(-5, 5, 501)
        rho = displaced_vacuum(1 + 1j, space)
        m = marginal_distribution(rho, math.pi / 4, grid)
        assert abs(grid[np.argmax(m)] - math.sqrt(2)) < 0.05


class TestMoments:
    def test_vacuum_quadratures(self):
        space = FockSpace(30)
        q, p = quadrature_ops(space)
        v = vacuum_state(space)
        assert abs(expectation(v, q)) < 1e-12
        assert abs(expectation(v, q @ q).real - 0.5) < 1e-12
        assert abs(expectation(v, p @ p).real - 0.5) < 1e-12
