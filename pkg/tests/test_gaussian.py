import numpy as np
import pytest

from semilind.gaussian import (
    ComplexGaussian,
    GaussianWigner,
    GridSpec,
    SuperpositionState,
    WignerGrid,
    cat_decompose,
    check_physical,
    coherent,
    eval_wigner,
    g_from_a,
    moments,
)


def wide_grid(n=161, half=8.0):
    return GridSpec(-half, half, n, -half, half, n)


class TestCoherent:
    def test_vacuum(self):
        st = coherent(1, 0.0)
        assert np.allclose(st.x, 0)
        assert np.allclose(st.g, np.eye(2))

    def test_displaced(self):
        a0 = (4 + 4j) / np.sqrt(2)
        st = coherent(1, a0)
        assert np.allclose(st.x, [4.0, 4.0])

    def test_saturates_uncertainty(self):
        rep = check_physical(coherent(1, 1.2 - 0.5j))
        assert rep.passed
        assert abs(rep.min_eig) < 1e-12

    def test_two_modes(self):
        st = coherent(2, [1.0, 1j])
        assert np.allclose(st.x, np.sqrt(2) * np.array([1.0, 0.0, 0.0, 1.0]))


class TestPhysicality:
    def test_squeezed_below_vacuum_fails(self):
        st = GaussianWigner(hbar=1.0, x=np.zeros(2), g=2 * np.eye(2))
        rep = check_physical(st)
        assert not rep.passed
        assert rep.min_eig == pytest.approx(-0.5, abs=1e-12)

    def test_broadened_state_passes(self):
        st = GaussianWigner(hbar=1.0, x=np.zeros(2), g=0.5 * np.eye(2))
        rep = check_physical(st)
        assert rep.passed
        assert rep.min_eig == pytest.approx(1.0, abs=1e-12)


class TestWidthFromPacket:
    def test_unit_width(self):
        assert np.allclose(g_from_a(np.array([[1j]])), np.eye(2))

    def test_block_formula_hand_value(self):
        got = g_from_a(np.array([[1 + 1j]]))
        assert np.allclose(got, [[2.0, -1.0], [-1.0, 1.0]])

    def test_unit_determinant_single_mode(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = complex(rng.normal(), np.abs(rng.normal()) + 0.1)
            g = g_from_a(np.array([[a]]))
            assert np.linalg.det(g) == pytest.approx(1.0, rel=1e-12)
            assert np.linalg.eigvalsh(g).min() > 0

    def test_rejects_bad_imaginary_part(self):
        with pytest.raises(ValueError):
            g_from_a(np.array([[1.0 - 1j]]))


class TestWignerEval:
    def test_vacuum_peak(self):
        grid = eval_wigner(coherent(1, 0.0), wide_grid())
        assert np.max(grid.values) == pytest.approx(1 / np.pi, rel=1e-3)

    def test_normalization(self):
        grid = eval_wigner(coherent(1, 1 + 0.3j), wide_grid(n=241, half=9.0))
        assert grid.integral() == pytest.approx(1.0, abs=1e-6)

    def test_boundary_warning(self):
        small = GridSpec(-1, 1, 21, -1, 1, 21)
        with pytest.warns(UserWarning):
            eval_wigner(coherent(1, 0.0), small)

    def test_degenerate_grid_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(1, -1, 10, -1, 1, 10)


class TestCatDecompose:
    def setup_method(self):
        self.state = cat_decompose(
            centres=[(4.0, 3.0), (4.0, -3.0)],
            coeffs=[1.0, 1.0],
            width=np.array([[1j]]),
        )

    def test_single_gaussian_is_plain(self):
        st = cat_decompose([(1.0, -2.0)], [1.0], np.array([[1j]]))
        (comp,) = st.components
        assert np.allclose(comp.y, 0)
        assert comp.alpha == 0
        assert st.norm_factor == pytest.approx(1.0, rel=1e-12)

    def test_cross_component_parameters(self):
        comps = self.state.components
        # ordered pairs: (0,0), (0,1), (1,0), (1,1)
        cross = comps[1]
        assert np.allclose(cross.x, [4.0, 0.0])
        assert np.allclose(cross.y, [-6.0, 0.0])
        assert cross.alpha == 0

    def test_diagonal_centres(self):
        comps = self.state.components
        assert np.allclose(comps[0].x, [4.0, 3.0])
        assert np.allclose(comps[3].x, [4.0, -3.0])

    def test_normalized_on_grid(self):
        grid = eval_wigner(self.state, GridSpec(-6, 14, 301, -10, 10, 301))
        assert grid.integral() == pytest.approx(1.0, abs=1e-6)

    def test_interference_at_midpoint(self):
        grid = eval_wigner(self.state, GridSpec(-6, 14, 301, -10, 10, 301))
        q, p = grid.spec.axes()
        ip = np.argmin(np.abs(p))
        iq0 = np.argmin(np.abs(q - 4.0))
        # Y = (-6, 0): fringes oscillate along q around the midpoint (4, 0)
        window = grid.values[iq0 - 12 : iq0 + 12, ip]
        assert window.max() > 0.1 and window.min() < -0.1

    def test_diagonal_matches_gaussian_wigner(self):
        comps = self.state.components
        lobe = GaussianWigner(hbar=1.0, x=np.array([4.0, 3.0]), g=np.eye(2))
        spec = GridSpec(0, 8, 81, -1, 7, 81)
        got = comps[0].values(spec.points())
        want = lobe.values(spec.points())
        assert np.max(np.abs(got - want)) < 1e-12

    def test_analytic_integral_matches_quadrature(self):
        spec = GridSpec(-6, 14, 301, -10, 10, 301)
        for comp in self.state.components:
            grid_int = WignerGrid(spec, comp.values(spec.points())).integral()
            assert abs(grid_int - comp.integral()) < 1e-8

    def test_moments_symmetric_cat(self):
        m = self.state.moments_xp()
        assert m[0] == pytest.approx(4.0, abs=1e-9)
        assert m[1] == pytest.approx(0.0, abs=1e-9)


class TestMoments:
    def test_vacuum(self):
        m = moments(coherent(1, 0.0))
        assert m.blocks.alpha_block[0, 0] == pytest.approx(1.0)
        assert m.adag_a(0, 0) == pytest.approx(0.0)

    def test_coherent_occupation(self):
        a0 = 1.7 - 0.4j
        m = moments(coherent(1, a0))
        assert m.occupation(0) == pytest.approx(abs(a0) ** 2, rel=1e-12)
        assert m.modes[0] == pytest.approx(a0)

    def test_product_coherent_full_coherence(self):
        m = moments(coherent(2, [2.0, 1.0 + 1.0j]))
        assert m.g1(0, 1) == pytest.approx(1.0, rel=1e-12)

    def test_beta_block_vanishes_for_coherent(self):
        m = moments(coherent(1, 0.8))
        assert np.allclose(m.blocks.beta_block, 0, atol=1e-12)


class TestGridIO:
    def test_text_round_trip(self):
        grid = eval_wigner(coherent(1, 1.0), wide_grid(n=21))
        back = WignerGrid.from_text(grid.to_text())
        assert back.spec == grid.spec
        assert np.array_equal(back.values, grid.values)

    def test_json_round_trip_complex(self):
        comp = cat_decompose([(2.0, 0.0), (-2.0, 0.0)], [1, 1], np.array([[1j]])).components[1]
        spec = GridSpec(-4, 4, 17, -4, 4, 17)
        grid = WignerGrid(spec, comp.values(spec.points()))
        back = WignerGrid.from_json(grid.to_json())
        assert back.spec == grid.spec
        assert np.allclose(back.values, grid.values, atol=0)

    def test_text_round_trip_complex(self):
        spec = GridSpec(-1, 1, 3, -1, 1, 4)
        vals = np.arange(12, dtype=float).reshape(3, 4) * (1 + 2j)
        back = WignerGrid.from_text(WignerGrid(spec, vals).to_text())
        assert np.array_equal(back.values, vals)


class TestComplexGaussianChecks:
    def test_rejects_nonpositive_im_b(self):
        with pytest.raises(ValueError):
            ComplexGaussian(
                hbar=1.0,
                z=np.zeros(4),
                b=np.array([[1j, 0], [0, -1j]]),
                alpha=0.0,
                weight=1.0,
            )

    def test_peak_magnitude_tracks_alpha(self):
        comp = ComplexGaussian(
            hbar=1.0, z=np.zeros(4), b=2j * np.eye(2), alpha=0.5j, weight=2.0
        )
        assert comp.peak_magnitude() == pytest.approx(2 * np.exp(-0.5))
