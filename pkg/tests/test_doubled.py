import numpy as np
import pytest

from semilind.doubled import (
    ChordGaussian,
    DoubledSymbol,
    build_k,
    chord_from_component,
    chord_rhs,
    component_csv,
    diffusion_matrix,
    propagate_superposition,
    rhs_component,
)
from semilind.gaussian import (
    ComplexGaussian,
    GridSpec,
    cat_decompose,
    eval_wigner,
)
from semilind.quantum import DensityMatrix, FockSpace, integrate_master, wigner_of_density
from semilind.semiclassical import (
    LindbladModel,
    SemiclassicalState,
    drift_x,
    integrate,
    rhs_g,
)
from semilind.symbols import Chart, PolySymbol, double_lift, moyal_term, parse_symbol


def real_vars(n=1):
    q = [PolySymbol.variable(Chart.REAL_QP, n, j) for j in range(n)]
    p = [PolySymbol.variable(Chart.REAL_QP, n, n + j) for j in range(n)]
    return q, p


def anharmonic_damped(beta=0.1, gamma=0.3):
    (q,), (p,) = real_vars()
    h = (q * q + p * p) * 0.5 + (q**4) * (beta / 4)
    L = (q + p * 1j) * np.sqrt(gamma / 2)
    return LindbladModel(1, 1.0, h, (L,))


def random_quadratic_linear(rng, n=1, n_lind=2):
    dim = 2 * n
    s = rng.normal(size=(dim, dim))
    s = s + s.T
    c = rng.normal(size=dim)
    h = PolySymbol.zero(Chart.REAL_QP, n)
    xs = [PolySymbol.variable(Chart.REAL_QP, n, i) for i in range(dim)]
    for i in range(dim):
        h = h + xs[i] * c[i]
        for j in range(dim):
            h = h + xs[i] * xs[j] * (0.5 * s[i, j])
    ls = []
    for _ in range(n_lind):
        L = PolySymbol.zero(Chart.REAL_QP, n)
        for i in range(dim):
            L = L + xs[i] * complex(rng.normal(), rng.normal())
        ls.append(L)
    return LindbladModel(n, 1.0, h, tuple(ls))


def random_component(rng, n=1, y_scale=1.0):
    dim = 2 * n
    r = rng.normal(size=(dim, dim))
    im = r @ r.T + 0.8 * np.eye(dim)
    re = rng.normal(size=(dim, dim))
    re = re + re.T
    b = re + 1j * im
    z = np.concatenate([rng.normal(size=dim), y_scale * rng.normal(size=dim)])
    return ComplexGaussian(hbar=1.0, z=z, b=b, alpha=complex(rng.normal(), 0.3), weight=1.0)


class TestBuildK:
    def test_anharmonic_damped_coefficients(self):
        beta, gamma = 0.1, 0.3
        ksym = build_k(anharmonic_damped(beta, gamma))
        # variables (x_q, x_p, y_q, y_p)
        want_k0 = {
            (0, 1, 1, 0): 1.0,
            (1, 0, 0, 1): -1.0,
            (1, 0, 0, 3): -beta / 4,
            (3, 0, 0, 1): -beta,
            (1, 0, 1, 0): -gamma / 2,
            (0, 1, 0, 1): -gamma / 2,
            (0, 0, 2, 0): -0.25j * gamma,
            (0, 0, 0, 2): -0.25j * gamma,
        }
        assert set(ksym.k0.terms) == set(want_k0)
        for key, val in want_k0.items():
            assert ksym.k0.terms[key] == pytest.approx(val, rel=1e-13)
        assert set(ksym.k1.terms) == {(0, 0, 0, 0)}
        assert ksym.k1.terms[(0, 0, 0, 0)] == pytest.approx(0.5j * gamma, rel=1e-13)

    def test_closed_quadratic_is_real_with_no_correction(self):
        (q,), (p,) = real_vars()
        h = (q * q + p * p) * 0.5 + q * p * 0.2
        ksym = build_k(LindbladModel(1, 1.0, h, ()))
        assert ksym.k1.is_zero()
        assert all(c.imag == 0 for c in ksym.k0.terms.values())

    def test_first_order_doubled_bracket_of_lifts_vanishes(self):
        rng = np.random.default_rng(12)
        (q,), (p,) = real_vars()
        for _ in range(5):
            L = PolySymbol(
                Chart.REAL_QP,
                1,
                {
                    (int(a), int(b)): complex(rng.normal(), rng.normal())
                    for a, b in rng.integers(0, 3, size=(4, 2))
                },
            )
            lm = double_lift(L, -1)
            lbar_p = double_lift(L.conj(), +1)
            assert moyal_term(lm, lbar_p, 1).max_abs_coeff() < 1e-12

    def test_structure_validation_catches_bad_symbol(self):
        good = build_k(anharmonic_damped())
        x1 = PolySymbol.variable(Chart.DOUBLED_XY, 1, 0)
        bad = DoubledSymbol(k0=good.k0 + x1 * x1, k1=good.k1)
        with pytest.raises(ValueError):
            bad.validate_structure()


class TestRhsComponent:
    def test_reduction_at_y_zero(self):
        model = anharmonic_damped()
        ksym = build_k(model)
        rng = np.random.default_rng(4)
        for _ in range(5):
            x = rng.normal(size=2) * 2
            r = rng.normal(size=(2, 2))
            g = r @ r.T + 0.5 * np.eye(2)
            comp = ComplexGaussian(
                hbar=1.0, z=np.concatenate([x, [0, 0]]), b=2j * g, alpha=0.0, weight=1.0
            )
            zdot, bdot, _ = rhs_component(ksym, comp)
            assert np.allclose(zdot[:2], drift_x(model, x), atol=1e-11)
            assert np.allclose(zdot[2:], 0, atol=1e-12)
            assert np.allclose(bdot / 2j, rhs_g(model, x, g), atol=1e-10)

    def test_pure_damping_rates_hand_derived(self):
        gamma = 0.4
        (q,), (p,) = real_vars()
        L = (q + p * 1j) * np.sqrt(gamma / 2)
        model = LindbladModel(1, 1.0, PolySymbol.zero(Chart.REAL_QP, 1), (L,))
        ksym = build_k(model)
        x = np.array([1.0, -2.0])
        y = np.array([0.7, 0.4])
        comp = ComplexGaussian(
            hbar=1.0, z=np.concatenate([x, y]), b=2j * np.eye(2), alpha=0.1, weight=1.0
        )
        zdot, bdot, alphadot = rhs_component(ksym, comp)
        assert np.allclose(zdot[:2], -0.5 * gamma * x, atol=1e-12)
        assert np.allclose(zdot[2:], -0.5 * gamma * y, atol=1e-12)
        assert np.allclose(bdot, 0, atol=1e-12)
        assert alphadot == pytest.approx(0.25j * gamma * (y @ y), abs=1e-12)

    def test_free_rotation_closed_form(self):
        (q,), (p,) = real_vars()
        h = (q * q + p * p) * 0.5
        model = LindbladModel(1, 1.0, h, ())
        comp = ComplexGaussian(
            hbar=1.0,
            z=np.array([1.0, 0.0, 0.3, -0.2]),
            b=np.array([[0.4 + 1.2j, 0.1], [0.1, 1.5j]]),
            alpha=0.2 + 0.1j,
            weight=1.0,
        )
        series = propagate_superposition(model, SuperpositionState_one(comp), [0.0, 0.6])
        rot = rotation(0.6)
        got = series.tracks[0].states[1]
        assert np.allclose(got.x, rot @ comp.x, atol=1e-9)
        assert np.allclose(got.y, rot @ comp.y, atol=1e-9)
        assert np.allclose(got.b, rot @ comp.b @ rot.T, atol=1e-9)
        assert got.alpha == pytest.approx(comp.alpha, abs=1e-9)
        assert got.weight == pytest.approx(comp.weight, abs=1e-9)


def rotation(t):
    return np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])


def SuperpositionState_one(comp):
    from semilind.gaussian import SuperpositionState

    return SuperpositionState((comp,), norm_factor=1.0)


class TestPropagateSuperposition:
    def test_single_component_matches_semiclassical(self):
        model = anharmonic_damped(beta=0.1, gamma=0.3)
        cat = cat_decompose([(2.0, 1.0)], [1.0], np.array([[1j]]))
        t_eval = np.linspace(0, 2.0, 21)
        series = propagate_superposition(model, cat, t_eval)
        straj = integrate(
            model, SemiclassicalState(0.0, np.array([2.0, 1.0]), np.eye(2)), t_eval
        )
        for k in range(t_eval.size):
            comp = series.tracks[0].states[k]
            assert np.allclose(comp.x, straj.states[k].x, atol=1e-8)
            assert np.allclose(comp.y, 0, atol=1e-10)
            assert np.allclose(comp.b.imag / 2, straj.states[k].g, atol=1e-8)
            assert np.allclose(comp.b.real, 0, atol=1e-8)

    def test_exact_case_against_quantum_wigner(self):
        # quadratic Hamiltonian + linear damping: the propagated cat must
        # match the master equation pointwise on the grid
        model = anharmonic_damped(beta=0.0, gamma=0.3)
        centres = [(4.0, 3.0), (4.0, -3.0)]
        cat = cat_decompose(centres, [1.0, 1.0], np.array([[1j]]))
        t_eval = np.array([0.0, 0.8])
        series = propagate_superposition(model, cat, t_eval)
        f = FockSpace(46)
        v = f.packet_vector(4.0, 3.0) + f.packet_vector(4.0, -3.0)
        rho0 = DensityMatrix.from_state(v, f)
        mtraj = integrate_master(rho0, model, t_eval)
        spec = GridSpec(-7, 7, 101, -7, 7, 101)
        got = eval_wigner(series.states[1], spec)
        want = wigner_of_density(DensityMatrix(rho=mtraj.rhos[1], fock=f), spec)
        assert got.sup_diff(want) < 1e-6

    def test_norm_conserved_in_exact_case(self):
        model = anharmonic_damped(beta=0.0, gamma=0.25)
        cat = cat_decompose([(3.0, 1.0), (3.0, -1.0)], [1.0, 1.0], np.array([[1j]]))
        series = propagate_superposition(model, cat, np.linspace(0, 1.5, 7))
        assert np.allclose(series.raw_norms, 1.0, atol=1e-7)

    def test_decoherence_monotone(self):
        model = anharmonic_damped(beta=0.1, gamma=0.3)
        cat = cat_decompose([(4.0, 3.0), (4.0, -3.0)], [1.0, 1.0], np.array([[1j]]))
        series = propagate_superposition(model, cat, np.linspace(0, 1.0, 11))
        mags = series.cross_magnitudes()
        assert np.all(np.diff(mags) <= 1e-9 * mags[0])
        # off-diagonal phases pick up a growing imaginary part
        cross = [st.components[1] for st in series.states]
        imalpha = np.array([c.alpha.imag for c in cross])
        assert np.all(np.diff(imalpha) >= -1e-10)

    def test_pure_damping_decoherence_exponent(self):
        # hand-integrated: Im alpha(t) = |Y0|^2 (1 - exp(-gamma t)) / 4
        gamma = 0.5
        (q,), (p,) = real_vars()
        L = (q + p * 1j) * np.sqrt(gamma / 2)
        model = LindbladModel(1, 1.0, PolySymbol.zero(Chart.REAL_QP, 1), (L,))
        cat = cat_decompose([(1.0, 2.0), (1.0, -2.0)], [1.0, 1.0], np.array([[1j]]))
        t_eval = np.array([0.0, 0.7, 1.4])
        series = propagate_superposition(model, cat, t_eval)
        cross0 = cat.components[1]
        y0sq = cross0.y @ cross0.y
        for k, t in enumerate(t_eval):
            got = series.tracks[1].states[k].alpha.imag
            want = 0.25 * y0sq * (1 - np.exp(-gamma * t))
            assert got == pytest.approx(want, abs=5e-8)

    def test_component_csv_header(self):
        model = anharmonic_damped()
        cat = cat_decompose([(1.0, 0.0)], [1.0], np.array([[1j]]))
        series = propagate_superposition(model, cat, [0.0, 0.1])
        text = component_csv(series.tracks[0], series.times)
        head = text.splitlines()[0]
        assert head == (
            "t,X_1,X_2,Y_1,Y_2,ReB_11,ReB_12,ReB_22,ImB_11,ImB_12,ImB_22,"
            "re_alpha,im_alpha,weight_re,weight_im"
        )


class TestChord:
    def test_imaginary_part_is_chord_quadratic_form(self):
        rng = np.random.default_rng(3)
        model = random_quadratic_linear(rng, n=1, n_lind=2)
        ksym = build_k(model)
        dmat = diffusion_matrix(model)
        im = ksym.k0.imag_part()
        # Im K0 must equal -y . D y / 2 coefficient-wise (x-independent)
        y1 = PolySymbol.variable(Chart.DOUBLED_XY, 1, 2)
        y2 = PolySymbol.variable(Chart.DOUBLED_XY, 1, 3)
        ys = [y1, y2]
        want = PolySymbol.zero(Chart.DOUBLED_XY, 1)
        for i in range(2):
            for j in range(2):
                want = want + ys[i] * ys[j] * (-0.5 * dmat[i, j])
        assert (im - want).max_abs_coeff() < 1e-12

    def test_equivalence_with_component_rhs(self):
        rng = np.random.default_rng(40)
        for _ in range(8):
            model = random_quadratic_linear(rng, n=1, n_lind=2)
            ksym = build_k(model)
            comp = random_component(rng, n=1)
            zdot, bdot, _ = rhs_component(ksym, comp)
            chord = chord_from_component(comp)
            xdot, ydot, mdot, ndot = chord_rhs(model, chord)
            scale = max(np.max(np.abs(zdot)), 1.0)
            assert np.max(np.abs(zdot[:2] - xdot)) < 1e-12 * scale
            assert np.max(np.abs(zdot[2:] - ydot)) < 1e-12 * scale
            binv = np.linalg.inv(comp.b)
            dninv = binv @ bdot @ binv  # d/dt of -B^{-1}
            mscale = max(np.max(np.abs(dninv)), 1.0)
            assert np.max(np.abs(dninv.real - ndot)) < 1e-12 * mscale
            assert np.max(np.abs(dninv.imag - mdot)) < 1e-12 * mscale

    def test_width_correspondence_at_zero_y(self):
        g = np.array([[1.3, 0.2], [0.2, 0.9]])
        comp = ComplexGaussian(
            hbar=1.0, z=np.array([0.5, 0.1, 0.0, 0.0]), b=2j * g, alpha=0.0, weight=1.0
        )
        chord = chord_from_component(comp)
        assert np.allclose(chord.nmat, 0, atol=1e-12)
        assert np.allclose(np.linalg.inv(chord.mmat) / 2, g, atol=1e-12)

    def test_nonlinear_lindblad_rejected(self):
        (q,), (p,) = real_vars()
        model = LindbladModel(1, 1.0, q * q * 0.5, (q * q * 1j + q,))
        comp = random_component(np.random.default_rng(1))
        with pytest.raises(ValueError):
            chord_rhs(model, chord_from_component(comp))

    def test_mmat_positivity_enforced(self):
        with pytest.raises(ValueError):
            ChordGaussian(
                x=np.zeros(2), y=np.zeros(2), nmat=np.zeros((2, 2)), mmat=-np.eye(2)
            )
