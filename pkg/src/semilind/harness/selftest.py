"""Built-in oracle checks, runnable from the CLI without pytest."""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from ..doubled import build_k, chord_from_component, chord_rhs, rhs_component
from ..gaussian import ComplexGaussian
from ..semiclassical import FlowKind, LindbladModel, classify_flow, drift_field
from ..symbols import (
    Chart,
    PolySymbol,
    moyal,
    symplectic_form,
    weyl_of_normal_ordered,
)

__all__ = ["run_selftest"]


def _brute_moyal(f, g, hbar):
    dim = f.dim
    omega = symplectic_form(dim // 2)
    total = PolySymbol.zero(f.chart, f.n_modes)
    for m in range(f.total_degree() + g.total_degree() + 1):
        term = PolySymbol.zero(f.chart, f.n_modes)
        for idx in product(range(dim), repeat=m):
            for jdx in product(range(dim), repeat=m):
                w = 1.0
                for i, j in zip(idx, jdx):
                    w *= omega[i, j]
                if w == 0:
                    continue
                df = f
                for i in idx:
                    df = df.deriv(i)
                if df.is_zero():
                    continue
                dg = g
                for j in jdx:
                    dg = dg.deriv(j)
                if dg.is_zero():
                    continue
                term = term + df * dg * w
        total = total + term * ((0.5j * hbar) ** m / math.factorial(m))
    return total


def _sym_close(a, b, tol):
    scale = max(a.max_abs_coeff(), b.max_abs_coeff(), 1.0)
    keys = set(a.terms) | set(b.terms)
    return all(abs(a.terms.get(k, 0) - b.terms.get(k, 0)) <= tol * scale for k in keys)


def _random_poly(rng, n, deg):
    terms = {}
    for _ in range(5):
        while True:
            exps = tuple(int(e) for e in rng.integers(0, deg + 1, size=2 * n))
            if sum(exps) <= deg:
                break
        terms[exps] = complex(rng.normal(), rng.normal())
    return PolySymbol(Chart.REAL_QP, n, terms)


def run_selftest(emit=print) -> bool:
    """Run the oracle spot checks; returns True when everything passes."""
    rng = np.random.default_rng(2024)
    results = []

    def check(name, ok):
        results.append(ok)
        emit(f"{'PASS' if ok else 'FAIL'} {name}")

    # star product vs brute-force bidifferential series
    ok = True
    for _ in range(5):
        f = _random_poly(rng, 1, 3)
        g = _random_poly(rng, 1, 2)
        hbar = float(rng.uniform(0.5, 1.5))
        ok = ok and _sym_close(moyal(f, g, hbar), _brute_moyal(f, g, hbar), 1e-13)
    check("star product matches brute-force series", ok)

    # normal-ordered Weyl symbols, exact coefficients
    a = PolySymbol.variable(Chart.COMPLEX_AABAR, 1, 0)
    abar = PolySymbol.variable(Chart.COMPLEX_AABAR, 1, 1)
    nsym = abar * a
    ok = weyl_of_normal_ordered(1, 0, 1, 1, 1.0) == nsym - 0.5
    ok = ok and weyl_of_normal_ordered(1, 0, 2, 2, 1.0) == nsym * nsym - nsym * 2 + 0.5
    check("normal-ordered Weyl symbols exact", ok)

    # nonlinear drift example, coefficient-wise
    gamma = 0.1
    q = PolySymbol.variable(Chart.REAL_QP, 1, 0)
    p = PolySymbol.variable(Chart.REAL_QP, 1, 1)
    L = (q * q + p * p * 1j) * np.sqrt(gamma)
    model = LindbladModel(1, 1.0, PolySymbol.zero(Chart.REAL_QP, 1), (L,))
    fq, fp = drift_field(model)
    ok = _sym_close(fq, q * q * p * (-2 * gamma), 1e-13)
    ok = ok and _sym_close(fp, q * p * p * (-2 * gamma), 1e-13)
    check("quadratic-loss drift field", ok)

    # gradient-flow identity for holomorphic symbols
    w = q + p * 1j
    ok = True
    for _ in range(3):
        L = PolySymbol.zero(Chart.REAL_QP, 1)
        for d in range(4):
            L = L + w**d * complex(rng.normal(), rng.normal())
        res = classify_flow(L)
        ok = ok and res.kind is FlowKind.GRADIENT_HOLOMORPHIC
        mdl = LindbladModel(1, 1.0, PolySymbol.zero(Chart.REAL_QP, 1), (L,))
        for fld, gp in zip(drift_field(mdl), res.potential.grad()):
            ok = ok and _sym_close(fld, gp, 1e-12)
    check("holomorphic Lindblad flow is a gradient flow", ok)

    # doubled generator for the worked quartic-plus-damping model
    beta, gamma = 0.1, 0.3
    h = (q * q + p * p) * 0.5 + (q**4) * (beta / 4)
    Ld = (q + p * 1j) * np.sqrt(gamma / 2)
    ksym = build_k(LindbladModel(1, 1.0, h, (Ld,)))
    want = {
        (0, 1, 1, 0): 1.0,
        (1, 0, 0, 1): -1.0,
        (1, 0, 0, 3): -beta / 4,
        (3, 0, 0, 1): -beta,
        (1, 0, 1, 0): -gamma / 2,
        (0, 1, 0, 1): -gamma / 2,
        (0, 0, 2, 0): -0.25j * gamma,
        (0, 0, 0, 2): -0.25j * gamma,
    }
    ok = set(ksym.k0.terms) == set(want)
    for key, val in want.items():
        ok = ok and abs(ksym.k0.terms.get(key, 0) - val) < 1e-13
    ok = ok and abs(ksym.k1.constant_value() - 0.5j * gamma) < 1e-13
    check("doubled generator coefficients", ok)

    # chord equivalence for a random quadratic/linear model
    ok = True
    for _ in range(3):
        s = rng.normal(size=(2, 2))
        s = s + s.T
        hq = q * q * (0.5 * s[0, 0]) + p * p * (0.5 * s[1, 1]) + q * p * s[0, 1]
        lvec = rng.normal(size=2) + 1j * rng.normal(size=2)
        Ll = q * lvec[0] + p * lvec[1]
        mdl = LindbladModel(1, 1.0, hq, (Ll,))
        r = rng.normal(size=(2, 2))
        b = (r + r.T) + 1j * (r @ r.T + np.eye(2))
        comp = ComplexGaussian(
            hbar=1.0, z=rng.normal(size=4), b=b, alpha=0.0, weight=1.0
        )
        zdot, bdot, _ = rhs_component(build_k(mdl), comp)
        xdot, ydot, mdot, ndot = chord_rhs(mdl, chord_from_component(comp))
        binv = np.linalg.inv(comp.b)
        dninv = binv @ bdot @ binv
        ok = ok and np.allclose(zdot[:2], xdot, atol=1e-11)
        ok = ok and np.allclose(zdot[2:], ydot, atol=1e-11)
        ok = ok and np.allclose(dninv.real, ndot, atol=1e-11)
        ok = ok and np.allclose(dninv.imag, mdot, atol=1e-11)
    check("chord-variable equations equivalent", ok)

    return all(results)
