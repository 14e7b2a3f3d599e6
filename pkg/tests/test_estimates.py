import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import apply_matrix_field, recomposed_N
from csdlab import estimates as E
from csdlab.dirac import free_propagator, half_wave
from csdlab.gauge import n_coefficients
from csdlab.spectral import (Grid, dft, frac_deriv, idft, lp_low, lp_project, mixed_norm, sobolev_norm,
                             time_norm)

G32 = Grid(32)
NT = 9


def spinor_flow(f, grid, t, sign):
    return np.stack([half_wave(c, grid, t, sign) for c in f])


class TestRandomData:
    @pytest.mark.parametrize("lam", [2, 4, 8])
    def test_annulus_localized(self, lam):
        spec = E.RandomDataSpec(s=0.3, support="annulus", scale=lam)
        f = E.random_data(spec, 7, G32)
        assert np.max(np.abs(lp_project(f, lam, G32) - f)) < 1e-12

    @given(st.integers(0, 2 ** 32 - 1), st.floats(-0.5, 1.5), st.booleans(), st.sampled_from([1, 2]))
    def test_unit_norm(self, seed, s, hom, comps):
        spec = E.RandomDataSpec(s=s, homogeneous=hom, components=comps)
        f = E.random_data(spec, seed, G32)
        norm = sobolev_norm(f, s, G32, homogeneous=hom, components=comps - 1)
        assert float(norm) == pytest.approx(1.0, abs=1e-10)

    def test_same_seed_bit_identical(self):
        spec = E.RandomDataSpec(s=0.3, components=2)
        assert np.array_equal(E.random_data(spec, 11, G32), E.random_data(spec, 11, G32))

    def test_no_zero_or_nyquist_content(self):
        c = E.random_data_hat(E.RandomDataSpec(s=0.3, support="ball", scale=64), 3, G32)
        assert c[0, 0] == 0 and not c[G32.nyquist_mask].any()

    def test_empty_support(self):
        with pytest.raises(ValueError):
            E.random_data(E.RandomDataSpec(s=0.3, support="annulus", scale=0.25), 0, G32)

    def test_unknown_support(self):
        with pytest.raises(ValueError):
            E.random_data(E.RandomDataSpec(s=0.3, support="shell"), 0, G32)


class TestHarness:
    def test_seeds_distinct_and_stable(self):
        seeds = {E.trial_seed(0, "x", i, k) for i in range(7) for k in range(50)}
        assert len(seeds) == 350
        assert E.trial_seed(5, "x", 1, 2) == E.trial_seed(5, "x", 1, 2)
        assert E.trial_seed(5, "x", 1, 2) != E.trial_seed(6, "x", 1, 2)

    def test_fit_slope(self):
        lam = np.array([1, 2, 4, 8])
        assert E.fit_slope(lam, 3 * lam ** 0.5) == pytest.approx(0.5)
        assert E.fit_slope(lam, [0, 0, 1, 2]) == pytest.approx(1.0)
        assert math.isnan(E.fit_slope(lam, [0, 0, 0, 1]))

    def test_summarize_and_bounded(self):
        recs = [E.ProbeRecord("p", "a", k, lam, lam ** 0.1 * (1 + k), 1.0, {}) for lam in (1, 2, 4) for k in range(3)]
        recs += [E.ProbeRecord("p", "b", k, lam, 1.0 / lam, 1.0, {}) for lam in (1, 2, 4) for k in range(3)]
        summary = E.summarize(recs)
        assert summary[("p", "a")]["max"] == pytest.approx([3.0, 3 * 2 ** 0.1, 3 * 4 ** 0.1])
        assert summary[("p", "a")]["trials"] == [3, 3, 3]
        verdict = E.bounded(summary)
        assert verdict == {("p", "a"): False, ("p", "b"): True}

    def test_workers_do_not_change_records(self):
        one = E.probe_product_rule(trials=2, scales=(1, 2), N=32)
        two = E.probe_product_rule(trials=2, scales=(1, 2), N=32, workers=2)
        assert one == two

    def test_records_sorted(self):
        recs = E.probe_homogeneous_product(trials=3, scales=(2, 1), N=32)
        keys = [(r.scale, r.seed, r.series) for r in recs]
        assert keys == sorted(keys)

    def test_sanity_gates(self):
        gates = E.sanity_gates(G32)
        assert len(gates) == 8 and all(gates.values())


class TestStrichartz:
    def test_exponent_rules(self):
        assert E.check_strichartz(0.0, None, 2.0, None) == (0.0, 4.0, 2.0, 0.375)
        for bad in [(0.0, 3.0, 2.0, None), (0.6, None, 2.0, None), (0.0, None, math.inf, None),
                    (0.0, None, 2.0, 0.5)]:
            with pytest.raises(ValueError):
                E.check_strichartz(*bad)

    @pytest.mark.parametrize("a,r,sign", [(0.0, 2.0, 1), (0.0, 2.0, -1), (0.3, 3.0, 1)])
    def test_matches_reference_pipeline(self, a, r, sign):
        rng = np.random.default_rng(1)
        spec = E.RandomDataSpec(s=0.375, homogeneous=True, support="annulus", scale=4)
        f, g = E.random_data(spec, rng, G32), E.random_data(spec, rng, G32)
        a, q, r, s = E.check_strichartz(a, None, r, None)
        times = np.linspace(0, 1, NT)
        prods = np.stack([frac_deriv(half_wave(f, G32, t) * half_wave(g, G32, t, sign), -a, G32) if a else
                          half_wave(f, G32, t) * half_wave(g, G32, t, sign) for t in times])
        ref = mixed_norm(prods, times, q, r, G32)
        lhs, rhs = E.strichartz_sides(f, g, G32, a=a, r=r, sign=sign, nt=NT)
        assert lhs == pytest.approx(ref, rel=1e-10)
        expect = float(sobolev_norm(f, s, G32, True) * sobolev_norm(g, s, G32, True))
        assert rhs == pytest.approx(expect, rel=1e-12)

    def test_zero_input(self):
        f = E.random_data(E.RandomDataSpec(s=0.375, homogeneous=True), 0, G32)
        z = np.zeros_like(f)
        assert E.strichartz_sides(f, z, G32, nt=NT)[0] == 0.0
        assert E.strichartz_sides(z, f, G32, nt=NT)[0] == 0.0

    def test_records_both_signs(self):
        recs = E.probe_bilinear_strichartz(trials=2, scales=(2,), N=32, nt=NT)
        assert sorted(r.series for r in recs) == ["+", "+", "-", "-"]
        assert all(r.params["q"] == 4.0 and r.params["s"] == 0.375 for r in recs)


class TestNEstimate:
    def test_range(self):
        for s in (0.25, 0.6):
            with pytest.raises(ValueError):
                E.check_cubic_s(s)
        E.check_cubic_s(0.1, explore=True)

    @pytest.mark.parametrize("signs", [(1, 1), (1, -1), (-1, 1)])
    def test_matches_reference_pipeline(self, signs):
        rng = np.random.default_rng(2)
        spec = E.RandomDataSpec(s=0.3, support="annulus", scale=4, components=2)
        f, g = E.random_data(spec, rng, G32), E.random_data(spec, rng, G32)
        times = np.linspace(0, 1, NT)
        sups, energies = [], []
        for t in times:
            c = n_coefficients(spinor_flow(f, G32, t, signs[0]), spinor_flow(g, G32, t, signs[1]), G32)
            sups.append(float(np.sqrt(np.sum(np.abs(c) ** 2, axis=0)).max()))
            energies.append(float(sobolev_norm(c, 0.8, G32, homogeneous=True, components=1)))
        l1, l2, rhs = E.n_estimate_sides(f, g, 0.3, G32, signs=signs, nt=NT)
        assert l1 == pytest.approx(time_norm(sups, times, 2), rel=1e-10)
        assert l2 == pytest.approx(time_norm(energies, times, 4), rel=1e-10)
        expect = float(sobolev_norm(f, 0.3, G32, components=1) * sobolev_norm(g, 0.3, G32, components=1))
        assert rhs == pytest.approx(expect, rel=1e-12)

    def test_zero_and_constant(self):
        z = np.zeros((2, 32, 32), complex)
        c = np.ones((2, 32, 32), complex)
        assert E.n_estimate_sides(z, z, 0.3, G32, nt=NT)[:2] == (0.0, 0.0)
        assert E.n_estimate_sides(c, c, 0.3, G32, nt=NT)[:2] == (0.0, 0.0)

    def test_sign_pairs_cycle(self):
        recs = E.probe_N_estimate(trials=4, scales=(2,), N=32, nt=NT)
        assert sorted({r.params["signs"] for r in recs}) == ["+1+1", "+1-1", "-1+1", "-1-1"]


class TestProductRule:
    def test_pieces_sum_and_supports(self):
        rng = np.random.default_rng(3)
        fh = dft(E.random_data(E.RandomDataSpec(s=0.5, homogeneous=True), rng, G32), G32)
        gh = dft(E.random_data(E.RandomDataSpec(s=0.5, homogeneous=True, band=(1, 16)), rng, G32), G32)
        hl, diag, lh, full = E.paraproducts(fh, gh, G32)
        assert np.max(np.abs(hl + diag + lh - full)) < 1e-10 * np.max(np.abs(full))
        f, g = idft(fh, G32), idft(gh, G32)
        ref = sum(lp_project(f, lam, G32) * lp_low(g, lam / 8, G32, closed=True) for lam in (1, 2, 4, 8, 16, 32))
        assert np.max(np.abs(idft(hl, G32) - ref)) < 1e-12

    def test_constant_f(self):
        g = E.random_data(E.RandomDataSpec(s=0.5, homogeneous=True), 4, G32)
        c = 2.5 - 1j
        d = E.product_rule_sides(np.full(G32.shape, c), g, 0.5, 0.5, G32)
        expect = abs(c) * float(sobolev_norm(g, 0.5, G32, homogeneous=True))
        assert d["full"] == pytest.approx(expect, rel=1e-12)
        assert d["term1"] == pytest.approx(d["full"], rel=1e-12)

    def test_zero_g(self):
        f = E.random_data(E.RandomDataSpec(s=0.5, homogeneous=True), 4, G32)
        d = E.product_rule_sides(f, np.zeros_like(f), 0.5, 0.5, G32)
        assert d["full"] == 0.0 and d["term1"] + d["term2"] == 0.0

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            E.product_rule_sides(np.ones(G32.shape), np.ones(G32.shape), 0.0, 0.5, G32)

    def test_series(self):
        recs = E.probe_product_rule(trials=1, scales=(2,), N=32)
        assert sorted(r.series for r in recs) == ["HL", "LH", "diag", "full"]


class TestHomogeneousProduct:
    def test_admissibility(self):
        with pytest.raises(ValueError):
            E.check_homogeneous(0.5, 0.3, 0.3)
        with pytest.raises(ValueError):
            E.check_homogeneous(2.0, -1.0, 0.0)

    def test_opposite_modes_give_zero(self):
        x1, x2 = G32.x
        f = np.exp(1j * (3 * x1 - 2 * x2))
        g = np.exp(-1j * (3 * x1 - 2 * x2))
        assert E.homogeneous_product_sides(f, g, 0.5, 0.25, 0.25, G32)[0] == pytest.approx(0.0, abs=1e-12)

    def test_zero(self):
        f = E.random_data(E.RandomDataSpec(s=0.25, homogeneous=True), 0, G32)
        assert E.homogeneous_product_sides(np.zeros_like(f), f, 0.5, 0.25, 0.25, G32)[0] == 0.0

    def test_default_exponents(self):
        recs = E.probe_homogeneous_product(trials=1, scales=(2,), N=32)
        assert recs[0].params == {"s1": 0.5, "s2": 0.25, "s3": 0.25}


class TestTrilinear:
    def _data(self, lam, seed=5):
        rng = np.random.default_rng(seed)
        spec = E.RandomDataSpec(s=0.3, support="annulus", scale=lam, components=2)
        return [E.random_data_hat(spec, rng, G32) for _ in range(3)]

    @pytest.mark.parametrize("lam", [2, 8])
    def test_matches_reference_on_doubled_grid(self, lam):
        fhats = self._data(lam)
        signs = (1, -1, 1)
        fine = Grid(64)
        times = np.linspace(0, 1, NT)
        full, low = [], []
        for t in times:
            psis = [E._pad(fh, 64) for fh in fhats]
            psis = [spinor_flow(idft(p, fine), fine, t, sg) for p, sg in zip(psis, signs)]
            prod = apply_matrix_field(recomposed_N(psis[0], psis[1], fine), psis[2])
            full.append(float(sobolev_norm(prod, 0.3, fine, components=1)))
            low.append(float(sobolev_norm(lp_low(prod, 1.0, fine, closed=True), 0.3, fine, components=1)))
        d = E.trilinear_sides(fhats, signs, 0.3, G32, nt=NT)
        assert d["full"] == pytest.approx(time_norm(full, times, 2), rel=1e-8)
        assert d["low"] == pytest.approx(time_norm(low, times, 2), rel=1e-8, abs=1e-14)

    def test_split_bounds_dominate_pieces(self):
        d = E.trilinear_sides(self._data(4), (1, 1, -1), 0.3, G32, nt=NT)
        assert d["low"] <= d["low_bound"] and d["hom"] <= d["hom_bound"]

    def test_zero_and_constant(self):
        fh = self._data(2)
        z = np.zeros_like(fh[0])
        assert E.trilinear_sides([fh[0], fh[1], z], (1, 1, 1), 0.3, G32, nt=NT)["full"] == 0.0
        const = dft(np.ones((2, 32, 32), complex), G32)
        assert E.trilinear_sides([const, const, fh[2]], (1, 1, 1), 0.3, G32, nt=NT)["full"] == 0.0

    def test_padding_size(self):
        g = Grid(256)
        assert E._padded_size(g, 3 * 32) == 256
        assert E._padded_size(g, 2 * 64) == 270  # Nyquist radius must exceed the bandwidth
        assert E._padded_size(g, 3 * 64) == 400

    def test_padded_sparse_is_same_function(self):
        fh = self._data(8)[0]
        sp = E._sparse(fh, G32).padded(48)
        fine = E._flow(sp, [0.0], 1)[:, 0]
        assert np.allclose(fine, E._pad(fh, 48))


class TestTransference:
    def test_driven_solution_matches_quadrature(self):
        rng = np.random.default_rng(6)
        spec = E.RandomDataSpec(s=0.375, support="annulus", scale=4, components=2)
        fh, hh = E.random_data_hat(spec, rng, G32), E.random_data_hat(spec, rng, G32)
        omega, T = 1.7, 0.6
        got = E.driven_solution_hat(fh, hh, omega, G32, [T])[:, 0]
        s_nodes, w = np.polynomial.legendre.leggauss(40)
        s_nodes = 0.5 * T * (s_nodes + 1)
        h = idft(hh, G32)
        integral = sum(wk * 0.5 * T * free_propagator(np.exp(1j * omega * sk) * h, G32, T - sk)
                       for sk, wk in zip(s_nodes, w))
        expect = dft(free_propagator(idft(fh, G32), G32, T) + integral, G32)
        assert np.max(np.abs(got - expect)) < 1e-9 * np.max(np.abs(expect))

    def test_free_case_reduces_to_homogeneous(self):
        rng = np.random.default_rng(7)
        spec = E.RandomDataSpec(s=0.375, support="annulus", scale=4, components=2)
        fh = E.random_data_hat(spec, rng, G32)
        g0 = E.random_data(E.RandomDataSpec(s=0.375, homogeneous=True, support="annulus", scale=4), rng, G32)
        times = np.linspace(0, 1, NT)
        f = idft(fh, G32)
        prods = np.stack([free_propagator(f, G32, t).sum(axis=0) * half_wave(g0, G32, t) for t in times])
        lhs, rhs = E.transference_sides(fh, np.zeros_like(fh), 0.0, dft(g0, G32), G32, nt=NT)
        assert lhs == pytest.approx(mixed_norm(prods, times, 4, 2, G32), rel=1e-10)
        y = float(sobolev_norm(f, 0.375, G32, components=1))
        assert rhs == pytest.approx(y * float(sobolev_norm(g0, 0.375, G32, homogeneous=True)), rel=1e-10)

    def test_zero_solution(self):
        z = np.zeros((2, 32, 32), complex)
        g0 = dft(E.random_data(E.RandomDataSpec(s=0.375, homogeneous=True), 0, G32), G32)
        lhs, rhs = E.transference_sides(z, z, 0.3, g0, G32, nt=NT)
        assert lhs == 0.0 and rhs == 0.0


@pytest.mark.parametrize("name", sorted(E.PROBES))
def test_probe_deterministic(name):
    kw = {"trials": 2, "scales": (1, 4), "N": 32}
    if name in ("bilinear_strichartz", "N_estimate", "trilinear", "transference"):
        kw["nt"] = NT
    first = E.PROBES[name](**kw)
    assert first == E.PROBES[name](**kw)
    assert all(r.ratio >= 0 for r in first)
    assert first != E.PROBES[name](**dict(kw, seed=1))
