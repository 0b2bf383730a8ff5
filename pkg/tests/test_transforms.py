import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ofdmshape.bands import band_matrix, notched_band
from ofdmshape.coefficients import BankSet, EdgeCoefficients
from ofdmshape.config import LEFT, RIGHT, desk_profile
from ofdmshape.optimize import adaptive_optimize_harmonic, local_optimize_edge
from ofdmshape.pulses import assemble_pulse, basic_pulse
from ofdmshape.transforms import (UnsupportedTransformError, derivation_matrix, derive_bank, reverse_basic,
                                  reverse_coefficients, reversed_carrier, shift_bank, shift_coefficients,
                                  to_sample_domain)

from cases import transform_case


@pytest.fixture(scope="module")
def cfg():
    return desk_profile(n_co=1)


def random_coeffs(rng, cfg, flavor, edge, i):
    def c(n):
        return rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if flavor == "cc":
        return EdgeCoefficients(c(cfg.n_cc), flavor, i)
    if flavor == "cc+zeta":
        return EdgeCoefficients(c(cfg.n_cc), flavor, i, zeta=c(2 * cfg.beta))
    nqq = cfg.n_qq(edge)
    return EdgeCoefficients(c(cfg.n_cc), flavor, i, eps_start=c(nqq), eps_end=c(nqq), residue=edge % cfg.ratio)


@pytest.mark.parametrize("flavor", ["cc", "cc+zeta", "cc+harmonic"])
def test_shift_moves_the_pulse(cfg, flavor):
    # the shifted coefficients build exactly the frequency-shifted pulse
    rng = np.random.default_rng(2)
    k, i = 60, 4
    c = random_coeffs(rng, cfg, flavor, k - i, i)
    for dk in (8, -16, 64):
        moved = shift_coefficients(c, dk, cfg)
        from ofdmshape.pulses import omega
        np.testing.assert_allclose(assemble_pulse(cfg, k + dk, moved), omega(cfg, dk) * assemble_pulse(cfg, k, c),
                                   atol=1e-12)


def test_zero_shift_is_identity(cfg):
    c = random_coeffs(np.random.default_rng(0), cfg, "cc+harmonic", 40, 3)
    assert shift_coefficients(c, 0, cfg) is c


def test_harmonic_shift_needs_multiple_of_ratio(cfg):
    c = random_coeffs(np.random.default_rng(0), cfg, "cc+harmonic", 40, 3)
    with pytest.raises(UnsupportedTransformError):
        shift_coefficients(c, 3, cfg)


def test_harmonic_start_phase_for_ratio_shift():
    # exp(-j 2 pi R N_GI / N) = exp(-j 2 pi N_GI / beta) = 1 when beta divides N_GI
    cfg = desk_profile()
    c = random_coeffs(np.random.default_rng(1), cfg, "cc+harmonic", 40, 3)
    moved = shift_coefficients(c, cfg.ratio, cfg)
    np.testing.assert_allclose(moved.eps_start, c.eps_start, atol=1e-12)
    np.testing.assert_array_equal(moved.alpha, c.alpha)
    assert moved.residue == c.residue


@pytest.mark.parametrize("flavor", ["cc", "cc+zeta", "cc+harmonic"])
def test_shift_unitarity(cfg, flavor):
    rng = np.random.default_rng(3)
    c = random_coeffs(rng, cfg, flavor, 48, 3)
    back = shift_coefficients(shift_coefficients(c, 40, cfg), -40, cfg)
    np.testing.assert_allclose(back.vector(), c.vector(), atol=1e-12)


@pytest.mark.parametrize("flavor", ["cc", "cc+zeta", "cc+harmonic"])
def test_double_reversal_is_identity(cfg, flavor):
    rng = np.random.default_rng(4)
    for k in (20, 100, 128, 131, 200):
        c = random_coeffs(rng, cfg, flavor, k - 3, 3)
        once = reverse_coefficients(c, k, cfg)
        assert once.i == -3
        twice = reverse_coefficients(once, reversed_carrier(cfg, k, flavor), cfg)
        np.testing.assert_allclose(twice.vector(), c.vector(), rtol=0, atol=1e-12)
        assert twice.i == c.i and twice.residue == c.residue


def test_real_coefficients_self_mirror(cfg):
    c = EdgeCoefficients(np.arange(cfg.n_cc, dtype=float), "cc+zeta", 3, zeta=np.ones(2 * cfg.beta))
    m = reverse_coefficients(c, cfg.n // 2, cfg)
    np.testing.assert_array_equal(m.alpha, c.alpha)
    np.testing.assert_array_equal(m.zeta, c.zeta)


@pytest.mark.parametrize("flavor", ["cc", "cc+zeta", "cc+harmonic"])
def test_reversal_mirrors_spectrum(cfg, flavor):
    rng = np.random.default_rng(5)
    k, i = 70, 5
    c = random_coeffs(rng, cfg, flavor, k - i, i)
    h = assemble_pulse(cfg, k, c)
    km = reversed_carrier(cfg, k, flavor)
    hm = assemble_pulse(cfg, km, reverse_coefficients(c, k, cfg))
    points = 8 * cfg.n
    H = np.abs(np.fft.fft(h, points))
    Hm = np.abs(np.fft.fft(hm, points))
    # the harmonic result sits (km - (N - k)) carriers away from the plain mirror
    roll = 8 * (km - (cfg.n - k))
    mirrored = np.roll(H[(-np.arange(points)) % points], roll)
    np.testing.assert_allclose(Hm, mirrored, atol=1e-9 * H.max())


def test_reversed_carrier_rounding():
    cfg = desk_profile()
    assert reversed_carrier(cfg, 70, "cc") == 70
    # (2k - N)/R = -116/8 = -14.5 rounds to the even -14
    assert reversed_carrier(cfg, 70, "cc+harmonic") == 256 - 70 - 112
    assert reversed_carrier(cfg, 74, "cc+harmonic") == 256 - 74 - 112  # -13.5 -> -14
    with pytest.raises(ValueError):
        reversed_carrier(cfg, 254, "cc+harmonic")
    for k in range(cfg.n):
        if k in (1, 2, 254, 255):
            continue
        km = reversed_carrier(cfg, k, "cc+harmonic")
        assert reversed_carrier(cfg, km, "cc+harmonic") == k
        assert (km - (cfg.n - k)) % cfg.ratio == 0


def test_transformed_optimum_keeps_its_energy():
    cfg = desk_profile(n_co=1)
    rng = np.random.default_rng(6)
    for flavor in ("cc", "cc+zeta", "cc+harmonic"):
        for _ in range(4):
            e0, e1, e2 = transform_case(cfg, rng, flavor)
            assert e1 == pytest.approx(e0, rel=1e-10)
            if e2 is not None:
                assert e2 == pytest.approx(e0, rel=1e-10)


def test_to_sample_domain_exact(cfg):
    rng = np.random.default_rng(7)
    edge, i = 41, 4
    c = random_coeffs(rng, cfg, "cc+harmonic", edge, i)
    z = to_sample_domain(c, edge, cfg)
    assert z.flavor == "cc+zeta"
    np.testing.assert_allclose(assemble_pulse(cfg, edge + i, z), assemble_pulse(cfg, edge + i, c), atol=1e-12)
    plain = random_coeffs(rng, cfg, "cc", edge, i)
    assert to_sample_domain(plain, edge, cfg) is plain


@pytest.mark.parametrize("flavor", ["cc", "cc+harmonic"])
def test_derivation_matrix_matches_transforms(cfg, flavor):
    rng = np.random.default_rng(8)
    src, i = 64, 3
    c = random_coeffs(rng, cfg, flavor, src, i)
    size = c.vector().size
    for target, orientation in ((96, LEFT), (160, RIGHT)):
        if flavor == "cc+harmonic" and orientation == RIGHT:
            target = (-src) % cfg.ratio + 152
        T = derivation_matrix(cfg, flavor, size, src, target, orientation)
        v = c.vector()
        got = T @ np.concatenate([v.real, v.imag])
        if orientation == LEFT:
            want = shift_coefficients(c, target - src, cfg).vector()
        else:
            mirrored = reverse_basic(c, cfg)
            want = shift_coefficients(mirrored, target - (cfg.n - src), cfg).vector()
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_derive_bank_same_edge_unchanged(cfg):
    bank = local_optimize_edge(cfg, 64, LEFT, "cc", n_h=3)
    assert derive_bank(bank, 64, LEFT, cfg) is bank


def test_derived_bank_keeps_column_energy():
    cfg = desk_profile(n_co=1, nh_max=5)
    bank = local_optimize_edge(cfg, 64, LEFT, "cc+harmonic", span=0.2)
    for target, orientation in ((104, LEFT), (200, RIGHT)):
        derived = derive_bank(bank, target, orientation, cfg, sample_domain_fallback=True)
        for m in range(bank.n_h):
            k0, k1 = bank.carrier(m), derived.carrier(m)
            b0 = band_matrix(notched_band(cfg, 64, LEFT, 0.2), cfg.length)
            b1 = band_matrix(notched_band(cfg, target, orientation, 0.2), cfg.length)
            e0 = b0.quad(assemble_pulse(cfg, k0, bank.columns[m]))
            e1 = b1.quad(assemble_pulse(cfg, k1, derived.columns[m]))
            assert e1 == pytest.approx(e0, rel=1e-6, abs=1e-12)
        assert derived.orientation == orientation
        assert [derived.carrier(m) for m in range(derived.n_h)] == \
            [target + orientation * (cfg.n_ci + 1 + m) for m in range(derived.n_h)]


def test_harmonic_residue_law():
    cfg = desk_profile(n_co=1, nh_min=3, nh_max=4)
    full_set = adaptive_optimize_harmonic(cfg, 64)
    r = cfg.ratio
    for keep in range(r):
        partial = BankSet([full_set.banks[keep]], full_set.base_edge)
        l0 = full_set.banks[keep].edge % r
        for target in range(100, 100 + 2 * r):
            ok_left = target % r == l0
            ok_right = (-target) % r == l0
            for orientation, ok in ((LEFT, ok_left), (RIGHT, ok_right)):
                if ok:
                    derive_bank(partial, target, orientation, cfg)
                else:
                    with pytest.raises(UnsupportedTransformError):
                        derive_bank(partial, target, orientation, cfg)


def test_sample_domain_fallback():
    cfg = desk_profile(n_co=1, nh_max=4)
    bank = local_optimize_edge(cfg, 64, LEFT, "cc+harmonic")
    with pytest.raises(UnsupportedTransformError):
        derive_bank(bank, 65, LEFT, cfg)
    out = derive_bank(bank, 65, LEFT, cfg, sample_domain_fallback=True)
    assert out.flavor == "cc+zeta"
    assert out.provenance["converted"] == "sample-domain"


@settings(max_examples=30, deadline=None)
@given(st.integers(-20, 20), st.integers(-20, 20), st.integers(0, 2 ** 32 - 1))
def test_shift_composition(a, b, seed):
    cfg = desk_profile()
    rng = np.random.default_rng(seed)
    for flavor, step in (("cc+zeta", 1), ("cc+harmonic", cfg.ratio)):
        c = random_coeffs(rng, cfg, flavor, 120, 3)
        two = shift_coefficients(shift_coefficients(c, a * step, cfg), b * step, cfg)
        one = shift_coefficients(c, (a + b) * step, cfg)
        np.testing.assert_allclose(two.vector(), one.vector(), atol=1e-12)


def test_shift_bank_moves_edge(cfg):
    bank = local_optimize_edge(cfg, 64, LEFT, "cc", n_h=2)
    moved = shift_bank(bank, 10, cfg)
    assert moved.edge == 74 and moved.carrier(0) == 74 + cfg.n_ci + 1
