import json

import numpy as np
import pytest

from ofdmshape.coefficients import BankFormatError, BankSet, EdgeBank, EdgeCoefficients, read_banks, write_banks
from ofdmshape.config import LEFT, RIGHT, desk_profile
from ofdmshape.mask import EmissionMask
from ofdmshape.optimize import adaptive_optimize_harmonic, adhoc_optimize, local_optimize_edge


@pytest.fixture(scope="module")
def cfg():
    return desk_profile(n_co=1, nh_min=3, nh_max=4)


def same_coeffs(a, b):
    assert a.flavor == b.flavor and a.i == b.i and a.residue == b.residue
    np.testing.assert_array_equal(a.vector(), b.vector())


def test_vector_round_trip():
    rng = np.random.default_rng(0)
    g = rng.standard_normal(13) + 1j * rng.standard_normal(13)
    c = EdgeCoefficients.from_vector(g, flavor="cc+harmonic", i=3, n_cc=5, residue=2)
    assert c.eps_start.size == 4
    np.testing.assert_array_equal(c.vector(), g)
    with pytest.raises(ValueError):
        EdgeCoefficients.from_vector(g[:12], flavor="cc+harmonic", i=3, n_cc=5)


def test_coefficient_validation():
    with pytest.raises(ValueError):
        EdgeCoefficients(np.ones(5), "cc", 0)
    with pytest.raises(ValueError):
        EdgeCoefficients(np.ones(5), "cc+zeta", 2)
    with pytest.raises(ValueError):
        EdgeCoefficients(np.ones(5), "cc", 2, zeta=np.ones(3))
    with pytest.raises(ValueError):
        EdgeCoefficients(np.ones(5), "cc+harmonic", 2, eps_start=np.ones(3), eps_end=np.ones(4))
    assert EdgeCoefficients(np.ones(5), "cc", -2).orientation == RIGHT


def test_bank_rejects_mixed_columns():
    a = EdgeCoefficients(np.ones(5), "cc", 3)
    b = EdgeCoefficients(np.ones(5), "cc", -3)
    with pytest.raises(ValueError):
        EdgeBank([a, b], 10, LEFT, "cc")


def test_bank_file_round_trip(tmp_path, cfg):
    bank = local_optimize_edge(cfg, 64, LEFT, "cc+harmonic")
    p = tmp_path / "b.json"
    write_banks(p, bank, cfg, {"note": "x"})
    got, got_cfg = read_banks(p)
    assert got_cfg == cfg
    assert isinstance(got, EdgeBank) and got.edge == 64 and got.orientation == LEFT
    for a, b in zip(bank.columns, got.columns):
        same_coeffs(a, b)
    assert json.loads(p.read_text())["provenance"] == {"note": "x"}


def test_bankset_round_trip(tmp_path, cfg):
    s = adaptive_optimize_harmonic(cfg, 64)
    p = tmp_path / "s.json"
    write_banks(p, s, cfg)
    got, _ = read_banks(p)
    assert isinstance(got, BankSet) and len(got) == cfg.ratio and got.base_edge == 64
    for x, y in zip(s.banks, got.banks):
        for a, b in zip(x.columns, y.columns):
            same_coeffs(a, b)
    assert got.bank_for_residue(3, cfg.ratio).edge % cfg.ratio == 3


def test_adhoc_round_trip(tmp_path, cfg):
    mask = EmissionMask(256, ((60, 120),))
    coeffs = adhoc_optimize(cfg, mask, "cc")
    p = tmp_path / "a.json"
    write_banks(p, coeffs, cfg)
    got, _ = read_banks(p)
    assert sorted(got) == sorted(coeffs)
    for k in coeffs:
        for a, b in zip(coeffs[k], got[k]):
            same_coeffs(a, b)


def test_malformed_files(tmp_path, cfg):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(BankFormatError):
        read_banks(p)
    p.write_text(json.dumps({"format": "other"}))
    with pytest.raises(BankFormatError):
        read_banks(p)
    with pytest.raises(BankFormatError):
        read_banks(tmp_path / "missing.json")
    bank = local_optimize_edge(cfg, 64, LEFT, "cc")
    good = tmp_path / "good.json"
    write_banks(good, bank, cfg)
    doc = json.loads(good.read_text())
    doc["cfg"]["n_co"] = 2
    p.write_text(json.dumps(doc))
    with pytest.raises(BankFormatError, match="hash"):
        read_banks(p)
    doc = json.loads(good.read_text())
    del doc["banks"][0]["columns"][0]["alpha"]
    p.write_text(json.dumps(doc))
    with pytest.raises(BankFormatError):
        read_banks(p)


def test_write_rejects_unknown_objects(tmp_path, cfg):
    with pytest.raises(TypeError):
        write_banks(tmp_path / "x.json", [1, 2], cfg)
