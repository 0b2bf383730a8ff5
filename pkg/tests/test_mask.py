import csv

import numpy as np
import pytest

from ofdmshape.config import LEFT, RIGHT, desk_profile, full_profile
from ofdmshape.mask import (CarrierPlan, EmissionMask, MaskError, carrier_terms, cost_report, evaluate_plan,
                            plan_mask, plan_pulses, write_plan_csv)
from ofdmshape.optimize import adaptive_optimize, local_optimize_edge

from oracles import table_one

HOLE_NOTCHES = [(0, 1024), (3022, 3026), (3072, 4095)]


def test_from_notches_hole_scenario():
    mask = EmissionMask.from_notches(4096, HOLE_NOTCHES)
    assert mask.passbands == ((1025, 3021), (3027, 3071))
    assert mask.widths() == [1995, 43]
    labels = [b.label for b in mask.notch_components()]
    assert labels == [(3021, 3027), (3071, 1025)]
    hole = mask.notch_components()[0]
    assert hole.measure == pytest.approx(6 / 4096)


def test_mask_validation():
    with pytest.raises(MaskError):
        EmissionMask(256, ((10, 20), (21, 40)))
    with pytest.raises(MaskError):
        EmissionMask(256, ())
    with pytest.raises(MaskError):
        EmissionMask(256, ((10, 300),))
    with pytest.raises(MaskError):
        EmissionMask(256, ((100, 105),)).validate(desk_profile())
    with pytest.raises(MaskError):
        EmissionMask.from_notches(16, [(0, 15)])


def test_mask_dict_round_trip(tmp_path):
    mask = EmissionMask(256, ((20, 60), (80, 200)), name="m")
    assert EmissionMask.from_dict(mask.to_dict()) == mask
    p = tmp_path / "m.json"
    import json
    p.write_text(json.dumps({"n": 256, "notches": [[0, 19], [61, 79], [201, 255]]}))
    assert EmissionMask.load(p).passbands == mask.passbands


def test_rc_plan_roles():
    cfg = desk_profile()
    mask = EmissionMask(256, ((20, 60),))
    plan = plan_mask(cfg, mask)
    assert plan.data_carriers == list(range(21, 60))
    narrow = plan_mask(cfg, mask, rc_data="plan")
    assert narrow.data_carriers == list(range(23, 58))


def test_wide_plan_layout():
    cfg = desk_profile(n_co=1, nh_max=5)
    bank = local_optimize_edge(cfg, 64, LEFT, "cc")
    mask = EmissionMask(256, ((10, 240),))
    plan = plan_mask(cfg, mask, bank)
    assert plan.cc_carriers == [9, 10, 11, 12, 238, 239, 240, 241]
    shaped = plan.shaped_carriers
    assert shaped == [13, 14, 15, 16, 17, 233, 234, 235, 236, 237]
    assert len(shaped) == 2 * cfg.nh_max
    assert plan.counts() == dict(data=237 - 13 + 1, shaped=10, cc=8)
    for k in shaped:
        assert len(plan.coefficients[k]) == 1
    assert plan.role[8] == "null" and plan.role[242] == "null"


def test_narrow_plan_uses_dual_pulses():
    cfg = desk_profile(n_co=1, nh_min=3, nh_max=6)
    bank = adaptive_optimize(cfg, 64, "cc")
    mask = EmissionMask(256, ((100, 100 + 10 + 1),))
    plan = plan_mask(cfg, mask, bank)
    assert plan.shaped_carriers == list(range(103, 109))
    for k in plan.shaped_carriers:
        left, right = plan.coefficients[k]
        assert left.i == k - 100 and right.i == k - 111


def test_local_bank_refused_for_narrow():
    cfg = desk_profile(n_co=1, nh_max=5)
    bank = local_optimize_edge(cfg, 64, LEFT, "cc")
    mask = EmissionMask(256, ((100, 115),))
    with pytest.raises(MaskError, match=r"\(100, 115\)"):
        plan_mask(cfg, mask, bank)
    plan = plan_mask(cfg, mask, bank, allow_local_narrow=True)
    assert plan.shaped_carriers


def test_cc_collision():
    cfg = desk_profile(n_co=2, nh_min=1, nh_max=2)
    bank = local_optimize_edge(cfg, 64, LEFT, "cc")
    mask = EmissionMask(256, ((20, 60), (63, 120)))
    with pytest.raises(MaskError, match="collide"):
        plan_mask(cfg, mask, bank, allow_local_narrow=True)


def test_cc_outside_band_range():
    cfg = desk_profile(n_co=2, nh_max=4)
    bank = local_optimize_edge(cfg, 64, LEFT, "cc")
    with pytest.raises(MaskError):
        plan_mask(cfg, EmissionMask(256, ((1, 100),)), bank)


def test_hole_scenario_layout():
    cfg = full_profile(n_co=0)
    mask = EmissionMask.from_notches(4096, HOLE_NOTCHES)
    terms = carrier_terms(cfg, mask)
    first = [k for k in terms if k < 3021]
    second = [k for k in terms if k > 3027]
    assert len(first) == 26
    # N_D = 43 lies between the dual-pulse widths and the wide threshold: each edge shapes 13 carriers alone
    assert second == list(range(3030, 3043)) + list(range(3056, 3069))
    assert all(len(terms[k]) == 1 for k in first + second)


def test_plan_is_deterministic():
    cfg = desk_profile(n_co=1, nh_min=3, nh_max=5)
    bank = adaptive_optimize(cfg, 64, "cc")
    mask = EmissionMask(256, ((20, 60), (80, 200)))
    a, b = plan_mask(cfg, mask, bank), plan_mask(cfg, mask, bank)
    assert a.role == b.role and a.terms == b.terms
    for k in a.coefficients:
        for x, y in zip(a.coefficients[k], b.coefficients[k]):
            np.testing.assert_array_equal(x.vector(), y.vector())
    _, ra = evaluate_plan(a)
    _, rb = evaluate_plan(b)
    assert ra == rb


def test_plan_csv(tmp_path):
    cfg = desk_profile(n_co=1, nh_max=4)
    bank = local_optimize_edge(cfg, 64, LEFT, "cc")
    plan = plan_mask(cfg, EmissionMask(256, ((10, 240),)), bank)
    p = tmp_path / "plan.csv"
    write_plan_csv(p, plan, {"cfg_hash": cfg.digest()})
    lines = p.read_text().splitlines()
    assert lines[0] == f"# cfg_hash={cfg.digest()}"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 256
    assert rows[13] == dict(index="13", role="shaped", edge="10", i="3", j="")
    assert rows[9]["role"] == "cc" and rows[9]["i"] == "-1"
    assert rows[236] == dict(index="236", role="shaped", edge="240", i="", j="-4")


def test_cost_report_matches_table_formulas():
    rng = np.random.default_rng(12)
    for _ in range(20):
        beta = int(rng.choice([16, 32, 64, 128]))
        n = beta * int(rng.choice([4, 8, 16]))
        cfg = full_profile(n=n, n_gi=2 * beta, beta=beta, n_ci=int(rng.integers(0, 4)),
                           n_co=int(rng.integers(0, 4)), n_q=int(rng.integers(1, 4)),
                           nh_max=int(rng.integers(4, 16)))
        shaped = int(rng.integers(0, 200))
        want = table_one(shaped, cfg.n_cc, 2 * cfg.n_q, cfg.nh_max, cfg.ratio)
        for scheme in ("A", "B"):
            got = cost_report(cfg, shaped, scheme)
            assert (got["products"], got["stored"]) == (want[scheme]["products"], want[scheme]["stored"])


def test_cost_report_reads_plan():
    cfg = desk_profile(n_co=1, nh_max=4)
    bank = local_optimize_edge(cfg, 64, LEFT, "cc")
    plan = plan_mask(cfg, EmissionMask(256, ((10, 240),)), bank)
    assert cost_report(cfg, plan, "A")["shaped"] == 8
    with pytest.raises(ValueError):
        cost_report(cfg, plan, "C")
