import math

import numpy as np
import pytest

import hvfa


def test_select_grid_worked_case():
    assert hvfa.select_grid(448, 672, max_subimages=9, patch=224) == (2, 3)
    best = max(hvfa.score_grids(448, 672), key=lambda s: s["total"])
    assert best["total"] == pytest.approx(2.0)


def test_pyramid_plan_doubles_grid():
    plans = hvfa.pyramid_plan(448, 672, scales=3)
    assert [p["grid"] for p in plans] == [(1, 1), (2, 3), (4, 6), (8, 12)]
    for p in plans:
        assert sum(r[2] * r[3] for r in p["rects"]) == 448 * 672


def test_cost_model_reference_numbers():
    with_fold = hvfa.cost_estimate(3, 3, q=32, scales=2, hvfa=True)
    without = hvfa.cost_estimate(3, 3, q=32, scales=2, hvfa=False)
    assert with_fold["visual_tokens"] == 320
    assert without["visual_tokens"] == 1472
    assert without["llm_cost_units"] / with_fold["llm_cost_units"] == pytest.approx(21.16, abs=1e-9)
    c = hvfa.cost_compare(4, 4, q=32, a_scales=1, b_scales=2)
    assert c["asymptotic_llm_ratio"] == pytest.approx(25.0)
    assert c["asymptotic_encoder_ratio"] == pytest.approx(5.0)


def test_rtpp_generate_is_deterministic_and_bounded():
    corpus = [(f"d{i}", [f"w{j}" for j in range(5 + 37 * i)]) for i in range(40)]
    a = hvfa.rtpp_generate(corpus, l_max=64, seed=11)
    b = hvfa.rtpp_generate(corpus, l_max=64, seed=11, threads=4)
    assert a == b
    for s in a:
        if s["kind"] != "rft":
            assert s["payload_tokens"] <= 64
    ptp = [s for s in a if s["kind"] == "ptp"]
    for s in ptp:
        lo, hi = hvfa.parse_ptp_answer(s["answer"])
        assert abs(lo - s["p_start"]) <= 0.005 + 1e-12
        assert abs(hi - s["p_end"]) <= 0.005 + 1e-12


def test_hvft_round_trip(tmp_path):
    x = np.arange(24, dtype=np.float64).reshape(2, 3, 4) / 7.0
    path = str(tmp_path / "x.hvft")
    hvfa.save_hvft(path, x)
    np.testing.assert_array_equal(hvfa.load_hvft(path), x)
    (tmp_path / "bad.hvft").write_bytes(b"NOPE")
    with pytest.raises(hvfa.FormatError):
        hvfa.load_hvft(str(tmp_path / "bad.hvft"))


def test_hvfa_forward_keeps_coarse_shape():
    rng = np.random.default_rng(0)
    local = [rng.uniform(-1, 1, (1, 2, 3, 8)), rng.uniform(-1, 1, (2, 4, 3, 8)), rng.uniform(-1, 1, (4, 8, 3, 8))]
    out = hvfa.hvfa_forward(local, seed=3)
    assert out["aggregated"].shape == (1, 2, 3, 8)
    assert math.isfinite(out["mse_loss"])


def test_final_loss_composition():
    loss = hvfa.final_loss(1.0, 0.5, 0.1)
    assert loss["final_loss"] == pytest.approx(1.05, abs=1e-15)


def test_gradcheck_and_collapse():
    assert hvfa.gradcheck(seed=2, variant="cross-local", scales=3)["max_rel_error"] < 1e-5
    free = hvfa.toy_train(seed=7, stopgrad=False)
    held = hvfa.toy_train(seed=7, stopgrad=True)
    assert min(row[2] for row in free) < 1e-6
    assert held[-1][2] > 1e-3
