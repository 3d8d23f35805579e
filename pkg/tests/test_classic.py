import numpy as np
import pytest

from cardiomm.classic import (CgConfig, CgDivergenceError, estimate_sens_acs, raised_cosine,
                              sense_cg, zero_filled)
from cardiomm.evaluation import psnr
from cardiomm.masks import gen_uniform
from cardiomm.phantom import (PhantomSpec, make_phantom, render, simulate_coils,
                              synthesize_kspace)
from cardiomm.physics import adjoint_model, forward_model, sos


@pytest.fixture(scope="module")
def smooth_case():
    mag = render(make_phantom(PhantomSpec(shape=(48, 48), n_frames=2)), "cine", 0)
    maps = simulate_coils(6, mag.shape, seed=4)
    rec = synthesize_kspace(mag, 6, np.inf, seed=1, maps=maps)
    return rec, maps


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"max_iters": 0}, {"tol": 0}, {"lambda_reg": -1}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            CgConfig(**kwargs)


class TestSenseCg:
    def test_full_sampling_recovers_truth(self, rng):
        maps = simulate_coils(4, (24, 24), seed=0)
        x = rng.standard_normal((24, 24)) + 1j * rng.standard_normal((24, 24))
        mask = np.ones((24, 24))
        y = forward_model(x, maps, mask)
        out = sense_cg(y, mask, maps, CgConfig(max_iters=30, tol=1e-12, lambda_reg=0.0))
        assert np.max(np.abs(out - x)) <= 1e-6

    def test_solves_normal_equations(self, rng):
        maps = simulate_coils(4, (16, 16), seed=1)
        mask = gen_uniform(16, 16, 2, acs_lines=4).grid
        y = forward_model(rng.standard_normal((16, 16)) + 0j, maps, mask)
        cfg = CgConfig(max_iters=200, tol=1e-12, lambda_reg=0.05)
        x = sense_cg(y, mask, maps, cfg)
        lhs = adjoint_model(forward_model(x, maps, mask), maps, mask) + cfg.lambda_reg * x
        np.testing.assert_allclose(lhs, adjoint_model(y, maps, mask), atol=1e-9)

    def test_trace_records_data_residual(self, smooth_case):
        rec, maps = smooth_case
        mask = gen_uniform(48, 48, 4, acs_lines=8)
        trace = []
        sense_cg(rec.kspace.astype(complex) * mask.grid, mask.grid, maps, CgConfig(), trace)
        data_res = [t[1] for t in trace]
        assert data_res[-1] < 0.1 * data_res[0]

    def test_divergence_raises(self, rng):
        maps = simulate_coils(2, (8, 8), seed=0)
        mask = gen_uniform(8, 8, 2, acs_lines=0).grid
        y = forward_model(rng.standard_normal((8, 8)) + 0j, maps, mask)
        cfg = CgConfig(max_iters=50)
        # an indefinite system (negative shift) is the only way to make CG blow up
        object.__setattr__(cfg, "lambda_reg", -0.9)
        with pytest.raises(CgDivergenceError) as info:
            sense_cg(y, mask, maps, cfg)
        assert len(info.value.trace) >= 1

    def test_sense_beats_zero_filled(self, smooth_case):
        rec, maps = smooth_case
        mask = gen_uniform(48, 48, 4, acs_lines=12)
        y = rec.kspace.astype(complex) * mask.grid
        est = estimate_sens_acs(y, mask.acs_region())
        x = sense_cg(y, mask.grid, est)
        ref = rec.reference
        assert psnr(ref, np.abs(x)) > psnr(ref, sos(zero_filled(y, mask.grid)))


class TestAcsEstimate:
    def test_normalised_on_support(self, smooth_case):
        rec, _ = smooth_case
        mask = gen_uniform(48, 48, 4, acs_lines=12)
        est = estimate_sens_acs(rec.kspace.astype(complex), mask.acs_region())
        p = np.sum(np.abs(est) ** 2, axis=0)
        assert np.all(np.isclose(p[p > 0], 1.0, atol=1e-10))

    def test_empty_acs(self, smooth_case):
        rec, _ = smooth_case
        with pytest.raises(ValueError):
            estimate_sens_acs(rec.kspace, (slice(0, 0), slice(0, 48)))

    def test_window_positive(self):
        w = raised_cosine(9)
        assert np.all(w > 0) and w[4] == pytest.approx(1.0)
