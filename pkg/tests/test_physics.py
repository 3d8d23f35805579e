import numpy as np
import pytest

from cardiomm.physics import (CoilSensitivities, KSpaceVolume, PhysicsShapeError,
                              adjoint_model, coil_combine, coil_compress, coil_expand, fft2c,
                              forward_model, ifft2c, normalize_sensitivities, sos)
from cardiomm.phantom import simulate_coils

from .conftest import complex_normal


class TestFFT:
    def test_roundtrip(self, rng):
        x = complex_normal(rng, (3, 17, 12))
        assert np.max(np.abs(ifft2c(fft2c(x)) - x)) <= 1e-12

    def test_orthonormal(self, rng):
        x = complex_normal(rng, (16, 16))
        np.testing.assert_allclose(np.linalg.norm(fft2c(x)), np.linalg.norm(x), rtol=1e-12)

    def test_dc_at_centre(self):
        k = fft2c(np.ones((8, 6)))
        assert np.unravel_index(np.argmax(np.abs(k)), k.shape) == (4, 3)


class TestEncodingOperator:
    def test_adjoint_inner_product_over_seeds(self):
        worst = 0.0
        for seed in range(100):
            r = np.random.default_rng(seed)
            maps = complex_normal(r, (3, 8, 10))
            mask = (r.random((8, 10)) < 0.4).astype(float)
            x, y = complex_normal(r, (8, 10)), complex_normal(r, (3, 8, 10))
            lhs = np.vdot(forward_model(x, maps, mask), y)
            rhs = np.vdot(x, adjoint_model(y, maps, mask))
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
        assert worst <= 1e-10

    def test_combine_expand_identity(self, rng):
        maps = simulate_coils(6, (24, 20), seed=2)
        x = complex_normal(rng, (24, 20))
        np.testing.assert_allclose(coil_combine(coil_expand(x, maps), maps), x, atol=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(PhysicsShapeError):
            coil_expand(np.zeros((4, 4)), np.zeros((2, 4, 5)))

    def test_normalization(self, rng):
        maps = normalize_sensitivities(complex_normal(rng, (4, 6, 6)))
        np.testing.assert_allclose(np.sum(np.abs(maps) ** 2, axis=0), 1.0, atol=1e-12)
        assert CoilSensitivities(maps).normalization_error() < 1e-12


class TestCoilCompression:
    def test_full_rank_preserves_sos(self, rng):
        k = complex_normal(rng, (5, 12, 12))
        res = coil_compress(k, keep=5)
        np.testing.assert_allclose(sos(ifft2c(res.kspace)), sos(ifft2c(k)), atol=1e-8)
        assert res.energy_retained == pytest.approx(1.0)

    def test_rank_deficient_data_compresses_losslessly(self, rng):
        mix = complex_normal(rng, (6, 2))
        k = np.einsum("cv,vyx->cyx", mix, complex_normal(rng, (2, 10, 10)))
        res = coil_compress(k, keep=2)
        np.testing.assert_allclose(sos(ifft2c(res.kspace)), sos(ifft2c(k)), atol=1e-8)

    @pytest.mark.parametrize("keep", [0, 7])
    def test_invalid_keep(self, rng, keep):
        with pytest.raises(ValueError):
            coil_compress(complex_normal(rng, (6, 4, 4)), keep)


class TestKSpaceVolume:
    def test_validates_shape(self):
        with pytest.raises(PhysicsShapeError):
            KSpaceVolume(np.zeros((4, 4), dtype=complex))

    def test_rejects_non_finite(self):
        data = np.zeros((2, 4, 4), dtype=complex)
        data[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            KSpaceVolume(data)
