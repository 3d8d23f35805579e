import numpy as np
import pytest

from cardiomm.autodiff import set_default_dtype
from cardiomm.phantom import PhantomSpec, make_phantom, render, synthesize_kspace


@pytest.fixture(autouse=True)
def float64_mode():
    """Unit tests run in 64-bit mode; tests needing float32 switch explicitly."""
    set_default_dtype(np.float64)
    yield
    set_default_dtype(np.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_phantom():
    return make_phantom(PhantomSpec(shape=(32, 32), n_frames=4))


@pytest.fixture(scope="session")
def cine_record():
    ph = make_phantom(PhantomSpec(shape=(32, 32), n_frames=4))
    return synthesize_kspace(render(ph, "cine", 0), n_coils=4, snr=np.inf, seed=3,
                             metadata={"modality": "cine", "view": "sax", "field": 1.5,
                                       "vendor": "simulated"})


def complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ------------------------------------------------------------ acceptance report
ACCEPTANCE: dict[int, dict] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[n]
        verdict = "PASS" if entry["passed"] else "FAIL"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"criterion {n:2d} {verdict}: {entry['title']}"
                                    + (f" ({detail})" if detail else ""))
