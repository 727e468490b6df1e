import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrisk.atmosphere import (
    DEFAULT_TOP,
    HPA_PER_G_CM2,
    DensityProfile,
    LinsleyAtmosphere,
    density_at,
    depth_at,
    fit_linsley,
    monthly_average,
    pressure_at,
    sample_profile,
)
from nrisk.errors import FitError, OutOfRangeError, ValidationError

from models import smooth_atmosphere

US = LinsleyAtmosphere.us_standard()
ISO = LinsleyAtmosphere.isothermal()


def test_top_of_atmosphere():
    for atm in (US, ISO):
        assert depth_at(atm, atm.top) == 0.0
        assert pressure_at(atm, atm.top) == 0.0


def test_us_standard_offsets_match_published_table():
    for got, want in zip(US.a[:3], (-186.555305, -94.919, 0.61289)):
        assert got == pytest.approx(want, rel=2e-4)
    assert abs(US.a[3]) < 1e-5


def test_isothermal_ground_values():
    assert density_at(ISO, 0.0) == pytest.approx(1.225e-3, rel=1e-15)
    # g0 * rho0 * H, in hPa.
    assert pressure_at(ISO, 0.0) == pytest.approx(HPA_PER_G_CM2 * 1.225e-3 * 843_400, rel=1e-5)


def test_upper_layer_density():
    for atm in (US, ISO):
        rho = density_at(atm, atm.top - 1e-3)
        assert 0 < rho <= 1e-9


def test_layer_boundaries_belong_to_upper_layer():
    assert US.layer_index(0.0) == 0
    assert US.layer_index(3_999.999) == 0
    assert US.layer_index(4_000.0) == 1
    assert US.layer_index(100_000.0) == 4


@pytest.mark.parametrize("h", [-1.0, DEFAULT_TOP + 1, math.nan])
def test_out_of_range(h):
    with pytest.raises(OutOfRangeError):
        depth_at(US, h)
    with pytest.raises(OutOfRangeError):
        density_at(US, h)


def test_density_undefined_at_top():
    with pytest.raises(OutOfRangeError):
        density_at(US, US.top)


def test_discontinuous_model_rejected():
    with pytest.raises(ValidationError, match="discontinuous"):
        LinsleyAtmosphere(a=(0, 0, 0, 0), b=US.b, c=US.c)


@settings(max_examples=300, deadline=None)
@given(h1=st.floats(0, DEFAULT_TOP), h2=st.floats(0, DEFAULT_TOP))
def test_depth_monotone(h1, h2):
    lo, hi = sorted((h1, h2))
    for atm in (US, ISO):
        assert depth_at(atm, lo) >= depth_at(atm, hi) >= 0


def test_lanl_like_profile_near_reference():
    # A profile starting at the LANL ground level; the fit extends down from there.
    truth = smooth_atmosphere()
    profile = sample_profile(truth, step=250.0, start=2125.0)
    fit = fit_linsley(profile)
    assert fit.atmosphere.pressure(2125.0) == pytest.approx(777, abs=15)
    assert any("below" in note for note in fit.extrapolated)


def test_single_sample_layer():
    alts = [0, 1000, 2000, 3000, 5000] + list(range(12_000, 36_000, 2000))
    atm = smooth_atmosphere()
    profile = DensityProfile(tuple(alts), tuple(atm.density(h) for h in alts))
    with pytest.raises(FitError, match="insufficient samples"):
        fit_linsley(profile)


def test_profile_must_reach_stratosphere():
    profile = sample_profile(ISO, step=500.0, stop=20_000.0)
    with pytest.raises(FitError, match="30 km"):
        fit_linsley(profile)


def test_missing_upper_layers_use_standard_values():
    fit = fit_linsley(sample_profile(ISO, step=500.0, stop=39_900.0))
    assert fit.atmosphere.b[3] == US.b[3]
    assert any("layer 4" in n for n in fit.extrapolated)
    assert fit.counts[4] == 0


def test_profile_invariants():
    with pytest.raises(ValidationError, match="at least 4"):
        DensityProfile((0, 1, 2), (3e-3, 2e-3, 1e-3))
    with pytest.raises(ValidationError, match="not above"):
        DensityProfile((0, 2, 1, 3), (4e-3, 3e-3, 2e-3, 1e-3))
    with pytest.raises(ValidationError, match="non-positive"):
        DensityProfile((0, 1, 2, 3), (4e-3, 0.0, 2e-3, 1e-3))
    with pytest.raises(ValidationError, match="rises"):
        DensityProfile((0, 500, 1000, 1500), (4e-3, 3e-3, 3.1e-3, 1e-3))


def test_monthly_average():
    p = sample_profile(ISO, step=1000.0, stop=40_000.0, meta=(("site", "LANL"), ("month", "2020-01")))
    assert monthly_average([p]).densities == p.densities
    triple = DensityProfile(p.altitudes, tuple(3 * d for d in p.densities), (("site", "LANL"), ("month", "2020-02")))
    avg = monthly_average([p, triple])
    np.testing.assert_allclose(avg.densities, [2 * d for d in p.densities], rtol=1e-15)
    assert avg.get("site") == "LANL"
    assert avg.get("window") == "2020-01..2020-02"
    assert avg.get("members") == "2"


def test_monthly_average_on_different_grids():
    a = sample_profile(ISO, step=1000.0, stop=40_000.0)
    b = sample_profile(ISO, step=500.0, start=500.0, stop=30_000.0)
    avg = monthly_average([a, b])
    assert avg.altitudes[0] == 1000.0 and avg.altitudes[-1] == 29_000.0
    with pytest.raises(ValidationError):
        monthly_average([])
