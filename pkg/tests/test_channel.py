import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gymrec.beacon import Emission
from gymrec.channel import (ChannelParams, Placement, Receiver, compute_rssi, deliver,
                            mean_rssi)
from gymrec.codec import IBeaconFrame

FRAME = IBeaconFrame(bytes(16), 0, 3)
ORIGIN = Placement(0.0, 0.0)


def test_rssi_at_one_metre_is_reference():
    params = ChannelParams(reference_rssi_1m=-61.0)
    assert compute_rssi(ORIGIN, Placement(1.0, 0.0), params) == -61.0


def test_rssi_at_ten_metres():
    # -59 - 10 * 2 * log10(10) = -79
    params = ChannelParams(path_loss_exponent=2.0, reference_rssi_1m=-59.0)
    assert compute_rssi(ORIGIN, Placement(6.0, 8.0), params) == pytest.approx(-79.0)


def test_distance_floor():
    params = ChannelParams()
    assert mean_rssi(0.0, params) == mean_rssi(0.1, params) == pytest.approx(-59 + 20)


@given(st.floats(0.1, 100), st.floats(0.01, 100), st.floats(0.5, 5))
def test_rssi_decreases_with_distance(d, extra, exponent):
    params = ChannelParams(path_loss_exponent=exponent)
    assert mean_rssi(d + extra, params) < mean_rssi(d, params)


def test_noise_is_seeded():
    params = ChannelParams(noise_sigma=4.0)
    a = [compute_rssi(ORIGIN, Placement(3, 0), params, np.random.default_rng(7)) for _ in range(3)]
    b = [compute_rssi(ORIGIN, Placement(3, 0), params, np.random.default_rng(7)) for _ in range(3)]
    assert a == b
    assert a[0] != mean_rssi(3.0, params)


@pytest.mark.parametrize("kwargs", [{"path_loss_exponent": 0}, {"base_loss_prob": 1.5},
                                    {"base_loss_prob": -0.1}, {"noise_sigma": -1}])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        ChannelParams(**kwargs)


def receivers(listening=(True, True, True)):
    return [Receiver(f"r{i}", Placement(i + 1.0, 0.0), on) for i, on in enumerate(listening)]


def test_lossless_delivers_to_everyone():
    out = deliver(Emission(2.5, FRAME), ORIGIN, receivers(), ChannelParams(),
                  np.random.default_rng(0))
    assert [r.receiver for r in out] == ["r0", "r1", "r2"]
    assert all(r.t == 2.5 and r.frame == FRAME for r in out)
    assert out[0].rssi == pytest.approx(-59.0)


def test_not_listening_never_receives():
    rng = np.random.default_rng(0)
    for _ in range(200):
        out = deliver(Emission(0.0, FRAME), ORIGIN, receivers((True, False, True)),
                      ChannelParams(base_loss_prob=0.3), rng)
        assert "r1" not in {r.receiver for r in out}


def test_total_loss():
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert deliver(Emission(0.0, FRAME), ORIGIN, receivers(), ChannelParams(base_loss_prob=1.0),
                       rng) == []


def test_loss_rate_matches_probability():
    rng = np.random.default_rng(42)
    n = 20000
    got = sum(len(deliver(Emission(0.0, FRAME), ORIGIN, receivers((True,)),
                          ChannelParams(base_loss_prob=0.25), rng)) for _ in range(n))
    # 5 sigma band for a binomial(n, 0.75)
    assert abs(got - 0.75 * n) < 5 * math.sqrt(n * 0.75 * 0.25)


@given(st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_lossless_count_is_exact(n, seed):
    rng = np.random.default_rng(seed)
    total = sum(len(deliver(Emission(float(i), FRAME), ORIGIN, receivers((True,)),
                            ChannelParams(noise_sigma=3.0), rng)) for i in range(n))
    assert total == n


def test_listening_state_does_not_shift_rng_stream():
    params = ChannelParams(noise_sigma=2.0, base_loss_prob=0.5)
    a, b = np.random.default_rng(3), np.random.default_rng(3)
    deliver(Emission(0.0, FRAME), ORIGIN, receivers((True, True, True)), params, a)
    deliver(Emission(0.0, FRAME), ORIGIN, receivers((False, False, False)), params, b)
    assert a.random() == b.random()


@given(st.floats(0.2, 10), st.floats(0.01, 10))
def test_nearer_beacon_is_stronger_without_noise(near, extra):
    params = ChannelParams()
    user = Placement(0.0, 0.0)
    a = compute_rssi(Placement(near, 0.0), user, params, np.random.default_rng(0))
    b = compute_rssi(Placement(0.0, near + extra), user, params, np.random.default_rng(0))
    assert a > b
