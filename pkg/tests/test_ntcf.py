import numpy as np
import pytest

from qextlab import ntcf
from qextlab.config import make_config
from qextlab.errors import (ArgumentError, ConfigurationError, DecodeError,
                            DomainError, InversionError, ProtocolOrderError,
                            StateConsumedError)
from qextlab.rng import PrfStream


@pytest.fixture(scope="module")
def keypair():
    cfg = make_config("toy8")
    return cfg.ntcf, *ntcf.gen(cfg.ntcf, PrfStream(b"\x01" * 32, "t"))


def test_roundtrip(keypair):
    params, key, td = keypair
    rng = PrfStream(b"\x02" * 32, "rt")
    for _ in range(50):
        b = rng.bit()
        x = rng.randint(0, params.domain_size - 1)
        y = ntcf.eval_prime(key, b, x, rng)
        assert ntcf.chk(key, b, x, y)
        assert ntcf.inv(td, b, y) == x


def test_chk_rejects_wrong_preimage(keypair):
    params, key, td = keypair
    rng = PrfStream(b"\x03" * 32, "neg")
    y = ntcf.eval_prime(key, 0, 7, rng)
    assert not ntcf.chk(key, 0, 8, y)
    assert not ntcf.chk(key, 1, 7, y)  # wrong branch, same x


def test_claw_bijection_exhaustive(keypair):
    params, key, td = keypair
    seen = set()
    for x0 in range(params.domain_size):
        x1 = ntcf.claw_partner(td, x0)
        assert 0 <= x1 < params.domain_size
        assert x1 != x0  # s is nonzero on a full digit
        seen.add(x1)
    assert len(seen) == params.domain_size


def test_claw_supports_coincide(keypair):
    """Both branches of a claw must land on the same center."""
    params, key, td = keypair
    rng = PrfStream(b"\x04" * 32, "claw")
    for x0 in (0, 1, 100, 255):
        x1 = ntcf.claw_partner(td, x0)
        y = ntcf.eval_prime(key, 0, x0, rng)
        assert ntcf.chk(key, 1, x1, y)
        claw = ntcf.claw_of(td, y)
        assert (claw.x0, claw.x1) == (x0, x1)


def test_inv_no_preimage(keypair):
    params, key, td = keypair
    rng = PrfStream(b"\x05" * 32, "far")
    y = ntcf.eval_prime(key, 0, 3, rng)
    # push outside every noise ball
    bad = (y + 2 * params.noise_bound + 1) % params.q
    with pytest.raises(InversionError):
        ntcf.inv(td, 0, bad)


def test_domain_errors(keypair):
    params, key, td = keypair
    rng = PrfStream(b"\x06" * 32, "dom")
    with pytest.raises(DomainError):
        ntcf.eval_prime(key, 0, params.domain_size, rng)
    with pytest.raises(ArgumentError):
        ntcf.eval_prime(key, 2, 0, rng)
    with pytest.raises(DomainError):
        ntcf.j_encode(params, -1)


def test_j_codec(keypair):
    params = keypair[0]
    for x in (0, 1, 128, 255):
        assert ntcf.j_decode(params, ntcf.j_encode(params, x)) == x
    with pytest.raises(DecodeError):
        ntcf.j_decode(params, np.ones(params.w_len, dtype=np.int64) * 2)
    too_big = ntcf.j_encode(params, 255).copy()
    too_big[params.x_bits] = 1  # outside the image of J
    with pytest.raises(DecodeError):
        ntcf.j_decode(params, too_big)


def test_gen_determinism(keypair):
    params = keypair[0]
    k1, t1 = ntcf.gen(params, PrfStream(b"\x07" * 32, "g"))
    k2, t2 = ntcf.gen(params, PrfStream(b"\x07" * 32, "g"))
    assert k1.to_bytes() == k2.to_bytes()
    assert np.array_equal(t1.s, t2.s)


def test_params_validation():
    with pytest.raises(ConfigurationError):
        ntcf.NtcfParams(n=4, m=8, q=64, noise_bound=20, x_bits=8, w_len=16)
    with pytest.raises(ConfigurationError):
        ntcf.NtcfParams(n=1, m=8, q=4, noise_bound=0, x_bits=8, w_len=16)


def test_device_preimage_challenge(keypair):
    params, key, td = keypair
    dev = ntcf.SimulatedDevice(key, td, PrfStream(b"\x08" * 32, "d"))
    y = dev.gen_y()
    resp = dev.measure(0)
    assert resp.kind == "preimage"
    assert ntcf.chk(key, resp.b, resp.x, y)


def test_device_equation_challenge(keypair):
    params, key, td = keypair
    dev = ntcf.SimulatedDevice(key, td, PrfStream(b"\x09" * 32, "d"))
    y = dev.gen_y()
    claw = ntcf.claw_of(td, y)
    resp = dev.measure(1)
    assert resp.kind == "equation"
    assert np.any(resp.d != 0)
    delta = ntcf.j_encode(params, claw.x0) ^ ntcf.j_encode(params, claw.x1)
    assert resp.u == int((resp.d & delta).sum() % 2)


def test_device_single_shot(keypair):
    params, key, td = keypair
    dev = ntcf.SimulatedDevice(key, td, PrfStream(b"\x0a" * 32, "d"))
    with pytest.raises(ProtocolOrderError):
        dev.measure(0)
    dev.gen_y()
    with pytest.raises(ProtocolOrderError):
        dev.gen_y()
    dev.measure(1)
    with pytest.raises(StateConsumedError):
        dev.measure(0)
