import numpy as np
import pytest

from qextlab.circuits import (CircuitBuilder, Functionality, pack_bits,
                              unpack_bits)
from qextlab.errors import ProtocolError, StateConsumedError
from qextlab.rng import PrfStream
from qextlab.seal import seal, unseal
from qextlab.sfe import GarbledSfe, IdealMediator, IdealSfe


def _xor_fn():
    """Toy functionality: 8-bit XOR of the two inputs, no bottom case."""
    cb = CircuitBuilder(8, 8)
    outs = [cb.xor(cb.sender_wire(i), cb.receiver_wire(i)) for i in range(8)]
    circ = cb.build(outs)
    return Functionality(
        name="xor8",
        native=lambda s, r: bytes([s[0] ^ r[0]]),
        output_len=1,
        receiver_encode=lambda r: r, receiver_len=1,
        circuit=circ, sender_encode=lambda s: s, sender_len=1)


def test_seal_roundtrip_and_tamper():
    key, nonce = b"\x01" * 32, b"\x02" * 16
    blob = seal(key, nonce, b"hello")
    assert unseal(key, blob) == b"hello"
    bad = blob[:-1] + bytes([blob[-1] ^ 1])
    with pytest.raises(ProtocolError):
        unseal(key, bad)
    with pytest.raises(ProtocolError):
        unseal(b"\x03" * 32, blob)


def test_ideal_sfe_roundtrip():
    fn = _xor_fn()
    sfe = IdealSfe(IdealMediator())
    rng = PrfStream(b"\x01" * 32, "s")
    msg1, state = sfe.receiver_msg1(fn, b"\x5a", rng)
    msg2 = sfe.sender_msg2(fn, b"\xa5", msg1, rng)
    assert sfe.receiver_output(state, msg2) == b"\xff"
    with pytest.raises(StateConsumedError):
        sfe.receiver_output(state, msg2)


def test_ideal_sfe_handle_tamper():
    fn = _xor_fn()
    sfe = IdealSfe(IdealMediator())
    rng = PrfStream(b"\x02" * 32, "s")
    msg1, _ = sfe.receiver_msg1(fn, b"\x00", rng)
    msg1.payload["handle"] = "00" * 16
    with pytest.raises(ProtocolError):
        sfe.sender_msg2(fn, b"\x01", msg1, rng)


def test_ideal_sfe_mediator_logs_sender_inputs():
    fn = _xor_fn()
    mediator = IdealMediator()
    sfe = IdealSfe(mediator)
    rng = PrfStream(b"\x03" * 32, "s")
    msg1, _ = sfe.receiver_msg1(fn, b"\x00", rng)
    sfe.sender_msg2(fn, b"\x42", msg1, rng)
    assert mediator.input_log[0][1] == b"\x42"


def test_garbled_matches_native():
    fn = _xor_fn()
    rng = PrfStream(b"\x04" * 32, "g")
    for _ in range(50):
        s_in, r_in = rng.take(1), rng.take(1)
        sfe = GarbledSfe()
        msg1, state = sfe.receiver_msg1(fn, r_in, rng)
        msg2 = sfe.sender_msg2(fn, s_in, msg1, rng)
        assert sfe.receiver_output(state, msg2, fn) == \
            bytes([s_in[0] ^ r_in[0]])


def test_garbled_message_sizes_input_independent():
    fn = _xor_fn()
    rng = PrfStream(b"\x05" * 32, "g")
    sizes = set()
    for _ in range(5):
        sfe = GarbledSfe()
        msg1, state = sfe.receiver_msg1(fn, rng.take(1), rng)
        msg2 = sfe.sender_msg2(fn, rng.take(1), msg1, rng)
        sizes.add((len(msg1.to_bytes()), len(msg2.to_bytes())))
    assert len(sizes) == 1
