import json

import numpy as np
import pytest

from qextlab.commit import Commitment, Opening
from qextlab.errors import RestoreError, SessionError
from qextlab.rng import PrfStream
from qextlab.session import (PROTOCOLS, Session, Transcript, decode_payload,
                             encode_payload, payload_bytes, run_session)


def test_prf_stream_determinism_and_children():
    a = PrfStream(b"\x01" * 32, "x")
    b = PrfStream(b"\x01" * 32, "x")
    assert a.take(40) == b.take(40)
    # child derivation is position-independent
    a2 = PrfStream(b"\x01" * 32, "x")
    a2.take(7)
    assert a.child("sub").take(16) == a2.child("sub").take(16)


def test_payload_codec_roundtrip():
    obj = {"a": b"\x00\x01", "b": [1, 2, 3],
           "c": np.arange(6, dtype=np.int64).reshape(2, 3),
           "d": Opening(message=b"m\x00", randomness=b"r" * 4),
           "e": None, "f": True}
    enc = encode_payload(obj)
    dec = decode_payload(json.loads(payload_bytes(obj)),
                         {"Opening": Opening, "Commitment": Commitment})
    assert dec["a"] == obj["a"]
    assert np.array_equal(dec["c"], obj["c"])
    assert dec["d"] == obj["d"]
    assert payload_bytes(dec) == payload_bytes(obj)


def test_array_payload_length_is_value_independent():
    small = payload_bytes(np.zeros(10, dtype=np.int64))
    large = payload_bytes(np.full(10, 10**12, dtype=np.int64))
    assert len(small) == len(large)


def test_transcript_jsonl_roundtrip():
    s = Session("t", b"\x02" * 32)
    s.send("a", "b", "m1", {"x": 1})
    s.send("b", "a", "m2", b"\xff")
    text = s.transcript.to_jsonl()
    t2 = Transcript.from_jsonl(text)
    assert t2.to_jsonl() == text
    assert t2.message_lengths() == s.transcript.message_lengths()


def test_session_snapshot_restore_forks_branch():
    s = Session("t", b"\x03" * 32)
    s.send("a", "b", "m1", 1)
    tok = s.snapshot()
    s.send("a", "b", "m2", 2)
    s.restore(tok)
    assert len(s.transcript.records) == 1
    s.send("a", "b", "m2-alt", 3)
    assert s.transcript.records[1]["branch"] == "b1"


def test_restore_foreign_token():
    s1 = Session("one", b"\x04" * 32)
    s2 = Session("two", b"\x04" * 32)
    tok = s1.snapshot()
    with pytest.raises(RestoreError):
        s2.restore(tok)


def test_run_session_role_order():
    from qextlab.config import make_config
    from qextlab.cqext import CqextSender, HonestClassicalReceiver
    cfg = make_config("toy8", k=2)
    assert "cqext" in PROTOCOLS
    with pytest.raises(SessionError):
        run_session(cfg, "cqext", {"receiver": None, "sender": None},
                    b"\x05" * 32)
    with pytest.raises(SessionError):
        run_session(cfg, "no-such-protocol", {}, b"\x05" * 32)


def test_same_seed_identical_transcripts():
    from qextlab.config import make_config
    from qextlab.cqext import run_honest
    from qextlab.rng import PrfStream as P
    from qextlab import cqext
    cfg = make_config("toy8", k=2)
    rng = P(cfg.seed, "in")
    inst, wit = cqext.HashPreimageRelation.sample(rng)
    si = cqext.CqextSenderInput(instance=inst, witness=wit,
                                seed=rng.take(32))
    texts = []
    for _ in range(2):
        s = Session("same", b"\x06" * 32)
        run_honest(cfg, si, "classical", s)
        texts.append(s.transcript.to_jsonl())
    assert texts[0] == texts[1]
