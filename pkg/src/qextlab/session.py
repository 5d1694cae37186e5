"""Session orchestration: transcripts, seeded randomness, snapshots.

A session owns labeled RNG streams and a transcript of JSON-line records
{round, from, to, type, payload_hex}.  Snapshots deep-copy party state and
stream positions; restoring forks the transcript under a new branch id
(rewinding produces transcript trees, not lines).
"""

from __future__ import annotations

import copy
import dataclasses
import json

import numpy as np

from .errors import RestoreError, SessionError
from .rng import PrfStream


def encode_payload(obj):
    """Recursive canonical JSON encoding with type tags."""
    if obj is None or isinstance(obj, (int, str, bool)):
        return obj
    if isinstance(obj, (bytes, bytearray)):
        return {"_t": "bytes", "hex": bytes(obj).hex()}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        # fixed 8 bytes per entry: payload length is value-independent,
        # which the structural indistinguishability checks rely on
        flat = obj.astype("<i8").ravel()
        return {"_t": "array", "hex": flat.tobytes().hex(),
                "shape": list(obj.shape)}
    if isinstance(obj, (list, tuple)):
        return [encode_payload(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): encode_payload(v) for k, v in obj.items()}
    if hasattr(obj, "to_bytes") and callable(obj.to_bytes):
        return {"_t": type(obj).__name__, "hex": obj.to_bytes().hex()}
    if dataclasses.is_dataclass(obj):
        return {"_t": type(obj).__name__,
                "f": {f.name: encode_payload(getattr(obj, f.name))
                      for f in dataclasses.fields(obj)}}
    raise TypeError(f"cannot encode {type(obj).__name__}")


def payload_bytes(obj) -> bytes:
    return json.dumps(encode_payload(obj), sort_keys=True,
                      separators=(",", ":")).encode()


def decode_payload(obj, registry: dict = None):
    """Inverse of encode_payload.  Tagged dataclasses are rebuilt through
    `registry` (name -> class) when provided, else returned as dicts."""
    if obj is None or isinstance(obj, (int, str, bool)):
        return obj
    if isinstance(obj, list):
        return [decode_payload(v, registry) for v in obj]
    if isinstance(obj, dict):
        tag = obj.get("_t")
        if tag == "bytes":
            return bytes.fromhex(obj["hex"])
        if tag == "array":
            flat = np.frombuffer(bytes.fromhex(obj["hex"]), dtype="<i8")
            return flat.reshape(obj["shape"]).astype(np.int64)
        if tag is not None and "f" in obj:
            fields = {k: decode_payload(v, registry)
                      for k, v in obj["f"].items()}
            if registry and tag in registry:
                return registry[tag](**fields)
            return {"_t": tag, **fields}
        if tag is not None and "hex" in obj:
            # to_bytes shortcut; only the raw bytes survive the round trip
            if registry and tag in registry:
                return registry[tag](bytes.fromhex(obj["hex"]))
            return {"_t": tag, "hex": obj["hex"]}
        return {k: decode_payload(v, registry) for k, v in obj.items()}
    raise TypeError(f"cannot decode {type(obj).__name__}")


@dataclasses.dataclass
class AbortRecord:
    round: int
    party: str
    reason: str


class Transcript:
    def __init__(self, session_id: str):
        self.session_id = session_id
        self.records = []
        self.abort: AbortRecord | None = None

    def add(self, round_no: int, sender: str, receiver: str, mtype: str,
            payload, branch: str = ""):
        self.records.append({
            "round": round_no, "from": sender, "to": receiver,
            "type": mtype, "branch": branch,
            "payload_hex": payload_bytes(payload).hex()})

    def add_abort(self, rec: AbortRecord):
        self.abort = rec
        self.records.append({"round": rec.round, "party": rec.party,
                             "reason": rec.reason, "type": "abort"})

    def to_jsonl(self) -> str:
        head = {"session": self.session_id}
        lines = [json.dumps(head, sort_keys=True, separators=(",", ":"))]
        for r in self.records:
            lines.append(json.dumps(r, sort_keys=True,
                                    separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "Transcript":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        t = Transcript(head["session"])
        for ln in lines[1:]:
            rec = json.loads(ln)
            if rec.get("type") == "abort":
                t.abort = AbortRecord(round=rec["round"], party=rec["party"],
                                      reason=rec["reason"])
            t.records.append(rec)
        return t

    def message_lengths(self) -> list[tuple[str, int]]:
        """Per-round (type, payload byte length) vector for the structural
        indistinguishability checks."""
        return [(r["type"], len(r["payload_hex"]) // 2)
                for r in self.records if r.get("type") != "abort"]


class Session:
    def __init__(self, session_id: str, seed: bytes):
        self.id = session_id
        self.seed = seed
        self._root = PrfStream(seed, "session/" + session_id)
        self.transcript = Transcript(session_id)
        self.round = 0
        self.branch = ""
        self._branches = 0

    def rng(self, party: str, label: str = "main") -> PrfStream:
        return self._root.child(f"{party}/{label}")

    def send(self, sender: str, receiver: str, mtype: str, payload):
        self.round += 1
        self.transcript.add(self.round, sender, receiver, mtype, payload,
                            branch=self.branch)
        return payload

    def abort(self, party: str, reason: str) -> AbortRecord:
        rec = AbortRecord(round=self.round, party=party, reason=reason)
        self.transcript.add_abort(rec)
        return rec

    # -- rewinding substrate ------------------------------------------------
    def snapshot(self, *objs):
        return {"session": self.id,
                "round": self.round,
                "branch": self.branch,
                "n_records": len(self.transcript.records),
                "objs": copy.deepcopy(objs)}

    def restore(self, token):
        if token.get("session") != self.id:
            raise RestoreError("token belongs to another session")
        self.round = token["round"]
        del self.transcript.records[token["n_records"]:]
        self.transcript.abort = None
        self._branches += 1
        self.branch = f"b{self._branches}"
        return copy.deepcopy(token["objs"])


PROTOCOLS = {}


def register_protocol(name: str):
    def deco(fn):
        PROTOCOLS[name] = fn
        return fn
    return deco


def run_session(config, protocol: str, parties: dict, seed: bytes):
    """Generic entry: looks up the protocol runner, validates party roles,
    returns (transcript, outputs dict)."""
    if protocol not in PROTOCOLS:
        raise SessionError(f"unknown protocol {protocol!r}")
    runner = PROTOCOLS[protocol]
    expected = getattr(runner, "roles", None)
    if expected is not None and list(parties.keys()) != list(expected):
        raise SessionError(
            f"party order must be {expected}, got {list(parties.keys())}")
    session = Session(session_id=f"{protocol}-{seed[:4].hex()}", seed=seed)
    outputs = runner(config, parties, session)
    return session.transcript, outputs
