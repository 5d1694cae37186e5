"""Configuration: presets, TOML-or-JSON loading, derived parameter blocks."""

from __future__ import annotations

import json
import os

try:
    import tomllib
except ImportError:  # 3.10
    import tomli as tomllib

from dataclasses import dataclass, fields, replace

from .commit import BinaryCommitScheme, CommitParams, CommitScheme
from .errors import ConfigurationError
from .ntcf import NtcfParams

DEFAULT_SEED = bytes(range(32))

WITNESS_PAD = 32  # fixed witness field width in SFE outputs (bytes)


@dataclass(frozen=True)
class Config:
    preset: str = "toy8"
    ntcf: NtcfParams = None
    k: int = 16
    ell: int = 16
    k_wi: int = 20
    td_bits: int = 16
    sfe_backend: str = "ideal"
    qfhe_backend: str = "mock"
    obf_backend: str = "ideal"
    ot_backend: str = "ideal"
    trials: int = 200
    seed: bytes = DEFAULT_SEED

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.ell < 1 or self.k_wi < 1 or self.td_bits < 1:
            raise ConfigurationError("ell, k_wi, td_bits must be >= 1")
        if self.sfe_backend not in ("ideal", "garbled"):
            raise ConfigurationError("sfe backend must be ideal|garbled")
        if self.qfhe_backend != "mock" or self.obf_backend != "ideal" \
                or self.ot_backend != "ideal":
            raise ConfigurationError("unknown backend selection")
        if len(self.seed) != 32:
            raise ConfigurationError("seed must be 32 bytes")

    # -- derived parameter blocks (domain-separated per role) --------------
    def grid_scheme(self) -> CommitScheme:
        from .circuits import answer_len
        return CommitScheme(CommitParams(
            msg_bits=8 * answer_len(self.ntcf.w_len), q=257, n_r=8,
            noise_bound=1, pad_rows=8, tag=b"cqext-grid"))

    def trapdoor_scheme(self) -> CommitScheme:
        return CommitScheme(CommitParams(
            msg_bits=self.td_bits, q=257, n_r=8, noise_bound=1, pad_rows=8,
            tag=b"qzk-trapdoor"))

    def qzk_grid_scheme(self) -> BinaryCommitScheme:
        return BinaryCommitScheme(msg_bits=self.td_bits, n_r=32,
                                  tag=b"qzk-grid")

    def blum_scheme(self) -> CommitScheme:
        return CommitScheme(CommitParams(
            msg_bits=1, q=257, n_r=4, noise_bound=1, pad_rows=7,
            tag=b"blum-adj"))

    def qqext_star_scheme(self) -> BinaryCommitScheme:
        return BinaryCommitScheme(msg_bits=1, n_r=8, tag=b"qqext-star")

    def qqext_outer_scheme(self) -> BinaryCommitScheme:
        star = self.qqext_star_scheme()
        return BinaryCommitScheme(msg_bits=self.ell * star.rand_len * 8,
                                  n_r=16, tag=b"qqext-outer")


PRESETS = {
    "toy8": dict(ntcf=dict(n=4, m=8, q=64, noise_bound=3, x_bits=8,
                           w_len=16)),
    "toy12": dict(ntcf=dict(n=4, m=16, q=64, noise_bound=3, x_bits=12,
                            w_len=16)),
}

_CONFIG_KEYS = {f.name for f in fields(Config)}
_NTCF_KEYS = {f.name for f in fields(NtcfParams)}


def make_config(preset: str = "toy8", **overrides) -> Config:
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}")
    base = dict(PRESETS[preset])
    ntcf_over = dict(base.pop("ntcf"))
    ntcf_extra = overrides.pop("ntcf", {})
    unknown = set(ntcf_extra) - _NTCF_KEYS
    if unknown:
        raise ConfigurationError(f"unknown ntcf keys: {sorted(unknown)}")
    ntcf_over.update(ntcf_extra)
    unknown = set(overrides) - (_CONFIG_KEYS - {"ntcf", "preset"})
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    seed = overrides.pop("seed", DEFAULT_SEED)
    if isinstance(seed, str):
        seed = bytes.fromhex(seed)
    return Config(preset=preset, ntcf=NtcfParams(**ntcf_over), seed=seed,
                  **overrides)


def load_config(path: str) -> Config:
    with open(path, "rb") as fh:
        raw = fh.read()
    doc = None
    if path.endswith(".json"):
        doc = json.loads(raw)
    elif path.endswith(".toml"):
        doc = tomllib.loads(raw.decode())
    else:
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError:
            try:
                doc = tomllib.loads(raw.decode())
            except tomllib.TOMLDecodeError:
                raise ConfigurationError(f"{path}: neither JSON nor TOML")
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be a table")
    preset = doc.pop("preset", "toy8")
    return make_config(preset=preset, **doc)


def config_with_env_seed(cfg: Config) -> Config:
    env = os.environ.get("QEXT_SEED")
    if env:
        seed = bytes.fromhex(env) if len(env) == 64 else \
            env.encode().ljust(32, b"\x00")[:32]
        return replace(cfg, seed=seed)
    return cfg
