"""Per-environment configuration bundles.

Each benchmark ships an INI file with sections ``[env]``, ``[constants]``,
``[spec]``, ``[collect]``, ``[train]``, ``[mpc]``, ``[run]``, optional
``[desk]`` (reduced budgets) and ``[reference]`` (published reference values).
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .dynamics import TrainConfig
from .envs import REGISTRY, Environment, make_env
from .mpc import MpcConfig
from .stl import Formula, check_names, parse

BUILTIN = ("cartpole", "mountain_car", "fetch", "acc", "parking")


def _coerce(value: str, typ) -> Any:
    typ = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    value = value.strip()
    if typ.startswith("tuple"):
        parts = [v for v in value.replace(",", " ").split() if v]
        inner = float if "float" in typ else int
        return tuple(inner(v) for v in parts)
    if typ == "int":
        return int(value)
    if typ == "float":
        return float(value)
    if typ == "bool":
        return value.lower() in ("1", "true", "yes", "on")
    return value


def _section(cp: configparser.ConfigParser, name: str, cls) -> dict:
    if not cp.has_section(name):
        return {}
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    out = {}
    for key, raw in cp.items(name):
        if key not in types:
            raise KeyError(f"[{name}] has unknown key {key!r}")
        out[key] = _coerce(raw, types[key])
    return out


@dataclass(frozen=True)
class EnvSpecBundle:
    env_id: str
    spec: str
    names: tuple[str, ...]
    constants: dict = field(default_factory=dict)
    n_traj: int = 100
    collect_episode_len: int = 200
    collect_seed: int = 0
    train: TrainConfig = TrainConfig()
    mpc: MpcConfig = MpcConfig()
    episode_len: int = 200
    episodes: int = 30
    run_seed: int = 0
    simulated: bool = True
    desk: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    source: str = ""

    @property
    def formula(self) -> Formula:
        return parse(self.spec)

    def make_env(self) -> Environment:
        if not self.simulated:
            raise RuntimeError(f"{self.env_id} has no built-in simulator")
        return make_env(self.env_id, **self.constants)

    def desk_scale(self) -> "EnvSpecBundle":
        """Copy with the ``[desk]`` overrides applied."""
        d = dict(self.desk)
        mpc_keys = {f.name for f in dataclasses.fields(MpcConfig)}
        train_keys = {f.name for f in dataclasses.fields(TrainConfig)}
        mpc = dataclasses.replace(self.mpc, **{k: v for k, v in d.items() if k in mpc_keys})
        train = dataclasses.replace(self.train, **{k: v for k, v in d.items() if k in train_keys})
        rest = {k: v for k, v in d.items() if k not in mpc_keys | train_keys}
        return dataclasses.replace(self, mpc=mpc, train=train, desk={}, **rest)


_DESK_TYPES = {
    "n_samples": "int", "n_iter": "int", "horizon": "int", "sigma0": "float",
    "epochs": "int", "n_traj": "int", "episodes": "int", "collect_episode_len": "int",
    "episode_len": "int",
}


def load_bundle(source: str | Path) -> EnvSpecBundle:
    """Load a bundle by built-in id (``"cartpole"``) or from an INI path."""
    source = str(source)
    if source in BUILTIN:
        text = resources.files("stlmpc.envs.configs").joinpath(f"{source}.ini").read_text()
    else:
        text = Path(source).read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",), interpolation=None)
    cp.read_string(text)
    env = cp["env"]
    env_id = env["id"].strip()
    names = tuple(n.strip() for n in env["names"].split(","))
    simulated = env.getboolean("simulated", fallback=True)
    constants = {}
    if simulated:
        if env_id not in REGISTRY:
            raise KeyError(f"unknown environment {env_id!r}")
        env_cls = REGISTRY[env_id]
        if names != env_cls.names:
            raise ValueError(f"{env_id}: config names {names} differ from simulator names {env_cls.names}")
        constants = _section(cp, "constants", env_cls.Params)
        probe = env_cls(**constants)
        low, high = tuple(probe.action_low), tuple(probe.action_high)
    else:
        low = tuple(float(v) for v in env.get("action_low", "-1").split(","))
        high = tuple(float(v) for v in env.get("action_high", "1").split(","))
    spec = cp["spec"]["spec"].strip().strip('"')
    check_names(parse(spec), names)
    collect = cp["collect"] if cp.has_section("collect") else {}
    run = cp["run"] if cp.has_section("run") else {}
    mpc_kw = _section(cp, "mpc", MpcConfig)
    mpc = MpcConfig(**{**mpc_kw, "action_low": low, "action_high": high})
    desk = {k: _coerce(v, _DESK_TYPES.get(k, "float")) for k, v in cp.items("desk")} \
        if cp.has_section("desk") else {}
    reference = ({k: v.strip() for k, v in cp.items("reference")}
                 if cp.has_section("reference") else {})
    return EnvSpecBundle(
        env_id=env_id, spec=spec, names=names, constants=constants,
        n_traj=int(collect.get("n_traj", 100)),
        collect_episode_len=int(collect.get("episode_len", 200)),
        collect_seed=int(collect.get("seed", 0)),
        train=TrainConfig(**_section(cp, "train", TrainConfig)),
        mpc=mpc,
        episode_len=int(env.get("episode_len", 200)),
        episodes=int(run.get("episodes", 30)),
        run_seed=int(run.get("seed", 0)),
        simulated=simulated, desk=desk, reference=reference, source=text,
    )
