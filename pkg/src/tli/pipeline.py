"""From demonstrations to a per-transition policy library.

Demonstrations are segmented by sensor valuation, per-transition attractors
are placed just past their guard surfaces, and one stable velocity field is
fit per (mode, next-mode) pair. The library resolves automaton modes through
the scene's alias table, falls back to any same-mode policy when a specific
transition was never demonstrated, and synthesizes a plain contraction field
toward the target region as a last resort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import bc as bc_mod
from . import lpvds
from .core import Demonstration, ModeId
from .lpvds import FitConfig, GaussianComponent, LpvDsModel
from .bc import MlpPolicy, TrainConfig
from .ltl import ModeAutomaton
from .segmentation import attractors, place_attractors, segment
from .sim import Scene

PolicyKey = tuple[str, Optional[str]]


@dataclass(frozen=True)
class Policy:
    """One velocity field driving a mode toward a transition attractor."""

    key: PolicyKey
    model: Union[LpvDsModel, MlpPolicy]
    x_star: np.ndarray
    kind: str  # "ds" | "bc" | "contraction"

    def __post_init__(self):
        object.__setattr__(self, "x_star", np.asarray(self.x_star, dtype=float))

    def velocity(self, x: np.ndarray) -> np.ndarray:
        if isinstance(self.model, LpvDsModel):
            return lpvds.velocity(self.model, x)
        return bc_mod.predict(self.model, x)

    def velocity_batch(self, pts: np.ndarray) -> np.ndarray:
        if isinstance(self.model, LpvDsModel):
            return lpvds.velocity_batch(self.model, pts)
        return bc_mod.predict_batch(self.model, pts)


def contraction_policy(key: PolicyKey, target: np.ndarray) -> Policy:
    """Unit-rate linear contraction toward a target point."""
    target = np.asarray(target, dtype=float)
    n = len(target)
    model = LpvDsModel(
        components=(
            GaussianComponent(weight=1.0, mean=target, covariance=np.eye(n)),
        ),
        A=(-np.eye(n),),
        x_star=target,
        epsilon_stab=1e-2,
    )
    return Policy(key=key, model=model, x_star=target, kind="contraction")


@dataclass
class PolicyLibrary:
    """Per-transition policies addressed by alias-resolved mode names."""

    scene: Scene
    policies: dict[PolicyKey, Policy] = field(default_factory=dict)

    def base_of(self, name: str) -> str:
        return self.scene.alias_map().get(name, name)

    def resolve(self, mode: ModeId, target: Optional[ModeId]) -> Policy:
        """Policy for driving `mode` toward `target`.

        Falls back to any policy leaving the same mode (lowest target name),
        then to a synthesized contraction toward the target region's
        centroid. Raises KeyError only when even the target region is
        unknown.
        """
        base = self.base_of(mode.name)
        tbase = self.base_of(target.name) if target is not None else None
        key = (base, tbase)
        if key in self.policies:
            return self.policies[key]
        same_mode = sorted(
            (k for k in self.policies if k[0] == base),
            key=lambda k: (k[1] is None, k[1] or ""),
        )
        if same_mode:
            return self.policies[same_mode[0]]
        if tbase is None:
            raise KeyError(f"no policy leaving mode {mode.name!r}")
        region = self.scene.region_named(tbase)  # KeyError if unknown
        policy = contraction_policy(key, region.centroid)
        self.policies[key] = policy
        return policy

    def covers(self, automaton: ModeAutomaton) -> bool:
        """True when every non-goal automaton edge resolves to a policy."""
        for i, j in automaton.edges:
            if i == j or i in automaton.goal_modes:
                continue
            try:
                self.resolve(i, j)
            except KeyError:
                return False
        return True


def build_policy_library(
    scene: Scene,
    demos: Sequence[Demonstration],
    kind: str = "ds",
    fit_config: Optional[FitConfig] = None,
    train_config: Optional[TrainConfig] = None,
    seed: int = 0,
) -> PolicyLibrary:
    """Segment demos and fit one policy per observed transition."""
    if kind not in ("ds", "bc"):
        raise ValueError("kind must be 'ds' or 'bc'")
    table = [
        (region.valuation, ModeId(i, region.name))
        for i, region in enumerate(scene.regions)
    ]
    segs = segment(demos, table)
    placed = place_attractors(attractors(segs), segs, scene)
    library = PolicyLibrary(scene=scene)
    keys = sorted(
        placed.keys(),
        key=lambda k: (k[0].id, k[1] is None, k[1].id if k[1] else -1),
    )
    for index, key in enumerate(keys):
        mode, nxt = key
        pairs = []
        for seg in segs:
            if seg.mode == mode and seg.next_mode == nxt:
                pairs.extend((s[0], s[1]) for s in seg.samples)
        x_star = placed.get(key)
        name_key: PolicyKey = (mode.name, nxt.name if nxt else None)
        if kind == "ds":
            cfg = fit_config or FitConfig()
            cfg = FitConfig(
                epsilon_stab=cfg.epsilon_stab,
                iterations=cfg.iterations,
                learning_rate=cfg.learning_rate,
                k_max=cfg.k_max,
                seed=seed + index,
                speed_cap=cfg.speed_cap,
            )
            model: Union[LpvDsModel, MlpPolicy] = lpvds.fit(pairs, x_star, cfg)
        else:
            tcfg = train_config or TrainConfig()
            tcfg = TrainConfig(
                epochs=tcfg.epochs,
                learning_rate=tcfg.learning_rate,
                hidden=tcfg.hidden,
                output_scale=tcfg.output_scale,
                seed=seed + index,
            )
            model = bc_mod.train(pairs, tcfg)
        library.policies[name_key] = Policy(
            key=name_key, model=model, x_star=x_star, kind=kind
        )
    return library
