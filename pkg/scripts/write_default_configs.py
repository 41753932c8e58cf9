#!/usr/bin/env python3
"""Emit a default JSON config for every named scenario into ./configs."""

import json
from pathlib import Path

from riegames.scenarios import SCENARIO_NAMES, ScenarioConfig


def main():
    out = Path("configs")
    out.mkdir(exist_ok=True)
    for name in SCENARIO_NAMES:
        cfg = ScenarioConfig(scenario=name)
        payload = {
            "scenario": name,
            "dim": cfg.dim,
            "players": cfg.players,
            "anchors_seed": cfg.anchors_seed,
            "solver": cfg.solver,
            "mu": cfg.mu,
            "lipschitz": cfg.lipschitz,
            "sigma2": cfg.sigma2,
            "epsilon": cfg.epsilon,
            "seeds": cfg.seeds,
            "output_dir": f"runs/{name}",
        }
        if name == "karcher_robust":
            payload["gamma"] = cfg.gamma
        if name == "minmax_distance":
            payload["coupling"] = cfg.coupling
        path = out / f"{name}.json"
        path.write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
