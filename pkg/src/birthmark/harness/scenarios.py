"""Scenario definitions: the attack matrix as named, reproducible runs.

A scenario is a seeded attack function plus parameters.  Built-in
scenarios cover every attack row; custom scenario files supply JSON:

    {
      "name": "my-scenario",
      "attack": "replay-valid-auth",     // built-in attack key
      "seed": 7,
      "params": {"captures": 10}         // forwarded to the attack
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ..errors import InvalidInput
from . import attacks
from .attacks import AttackOutcome

ATTACKS: Dict[str, Callable[..., AttackOutcome]] = {
    "identify-device-from-blockchain": attacks.identify_device_from_blockchain,
    "manufacturer-correlate": attacks.manufacturer_correlation,
    "timing-correlation": attacks.timing_correlation,
    "frequency-analysis": attacks.frequency_analysis,
    "gps-brute-force": attacks.gps_brute_force,
    "metadata-cross-field": attacks.metadata_cross_field,
    "secure-element-extraction": attacks.secure_element_extraction,
    "ma-key-compromise": attacks.ma_key_compromise,
    "ma-compromise": attacks.ma_compromise_dump,
    "single-server-forge": attacks.single_server_forge,
    "replay-valid-auth": attacks.replay_valid_auth,
    "isp-content-injection": attacks.isp_content_injection,
    "validator-collusion": attacks.validator_collusion,
    "outage-recovery": attacks.outage_recovery,
}

# execution order of the full suite (matrix rows first, then system-level)
SUITE_ORDER: List[str] = [
    "identify-device-from-blockchain",
    "manufacturer-correlate",
    "timing-correlation",
    "frequency-analysis",
    "gps-brute-force",
    "metadata-cross-field",
    "secure-element-extraction",
    "ma-key-compromise",
    "ma-compromise",
    "single-server-forge",
    "replay-valid-auth",
    "isp-content-injection",
    "validator-collusion",
    "outage-recovery",
]


@dataclass
class Scenario:
    name: str
    attack: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def run(self) -> AttackOutcome:
        fn = ATTACKS.get(self.attack)
        if fn is None:
            raise InvalidInput(
                f"unknown attack {self.attack!r}; known: {', '.join(sorted(ATTACKS))}"
            )
        return fn(seed=self.seed, **self.params)

    @classmethod
    def from_file(cls, path) -> "Scenario":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - {"name", "attack", "seed", "params"}
        if unknown:
            raise InvalidInput(f"unknown scenario fields: {sorted(unknown)}")
        if "attack" not in data:
            raise InvalidInput("scenario file must name an 'attack'")
        return cls(
            name=data.get("name", data["attack"]),
            attack=data["attack"],
            seed=int(data.get("seed", 0)),
            params=data.get("params", {}),
        )

    @classmethod
    def builtin(cls, name: str, seed: int = 0) -> "Scenario":
        if name not in ATTACKS:
            raise InvalidInput(
                f"no built-in scenario {name!r}; known: {', '.join(SUITE_ORDER)}"
            )
        return cls(name=name, attack=name, seed=seed)


def resolve(name_or_path: str, seed: int = 0) -> Scenario:
    """A path to a scenario file, or a built-in scenario name."""
    path = Path(name_or_path)
    if path.exists():
        scenario = Scenario.from_file(path)
        if seed:
            scenario.seed = seed
        return scenario
    return Scenario.builtin(name_or_path, seed=seed)
