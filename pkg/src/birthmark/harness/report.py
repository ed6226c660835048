"""Security report: the attack suite's pass/fail ledger.

The JSON form is byte-deterministic for a given seed (sorted keys, fixed
float formatting, no wall-clock timestamps), so reproducibility can be
asserted by comparing report bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .attacks import AttackOutcome, evasion_curve
from .scenarios import SUITE_ORDER, Scenario


def _round_floats(value):
    if isinstance(value, float):
        return round(value, 10)
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_round_floats(v) for v in value]
    return value


@dataclass
class SecurityReport:
    seed: int
    outcomes: List[AttackOutcome] = field(default_factory=list)
    evasion: List[dict] = field(default_factory=list)

    @property
    def all_defended(self) -> bool:
        return all(o.defended for o in self.outcomes)

    def to_json_dict(self) -> dict:
        return _round_floats(
            {
                "seed": self.seed,
                "all_defended": self.all_defended,
                "attacks": [o.to_json_dict() for o in self.outcomes],
                "evasion_curve": self.evasion,
            }
        )

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True).encode("utf-8")

    def to_text(self) -> str:
        lines = [
            "birthmark security report",
            f"seed: {self.seed}",
            "",
            f"{'attack':<38s} {'adversary':<44s} verdict",
            "-" * 96,
        ]
        for outcome in self.outcomes:
            verdict = "DEFENDED" if outcome.defended else "BREACHED"
            lines.append(f"{outcome.name:<38s} {outcome.adversary:<44s} {verdict}")
            for key, value in outcome.evidence.items():
                lines.append(f"    {key}: {value}")
            if outcome.notes:
                lines.append(f"    note: {outcome.notes}")
        lines.append("-" * 96)
        lines.append(
            f"{sum(o.defended for o in self.outcomes)}/{len(self.outcomes)} attacks defended"
        )
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["attack,adversary,defended"]
        for outcome in self.outcomes:
            rows.append(f"{outcome.name},\"{outcome.adversary}\",{int(outcome.defended)}")
        return "\n".join(rows) + "\n"


def run_suite(seed: int = 0, names: Optional[List[str]] = None, with_evasion: bool = True) -> SecurityReport:
    """Run every built-in scenario (or a subset) and collect the report."""
    report = SecurityReport(seed=seed)
    for name in names or SUITE_ORDER:
        report.outcomes.append(Scenario.builtin(name, seed=seed).run())
    if with_evasion:
        report.evasion = evasion_curve(seed=seed)
    return report


def write_outputs(report: SecurityReport, out_dir, figures: bool = True) -> List[Path]:
    """Write report.json / report.txt / attacks.csv and the figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out / "report.json"
    json_path.write_bytes(report.to_json_bytes())
    written.append(json_path)

    text_path = out / "report.txt"
    text_path.write_text(report.to_text())
    written.append(text_path)

    csv_path = out / "attacks.csv"
    csv_path.write_text(report.to_csv())
    written.append(csv_path)

    if report.evasion:
        evasion_csv = out / "evasion_curve.csv"
        rows = ["tamper_fraction,detection_rate,all_miss_bound"]
        for point in report.evasion:
            rows.append(
                f"{point['tamper_fraction']:.6f},{point['detection_rate']:.4f},"
                f"{point['all_miss_bound']:.6e}"
            )
        evasion_csv.write_text("\n".join(rows) + "\n")
        written.append(evasion_csv)

    if figures:
        from .. import plotting

        written.extend(plotting.report_figures(report, out))
    return written
