"""Check reports shared by every verification routine."""
from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class CheckResult:
    check: str
    anchor: str
    status: str = "pass"
    samples: int = 0
    counterexample: str | None = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def fail(self, witness: str) -> None:
        if self.status == "pass":
            self.status = "fail"
            self.counterexample = witness

    def to_dict(self) -> dict:
        out = {"check": self.check, "axiom_id": self.anchor, "status": self.status,
               "samples": self.samples}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if self.detail:
            out["detail"] = self.detail
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=str)

    def to_text(self) -> str:
        line = f"[{self.status.upper()}] {self.check} ({self.anchor}) samples={self.samples}"
        if self.counterexample is not None:
            line += f"\n    counterexample: {self.counterexample}"
        for k, v in sorted(self.detail.items()):
            line += f"\n    {k}: {v}"
        return line


class Report(list):
    """Ordered list of CheckResult values."""

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self)

    def get(self, check: str) -> CheckResult:
        for r in self:
            if r.check == check:
                return r
        raise KeyError(check)

    def failures(self):
        return [r for r in self if not r.passed]

    def extend_report(self, other: "Report", prefix: str = "") -> "Report":
        for r in other:
            if prefix:
                r.check = prefix + r.check
            self.append(r)
        return self
