"""Per-program checking state: definitions, solver session, flags, stats."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import FuelExhausted
from .logic import BoxTable, query_axioms
from .smt import SolverConfig, SolverSession, VALID
from .syntax import DefEnv, Formula, TypeEnv


@dataclass
class Diagnostic:
    severity: str
    rule: str
    message: str
    line: int = 0
    col: int = 0
    clause: Optional[str] = None
    candidates: list[str] = field(default_factory=list)


class CheckerState:
    """One per program check: definition environment, box table, solver
    session, fresh-name counter (module-global), diagnostics sink, and the
    knobs for strict variable elimination and the extraction guard."""

    def __init__(self, defs: DefEnv, cfg: Optional[SolverConfig] = None,
                 strict_elim: bool = False, use_guard: bool = True,
                 sub_fuel: int = 100000):
        self.defs = defs
        self.boxes = BoxTable()
        self.session = SolverSession(cfg or SolverConfig(), self.boxes)
        self.strict_elim = strict_elim
        self.use_guard = use_guard
        self.sub_fuel = sub_fuel
        self._ticks = 0
        self.diagnostics: list[Diagnostic] = []
        self._inconsistent_memo: dict[TypeEnv, bool] = {}
        self.flow_memo: dict = {}
        self.synth_memo: dict = {}
        self.convert_memo: dict = {}

    def close(self) -> None:
        self.session.close()

    def __enter__(self) -> "CheckerState":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def tick(self) -> None:
        self._ticks += 1
        if self._ticks > self.sub_fuel:
            raise FuelExhausted(
                f"subtyping recursion budget of {self.sub_fuel} exhausted")

    def reset_fuel(self) -> None:
        self._ticks = 0

    def valid(self, hypotheses: list[Formula], goal: Formula) -> bool:
        """Validity with the ground axiom instances for this query included
        in the hypotheses; unknown counts as not valid."""
        from .checker import const_type
        axioms = query_axioms(list(hypotheses) + [goal], const_type=const_type)
        return self.session.check_valid(axioms + list(hypotheses), goal) == VALID
