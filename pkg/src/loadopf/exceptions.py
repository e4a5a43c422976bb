"""Exception hierarchy shared by the solvers and the I/O layer."""


class GridError(Exception):
    """Base class for every error raised by loadopf."""


class CaseValidationError(GridError, ValueError):
    """A grid case violates a structural invariant."""


class DuplicateBusId(CaseValidationError):
    def __init__(self, bus_id):
        self.bus_id = bus_id
        super().__init__(f"duplicate bus id {bus_id}")


class DanglingReference(CaseValidationError):
    def __init__(self, bus_id, where=""):
        self.bus_id = bus_id
        suffix = f" in {where}" if where else ""
        super().__init__(f"reference to nonexistent bus {bus_id}{suffix}")


class NoSlack(CaseValidationError):
    def __init__(self, count):
        self.count = count
        super().__init__(f"case must have exactly one slack bus, found {count}")


class Disconnected(CaseValidationError):
    def __init__(self, bus_ids):
        self.bus_ids = sorted(bus_ids)
        super().__init__(f"buses {self.bus_ids} are not connected to the slack bus")


class InvalidElement(CaseValidationError):
    """A single bus, branch, generator or load has out-of-range fields."""


class VoltageCollapse(GridError, ArithmeticError):
    def __init__(self, magnitude, bus_id=None):
        self.magnitude = magnitude
        self.bus_id = bus_id
        where = f" at bus {bus_id}" if bus_id is not None else ""
        super().__init__(f"voltage magnitude {magnitude:.3g} p.u.{where} is below the evaluation floor")


class ZeroVoltage(GridError, ValueError):
    pass


class NonConvergence(GridError, RuntimeError):
    def __init__(self, max_iter, final_residual):
        self.max_iter = max_iter
        self.final_residual = final_residual
        super().__init__(f"no convergence after {max_iter} iterations (residual {final_residual:.3e})")


class Infeasible(GridError, RuntimeError):
    pass


class RankDeficient(GridError, ValueError):
    pass


class EmptySeries(GridError, ValueError):
    pass


class TooShort(GridError, ValueError):
    pass


class ZeroCurrentNormalization(GridError, ZeroDivisionError):
    pass


class ParseError(GridError, ValueError):
    """Malformed input file; the message names the offending line, key or column."""
