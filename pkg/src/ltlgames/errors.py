"""Exception hierarchy.

Everything raised on bad user input derives from :class:`InputError`; the CLI
maps those to exit code 2.
"""


class LtlGamesError(Exception):
    pass


class InputError(LtlGamesError):
    pass


class LtlSyntaxError(InputError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownAtomError(InputError):
    def __init__(self, atom):
        super().__init__(f"unknown atomic proposition {atom!r}")
        self.atom = atom


class HoaParseError(InputError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class UnsupportedHoaError(InputError):
    pass


class DeterminismError(UnsupportedHoaError):
    pass


class IncompletenessError(InputError):
    def __init__(self, state, label):
        super().__init__(f"no transition from state {state} on label {sorted(label)}")
        self.state = state
        self.label = label


class GameFormatError(InputError):
    pass


class ProbabilitySumError(GameFormatError):
    def __init__(self, state, action, total):
        super().__init__(
            f"probabilities of action {action!r} in state {state} sum to {total!r}"
        )
        self.state = state
        self.action = action


class CoverageError(InputError):
    pass


class AlphabetMismatchError(InputError):
    pass


class GridSpecError(InputError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class EpsilonCycleError(LtlGamesError):
    def __init__(self, state, modes):
        super().__init__(f"mode switches cycle at state {state}: {modes}")
        self.state = state
        self.modes = modes


class CapExceededError(InputError):
    pass


class ConvergenceError(LtlGamesError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual
