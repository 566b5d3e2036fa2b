"""Exception hierarchy shared by all pcmlogic modules."""


class PCMError(Exception):
    """Base class for every error raised by pcmlogic."""


class ConfigError(PCMError, ValueError):
    pass


class ResolutionTooCoarse(PCMError, ValueError):
    pass


class SamplingFailed(PCMError):
    pass


class IsolatedNode(PCMError):
    """The shared node has no conduction path to any driven terminal."""


class NonConvergence(PCMError):
    pass


class OutputNotInitialized(PCMError):
    pass


class IndeterminateState(PCMError):
    """A cell resistance lies between the HRS and LRS read bands."""


class VerifyFailed(PCMError):
    pass


class InvalidStep(PCMError, ValueError):
    pass


class ProgramSyntaxError(PCMError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class NetlistError(PCMError, ValueError):
    """Base class for netlist parse errors; carries a 1-based line/column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class NetlistSyntaxError(NetlistError):
    pass


class UndefinedSignal(NetlistError):
    pass


class CyclicDefinition(NetlistError):
    pass


class DuplicateName(NetlistError):
    pass


class RowOverflow(PCMError):
    def __init__(self, peak: int, row_width: int):
        self.peak = peak
        self.row_width = row_width
        super().__init__(f"program needs {peak} live cells but the row holds {row_width}")


class ShapeMismatch(PCMError, ValueError):
    pass
