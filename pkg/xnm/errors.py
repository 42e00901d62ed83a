from typing import Optional, Tuple


class XNMError(Exception):
    """Base error; exit_code is what the CLI returns for it"""
    exit_code = 1


class ShapeError(XNMError, ValueError):
    pass


class GradientError(XNMError):
    pass


class DataError(XNMError):
    exit_code = 3


class TrainingDivergedError(XNMError):
    exit_code = 4


class ProgramError(XNMError):
    """Parse or validation failure, located in the program text"""
    exit_code = 2

    def __init__(self, message: str, offset: int = 0, span: Optional[Tuple[int, int]] = None):
        self.message = message
        self.offset = offset
        self.span = span if span is not None else (offset, offset)
        super().__init__(f"{message} (at offset {offset})")


class LexError(ProgramError):
    pass


class ParseError(ProgramError):
    pass


class UnknownModuleError(ProgramError):
    pass


class ArityError(ProgramError):
    pass


class ProgramTypeError(ProgramError):
    pass


class UnknownTokenError(ProgramError):
    pass


class IllPosedProgramError(XNMError):
    """The program has no defined answer on this scene (e.g. describe on two objects)"""
    exit_code = 3


class TemplateExhaustedError(XNMError):
    exit_code = 3
