"""Exception hierarchy shared by every module."""


class SluError(Exception):
    """Base class for all toolkit errors."""


class DataError(SluError):
    """Input data is malformed or inconsistent (CLI exit code 2)."""


class FormatError(DataError):
    def __init__(self, line, message):
        self.line = line
        self.message = message
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(DataError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"[{v.code}] {v.message}" for v in self.violations)
        super().__init__(f"dataset is invalid: {lines}")


class RangeError(SluError, ValueError):
    pass


class NoParse(SluError):
    pass


class TooManyAlternations(DataError):
    pass


class SingleIntentError(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class UnknownEntity(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidNetwork(DataError):
    pass


class EmptyReference(DataError):
    pass


class NotEnoughData(DataError):
    def __init__(self, intent, k):
        self.intent = intent
        self.k = k
        super().__init__(f"intent {intent!r} has fewer than {k} utterances")


class VersionMismatch(DataError):
    pass


class CorruptArchive(DataError):
    pass
