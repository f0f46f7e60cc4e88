"""Exception hierarchy shared by every stage of the toolkit."""


class AnonymixerError(Exception):
    """Base class. ``stage`` is filled in by the pipeline when an error escapes a stage."""

    exit_code = 2

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class SchemaError(AnonymixerError):
    pass


class ParseError(AnonymixerError):
    pass


class EmptyInputError(AnonymixerError):
    pass


class ParameterError(AnonymixerError):
    pass


class ShapeError(AnonymixerError):
    pass


class ContractError(AnonymixerError):
    pass


class UndefinedMetricError(AnonymixerError):
    pass


class NoValidParamsError(AnonymixerError):
    pass


class NumericError(AnonymixerError):
    exit_code = 3
