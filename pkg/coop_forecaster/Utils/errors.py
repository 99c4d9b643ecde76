class CoopForecasterError(Exception):
    exit_code: int = 1


class ConfigError(CoopForecasterError):
    exit_code = 2


class DataError(CoopForecasterError):
    exit_code = 3


class NumericError(CoopForecasterError):
    exit_code = 4


class ScenarioParseError(DataError):
    def __init__(self, message: str, line_number: int | None = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class InvariantViolation(DataError):
    pass


class GenerationError(DataError):
    pass


class SplitError(DataError):
    pass


class ResyncError(DataError):
    pass


class GeometryError(DataError):
    pass


class EncodingError(DataError):
    pass


class MetricError(DataError):
    pass


class AssociationMetricError(MetricError):
    pass


class CorruptCheckpointError(DataError):
    pass


class CheckpointIncompatibleError(DataError):
    pass


class NumericDomainError(NumericError):
    pass


class ShapeError(NumericError):
    pass


class EmptyAttentionError(NumericError):
    pass


class ContractError(NumericError):
    pass


class NumericFailure(NumericError):
    pass
