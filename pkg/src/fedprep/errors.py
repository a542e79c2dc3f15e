"""Exception hierarchy shared by every fedprep module."""


class FedPrepError(Exception):
    """Base class for all fedprep errors."""


class ParseError(FedPrepError):
    pass


class PartitionError(FedPrepError):
    pass


class InvalidValue(FedPrepError, ValueError):
    pass


class EmptySketch(FedPrepError):
    pass


class InvalidQuantile(FedPrepError, ValueError):
    pass


class MergeError(FedPrepError):
    pass


class ProtocolError(FedPrepError):
    pass


class UnsupportedPartition(FedPrepError):
    pass


class FitError(FedPrepError):
    pass


class TransformError(FedPrepError):
    pass


class PredictError(FedPrepError):
    pass


class CompareError(FedPrepError):
    pass


class ConfigError(FedPrepError):
    pass
