class ExportError(Exception):
    """Base for exporter failures."""


class EnvironmentError_(ExportError):
    """Model could not be resolved or loaded (download failure, missing
    weights, missing torch/transformers)."""


class GeometryError(ExportError):
    """Model output does not match the 201 x 1024 contract."""


class AudioError(ExportError):
    """Unreadable or off-rate audio input."""


class ManifestError(ExportError):
    pass
