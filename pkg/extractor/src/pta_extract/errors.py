class ExtractorError(Exception):
    """Base class for everything this package raises on purpose."""


class ManifestError(ExtractorError):
    """The extraction job description is invalid or inconsistent."""


class ModelLoadError(ExtractorError):
    """A pretrained encoder backend could not be loaded."""


class DatasetError(ExtractorError):
    """The dataset path, layout, or a sample's content is unusable."""
