"""Dataset-to-container extraction for the pta engine.

Encodes class prompts into PTAE anchor files and labeled image or point-cloud
folders into PTAE stream files, with a sidecar manifest tying stream labels
back to anchor rows.
"""

from .encoders import ClipEncoder, HashedEncoder, get_encoder
from .errors import DatasetError, ExtractorError, ManifestError, ModelLoadError
from .extract import class_list_checksum, extract_anchors, extract_stream, sidecar_path
from .manifest import ExtractionManifest, default_templates

__version__ = "0.1.0"
