"""Extraction job descriptions.

A manifest names the encoder backend, the labeled dataset, the prompt
templates, and where the output containers go. Class order is label order:
row c of the anchors file belongs to class_names[c], and every stream label
is an index into that same list.
"""

from __future__ import annotations

import dataclasses
import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources

from .errors import ManifestError


def default_templates() -> list[str]:
    """Prompt templates shipped with the package (editable data file)."""
    text = (
        resources.files("pta_extract")
        .joinpath("data/default_templates.txt")
        .read_text("utf-8")
    )
    lines = [ln.strip() for ln in text.splitlines()]
    return [ln for ln in lines if ln and not ln.startswith("#")]


@dataclass
class ExtractionManifest:
    model: str
    dataset_path: str
    class_names: list[str]
    anchors_path: str
    stream_path: str
    templates: list[str] | None = None  # None loads the packaged defaults
    dim: int | None = None  # checked against the encoder's output width
    normalize: bool = True

    def __post_init__(self):
        if not self.model:
            raise ManifestError("model identifier is empty")
        if not self.dataset_path:
            raise ManifestError("dataset path is empty")
        if not self.anchors_path or not self.stream_path:
            raise ManifestError("both output paths must be set")
        if not self.class_names:
            raise ManifestError("class list is empty")
        if any(not c or c != c.strip() for c in self.class_names):
            raise ManifestError("class names must be non-empty with no outer whitespace")
        dupes = sorted(c for c, n in Counter(self.class_names).items() if n > 1)
        if dupes:
            raise ManifestError(f"duplicate class names: {dupes}")
        if self.templates is None:
            self.templates = default_templates()
        if not self.templates:
            raise ManifestError("template list is empty")
        for tpl in self.templates:
            if "{}" not in tpl:
                raise ManifestError(f"template {tpl!r} has no {{}} slot for the class name")
        if self.dim is not None and self.dim < 2:
            raise ManifestError(f"dim must be >= 2, got {self.dim}")

    @classmethod
    def from_json(cls, path) -> "ExtractionManifest":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ManifestError(f"{path}: manifest must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ManifestError(f"{path}: unknown manifest keys: {unknown}")
        missing = sorted(
            f.name
            for f in dataclasses.fields(cls)
            if f.default is dataclasses.MISSING and f.name not in doc
        )
        if missing:
            raise ManifestError(f"{path}: missing manifest keys: {missing}")
        return cls(**doc)

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
