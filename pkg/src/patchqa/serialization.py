"""Self-describing JSON container shared by all model files.

Layout::

    {"format": "<tag>", "format_version": 1, ...body fields...}

Reals are written with Python's shortest round-trip ``repr`` (17 significant
digits at most), so every IEEE-754 double survives a save/load cycle
bit-exactly. Non-finite numbers are never written.
"""
import json

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised when a model file is corrupt, of the wrong kind, or invalid."""


def encode(tag, body):
    doc = {"format": tag, "format_version": FORMAT_VERSION}
    doc.update(body)
    try:
        text = json.dumps(doc, separators=(",", ":"), allow_nan=False)
    except ValueError as exc:
        raise ModelFormatError(f"cannot serialize non-finite values: {exc}") from None
    return (text + "\n").encode("utf-8")


def decode(data, tag):
    if isinstance(data, (bytes, bytearray, memoryview)):
        try:
            data = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ModelFormatError(f"model stream is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model stream: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model stream does not hold a JSON object")
    if doc.get("format") != tag:
        raise ModelFormatError(f"expected format {tag!r}, found {doc.get('format')!r}")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    return doc


def field(doc, name, kind=None):
    try:
        value = doc[name]
    except KeyError:
        raise ModelFormatError(f"missing field {name!r}") from None
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ModelFormatError(f"field {name!r} must be an integer")
    return value


def _reject_constant(name):
    raise ModelFormatError(f"non-finite constant {name} in model stream")
