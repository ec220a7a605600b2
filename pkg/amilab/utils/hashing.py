import hashlib
from pathlib import Path


def git_blob_hash(data: bytes) -> str:
    """SHA-1 over the git blob header plus content."""
    header = f"blob {len(data)}\0".encode()
    return hashlib.sha1(header + data).hexdigest()


def file_hash(path: str | Path) -> str:
    return git_blob_hash(Path(path).read_bytes())
