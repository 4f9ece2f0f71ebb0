import os
import hashlib
import logging
from typing import List, Union

import numpy as np

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

SeedKey = Union[int, str]


def setup_logging(level: str = "INFO"):
    """Re-applies the shared log format at the requested level."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
        force=True,
    )


def create_directory(path):
    """Creates a directory if it doesn't exist."""
    if path:
        os.makedirs(path, exist_ok=True)


def parse_csv_floats(text: str) -> List[float]:
    """Parses '3,-4,0.5' into floats. Empty fields are rejected."""
    if text is None or text.strip() == "":
        raise ValueError("expected a comma-separated list of reals, got an empty value")
    values = []
    for pos, field in enumerate(text.split(",")):
        field = field.strip()
        if field == "":
            raise ValueError(f"empty field at position {pos} in '{text}'")
        try:
            value = float(field)
        except ValueError:
            raise ValueError(f"'{field}' at position {pos} is not a real number")
        if not np.isfinite(value):
            raise ValueError(f"non-finite value '{field}' at position {pos}")
        values.append(value)
    return values


def parse_csv_names(text: str) -> List[str]:
    names = [part.strip() for part in text.split(",")]
    if any(name == "" for name in names):
        raise ValueError(f"empty name in '{text}'")
    return names


def _key_to_int(key: SeedKey) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"seed keys must be nonnegative, got {key}")
        return int(key)
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(base_seed: int, *keys: SeedKey) -> int:
    """
    Stable 64-bit seed for a stream identified by (base_seed, *keys).

    Strings are hashed with BLAKE2b (8-byte digest, little endian), then the
    integer tuple is fed to numpy's SeedSequence as entropy. The result only
    depends on the values, never on call order or process, so any stream can
    be recreated independently of the others.
    """
    entropy = [_key_to_int(base_seed)] + [_key_to_int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])
