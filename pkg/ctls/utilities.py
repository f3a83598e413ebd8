import hashlib

SEED_MASK = (1 << 63) - 1


def derive_seed(base_seed: int, *labels) -> int:
    """
    Derives a reproducible 63 bit seed from a base seed and a list of labels.
    Python's hash() is salted per process, so a digest is used instead.
    """
    digest = hashlib.sha256(
        ":".join(str(label) for label in labels).encode()
    ).digest()
    return (int(base_seed) ^ int.from_bytes(digest[:8], "big")) & SEED_MASK
