"""Small shared helpers."""

import hashlib


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary parts.

    Unlike ``hash()``, this is identical across processes and runs, so any
    component seeded through it stays reproducible regardless of scheduling.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
