import hashlib

import numpy as np


def stable_u64(text: str) -> int:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, byteorder="little", signed=False)


def agent_rng(seed: int, agent_id: str) -> np.random.Generator:
    """Independent generator per (run seed, agent) so draws do not depend on dispatch order."""
    return np.random.default_rng(stable_u64(f"{seed}:{agent_id}"))
