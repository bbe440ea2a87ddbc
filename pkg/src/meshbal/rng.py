"""Named random substreams derived from one scenario seed."""

import hashlib
import random


def substream_seed(seed, *names):
    key = "/".join([str(int(seed))] + [str(n) for n in names]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def substream(seed, *names):
    """Independent ``random.Random`` for e.g. ``(seed, node_id, "mac")``."""
    return random.Random(substream_seed(seed, *names))


class Streams:
    """Lazily created substreams keyed by name tuple."""

    def __init__(self, seed):
        self.seed = seed
        self._streams = {}

    def get(self, *names):
        s = self._streams.get(names)
        if s is None:
            s = self._streams[names] = substream(self.seed, *names)
        return s
