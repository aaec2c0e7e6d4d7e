"""Partial Fisher-Yates over an MT19937 stream with rejection-sampled bounds.

Writes fixtures/oracles/sample_ids1000_n200_seed42.json.
"""
import json
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "oracles" / "sample_ids1000_n200_seed42.json"


class Stream:
    def __init__(self, seed):
        self.bg = np.random.RandomState(seed)._bit_generator

    def next_u32(self):
        return int(self.bg.random_raw(1)[0])


def bounded(stream, k):
    limit = (2**32 // k) * k
    while True:
        w = stream.next_u32()
        if w < limit:
            return w % k


def sample(ids, n, seed):
    ids = list(ids)
    s = Stream(seed)
    m = min(n, len(ids))
    for i in range(m):
        j = i + bounded(s, len(ids) - i)
        ids[i], ids[j] = ids[j], ids[i]
    return ids[:m]


def main():
    ids = ["SAMN%08d" % i for i in range(1000)]
    selected = sample(ids, 200, 42)
    assert len(set(selected)) == 200
    OUT.write_text(json.dumps({"ids_format": "SAMN%08d for i in 0..1000", "n": 200, "seed": 42,
                               "selected": selected}, indent=0) + "\n")


if __name__ == "__main__":
    main()
