"""Reference MT19937 streams from numpy's legacy (init_genrand) seeding.

Writes fixtures/oracles/mt19937_streams.json: {seed: [first 1000 u32 outputs]}.
"""
import json
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "oracles" / "mt19937_streams.json"


def stream(seed, n):
    rs = np.random.RandomState(seed)
    return [int(v) for v in rs._bit_generator.random_raw(n)]


def main():
    data = {str(seed): stream(seed, 1000) for seed in (5489, 0, 42)}
    assert data["5489"][0] == 3499211612
    assert stream(5489, 10000)[-1] == 4123659995
    OUT.write_text(json.dumps(data, indent=0) + "\n")


if __name__ == "__main__":
    main()
