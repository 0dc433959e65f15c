import numpy as np

from attnconf.records import AttentionRecord


def random_stochastic(rng, n_out, n_in, zeros=False):
    a = rng.dirichlet(np.full(n_in, rng.uniform(0.1, 2.0)), size=n_out)
    if zeros:
        mask = rng.random(a.shape) < 0.3
        mask[np.arange(n_out), rng.integers(0, n_in, n_out)] = False
        a = np.where(mask, 0.0, a)
        a /= a.sum(axis=1, keepdims=True)
    return a


def make_record(record_id, attn, unk=False, system=None):
    attn = np.asarray(attn, dtype=float)
    n_out, n_in = attn.shape
    tgt = [f"t{i}" for i in range(n_out)]
    if unk:
        tgt[n_out // 2] = "<unk>"
    return AttentionRecord(record_id, [f"s{j}" for j in range(n_in)], tgt, attn, system=system)


def random_records(seed, n, max_len=8, unk_rate=0.0, prefix="r"):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        n_out, n_in = rng.integers(1, max_len + 1, 2)
        out.append(make_record(f"{prefix}{k}", random_stochastic(rng, n_out, n_in, zeros=bool(k % 3 == 0)),
                               unk=bool(rng.random() < unk_rate)))
    return out


def aligned_matrix(rng, n, noise=0.05):
    """Near-permutation attention: each output token focuses on one input token."""
    perm = rng.permutation(n)
    a = np.full((n, n), noise / max(n - 1, 1))
    a[np.arange(n), perm] = 1.0 - noise if n > 1 else 1.0
    return a / a.sum(axis=1, keepdims=True)
