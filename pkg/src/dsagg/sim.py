"""Protocol execution over an in-memory broadcast channel.

The channel model is error-free broadcast, so transport is just a log:
a round samples the inputs and the source key, forms each user's
message X_k = W_k + C_k . N, and lets every user decode the aggregate
from the other messages plus its own input and key.  Messages are
ordered by user id.  Rounds are deterministic given (scheme, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, UnknownUser
from .scheme import SchemeSpec


@dataclass(frozen=True)
class Transcript:
    """Everything observable (and hidden) in one protocol round."""

    rng_seed: int
    q: int
    inputs: np.ndarray       # K x L, W
    source_key: np.ndarray   # seed_length, N
    keys: np.ndarray         # K x L, Z_k = C_k . N
    messages: np.ndarray     # K x L, X_k = W_k + Z_k
    decoded: np.ndarray      # K x L, per-user aggregate estimate

    def input_sum(self) -> np.ndarray:
        return self.inputs.sum(axis=0) % self.q

    def all_decodes_agree(self) -> bool:
        target = self.input_sum()
        return bool(np.all(self.decoded == target[None, :]))


def _matvec(map_matrix, vec: np.ndarray, q: int) -> np.ndarray:
    """C_k . N mod q, falling back to exact Python ints for huge moduli."""
    a = map_matrix.array()
    if a.dtype == object or q > 2**31 - 1:
        return np.array(
            [sum(int(x) * int(v) for x, v in zip(row, vec)) % q for row in a],
            dtype=np.int64 if q <= 2**62 else object,
        )
    return (a @ vec) % q


def run_round(
    spec: SchemeSpec,
    rng_seed: int = 0,
    inputs_override: np.ndarray | None = None,
) -> Transcript:
    """Execute one round; inputs may be pinned for directed tests."""
    k_count, ell, q = spec.num_users, spec.block_length, spec.q
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    if inputs_override is not None:
        w = np.asarray(inputs_override, dtype=np.int64)
        if w.shape != (k_count, ell):
            raise ShapeMismatch(
                f"inputs must have shape {(k_count, ell)}, got {w.shape}"
            )
        w = w % q
        rng.integers(0, q, size=(k_count, ell))  # keep the key draw aligned
    else:
        w = rng.integers(0, q, size=(k_count, ell), dtype=np.int64)
    n = rng.integers(0, q, size=(spec.seed_length,), dtype=np.int64)

    keys = np.empty((k_count, ell), dtype=np.int64)
    for k in range(1, k_count + 1):
        keys[k - 1] = _matvec(spec.key_maps[k], n, q)
    messages = (w + keys) % q

    decoded = np.empty((k_count, ell), dtype=np.int64)
    for u in range(1, k_count + 1):
        others = (messages.sum(axis=0) - messages[u - 1]) % q
        decoded[u - 1] = (others + w[u - 1] + keys[u - 1]) % q

    return Transcript(
        rng_seed=rng_seed,
        q=q,
        inputs=w,
        source_key=n,
        keys=keys,
        messages=messages,
        decoded=decoded,
    )


def decode_at_user(user: int, spec: SchemeSpec, transcript: Transcript) -> np.ndarray:
    """Recompute a user's decode from only its own view of the round."""
    k_count, q = spec.num_users, spec.q
    if not 1 <= user <= k_count:
        raise UnknownUser(f"user {user} not in 1..{k_count}")
    view_messages = [
        transcript.messages[k - 1] for k in range(1, k_count + 1) if k != user
    ]
    own_w = transcript.inputs[user - 1]
    own_z = _matvec(spec.key_maps[user], transcript.source_key, q)
    return (sum(view_messages) + own_w + own_z) % q


def run_many(spec: SchemeSpec, rounds: int, base_seed: int = 0) -> dict:
    """Round summary for reporting: agreement count plus the first round."""
    agree = 0
    first: Transcript | None = None
    for i in range(rounds):
        t = run_round(spec, rng_seed=base_seed + i)
        if first is None:
            first = t
        if t.all_decodes_agree():
            agree += 1
    return {
        "rounds": rounds,
        "agreeing_rounds": agree,
        "all_agree": agree == rounds,
        "first_round": None
        if first is None
        else {
            "inputs": first.inputs.tolist(),
            "source_key": first.source_key.tolist(),
            "messages": first.messages.tolist(),
            "decoded": first.decoded.tolist(),
            "input_sum": first.input_sum().tolist(),
        },
    }
