"""Proof mutations with a known expected failure tier.

Used to check that the verifier classifies defects the way they were
injected: a corrupted call is a syntax error, a deleted supporting step
leaves a premise unproved, a deleted last step leaves the goal free.
"""

from __future__ import annotations

import random
from dataclasses import replace
from typing import Mapping, Sequence

from geoproof.dataset import ProofStep, TheoremDef
from geoproof.state import canonical_key, expand

CORRUPT = "corrupt_call"
DROP_SUPPORT = "drop_support"
DROP_FINAL = "drop_final"
FAMILIES = {CORRUPT: 1, DROP_SUPPORT: 2, DROP_FINAL: 3}


def _renumber(steps: Sequence[ProofStep]) -> tuple[ProofStep, ...]:
    return tuple(replace(s, step_id=i) for i, s in enumerate(steps, 1))


def corrupt_call(proof: Sequence[ProofStep], rng: random.Random) -> tuple[ProofStep, ...]:
    """Break the name, the variation or the argument count of one step."""
    i = rng.randrange(len(proof))
    s = proof[i]
    kind = rng.choice(["name", "variation", "arity"])
    if kind == "name":
        s = replace(s, theorem=s.theorem + "_" + rng.choice(["extended", "general", "inverse"]))
    elif kind == "variation":
        s = replace(s, variation=s.variation + rng.randint(5, 9))
    elif len(s.args) > 1 and rng.random() < 0.5:
        s = replace(s, args=s.args[:-1])
    else:
        s = replace(s, args=s.args + (s.args[-1],))
    out = list(proof)
    out[i] = s
    return _renumber(out)


def _conclusion_keys(step: ProofStep, dictionary) -> set[str]:
    thm: TheoremDef = dictionary[(step.theorem, step.variation)]
    _, conclusions = thm.instantiate(step.args)
    keys = set()
    for c in conclusions:
        for e in expand(c):
            keys.add(canonical_key(e))
    return keys


def _premise_keys(step: ProofStep, dictionary) -> set[str]:
    thm: TheoremDef = dictionary[(step.theorem, step.variation)]
    premise, _ = thm.instantiate(step.args)
    return {canonical_key(p) for p in premise}


def support_pairs(proof: Sequence[ProofStep], dictionary: Mapping) -> list[tuple[int, int]]:
    """Index pairs (i, j), i < j, where a conclusion of step i is literally a premise of step j."""
    pairs = []
    for j, later in enumerate(proof):
        need = _premise_keys(later, dictionary)
        for i in range(j):
            if _conclusion_keys(proof[i], dictionary) & need:
                pairs.append((i, j))
    return pairs


def drop_support(proof: Sequence[ProofStep], dictionary: Mapping, rng: random.Random) -> tuple[ProofStep, ...] | None:
    """Delete a step whose conclusion a later step needs as a premise."""
    candidates = sorted({i for i, _ in support_pairs(proof, dictionary)})
    if not candidates:
        return None
    i = rng.choice(candidates)
    return _renumber([s for k, s in enumerate(proof) if k != i])


def drop_final(proof: Sequence[ProofStep]) -> tuple[ProofStep, ...] | None:
    if not proof:
        return None
    return _renumber(proof[:-1])


def mutate(family: str, proof: Sequence[ProofStep], dictionary: Mapping, rng: random.Random):
    if family == CORRUPT:
        return corrupt_call(proof, rng)
    if family == DROP_SUPPORT:
        return drop_support(proof, dictionary, rng)
    if family == DROP_FINAL:
        return drop_final(proof)
    raise ValueError(f"unknown mutation family: {family}")
