"""Problem abstraction, proof-similarity features, retrieval and dictionary narrowing.

Problems are compared through abstracted statements: every entity name
becomes ``<word>`` and every number ``<num>``, so two problems with the
same shape but different letters and values look identical.  A regressor
maps three overlap features to an estimate of how much two proofs share.
"""

from __future__ import annotations

import logging
import random
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from geoproof.cdl import render
from geoproof.dataset import Problem, ProofStep, TheoremDef
from geoproof.regressor import EmptyDataset, MLPRegressor

log = logging.getLogger(__name__)

WORD = "<word>"
NUM = "<num>"
BIN_EDGES = (0.2, 0.4, 0.6, 0.8)
HIGH_LABEL = 0.6
HIGH_SCORE = 0.95

_TOKEN = re.compile(
    r"(?P<keep><word>|<num>)"
    r"|(?P<head>[A-Za-z_][A-Za-z_0-9]*)(?=\s*\()"
    r"|(?P<num>\d+(?:\.\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
)
_CONSTANTS = {"pi"}


def abstract_text(text: str) -> str:
    """Replace entity names and unknowns by ``<word>`` and numbers by ``<num>``.

    >>> abstract_text("Equal(MeasureOfAngle(ABC),40)")
    'Equal(MeasureOfAngle(<word>),<num>)'
    """

    def sub(m: re.Match) -> str:
        if m.group("keep") or m.group("head"):
            return m.group(0)
        if m.group("num"):
            return NUM
        return m.group(0) if m.group("ident") in _CONSTANTS else WORD

    return _TOKEN.sub(sub, text)


def abstract_step(step: ProofStep) -> str:
    return f"{step.theorem}({step.variation},{','.join(WORD for _ in step.args)})"


@dataclass(frozen=True)
class AbstractProblem:
    construction_abs: Counter
    conditions_abs: Counter
    goal_abs: str
    proof_abs: Counter


def abstract(p: Problem) -> AbstractProblem:
    return AbstractProblem(
        Counter(abstract_text(render(t)) for t in p.construction),
        Counter(abstract_text(render(t)) for t in p.conditions),
        abstract_text(render(p.goal)),
        Counter(abstract_step(s) for s in p.proof),
    )


def multiset_jaccard(a: Mapping[str, int] | Iterable[str], b: Mapping[str, int] | Iterable[str]) -> float:
    a = a if isinstance(a, Counter) else Counter(a)
    b = b if isinstance(b, Counter) else Counter(b)
    keys = a.keys() | b.keys()
    if not keys:
        return 1.0
    hi = sum(max(a[k], b[k]) for k in keys)
    lo = sum(min(a[k], b[k]) for k in keys)
    return lo / hi if hi else 1.0


@dataclass(frozen=True)
class PairFeatures:
    j_construction: float
    j_conditions: float
    goal_match: int

    def as_tuple(self) -> tuple[float, float, int]:
        return (self.j_construction, self.j_conditions, self.goal_match)


def pair_features(a: AbstractProblem, b: AbstractProblem) -> PairFeatures:
    return PairFeatures(
        multiset_jaccard(a.construction_abs, b.construction_abs),
        multiset_jaccard(a.conditions_abs, b.conditions_abs),
        int(a.goal_abs == b.goal_abs),
    )


def label_bin(label: float | np.ndarray):
    """Bin index 0..4 of half-open width-0.2 intervals; 1.0 falls in the last bin."""
    return np.searchsorted(np.asarray(BIN_EDGES), label, side="right")


# vectorised pair computations -----------------------------------------------


class _Counts:
    """Dense count matrix of one multiset field over a problem list."""

    def __init__(self, bags: Sequence[Counter], vocab: dict[str, int] | None = None):
        self.vocab = vocab if vocab is not None else {}
        if vocab is None:
            for bag in bags:
                for k in bag:
                    self.vocab.setdefault(k, len(self.vocab))
        self.matrix = self.encode(bags)

    def encode(self, bags: Sequence[Counter]) -> np.ndarray:
        m = np.zeros((len(bags), max(len(self.vocab), 1)), dtype=np.int32)
        for i, bag in enumerate(bags):
            for k, c in bag.items():
                j = self.vocab.get(k)
                if j is not None:
                    m[i, j] = c
        return m

    @staticmethod
    def jaccard(row: np.ndarray, rows: np.ndarray, extra_row: int = 0, extra_rows: np.ndarray | int = 0) -> np.ndarray:
        """Multiset Jaccard of one count row against many.

        ``extra_*`` count elements outside the shared vocabulary; they add to the
        union but never to the intersection.
        """
        lo = np.minimum(row, rows).sum(axis=1)
        hi = np.maximum(row, rows).sum(axis=1) + extra_row + extra_rows
        out = np.ones(len(rows))
        nz = hi > 0
        out[nz] = lo[nz] / hi[nz]
        return out


class AnalogyIndex:
    """Abstracted corpus with count matrices for fast one-against-all features."""

    def __init__(self, problems: Sequence[Problem]):
        self.problems = list(problems)
        self.ids = np.array([p.id for p in self.problems])
        self.by_id = {p.id: i for i, p in enumerate(self.problems)}
        self.abstracts = [abstract(p) for p in self.problems]
        self.construction = _Counts([a.construction_abs for a in self.abstracts])
        self.conditions = _Counts([a.conditions_abs for a in self.abstracts])
        self.proofs = _Counts([a.proof_abs for a in self.abstracts])
        goals: dict[str, int] = {}
        self.goal = np.array([goals.setdefault(a.goal_abs, len(goals)) for a in self.abstracts])
        self._goal_vocab = goals

    def __len__(self) -> int:
        return len(self.problems)

    def features_against(self, target: AbstractProblem, rows: np.ndarray | slice = slice(None)) -> np.ndarray:
        feats = np.empty((len(self.ids[rows]), 3))
        for col, (counts, bag) in enumerate(((self.construction, target.construction_abs), (self.conditions, target.conditions_abs))):
            row = counts.encode([bag])[0]
            unseen = sum(c for k, c in bag.items() if k not in counts.vocab)
            feats[:, col] = _Counts.jaccard(row, counts.matrix[rows], unseen)
        g = self._goal_vocab.get(target.goal_abs, -1)
        feats[:, 2] = (self.goal[rows] == g).astype(float)
        return feats

    def proof_labels(self, i: int, rows: np.ndarray | slice = slice(None)) -> np.ndarray:
        return _Counts.jaccard(self.proofs.matrix[i], self.proofs.matrix[rows])


# pair dataset ---------------------------------------------------------------


@dataclass
class PairDataset:
    id_a: np.ndarray
    id_b: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    is_eval: np.ndarray
    total_pairs: int = 0
    seed: int = 0

    HEADER = "# geoproof pair dataset v1"
    COLUMNS = ("id_a", "id_b", "j_construction", "j_conditions", "goal_match", "label", "split")

    def __len__(self) -> int:
        return len(self.labels)

    def bin_counts(self) -> list[int]:
        return np.bincount(label_bin(self.labels), minlength=5).tolist()

    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[~self.is_eval], self.labels[~self.is_eval]

    def eval(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[self.is_eval], self.labels[self.is_eval]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.HEADER} total_pairs={self.total_pairs} seed={self.seed}\n")
            fh.write("\t".join(self.COLUMNS) + "\n")
            for a, b, f, y, e in zip(self.id_a, self.id_b, self.features, self.labels, self.is_eval):
                fh.write(f"{a}\t{b}\t{f[0]:.6f}\t{f[1]:.6f}\t{int(f[2])}\t{y:.6f}\t{'eval' if e else 'train'}\n")

    @classmethod
    def load(cls, path: str | Path) -> "PairDataset":
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith(cls.HEADER):
                raise ValueError(f"{path}: not a pair dataset")
            meta = dict(kv.split("=") for kv in first[len(cls.HEADER):].split())
            columns = fh.readline().rstrip("\n").split("\t")
            if tuple(columns) != cls.COLUMNS:
                raise ValueError(f"{path}: unexpected columns {columns}")
            rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
        if not rows:
            return cls(*(np.zeros(0, dtype=int),) * 2, np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=bool),
                       int(meta.get("total_pairs", 0)), int(meta.get("seed", 0)))
        cols = list(zip(*rows))
        return cls(
            np.array(cols[0], dtype=int),
            np.array(cols[1], dtype=int),
            np.column_stack([np.array(cols[i], dtype=float) for i in (2, 3, 4)]),
            np.array(cols[5], dtype=float),
            np.array([c == "eval" for c in cols[6]]),
            int(meta.get("total_pairs", 0)),
            int(meta.get("seed", 0)),
        )


def build_pair_dataset(
    problems: Sequence[Problem] | AnalogyIndex,
    balance: bool = True,
    seed: int = 0,
    eval_fraction: float = 0.1,
    max_pairs: int | None = None,
) -> PairDataset:
    """All unordered pairs with features and proof-similarity labels.

    With ``balance`` every label bin is down-sampled to the size of the
    smallest one.  ``max_pairs`` caps the result afterwards (desk-scale runs).
    """
    index = problems if isinstance(problems, AnalogyIndex) else AnalogyIndex(problems)
    n = len(index)
    ia, ib, feats, labels = [], [], [], []
    for i in range(n - 1):
        rows = np.arange(i + 1, n)
        ia.append(np.full(len(rows), i))
        ib.append(rows)
        feats.append(index.features_against(index.abstracts[i], rows))
        labels.append(index.proof_labels(i, rows))
    if not ia:
        empty = np.zeros(0, dtype=int)
        return PairDataset(empty, empty, np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=bool), 0, seed)
    ia_a, ib_a = np.concatenate(ia), np.concatenate(ib)
    X, y = np.concatenate(feats), np.concatenate(labels)
    total = len(y)
    rng = np.random.default_rng(seed)
    keep = np.arange(total)
    if balance:
        bins = label_bin(y)
        counts = np.bincount(bins, minlength=5)
        smallest = counts[counts > 0].min()
        keep = np.concatenate([rng.choice(np.flatnonzero(bins == b), size=smallest, replace=False) for b in range(5) if counts[b]])
        keep.sort()
    if max_pairs is not None and len(keep) > max_pairs:
        keep = np.sort(rng.choice(keep, size=max_pairs, replace=False))
    is_eval = np.zeros(len(keep), dtype=bool)
    is_eval[rng.permutation(len(keep))[: int(round(eval_fraction * len(keep)))]] = True
    return PairDataset(index.ids[ia_a[keep]], index.ids[ib_a[keep]], X[keep], y[keep], is_eval, total, seed)


def train_regressor(ds: PairDataset, seed: int = 0, **params) -> MLPRegressor:
    X, y = ds.train()
    if len(y) == 0:
        raise EmptyDataset("pair dataset has no training rows")
    return MLPRegressor(random_state=seed, **params).fit(X, y)


def high_score_precision(model: MLPRegressor, X: np.ndarray, y: np.ndarray, threshold: float = HIGH_SCORE) -> tuple[float, int]:
    """Share of pairs scored above ``threshold`` whose label is in the top two bins."""
    scores = model.predict(X)
    hit = scores > threshold
    if not hit.any():
        return float("nan"), 0
    return float(np.mean(y[hit] >= HIGH_LABEL)), int(hit.sum())


# retrieval ------------------------------------------------------------------


def rank(ids: np.ndarray, scores: np.ndarray, k: int) -> list[tuple[int, float]]:
    order = np.lexsort((ids, -scores))
    return [(int(ids[i]), float(scores[i])) for i in order[:k]]


def retrieve_top_k(
    target: Problem,
    corpus: Sequence[Problem] | AnalogyIndex,
    model: MLPRegressor,
    k: int,
) -> list[tuple[int, float]]:
    """The ``k`` corpus problems most likely to share the target's proof, best first.

    The target itself (same id) is never returned; ties go to the smaller id.
    """
    index = corpus if isinstance(corpus, AnalogyIndex) else AnalogyIndex(corpus)
    rows = np.flatnonzero(index.ids != target.id)
    if not len(rows):
        return []
    scores = model.predict(index.features_against(abstract(target), rows))
    return rank(index.ids[rows], scores, k)


def proof_keys(problems: Iterable[Problem]) -> set[tuple[str, int]]:
    return {(s.theorem, s.variation) for p in problems for s in p.proof}


def narrow_dictionary(analogs: Iterable[Problem], dictionary: Mapping[tuple[str, int], TheoremDef]) -> dict[tuple[str, int], TheoremDef]:
    return {key: dictionary[key] for key in sorted(proof_keys(analogs)) if key in dictionary}


@dataclass(frozen=True)
class CoverageRow:
    k: int
    analogy_coverage: float
    analogy_theorems: float
    random_coverage: float
    random_theorems: float


def coverage_experiment(
    sample: Sequence[Problem],
    corpus: Sequence[Problem] | AnalogyIndex,
    model: MLPRegressor,
    ks: Sequence[int] = (20, 50, 100),
    seed: int = 0,
) -> list[CoverageRow]:
    """Coverage of analogy-narrowed against random-k dictionaries.

    A target is covered when every theorem of its own proof appears in the
    proofs of the k chosen problems.
    """
    index = corpus if isinstance(corpus, AnalogyIndex) else AnalogyIndex(corpus)
    rng = random.Random(seed)
    kmax = max(ks)
    hits = {k: [0, 0, 0, 0] for k in ks}  # analogy hits, analogy size, random hits, random size
    for target in sample:
        need = proof_keys([target])
        ranked = [index.problems[index.by_id[i]] for i, _ in retrieve_top_k(target, index, model, kmax)]
        others = [p for p in index.problems if p.id != target.id]
        for k in ks:
            chosen = proof_keys(ranked[:k])
            hits[k][0] += need <= chosen
            hits[k][1] += len(chosen)
            rand = proof_keys(rng.sample(others, min(k, len(others))))
            hits[k][2] += need <= rand
            hits[k][3] += len(rand)
    n = max(len(sample), 1)
    return [CoverageRow(k, h[0] / n, h[1] / n, h[2] / n, h[3] / n) for k, h in hits.items()]
