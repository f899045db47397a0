import random
import re
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoproof.analogy import (
    AbstractProblem,
    AnalogyIndex,
    PairDataset,
    abstract,
    abstract_text,
    build_pair_dataset,
    coverage_experiment,
    label_bin,
    multiset_jaccard,
    narrow_dictionary,
    pair_features,
    retrieve_top_k,
    train_regressor,
)
from geoproof.cdl import substitute_letters
from geoproof.dataset import ProofStep
from geoproof.regressor import MLPRegressor

LEFTOVER = re.compile(r"[0-9]|[A-Z]{2,}|[A-Z](?![a-z])")


def rename(p, rng):
    """Apply a random bijection to the problem's point letters."""
    letters = sorted({c for t in (*p.construction, *p.conditions, p.goal) for c in _letters(t)})
    image = rng.sample("ABCDEFGHIJKLMNOPQRSTUVWXYZ", len(letters))
    m = dict(zip(letters, image))
    steps = tuple(ProofStep(s.step_id, s.theorem, s.variation, tuple("".join(m.get(c, c) for c in a) for a in s.args)) for s in p.proof)
    return replace(
        p, id=p.id + 100_000,
        construction=tuple(substitute_letters(t, m) for t in p.construction),
        conditions=tuple(substitute_letters(t, m) for t in p.conditions),
        goal=substitute_letters(p.goal, m), proof=steps,
    )


def _letters(t):
    from geoproof.cdl import point_letters

    return point_letters(t)


@pytest.mark.parametrize("src, want", [
    ("Equal(MeasureOfAngle(ABC),40)", "Equal(MeasureOfAngle(<word>),<num>)"),
    ("Collinear(ADFB)", "Collinear(<word>)"),
    ("Equal(Div(LengthOfLine(AD),LengthOfLine(DF)),3/2)", "Equal(Div(LengthOfLine(<word>),LengthOfLine(<word>)),<num>/<num>)"),
    ("Equal(LengthOfLine(AB),Add(x,2.5))", "Equal(LengthOfLine(<word>),Add(<word>,<num>))"),
])
def test_abstract_examples(src, want):
    assert abstract_text(src) == want


def test_abstract_idempotent(small_corpus):
    for p in small_corpus[:50]:
        for t in (*p.construction, *p.conditions, p.goal):
            once = abstract_text(str(t))
            assert abstract_text(once) == once


def test_proof_unit(nested):
    a = abstract(nested)
    assert a.proof_abs["line_addition(1,<word>,<word>)"] == 3


@pytest.mark.parametrize("a, b, want", [
    ("abc", "abc", 1.0),
    ("ab", "cd", 0.0),
    ("sst", "stt", 0.5),
    ("", "", 1.0),
    ("", "s", 0.0),
])
def test_jaccard_examples(a, b, want):
    assert multiset_jaccard(list(a), list(b)) == want


def _oracle(a, b):
    """Count every element by hand."""
    keys = set(a) | set(b)
    if not keys:
        return 1.0
    lo = sum(min(a.count(k), b.count(k)) for k in keys)
    hi = sum(max(a.count(k), b.count(k)) for k in keys)
    return lo / hi


bags = st.lists(st.sampled_from("stuvw"), max_size=8)


@given(bags, bags)
def test_jaccard_properties(a, b):
    j = multiset_jaccard(a, b)
    assert j == _oracle(a, b)
    assert j == multiset_jaccard(b, a)
    assert 0.0 <= j <= 1.0
    assert (j == 1.0) == (Counter(a) == Counter(b))


def test_self_features(nested):
    a = abstract(nested)
    assert pair_features(a, a).as_tuple() == (1.0, 1.0, 1)


def test_same_goal_disjoint_statements():
    a = AbstractProblem(Counter(["x"]), Counter(["y"]), "Value(LengthOfLine(<word>))", Counter())
    b = AbstractProblem(Counter(["z"]), Counter(["w"]), "Value(LengthOfLine(<word>))", Counter())
    assert pair_features(a, b).as_tuple() == (0.0, 0.0, 1)


def test_goal_kinds_differ():
    a = AbstractProblem(Counter(), Counter(), "Value(LengthOfLine(<word>))", Counter())
    b = AbstractProblem(Counter(), Counter(), "Value(MeasureOfAngle(<word>))", Counter())
    assert pair_features(a, b).goal_match == 0


def test_bins_half_open():
    assert label_bin(np.array([0.0, 0.19, 0.2, 0.59, 0.6, 0.8, 1.0])).tolist() == [0, 0, 1, 2, 3, 4, 4]


def test_three_problems_three_pairs(small_corpus):
    ds = build_pair_dataset(small_corpus[:3], balance=False)
    assert ds.total_pairs == len(ds) == 3
    assert all(a != b for a, b in zip(ds.id_a, ds.id_b))


def test_pair_rows_match_scalar_features(small_corpus):
    probs = small_corpus[:30]
    ds = build_pair_dataset(probs, balance=False)
    by_id = {p.id: abstract(p) for p in probs}
    for a, b, f, y in list(zip(ds.id_a, ds.id_b, ds.features, ds.labels))[:200]:
        assert tuple(f) == pytest.approx(pair_features(by_id[a], by_id[b]).as_tuple())
        assert y == pytest.approx(multiset_jaccard(by_id[a].proof_abs, by_id[b].proof_abs))


def test_balanced_bins_and_split(small_corpus):
    ds = build_pair_dataset(small_corpus[:150], seed=3)
    counts = ds.bin_counts()
    assert len(set(counts)) == 1 and counts[0] > 0
    assert ds.is_eval.sum() == round(0.1 * len(ds))


def test_pair_dataset_file_round_trip(tmp_path, small_corpus):
    ds = build_pair_dataset(small_corpus[:40], seed=1)
    ds.save(tmp_path / "p.tsv")
    back = PairDataset.load(tmp_path / "p.tsv")
    assert back.total_pairs == ds.total_pairs and back.seed == 1
    assert np.array_equal(back.id_a, ds.id_a) and np.array_equal(back.is_eval, ds.is_eval)
    assert np.allclose(back.features, ds.features, atol=1e-6)


@pytest.fixture(scope="module")
def model(small_corpus):
    return train_regressor(build_pair_dataset(small_corpus, seed=0), seed=0)


def test_renamed_clone_ranked_first(desk_corpus, desk_model):
    # The network is not monotone in its inputs, so a (1,1,1) clone can be
    # outscored by a near-clone; require it at the top for nearly all targets.
    rng = random.Random(1)
    top = near = 0
    targets = desk_corpus[:50]
    for t in targets:
        clone = rename(t, rng)
        assert pair_features(abstract(t), abstract(clone)).as_tuple() == (1.0, 1.0, 1)
        ranked = retrieve_top_k(t, [*desk_corpus, clone], desk_model, 5)
        score = dict(ranked).get(clone.id, 0.0)
        top += score == ranked[0][1]
        near += score > 0.9
    assert top >= 0.9 * len(targets) and near >= 0.9 * len(targets)


def test_k_larger_than_corpus(small_corpus, model):
    ranked = retrieve_top_k(small_corpus[0], small_corpus[:20], model, 500)
    assert len(ranked) == 19
    assert small_corpus[0].id not in dict(ranked)


def test_ranking_order_and_ties(small_corpus, model):
    ranked = retrieve_top_k(small_corpus[5], small_corpus, model, len(small_corpus))
    keys = [(-s, i) for i, s in ranked]
    assert keys == sorted(keys)


def test_ranking_invariant_under_permutation(small_corpus, model):
    shuffled = list(small_corpus)
    random.Random(4).shuffle(shuffled)
    t = small_corpus[7]
    assert retrieve_top_k(t, small_corpus, model, 30) == retrieve_top_k(t, shuffled, model, 30)


def test_narrow_dictionary(nested, dictionary):
    sub = narrow_dictionary([nested], dictionary)
    assert set(sub) == {(s.theorem, s.variation) for s in nested.proof}
    assert narrow_dictionary([replace(nested, proof=())], dictionary) == {}


def test_full_corpus_k_covers_everything(small_corpus, model):
    sample = small_corpus[:10]
    rows = coverage_experiment(sample, small_corpus, model, ks=(len(small_corpus),), seed=0)
    # every other problem is chosen, so a target is covered iff its theorems appear elsewhere
    assert rows[0].analogy_coverage == rows[0].random_coverage


@given(st.randoms(use_true_random=False))
@settings(max_examples=10, deadline=None)
def test_renaming_invariance_property(small_corpus, rnd):
    p = small_corpus[rnd.randrange(len(small_corpus))]
    assert pair_features(abstract(p), abstract(rename(p, rnd))).as_tuple() == (1.0, 1.0, 1)
