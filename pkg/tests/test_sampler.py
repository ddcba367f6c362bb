import json
import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats as sps

from locomp import (AsymptoticModel, brute_force, build_sampler, build_spec, collect_stats, count,
                    is_valid_composition, max_part_distribution, poisson_check, sample)
from locomp.sampler import (SampleStats, block_rng, composition_stats, stats_from_compositions,
                            unrank)


def test_root_counts_small():
    assert build_sampler(build_spec("unrestricted"), 4).root_count == 8
    assert build_sampler(build_spec("carlitz"), 5).root_count == 7


def test_carlitz_2_first_part_forced():
    t = build_sampler(build_spec("carlitz"), 2)
    # after a first part 1 the remaining 1 cannot be completed
    assert t.completions((0, 1), 1) == 0
    assert t.transitions(t.engine.root_state(), 2) == [(2, 1, (0, 2))]
    assert list(sample(t, 0, 5)) == [(2,)] * 5


def test_root_count_equals_count(specs):
    for name, s in specs.items():
        c = count(s, 30)
        for n in (1, 7, 30):
            assert build_sampler(s, n).root_count == c[n], name


def test_transition_weights_sum_to_completions(specs):
    for name, s in specs.items():
        t = build_sampler(s, 12)
        stack = [(t.engine.root_state(), 12)]
        seen = 0
        while stack and seen < 300:
            state, rem = stack.pop()
            steps = t.transitions(state, rem)
            assert sum(w for _, w, _ in steps) == t.completions(state, rem), name
            stack.extend((nxt, rem - x) for x, _, nxt in steps if rem - x > 0)
            seen += 1


def test_unrank_is_a_bijection(family):
    _, spec, _ = family
    for n in (1, 5, 10):
        t = build_sampler(spec, n)
        got = [unrank(t, u) for u in range(t.root_count)]
        assert sorted(got) == sorted(brute_force(spec, n))
        assert got == sorted(got)  # lexicographic order


def test_unrank_bijection_generic(specs):
    s = specs["strict_either"]
    t = build_sampler(s, 9)
    assert sorted(unrank(t, u) for u in range(t.root_count)) == sorted(brute_force(s, 9))
    with pytest.raises(ValueError):
        unrank(t, t.root_count)


def test_samples_valid(specs):
    for name, s in specs.items():
        n = 25
        t = build_sampler(s, n)
        for c in sample(t, 11, 10_000 if name != "strict_either" else 2000):
            assert sum(c) == n
            assert is_valid_composition(s, c)


@pytest.mark.parametrize("name", ["unrestricted", "carlitz", "diff_pm1", "weak_alt", "strict_alt",
                                  "strict_either", "chain"])
def test_uniformity_chi_square(specs, name):
    s = specs[name]
    for n in (6, 10):
        support = brute_force(s, n)
        if len(support) < 2:
            continue
        t = build_sampler(s, n)
        trials = 200 * len(support)
        freq = Counter(sample(t, 2024 + n, trials))
        assert set(freq) <= set(support)
        obs = [freq.get(c, 0) for c in support]
        assert sps.chisquare(obs).pvalue > 1e-3


def test_unrestricted_4_frequencies():
    t = build_sampler(build_spec("unrestricted"), 4)
    freq = Counter(sample(t, 5, 8000))
    assert len(freq) == 8
    sd = math.sqrt(8000 * (1 / 8) * (7 / 8))
    for v in freq.values():
        assert abs(v - 1000) < 4 * sd


def test_carlitz_5_all_seen():
    t = build_sampler(build_spec("carlitz"), 5)
    freq = Counter(sample(t, 9, 7000))
    assert len(freq) == 7
    assert sps.chisquare(list(freq.values())).pvalue > 1e-3


def test_forced_path(specs):
    t = build_sampler(specs["strict_alt"], 2)
    assert t.root_count == 1
    assert set(sample(t, 1, 50)) == {(2,)}


def test_reproducible_and_splittable():
    t = build_sampler(build_spec("carlitz"), 40)
    a = list(sample(t, 123, 3000))
    assert a == list(sample(t, 123, 3000))
    assert a != list(sample(t, 124, 3000))
    # any split of the trial range gives the same stream
    parts = list(sample(t, 123, 1500)) + list(sample(t, 123, 700, start=1500)) + \
        list(sample(t, 123, 800, start=2200))
    assert parts == a


def test_block_rng_distinct_streams():
    assert block_rng(1, 0).getrandbits(64) != block_rng(1, 1).getrandbits(64)
    assert block_rng(1, 0).getrandbits(64) == block_rng(1, 0).getrandbits(64)


def test_empty_class_sampling():
    from locomp import custom_spec
    s = custom_spec(lambda r, w: w[0] % 2 == 0, 1, 1)
    t = build_sampler(s, 3)
    with pytest.raises(ValueError):
        next(sample(t, 0, 1))


def test_composition_stats_examples():
    st = composition_stats((1, 2, 1, 3), k_max=3)
    assert (st["M"], st["D"], st["gap_free"], st["g"]) == (3, 3, True, 1)
    assert st["Dk"] == [2, 1, 0]
    st = composition_stats((1, 3, 1))
    assert st["M"] == 3 and not st["gap_free"]


def test_alternative_gap_free_definition():
    assert not composition_stats((2, 4))["gap_free"]
    assert composition_stats((3, 2, 4), alt_gap_free=True)["gap_free"]
    assert not composition_stats((3, 2, 4))["gap_free"]


def test_nonrecurrent_parts_ignored_in_gap_free():
    from locomp import custom_spec
    s = custom_spec(lambda r, w: True, 1, 1, nonrecurrent=[2])
    st = composition_stats((1, 3, 1), s)
    assert st["gap_free"] and st["D"] == 2


def test_stats_invariants():
    s = build_spec("carlitz")
    st = collect_stats(s, 60, 4000, seed=1, k_max=4, j_window=(3, 6))
    assert (st.D <= st.M).all()
    assert sum(st.g_distribution().values()) == pytest.approx(1.0)
    assert st.q_hat == pytest.approx(sum(st.gap_free_by_max().values()))
    for k in range(1, 5):
        p, _ = st.freq("g", k)
        assert 0 <= p <= 1
    assert (st.Dk.sum(axis=1) <= st.D).all()


def test_sampled_mean_max_matches_exact():
    s = build_spec("carlitz")
    n = 60
    exact = float(max_part_distribution(s, n).mean)
    st = collect_stats(s, n, 20_000, seed=42)
    m, se = st.mean_se("M")
    assert abs(m - exact) < 4 * se


def test_exports():
    st = collect_stats(build_spec("unrestricted"), 20, 50, seed=3, k_max=2, j_window=(2, 3))
    doc = json.loads(st.to_json())
    assert doc["trials"] == 50 and set(doc["zeta"]) == {"2", "3"}
    rows = st.to_csv().strip().splitlines()
    assert rows[0].split(",") == ["trial", "M", "D", "g", "gap_free", "min_mult", "D1", "D2", "zeta2", "zeta3"]
    assert len(rows) == 51


def test_bad_window():
    with pytest.raises(ValueError):
        collect_stats(build_spec("unrestricted"), 10, 5, j_window=(3, 2))


def _poisson_stats(mus, trials, seed):
    rng = np.random.default_rng(seed)
    z = np.column_stack([rng.poisson(mu, trials) for mu in mus])
    zeros = np.zeros(trials, dtype=np.int64)
    return SampleStats(n=1000, trials=trials, seed=seed, k_max=1, j_window=(9, 8 + len(mus)),
                       M=zeros, D=zeros, Dk=zeros[:, None], g=zeros, gap_free=zeros.astype(bool),
                       zeta=z, min_mult=zeros)


def test_poisson_null_self_test():
    r, C, n = 0.5, 0.5, 1000
    mus = [C * n * r**j for j in (9, 10, 11)]
    st = _poisson_stats(mus, 50_000, 17)
    rep = poisson_check(st, r, C)
    assert len(rep.ratios) == 3 * 2 + 3
    for x in rep.ratios:
        assert abs(x.ratio - 1) < 3 * x.se + 1e-12, x


def test_poisson_degenerate_window():
    comps = [(5,), (4, 1), (2, 3)]
    st = stats_from_compositions(comps, 5, j_window=(6, 7))
    rep = poisson_check(st, 0.5, 0.5)
    for x in rep.ratios:
        assert x.degenerate and x.observed == 0.0 and x.ratio == 0.0


@pytest.fixture(scope="module")
def unrestricted_500():
    return collect_stats(build_spec("unrestricted"), 500, 200_000, seed=500, k_max=3, j_window=(8, 11))


@pytest.mark.slow
def test_zeta10_mean_exact(unrestricted_500):
    # exact finite-n mean: (n - j + 3) / 2^(j + 1), confirmed by the moment DP
    m, se = unrestricted_500.mean_se("zeta", 10)
    assert abs(m - (500 - 10 + 3) / 2**11) < 3 * se


@pytest.mark.slow
def test_zeta10_mean_asymptotic_1e5(unrestricted_500):
    # first 1e5 trials of the seeded stream, compared with C n r^j
    z = unrestricted_500.zeta_of(10)[:100_000].astype(float)
    se = z.std(ddof=1) / math.sqrt(len(z))
    assert abs(z.mean() - 0.5 * 500 * 2**-10) < 3 * se


@pytest.mark.slow
def test_gn1_against_formula(unrestricted_500):
    model = AsymptoticModel(0.5, 0.5)
    p, se = unrestricted_500.freq("g", 1)
    assert 0 < model.gnk(500, 1) < 1
    assert abs(p - model.gnk(500, 1)) < 4 * se


@pytest.mark.slow
def test_Dnk_against_formula(unrestricted_500):
    model = AsymptoticModel(0.5, 0.5)
    for k in (1, 2, 3):
        m, se = unrestricted_500.mean_se("Dk", k)
        assert abs(m - model.expected_Dnk(500, k)) < 4 * se, k
