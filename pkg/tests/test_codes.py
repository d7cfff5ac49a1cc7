from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from peakpower.codes import (BinaryLinearCode, GaloisField, aperiodic_autocorrelation, bch_code,
                             bch_dual_balancer, code_strength, dual_code, gf2_rank, is_complementary_pair,
                             rudin_shapiro, strength_by_projection, write_sequence_csv, SequencePair)
from peakpower.metrics import papr
from peakpower.ofdm import synthesize


def brute_force_min_distance(gen, n):
    # enumerate every message straight from the generator rows
    k = len(gen)
    best = n + 1
    for msg in product((0, 1), repeat=k):
        if any(msg):
            w = int((np.array(msg) @ np.asarray(gen, dtype=int) % 2).sum())
            best = min(best, w)
    return best


def test_rudin_shapiro_examples():
    pair = rudin_shapiro(1)
    assert pair.p.tolist() == [1, 1] and pair.q.tolist() == [1, -1]
    assert rudin_shapiro(2).p.tolist() == [1, 1, 1, -1]
    assert rudin_shapiro(0).p.tolist() == [1]
    with pytest.raises(ValueError):
        rudin_shapiro(-1)
    with pytest.raises(ValueError):
        rudin_shapiro(40)


@pytest.mark.parametrize("m", range(3, 13))
def test_rudin_shapiro_papr_at_most_two(m):
    pair = rudin_shapiro(m)
    for seq in (pair.p, pair.q):
        assert papr(synthesize(seq.astype(complex), 8)) <= 2.0 + 1e-12


def test_autocorrelation_examples():
    assert aperiodic_autocorrelation([1, -1, 1], 0) == 3
    assert aperiodic_autocorrelation([1, -1, 1], 3) == 0
    assert aperiodic_autocorrelation([1, 1], 1) == 1


def test_complementary_examples():
    assert is_complementary_pair(SequencePair(np.array([1]), np.array([1])))
    assert not is_complementary_pair(SequencePair(np.array([1, 1]), np.array([1, 1])))
    with pytest.raises(ValueError):
        SequencePair(np.array([1, 1]), np.array([1]))


@pytest.mark.parametrize("m", range(0, 11))
def test_rudin_shapiro_complementary_by_direct_sum(m):
    pair = rudin_shapiro(m)
    n = len(pair.p)
    for lag in range(1, n):
        total = sum(pair.p[i] * pair.p[i + lag] + pair.q[i] * pair.q[i + lag] for i in range(n - lag))
        assert total == 0
    assert is_complementary_pair(pair)


def test_sequence_csv(tmp_path):
    path = tmp_path / "rs.csv"
    write_sequence_csv(path, rudin_shapiro(2).q)
    assert path.read_text().splitlines() == ["index,value", "0,1", "1,1", "2,-1", "3,1"]


def test_strength_examples():
    assert code_strength(BinaryLinearCode.full_space(6)) == 6
    assert strength_by_projection(BinaryLinearCode.full_space(6)) == 6
    assert strength_by_projection(BinaryLinearCode.repetition(6)) == 1
    assert code_strength(BinaryLinearCode.repetition(6)) == 1
    assert strength_by_projection(BinaryLinearCode.even_weight(8)) == 7
    assert code_strength(BinaryLinearCode.even_weight(8)) == 7
    assert code_strength(BinaryLinearCode.zero(5)) == 0


def test_dual_examples():
    assert dual_code(BinaryLinearCode.full_space(5)).k == 0
    assert dual_code(BinaryLinearCode.zero(5)) == BinaryLinearCode.full_space(5)
    rng = np.random.default_rng(0)
    code = BinaryLinearCode.random(rng, 6, 3)
    assert dual_code(dual_code(code)) == code
    assert dual_code(code).k == 3
    # every dual row is orthogonal to every code row
    assert not np.any((code.generator.astype(int) @ dual_code(code).generator.T.astype(int)) % 2)


def test_linear_code_validation_and_io(tmp_path):
    with pytest.raises(ValueError):
        BinaryLinearCode(np.array([[1, 1, 0], [1, 1, 0]]), 3)
    code = BinaryLinearCode.from_rows([[1, 1, 0], [1, 1, 0], [0, 1, 1]])
    assert code.k == 2
    path = tmp_path / "g.txt"
    code.write(path)
    assert BinaryLinearCode.read(path) == code
    words = code.codewords()
    assert not words[0].any() and len({w.tobytes() for w in words}) == 4


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, 2 ** 32 - 1))))
def test_strength_equals_dual_distance_minus_one(args):
    n, k, seed = args
    code = BinaryLinearCode.random(np.random.default_rng(seed), n, k)
    assert strength_by_projection(code) == code_strength(code)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 10).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n), st.integers(0, 2 ** 32 - 1))))
def test_minimum_distance_matches_enumeration(args):
    n, k, seed = args
    code = BinaryLinearCode.random(np.random.default_rng(seed), n, k)
    assert code.minimum_distance() == brute_force_min_distance(code.generator, n)


@pytest.mark.parametrize("seed", range(8))
def test_strength_t_patterns_all_realised(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    code = BinaryLinearCode.random(rng, n, int(rng.integers(1, n + 1)))
    t = code_strength(code)
    words = code.codewords()
    for cols in combinations(range(n), t):
        seen = {tuple(w) for w in words[:, cols]}
        assert len(seen) == 2 ** t


def test_galois_field_tables():
    for m in range(2, 9):
        gf = GaloisField(m)
        assert gf.is_primitive()
        a = int(gf.exp[5 % gf.order])
        assert gf.mul(a, int(gf.exp[gf.order - 5 % gf.order])) == 1
    with pytest.raises(ValueError):
        GaloisField(9)
    # x^4 + x + 1 is the minimal polynomial of alpha in GF(16)
    assert GaloisField(4).minimal_polynomial(1).tolist() == [1, 1, 0, 0, 1]


def test_bch_15_7_5():
    bch = bch_code(4, 5)
    assert (bch.n, bch.k) == (15, 7)
    assert bch.code.minimum_distance() == brute_force_min_distance(bch.code.generator, 15) == 5
    bal = bch_dual_balancer(4, 5)
    assert bal.code.k == 8
    assert strength_by_projection(bal.code) >= 4
    assert bal.strength_exact == strength_by_projection(bal.code)


def test_hamming_dual_is_simplex_with_strength_two():
    bal = bch_dual_balancer(3, 3)
    assert (bal.bch.n, bal.bch.k) == (7, 4)
    words = bal.code.codewords()
    assert sorted(set(words.sum(axis=1).tolist())) == [0, 4]
    assert strength_by_projection(bal.code) == 2


def test_bch_dual_balancer_m7():
    bal = bch_dual_balancer(7, 11)
    assert bal.code.n == 127
    assert bal.code.k == 127 - bal.bch.k
    assert bal.strength_lower_bound == 10
    assert gf2_rank(bal.code.generator) == bal.code.k
    assert not np.any((bal.code.generator.astype(int) @ bal.bch.code.generator.T.astype(int)) % 2)
    padded = bal.code.prepend_fixed(1)
    assert padded.n == 128 and not padded.generator[:, 0].any()
    with pytest.raises(ValueError):
        bch_dual_balancer(7, 200)
