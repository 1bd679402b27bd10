import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from ewdpmm import (
    Atom,
    DomainError,
    EWParams,
    Sequence,
    conditional_log_density,
    ew_cdf,
    ew_log_pdf,
    ew_pdf,
    hierarchical_log_density,
    joint_log_density,
    length_log_pmf,
    order_stat_marginal_pdf,
    rng_stream,
    sample_sequence,
    sequence_log_likelihood,
)
from ewdpmm.orderstats import PackedSequences, sample_padded


def random_case(rng):
    """Parameters log-uniform on [0.05, 20]^3 and a sequence drawn from them."""
    n = int(rng.integers(1, 25))
    p = EWParams(*np.exp(rng.uniform(np.log(0.05), np.log(20), 3)))
    w = float(rng.uniform(0.05, 0.95))
    return sample_sequence(rng, Atom(p, w), n), p


def test_sequence_validation():
    s = Sequence(5, (0.8, 0.5, 0.2))
    assert s.l == 3
    for bad in [(0.5, 0.5), (0.2, 0.8), (0.5, -0.1), ()]:
        with pytest.raises(DomainError):
            Sequence(5, bad)
    with pytest.raises(DomainError):
        Sequence(2, (3.0, 2.0, 1.0))
    with pytest.raises(DomainError):
        Atom(EWParams(1, 1, 1), 1.0)


def test_length_pmf():
    assert length_log_pmf(1, 10, 0.0) == 0.0
    assert length_log_pmf(5, 10, 0.5) == pytest.approx(math.log(126 / 512), abs=1e-14)
    rng = np.random.default_rng(0)
    for _ in range(100):
        n, w = int(rng.integers(1, 60)), float(rng.uniform())
        total = sum(math.exp(length_log_pmf(l, n, w)) for l in range(1, n + 1))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_joint_special_cases():
    p = EWParams(1, 1, 1)
    assert joint_log_density(Sequence(3, (3.0, 2.0, 1.0)), p) == pytest.approx(math.log(6) - 6, abs=1e-13)
    q = EWParams(0.7, 1.9, 0.6)
    x = 1.3
    expected = math.log(4 * ew_pdf(x, q) * ew_cdf(x, q) ** 3)
    assert joint_log_density(Sequence(4, (x,)), q) == pytest.approx(expected, abs=1e-12)
    assert hierarchical_log_density(Sequence(4, (x,)), q) == pytest.approx(expected, abs=1e-12)
    two = Sequence(2, (1.5, 0.4))
    assert hierarchical_log_density(two, q) == pytest.approx(
        math.log(2) + ew_log_pdf(1.5, q) + ew_log_pdf(0.4, q), abs=1e-12)


def test_joint_matches_hierarchical_randomised():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        seq, p = random_case(rng)
        worst = max(worst, abs(joint_log_density(seq, p) - hierarchical_log_density(seq, p)))
    assert worst < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30), st.floats(0.05, 20), st.floats(0.05, 20), st.floats(0.05, 20),
       st.lists(st.floats(1e-3, 50), min_size=1, max_size=30, unique=True))
def test_identity_property(n, a, b, lam, xs):
    xs = sorted(xs, reverse=True)[:n]
    seq, p = Sequence(n, tuple(xs)), EWParams(a, b, lam)
    j, h = joint_log_density(seq, p), hierarchical_log_density(seq, p)
    if math.isfinite(j):
        assert abs(j - h) < 1e-10 * max(1.0, abs(j))


def test_joint_integrates_to_one(frozen):
    # the oracle integrated scipy's density; here integrate ours for a subset and compare both to 1
    for r in frozen["joint_mass"]:
        assert r["mass"] == pytest.approx(1.0, abs=1e-4)
    p = EWParams(0.6, 1.7, 0.4)
    n = 5
    hi = 40.0
    val, _ = integrate.dblquad(lambda y, x: math.exp(joint_log_density(Sequence(n, (x, y)), p)),
                               0, hi, 0, lambda x: x, epsabs=1e-10)
    assert val == pytest.approx(1.0, abs=1e-4)


def test_conditional_density():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 12))
        j = int(rng.integers(1, n))
        p = EWParams(*np.exp(rng.uniform(-1.5, 1.5, 3)))
        xu = float(np.exp(rng.uniform(-1, 1)))
        val, _ = integrate.quad(lambda x: math.exp(conditional_log_density(x, xu, j, n, p)), 0, xu,
                                limit=200, epsabs=1e-12)
        assert val == pytest.approx(1.0, abs=1e-6)
        # derivative of (F(x)/F(xu))^(n-j)
        xl = xu * float(rng.uniform(0.2, 0.9))
        h = 1e-6 * xl
        G = lambda x: (ew_cdf(x, p) / ew_cdf(xu, p)) ** (n - j)
        fd = (G(xl + h) - G(xl - h)) / (2 * h)
        assert math.exp(conditional_log_density(xl, xu, j, n, p)) == pytest.approx(fd, rel=1e-5)
    p = EWParams(1, 1, 1)
    assert math.exp(conditional_log_density(0.3, 1.2, 3, 4, p)) == pytest.approx(
        ew_pdf(0.3, p) / ew_cdf(1.2, p), rel=1e-12)


def test_likelihood_additivity_and_w_zero():
    seq = Sequence(6, (2.0, 1.1, 0.4))
    atom = Atom(EWParams(0.8, 1.3, 0.9), 0.3)
    assert sequence_log_likelihood(seq, atom) == length_log_pmf(3, 6, 0.3) + joint_log_density(seq, atom.ew)
    assert length_log_pmf(2, 6, 0.0) == -math.inf


def test_order_stat_marginal():
    p = EWParams(0.9, 2.1, 0.7)
    n, x = 6, 1.1
    f, F = ew_pdf(x, p), ew_cdf(x, p)
    assert order_stat_marginal_pdf(x, n, n, p) == pytest.approx(n * f * F ** (n - 1), rel=1e-12)
    assert order_stat_marginal_pdf(x, 1, n, p) == pytest.approx(n * f * (1 - F) ** (n - 1), rel=1e-12)
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = int(rng.integers(1, 15))
        j = int(rng.integers(1, n + 1))
        q = EWParams(*np.exp(rng.uniform(-1, 1.5, 3)))
        val, _ = integrate.quad(lambda v: order_stat_marginal_pdf(v, j, n, q), 0, np.inf, limit=400)
        assert val == pytest.approx(1.0, abs=1e-6)


def test_sample_sequence():
    a = sample_sequence(rng_stream(3), Atom(EWParams(1, 1, 1), 0.5), 10)
    b = sample_sequence(rng_stream(3), Atom(EWParams(1, 1, 1), 0.5), 10)
    assert a == b
    tiny = [sample_sequence(rng_stream(s), Atom(EWParams(1, 1, 1), 1e-12), 10).l for s in range(200)]
    assert set(tiny) == {1}


def test_top_value_closure_ks():
    atoms = np.tile([0.5, 1.5, 1.5, 0.75], (100_000, 1))
    mat, _ = sample_padded(rng_stream(21), atoms, 20)
    top = mat[:, 0]
    assert stats.kstest(top, lambda v: ew_cdf(v, EWParams(10.0, 1.5, 1.5))).pvalue > 0.01


def test_lengths_chi2():
    atoms = np.tile([1.0, 1.0, 1.0, 0.3], (50_000, 1))
    _, lengths = sample_padded(rng_stream(22), atoms, 8)
    obs = np.bincount(lengths, minlength=9)[1:]
    exp = stats.binom.pmf(np.arange(8), 7, 0.3) * lengths.size
    keep = exp > 5
    assert stats.chisquare(obs[keep], exp[keep] * obs[keep].sum() / exp[keep].sum()).pvalue > 0.01


def test_top_pair_histogram_chi2():
    p = EWParams(2.5, 3.3, 0.35)
    atoms = np.tile([2.5, 3.3, 0.35, 0.999999], (100_000, 1))
    mat, _ = sample_padded(rng_stream(23), atoms, 5)
    x1, x2 = mat[:, 0], mat[:, 1]
    e1 = np.quantile(x1, np.linspace(0, 1, 21))
    e2 = np.quantile(x2, np.linspace(0, 1, 21))
    e1[0] = e2[0] = 1e-9
    e1[-1] = e2[-1] = 60.0
    obs, _, _ = np.histogram2d(x1, x2, [e1, e2])
    # cell probabilities by integrating the joint top-2 density: P(x1 in A, x2 in B, x2 < x1)
    n = 5
    F = lambda v: ew_cdf(v, p)

    def mass(a1, b1, a2, b2):
        # P = int_{a1}^{b1} n f(x) [min(F(x),F(b2))^(n-1) - F(a2)^(n-1) clipped] dx
        def g(x):
            top = min(x, b2)
            if top <= a2:
                return 0.0
            return n * ew_pdf(x, p) * (F(top) ** (n - 1) - F(a2) ** (n - 1))
        return integrate.quad(g, a1, b1, limit=100, points=[b2] if a1 < b2 < b1 else None)[0]

    exp = np.array([[mass(e1[i], e1[i + 1], e2[k], e2[k + 1]) for k in range(20)] for i in range(20)])
    exp *= x1.size
    keep = exp > 5
    scaled = exp[keep] * obs[keep].sum() / exp[keep].sum()
    assert stats.chisquare(obs[keep], scaled, ddof=0).pvalue > 0.01


def test_packed_matches_scalar_likelihood():
    seqs = [Sequence(8, s) for s in [(3.0, 1.0), (2.0,), (5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.1)]]
    packed = PackedSequences(seqs)
    atom = Atom(EWParams(0.7, 1.4, 0.5), 0.4)
    expected = [sequence_log_likelihood(s, atom) for s in seqs]
    np.testing.assert_allclose(packed.loglik_one(atom.as_tuple()), expected, rtol=1e-12)
    sub = packed.subset(np.array([0, 2]))
    assert sub.loglik(*atom.as_tuple()) == pytest.approx(expected[0] + expected[2], rel=1e-12)
    assert sub.loglik(0.7, 1.4, 0.5, 1.0) == -math.inf
