"""Shared test helpers."""

from kslab.admissibility import interval_Ip, smoothing_admissible


def recheck_ladder(n, K, ladder):
    """Oracle: independently re-verify every rung constraint."""
    prev_q = 1.0
    for rung in ladder.rungs:
        p, r, q = rung.p, rung.r, rung.q
        assert p > r
        assert r < n / 2
        lo, hi = interval_Ip(p, K)
        assert lo < r < hi
        assert p - r >= 1.0
        assert smoothing_admissible(prev_q, p - r, n)
        assert 2 * p / (p + 1) < q < min(p, n * (p - r) / (n - 2 * r)) + 1e-15
        prev_q = q
    assert ladder.terminal_p == ladder.rungs[-1].p
    assert ladder.terminal_p > n / 2
    assert ladder.rungs[-1].q > n / 2
