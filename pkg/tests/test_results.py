import pytest

from pivnav.planner import EpisodeResult
from pivnav.results import (
    ResultsTable,
    binomial_halfwidth,
    check_baseline_trend,
    check_demo_trend,
    check_distance_trend,
    check_loss_trend,
    parse_table,
    write_episodes,
    write_table,
)


def make_table(cells):
    t = ResultsTable(name="test")
    for cond, sweep, succ, n in cells:
        t.add(cond, sweep, succ, n)
    return t


def test_halfwidth_formula():
    assert binomial_halfwidth(50, 100) == pytest.approx(1.96 * 0.05)
    assert binomial_halfwidth(0, 100) == 0.0
    with pytest.raises(ValueError):
        binomial_halfwidth(0, 0)


def test_rates_stay_in_unit_interval():
    t = make_table([("a", 1, 73, 100)])
    c = t.cell("a", 1)
    assert 0.0 <= c.rate <= 1.0
    with pytest.raises(ValueError):
        t.add("a", 2, 1, 0)


def test_csv_round_trip(tmp_path):
    t = make_table([("ours", 2, 80, 100), ("ours", 5, 55, 100)])
    path = write_table(t, tmp_path / "t.csv")
    again = parse_table(path.read_text())
    assert [c.successes for c in again.cells] == [80, 55]
    assert again.cell("ours", 5).trials == 100


def test_csv_bytes_deterministic(tmp_path):
    t = make_table([("ours", 2, 80, 100)])
    a = write_table(t, tmp_path / "a.csv").read_bytes()
    b = write_table(t, tmp_path / "b.csv").read_bytes()
    assert a == b


def test_episode_log(tmp_path):
    rows = [(0, 2, EpisodeResult(True, 3, 0.0, 1)), (1, 2, EpisodeResult(False, 5, 2.0, 0))]
    path = write_episodes(tmp_path / "ep.csv", rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "task,distance,success,steps,collisions"
    assert lines[1] == "0,2,1,3,1"
    assert lines[2] == "1,2,0,5,0"


class TestTrends:
    def test_distance_strict_decrease(self):
        good = make_table([("ours", 2, 80, 100), ("ours", 5, 55, 100), ("ours", 10, 22, 100)])
        ok, _ = check_distance_trend(good, "ours", ["2", "5", "10"])
        assert ok

    def test_distance_fails_within_noise(self):
        flat = make_table([("ours", 2, 60, 100), ("ours", 5, 55, 100), ("ours", 10, 50, 100)])
        ok, msg = check_distance_trend(flat, "ours", ["2", "5", "10"])
        assert not ok
        assert "FAIL" in msg

    def test_demo_non_decrease(self):
        good = make_table([("ours", 100, 20, 100), ("ours", 300, 23, 100), ("ours", 500, 25, 100)])
        ok, _ = check_demo_trend(good, "ours", ["100", "300", "500"])
        assert ok

    def test_demo_allows_dip_within_ci(self):
        noisy = make_table([("ours", 100, 25, 100), ("ours", 300, 22, 100), ("ours", 500, 26, 100)])
        ok, _ = check_demo_trend(noisy, "ours", ["100", "300", "500"])
        assert ok

    def test_demo_fails_on_big_drop(self):
        bad = make_table([("ours", 100, 50, 100), ("ours", 300, 20, 100), ("ours", 500, 22, 100)])
        ok, _ = check_demo_trend(bad, "ours", ["100", "300", "500"])
        assert not ok

    def test_loss_gap(self):
        good = make_table([("cycle", 4, 55, 100), ("triplet", 4, 9, 100)])
        ok, _ = check_loss_trend(good, 4)
        assert ok
        bad = make_table([("cycle", 4, 30, 100), ("triplet", 4, 25, 100)])
        ok, _ = check_loss_trend(bad, 4)
        assert not ok

    def test_baseline_rules(self):
        good = make_table([("ours", 4, 54, 100), ("upn", 4, 58, 100), ("upn-persp", 4, 8, 100)])
        ok, _ = check_baseline_trend(good, 4)
        assert ok
        # ours more than 10 points under upn
        bad1 = make_table([("ours", 4, 40, 100), ("upn", 4, 58, 100), ("upn-persp", 4, 8, 100)])
        assert not check_baseline_trend(bad1, 4)[0]
        # lead over upn-persp under 20 points
        bad2 = make_table([("ours", 4, 54, 100), ("upn", 4, 58, 100), ("upn-persp", 4, 40, 100)])
        assert not check_baseline_trend(bad2, 4)[0]
