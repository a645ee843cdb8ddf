import pytest

from autosyn.clock import AutoClock
from autosyn.network import (
    RD_DELAYED_SET,
    RD_LOSSY,
    RD_ON_TIME,
    RD_ON_TIME_SET,
    DiffusionNetwork,
)


def _net(eta=1.0, seed=0, parties=("P1", "P2", "P3"), **kwargs):
    net = DiffusionNetwork("bc", eta, seed=seed, **kwargs)
    for p in parties:
        net.register(p)
    return net


def test_multicast_skips_sender_and_leaks():
    net = _net()
    out = net.honest_multicast("P1", "B", t_next=5)
    assert sorted(r for r, _, _ in out) == ["P2", "P3"]
    assert all(rd == RD_ON_TIME for _, _, rd in out)
    leaks = net.drain_leaks()
    assert len(leaks) == 2 and all(l.honest and l.sender == "P1" for l in leaks)
    assert net.drain_leaks() == []


def test_unregistered_sender_rejected():
    net = _net()
    with pytest.raises(ValueError):
        net.honest_multicast("P9", "B", t_next=5)


def test_on_time_copy_released_at_deadline():
    net = _net()
    net.honest_multicast("P1", "B", t_next=5)
    assert net.release_due(4) == 0
    assert net.fetch("P2", 4) == []
    assert net.release_due(5) == 2
    assert net.fetch("P2", 5) == [("B", 0)]
    # entregue uma única vez
    assert net.fetch("P2", 6) == []


def test_lossy_copy_delayed_two_rounds_plus_one():
    net = _net(eta=0.0)
    net.round_length = 10
    net.honest_multicast("P1", "B", t_next=5)
    assert net.release_due(5) == 0
    assert net.release_untouched(0) == 2
    msg = net.pending("P2")[0]
    assert msg.rd == RD_DELAYED_SET and msg.d == 21
    assert net.fetch("P2", 20) == []
    assert net.fetch("P2", 21) == [("B", 21)]


def test_set_delays_within_deadline_only():
    net = _net(parties=("P1", "P2"))
    [(_, mid, _)] = net.honest_multicast("P1", "B", t_next=5)
    # atraso além de d_max é ignorado
    net.set_delays([(10, mid)])
    assert net.message(mid).rd == RD_ON_TIME
    net.set_delays([(3, mid), (1, 999)])
    msg = net.message(mid)
    assert msg.rd == RD_ON_TIME_SET and msg.d == 3
    assert net.fetch("P2", 2) == []
    assert net.fetch("P2", 3) == [("B", 3)]


def test_set_delays_on_lossy_copy_is_unbounded():
    net = _net(eta=0.0, parties=("P1", "P2"))
    [(_, mid, _)] = net.honest_multicast("P1", "B", t_next=5)
    net.set_delays([(50, mid)])
    msg = net.message(mid)
    assert msg.rd == RD_DELAYED_SET and msg.d == 50 and msg.touched
    # copias tocadas não passam pela regra de liberação
    assert net.release_untouched(0) == 0


def test_mix_and_swap_order():
    draw = lambda sender, recipient, payload: RD_ON_TIME if payload == "a" else RD_LOSSY
    net = _net(parties=("P1", "P2"), draw_override=draw)
    [(_, mid_a, rd_a)] = net.honest_multicast("P1", "a", t_next=0)
    [(_, mid_b, rd_b)] = net.honest_multicast("P1", "b", t_next=0)
    assert (rd_a, rd_b) == (RD_ON_TIME, RD_LOSSY)
    net.mix(mid_a, mid_b)
    assert net.message(mid_a).rd == RD_LOSSY and net.message(mid_b).rd == RD_ON_TIME
    net.mix(mid_a, mid_b)
    net.set_delays([(0, mid_b)])
    net.release_due(0)
    net.swap_order(mid_a, mid_b)
    assert [p for p, _ in net.fetch("P2", 0)] == ["b", "a"]


def test_uses_clock_time_for_send():
    clock = AutoClock(t_start=0, t_run=1)
    clock.next = 7
    for _ in range(7):
        clock.clock_advance()
    net = _net(clock=clock, parties=("P1", "P2"))
    net.honest_multicast("P1", "B", t_next=9)
    assert net.pending("P2")[0].d == 7


def test_delivery_ratio_calibration():
    # 31 partes, 1000 multicasts: 30000 cópias
    parties = [f"P{i}" for i in range(1, 32)]
    net = _net(eta=2 / 3, seed=1, parties=parties)
    for _ in range(1000):
        net.honest_multicast("P1", "B", t_next=0)
        net.drain_leaks()
    sent, on_time = net.stats.totals()
    assert sent == 30_000
    assert abs(on_time / sent - 2 / 3) <= 0.01
    assert net.stats.ratio(0, 1) == pytest.approx(on_time / sent)
    assert net.stats.ratio(5, 6) is None


def test_trace_hook_sees_enqueue_and_fetch():
    events = []
    net = _net(parties=("P1", "P2"), trace=events.append)
    net.honest_multicast("P1", "B", t_next=0)
    net.release_due(0)
    net.fetch("P2", 0)
    assert [e["event"] for e in events] == ["enqueue", "auto_promote", "fetch"]


def test_invalid_eta():
    with pytest.raises(ValueError):
        DiffusionNetwork("bc", 1.5, seed=0)
