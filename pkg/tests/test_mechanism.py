from fractions import Fraction as F

import pytest

from cdemech.errors import ConfigurationError, InputError
from cdemech.field import SelectionPolicy, SubspaceBasis, contains
from cdemech.instance import Instance, generate
from cdemech.mechanism import (
    PAYMENT_MISMATCH,
    TRANSMITTER_NOT_MAX,
    V_NOT_INNOVATIVE,
    MechanismConfig,
    Transcript,
    replay_verify,
    run,
    run_algo1,
    run_algo2,
    waves_from_completion,
)
from cdemech.rates import min_sum_rate


def test_pair_algo1(pair):
    r, p, t = run_algo1(pair)
    assert r == (1, 1)
    assert p.get(2, 1) == 1 and p.get(1, 2) == 1
    assert len(t.rounds) == 2
    assert [rec.transmitter for rec in t.rounds] == [1, 2]
    assert t.rounds[0].t_set == (1, 2) and t.rounds[0].r_set == (2,)
    assert t.rounds[1].r_set == (1,)


def test_triangle_algo1(triangle):
    r, p, t = run_algo1(triangle)
    assert r == (1, 1, 0)
    assert p.entries == (
        (0, 1, 0),
        (F(1, 2), 0, 0),
        (F(1, 2), 0, 0),
    )
    assert t.rounds[0].r_set == (2, 3)
    assert t.rounds[1].t_set == (2, 3) and t.rounds[1].transmitter == 2
    assert t.waves == ((1, (2, 3)), (2, (1,)))
    assert t.completion_round == (2, 1, 1)


def test_triangle_algo2(triangle):
    r, p, t = run_algo2(triangle)
    assert r == (1, 1, 0)
    assert p.p_plus == (1, 1, 0)
    assert p.p_minus == (F(2, 3),) * 3
    assert [rec.p_set for rec in t.rounds] == [(1, 2, 3), (1, 2, 3)]


def test_pair_algo2(pair):
    _, p, t = run_algo2(pair)
    assert p.p_plus == (1, 1)
    assert t.rounds[0].p_set == (1, 2)
    assert t.rounds[0].debits == ((1, F(1, 2)), (2, F(1, 2)))
    assert t.rounds[1].p_set == (1, 2)
    assert p.p_minus == (1, 1)


def test_all_omniscient(omniscient):
    for variant in (1, 2):
        r, p, t = run(omniscient, MechanismConfig(variant))
        assert r == (0, 0) and p.total == 0 and t.rounds == ()
        assert t.waves == ((0, (1, 2)),)


def test_vectors_respect_round_rules():
    for seed in range(40):
        inst = generate(4, 5, 0.4, seed)
        _, _, t = run_algo1(inst)
        know = [SubspaceBasis.units(h, inst.k, inst.q) for h in inst.holdings]
        for rec in t.rounds:
            own = SubspaceBasis.units(inst.held(rec.transmitter), inst.k, inst.q)
            assert contains(own, rec.v)
            for i in inst.users:
                assert contains(know[i - 1], rec.v) == (i not in rec.r_set)
            for i in rec.r_set:
                know[i - 1] = SubspaceBasis.span(list(know[i - 1].vectors()) + [rec.v], inst.k, inst.q)
        assert all(b.is_full() for b in know)


def test_schedule_identical_across_variants():
    for seed in range(40):
        inst = generate(5, 6, 0.5, seed)
        for tie in (None, seed):
            _, _, t1 = run(inst, MechanismConfig(1, tie_break_seed=tie))
            _, _, t2 = run(inst, MechanismConfig(2, tie_break_seed=tie))
            assert [(a.transmitter, a.v) for a in t1.rounds] == [(b.transmitter, b.v) for b in t2.rounds]


def test_rounds_bounded_and_optimal():
    for seed in range(60):
        inst = generate(2 + seed % 5, 2 + seed % 7, 0.5, seed)
        r, p, t = run_algo1(inst)
        assert len(t.rounds) <= inst.n * inst.k
        assert sum(r) == len(t.rounds) == min_sum_rate(inst, inst.users)
        assert p.total == sum(r)


def test_randomized_selection_is_reproducible_and_optimal():
    for seed in range(30):
        inst = generate(4, 4, 0.5, seed)
        cfg = MechanismConfig(1, selection=SelectionPolicy.randomized(seed))
        a = run(inst, cfg)
        b = run(inst, cfg)
        assert a[2].render() == b[2].render()
        assert sum(a[0]) == min_sum_rate(inst, inst.users)
        assert replay_verify(inst, a[2]).ok


def test_randomized_small_field_warns():
    inst = Instance.from_holdings([[1, 2], [2, 3], [1, 3]], q=3)
    cfg = MechanismConfig(1, selection=SelectionPolicy.randomized(0))
    with pytest.warns(UserWarning):
        run(inst, cfg)


def test_q_override(triangle):
    r, _, t = run(triangle, MechanismConfig(1, q_override=13))
    assert r == (1, 1, 0)
    with pytest.raises(ConfigurationError):
        run(triangle, MechanismConfig(1, q_override=12))
    with pytest.raises(ConfigurationError):
        run(triangle, MechanismConfig(1, q_override=2))


def test_bad_variant():
    with pytest.raises(ConfigurationError):
        MechanismConfig(3)


def test_config_roundtrip():
    for cfg in (
        MechanismConfig(),
        MechanismConfig(2, tie_break_seed=5, selection=SelectionPolicy.randomized(9), q_override=17),
    ):
        assert MechanismConfig.from_dict(cfg.to_dict()) == cfg


def test_transcript_roundtrip_and_bytes(triangle):
    _, _, t = run_algo2(triangle)
    again = Transcript.parse(t.render())
    assert again == t
    assert again.render() == t.render()
    assert run_algo2(triangle)[2].render() == t.render()
    assert '"num": 1' in t.render() and '"den": 3' in t.render()


def test_transcript_parse_errors():
    with pytest.raises(InputError):
        Transcript.parse("{")
    with pytest.raises(InputError):
        Transcript.parse('{"n": 2}')


def test_waves_from_completion():
    assert waves_from_completion((2, 1, 1)) == ((1, (2, 3)), (2, (1,)))
    assert waves_from_completion((0, 3, 3, 1)) == ((0, (1,)), (1, (4,)), (3, (2, 3)))


def test_replay_accepts_real_runs():
    for seed in range(30):
        inst = generate(4, 5, 0.5, seed)
        for variant in (1, 2):
            _, _, t = run(inst, MechanismConfig(variant, tie_break_seed=seed))
            assert replay_verify(inst, t).ok


def _with_round(t, idx, **changes):
    rounds = list(t.rounds)
    rounds[idx] = type(rounds[idx])(**{**rounds[idx].__dict__, **changes})
    return Transcript(**{**t.__dict__, "rounds": tuple(rounds)})


def test_replay_zeroed_vector(triangle):
    _, _, t = run_algo1(triangle)
    bad = _with_round(t, 0, v=(0, 0, 0))
    rep = replay_verify(triangle, bad)
    assert not rep.ok
    assert (1, V_NOT_INNOVATIVE) in [(x.round, x.label) for x in rep.violations]


def test_replay_wrong_transmitter(triangle):
    _, _, t = run_algo1(triangle)
    bad = _with_round(t, 1, transmitter=1)
    rep = replay_verify(triangle, bad)
    assert (2, TRANSMITTER_NOT_MAX) in [(x.round, x.label) for x in rep.violations]


def test_replay_wrong_payment(triangle):
    _, _, t = run_algo1(triangle)
    bad = _with_round(t, 0, debits=((2, F(1, 3)), (3, F(2, 3))))
    rep = replay_verify(triangle, bad)
    assert PAYMENT_MISMATCH in rep.labels
    assert "round 1" in rep.to_text()


def test_replay_digest_mismatch(triangle, pair):
    _, _, t = run_algo1(triangle)
    with pytest.raises(InputError):
        replay_verify(pair, t)
