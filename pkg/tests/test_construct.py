import json
import random
from fractions import Fraction

import pytest

from cesaro import (
    BudgetExceededError,
    ConvexWitness,
    CoverageError,
    CoveringChain,
    Partition,
    apply_iterate,
    build_covering_chain,
    choose_partition,
    dense_example,
    single_target_extend,
    assign_block_terms,
    phi,
    unit_interval_check,
    replay_trace,
    take_prefix,
    run_target_plan,
    simultaneous_construct,
)
from cesaro.construct import partition_min_m
from cesaro.exact import ceil_frac, frac
from cesaro.sequences import RunSeq, iterate_at
from cesaro.space import (
    FinitePointSet,
    GroundSet,
    IndexSet,
    Space,
    cube_corners,
    delta,
    point,
)

F = Fraction


# --- dense example -----------------------------------------------------------

def test_dense_example_unit_blocks():
    gen = dense_example([point(0), point(1), point(-1)], lambda n: 1)
    assert list(gen) == [(0,), (1,), (-1,)]


def test_dense_example_linear_growth():
    gen = dense_example([point("1/2"), point(2), point(-3)], lambda n: n)
    assert list(gen) == [(F(1, 2),), (2,), (2,), (-3,), (-3,), (-3,)]


def test_dense_example_validation():
    with pytest.raises(ValueError):
        list(dense_example([point(1), point(1)], lambda n: 1))
    with pytest.raises(ValueError):
        list(dense_example([point(5)], lambda n: 1))  # |q_1| > 1
    gen = dense_example([point(0), point(1), point(-1)], lambda n: 3 - n)
    with pytest.raises(ValueError):
        list(gen)


def test_take_prefix_block_structure():
    seq = take_prefix(dense_example([point(0), point(1), point(2)], lambda n: 4**n), 30)
    assert len(seq) == 30
    assert seq.point_at(1) == (0,)
    assert all(seq.point_at(i) == (1,) for i in range(2, 18))
    assert all(seq.point_at(i) == (2,) for i in range(18, 31))


# --- single-target extension ---------------------------------------------------

def test_extend_single_atom(line, lattice1):
    w = ConvexWitness(((F(1), (F(2),)),))
    for k in (1, 2, 3):
        res = single_target_extend([], w, F(1, 7), k, line, lattice1)
        assert res.n0 == 1
        assert frac(res.trace["metric_to_x"]) == 0


def test_extend_half_target(line, lattice1):
    w = ConvexWitness(((F(1, 2), (F(0),)), (F(1, 2), (F(1),))))
    for k in (1, 2, 3):
        for eps in (F(1, 4), F(1, 10)):
            res = single_target_extend([], w, eps, k, line, lattice1)
            value = iterate_at(k, res.seq, res.n0)
            assert line.metric(value, (F(1, 2),)) < eps
            # the certified index only depends on the first n0 terms
            longer = res.seq.copy()
            longer.append((F(7),), 5)
            assert iterate_at(k, longer, res.n0) == value
            m = res.trace["m"]
            for (coeff, _), count in zip(w.atoms, res.trace["counts"]):
                assert abs(coeff - F(count, m)) <= F(1, m)
            assert sum(res.trace["counts"]) == m


def test_extend_constant_prefix_needs_one_term(line, lattice1):
    # prefix already constant at the atom: one appended term certifies at rho+1
    w = ConvexWitness(((F(1), (F(3),)),))
    prefix = [(F(3),)] * 4
    for k in (1, 2):
        res = single_target_extend(prefix, w, F(1, 8), k, line, lattice1)
        assert res.n0 == 5
        assert len(res.new_terms) == 1
        assert frac(res.trace["metric_to_x"]) == 0


def test_extend_respects_prefix(line, lattice1):
    w = ConvexWitness(((F(1, 3), (F(-1),)), (F(2, 3), (F(2),))))
    prefix = [(F(4),), (F(-3),), (F(0),)]
    res = single_target_extend(prefix, w, F(1, 5), 2, line, lattice1)
    assert res.n0 > 3
    assert list(res.seq.iter_points())[:3] == prefix
    assert line.metric(iterate_at(2, res.seq, res.n0), w.value()) < F(1, 5)


def test_extend_term_cap(line, lattice1):
    w = ConvexWitness(((F(1, 2), (F(0),)), (F(1, 2), (F(1),))))
    with pytest.raises(BudgetExceededError):
        single_target_extend([], w, F(1, 10), 3, line, lattice1, term_cap=50)


# --- chains and partitions ---------------------------------------------------

def test_build_covering_chain_intervals(line, lattice1):
    M0 = FinitePointSet((point(-1), point(1)), corner_radius=F(1))
    chain = build_covering_chain(M0, F(1, 4), 1, line, lattice1)
    assert chain.intervals == ((F(1, 48), F(1, 24)),)
    assert chain.sets[0].issubset(chain.sets[1])
    # radius (1/eps * 12)^1 * 1! * 2 = 96
    assert chain.sets[1].corner_radius == 96


def test_build_covering_chain_nesting_k3(line, lattice1):
    M0 = FinitePointSet((point(-1), point(1)), corner_radius=F(1))
    chain = build_covering_chain(M0, F(1, 3), 3, line, lattice1)
    for lo, hi in zip(chain.sets, chain.sets[1:]):
        assert lo.issubset(hi)
    gaps = [d - c for c, d in chain.intervals]
    assert gaps == sorted(gaps, reverse=True)
    assert sum(d for _, d in chain.intervals) < F(1, 3)


def test_build_covering_chain_explicit_ground_fails(line):
    M0 = FinitePointSet((point(-1), point(1)))
    ground = GroundSet.explicit([point(-1), point(1)])
    with pytest.raises(CoverageError) as exc:
        build_covering_chain(M0, F(1, 4), 1, line, ground)
    assert exc.value.required_radius == 96


def test_build_covering_chain_explicit_ground_big_enough(line):
    M0 = FinitePointSet((point(-1), point(1)))
    ground = GroundSet.explicit([point(-1), point(1), point(-100), point(100)])
    chain = build_covering_chain(M0, F(1, 4), 1, line, ground)
    assert point(100) in chain.sets[1]
    assert chain.intervals == ((F(1, 48), F(1, 24)),)


def test_choose_partition_example(line):
    sets = (FinitePointSet((point(-1), point(1))),) * 2
    chain = CoveringChain(sets=sets, intervals=((F(1, 48), F(1, 24)),), epsilon=F(1, 4), k=1)
    part = choose_partition(192, chain, 1, line)
    assert part.lambdas == (4,)
    assert part.v == 188
    assert part.v > F(part.m, 2)


def test_choose_partition_rejects_small_m(line):
    sets = (FinitePointSet((point(-1), point(1))),) * 2
    chain = CoveringChain(sets=sets, intervals=((F(1, 48), F(1, 24)),), epsilon=F(1, 4), k=1)
    m0, _ = partition_min_m(chain, 1, line)
    with pytest.raises(ValueError):
        choose_partition(m0 - 1, chain, 1, line)


def test_choose_partition_deterministic_and_in_interval(line, lattice1):
    M0 = FinitePointSet((point(-1), point(1)), corner_radius=F(1))
    chain = build_covering_chain(M0, F(1, 3), 2, line, lattice1)
    _, m_needed = partition_min_m(chain, 1, line)
    part1 = choose_partition(m_needed, chain, 1, line)
    part2 = choose_partition(m_needed, chain, 1, line)
    assert part1 == part2
    for i in range(1, 3):
        start, end = part1.block_bounds(i)
        gamma = F(part1.lambdas[i - 1], end)
        c_i, d_i = chain.intervals[i - 1]
        assert c_i <= gamma <= d_i


# --- round-robin assignment, hand-built two-level chain ----------------------

def test_assign_two_levels(line, lattice1, cache):
    eps = F(3, 10)
    v, lam1, lam2 = 2100, 420, 280
    part = Partition(v=v, lambdas=(lam1, lam2))
    x1, x2 = (F(1, 4),), (F(1, 8),)   # level-1 and level-2 targets

    M0 = FinitePointSet((point(-1), point(1)), corner_radius=F(1))
    phi1 = phi(v, [lam1, lam2], 1, cache)
    r1 = ceil_frac((abs(x2[0]) + delta(eps / 6)) / phi1) + 1
    M1 = cube_corners(lattice1, r1, line).union(M0)
    phi2 = phi(v, [lam1, lam2], 2, cache)
    assert phi2 == F(lam2, part.m)
    worst_s2 = F(lam1 * r1, part.m)
    r2 = ceil_frac((abs(x1[0]) + worst_s2 + delta(eps / 6)) / phi2) + 1
    M2 = cube_corners(lattice1, r2, line).union(M1)
    chain = CoveringChain(
        sets=(M0, M1, M2),
        intervals=((F(1, 100), F(2, 100)), (F(1, 250), F(2, 250))),
        epsilon=eps, k=2,
    )

    seq = RunSeq([((F(0),), v)])
    stages, seq = assign_block_terms(seq, chain, part, [x1, x2], eps, line, cache)

    assert len(seq) == part.m
    assert [s.level for s in stages] == [2, 1]
    two_over_v = F(2, v)
    for s in stages:
        assert all(abs(r) < two_over_v for r in s.final_residuals)
        assert sum(s.g) == 1
        # endpoint recheck through the independent evaluator
        endpoint = iterate_at(s.level, seq, s.end)
        assert endpoint == s.endpoint_value
        assert line.seminorm(1, (endpoint[0] - s.x_target[0],)) < eps / 3
    # in-block ceilings recorded against the previous covering set
    assert stages[0].block_seminorm_max[1] <= 5 * M0.norm(1, line) + 1
    assert stages[1].block_seminorm_max[1] <= 5 * M1.norm(1, line) + 1
    # the two blocks drew their terms from their own covering sets
    terms = list(seq.iter_points())
    assert all(t in M1 for t in terms[v:v + lam1])
    assert all(t in M2 for t in terms[v + lam1:])


def test_assign_rejects_bad_prefix(line, lattice1, cache):
    M0 = FinitePointSet((point(-1), point(1)), corner_radius=F(1))
    chain = CoveringChain(sets=(M0, M0), intervals=((F(1, 48), F(1, 24)),),
                   epsilon=F(1, 4), k=1)
    part = Partition(v=40, lambdas=(4,))
    seq = RunSeq([((F(50),), 40)])  # iterates sit far outside conv(M^0)
    with pytest.raises(ValueError):
        assign_block_terms(seq, chain, part, [(F(0),)], F(1, 4), line, cache)


# --- simultaneous pipeline ----------------------------------------------------

def test_simultaneous_k1(line, lattice1, cache):
    res = simultaneous_construct([], [(F(7, 2),)], F(1, 4), IndexSet("all"),
                              line, lattice1, cache)
    trace = res.trace
    assert trace["final_index"] == res.n
    value = iterate_at(1, res.seq, res.n)
    assert line.metric(value, (F(7, 2),)) < F(1, 4)
    replay = replay_trace(trace, line, cache)
    assert replay["matches"]
    # byte-level determinism of the full trace
    res2 = simultaneous_construct([], [(F(7, 2),)], F(1, 4), IndexSet("all"),
                               line, lattice1, cache)
    assert json.dumps(trace, sort_keys=True) == json.dumps(res2.trace, sort_keys=True)


def test_simultaneous_respects_index_set(line, lattice1, cache):
    sevens = IndexSet("progression", 7, 7)
    res = simultaneous_construct([], [(F(1, 2),)], F(1, 4), sevens, line, lattice1, cache)
    assert res.n % 7 == 0
    assert line.metric(iterate_at(1, res.seq, res.n), (F(1, 2),)) < F(1, 4)


def test_simultaneous_with_prefix(line, lattice1, cache):
    prefix = [(F(3),), (F(-2),)]
    res = simultaneous_construct(prefix, [(F(1, 2),)], F(1, 4), IndexSet("all"),
                              line, lattice1, cache)
    assert list(res.seq.iter_points())[:2] == prefix
    assert res.trace["v1"] > 2
    assert line.metric(iterate_at(1, res.seq, res.n), (F(1, 2),)) < F(1, 4)


def test_simultaneous_dimension_two(cache):
    sp = Space(2)
    ground = GroundSet.lattice(2)
    target = (F(1, 2), F(-1, 2))
    res = simultaneous_construct([], [target], F(1, 4), IndexSet("all"), sp, ground, cache)
    assert sp.metric(iterate_at(1, res.seq, res.n), target) < F(1, 4)


def test_simultaneous_k2_fails_loudly(line, lattice1, cache):
    with pytest.raises(BudgetExceededError) as exc:
        simultaneous_construct([], [(F(0),), (F(5),)], F(3, 10),
                            IndexSet("progression", 7, 7), line, lattice1, cache)
    err = exc.value
    assert err.kind == "term_cap"
    assert err.details["m0"] > 10**6
    assert err.details["m_required"] >= err.details["m0"]
    # relaxation never happens silently: the message carries the numbers
    assert str(err.details["m0"]) in str(err)


def test_simultaneous_rejects_bad_epsilon(line, lattice1):
    with pytest.raises(ValueError):
        simultaneous_construct([], [(F(0),)], F(1, 2), IndexSet("all"), line, lattice1)


# --- target-plan driver ------------------------------------------------------

def test_driver_single_entry_matches_direct_run(line, lattice1, cache):
    res = run_target_plan([[(F(1),)]], IndexSet("all"), line, lattice1, cache)
    assert len(res.schedule) == 1
    assert line.metric(iterate_at(1, res.seq, res.schedule[0]), (F(1),)) < 1
    # a one-entry plan is exactly one pipeline run at the clamped epsilon
    direct = simultaneous_construct([], [(F(1),)], F(49, 100), IndexSet("all"),
                                    line, lattice1, cache)
    assert res.schedule[0] == direct.n
    assert res.traces[0] == direct.trace


def test_driver_two_entries_single_level(line, lattice1, cache):
    sevens = IndexSet("progression", 7, 7)
    plan = [[(F(0),)], [(F(1, 2),)]]
    res = run_target_plan(plan, sevens, line, lattice1, cache, term_cap=2 * 10**7)
    assert res.schedule[0] < res.schedule[1]
    assert all(n % 7 == 0 for n in res.schedule)
    assert line.metric(iterate_at(1, res.seq, res.schedule[0]), (F(0),)) < 1
    assert line.metric(iterate_at(1, res.seq, res.schedule[1]), (F(1, 2),)) < F(1, 2)


# --- boundedness obstruction -------------------------------------------------

def test_unit_interval_zeros(cache):
    report = unit_interval_check([F(0)] * 12, 12, cache)
    assert report["triggered"]
    assert frac(report["t2"]) == 0


def test_unit_interval_ones_vacuous(cache):
    report = unit_interval_check([F(1)] * 12, 12, cache)
    assert not report["triggered"]


def test_unit_interval_random_conditioned(cache):
    rng = random.Random(10)
    triggered = 0
    for _ in range(150):
        n = rng.randint(1, 60)
        values = [F(rng.randint(0, 64), 64) for _ in range(n)]
        report = unit_interval_check(values, n, cache)
        if report["triggered"]:
            triggered += 1
            assert frac(report["t2"]) < F(15, 16)
            assert report["small_count"] >= (n + 1) // 2
            assert frac(report["tail_mass"]) >= F(1, 8)
    assert triggered > 0


def test_unit_interval_values_stay_inside(cache):
    rng = random.Random(14)
    for _ in range(40):
        n = rng.randint(1, 40)
        prefix = [(F(rng.randint(0, 32), 32),) for _ in range(n)]
        for k in (1, 2, 3):
            value = apply_iterate(k, prefix, n, cache)[0]
            assert 0 <= value <= 1
