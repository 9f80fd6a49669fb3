"""Constructive approximation along iterated averages.

The pieces, bottom to top:

* ``dense_example``          -- the explicit block sequence whose averages
                                sweep an enumeration of targets.
* ``single_target_extend``   -- extend a prefix so one iterate level hits one
                                hull target within epsilon.
* ``build_covering_chain``   -- nested covering sets M^0 <= ... <= M^k plus
                                the coefficient intervals [c_i, d_i].
* ``choose_partition``       -- split an admissible length m into a stabilizer
                                prefix v and block lengths lambda_1..lambda_k.
* ``assign_block_terms``     -- round-robin term assignment making each
                                iterate level hit its own target at its block
                                end.
* ``simultaneous_construct`` -- full pipeline: one admissible index n at which
                                all k iterate levels are within epsilon of
                                their targets, every step certified exactly.
* ``run_target_plan``        -- repeats the pipeline over a finite target plan.
* ``unit_interval_check``    -- the boundedness obstruction for [0,1]-valued
                                sequences.

Every inequality the pipeline relies on is re-checked in exact arithmetic at
run time; a failed check raises instead of producing an uncertified result.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .errors import (
    BudgetExceededError,
    CertificationError,
    CoverageError,
    SchedulingError,
)
from .exact import ZERO, ceil_frac, decstr, floor_frac, frac, fracstr
from .kernel import KernelCache, apply_iterate, default_cache
from .sequences import IterateWalker, RunSeq, iterate_at
from .space import (
    FinitePointSet,
    GroundSet,
    IndexSet,
    Point,
    Space,
    cube_corners,
    delta,
    hull_contains,
    padd,
    pscale,
    psub,
    pzero,
)

DEFAULT_TERM_CAP = 10**6


def _point_json(p):
    return [fracstr(c) for c in p]


def _point_from_json(raw):
    return tuple(frac(c) for c in raw)


# ---------------------------------------------------------------------------
# dense example (explicit block sequence)
# ---------------------------------------------------------------------------

def dense_example(enumeration, growth):
    """Yield q_1 once, then q_j repeated growth(j) times for j = 2, 3, ...

    ``enumeration`` is an injective list of points with max|coord| of q_j at
    most j; ``growth`` maps block index to a positive nondecreasing length.
    """
    points = [tuple(frac(c) for c in p) for p in enumeration]
    if len(set(points)) != len(points):
        raise ValueError("enumeration must be injective")
    for j, p in enumerate(points, start=1):
        if max(abs(c) for c in p) > j:
            raise ValueError(f"enumeration entry {j} exceeds the |q_j| <= j growth bound")
    prev_len = 1
    for j, p in enumerate(points, start=1):
        if j == 1:
            yield p
            continue
        length = growth(j)
        if length < 1 or length < prev_len:
            raise ValueError("growth must be nondecreasing and >= 1")
        prev_len = length
        for _ in range(length):
            yield p


def take_prefix(gen, count: int) -> RunSeq:
    """Materialize the first `count` generator terms as a run sequence."""
    seq = RunSeq()
    for p in gen:
        seq.append(p)
        if len(seq) >= count:
            break
    return seq


# ---------------------------------------------------------------------------
# convex witnesses (targets inside conv A)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvexWitness:
    """A target expressed as a positive convex combination of ground points."""

    atoms: tuple  # ((coefficient, point), ...)

    def __post_init__(self):
        atoms = tuple((frac(c), tuple(frac(x) for x in p)) for c, p in self.atoms)
        if not atoms:
            raise ValueError("a convex witness needs at least one atom")
        if any(not (0 < c <= 1) for c, _ in atoms):
            raise ValueError("coefficients must lie in (0, 1]")
        if sum(c for c, _ in atoms) != 1:
            raise ValueError("coefficients must sum exactly to 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def size(self) -> int:
        return len(self.atoms)

    def value(self) -> Point:
        d = len(self.atoms[0][1])
        acc = pzero(d)
        for c, p in self.atoms:
            acc = padd(acc, pscale(c, p))
        return acc

    def check_ground(self, ground: GroundSet) -> None:
        for _, p in self.atoms:
            if not ground.contains(p):
                raise ValueError(f"witness atom {p} is not in the ground set")


# ---------------------------------------------------------------------------
# single-target extension by a repeating tuple
# ---------------------------------------------------------------------------

@dataclass
class ExtendResult:
    seq: RunSeq            # full sequence theta_1..theta_n0
    new_terms: list        # the appended terms
    n0: int
    trace: dict


def single_target_extend(prefix, target: ConvexWitness, epsilon, k: int,
                         space: Space, ground: GroundSet | None = None,
                         term_cap: int = DEFAULT_TERM_CAP) -> ExtendResult:
    """Append a repeating block pattern until [T^k]_{n0} is within epsilon of the target.

    Picks the tuple length m so each atom's seminorms shrink below
    eps/(3v), rounds the coefficients to multiplicities m_i (floor, then
    top-up by largest fractional part), and repeats the m-tuple until the
    first index whose iterate is metric-within eps/3 of the rounded target
    x'; the triangle inequality then certifies the distance to x itself.
    """
    epsilon = frac(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if k < 1:
        raise ValueError("k must be >= 1")
    if ground is not None:
        target.check_ground(ground)
    seq = prefix.copy() if isinstance(prefix, RunSeq) else RunSeq([(p, 1) for p in prefix])
    v = target.size
    rhos = space.important_rhos(epsilon / 3)

    # tuple length: every atom seminorm over m drops below eps/(3v)
    m = 1
    for _, p in target.atoms:
        for rho in rhos:
            bound = 3 * v * space.seminorm(rho, p) / epsilon
            m = max(m, floor_frac(bound) + 1)

    # multiplicities: floor then top-up by largest fractional part (ties by index)
    floors = [floor_frac(c * m) for c, _ in target.atoms]
    deficit = m - sum(floors)
    fractional = sorted(
        range(v), key=lambda i: (-(target.atoms[i][0] * m - floors[i]), i)
    )
    counts = list(floors)
    for i in fractional[:deficit]:
        counts[i] += 1
    assert sum(counts) == m
    for (coeff, _), c in zip(target.atoms, counts):
        assert abs(coeff - Fraction(c, m)) <= Fraction(1, m)

    x = target.value()
    x_prime = pzero(space.dimension)
    for (_, p), c in zip(target.atoms, counts):
        x_prime = padd(x_prime, pscale(Fraction(c, m), p))
    for rho in rhos:
        assert space.seminorm(rho, psub(x, x_prime)) < epsilon / 3
    assert space.metric(x, x_prime) < 2 * epsilon / 3

    pattern = []
    for (_, p), c in zip(target.atoms, counts):
        pattern.extend([p] * c)

    walker = IterateWalker(k, space.dimension)
    walker.push_seq(seq)
    new_terms = []
    n0 = None  # always past the given prefix: at least one term is appended
    threshold = epsilon / 3
    idx = 0
    while n0 is None:
        if len(new_terms) >= term_cap:
            raise BudgetExceededError(
                "term_cap", "iterate did not enter the eps/3 ball before the cap",
                appended=len(new_terms), term_cap=term_cap,
                current_metric=fracstr(space.metric(walker.value(k), x_prime)),
            )
        p = pattern[idx % m]
        idx += 1
        walker.push(p)
        seq.append(p)
        new_terms.append(p)
        if space.metric(walker.value(k), x_prime) < threshold:
            n0 = walker.j

    endpoint = iterate_at(k, seq, n0)
    dist_xprime = space.metric(endpoint, x_prime)
    dist_x = space.metric(endpoint, x)
    if not dist_x < epsilon:
        raise CertificationError("extension endpoint missed the target outside epsilon")
    trace = {
        "schema": 1,
        "kind": "lemma33",
        "epsilon": fracstr(epsilon),
        "k": k,
        "m": m,
        "counts": counts,
        "atoms": [[fracstr(c), _point_json(p)] for c, p in target.atoms],
        "x": _point_json(x),
        "x_prime": _point_json(x_prime),
        "n0": n0,
        "metric_to_x_prime": fracstr(dist_xprime),
        "metric_to_x": fracstr(dist_x),
        "terms_runs": [[_point_json(p), c] for p, c in seq.runs],
        "final_index": n0,
        "targets": [_point_json(x)],
        "ks": [k],
        "distances": [{
            "level": k,
            "target": _point_json(x),
            "value": _point_json(endpoint),
            "metric": fracstr(dist_x),
            "metric_dec": decstr(dist_x),
            "seminorms": [
                fracstr(space.seminorm(rho, psub(endpoint, x)))
                for rho in range(1, space.dimension + 1)
            ],
        }],
    }
    return ExtendResult(seq=seq, new_terms=new_terms, n0=n0, trace=trace)


# ---------------------------------------------------------------------------
# covering chains and partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoveringChain:
    """Nested covering sets with their coefficient intervals."""

    sets: tuple            # M^0 .. M^k (FinitePointSet)
    intervals: tuple       # ((c_1, d_1), ..., (c_k, d_k))
    epsilon: Fraction
    k: int

    def __post_init__(self):
        for lo, hi in zip(self.sets, self.sets[1:]):
            if not lo.issubset(hi):
                raise ValueError("chain sets must be nested")
        gaps = [d - c for c, d in self.intervals]
        for g1, g2 in zip(gaps, gaps[1:]):
            if g1 < g2:
                raise ValueError("interval gaps must be nonincreasing")
        if sum(d for _, d in self.intervals) >= self.epsilon:
            raise ValueError("interval upper bounds must sum below epsilon")
        for c, d in self.intervals:
            if not (0 < c < d < 1):
                raise ValueError("intervals must sit strictly inside (0, 1)")


def build_covering_chain(M0: FinitePointSet, epsilon, k: int, space: Space,
                         ground: GroundSet) -> CoveringChain:
    """Grow M^i = cube_corners(radius_i) | M^(i-1) and certify the covering.

    radius_i = [k/eps * (10 |M^(i-1)|_max + 2)]^(k+1-i) * (k+1-i)! * 2 |M^(i-1)|_inf,
    which makes conv(M^i) (+) B(0, delta(eps/6)/4) contain the worst-case
    rescaling of conv(2 M^(i-1) u -2 M^(i-1)); membership is certified per
    extreme point with exact hull witnesses.
    """
    epsilon = frac(epsilon)
    if not (0 < epsilon < Fraction(1, 2)):
        raise ValueError("epsilon must lie in (0, 1/2)")
    if k < 1:
        raise ValueError("k must be >= 1")
    for p in M0.points:
        if not ground.contains(p):
            raise ValueError(f"chain seed point {p} is outside the ground set")
    for rho in space.important_rhos(epsilon / 3):
        if M0.norm(rho, space) < 1:
            raise ValueError("seed set norms must be >= 1 for the important seminorms")
    slack = delta(epsilon / 6) / 4
    sets = [M0]
    intervals = []
    for i in range(1, k + 1):
        prev = sets[-1]
        norm_max = prev.norm_max(epsilon / 3, space)
        c_i = (epsilon / k) / (10 * norm_max + 2)
        d_i = (epsilon / k) / (5 * norm_max + 1)
        power = k + 1 - i
        scale_factor = ((Fraction(k) / epsilon) * (10 * norm_max + 2)) ** power * factorial(power)
        radius = scale_factor * 2 * prev.norm_inf()
        if ground.kind == "lattice":
            current = cube_corners(ground, radius, space).union(prev)
        else:
            # an explicit ground set must already hold covering points
            current = FinitePointSet(ground.points).union(prev)
        for p in prev.points:
            for sign in (2, -2):
                extreme = pscale(scale_factor * sign, p)
                if hull_contains(current, extreme, slack, space) is None:
                    if ground.kind == "explicit":
                        raise CoverageError(
                            f"explicit ground set cannot cover stage {i}",
                            required_radius=radius,
                        )
                    raise CertificationError(
                        f"chain covering failed at stage {i} for extreme point {extreme}"
                    )
        sets.append(current)
        intervals.append((c_i, d_i))
    return CoveringChain(sets=tuple(sets), intervals=tuple(intervals), epsilon=epsilon, k=k)


@dataclass(frozen=True)
class Partition:
    """m = v + lambda_1 + ... + lambda_k with v > m/2."""

    v: int
    lambdas: tuple

    @property
    def m(self) -> int:
        return self.v + sum(self.lambdas)

    def block_bounds(self, i: int) -> tuple[int, int]:
        """(start, end) of block i: terms start+1 .. end."""
        start = self.v + sum(self.lambdas[: i - 1])
        return start, start + self.lambdas[i - 1]


def partition_min_m(chain: CoveringChain, v1: int, space: Space) -> tuple[int, int]:
    """(m0, m_needed): the documented minimum and the exactly sufficient one.

    m0 is the classical threshold: m0 > 2/(d_k - c_k), m0 > 2 v1 and
    m0 > (4/3) * 6 #M^k * |M^k|_rho.  That last bound is too weak to force
    the stabilizer-size condition 2|M^k|_rho / v < eps/(6 #M^k) once
    eps < 3/2, so the second value additionally requires
    m >= 24 #M^k |M^k|_rho / eps; constructions use max of both and report
    both on failure rather than shrinking any constant.
    """
    c_k, d_k = chain.intervals[-1]
    top = chain.sets[-1]
    count = len(top)
    norm = max(top.norm(rho, space) for rho in space.important_rhos(chain.epsilon / 3))
    m0 = max(
        floor_frac(Fraction(2) / (d_k - c_k)) + 1,
        2 * v1 + 1,
        floor_frac(Fraction(4, 3) * 6 * count * norm) + 1,
    )
    m_needed = max(m0, ceil_frac(24 * count * norm / chain.epsilon))
    return m0, m_needed


def choose_partition(m: int, chain: CoveringChain, v1: int, space: Space) -> Partition:
    """Backward greedy split of m with each gamma_i inside its interval."""
    m0, _ = partition_min_m(chain, v1, space)
    if m < m0:
        raise ValueError(f"m={m} is below the partition threshold m0={m0}")
    lambdas = [0] * chain.k
    remainder = m
    for i in range(chain.k, 0, -1):
        c_i, d_i = chain.intervals[i - 1]
        lam = ceil_frac(c_i * remainder)
        if lam < 1 or Fraction(lam, remainder) > d_i:
            raise CertificationError(
                f"no block length fits [c_{i}, d_{i}] at remainder {remainder}"
            )
        lambdas[i - 1] = lam
        remainder -= lam
    v = remainder
    part = Partition(v=v, lambdas=tuple(lambdas))
    assert part.m == m
    if not v > Fraction(m, 2):
        raise CertificationError("partition lost the v > m/2 guarantee")
    for i in range(1, chain.k + 1):
        _, end = part.block_bounds(i)
        gamma = Fraction(part.lambdas[i - 1], end)
        c_i, d_i = chain.intervals[i - 1]
        if not (c_i <= gamma <= d_i):
            raise CertificationError(f"gamma_{i} = {gamma} escaped [{c_i}, {d_i}]")
    return part


# ---------------------------------------------------------------------------
# round-robin assignment (the multi-level targeting step)
# ---------------------------------------------------------------------------

@dataclass
class StageRecord:
    stage: int
    level: int
    start: int
    end: int
    phi: Fraction
    s_value: Point
    x_target: Point
    x_prime: Point
    atom_points: tuple
    g: tuple
    rounds: int
    assignment_runs: list          # [(atom index, count), ...]
    round_gammas: list             # coefficient snapshot at each round end
    final_residuals: tuple
    endpoint_value: Point
    block_seminorm_max: dict       # rho -> max over in-block indices

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "level": self.level,
            "start": self.start,
            "end": self.end,
            "phi": fracstr(self.phi),
            "s_value": _point_json(self.s_value),
            "x_target": _point_json(self.x_target),
            "x_prime": _point_json(self.x_prime),
            "atom_points": [_point_json(p) for p in self.atom_points],
            "g": [fracstr(g) for g in self.g],
            "rounds": self.rounds,
            "assignment_runs": [list(r) for r in self.assignment_runs],
            "round_gammas": [[fracstr(g) for g in snap] for snap in self.round_gammas],
            "final_residuals": [fracstr(r) for r in self.final_residuals],
            "endpoint_value": _point_json(self.endpoint_value),
            "block_seminorm_max": {str(r): fracstr(v) for r, v in self.block_seminorm_max.items()},
        }


def _zero_padded_value(level: int, seq: RunSeq, upto: int, end: int, d: int) -> Point:
    """[T^level]_end of the sequence whose terms past `upto` are zero."""
    walker = IterateWalker(level, d)
    remaining = upto
    for p, c in seq.runs:
        step = min(c, remaining)
        walker.push_run(p, step)
        remaining -= step
        if remaining == 0:
            break
    walker.push_run(pzero(d), end - upto)
    return walker.value(level)


def _block_values(level: int, seq: RunSeq, start: int, end: int, d: int):
    """Yield (index, [T^level]_index) for index = start+1 .. end."""
    walker = IterateWalker(level, d)
    pushed = 0
    for p, c in seq.runs:
        if pushed + c <= start:
            walker.push_run(p, c)
            pushed += c
            continue
        head = max(0, start - pushed)
        if head:
            walker.push_run(p, head)
            pushed += head
        for _ in range(c - head):
            if pushed == end:
                return
            walker.push(p)
            pushed += 1
            yield pushed, walker.value(level)
        if pushed == end:
            return


def assign_block_terms(seq: RunSeq, chain: CoveringChain, part: Partition,
                       targets, epsilon, space: Space,
                       cache: KernelCache | None = None):
    """Assign the block terms so level k+1-i lands on target x_(k+1-i) at block i's end.

    Returns (stage records, extended sequence).  The sequence must already
    hold exactly part.v terms.  Every hypothesis and both postconditions --
    (a) endpoint seminorm distance below eps/3, and (b) in-block seminorm
    bound 5 |M^(i-1)|_rho + 1 -- are certified exactly; any miss raises.
    """
    epsilon = frac(epsilon)
    cache = cache or default_cache()
    k = chain.k
    d = space.dimension
    if len(seq) != part.v:
        raise ValueError(f"sequence holds {len(seq)} terms, partition wants v={part.v}")
    if len(targets) != k:
        raise ValueError("need one target per level")
    if not part.v > Fraction(part.m, 2):
        raise ValueError("partition must keep v > m/2 (kernel weight bound needs it)")
    dl = delta(epsilon / 6)
    rhos = list(space.important_rhos(epsilon / 3))
    M0 = chain.sets[0]

    for x in (pzero(d), *targets):
        if hull_contains(M0, x, dl / 4, space) is None:
            raise ValueError(f"{x} is not within delta/4 of conv(M^0); hypotheses violated")
    walker = IterateWalker(k, d)
    walker.push_seq(seq)
    for level in range(1, k + 1):
        if hull_contains(M0, walker.value(level), dl / (4 * k), space) is None:
            raise ValueError(
                f"[T^{level}]_v is not within delta/(4k) of conv(M^0); prefix unsuitable"
            )

    stages = []
    two_over_v = Fraction(2, part.v)
    for i in range(1, k + 1):
        level = k + 1 - i
        start, end = part.block_bounds(i)
        lam = part.lambdas[i - 1]
        x_target = targets[level - 1]
        M_i = chain.sets[i]
        M_prev = chain.sets[i - 1]

        if end <= cache.n_max and level <= cache.k_max:
            weights = list(cache.row(level, end)[start:end])
        else:
            weights = cache.row_tail(level, end, start + 1, width_cap=max(lam, 4096))
        phi_i = sum(weights, ZERO)
        gamma_i = Fraction(lam, end)
        assert all(w < two_over_v for w in weights)
        assert ZERO < phi_i < 1
        assert phi_i <= 2 * gamma_i                       # tail mass upper bound
        assert phi_i >= gamma_i**level / factorial(level)  # tail mass lower bound

        s_value = _zero_padded_value(level, seq, start, end, d)
        need = psub(x_target, s_value)
        witness = hull_contains(M_i.scaled(phi_i), need, dl, space)
        if witness is None:
            raise CertificationError(
                f"stage {i}: x - S escaped conv(phi * M^{i}) + B(0, delta(eps/6))"
            )
        x_prime = psub(x_target, witness.residual)
        assert space.metric(x_prime, x_target) < dl
        for rho in rhos:
            assert space.seminorm(rho, psub(x_prime, x_target)) < epsilon / 6
            assert space.seminorm(rho, psub(x_prime, s_value)) < (
                2 * M_prev.norm(rho, space) + epsilon / 3
            )

        atom_idx = [j for j, g in enumerate(witness.coefficients) if g > 0]
        atoms = [M_i.points[j] for j in atom_idx]
        g = [witness.coefficients[j] for j in atom_idx]
        mu = len(atoms)

        # rounds: smallest N with (phi/N + 2 mu / v) |M^i|_rho < 1/3 throughout
        rounds = 1
        for rho in rhos:
            norm = M_i.norm(rho, space)
            if norm == 0:
                continue
            slackr = Fraction(1, 3) - 2 * mu * norm / Fraction(part.v)
            if slackr <= 0:
                raise SchedulingError(
                    "stabilizer too short for the round bound", stage=i,
                    state={"rho": rho, "norm": fracstr(norm)},
                )
            rounds = max(rounds, floor_frac(phi_i * norm / slackr) + 1)

        gammas = [ZERO] * mu
        assignment = []
        round_gammas = []
        t = 0

        def assign(j):
            nonlocal t
            gammas[j] += weights[t]
            if assignment and assignment[-1][0] == j:
                assignment[-1][1] += 1
            else:
                assignment.append([j, 1])
            t += 1

        for rnd in range(1, rounds):
            for j in range(mu):
                quota = Fraction(rnd) * g[j] * phi_i / rounds
                while gammas[j] <= quota:
                    if t == lam:
                        raise SchedulingError(
                            "terms exhausted before the final round", stage=i,
                            state={"round": rnd, "atom": j, "assigned": t},
                        )
                    assign(j)
                assert gammas[j] < quota + two_over_v
            round_gammas.append(tuple(gammas))
        for j in range(mu):  # final round fills from below, never past the target
            goal = g[j] * phi_i
            while t < lam and gammas[j] + weights[t] <= goal:
                assign(j)
            assert goal - gammas[j] < two_over_v
        while t < lam:  # distribute leftovers by largest deficit
            deficits = [g[j] * phi_i - gammas[j] for j in range(mu)]
            j = max(range(mu), key=lambda jj: (deficits[jj], -jj))
            if deficits[j] <= 0:
                raise SchedulingError(
                    "no positive deficit left but terms remain", stage=i,
                    state={"assigned": t, "lam": lam},
                )
            assign(j)
        round_gammas.append(tuple(gammas))

        assert sum(gammas, ZERO) == phi_i
        residuals = tuple(gammas[j] - g[j] * phi_i for j in range(mu))
        if not all(abs(r) < two_over_v for r in residuals):
            raise CertificationError(f"stage {i}: final coefficients drifted past 2/v")

        for aj, count in assignment:
            seq.append(atoms[aj], count)

        # postcondition (a): endpoint lands within eps/3 per important seminorm
        endpoint = iterate_at(level, seq, end)
        recon = s_value
        for j in range(mu):
            recon = padd(recon, pscale(gammas[j], atoms[j]))
        if endpoint != recon:
            raise CertificationError(f"stage {i}: weight bookkeeping disagrees with the iterate")
        for rho in rhos:
            if not space.seminorm(rho, psub(endpoint, x_target)) < epsilon / 3:
                raise CertificationError(f"stage {i}: endpoint missed target at seminorm {rho}")

        # postcondition (b): every in-block iterate stays below 5|M^(i-1)|_rho + 1
        block_max = {rho: ZERO for rho in rhos}
        for _, value in _block_values(level, seq, start, end, d):
            for rho in rhos:
                nv = space.seminorm(rho, value)
                if nv > block_max[rho]:
                    block_max[rho] = nv
        for rho in rhos:
            if not block_max[rho] <= 5 * M_prev.norm(rho, space) + 1:
                raise CertificationError(f"stage {i}: in-block bound failed at seminorm {rho}")

        stages.append(StageRecord(
            stage=i, level=level, start=start, end=end, phi=phi_i,
            s_value=s_value, x_target=x_target, x_prime=x_prime,
            atom_points=tuple(atoms), g=tuple(g), rounds=rounds,
            assignment_runs=[tuple(r) for r in assignment],
            round_gammas=round_gammas, final_residuals=residuals,
            endpoint_value=endpoint, block_seminorm_max=block_max,
        ))
    return stages, seq


# ---------------------------------------------------------------------------
# the full pipeline
# ---------------------------------------------------------------------------

@dataclass
class SimultaneousResult:
    n: int
    seq: RunSeq
    new_terms_start: int    # terms 1..new_terms_start were the given prefix
    trace: dict


def _level1_requirement(seq: RunSeq, a: Point, tol, space: Space) -> int:
    """Smallest length v with [T^1]_v metric-within tol of a, in closed form.

    Appending copies of a leaves [T^1]_v - a = drift/v with a constant drift
    vector, so the first qualifying v comes out of a doubling + bisection
    search instead of stepping.  This is also a hard lower bound for the
    multi-level requirement.
    """
    rho0 = len(seq)
    if rho0 == 0:
        return 1
    drift = psub(seq.prefix_sum(), pscale(rho0, a))
    origin = pzero(space.dimension)

    def metric_at(v: int) -> Fraction:
        return space.metric(pscale(Fraction(1, v), drift), origin)

    if metric_at(rho0) < tol:
        return rho0
    hi = rho0 + 1
    while metric_at(hi) >= tol:
        hi *= 2
        if hi > 2**63:
            raise BudgetExceededError(
                "term_cap", "stabilization length overflows any plausible budget",
                prefix=rho0,
            )
    lo = rho0
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if metric_at(mid) < tol:
            hi = mid
        else:
            lo = mid
    return hi


def _stabilize(seq: RunSeq, a: Point, k: int, tol, space: Space, term_cap: int) -> int:
    """Append copies of `a` until every level's iterate is metric-within tol of a.

    Returns v1 (the certified length).  Level 1 has a closed form; for
    k >= 2 it still supplies a hard lower bound checked before the
    step-by-step walk, so hopeless runs fail loudly and immediately.
    """
    rho0 = len(seq)
    level1_v = _level1_requirement(seq, a, tol, space)
    if level1_v > term_cap:
        raise BudgetExceededError(
            "term_cap", "stabilization needs more terms than the cap",
            phase="stabilization", required_v1_at_level1=level1_v, term_cap=term_cap,
        )
    if k == 1:
        if level1_v > rho0:
            seq.append(a, level1_v - rho0)
        return level1_v

    walker = IterateWalker(k, space.dimension)
    walker.push_seq(seq)
    while True:
        if walker.j >= 1 and all(
            space.metric(walker.value(level), a) < tol for level in range(1, k + 1)
        ):
            return walker.j
        if walker.j >= term_cap:
            worst = max(
                space.metric(walker.value(level), a) for level in range(1, k + 1)
            )
            raise BudgetExceededError(
                "term_cap", "stabilization did not converge before the cap",
                phase="stabilization", appended=walker.j - rho0, term_cap=term_cap,
                current_metric=fracstr(worst),
            )
        walker.push(a)
        seq.append(a, 1)


def _build_m0(targets, a: Point, epsilon, space: Space, ground: GroundSet) -> FinitePointSet:
    """Covering seed: cube corners large enough to hull 0 and every target,
    with all important seminorms forced to at least 1, plus the stabilizer."""
    radius = Fraction(1)
    for rho in space.important_rhos(epsilon / 3):
        radius = max(radius, 1 / space.weights[rho - 1])
    for x in targets:
        for c in x:
            radius = max(radius, abs(c))
    corners = cube_corners(ground, radius, space)
    M0 = corners.union(FinitePointSet((a,)))
    dl4 = delta(epsilon / 6) / 4
    for x in (pzero(space.dimension), *targets):
        if hull_contains(M0, x, dl4, space) is None:
            raise CertificationError("seed set failed to cover a target")
    for rho in space.important_rhos(epsilon / 3):
        if M0.norm(rho, space) < 1:
            raise CertificationError("seed set norm below 1")
    return M0


def simultaneous_construct(prefix, targets, epsilon, index_set: IndexSet,
                           space: Space, ground: GroundSet,
                           cache: KernelCache | None = None,
                           term_cap: int = DEFAULT_TERM_CAP) -> SimultaneousResult:
    """Extend the prefix to an admissible index n with every [T^i]_n within epsilon.

    Follows the stabilize / cover / partition / assign pipeline and certifies
    d([T^i]_n, x_i) < epsilon exactly for i = 1..k before returning.  If the
    covering constants push the needed length past the term cap, the run
    fails loudly carrying the computed thresholds; constants are never
    relaxed to force an answer.
    """
    epsilon = frac(epsilon)
    if not (0 < epsilon < Fraction(1, 2)):
        raise ValueError("epsilon must lie in (0, 1/2)")
    targets = [space.check_point(tuple(frac(c) for c in x)) for x in targets]
    k = len(targets)
    if k < 1:
        raise ValueError("need at least one target")
    cache = cache or default_cache()
    seq = prefix.copy() if isinstance(prefix, RunSeq) else RunSeq([(p, 1) for p in prefix])
    rho0 = len(seq)
    for p, _ in seq.runs:
        if not ground.contains(p):
            raise ValueError(f"prefix term {p} is outside the ground set")

    a = ground.nearest_to_zero(space)
    tol = delta(epsilon / 6) / (4 * k)
    v1 = _stabilize(seq, a, k, tol, space, term_cap)

    M0 = _build_m0(targets, a, epsilon, space, ground)
    chain = build_covering_chain(M0, epsilon, k, space, ground)
    m0, m_needed = partition_min_m(chain, v1, space)
    m = index_set.next_after(m_needed - 1)  # m_needed already exceeds 2*v1
    if m > term_cap:
        raise BudgetExceededError(
            "term_cap",
            "certified index would exceed the term cap; constants were not relaxed",
            phase="partition", m0=m0, m_required=m_needed, m_selected=m,
            term_cap=term_cap,
        )
    part = choose_partition(m, chain, v1, space)
    top = chain.sets[-1]
    for rho in space.important_rhos(epsilon / 3):
        if not 2 * top.norm(rho, space) / Fraction(part.v) < epsilon / (6 * len(top)):
            raise CertificationError("stabilizer share too small for the top covering set")
    seq.append(a, part.v - len(seq))

    stages, seq = assign_block_terms(seq, chain, part, targets, epsilon, space, cache)
    n = len(seq)
    if n != m or not index_set.contains(n):
        raise CertificationError("final index left the admissible set")
    distances = []
    for i in range(1, k + 1):
        value = iterate_at(i, seq, n)
        dist = space.metric(value, targets[i - 1])
        if not dist < epsilon:
            raise CertificationError(f"final metric distance for level {i} not below epsilon")
        distances.append({
            "level": i,
            "target": _point_json(targets[i - 1]),
            "value": _point_json(value),
            "metric": fracstr(dist),
            "metric_dec": decstr(dist),
            "seminorms": [
                fracstr(space.seminorm(rho, psub(value, targets[i - 1])))
                for rho in range(1, space.dimension + 1)
            ],
        })

    trace = {
        "schema": 1,
        "kind": "thm42",
        "epsilon": fracstr(epsilon),
        "k": k,
        "space": {"dimension": space.dimension,
                  "weights": [fracstr(w) for w in space.weights]},
        "targets": [_point_json(x) for x in targets],
        "stabilizer": _point_json(a),
        "prefix_length": rho0,
        "v1": v1,
        "m0": m0,
        "m_required": m_needed,
        "m": m,
        "partition": {"v": part.v, "lambdas": list(part.lambdas)},
        "chain_intervals": [[fracstr(c), fracstr(d)] for c, d in chain.intervals],
        "chain_sizes": [len(s) for s in chain.sets],
        "stages": [s.to_json() for s in stages],
        "terms_runs": [[_point_json(p), c] for p, c in seq.runs],
        "final_index": n,
        "distances": distances,
        "ks": list(range(1, k + 1)),
    }
    return SimultaneousResult(n=n, seq=seq, new_terms_start=rho0, trace=trace)


@dataclass
class DriverResult:
    seq: RunSeq
    schedule: list
    traces: list


def run_target_plan(plan, index_set: IndexSet, space: Space, ground: GroundSet,
                    cache: KernelCache | None = None,
                    term_cap: int = DEFAULT_TERM_CAP) -> DriverResult:
    """Run the pipeline over a finite plan of target tuples at precisions 1/lambda.

    Entry lambda approximates its targets within 1/lambda (the working
    epsilon is clamped below 1/2, which only tightens the guarantee);
    indices are strictly increasing and admissible by construction.
    """
    seq = RunSeq()
    schedule = []
    traces = []
    for lam, targets in enumerate(plan, start=1):
        eps_eff = min(Fraction(1, lam), Fraction(49, 100))
        result = simultaneous_construct(
            seq, targets, eps_eff, index_set, space, ground, cache, term_cap
        )
        seq = result.seq
        if schedule and result.n <= schedule[-1]:
            raise CertificationError("driver schedule failed to increase")
        precision = Fraction(1, lam)
        for dist in result.trace["distances"]:
            if not frac(dist["metric"]) < precision:
                raise CertificationError("driver entry missed its 1/lambda precision")
        schedule.append(result.n)
        traces.append(result.trace)
    return DriverResult(seq=seq, schedule=schedule, traces=traces)


# ---------------------------------------------------------------------------
# boundedness obstruction
# ---------------------------------------------------------------------------

def unit_interval_check(values, n: int, cache: KernelCache | None = None) -> dict:
    """For [0,1]-valued terms: if [T]_n < 1/8 then [T^2]_n < 15/16, plus sub-facts.

    Returns a report dict; 'triggered' is False when the hypothesis fails
    (the check is then vacuous).  Violations raise, since they would falsify
    the implementation.
    """
    vals = [frac(x) for x in values]
    if any(not (0 <= x <= 1) for x in vals):
        raise ValueError("all terms must lie in [0, 1]")
    if not (1 <= n <= len(vals)):
        raise ValueError("index outside the prefix")
    cache = cache or default_cache()
    seq = RunSeq([((x,), 1) for x in vals[:n]])
    t1 = iterate_at(1, seq, n)[0]
    report = {"n": n, "t1": fracstr(t1), "triggered": bool(t1 < Fraction(1, 8))}
    if not report["triggered"]:
        return report
    t2 = iterate_at(2, seq, n)[0]
    small = sum(1 for x in vals[:n] if x < Fraction(1, 4))
    if n <= cache.n_max and 2 <= cache.k_max:
        row = cache.row(2, n)
        tail = sum(row[n // 2:], ZERO)
    else:
        tail = sum(cache.row_tail(2, n, n // 2 + 1), ZERO)
    report.update({
        "t2": fracstr(t2),
        "small_count": small,
        "tail_mass": fracstr(tail),
    })
    if not t2 < Fraction(15, 16):
        raise CertificationError(f"[T^2]_{n} = {t2} breaches 15/16")
    if not small >= (n + 1) // 2:
        raise CertificationError("fewer than half the terms are below 1/4")
    if not tail >= Fraction(1, 8):
        raise CertificationError("upper-half kernel mass fell below 1/8")
    return report


# ---------------------------------------------------------------------------
# trace replay
# ---------------------------------------------------------------------------

def seq_from_trace(trace: dict) -> RunSeq:
    return RunSeq((_point_from_json(p), count) for p, count in trace["terms_runs"])


def replay_trace(trace: dict, space: Space, cache: KernelCache | None = None) -> dict:
    """Recompute the recorded distances from the recorded terms; must match exactly.

    Uses the independent running-averages evaluator, and additionally the
    kernel-row path whenever the final index fits the cache budget.
    """
    cache = cache or default_cache()
    seq = seq_from_trace(trace)
    n = trace["final_index"]
    out = {"final_index": n, "matches": True, "distances": []}
    targets = [_point_from_json(x) for x in trace["targets"]]
    for idx, k in enumerate(trace["ks"]):
        value = iterate_at(k, seq, n)
        if n <= cache.n_max and k <= cache.k_max:
            direct = apply_iterate(k, list(seq.iter_points()), n, cache)
            if direct != value:
                raise CertificationError("kernel-row replay disagrees with the oracle path")
        dist = fracstr(space.metric(value, targets[idx]))
        out["distances"].append(dist)
    recorded = [d["metric"] for d in trace["distances"]]
    if recorded != out["distances"]:
        out["matches"] = False
    return out
