"""
Non-signaling constraints, KL projection onto the non-signaling set and
the prediction-based-ratio (PBR) test.

Behaviors are arrays of shape (questions, c, c) over an explicit support
of (x, y) pairs. The projection works in the Collins-Gisin coordinates
(Alice marginals, Bob marginals and the joint block without the last
outcome), where every point satisfies the marginal equalities exactly
and only positivity remains. Positivity is handled by a log barrier.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from games.conf import nlg_setting
from games.exceptions import DomainError, NumericError
from games.services.parallel import map_tasks
from games.services.stats import outcome_colors

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12
NS_EXACT_TOL = 1e-12
ER_CAVEAT = (
    "p_U = min(1/t, 1) is applied as a Markov bound; E[R] <= 1 under the "
    "null is not enforced on the fitted ratios"
)


@dataclass(frozen=True, eq=False)
class BehaviorTable:
    support: tuple
    freqs: np.ndarray
    counts: np.ndarray = None
    pseudo_count: float = 0.0

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        if freqs.ndim != 3 or freqs.shape[1] != freqs.shape[2]:
            raise DomainError(f"frequencies must have shape (questions, c, c), got {freqs.shape}")
        if freqs.shape[0] != len(self.support) or not self.support:
            raise DomainError("frequency table and support differ in length")
        if np.any(freqs < 0):
            raise DomainError("negative frequency in behavior table")
        norm_err = np.abs(freqs.sum(axis=(1, 2)) - 1.0).max()
        if norm_err > NORM_TOL:
            raise DomainError(f"behavior rows are not normalized (error {norm_err:.2e})")
        object.__setattr__(self, "support", tuple(tuple(s) for s in self.support))
        object.__setattr__(self, "freqs", freqs)

    @property
    def colors(self):
        return self.freqs.shape[1]

    @property
    def n_xy(self):
        if self.counts is None:
            return None
        return self.counts.sum(axis=(1, 2))

    def index(self):
        return {xy: i for i, xy in enumerate(self.support)}

    @classmethod
    def from_counts(cls, support, counts, pseudo_count=0.0):
        counts = np.asarray(counts, dtype=float)
        smoothed = counts + pseudo_count
        totals = smoothed.sum(axis=(1, 2), keepdims=True)
        if np.any(totals <= 0):
            empty = [support[i] for i in np.flatnonzero(totals.ravel() <= 0)]
            raise DomainError(f"questions without shots: {empty}")
        return cls(support=support, freqs=smoothed / totals, counts=counts,
                   pseudo_count=pseudo_count)

    @classmethod
    def from_shots(cls, support, shots, colors, pseudo_count=0.0):
        """``shots`` maps a support index to an (m, 2) array of (a, b) answers."""
        counts = np.zeros((len(support), colors, colors))
        for q, answers in shots.items():
            answers = np.asarray(answers, dtype=int).reshape(-1, 2)
            np.add.at(counts[q], (answers[:, 0], answers[:, 1]), 1)
        return cls.from_counts(support, counts, pseudo_count)


@dataclass(frozen=True)
class LinearEquality:
    kind: str
    terms: tuple
    rhs: float


@dataclass(frozen=True, eq=False)
class NSProjection:
    p_star: np.ndarray
    kl: float
    constraint_residual: float
    iterations: int
    history: tuple = ()


@dataclass(frozen=True)
class FoldResult:
    fold: int
    t_log: float
    p_u: float
    kl: float
    test_shots: int


@dataclass(frozen=True)
class PbrResult:
    folds: int
    seed: int
    alpha: float
    per_fold: tuple
    inferential: bool = True
    caveats: tuple = field(default=(ER_CAVEAT,))

    @property
    def max_kl(self):
        return max(f.kl for f in self.per_fold)

    @property
    def min_p_u(self):
        return min(f.p_u for f in self.per_fold)

    @property
    def decision(self):
        return "reject" if self.min_p_u < self.alpha else "not rejected"

    def as_dict(self):
        return {
            "folds": self.folds,
            "seed": self.seed,
            "alpha": self.alpha,
            "per_fold": [
                {
                    "fold": f.fold,
                    "t_log": None if math.isinf(f.t_log) else f.t_log,
                    "vacuous": math.isinf(f.t_log),
                    "p_u": f.p_u,
                    "kl": f.kl,
                    "test_shots": f.test_shots,
                }
                for f in self.per_fold
            ],
            "max_kl": self.max_kl,
            "min_p_u": self.min_p_u,
            "decision": self.decision,
            "inferential": self.inferential,
            "caveats": list(self.caveats),
        }


def ns_constraints(support, colors):
    """
    Marginal equalities and normalizations of the non-signaling set.

    For each Alice input x asked together with y_0 < y_1 < ... the marginal
    under y_0 is equated with the marginal under every other y_j (one
    equality per answer a), and symmetrically for Bob. Inputs that occur
    with a single partner give no cross constraint. Terms are
    ((question, a, b), coefficient).
    """
    support = [tuple(s) for s in support]
    if not support:
        raise DomainError("empty question support")
    constraints = []
    for side, kind in ((0, "alice"), (1, "bob")):
        partners = {}
        for q, xy in enumerate(support):
            partners.setdefault(xy[side], []).append((xy[1 - side], q))
        for inp in sorted(partners):
            group = [q for _, q in sorted(partners[inp])]
            first = group[0]
            for other in group[1:]:
                for ans in range(colors):
                    terms = []
                    for k in range(colors):
                        cell = (ans, k) if side == 0 else (k, ans)
                        terms.append(((first,) + cell, 1.0))
                        terms.append(((other,) + cell, -1.0))
                    constraints.append(LinearEquality(kind, tuple(terms), 0.0))
    for q in range(len(support)):
        terms = tuple(((q, a, b), 1.0) for a in range(colors) for b in range(colors))
        constraints.append(LinearEquality("norm", terms, 1.0))
    return constraints


def constraint_matrix(constraints, n_questions, colors):
    A = np.zeros((len(constraints), n_questions * colors * colors))
    b = np.zeros(len(constraints))
    for row, eq in enumerate(constraints):
        for (q, a, bb), coef in eq.terms:
            A[row, (q * colors + a) * colors + bb] += coef
        b[row] = eq.rhs
    return A, b


def ns_residual(freqs, support):
    freqs = np.asarray(freqs, dtype=float)
    colors = freqs.shape[1]
    A, b = constraint_matrix(ns_constraints(support, colors), len(support), colors)
    return float(np.max(np.abs(A @ freqs.reshape(-1) - b)))


class _CollinsGisin:
    """Affine map z -> P(z) onto the affine hull of the non-signaling set."""

    def __init__(self, support, colors):
        c, k = colors, colors - 1
        alice = sorted({x for x, _ in support})
        bob = sorted({y for _, y in support})
        self.pa = {x: i * k for i, x in enumerate(alice)}
        self.pb = {y: (len(alice) + i) * k for i, y in enumerate(bob)}
        joint0 = (len(alice) + len(bob)) * k
        self.joint = [joint0 + q * k * k for q in range(len(support))]
        self.size = joint0 + len(support) * k * k
        self.support = support
        self.colors = colors

        M = np.zeros((len(support), c, c, self.size))
        p0 = np.zeros((len(support), c, c))
        for q, (x, y) in enumerate(support):
            for a in range(k):
                M[q, a, k, self.pa[x] + a] = 1.0
                M[q, k, k, self.pa[x] + a] = -1.0
            for b in range(k):
                M[q, k, b, self.pb[y] + b] = 1.0
                M[q, k, k, self.pb[y] + b] = -1.0
            for a in range(k):
                for b in range(k):
                    j = self.joint[q] + a * k + b
                    M[q, a, b, j] = 1.0
                    M[q, a, k, j] = -1.0
                    M[q, k, b, j] = -1.0
                    M[q, k, k, j] = 1.0
            p0[q, k, k] = 1.0
        self.M = sparse.csr_matrix(M.reshape(len(support) * c * c, self.size))
        self.p0 = p0.reshape(-1)

    def uniform(self):
        c, k = self.colors, self.colors - 1
        z = np.zeros(self.size)
        for start in list(self.pa.values()) + list(self.pb.values()):
            z[start:start + k] = 1.0 / c
        for start in self.joint:
            z[start:start + k * k] = 1.0 / (c * c)
        return z

    def behavior(self, z):
        return self.M @ z + self.p0


def _solve_newton(H, g):
    # symmetric diagonal scaling; barrier weights span many decades
    d = 1.0 / np.sqrt(np.diag(H))
    Hs = H * d[:, None] * d[None, :]
    try:
        return d * cho_solve(cho_factor(Hs), -g * d)
    except LinAlgError:
        return d * np.linalg.lstsq(Hs, -g * d, rcond=None)[0]


def kl_projection(table, tol=1e-9, max_iter=2000, t0=1.0, growth=20.0, newton_tol=1e-12):
    """
    argmin over non-signaling P of sum_{x,y} sum_{a,b} f log(f / P).

    Barrier method: for t = t0, growth * t0, ... minimize
    t * (-sum f log P) - sum log P by damped Newton steps, until the
    duality gap bound (number of cells) / t drops below ``tol``. A stage
    ends when the Newton decrement falls below ``newton_tol`` relative to
    the barrier objective, or when no step lowers it any more; each stage
    may take up to ``max_iter`` steps. The KL value at the end of every
    stage is kept in ``history``.
    """
    support = table.support
    colors = table.colors
    f = table.freqs.reshape(-1)
    residual = ns_residual(table.freqs, support)
    if residual < NS_EXACT_TOL:
        return NSProjection(p_star=table.freqs.copy(), kl=0.0, constraint_residual=residual,
                            iterations=0, history=(0.0,))

    cg = _CollinsGisin(support, colors)
    M = cg.M
    observed = f > 0
    const = float(np.sum(f[observed] * np.log(f[observed])))

    def kl_of(P):
        return const - float(np.sum(f[observed] * np.log(P[observed])))

    def phi(P, t):
        return t * kl_of(P) - float(np.sum(np.log(P)))

    z = cg.uniform()
    cells = len(f)
    t = t0
    iterations = 0
    history = []
    while True:
        for _ in range(max_iter):
            P = cg.behavior(z)
            current = phi(P, t)
            w = t * f + 1.0
            g = -M.T @ (w / P)
            H = (M.T @ sparse.diags(w / P ** 2) @ M).toarray()
            dz = _solve_newton(H, g)
            if not np.all(np.isfinite(dz)):
                raise NumericError("Newton step is not finite", residual=float(np.abs(g).max()))
            decrement = float(-g @ dz)
            # phi is only known to a relative precision, so is the decrement
            if decrement / 2 <= newton_tol * max(1.0, abs(current)):
                break
            step = 1.0
            while step > 0 and np.any(cg.behavior(z + step * dz) <= 0):
                step *= 0.5
            accepted = False
            for _ in range(60):
                trial = phi(cg.behavior(z + step * dz), t)
                if trial <= current - 0.25 * step * decrement:
                    accepted = trial < current
                    break
                step *= 0.5
            if not accepted:
                # no representable decrease left at this t
                break
            z = z + step * dz
            iterations += 1
            if iterations % 100 == 0:
                logger.info("kl projection: iteration %d, t=%.1e, kl=%.6e",
                            iterations, t, kl_of(cg.behavior(z)))
        else:
            raise NumericError(
                f"kl projection did not converge in {max_iter} Newton steps at t={t:.1e}",
                residual=decrement,
            )
        history.append(kl_of(cg.behavior(z)))
        logger.debug("barrier stage t=%.1e: kl=%.12e", t, history[-1])
        if cells / t < tol:
            break
        t *= growth

    p_star = cg.behavior(z).reshape(table.freqs.shape)
    residual = ns_residual(p_star, support)
    if residual >= 1e-8:
        raise NumericError("projected behavior violates the non-signaling equalities",
                           residual=residual)
    return NSProjection(p_star=p_star, kl=max(0.0, history[-1]), constraint_residual=residual,
                        iterations=iterations, history=tuple(history))


def pbr_test(train, test_shots, projection=None, tol=1e-9):
    """
    Log of the test statistic t = prod_i f_train / P* over held-out shots
    and p_U = min(1/t, 1).

    ``test_shots`` is an (m, 4) array of (x, y, a, b). A shot landing on a
    cell with f_train = 0 makes t = 0 and p_U = 1.
    """
    if projection is None:
        projection = kl_projection(train, tol=tol)
    index = train.index()
    shots = np.asarray(test_shots, dtype=int).reshape(-1, 4)
    try:
        q = np.array([index[(x, y)] for x, y in shots[:, :2]], dtype=int)
    except KeyError as exc:
        raise DomainError(f"test shot question {exc.args[0]} is outside the training support") from exc
    if len(shots) == 0:
        return 0.0, 1.0
    f = train.freqs[q, shots[:, 2], shots[:, 3]]
    if np.any(f == 0):
        return -math.inf, 1.0
    p = projection.p_star[q, shots[:, 2], shots[:, 3]]
    t_log = float(np.sum(np.log(f) - np.log(p)))
    return t_log, _p_upper(t_log)


def _p_upper(t_log):
    # exp underflows for very large t; keep p_U strictly positive
    return max(math.exp(-max(t_log, 0.0)), np.finfo(float).tiny)


def behavior_from_dataset(dataset, game, seed=0):
    """
    Expand circuit counts into per-question shot lists.

    Shots of each record are shuffled with a generator derived from
    ``seed``. Vertex shots belong to (v, v). Shots of edge circuit
    e{u}_{v} alternate: even positions answer (u, v) as measured, odd
    positions answer (v, u) with the two players' colors swapped.
    Returns (support, {question index: (m, 2) answers}).
    """
    support = tuple((q.x, q.y) for q in game.questions)
    index = {xy: i for i, xy in enumerate(support)}
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    buckets = {i: [] for i in range(len(support))}
    for record in sorted(dataset.records, key=lambda r: r.label):
        answers = []
        for bits in sorted(record.counts):
            answers.extend([outcome_colors(bits)] * int(record.counts[bits]))
        answers = np.array(answers, dtype=int).reshape(-1, 2)
        answers = answers[rng.permutation(len(answers))]
        u, v = record.vertices
        if record.kind == "vertex":
            buckets[index[(u, u)]].append(answers)
        else:
            buckets[index[(u, v)]].append(answers[0::2])
            buckets[index[(v, u)]].append(answers[1::2][:, ::-1])
    shots = {}
    for q, parts in buckets.items():
        shots[q] = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=int)
    return support, shots


def _fold_task(task):
    fold, support, colors, train_shots, test_shots, pseudo_count, tol = task
    train = BehaviorTable.from_shots(support, train_shots, colors, pseudo_count)
    projection = kl_projection(train, tol=tol)
    t_log, p_u = pbr_test(train, test_shots, projection=projection)
    logger.info("fold %d: kl=%.3e, log t=%.3f, p_U=%.3g", fold, projection.kl, t_log, p_u)
    return FoldResult(fold=fold, t_log=t_log, p_u=p_u, kl=projection.kl, test_shots=len(test_shots))


def kfold_pbr_shots(support, shots, colors, k=None, seed=0, alpha=None, pseudo_count=0.0,
                    tol=1e-9, workers=None):
    """k-fold PBR on per-question shot lists; shot i of a question goes to fold i mod k."""
    k = nlg_setting("FOLDS") if k is None else k
    alpha = nlg_setting("ALPHA") if alpha is None else alpha
    if k < 2:
        raise DomainError(f"cross-validation needs at least 2 folds, got {k}")
    short = [support[q] for q, s in shots.items() if len(s) < k]
    if short:
        raise DomainError(f"{len(short)} questions have fewer than {k} shots, e.g. {short[0]}")

    tasks = []
    for fold in range(k):
        train, test = {}, []
        for q, answers in shots.items():
            held = np.arange(len(answers)) % k == fold
            train[q] = answers[~held]
            x, y = support[q]
            for a, b in answers[held]:
                test.append((x, y, int(a), int(b)))
        tasks.append((fold, support, colors, train, np.array(test, dtype=int).reshape(-1, 4),
                      pseudo_count, tol))
    per_fold = tuple(map_tasks(_fold_task, tasks, workers=workers))
    return PbrResult(folds=k, seed=seed, alpha=alpha, per_fold=per_fold,
                     inferential=pseudo_count == 0)


def kfold_pbr(dataset, game, k=None, seed=0, alpha=None, pseudo_count=0.0, tol=1e-9,
              workers=None):
    support, shots = behavior_from_dataset(dataset, game, seed)
    return kfold_pbr_shots(support, shots, game.colors, k=k, seed=seed, alpha=alpha,
                           pseudo_count=pseudo_count, tol=tol, workers=workers)
