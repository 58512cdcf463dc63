"""Monte-Carlo verifiers for the geometric and probabilistic lemmas.

Every verifier draws trial ``i`` from ``stream.child(lemma_id, i)``, so a
report depends only on ``(lemma_id, trials, seed)``.

Deterministic statements must hold on every trial (relative slack 1e-9).
Probabilistic ones pass when the empirical success rate is at least the
stated probability minus 0.02; trials whose parameters differ are compared
against the mean stated probability of their group.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._parallel import ordered_map
from .._rng import as_stream
from ..errors import DegenerateError, InvalidParameterError
from ..geometry import (
    Flat,
    Hyperbox,
    Slab,
    delta_of_rotation,
    hyperbox_witness,
    minimal_amplification,
    power_objective,
    random_orthonormal,
    rotate_flat,
    slab_partition,
    translate_flat,
    translation_distance,
)
from ..sampling import symmetric_sampling, uniform_sample

REL_TOL = 1e-9
MC_SLACK = 0.02
CHUNK = 250


@dataclass(eq=False)
class VerdictReport:
    lemma_id: str
    trials: int
    failures: int
    worst_margin: float
    passed: bool
    budget: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lemma_id": self.lemma_id, "trials": self.trials, "failures": self.failures,
                "worst_margin": self.worst_margin, "pass": self.passed, "budget": self.budget,
                "detail": self.detail}


def _holds(lhs: float, rhs: float) -> tuple[bool, float]:
    """``lhs <= rhs`` up to relative slack; margin is ``(rhs - lhs) / scale``."""
    scale = max(abs(rhs), abs(lhs), 1e-300)
    return lhs <= rhs + REL_TOL * scale + 1e-300, (rhs - lhs) / scale


def _loguniform(gen, lo, hi, size=None):
    return np.exp(gen.uniform(math.log(lo), math.log(hi), size))


# ------------------------------------------------------------ deterministic

def _hyperbox(gen):
    j = int(gen.integers(1, 7))
    d = j + int(gen.integers(0, 3))
    axes = random_orthonormal(d, j, gen)
    sides = _loguniform(gen, 0.01, 100.0, j)
    H = Hyperbox(gen.standard_normal(d), axes, sides)
    half = sides / 2
    C = gen.uniform(-1, 1, (j, j)) * half
    C[np.arange(j), np.arange(j)] = np.where(gen.random(j) < 0.5, -1.0, 1.0) * half
    _, lam = hyperbox_witness(H, H.center + C @ axes)
    return _holds(lam, math.sqrt(j))


def _slab_partition(gen):
    j = int(gen.integers(1, 5))
    n = int(gen.integers(20, 81))
    C = gen.standard_normal((n, j)) * _loguniform(gen, 0.1, 10.0, j)
    part = slab_partition(C, gamma=float(gen.uniform(0.05, 1.0)))
    a = np.array([s.halfwidth for s in part.slabs])
    rho = np.zeros((j, j))
    synthetic = gen.random() < 0.5
    for l in range(j):
        if synthetic:
            # any point of Pi_{l-1} on the boundary of R_l; later coordinates are free
            rho[l, :l] = gen.uniform(-1, 1, l) * a[:l]
            rho[l, l] = a[l] if gen.random() < 0.5 else -a[l]
            rho[l, l + 1:] = gen.uniform(-3, 3, j - l - 1) * a[l + 1:]
        else:
            idx = part.members[l + 1]
            rho[l] = C[idx[np.argmax(np.abs(C[idx, l]))]]
    box = part.box()
    lam = min(minimal_amplification(Slab.determined_by(np.zeros(j), rho[l]), box) for l in range(j))
    return _holds(lam, math.sqrt(j))


def _random_rotation_instance(gen):
    d = int(gen.integers(2, 7))
    j = int(gen.integers(1, d))
    n = int(gen.integers(5, 41))
    F = Flat(gen.standard_normal(d), random_orthonormal(d, j, gen))
    P = gen.standard_normal((n, d)) * _loguniform(gen, 0.1, 10.0, d)
    o = F.anchor + gen.standard_normal(j) @ F.basis
    u = o + gen.standard_normal(d) * _loguniform(gen, 0.01, 10.0)
    return P, F, o, u


def _rotation_check(gen, tau):
    P, F, o, u = _random_rotation_instance(gen)
    delta, _, _ = delta_of_rotation(P, F, o, u, tau)
    F2, _ = rotate_flat(F, o, u)
    lhs = power_objective(P, F2, tau) ** (1.0 / tau)
    rhs = power_objective(P, F, tau) ** (1.0 / tau) + delta
    return _holds(lhs, rhs)


def _delta_rotation(gen):
    return _rotation_check(gen, 2)


LDELTA_TAUS = (1, 2, 3, 4, 7)


def _ldelta_rotation(gen, i):
    return _rotation_check(gen, LDELTA_TAUS[i % len(LDELTA_TAUS)])


def _translation(gen):
    d = int(gen.integers(2, 7))
    j = int(gen.integers(0, d))
    F = Flat(gen.standard_normal(d), random_orthonormal(d, j, gen))
    G = translate_flat(F, gen.standard_normal(d) * _loguniform(gen, 0.01, 10.0))
    P = gen.standard_normal((int(gen.integers(1, 41)), d)) * 3
    lhs = math.sqrt(power_objective(P, G, 2))
    rhs = math.sqrt(power_objective(P, F, 2)) + translation_distance(F, G)
    return _holds(lhs, rhs)


def power_mean_margin(x, y, alpha, tau):
    """Relative margin of ``(x + a y)^t <= (1+a)^(t-1) x^t + a (1+a)^(t-1) y^t``."""
    x, y, alpha, tau = (np.asarray(v, dtype=float) for v in (x, y, alpha, tau))
    lhs = (x + alpha * y) ** tau
    rhs = (1 + alpha) ** (tau - 1) * (x ** tau + alpha * y ** tau)
    return lhs, rhs


def _power_mean_batch(stream, trials):
    grid = np.logspace(-2, 1, 10)
    G = np.array(np.meshgrid(grid, grid, grid, np.arange(1, 9), indexing="ij")).reshape(4, -1).T
    G = G[:trials]
    extra = trials - G.shape[0]
    if extra > 0:
        gen = stream.child("power-mean", "random").generator()
        R = np.column_stack([_loguniform(gen, 0.01, 10.0, (extra, 3)),
                             gen.integers(1, 9, extra)])
        G = np.vstack([G, R])
    lhs, rhs = power_mean_margin(G[:, 0], G[:, 1], G[:, 2], G[:, 3])
    ok = lhs <= rhs * (1 + REL_TOL)
    margin = (rhs - lhs) / rhs
    return ok, margin


# ------------------------------------------------------------ probabilistic

def _select(gen):
    n = 1000
    m = int(gen.integers(20, 501))
    alpha = m / n
    t = int(gen.integers(1, 6))
    eta = float(gen.uniform(0.05, 0.3))
    z = math.ceil(t / math.log1p(alpha) * math.log(t / eta))
    hits = int(np.count_nonzero(gen.integers(0, n, z) < m))
    return "select", hits >= t, 1 - eta


def _mean_dist(gen):
    n = int(gen.integers(50, 201))
    d = int(gen.integers(1, 6))
    S = gen.standard_normal((n, d)) * _loguniform(gen, 0.1, 10.0, d) + gen.standard_normal(d)
    if gen.random() < 0.5:
        S = S ** 3  # heavy tails
    m = int(gen.integers(1, 21))
    eta = float(gen.uniform(0.05, 0.5))
    xbar = S.mean(axis=0)
    var0 = float(np.mean(np.sum((S - xbar) ** 2, axis=1)))
    T = S[gen.integers(0, n, m)]
    dev = float(np.sum((T.mean(axis=0) - xbar) ** 2))
    return "mean-dist", dev < var0 / (eta * m), 1 - eta


def _cv_data(gen):
    n = int(gen.integers(100, 301))
    kind = int(gen.integers(0, 4))
    if kind == 0:
        x = gen.standard_normal(n)
    elif kind == 1:
        x = gen.gamma(2.0, 1.0, n)
    elif kind == 2:
        x = gen.uniform(-1, 1, n)
    else:
        x = gen.exponential(1.0, n)
    return x * _loguniform(gen, 0.1, 10.0) + gen.standard_normal()


CV_CASES = ("tau2", "tau1-signed", "tau3-signed", "tau3-abs")


def _cv_bound(gen, i):
    case = CV_CASES[i % len(CV_CASES)]
    x = _cv_data(gen)
    mu = x.mean()
    dev = x - mu
    ad = np.abs(dev)
    tau = 2 if case == "tau2" else (1 if case == "tau1-signed" else 3)
    omega = float(np.mean(ad ** tau) ** (1 / tau) / ad.mean())
    if case.endswith("signed"):
        ht = float(np.mean(dev ** tau))
        h = math.copysign(abs(ht) ** (1 / tau), ht)
    else:
        h = float(np.mean(ad ** tau) ** (1 / tau))
    m = int(gen.integers(2, 31))
    eta = float(gen.uniform(1.2, 4.0))
    est = float(np.mean(ad[gen.integers(0, x.size, m)]))
    bound = (1 - eta * math.sqrt(max(omega * omega - 1, 0.0) / m)) * h / omega
    return case, est >= bound, 1 - 1 / eta ** 2


def _signed_mean(gen):
    d = int(gen.integers(3, 6))
    j = int(gen.integers(1, 3))
    n = 200
    B = random_orthonormal(d, j, gen)
    F = Flat(np.zeros(d), B)
    sigma = float(_loguniform(gen, 0.01, 1.0))
    offset = gen.standard_normal(d) * sigma * gen.uniform(0, 2)
    P = (gen.standard_normal((n, j)) * 3) @ B + gen.standard_normal((n, d)) * sigma + offset
    eps = float(gen.choice([0.1, 0.2, 0.25]))
    A = P[gen.integers(0, n, math.ceil(1 / eps))]
    e = B[int(gen.integers(0, j))]
    Bset = np.where((A @ e >= 0)[:, None], A, -A)
    rho = Bset.mean(axis=0)
    delta = math.sqrt(power_objective(P, F, 2))
    return "signed-mean", float(F.distances(rho[None, :])[0]) <= 5 * delta, (1 - eps) ** 2


ROTATION_STEP_R = 4
ROTATION_STEP_EPS = 0.1


def _rotation_step(gen):
    d = int(gen.integers(3, 5))
    j = int(gen.integers(1, 3))
    n = 60
    r = ROTATION_STEP_R
    gamma = float(gen.uniform(0.1, 1.0))
    Bt = random_orthonormal(d, j, gen)
    P = (gen.standard_normal((n, j)) * 3) @ Bt + gen.standard_normal((n, d)) * float(
        _loguniform(gen, 0.01, 1.0))
    o = P.mean(axis=0) + gen.standard_normal(d) * 0.1
    F = Flat(o, random_orthonormal(d, j, gen) if gen.random() < 0.5 else Bt)
    keep = math.ceil((1 - gamma / j) * n - 1e-9)
    rhs = (1 + 5 * math.sqrt(j) * r) ** 2 * float(np.sum(F.distances(P) ** 2))
    cands = symmetric_sampling(uniform_sample(P, r, gen), o).points
    for s in cands:
        try:
            F2, _ = rotate_flat(F, o, s)
        except DegenerateError:
            continue
        lhs = float(np.sum(np.sort(F2.distances(P) ** 2)[:keep]))
        if lhs <= rhs:
            return "rotation-step", True, (1 - ROTATION_STEP_EPS) ** 4
    return "rotation-step", False, (1 - ROTATION_STEP_EPS) ** 4


# ------------------------------------------------------------ registry

def _wrap(fn, needs_index=False):
    return (lambda gen, i: fn(gen, i)) if needs_index else (lambda gen, i: fn(gen))


DETERMINISTIC = {
    "hyperbox": _wrap(_hyperbox),
    "slab-partition": _wrap(_slab_partition),
    "delta-rotation": _wrap(_delta_rotation),
    "ldelta-rotation": _wrap(_ldelta_rotation, True),
    "translation": _wrap(_translation),
    "power-mean": None,  # vectorised separately
}
PROBABILISTIC = {
    "select": _wrap(_select),
    "mean-dist": _wrap(_mean_dist),
    "cv-bound": _wrap(_cv_bound, True),
    "signed-mean": _wrap(_signed_mean),
    "rotation-step": _wrap(_rotation_step),
}
LEMMA_IDS = tuple(DETERMINISTIC) + tuple(PROBABILISTIC)
DEFAULT_TRIALS = {**{k: 10_000 for k in DETERMINISTIC}, **{k: 5000 for k in PROBABILISTIC}}


def _run_trials(fn, lemma_id, trials, stream):
    chunks = [range(s, min(trials, s + CHUNK)) for s in range(0, trials, CHUNK)]

    def run(idx):
        return [fn(stream.child(lemma_id, i).generator(), i) for i in idx]

    return [res for part in ordered_map(run, chunks) for res in part]


def verify_lemma(lemma_id: str, trials: int | None = None, rng=0) -> VerdictReport:
    """Run the Monte-Carlo check for ``lemma_id`` (see ``LEMMA_IDS``)."""
    if lemma_id not in LEMMA_IDS:
        raise InvalidParameterError(f"unknown lemma id {lemma_id!r}; known: {', '.join(LEMMA_IDS)}")
    trials = DEFAULT_TRIALS[lemma_id] if trials is None else int(trials)
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    stream = as_stream(rng)

    if lemma_id in DETERMINISTIC:
        if lemma_id == "power-mean":
            ok, margin = _power_mean_batch(stream, trials)
        else:
            out = _run_trials(DETERMINISTIC[lemma_id], lemma_id, trials, stream)
            ok = np.array([o for o, _ in out])
            margin = np.array([m for _, m in out])
        failures = int(np.count_nonzero(~ok))
        return VerdictReport(lemma_id, trials, failures, float(np.min(margin)), failures == 0, 0.0)

    out = _run_trials(PROBABILISTIC[lemma_id], lemma_id, trials, stream)
    groups: dict = {}
    for g, success, prob in out:
        s = groups.setdefault(g, [0, 0, 0.0])
        s[0] += 1
        s[1] += bool(success)
        s[2] += prob
    detail, worst, passed = {}, math.inf, True
    for g, (cnt, succ, psum) in groups.items():
        rate, need = succ / cnt, psum / cnt - MC_SLACK
        detail[g] = {"trials": cnt, "success_rate": rate, "required": need}
        worst = min(worst, rate - need)
        passed &= rate >= need
    failures = sum(cnt - succ for cnt, succ, _ in groups.values())
    budget = max(1 - v["required"] for v in detail.values())
    return VerdictReport(lemma_id, trials, failures, float(worst), bool(passed), float(budget),
                         detail)


def verify_all(trials: int | None = None, rng=0) -> list:
    return [verify_lemma(lid, trials, rng) for lid in LEMMA_IDS]
