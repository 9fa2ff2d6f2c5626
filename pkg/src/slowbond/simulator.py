"""Continuous-time simulation of the exclusion process sped up by ``n**2``.

The kernel keeps the total swap rate of the current configuration, draws
exponential holding times from it, and picks the bond by thinning against
the largest bond rate. This has the same law as a global uniformized clock
of rate ``N n^2 r_max`` with rejected ticks, but skips the rejected ticks
that fall between events.

Observables are registered before the run and integrated exactly as step
functions of time. Three shapes are supported, all sums over the ring:

* site: ``sum_x w(x) eta(x)``
* pair: ``sum_x T[x, 2 eta(x) + eta(x+1)]``
* block: ``sum_y w(y) (S_L(y) / L)^2`` where ``S_L(y)`` is the sum of
  ``eta(z) - rho`` over the ``L`` sites to the right of ``y``

Each observable may carry an additive constant. Array indices are ring
indices throughout; :class:`slowbond.lattice.Ring` converts logical labels.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba as nb
import numpy as np

from .lattice import Config, ModelParams, Ring
from .stats import StatSummary

THREADS_ENV = "SLOWBOND_THREADS"


class UnknownObservable(KeyError):
    pass


class EventLogOverflow(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# kernel


@nb.njit(nogil=True, cache=True)
def _bond_rate(left_occ, right_occ, r, l):
    # scalar arguments only: array arguments would cost a refcount pair per call
    if left_occ == right_occ:
        return 0.0
    return r if left_occ == 1 else l


@nb.njit(nogil=True, cache=True)
def _fill_rates(occ, right, left, rate):
    N = occ.size
    tot = 0.0
    for b in range(N):
        c = b + 1 if b + 1 < N else 0
        rate[b] = _bond_rate(occ[b], occ[c], right[b], left[b])
        tot += rate[b]
    return tot


@nb.njit(nogil=True, cache=True)
def _part_values(occ, rho, site_w, pair_tab, blk_L, blk_w, blk_S, vals):
    N = occ.size
    S = site_w.shape[0]
    P = pair_tab.shape[0]
    for k in range(S):
        v = 0.0
        for x in range(N):
            if occ[x]:
                v += site_w[k, x]
        vals[k] = v
    for k in range(P):
        v = 0.0
        for x in range(N):
            y = x + 1 if x + 1 < N else 0
            v += pair_tab[k, x, 2 * occ[x] + occ[y]]
        vals[S + k] = v
    for k in range(blk_L.size):
        L = blk_L[k]
        c = 0
        for z in range(1, L + 1):
            c += occ[z % N]
        v = 0.0
        for y in range(N):
            if y > 0:
                c += occ[(y + L) % N] - occ[y]
            blk_S[k, y] = c
            m = (c - L * rho) / L
            v += blk_w[k, y] * m * m
        vals[S + P + k] = v


@nb.njit(nogil=True, cache=True)
def _simulate(occ, right, left, rmax, n2, rho, ck_times, rng,
              site_w, pair_tab, blk_L, blk_w, blk_S,
              ck_vals, ck_ints, snaps, log_t, log_b, log_d):
    """Run until ``ck_times[-1]``; returns (events, trials, logged)."""
    N = occ.size
    S = site_w.shape[0]
    P = pair_tab.shape[0]
    B = blk_L.size
    npart = S + P + B
    vals = np.zeros(npart)
    integ = np.zeros(npart)
    old_pair = np.zeros(P)
    _part_values(occ, rho, site_w, pair_tab, blk_L, blk_w, blk_S, vals)
    rate = np.empty(N)
    lam = _fill_rates(occ, right, left, rate)
    take_snaps = snaps.shape[0] > 0
    nck = ck_times.size
    cap = log_t.size
    t = 0.0
    k = 0
    events = 0
    trials = 0
    logged = 0
    while True:
        if lam > 0.0:
            t_next = t + rng.standard_exponential() / (n2 * lam)
        else:
            t_next = np.inf
        while k < nck and ck_times[k] <= t_next:
            dt = ck_times[k] - t
            for q in range(npart):
                integ[q] += vals[q] * dt
                ck_vals[k, q] = vals[q]
                ck_ints[k, q] = integ[q]
            if take_snaps:
                for x in range(N):
                    snaps[k, x] = occ[x]
            t = ck_times[k]
            k += 1
        if k == nck:
            break
        dt = t_next - t
        for q in range(npart):
            integ[q] += vals[q] * dt
        t = t_next
        # thinning: uniform bond, accept with probability rate / rmax
        while True:
            u = rng.random() * N
            b = int(u)
            if b >= N:
                b = N - 1
            trials += 1
            if (u - b) * rmax < rate[b]:
                break
        c = b + 1 if b + 1 < N else 0
        if occ[b] == 1:
            src = b
            dst = c
            direction = 1
        else:
            src = c
            dst = b
            direction = -1
        bm = b - 1 if b > 0 else N - 1
        bp = c
        for q in range(P):
            o = 0.0
            for x in (bm, b, bp):
                y = x + 1 if x + 1 < N else 0
                o += pair_tab[q, x, 2 * occ[x] + occ[y]]
            old_pair[q] = o
        occ[src] = 0
        occ[dst] = 1
        for x in (bm, b, bp):
            y = x + 1 if x + 1 < N else 0
            r = _bond_rate(occ[x], occ[y], right[x], left[x])
            lam += r - rate[x]
            rate[x] = r
        for q in range(S):
            vals[q] += site_w[q, dst] - site_w[q, src]
        for q in range(P):
            o = 0.0
            for x in (bm, b, bp):
                y = x + 1 if x + 1 < N else 0
                o += pair_tab[q, x, 2 * occ[x] + occ[y]]
            vals[S + q] += o - old_pair[q]
        for q in range(B):
            L = blk_L[q]
            # site b changes by -direction, site c by +direction
            for y, d in (((b - L) % N, -direction), (b, direction)):
                m = (blk_S[q, y] - L * rho) / L
                vals[S + P + q] -= blk_w[q, y] * m * m
                blk_S[q, y] += d
                m = (blk_S[q, y] - L * rho) / L
                vals[S + P + q] += blk_w[q, y] * m * m
        events += 1
        if (events & 0xFFFF) == 0:
            lam = _fill_rates(occ, right, left, rate)
        if logged < cap:
            log_t[logged] = t
            log_b[logged] = b
            log_d[logged] = direction
            logged += 1
        elif cap > 0:
            logged = cap + 1
    return events, trials, logged


# ---------------------------------------------------------------------------
# observables


@dataclass
class _Obs:
    name: str
    kind: str
    data: np.ndarray | None
    L: int = 0
    const: float = 0.0


class ObservableSet:
    """Registry of observables integrated along a path on an ``N``-site ring."""

    def __init__(self, N: int):
        self.N = N
        self._obs: dict[str, _Obs] = {}

    def _add(self, obs: _Obs) -> "ObservableSet":
        if obs.name in self._obs:
            raise ValueError(f"observable {obs.name!r} registered twice")
        self._obs[obs.name] = obs
        return self

    def add_site(self, name, weights, const=0.0):
        w = np.ascontiguousarray(weights, dtype=float)
        if w.shape != (self.N,):
            raise ValueError("site weights need one entry per ring site")
        return self._add(_Obs(name, "site", w, const=const))

    def add_pair(self, name, table, const=0.0):
        """``table[x, 2 eta(x) + eta(x+1)]`` summed over ring indices ``x``."""
        tab = np.ascontiguousarray(table, dtype=float)
        if tab.shape != (self.N, 4):
            raise ValueError("pair table must have shape (N, 4)")
        return self._add(_Obs(name, "pair", tab, const=const))

    def add_block(self, name, L, weights, const=0.0):
        w = np.ascontiguousarray(weights, dtype=float)
        if not 1 <= L < self.N or w.shape != (self.N,):
            raise ValueError("block length must be in [1, N) with N weights")
        return self._add(_Obs(name, "block", w, L=int(L), const=const))

    def add_constant(self, name, c):
        return self._add(_Obs(name, "const", None, const=float(c)))

    @property
    def names(self) -> list[str]:
        return list(self._obs)

    def __contains__(self, name):
        return name in self._obs

    def _arrays(self):
        N = self.N
        site = [o for o in self._obs.values() if o.kind == "site"]
        pair = [o for o in self._obs.values() if o.kind == "pair"]
        blk = [o for o in self._obs.values() if o.kind == "block"]
        site_w = np.array([o.data for o in site]).reshape(len(site), N)
        pair_tab = np.array([o.data for o in pair]).reshape(len(pair), N, 4)
        blk_L = np.array([o.L for o in blk], dtype=np.int64)
        blk_w = np.array([o.data for o in blk]).reshape(len(blk), N)
        order = [o.name for o in site + pair + blk]
        return order, site_w, pair_tab, blk_L, blk_w


# ---------------------------------------------------------------------------
# records


@dataclass
class PathRecord:
    """Checkpointed values and exact running integrals of registered observables."""

    times: np.ndarray
    names: dict[str, int]
    consts: dict[str, float]
    values: np.ndarray
    integrals: np.ndarray
    initial: Config
    final: Config
    snapshots: np.ndarray | None = None
    events: int = 0
    trials: int = 0
    event_log: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def _ck(self, t):
        if t is None:
            return self.times.size - 1
        hit = np.flatnonzero(np.isclose(self.times, t, rtol=1e-12, atol=1e-15))
        if hit.size == 0:
            raise ValueError(f"time {t} is not a checkpoint")
        return int(hit[0])

    def _col(self, name):
        if name not in self.consts:
            raise UnknownObservable(name)
        return self.names.get(name)

    def value(self, name: str, t: float | None = None) -> float:
        col, k = self._col(name), self._ck(t)
        base = 0.0 if col is None else self.values[k, col]
        return float(base + self.consts[name])

    def integral(self, name: str, t: float | None = None) -> float:
        col, k = self._col(name), self._ck(t)
        base = 0.0 if col is None else self.integrals[k, col]
        return float(base + self.consts[name] * self.times[k])

    def snapshot(self, t: float | None = None) -> Config:
        if self.snapshots is None:
            raise ValueError("run without snapshots")
        return Config(self.snapshots[self._ck(t)].copy())


def path_time_average(record: PathRecord, g: str, t: float | None = None) -> float:
    """Exact path integral of observable ``g`` from 0 to the checkpoint ``t``."""
    return record.integral(g, t)


def sample_initial(rho: float, sites: int, seed=None) -> Config:
    """I.i.d. Bernoulli(rho) occupations; ``seed`` may be an int or a Generator."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Config((rng.random(sites) < rho).astype(np.uint8))


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent counter-based stream for ``(seed, replica)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replica,))))


def advance(state: Config, p: ModelParams, dt: float, rng: np.random.Generator,
            observables: ObservableSet | None = None, checkpoints: Sequence[float] | None = None,
            snapshots: bool = False, log_capacity: int = 0) -> tuple[Config, PathRecord]:
    """Evolve a copy of ``state`` for macroscopic time ``dt``.

    ``checkpoints`` are extra times in ``[0, dt]`` at which values, integrals
    and (optionally) configurations are stored; 0 and ``dt`` are always kept.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    ring = Ring(state.occ.size)
    obs = observables if observables is not None else ObservableSet(ring.N)
    if obs.N != ring.N:
        raise ValueError("observable set built for a different ring")
    ck = np.unique(np.concatenate([[0.0, float(dt)], np.asarray(checkpoints or [], dtype=float)]))
    if ck[0] < 0 or ck[-1] > dt:
        raise ValueError("checkpoints must lie in [0, dt]")
    order, site_w, pair_tab, blk_L, blk_w = obs._arrays()
    right, left = ring.rates(p)
    rmax = float(max(right.max(), left.max()))
    occ = state.occ.copy()
    npart = len(order)
    ck_vals = np.zeros((ck.size, npart))
    ck_ints = np.zeros((ck.size, npart))
    snaps = np.zeros((ck.size if snapshots else 0, ring.N), dtype=np.uint8)
    blk_S = np.zeros((blk_L.size, ring.N), dtype=np.int64)
    log_t = np.zeros(log_capacity)
    log_b = np.zeros(log_capacity, dtype=np.int64)
    log_d = np.zeros(log_capacity, dtype=np.int8)
    events, trials, logged = _simulate(occ, right, left, rmax, float(p.n) ** 2, float(p.rho), ck, rng,
                                       site_w, pair_tab, blk_L, blk_w, blk_S,
                                       ck_vals, ck_ints, snaps, log_t, log_b, log_d)
    if log_capacity and logged > log_capacity:
        raise EventLogOverflow(f"more than {log_capacity} events")
    final = Config(occ, state.particle_count)
    rec = PathRecord(
        times=ck,
        names={name: i for i, name in enumerate(order)},
        consts={o.name: o.const for o in obs._obs.values()},
        values=ck_vals,
        integrals=ck_ints,
        initial=state.copy(),
        final=final,
        snapshots=snaps if snapshots else None,
        events=int(events),
        trials=int(trials),
        event_log=(log_t[:logged], log_b[:logged], log_d[:logged]) if log_capacity else None,
    )
    return final, rec


# ---------------------------------------------------------------------------
# replicas


@dataclass
class SimSpec:
    params: ModelParams
    t_final: float
    seed: int = 0
    lattice_factor: int = 8
    record: ObservableSet | Callable[[Ring, ModelParams], ObservableSet] | None = None
    checkpoints: Sequence[float] = field(default_factory=tuple)
    snapshots: bool = False

    def __post_init__(self):
        K = self.lattice_factor
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        if K < 4 or K % 2:
            raise ValueError("lattice factor must be even and at least 4")
        if K * self.params.n < 16:
            raise ValueError("ring must have at least 16 sites")

    @property
    def ring(self) -> Ring:
        return Ring(self.lattice_factor * self.params.n)

    def observables(self) -> ObservableSet:
        if self.record is None:
            return ObservableSet(self.ring.N)
        if isinstance(self.record, ObservableSet):
            return self.record
        return self.record(self.ring, self.params)

    def expected_events(self) -> float:
        """Upper bound on attempted swaps per replica: N n^2 t r_max."""
        return self.ring.N * self.params.n**2 * self.t_final * self.params.max_rate


def run_one(spec: SimSpec, replica: int, observables: ObservableSet | None = None) -> PathRecord:
    rng = replica_rng(spec.seed, replica)
    init = sample_initial(spec.params.rho, spec.ring.N, rng)
    obs = observables if observables is not None else spec.observables()
    _, rec = advance(init, spec.params, spec.t_final, rng, obs, spec.checkpoints, spec.snapshots)
    return rec


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_paths(spec: SimSpec, R: int, fn: Callable[[PathRecord], object], threads: int | None = None) -> list:
    """Apply ``fn`` to every replica's record; results come back in replica order."""
    if R < 1:
        raise ValueError("need at least one replica")
    obs = spec.observables()
    threads = threads or thread_count()

    def job(r):
        return fn(run_one(spec, r, obs))

    if threads == 1:
        return [job(r) for r in range(R)]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(job, range(R)))


def run_replicas(spec: SimSpec, R: int, threads: int | None = None) -> dict[str, StatSummary]:
    """StatSummary of each observable's integral over ``[0, t_final]``."""
    names = spec.observables().names
    rows = run_paths(spec, R, lambda rec: [rec.integral(nm) for nm in names], threads)
    arr = np.array(rows, dtype=float).reshape(R, len(names))
    return {nm: StatSummary.from_samples(arr[:, i]) for i, nm in enumerate(names)}
