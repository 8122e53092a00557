"""Expected signature matching: empirical moments, polynomial systems, roots and trials."""
import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .driving_moments import (
    driver_increments,
    expected_signature_bm_time,
    num_grid_steps,
)
from .mpoly import PolySystem
from .picard_poly import picard_table, q_bound
from .sde_model import (
    DEFAULT_NORM_CAP,
    SampleBatch,
    Theta,
    simulate_batch,
    simulate_driven,
)
from .shuffle_algebra import check_word, format_word, word_index
from .signatures import batch_signatures

log = logging.getLogger(__name__)


class NoRootsError(RuntimeError):
    """The solver found no real root."""


class AbortThresholdError(RuntimeError):
    """Too many trajectories hit the norm cap."""


@dataclass
class SolverConfig:
    starts: int = 200
    box: float = 10.0
    tol: float = 1e-10
    max_iter: int = 100
    dedup: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.starts < 0 or self.max_iter < 1:
            raise ValueError("starts must be >= 0 and max_iter >= 1")
        if self.box <= 0 or self.tol <= 0 or self.dedup <= 0:
            raise ValueError("box, tol and dedup must be positive")


@dataclass
class EstimationConfig:
    words: list
    r: int = 3
    N: int = 2000
    T: float = 0.2
    dt: float = 0.001
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    scheme: str = "heun"
    cap: float = DEFAULT_NORM_CAP
    max_abort_fraction: float = 0.05

    def __post_init__(self):
        self.words = [tuple(int(a) for a in w) for w in self.words]
        if not self.words:
            raise ValueError("need at least one word")
        if len(set(self.words)) != len(self.words):
            raise ValueError("words must be distinct")
        if self.r < 1 or self.N < 1:
            raise ValueError("r and N must be >= 1")
        num_grid_steps(self.T, self.dt)

    @property
    def level(self):
        """Signature level the observed paths are lifted to."""
        return max(len(w) for w in self.words)

    def check(self, theta):
        if len(self.words) != theta.num_unknowns:
            raise ValueError(f"{len(self.words)} words for {theta.num_unknowns} unknowns")
        for w in self.words:
            check_word(w, theta.width)
            if len(w) > theta.q:
                raise ValueError(f"word {format_word(w)} longer than q={theta.q}")


# ---------------------------------------------------------------- moments

def _paths_of(trajectories):
    if isinstance(trajectories, SampleBatch):
        return trajectories.good_paths()
    if isinstance(trajectories, np.ndarray):
        return trajectories
    trajectories = list(trajectories)
    good = [t for t in trajectories if not t.aborted]
    if good and any(len(t.grid) != len(good[0].grid) or not np.allclose(t.grid, good[0].grid)
                    for t in good):
        raise ValueError("trajectories must share a time grid")
    return np.array([t.path for t in good]) if good else np.empty((0, 0, 0))


def empirical_sample(trajectories, words, q):
    """Per-path signature coefficients (N, d) of the observed level-1 paths."""
    paths = _paths_of(trajectories)
    if paths.shape[0] == 0:
        raise ValueError("empty sample set")
    width = paths.shape[2]
    idx = []
    for w in words:
        w = check_word(w, width)
        if len(w) > q:
            raise ValueError(f"word {format_word(w)} longer than q={q}")
        idx.append(word_index(w, width))
    sig = batch_signatures(paths, q)
    return sig[:, idx]


def empirical_moments(trajectories, words, q):
    """Sample mean of the signature coefficients at ``words`` (aborted paths excluded)."""
    return empirical_sample(trajectories, words, q).mean(axis=0)


# ---------------------------------------------------------------- system

def assemble_system(config, moments_emp, theta, driving_moments):
    """d polynomials P_r^{I_k}(theta) - moments_emp[k] in the unknowns."""
    config.check(theta)
    moments_emp = np.asarray(moments_emp, dtype=float)
    if moments_emp.shape != (len(config.words),):
        raise ValueError("one empirical moment per word expected")
    return [p - float(c) for p, c in zip(model_polys(config, theta, driving_moments), moments_emp)]


def model_polys(config, theta, driving_moments):
    """P_r^{I_k}(theta) without the data term."""
    table = picard_table(theta)
    return [table.moment_poly(config.r, w, driving_moments) for w in config.words]


@dataclass
class RootSet:
    """Distinct real roots (sorted by residual) plus start statistics."""

    points: np.ndarray
    residuals: np.ndarray
    converged: int
    starts: int

    @property
    def flagged(self):
        """More than 20% of converged starts land on distinct roots."""
        return self.converged > 0 and len(self.points) > 0.2 * self.converged

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, k):
        return self.points[k]


def _newton(system, X, tol, max_iter):
    X = X.copy()
    active = np.ones(len(X), dtype=bool)
    done = np.zeros(len(X), dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            if not active.any():
                break
            xa = X[active]
            F = system.residual(xa)
            J = system.jacobian(xa)
            # pinv keeps singular Jacobians from aborting the whole batch
            step = -np.einsum("sij,sj->si", np.linalg.pinv(J), F)
            xa = xa + step
            X[active] = xa
            ok = np.isfinite(xa).all(axis=1)
            small = ok & (np.abs(step).max(axis=1) < tol)
            ids = np.flatnonzero(active)
            done[ids[small]] = True
            active[ids[small | ~ok]] = False
    return X, done


def solve_system(polys, solver=None):
    """Real roots by Newton multistart from the origin and ``starts`` uniform points in the box."""
    solver = solver or SolverConfig()
    system = polys if isinstance(polys, PolySystem) else PolySystem(polys)
    d = system.nvars
    if len(system) != d:
        raise ValueError(f"system is not square: {len(system)} equations, {d} unknowns")
    rng = np.random.default_rng(solver.seed)
    X0 = np.vstack([np.zeros((1, d)), rng.uniform(-solver.box, solver.box, (solver.starts, d))])
    X, done = _newton(system, X0, solver.tol, solver.max_iter)
    X = X[done]
    with np.errstate(all="ignore"):
        res = np.abs(system.residual(X)).max(axis=1) if len(X) else np.zeros(0)
    keep = np.isfinite(res) & (res <= 10 * solver.tol)
    X, res = X[keep], res[keep]
    order = np.argsort(res, kind="stable")
    roots, resid = [], []
    for k in order:
        if all(np.abs(X[k] - r).max() > solver.dedup for r in roots):
            roots.append(X[k])
            resid.append(res[k])
    out = RootSet(np.array(roots).reshape(len(roots), d), np.array(resid), int(len(X)), len(X0))
    if not len(out):
        log.warning("no real root found from %d starts", len(X0))
    elif out.flagged:
        log.warning("%d distinct roots from %d converged starts; root list may be incomplete",
                    len(out), out.converged)
    return out


def select_estimate(roots, theta_ref):
    """Root closest to ``theta_ref`` in L1; ties by residual, then lexicographically."""
    if isinstance(roots, RootSet):
        points, resid = roots.points, roots.residuals
    else:
        points = np.atleast_2d(np.asarray(roots, dtype=float)) if len(roots) else np.zeros((0, 0))
        resid = np.zeros(len(points))
    if len(points) == 0:
        raise ValueError("empty root list")
    ref = np.asarray(theta_ref, dtype=float)
    dist = np.abs(points - ref).sum(axis=1)
    best = min(range(len(points)), key=lambda k: (dist[k], resid[k], tuple(points[k])))
    return points[best]


def mirror(point, theta):
    """Negate the diffusion-only unknowns."""
    out = np.array(point, dtype=float)
    out[theta.diffusion_unknowns()] *= -1.0
    return out


# ---------------------------------------------------------------- experiments

@dataclass
class EstimationReport:
    words: list
    moments: np.ndarray          # (trials, d) empirical moments
    roots: list                  # RootSet per trial
    estimates: np.ndarray        # (trials, d), NaN rows for trials without roots
    aborted: np.ndarray          # aborted trajectories per trial
    theta_true: np.ndarray = None

    @property
    def empty_trials(self):
        return [t for t, rs in enumerate(self.roots) if not len(rs)]

    @property
    def flagged_trials(self):
        return [t for t, rs in enumerate(self.roots) if rs.flagged]

    def _good(self):
        return self.estimates[~np.isnan(self.estimates).any(axis=1)]

    @property
    def mean(self):
        good = self._good()
        return good.mean(axis=0) if len(good) else np.full(self.estimates.shape[1], np.nan)

    @property
    def std(self):
        good = self._good()
        if len(good) < 2:
            return np.full(self.estimates.shape[1], np.nan)
        return good.std(axis=0, ddof=1)

    def write_csv(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        d = self.estimates.shape[1]
        names = [f"theta{k + 1}" for k in range(d)]
        with open(os.path.join(out_dir, "roots.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "root_id", *names, "residual", "selected"])
            for t, rs in enumerate(self.roots):
                for k, (p, res) in enumerate(zip(rs.points, rs.residuals)):
                    sel = int(np.array_equal(p, self.estimates[t]))
                    w.writerow([t, k, *(repr(float(x)) for x in p), repr(float(res)), sel])
        with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "true", "mean", "std"])
            true = self.theta_true if self.theta_true is not None else [np.nan] * d
            for k in range(d):
                w.writerow([names[k], repr(float(true[k])), repr(float(self.mean[k])),
                            repr(float(self.std[k]))])
            w.writerow(["trials_without_roots", len(self.empty_trials), "", ""])
            w.writerow(["aborted_trajectories", int(self.aborted.sum()), "", ""])
        with open(os.path.join(out_dir, "moments.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "word", "empirical"])
            for t in range(len(self.moments)):
                for word, v in zip(self.words, self.moments[t]):
                    w.writerow([t, format_word(word), repr(float(v))])


def run_trial(config, theta, theta_true, base_polys, trial):
    """One trial: simulate, match moments, solve.  Returns (moments, roots, aborted)."""
    batch = simulate_batch(theta, config.T, config.dt, config.N, config.seed, values=theta_true,
                           trial=trial, scheme=config.scheme, cap=config.cap)
    if batch.num_aborted > config.max_abort_fraction * config.N:
        raise AbortThresholdError(
            f"trial {trial}: {batch.num_aborted} of {config.N} trajectories aborted")
    mom = empirical_moments(batch, config.words, config.level)
    roots = solve_system([p - float(c) for p, c in zip(base_polys, mom)], config.solver)
    return mom, roots, batch.num_aborted


def run_experiment(config, theta, theta_true, trials):
    """Repeat simulate / match / solve / select ``trials`` times.

    ``theta`` carries the unknowns; ``theta_true`` binds them for simulation and
    is the reference for root selection.
    """
    config.check(theta)
    theta_true = np.asarray(theta_true, dtype=float)
    level = max(q_bound(config.r, len(w)) for w in config.words)
    drv = expected_signature_bm_time(theta.n, config.T, level)
    base = model_polys(config, theta, drv)
    d = len(config.words)
    moments = np.zeros((trials, d))
    estimates = np.full((trials, d), np.nan)
    aborted = np.zeros(trials, dtype=int)
    roots = []
    for t in range(trials):
        mom, rs, ab = run_trial(config, theta, theta_true, base, t)
        moments[t], aborted[t] = mom, ab
        roots.append(rs)
        if len(rs):
            estimates[t] = select_estimate(rs, theta_true)
        log.info("trial %d: %d roots, estimate %s", t, len(rs), estimates[t])
    report = EstimationReport(list(config.words), moments, roots, estimates, aborted, theta_true)
    if report.empty_trials:
        log.warning("%d trials without real roots excluded from aggregates",
                    len(report.empty_trials))
    return report


# ---------------------------------------------------------------- non-identifiability

def nonident_thetas():
    """The two parameter matrices (m=3, n=2, q=2) whose solutions agree for small drivers."""
    a = Theta(3, 2, 2)
    a.add_term(1, 0, (1,), 1.0).add_term(1, 1, (), 1.0)
    a.add_term(2, 0, (2,), -1.0).add_term(2, 2, (), 1.0)
    a.add_term(3, 0, (1, 2), -1.0).add_term(3, 0, (2, 1), -1.0)
    a.add_term(3, 1, (2,), -0.5).add_term(3, 2, (1,), 0.5)
    b = a.bound()
    for i in (1, 2, 3):
        b.add_term(i, 0, (1, 2), 0.5).add_term(i, 0, (2, 1), -0.5).add_term(i, 0, (3,), -1.0)
    return a, b


@dataclass
class NonIdentResult:
    grid: np.ndarray
    path_a: np.ndarray
    path_b: np.ndarray
    distance: float


def nonident_demo(T, dt=0.001, seed=0, index=0, identical=False):
    """Drive both systems with one Brownian draw (explicit midpoint) and compare at T."""
    a, b = nonident_thetas()
    if identical:
        b = a
    steps = num_grid_steps(T, dt)
    dx = driver_increments(2, steps, dt, seed, [index])
    pa = simulate_driven(a, dx, scheme="midpoint")[0][0]
    pb = simulate_driven(b, dx, scheme="midpoint")[0][0]
    dist = float(np.linalg.norm(pa[-1, 1:] - pb[-1, 1:]))
    return NonIdentResult(np.arange(steps + 1) * dt, pa, pb, dist)
