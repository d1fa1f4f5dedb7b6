"""Synthetic and imaging experiments.

Every trial derives its random streams from ``(seed, *keys)`` only, so the
result of an experiment does not depend on the order or concurrency in
which trials run. Rows come back ordered by grid point, then algorithm.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .._rng import substream
from ..haar import haar_analysis
from ..linops import (
    ConvergenceError,
    HaarSubspace,
    MeasurementOperator,
    NoiseModel,
    SupportDFT,
    leading_singular_triple,
    random_operator,
)
from ..manifold import FactorPair
from ..objective import Objective, PenaltyParams
from ..solvers import SolverConfig, ama_solve, init_from_triple, rsd_solve, wirtinger_solve
from .imaging import blur, dilate_support, embed_centered

log = logging.getLogger(__name__)

ALGORITHMS = ("ROBB", "NCBT", "NCBB", "AMA")
KINDS = ("bench", "phase", "noise", "deblur", "check")
THREADS_ENV = "RBDECONV_THREADS"


def thread_count():
    """Worker threads for trial-level parallelism, from ``RBDECONV_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _pmap(fn, items):
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class ExperimentSpec:
    kind: str
    K: int = 100
    N: int = 100
    L: tuple = (600,)
    ratio_grid: tuple = (1.0, 1.5, 2.0, 2.5)
    snr_grid: tuple = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0)
    trials: int = 20
    seed: int = 0
    algos: tuple = ALGORITHMS
    max_iter: int = 2000

    def __post_init__(self):
        self.L = tuple(int(v) for v in np.atleast_1d(self.L))
        self.ratio_grid = tuple(float(r) for r in self.ratio_grid)
        self.snr_grid = tuple(float(s) for s in self.snr_grid)
        self.algos = tuple(self.algos)
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.K < 1 or self.N < 1 or any(v < 1 for v in self.L):
            raise ValueError("dimensions must be positive")
        if any(v < self.K for v in self.L):
            raise ValueError("L must be at least K")
        if not self.ratio_grid or any(r <= 0 for r in self.ratio_grid):
            raise ValueError("ratio grid must hold positive values")
        if any(b <= a for a, b in zip(self.ratio_grid, self.ratio_grid[1:])):
            raise ValueError("ratio grid must be strictly increasing")
        bad = [a for a in self.algos if a not in ALGORITHMS]
        if bad or not self.algos:
            raise ValueError(f"unknown algorithm(s) {bad}; choose from {ALGORITHMS}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def as_dict(self):
        return asdict(self)


# ---------------------------------------------------------------- synthetic trials


@dataclass
class Trial:
    op: MeasurementOperator
    y: np.ndarray
    truth: FactorPair
    seed: int


def trial_seed(seed, *keys):
    """A 63-bit integer seed determined by ``(seed, *keys)``."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint64)[0] >> 1)


def synthetic_trial(L, K, N, seed, snr_db=None):
    """Random operator, Gaussian ground truth and (optionally noisy) data."""
    op = random_operator(L, K, N, seed)
    rng = substream(seed, 2)
    h = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / np.sqrt(2.0)
    m = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2.0)
    y = op.forward(h, m)
    if snr_db is not None and np.isfinite(snr_db):
        y = y + NoiseModel.from_snr_db(snr_db, seed).sample(y)
    return Trial(op, y, FactorPair(h, m), seed)


def initialize(op, y, seed=0):
    """Spectral start; on power-method stagnation keep its best triple."""
    try:
        d, u, v = leading_singular_triple(op, y, seed=seed)
    except ConvergenceError as exc:
        log.info("power method stagnated, using best iterate: %s", exc)
        d, u, v = exc.best
    return init_from_triple(op, d, u, v), d


def solve(algo, trial, x0, d, config):
    op, y, truth = trial.op, trial.y, trial.truth
    L, K, N = op.L, op.K, op.N
    if algo == "ROBB":
        obj = Objective(op, y, PenaltyParams.experiment(d, L, K, N))
        return rsd_solve(obj, x0, d, config, truth=truth)
    if algo in ("NCBT", "NCBB"):
        mu = PenaltyParams.default_mu(L, K, N)
        variant = "fixed" if algo == "NCBT" else "bb"
        return wirtinger_solve(op, y, x0, d, mu, config, variant=variant, truth=truth)
    if algo == "AMA":
        return ama_solve(op, y, x0, config, truth=truth)
    raise ValueError(f"unknown algorithm {algo!r}")


def run_trial(L, K, N, seed, algos, config, snr_db=None):
    """Solve one synthetic instance with each algorithm from a shared start."""
    trial = synthetic_trial(L, K, N, seed, snr_db)
    x0, d = initialize(trial.op, trial.y, seed=seed)
    return {a: solve(a, trial, x0, d, config) for a in algos}


# ---------------------------------------------------------------- experiments


def run_bench(spec):
    """Mean operation counts and RMSE per algorithm, one row per ``(L, algorithm)``."""
    config = SolverConfig(max_iter=spec.max_iter)
    rows = []
    for li, L in enumerate(spec.L):
        seeds = [trial_seed(spec.seed, 1, li, t) for t in range(spec.trials)]
        results = _pmap(lambda s: run_trial(L, spec.K, spec.N, s, spec.algos, config), seeds)
        for algo in spec.algos:
            reps = [r[algo] for r in results]
            rows.append(
                {
                    "algorithm": algo,
                    "L": L,
                    "K": spec.K,
                    "N": spec.N,
                    "trials": spec.trials,
                    "nBh": float(np.mean([r.counters["nBh"] for r in reps])),
                    "nCm": float(np.mean([r.counters["nCm"] for r in reps])),
                    "nFFT": float(np.mean([r.counters["nFFT"] for r in reps])),
                    "RMSE": float(np.mean([r.rmse for r in reps])),
                    "unconverged": sum(r.reason != "converged" for r in reps),
                }
            )
    return rows


SUCCESS_RMSE = 1e-2


def run_phase(spec):
    """Success rate (final RMSE <= 1e-2) against ``L / (K + N)``."""
    config = SolverConfig(max_iter=spec.max_iter)
    rows = []
    for ri, ratio in enumerate(spec.ratio_grid):
        L = max(int(round(ratio * (spec.K + spec.N))), spec.K)
        seeds = [trial_seed(spec.seed, 2, ri, t) for t in range(spec.trials)]
        results = _pmap(lambda s: run_trial(L, spec.K, spec.N, s, spec.algos, config), seeds)
        for algo in spec.algos:
            wins = sum(r[algo].rmse <= SUCCESS_RMSE for r in results)
            rows.append(
                {
                    "ratio": ratio,
                    "L": L,
                    "algorithm": algo,
                    "trials": spec.trials,
                    "successes": wins,
                    "success_rate": wins / spec.trials,
                }
            )
    return rows


def run_noise(spec):
    """Mean RMSE in dB of ROBB against SNR in dB, one row per ``(L, SNR)``.

    Runs stop when the Riemannian gradient norm drops to ``1e-12`` of its
    initial value (the data misfit cannot reach a relative tolerance).
    """
    config = SolverConfig(max_iter=spec.max_iter, rel_residual_tol=None, grad_ratio_tol=1e-12)
    rows = []
    for li, L in enumerate(spec.L):
        for si, snr in enumerate(spec.snr_grid):
            seeds = [trial_seed(spec.seed, 3, li, si, t) for t in range(spec.trials)]
            results = _pmap(
                lambda s: run_trial(L, spec.K, spec.N, s, ("ROBB",), config, snr_db=snr), seeds
            )
            db = [20.0 * np.log10(r["ROBB"].rmse) for r in results]
            rows.append(
                {"L": L, "snr_db": snr, "rmse_db": float(np.mean(db)), "trials": spec.trials}
            )
    return rows


def fit_slope(x, y):
    """Least-squares slope of ``y`` against ``x``."""
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


# ---------------------------------------------------------------- deblurring


@dataclass
class ImageProblem:
    """A blurred grayscale image with a kernel stencil and wavelet budget ``N``."""

    image: np.ndarray
    kernel: np.ndarray
    N: int

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=float)
        self.kernel = np.asarray(self.kernel, dtype=float)
        if self.image.ndim != 2:
            raise ValueError("image must be 2-D")
        for n in self.image.shape:
            if n < 1 or n & (n - 1):
                raise ValueError(f"image dimensions must be powers of two, got {self.image.shape}")
        if not np.any(self.kernel):
            raise ValueError("kernel support is empty")
        if not 1 <= self.N <= self.image.size:
            raise ValueError("N must lie in [1, number of pixels]")

    @property
    def shape(self):
        return self.image.shape

    @property
    def kernel_grid(self):
        return embed_centered(self.kernel, self.shape)

    def blurred(self):
        return blur(self.image, self.kernel_grid)

    def support_mask(self, dilate=0):
        return embed_centered(dilate_support(self.kernel != 0, dilate), self.shape)


@dataclass
class DeblurResult:
    image: np.ndarray
    kernel: np.ndarray
    relres: float
    relerr: float
    energy_fraction: float
    K: int
    checkpoints: list = field(default_factory=list)
    report: object = None


def select_wavelet_indices(blurred, N):
    """Flat (column-major) indices of the ``N`` largest Haar coefficients."""
    coeffs = haar_analysis(blurred).ravel(order="F")
    order = np.argsort(-np.abs(coeffs), kind="stable")[:N]
    idx = np.sort(order)
    energy = float(np.sum(coeffs[idx] ** 2) / np.sum(coeffs**2))
    return idx, energy


def measurements(blurred):
    """``y = F(blurred) / sqrt(L)`` with the unitary 2-D DFT, column-major."""
    return np.fft.fft2(blurred, norm="ortho").ravel(order="F") / np.sqrt(blurred.size)


def estimate_images(op, x):
    """Kernel grid and image from a factor pair, phase fixed by ``sum(kernel) = 1``."""
    h, m = x.h, x.m
    c = h.sum()
    if c != 0:
        h, m = h / c, m * np.conj(c)
    kgrid = np.zeros(op.L, dtype=np.complex128)
    kgrid[op.b.support] = h
    kgrid = kgrid.reshape(op.b.shape, order="F")
    img = np.conj(op.c.synthesize(m))
    return kgrid, img


def relative_image_error(truth, estimate, blurred):
    """``||x - (||y|| / ||x_f||) x_f|| / ||x||`` for the real part ``x_f`` of the estimate."""
    xf = np.real(estimate)
    xf = xf * (np.linalg.norm(blurred) / np.linalg.norm(xf))
    return float(np.linalg.norm(truth - xf) / np.linalg.norm(truth))


def image_domain_relres(problem_blurred, op, x):
    """Relative residual recomputed by blurring the estimated image with the estimated kernel."""
    kgrid, img = estimate_images(op, x)
    scale = 1.0 / np.sqrt(op.L)
    pred = blur(img, kgrid) * scale
    target = problem_blurred * scale
    return float(np.linalg.norm(target - pred) / np.linalg.norm(target))


def deblur_operator(problem, dilate=0):
    blurred = problem.blurred()
    idx, energy = select_wavelet_indices(blurred, problem.N)
    b = SupportDFT.from_mask(problem.support_mask(dilate))
    c = HaarSubspace(problem.shape, idx)
    return MeasurementOperator(b, c), blurred, energy


def run_deblur(problem, config=None, dilate=0, seed=0, penalty=False):
    """Recover kernel and image with ROBB from the blurred image alone.

    ``config.checkpoints`` selects iterations at which ``relres`` and
    ``relerr`` are recorded. The coherence penalty is off by default: a
    nonnegative blur kernel concentrates at zero frequency, so it is as
    coherent as a vector can be, and ``d`` from the spectral start is far
    below ``||h|| ||m||`` for this operator.
    """
    cfg = config or SolverConfig(max_iter=80, rel_residual_tol=None, checkpoints=(20, 40, 60, 80))
    op, blurred, energy = deblur_operator(problem, dilate)
    y = measurements(blurred)
    x0, d = initialize(op, y, seed=seed)
    params = PenaltyParams.experiment(d, op.L, op.K, op.N) if penalty else None
    report = rsd_solve(Objective(op, y, params), x0, d, cfg)
    checkpoints = []
    for k in sorted(report.checkpoints):
        xk, rel, counts = report.checkpoints[k]
        _, img = estimate_images(op, xk)
        checkpoints.append(
            {
                "iteration": k,
                "relres": float(rel),
                "relerr": relative_image_error(problem.image, img, blurred),
                **counts,
            }
        )
    kgrid, img = estimate_images(op, report.x)
    return DeblurResult(
        image=np.real(img),
        kernel=np.real(kgrid),
        relres=float(report.rel_residual),
        relerr=relative_image_error(problem.image, img, blurred),
        energy_fraction=energy,
        K=op.K,
        checkpoints=checkpoints,
        report=report,
    )
