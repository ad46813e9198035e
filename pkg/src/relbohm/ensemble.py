"""Ensembles distributed as |Psi|^2 over the 4n-dimensional box, and an
empirical check that the nonlocal flow preserves that distribution."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .currents import VelocityField
from .dynamics import FLOW_EXITED, FLOW_NODE, FLOW_OK, flow_nonlocal
from .wavefunction import MultiParticleWaveFunction, density, spacetime_normalization_N

COORD_NAMES = ("t", "x", "y", "z")

#: Largest tolerated fraction of ensemble members lost at the box boundary.
MAX_DROP_FRACTION = 0.2


class NormalizationError(ValueError):
    pass


class ChainStuckError(RuntimeError):
    pass


class InconclusiveError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    """Random-walk Metropolis settings.

    ``proposal_scale`` is the Gaussian step per coordinate as a fraction of
    the box extent (T for time, L for space).  ``n_chains`` independent
    chains run side by side; the default of one chain per sample gives
    independent draws.
    """

    n_samples: int
    burn_in: int = 400
    thinning: int = 1
    proposal_scale: float = 0.1
    seed: int = 0
    n_chains: int | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.n_chains is not None and not 1 <= self.n_chains <= self.n_samples:
            raise ValueError("n_chains must lie in [1, n_samples]")


def _check_normalized(wf: MultiParticleWaveFunction, tol: float = 1e-8):
    N = spacetime_normalization_N(wf)
    if abs(N - 1.0) > tol:
        raise NormalizationError(f"state is not spacetime-normalized (N = {N:.12g})")


def sample_initial(wf: MultiParticleWaveFunction, config: SamplerConfig) -> np.ndarray:
    """Draw ``config.n_samples`` configurations (n_samples, n, 4) from |Psi|^2.

    Time coordinates are confined to the box (proposals outside are
    rejected); spatial coordinates live on the torus of period L.
    """
    _check_normalized(wf)
    box = wf.box
    rng = np.random.default_rng(config.seed)
    chains = config.n_chains or config.n_samples
    per_chain = -(-config.n_samples // chains)
    shape = (chains, wf.n, 4)

    X = box.lower + rng.random(shape) * box.extent
    rho = density(wf, X)
    step = config.proposal_scale * box.extent
    recorded = []
    accepted = 0
    n_steps = config.burn_in + config.thinning * per_chain
    for i in range(1, n_steps + 1):
        prop = box.wrap(X + step * rng.standard_normal(shape))
        rho_prop = density(wf, prop)
        inside = np.all(box.contains_time(prop[..., 0]), axis=-1)
        accept = inside & (rng.random(chains) * rho < rho_prop)
        X[accept] = prop[accept]
        rho[accept] = rho_prop[accept]
        accepted += int(accept.sum())
        if i > config.burn_in and (i - config.burn_in) % config.thinning == 0:
            recorded.append(X.copy())

    rate = accepted / (n_steps * chains)
    if rate < 0.01:
        raise ChainStuckError(f"acceptance rate {rate:.4f} below 1%; reduce proposal_scale")
    return np.concatenate(recorded)[: config.n_samples]


@dataclass
class PushForwardResult:
    configurations: np.ndarray  # all members, frozen where dropped
    status: np.ndarray

    @property
    def survived(self) -> np.ndarray:
        return self.status == FLOW_OK

    @property
    def survivors(self) -> np.ndarray:
        return self.configurations[self.survived]

    @property
    def n_dropped(self) -> int:
        return int(np.count_nonzero(~self.survived))

    @property
    def node_drops(self) -> int:
        return int(np.count_nonzero(self.status == FLOW_NODE))

    @property
    def exit_drops(self) -> int:
        return int(np.count_nonzero(self.status == FLOW_EXITED))

    @property
    def drop_fraction(self) -> float:
        return self.n_dropped / len(self.status)


def push_forward(
    wf: MultiParticleWaveFunction,
    samples,
    s: float,
    ds: float,
    velocity: VelocityField | None = None,
) -> PushForwardResult:
    """Advance every member by ``s`` along the nonlocal flow; members that
    hit a node or leave the box are flagged as dropped."""
    X, status = flow_nonlocal(wf, samples, s, ds, velocity)
    return PushForwardResult(wf.box.wrap(X), status)


@dataclass
class KSEntry:
    label: str
    statistic: float
    threshold: float
    passed: bool


@dataclass
class MomentEntry:
    label: str
    sampled: float
    reference: float
    tolerance: float
    passed: bool


@dataclass
class DistributionReport:
    ks: list[KSEntry] = field(default_factory=list)
    moments: list[MomentEntry] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.ks) and all(e.passed for e in self.moments)

    def to_text(self) -> str:
        """Key-value records, one ``[[ks]]`` / ``[[moment]]`` block per entry."""
        lines = ["[report]", f"passed = {_fmt(self.passed)}"]
        lines += [f"{k} = {_fmt(v)}" for k, v in self.info.items()]
        for e in self.ks:
            lines += ["", "[[ks]]", f'coordinate = "{e.label}"', f"statistic = {_fmt(e.statistic)}",
                      f"threshold = {_fmt(e.threshold)}", f"passed = {_fmt(e.passed)}"]
        for e in self.moments:
            lines += ["", "[[moment]]", f'label = "{e.label}"', f"sampled = {_fmt(e.sampled)}",
                      f"reference = {_fmt(e.reference)}", f"tolerance = {_fmt(e.tolerance)}",
                      f"passed = {_fmt(e.passed)}"]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return f'"{v}"'


def coordinate_labels(n: int) -> list[str]:
    return [f"{c}{a + 1}" for a in range(n) for c in COORD_NAMES]


def weighted_ks(sample: np.ndarray, ref_values: np.ndarray, ref_weights: np.ndarray) -> float:
    """sup |F_sample - F_ref| with F_ref the weighted empirical CDF."""
    order = np.argsort(ref_values)
    ref_sorted = ref_values[order]
    cdf = np.cumsum(ref_weights[order])
    cdf /= cdf[-1]
    x = np.sort(sample)
    m = len(x)
    pos = np.searchsorted(ref_sorted, x, side="right")
    F = np.where(pos > 0, cdf[np.maximum(pos - 1, 0)], 0.0)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def reference_points(wf: MultiParticleWaveFunction, size_log2: int, seed: int):
    """Scrambled Sobol points filling the 4n-box, with |Psi|^2 weights."""
    box = wf.box
    d = 4 * wf.n
    sobol = qmc.Sobol(d=d, scramble=True, seed=np.random.default_rng(seed))
    u = sobol.random_base2(size_log2).reshape(-1, wf.n, 4)
    Y = box.lower + u * box.extent
    return Y, density(wf, Y)


def equivariance_test(
    wf: MultiParticleWaveFunction,
    sampler: SamplerConfig,
    s: float,
    ds: float | None = None,
    reference_log2: int = 17,
) -> DistributionReport:
    """Sample |Psi|^2, push the ensemble forward by ``s`` and compare it with
    |Psi|^2 restricted to the region the flow can reach from the box.

    The reference is a weighted Sobol set; its members are kept when the
    backward flow by ``s`` stays inside the box.  Each coordinate gets a KS
    entry at the asymptotic 95% critical value 1.36 / sqrt(m) and mean and
    variance entries at 4 standard errors.
    """
    if ds is None:
        ds = s / 20 if s > 0 else 1.0
    vf = VelocityField(wf)
    samples = sample_initial(wf, sampler)
    pushed = push_forward(wf, samples, s, ds, vf)
    if pushed.node_drops:
        raise InconclusiveError(f"{pushed.node_drops} members met a node; the flow is not node-free")
    if pushed.drop_fraction > MAX_DROP_FRACTION:
        raise InconclusiveError(
            f"drop fraction {pushed.drop_fraction:.3f} exceeds {MAX_DROP_FRACTION}; use a smaller s"
        )

    Y, w = reference_points(wf, reference_log2, sampler.seed + 1)
    _, back = flow_nonlocal(wf, Y, s, ds, vf, backward=True)
    keep = back == FLOW_OK
    Y, w = Y[keep], w[keep]

    S = pushed.survivors
    m = len(S)
    report = DistributionReport(info={
        "n_samples": sampler.n_samples,
        "survivors": m,
        "dropped": pushed.n_dropped,
        "drop_fraction": pushed.drop_fraction,
        "s": float(s),
        "ds": float(ds),
        "seed": sampler.seed,
        "reference_points": len(Y),
    })
    threshold = 1.36 / np.sqrt(m)
    wn = w / w.sum()
    for label, col in zip(coordinate_labels(wf.n), range(4 * wf.n)):
        a, mu = divmod(col, 4)
        xs = S[:, a, mu]
        ys = Y[:, a, mu]
        stat = weighted_ks(xs, ys, w)
        report.ks.append(KSEntry(label, stat, threshold, stat < threshold))

        mean = float(np.sum(wn * ys))
        c = ys - mean
        var = float(np.sum(wn * c**2))
        mu4 = float(np.sum(wn * c**4))
        tol_mean = 4 * np.sqrt(var / m)
        tol_var = 4 * np.sqrt(max(mu4 - var**2, 0.0) / m)
        s_mean = float(xs.mean())
        s_var = float(xs.var())
        report.moments.append(MomentEntry(f"mean_{label}", s_mean, mean, tol_mean, abs(s_mean - mean) <= tol_mean))
        report.moments.append(MomentEntry(f"var_{label}", s_var, var, tol_var, abs(s_var - var) <= tol_var))
    return report
