"""Recursive evaluation of a trained probe and the error-compounding simulator."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .embed import DivergenceError, ProbeParams, loss_batch, probe_forward

MAX_N = 20
BASELINE_EPS = 1e-12


class ConfigError(ValueError):
    pass


def recursive_rollout(p: ProbeParams, z0, actions) -> list[np.ndarray]:
    """Predictions ``z_1 .. z_N`` obtained by feeding the probe its own output.

    Only the starting embedding is observed; intermediate frames never are.
    """
    if len(actions) > MAX_N:
        raise ValueError(f"rollouts are limited to {MAX_N} steps")
    z = np.asarray(z0, dtype=np.float64)
    out = []
    for t, a in enumerate(actions, 1):
        with np.errstate(over="ignore", invalid="ignore"):
            z = probe_forward(p, z, int(a))
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"rollout diverged at step {t}", step=t)
        out.append(z)
    return out


@dataclass
class StepStat:
    n: int
    count: int
    mean_loss: float | None
    baseline_loss: float | None
    ratio: float | None
    ratio_excluded: bool = False


@dataclass
class EvalReport:
    per_step: list
    collapse_step: int | None
    growth_rate: float | None
    metadata: dict = field(default_factory=dict)

    def step(self, n: int) -> StepStat:
        for s in self.per_step:
            if s.n == n:
                return s
        raise KeyError(n)

    def auc(self) -> float:
        return float(sum(s.mean_loss for s in self.per_step if s.mean_loss is not None))

    def to_json(self) -> dict:
        return {
            "metadata": self.metadata,
            "collapse_step": self.collapse_step,
            "growth_rate": self.growth_rate,
            "per_step": [asdict(s) for s in self.per_step],
        }

    @classmethod
    def from_json(cls, d: dict) -> "EvalReport":
        return cls([StepStat(**s) for s in d["per_step"]], d["collapse_step"], d["growth_rate"], d["metadata"])

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "EvalReport":
        return cls.from_json(json.loads(Path(path).read_text()))

    def csv_rows(self) -> list[list]:
        level = self.metadata.get("level", "")
        loss_kind = self.metadata.get("loss_kind", "")
        return [[level, loss_kind, s.n, s.mean_loss, s.baseline_loss, s.ratio] for s in self.per_step]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "loss", "N", "mean_loss", "baseline", "ratio"])
        for row in self.csv_rows():
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
        return buf.getvalue()


def collapse_step(per_step) -> int | None:
    """First N whose (non-excluded) ratio reaches 1.0."""
    for s in sorted(per_step, key=lambda s: s.n):
        if s.ratio is not None and s.ratio >= 1.0:
            return s.n
    return None


def growth_rate(per_step) -> float | None:
    """Least-squares slope of mean loss against N."""
    pts = [(s.n, s.mean_loss) for s in per_step if s.mean_loss is not None]
    if len(pts) < 2:
        return None
    n, y = np.array(pts, dtype=float).T
    return float(np.polyfit(n, y, 1)[0])


def summarize(n_values, losses, baselines, metadata=None) -> EvalReport:
    """Build a report from per-sample losses keyed by step ``n``.

    ``losses[n]`` and ``baselines[n]`` are lists of per-sample values (invalid
    samples already dropped).  Empty buckets are reported as missing.
    """
    per_step = []
    for n in n_values:
        ls, bs = losses.get(n, []), baselines.get(n, [])
        mean = float(np.mean(ls)) if ls else None
        base = float(np.mean(bs)) if bs else None
        excluded = base is not None and base < BASELINE_EPS
        ratio = mean / base if mean is not None and base is not None and not excluded else None
        per_step.append(StepStat(n, len(ls), mean, base, ratio, excluded))
    return EvalReport(per_step, collapse_step(per_step), growth_rate(per_step), dict(metadata or {}))


def evaluate_sequences(p: ProbeParams, sequences, loss_kind: str, max_n: int = MAX_N, metadata=None) -> EvalReport:
    """Evaluate recursive rollouts on encoded test trajectories.

    Each item of ``sequences`` is ``(embeddings, actions)`` where
    ``embeddings[k]`` encodes the frame after ``k`` actions.  For each step N
    the rollout loss ``loss(z_hat_N, z_N)`` and the identity baseline
    ``loss(z_0, z_N)`` are averaged over the test set.
    """
    losses: dict = {}
    baselines: dict = {}
    skipped = 0
    for embeddings, actions in sequences:
        embeddings = np.asarray(embeddings, dtype=np.float64)
        steps = min(len(actions), max_n)
        if steps == 0:
            continue
        preds = np.array(recursive_rollout(p, embeddings[0], actions[:steps]))
        targets = embeddings[1 : steps + 1]
        start = np.repeat(embeddings[:1], steps, axis=0)
        lv, _, lvalid = loss_batch(loss_kind, preds, targets)
        bv, _, bvalid = loss_batch(loss_kind, start, targets)
        for k in range(steps):
            if lvalid[k]:
                losses.setdefault(k + 1, []).append(float(lv[k]))
            else:
                skipped += 1
            if bvalid[k]:
                baselines.setdefault(k + 1, []).append(float(bv[k]))
    meta = dict(metadata or {})
    meta.update({"loss_kind": loss_kind, "degenerate_samples": skipped})
    return summarize(range(1, max_n + 1), losses, baselines, meta)


@dataclass
class CompoundingResult:
    epsilon: float
    noise: str
    mean: np.ndarray  # mean relative divergence after steps 1..N
    std: np.ndarray
    trials: int

    def closed_form(self) -> np.ndarray:
        n = np.arange(1, len(self.mean) + 1)
        return (1.0 + self.epsilon) ** n - 1.0


def compounding_sim(epsilon: float, n_steps: int, generators, trials: int = 10_000, seed: int = 0,
                    noise: str = "multiplicative") -> CompoundingResult:
    """Relative drift of a perturbed iterated product from the exact one.

    Each trial draws a random word over ``generators`` and multiplies the
    exact matrices and perturbed copies ``g + delta`` in parallel.  Noise
    models for ``delta``:

    * ``multiplicative``: ``g * u`` elementwise, ``u ~ U[-1, 1]``, rescaled to
      Frobenius norm ``epsilon * |g|``;
    * ``additive``: ``u`` itself, rescaled the same way;
    * ``systematic``: ``epsilon * g`` (deterministic; drift is exactly
      ``(1 + epsilon)**t - 1``).

    Drift after ``t`` steps is ``|P_t - M_t|_F / |M_t|_F``.
    """
    if not 0.0 <= epsilon < 0.5:
        raise ValueError("epsilon must lie in [0, 0.5)")
    if not 1 <= n_steps <= 100:
        raise ValueError("n_steps must lie in [1, 100]")
    if noise not in ("multiplicative", "additive", "systematic"):
        raise ValueError(f"unknown noise model {noise!r}")
    gens = np.array([g.entries if hasattr(g, "entries") else np.atleast_2d(g) for g in generators], dtype=np.float64)
    d = gens.shape[1]
    rng = np.random.default_rng(seed)
    exact = np.broadcast_to(np.eye(d), (trials, d, d)).copy()
    pert = exact.copy()
    mean = np.empty(n_steps)
    std = np.empty(n_steps)
    gnorm = np.linalg.norm(gens, axis=(1, 2))
    for t in range(n_steps):
        idx = rng.integers(0, len(gens), size=trials)
        g = gens[idx]
        if noise == "systematic":
            delta = epsilon * g
        else:
            u = rng.uniform(-1.0, 1.0, size=(trials, d, d))
            delta = g * u if noise == "multiplicative" else u
            dn = np.linalg.norm(delta, axis=(1, 2))
            delta *= (epsilon * gnorm[idx] / np.where(dn > 0, dn, 1.0))[:, None, None]
        exact = g @ exact
        pert = (g + delta) @ pert
        div = np.linalg.norm(pert - exact, axis=(1, 2)) / np.linalg.norm(exact, axis=(1, 2))
        mean[t] = div.mean()
        std[t] = div.std()
    return CompoundingResult(epsilon, noise, mean, std, trials)


SETTING_KEYS = ("encoder", "loss_kind", "seed", "train")


def compare_levels(reports: dict) -> dict:
    """Order levels by loss-curve area and compare them pairwise.

    ``reports`` maps level to ``EvalReport``; all reports must share encoder,
    loss, seed and training settings.
    """
    if not reports:
        raise ConfigError("no reports to compare")
    levels = sorted(reports)
    ref = reports[levels[0]].metadata
    for lvl in levels[1:]:
        meta = reports[lvl].metadata
        for key in SETTING_KEYS:
            if meta.get(key) != ref.get(key):
                raise ConfigError(f"level {lvl} differs from level {levels[0]} in {key!r}")
    auc = {lvl: reports[lvl].auc() for lvl in levels}

    def ratio_at(a, b, n):
        try:
            la, lb = reports[a].step(n).mean_loss, reports[b].step(n).mean_loss
        except KeyError:
            return None
        if la is None or lb is None or lb == 0:
            return None
        return la / lb

    pairwise = {}
    for lo, hi in combinations(levels, 2):
        pairwise[f"L{hi}/L{lo}"] = {
            "auc": auc[hi] / auc[lo] if auc[lo] else None,
            "N10": ratio_at(hi, lo, 10),
            "N20": ratio_at(hi, lo, 20),
        }
    return {
        "settings": {k: ref.get(k) for k in SETTING_KEYS},
        "auc": {f"L{lvl}": auc[lvl] for lvl in levels},
        "ordering": [f"L{lvl}" for lvl in sorted(levels, key=lambda l: -auc[l])],
        "pairwise": pairwise,
        "collapse_step": {f"L{lvl}": reports[lvl].collapse_step for lvl in levels},
        "growth_rate": {f"L{lvl}": reports[lvl].growth_rate for lvl in levels},
    }
