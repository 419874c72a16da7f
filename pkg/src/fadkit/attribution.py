"""Feature attribution for dense classifiers.

Two methods against a shared "feature absent" baseline:

* integrated gradients — midpoint-rule path integral of input gradients
  along the straight line from the baseline to the instance;
* Shapley values — marginal contributions over coalitions, where a
  coalition's value is the model output on a composite that takes present
  features from the instance and absent ones from the baseline. Exact
  enumeration up to EXACT_ENUMERATION_LIMIT features, permutation sampling
  beyond that.

Both default to attributing the softmax probability of the target class;
pass target="logit" (or build the network with that gradient target) to
attribute the raw logit instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import nncore
from .errors import ConfigError, ShapeError

EXACT_ENUMERATION_LIMIT = 15
IG_DEFAULT_STEPS = 64
SAMPLING_CHUNK = 512

METHOD_IG = "IG"
METHOD_SHAPLEY_EXACT = "Shapley-exact"
METHOD_SHAPLEY_SAMPLED = "Shapley-sampled"

BASELINE_POLICIES = ("mean", "zero", "custom")


@dataclass
class BaselineVector:
    """Per-feature stand-in values representing an absent feature."""

    values: np.ndarray
    policies: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.policies = tuple(self.policies)
        if self.values.ndim != 1:
            raise ShapeError("baseline must be a vector")
        if len(self.policies) != self.values.shape[0]:
            raise ShapeError("one policy tag per feature required")
        if any(p not in BASELINE_POLICIES for p in self.policies):
            raise ConfigError(f"policies must be one of {BASELINE_POLICIES}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("baseline values must be finite")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def make_baseline(training_data, feature_kinds, override=None) -> BaselineVector:
    """Training mean for continuous features, 0 for binary indicators.

    ``override``, when given, is used verbatim and tagged custom.
    """
    data = np.asarray(training_data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ConfigError("training data must be a nonempty (n, d) matrix")
    kinds = tuple(feature_kinds)
    if len(kinds) != data.shape[1]:
        raise ShapeError("one feature kind per column required")
    if any(k not in ("continuous", "binary") for k in kinds):
        raise ConfigError("feature kinds must be 'continuous' or 'binary'")
    if override is not None:
        values = np.asarray(override, dtype=float)
        if values.shape != (data.shape[1],):
            raise ShapeError("override length must match the feature count")
        return BaselineVector(values, ("custom",) * data.shape[1])
    means = data.mean(axis=0)
    values = np.where([k == "continuous" for k in kinds], means, 0.0)
    return BaselineVector(values, tuple("mean" if k == "continuous" else "zero"
                                        for k in kinds))


@dataclass
class AttributionVector:
    """Signed per-feature scores for one instance and one target class."""

    scores: np.ndarray
    target_class: int
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.ndim != 1:
            raise ShapeError("scores must be a vector")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("attribution scores must be finite")

    @property
    def dim(self) -> int:
        return self.scores.shape[0]


@dataclass
class ImportanceRanking:
    """Feature indices in descending |score| order."""

    order: np.ndarray
    tie_break: str = "feature-index"

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=int)


def importance_ranking(attr: AttributionVector) -> ImportanceRanking:
    """Stable sort by |score| descending; ties break toward the lower index."""
    magnitude = np.abs(attr.scores)
    order = np.lexsort((np.arange(magnitude.size), -magnitude))
    return ImportanceRanking(order=order)


def rank_scores(scores) -> ImportanceRanking:
    """importance_ranking for a bare score vector."""
    return importance_ranking(
        AttributionVector(np.asarray(scores, dtype=float), 0, "raw")
    )


def _check_dims(net, x, baseline):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("attribution explains a single instance vector")
    if x.shape[0] != baseline.dim:
        raise ShapeError("instance and baseline dims must agree")
    if isinstance(net, nncore.DenseNetwork) and x.shape[0] != net.input_dim:
        raise ShapeError("instance, baseline, and network dims must agree")
    if not np.all(np.isfinite(x)):
        raise ValueError("instance must be finite")
    return x


def _check_class(net, target_class):
    if isinstance(net, nncore.DenseNetwork):
        if not 0 <= target_class < net.class_count:
            raise IndexError(f"class index {target_class} out of range")


def _target_outputs(net, batch, target_class, mode):
    """Target-class model output per row. ``net`` is a DenseNetwork or, for
    the Shapley value functions, any callable mapping (n, d) to (n,) scores."""
    if isinstance(net, nncore.DenseNetwork):
        if mode == "logit":
            return nncore.logits(net, batch)[:, target_class]
        return nncore.forward(net, batch)[:, target_class]
    return np.asarray(net(batch), dtype=float).reshape(batch.shape[0])


def _resolve_mode(net, target):
    mode = getattr(net, "gradient_target", "probability") if target is None \
        else target
    if mode not in nncore.GRADIENT_TARGETS:
        raise ConfigError(f"unknown gradient target {target!r}")
    return mode


def integrated_gradients(net, x, baseline: BaselineVector, target_class: int,
                         steps: int = IG_DEFAULT_STEPS,
                         target=None) -> AttributionVector:
    """Midpoint Riemann sum of input gradients along the baseline-to-x path.

    score_i = (x_i - b_i) * (1/steps) * sum_k dF/dx_i evaluated at
    b + (k - 1/2)/steps * (x - b). The metadata carries the completeness
    gap |sum(scores) - (F(x) - F(b))| as a convergence self-check.
    """
    x = _check_dims(net, x, baseline)
    if steps < 1:
        raise ConfigError("steps must be at least 1")
    if not 0 <= target_class < net.class_count:
        raise IndexError(f"class index {target_class} out of range")
    mode = _resolve_mode(net, target)

    diff = x - baseline.values
    midpoints = (np.arange(1, steps + 1) - 0.5) / steps
    path = baseline.values + midpoints[:, None] * diff
    grads = nncore.input_gradient(net, path, target_class, target=mode)
    scores = diff * grads.mean(axis=0)

    ends = _target_outputs(net, np.vstack([x, baseline.values]), target_class, mode)
    delta = float(ends[0] - ends[1])
    gap = abs(float(scores.sum()) - delta)
    return AttributionVector(
        scores, target_class, METHOD_IG,
        metadata={"steps": int(steps), "gradient_target": mode,
                  "completeness_gap": gap, "output_delta": delta},
    )


def _coalition_values(net, x, baseline, target_class, mode):
    """Model output for every coalition bitmask 0 .. 2^d - 1."""
    d = x.shape[0]
    masks = np.arange(2 ** d, dtype=np.int64)
    present = ((masks[:, None] >> np.arange(d)) & 1).astype(bool)
    composites = np.where(present, x, baseline.values)
    return _target_outputs(net, composites, target_class, mode)


def _phi_from_subset_weights(values, d, weights_for_feature):
    """Shared reduction: phi_i = sum_S w_i(S) * (v(S+i) - v(S)) / d!.

    Both the factorial-weight route and the enumerated-permutation-count
    route feed this with identical float arrays in identical subset order,
    which is what makes the two agree bit for bit.
    """
    masks = np.arange(values.shape[0], dtype=np.int64)
    d_fact = float(math.factorial(d))
    phi = np.empty(d)
    for i in range(d):
        without = masks[(masks >> i) & 1 == 0]
        with_i = without | (1 << i)
        w = weights_for_feature(i, without)
        phi[i] = float(np.dot(w, values[with_i] - values[without])) / d_fact
    return phi


def _subset_sizes(d):
    masks = np.arange(2 ** d, dtype=np.int64)
    return ((masks[:, None] >> np.arange(d)) & 1).sum(axis=1)


def shapley_exact(net, x, baseline: BaselineVector, target_class: int,
                  target=None) -> AttributionVector:
    """Classic Shapley attribution by full coalition enumeration (2^d values).

    Refuses above EXACT_ENUMERATION_LIMIT features; use shapley_sampled
    there. ``net`` may also be a bare callable mapping (n, d) batches to
    (n,) scores, in which case target_class is ignored.
    """
    x = _check_dims(net, x, baseline)
    d = x.shape[0]
    if d > EXACT_ENUMERATION_LIMIT:
        raise ConfigError(
            f"{d} features exceed the exact enumeration limit "
            f"({EXACT_ENUMERATION_LIMIT}); use shapley_sampled"
        )
    _check_class(net, target_class)
    mode = _resolve_mode(net, target)

    values = _coalition_values(net, x, baseline, target_class, mode)
    sizes = _subset_sizes(d)
    weight_by_size = np.array(
        [math.factorial(s) * math.factorial(d - 1 - s) for s in range(d)],
        dtype=float,
    )
    phi = _phi_from_subset_weights(
        values, d, lambda i, without: weight_by_size[sizes[without]]
    )
    gap = abs(float(phi.sum()) - float(values[-1] - values[0]))
    return AttributionVector(
        phi, target_class, METHOD_SHAPLEY_EXACT,
        metadata={"coalitions": 2 ** d, "gradient_target": mode,
                  "efficiency_gap": gap},
    )


def _permutation_counts(d):
    """Brute-force multiplicities: counts[i, S] = number of orderings in
    which exactly the coalition S precedes feature i. Factorial cost."""
    counts = np.zeros((d, 2 ** d), dtype=np.int64)
    for perm in itertools.permutations(range(d)):
        mask = 0
        for f in perm:
            counts[f, mask] += 1
            mask |= 1 << f
    return counts


def shapley_sampled(net, x, baseline: BaselineVector, target_class: int,
                    permutations: int, seed: int = 0,
                    target=None) -> AttributionVector:
    """Permutation-sampling Shapley estimate, deterministic per seed.

    Asking for at least d! permutations (feasible only for small d) switches
    to exhaustive mode: every ordering is enumerated and the result matches
    shapley_exact bit for bit. Otherwise orderings come from the seeded
    generator and are processed in fixed-size chunks, so the estimate
    depends only on (x, baseline, seed, permutations). Metadata carries the
    per-feature standard error of the sampled estimate.
    """
    x = _check_dims(net, x, baseline)
    d = x.shape[0]
    if permutations < 1:
        raise ConfigError("permutations must be at least 1")
    _check_class(net, target_class)
    mode = _resolve_mode(net, target)

    if d <= EXACT_ENUMERATION_LIMIT and permutations >= math.factorial(d):
        values = _coalition_values(net, x, baseline, target_class, mode)
        counts = _permutation_counts(d)
        phi = _phi_from_subset_weights(
            values, d, lambda i, without: counts[i, without].astype(float)
        )
        return AttributionVector(
            phi, target_class, METHOD_SHAPLEY_SAMPLED,
            metadata={"mode": "exhaustive", "permutations": math.factorial(d),
                      "seed": int(seed), "gradient_target": mode,
                      "standard_error": [0.0] * d},
        )

    rng = np.random.default_rng(seed)
    sums = np.zeros(d)
    sumsq = np.zeros(d)
    done = 0
    while done < permutations:
        chunk = min(SAMPLING_CHUNK, permutations - done)
        perms = np.argsort(rng.random((chunk, d)), axis=1)
        # present[c, j, f]: feature f is among the first j of ordering c
        step = np.zeros((chunk, d, d), dtype=np.int8)
        np.put_along_axis(step, perms[:, :, None], 1, axis=2)
        present = np.zeros((chunk, d + 1, d), dtype=bool)
        present[:, 1:, :] = np.cumsum(step, axis=1).astype(bool)
        composites = np.where(present, x, baseline.values)
        outputs = _target_outputs(
            net, composites.reshape(chunk * (d + 1), d), target_class, mode
        ).reshape(chunk, d + 1)
        marginals = np.diff(outputs, axis=1)
        np.add.at(sums, perms.ravel(), marginals.ravel())
        np.add.at(sumsq, perms.ravel(), (marginals * marginals).ravel())
        done += chunk

    phi = sums / permutations
    if permutations > 1:
        var = (sumsq - permutations * phi * phi) / (permutations - 1)
        se = np.sqrt(np.maximum(var, 0.0) / permutations)
    else:
        se = np.zeros(d)
    return AttributionVector(
        phi, target_class, METHOD_SHAPLEY_SAMPLED,
        metadata={"mode": "sampled", "permutations": int(permutations),
                  "seed": int(seed), "gradient_target": mode,
                  "standard_error": se.tolist()},
    )


def to_rows(attr: AttributionVector, feature_names) -> list:
    """JSON-friendly rows: feature name, signed score, |score| rank, and the
    share |score| / sum|score|."""
    names = list(feature_names)
    if len(names) != attr.dim:
        raise ShapeError("one feature name per score required")
    order = importance_ranking(attr).order
    rank_of = np.empty(attr.dim, dtype=int)
    rank_of[order] = np.arange(attr.dim)
    total = float(np.abs(attr.scores).sum())
    return [
        {
            "feature": names[i],
            "score": float(attr.scores[i]),
            "rank": int(rank_of[i]),
            "share": float(abs(attr.scores[i]) / total) if total > 0 else 0.0,
        }
        for i in range(attr.dim)
    ]
