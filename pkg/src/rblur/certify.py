"""Randomised-smoothing certification for pluggable image classifiers.

Classifiers here follow the scikit-learn convention: ``decision_function``
maps a batch ``(N, C, H, W)`` to per-class scores ``(N, K)`` and
``predict`` takes the argmax. Any object with ``decision_function`` (or just
``predict``) can be certified.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
import math

import numpy as np
from scipy.special import betaincinv
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.exceptions import NotFittedError

from ._validation import check_batch, check_image
from .fixation import aggregate_scores
from .foveate import RBlur

ABSTAIN = -1

# Rational approximation to the normal quantile (P. J. Acklam), relative error < 1.15e-9.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549671010388458e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam(p):
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1))
    if p > 1 - _P_LOW:
        return -_acklam(1 - p)
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1))


def std_normal_cdf(z):
    return 0.5 * math.erfc(-z / math.sqrt(2))


def std_normal_quantile(p):
    """Inverse standard normal CDF, accurate to ~1e-15 in probability."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie strictly between 0 and 1, got {p}")
    z = _acklam(p)
    # one Newton step on the CDF; erfc keeps the upper tail accurate
    if z > 0:
        err = 0.5 * math.erfc(z / math.sqrt(2)) - (1 - p)
        return z + err / math.exp(-0.5 * z * z) * math.sqrt(2 * math.pi)
    err = std_normal_cdf(z) - p
    return z - err / math.exp(-0.5 * z * z) * math.sqrt(2 * math.pi)


def clopper_pearson_lower(k, n, alpha):
    """One-sided Clopper-Pearson lower confidence bound on a binomial rate.

    The ``alpha``-quantile of Beta(k, n - k + 1); zero when ``k == 0``.
    """
    if not (0 <= k <= n) or n < 1:
        raise ValueError(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if k == 0:
        return 0.0
    if k == n:
        return alpha ** (1.0 / n)
    return float(betaincinv(k, n - k + 1, alpha))


def radius_ceiling(sigma, n, alpha):
    """Largest radius certifiable with ``n`` samples: every sample agreeing."""
    return sigma * std_normal_quantile(alpha ** (1.0 / n))


@dataclass(frozen=True)
class CertifyParams:
    sigma: float
    n0: int = 100
    n: int = 100_000
    alpha: float = 0.001
    batch_size: int = 10_000

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.n0 < 1 or self.n < 1 or self.batch_size < 1:
            raise ValueError("n0, n and batch_size must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class CertificationResult:
    prediction: int
    radius: float
    p_lower: float
    count: int
    n: int
    selection_counts: tuple

    @property
    def certified(self):
        return self.prediction != ABSTAIN

    def as_dict(self):
        return asdict(self)


def _predict(clf, X):
    if hasattr(clf, "decision_function"):
        return np.argmax(clf.decision_function(X), axis=1)
    return np.asarray(clf.predict(X))


def _count_predictions(clf, x, sigma, num, batch_size, rng):
    counts = {}
    remaining = num
    while remaining:
        size = min(batch_size, remaining)
        remaining -= size
        batch = x[np.newaxis] + sigma * rng.standard_normal((size,) + x.shape)
        labels, n = np.unique(_predict(clf, batch), return_counts=True)
        for label, c in zip(labels.tolist(), n.tolist()):
            counts[label] = counts.get(label, 0) + c
    return counts


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def certify(clf, x, params, rng=None):
    """Certify the smoothed prediction of ``clf`` at ``x``.

    ``params.n0`` noisy predictions pick the candidate class (ties go to
    the lowest label), ``params.n`` fresh ones estimate how often it wins,
    and the Clopper-Pearson lower bound on that rate gives the radius
    ``sigma * Phi^-1(p_lower)``. Returns an abstention when the bound does
    not exceed one half.
    """
    x = check_image(x)
    rng = _as_rng(rng)
    if hasattr(clf, "for_certification"):
        clf = clf.for_certification()
    selection = _count_predictions(clf, x, params.sigma, params.n0, params.batch_size, rng)
    top = max(selection.values())
    candidate = min(label for label, c in selection.items() if c == top)
    counts = _count_predictions(clf, x, params.sigma, params.n, params.batch_size, rng)
    k = counts.get(candidate, 0)
    p_lower = clopper_pearson_lower(k, params.n, params.alpha)
    selection_counts = tuple(sorted(selection.items()))
    if p_lower <= 0.5:
        return CertificationResult(ABSTAIN, 0.0, p_lower, k, params.n, selection_counts)
    radius = params.sigma * std_normal_quantile(p_lower)
    return CertificationResult(int(candidate), radius, p_lower, k, params.n, selection_counts)


def certify_dataset(clf, images, params, seed=0, n_jobs=1):
    """Certify every image; image ``i`` uses the noise stream seeded by ``(seed, i)``."""
    def one(i):
        return certify(clf, images[i], params, np.random.default_rng([seed, i]))

    if n_jobs == 1:
        return [one(i) for i in range(len(images))]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(one, range(len(images))))


def accuracy_at_radii(results, labels, radii):
    """Fraction of inputs certified, correct and with radius at least ``r``."""
    if len(results) != len(labels) or not results:
        raise ValueError("results and labels must be non-empty and of equal length")
    scalar = np.ndim(radii) == 0
    out = []
    for r in np.atleast_1d(radii):
        hits = [res.certified and res.prediction == y and res.radius >= r
                for res, y in zip(results, labels)]
        out.append(sum(hits) / len(hits))
    return out[0] if scalar else out


def certified_accuracy(clf, dataset, radius, params, seed=0, n_jobs=1):
    """Certified accuracy over ``(image, label)`` pairs at one or more radii."""
    dataset = list(dataset)
    if not dataset:
        raise ValueError("dataset is empty")
    images = [img for img, _ in dataset]
    labels = [label for _, label in dataset]
    results = certify_dataset(clf, images, params, seed, n_jobs)
    return accuracy_at_radii(results, labels, radius)


def matched_unmatched(clf, dataset, training_noise, radii, n0=100, n=100_000, alpha=0.001,
                      seed=0, n_jobs=1):
    """Certified accuracy with certification noise equal to and twice the training noise."""
    out = {}
    for name, sigma in (("matched", training_noise), ("unmatched", 2 * training_noise)):
        params = CertifyParams(sigma=sigma, n0=n0, n=n, alpha=alpha)
        out[name] = certified_accuracy(clf, dataset, list(radii), params, seed, n_jobs)
    return out


def _flatten(X):
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(X.shape[0], -1)


class ConstantClassifier(ClassifierMixin, BaseEstimator):
    """Scores ``label`` highest regardless of input."""

    def __init__(self, label=0, n_classes=None):
        self.label = label
        self.n_classes = n_classes

    def fit(self, X=None, y=None):
        return self

    def decision_function(self, X):
        k = self.n_classes or self.label + 1
        scores = np.zeros((len(X), k))
        scores[:, self.label] = 1.0
        return scores

    def predict(self, X):
        return np.full(len(X), self.label)


class LinearClassifier(ClassifierMixin, BaseEstimator):
    """Affine scores ``W @ vec(x) + b`` with one weight row per class."""

    def __init__(self, weights=None, bias=None):
        self.weights = weights
        self.bias = bias

    def fit(self, X=None, y=None):
        return self

    def decision_function(self, X):
        W = np.asarray(self.weights, dtype=np.float64)
        b = np.zeros(W.shape[0]) if self.bias is None else np.asarray(self.bias, dtype=np.float64)
        return _flatten(X) @ W.T + b

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


class NearestCentroidClassifier(ClassifierMixin, BaseEstimator):
    """Scores each class by negative squared distance to its centroid.

    Given ``centroids`` are used as-is; ``fit`` learns ``centroids_`` from
    labelled data (labels ``0..K-1``, each present at least once).
    """

    def __init__(self, centroids=None):
        self.centroids = centroids

    def fit(self, X, y):
        X, y = _flatten(X), np.asarray(y)
        labels = range(int(y.max()) + 1)
        missing = [c for c in labels if not np.any(y == c)]
        if missing:
            raise ValueError(f"no training samples for labels {missing}")
        self.centroids_ = np.stack([X[y == c].mean(axis=0) for c in labels])
        return self

    def __sklearn_is_fitted__(self):
        return self.centroids is not None or hasattr(self, "centroids_")

    def decision_function(self, X):
        C = getattr(self, "centroids_", self.centroids)
        if C is None:
            raise NotFittedError("NearestCentroidClassifier needs centroids or a call to fit")
        C = np.asarray(C, dtype=np.float64).reshape(len(C), -1)
        X = _flatten(X)
        return -(np.sum(X ** 2, axis=1)[:, None] - 2 * X @ C.T + np.sum(C ** 2, axis=1)[None, :])

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


class RBlurClassifier(ClassifierMixin, BaseEstimator):
    """Foveate each input at every fixation and average the base scores.

    One fixation at the centre gives single-fixation inference; the five
    corner-and-centre points give the five-fixation variant. ``rblur`` must
    be an :class:`RBlur` instance (fitted or not).
    """

    def __init__(self, base=None, rblur=None, fixations=("center",)):
        self.base = base
        self.rblur = rblur
        self.fixations = fixations

    def _transformer(self):
        rb = self.rblur if self.rblur is not None else RBlur()
        if not hasattr(rb, "table_"):
            rb = clone(rb).fit()
        return rb

    def for_certification(self):
        """Copy whose foveation adds no noise of its own."""
        rb = clone(self._transformer()).set_params(noise_scale=0.0).fit()
        return RBlurClassifier(self.base, rb, self.fixations)

    def fit(self, X=None, y=None):
        return self

    def decision_function(self, X):
        rb = self._transformer()
        images = check_batch(X, max_size=rb.visual_field)
        scores = []
        for i, img in enumerate(images):
            per_fixation = [
                self.base.decision_function(rb.transform_one(img, f, index=i)[np.newaxis])[0]
                for f in self.fixations
            ]
            scores.append(aggregate_scores(per_fixation))
        return np.stack(scores)

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


class SmoothedClassifier(ClassifierMixin, BaseEstimator):
    """Estimator facade over :func:`certify`.

    ``predict`` returns the certified label or ``ABSTAIN`` (-1);
    ``certify`` returns the full :class:`CertificationResult` list.
    """

    def __init__(self, base=None, sigma=0.25, n0=100, n=100_000, alpha=0.001, random_state=0,
                 n_jobs=1):
        self.base = base
        self.sigma = sigma
        self.n0 = n0
        self.n = n
        self.alpha = alpha
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        if X is not None and y is not None and hasattr(self.base, "fit"):
            self.base.fit(X, y)
        self.params_ = CertifyParams(self.sigma, self.n0, self.n, self.alpha)
        return self

    def certify(self, X):
        if not hasattr(self, "params_"):
            self.fit()
        return certify_dataset(self.base, list(X), self.params_, self.random_state, self.n_jobs)

    def predict(self, X):
        return np.array([r.prediction for r in self.certify(X)])

    def score(self, X, y, radius=0.0):
        return accuracy_at_radii(self.certify(X), list(y), radius)
