"""
Per-class diagonal-covariance Gaussian mixtures and maximum-likelihood bol classification.

Each bol class gets its own mixture trained by EM from a seeded k-means++ start. A slice
is scored against every class by summing frame log-likelihoods; classes are equally
likely a priori, so the best posterior is the best likelihood.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics import accuracy_score, confusion_matrix as sk_confusion_matrix

from src.bols import BolClass, get_bol
from src.config import PipelineConfig
from src.features import FeatureSequence
from src.utils.error_handling import ModelFormatError
from src.utils.file_utils import run_concurrently
from src.utils.io_utils import load_json, save_output

MODEL_VERSION = 1
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class Mixture:
    """
    One class's mixture: M weights, (M, D) means and (M, D) variances.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def n_components(self) -> int:
        return int(self.weights.shape[0])

    def component_log_densities(self, frames: np.ndarray) -> np.ndarray:
        """(T, M) matrix of log w_m + log N(x_t; mu_m, diag(var_m))."""
        precision = 1.0 / self.variances
        quad = (
            np.square(frames) @ precision.T
            - 2.0 * frames @ (self.means * precision).T
            + np.sum(np.square(self.means) * precision, axis=1)
        )
        log_norm = -0.5 * (frames.shape[1] * _LOG_2PI + np.sum(np.log(self.variances), axis=1))
        with np.errstate(divide="ignore"):
            log_weights = np.log(self.weights)
        return log_weights + log_norm - 0.5 * quad

    def frame_log_likelihoods(self, frames: np.ndarray) -> np.ndarray:
        return logsumexp(self.component_log_densities(frames), axis=1)


@dataclass
class GmmModel:
    """
    Trained classifier: one Mixture per bol code.

    Attributes:
        mixtures (Dict[int, Mixture]): Mixture per BolClass code.
        n_components (int): Requested M (a class may hold fewer, see em_train).
        training_traces (Dict[int, List[float]]): EM log-likelihood per iteration.
    """

    mixtures: Dict[int, Mixture]
    n_components: int
    training_traces: Dict[int, List[float]] = field(default_factory=dict)

    @property
    def codes(self) -> List[int]:
        return sorted(self.mixtures)

    def class_log_likelihoods(self, frames: np.ndarray) -> Dict[int, float]:
        """Sum of frame log-likelihoods per class."""
        return {code: float(np.sum(self.mixtures[code].frame_log_likelihoods(frames))) for code in self.codes}


def _fit_mixture(
    frames: np.ndarray,
    n_components: int,
    seed: int,
    cfg: PipelineConfig,
    label: str = "",
) -> Tuple[Mixture, List[float]]:
    n_frames = frames.shape[0]
    if n_frames < n_components:
        logger.warning(f"Class {label}: {n_frames} vector(s) < M={n_components}; using M={n_frames}")
        n_components = n_frames

    data_var = frames.var(axis=0)
    var_floor = np.maximum(cfg.var_floor_ratio * data_var, 1e-8)
    centres, _ = kmeans_plusplus(frames, n_clusters=n_components, random_state=seed)
    mixture = Mixture(
        weights=np.full(n_components, 1.0 / n_components),
        means=centres.astype(np.float64),
        variances=np.tile(np.maximum(data_var, var_floor), (n_components, 1)),
    )

    trace: List[float] = []
    for iteration in range(cfg.em_max_iter):
        # E-step
        log_joint = mixture.component_log_densities(frames)
        log_evidence = logsumexp(log_joint, axis=1)
        log_likelihood = float(np.sum(log_evidence))
        if trace and log_likelihood - trace[-1] < cfg.em_tolerance * abs(trace[-1]):
            trace.append(log_likelihood)
            break
        trace.append(log_likelihood)
        resp = np.exp(log_joint - log_evidence[:, np.newaxis])

        # M-step; an emptied component keeps its previous mean and variance.
        counts = resp.sum(axis=0)
        alive = counts > 1e-10
        means = mixture.means.copy()
        variances = mixture.variances.copy()
        weighted_sum = resp.T @ frames
        means[alive] = weighted_sum[alive] / counts[alive, np.newaxis]
        second_moment = resp.T @ np.square(frames)
        variances[alive] = second_moment[alive] / counts[alive, np.newaxis] - np.square(means[alive])
        mixture = Mixture(
            weights=counts / n_frames,
            means=means,
            variances=np.maximum(variances, var_floor),
        )
        logger.debug(f"Class {label} EM iteration {iteration}: log-likelihood {log_likelihood:.4f}")
    return mixture, trace


def em_train(
    data: Mapping[int, np.ndarray],
    n_components: Optional[int] = None,
    seed: Optional[int] = None,
    cfg: Optional[PipelineConfig] = None,
) -> GmmModel:
    """
    Trains one diagonal GMM per class with EM.

    Class ``c`` is initialised by k-means++ with seed ``seed + c``, so training is
    deterministic and classes can be fitted in parallel.

    Args:
        data (Mapping[int, np.ndarray]): (frames, 39) training matrix per bol code.
        n_components (Optional[int]): M; defaults to ``cfg.n_components``.
        seed (Optional[int]): Base seed; defaults to ``cfg.seed``.
        cfg (Optional[PipelineConfig]): EM tolerances, iteration cap and variance floor.

    Returns:
        GmmModel: Mixtures and EM traces for every class.

    Raises:
        ValueError: If ``data`` is empty or a class has no vectors.
    """
    cfg = cfg or PipelineConfig()
    n_components = cfg.n_components if n_components is None else n_components
    seed = cfg.seed if seed is None else seed
    if not data:
        raise ValueError("em_train needs at least one class")
    for code, frames in data.items():
        if np.asarray(frames).ndim != 2 or len(frames) == 0:
            raise ValueError(f"Class {code} has no training vectors")

    codes = sorted(data)

    def fit(code: int) -> Tuple[Mixture, List[float]]:
        frames = np.asarray(data[code], dtype=np.float64)
        return _fit_mixture(frames, n_components, seed + code, cfg, label=get_bol(code).label)

    results = run_concurrently(fit, codes, max_workers=cfg.max_workers)
    model = GmmModel(
        mixtures={code: fitted[0] for code, fitted in results},
        n_components=n_components,
        training_traces={code: fitted[1] for code, fitted in results},
    )
    logger.info(f"Trained GMM with M={n_components} for {len(codes)} class(es)")
    return model


def classify(model: GmmModel, features: FeatureSequence) -> Tuple[BolClass, float]:
    """
    Maximum-likelihood class of a slice.

    Args:
        model (GmmModel): Trained model.
        features (FeatureSequence): Non-empty frame stream of the slice.

    Returns:
        Tuple[BolClass, float]: The winning class and its summed log-likelihood. Ties go
        to the lowest class code.
    """
    scores = model.class_log_likelihoods(features.vectors)
    best = max(scores, key=lambda code: (scores[code], -code))
    return get_bol(best), scores[best]


def classify_posterior(model: GmmModel, features: FeatureSequence) -> Tuple[BolClass, float]:
    """
    Class with the highest posterior under equal priors; returns its log posterior.

    Always agrees with ``classify``.
    """
    scores = model.class_log_likelihoods(features.vectors)
    codes = model.codes
    log_prior = -np.log(len(codes))
    joint = np.array([scores[c] + log_prior for c in codes])
    posterior = joint - logsumexp(joint)
    order = sorted(range(len(codes)), key=lambda i: (posterior[i], -codes[i]), reverse=True)
    return get_bol(codes[order[0]]), float(posterior[order[0]])


def pool_frames(sequences: Mapping[int, Sequence[FeatureSequence]]) -> Dict[int, np.ndarray]:
    """Stacks the frame vectors of every slice of a class into one training matrix."""
    return {code: np.vstack([s.vectors for s in seqs]) for code, seqs in sequences.items() if seqs}


def accuracy(true_codes: Sequence[int], predicted_codes: Sequence[int]) -> float:
    """Fraction of slices whose predicted class is correct."""
    return float(accuracy_score(list(true_codes), list(predicted_codes)))


def confusion_matrix(true_codes: Sequence[int], predicted_codes: Sequence[int]) -> Tuple[List[int], np.ndarray]:
    """
    Confusion counts between true and predicted bol codes.

    Returns:
        Tuple[List[int], np.ndarray]: The sorted code labels and the matrix with rows as
        true classes and columns as predictions.
    """
    labels = sorted(set(true_codes) | set(predicted_codes))
    return labels, sk_confusion_matrix(list(true_codes), list(predicted_codes), labels=labels)


def save_model(model: GmmModel, path: str) -> None:
    """
    Writes a model as versioned JSON. Floats are stored with full precision, so a
    reloaded model scores bit-identically.
    """
    payload = {
        "version": MODEL_VERSION,
        "n_components": model.n_components,
        "classes": {
            str(code): {
                "label": get_bol(code).label,
                "weights": mix.weights.tolist(),
                "means": mix.means.tolist(),
                "variances": mix.variances.tolist(),
            }
            for code, mix in sorted(model.mixtures.items())
        },
        "training_traces": {str(code): trace for code, trace in sorted(model.training_traces.items())},
    }
    save_output(payload, path)


def load_model(path: str) -> GmmModel:
    """
    Reads a model written by ``save_model``.

    Raises:
        ModelFormatError: Unreadable file, unknown version or inconsistent shapes.
    """
    try:
        payload = load_json(path)
    except (OSError, ValueError) as e:
        raise ModelFormatError(path, str(e)) from e
    if not isinstance(payload, dict) or payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(path, f"unsupported model version {payload.get('version') if isinstance(payload, dict) else None!r}")
    try:
        mixtures = {}
        for key, entry in payload["classes"].items():
            mixture = Mixture(
                weights=np.asarray(entry["weights"], dtype=np.float64),
                means=np.asarray(entry["means"], dtype=np.float64),
                variances=np.asarray(entry["variances"], dtype=np.float64),
            )
            m = mixture.n_components
            if mixture.means.shape[0] != m or mixture.variances.shape != mixture.means.shape:
                raise ValueError(f"class {key}: inconsistent mixture shapes")
            if np.any(mixture.variances <= 0):
                raise ValueError(f"class {key}: non-positive variance")
            mixtures[get_bol(int(key)).code] = mixture
        traces = {int(k): [float(v) for v in t] for k, t in payload.get("training_traces", {}).items()}
        return GmmModel(mixtures=mixtures, n_components=int(payload["n_components"]), training_traces=traces)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(path, str(e)) from e
