"""Linear-probe training: ERM and jointly-trained diverse classifier sets.

Each model is a two-logit linear classifier (one row of W per class logit)
trained by plain minibatch gradient descent on the mean softmax
cross-entropy.  A diverse set couples n copies through a gradient-alignment
penalty: for input h, the input gradient of a model is the W row of its
largest logit (exact for a linear model; the argmax is treated as locally
constant during backpropagation), and the penalty sums a pairwise
similarity of these gradients over models and batch rows:

    diversity_loss = sum_{h in batch} sum_{i<j} sim(g_i(h), g_j(h))

with ``raw_dot`` the plain signed dot product and ``squared_dot`` /
``cosine`` as variants.  Inside the per-batch training objective the penalty
enters through its mean over batch rows and model pairs,

    total = sum_i meanCE_i + diversity_weight * diversity_loss / (B * n_pairs),

so that ``diversity_weight`` is commensurate with a per-model cross-entropy
regardless of batch size or copy count.  (The raw row-and-pair sum grows
with both, which makes moderate weights like 10 overwhelm classification;
the reported ``diversity_loss`` metric remains the raw sum.)  Note the
signed ``raw_dot`` rewards anti-aligned gradients without bound, so large
``diversity_weight * learning_rate`` products can diverge; divergence
raises :class:`TrainingDivergenceError` naming the epoch.

Determinism: initial weights come from per-model substreams of
``config.seed`` and the shuffle order from a separate substream, so a run is
a pure function of (data, config).  With ``diversity_weight = 0`` the copies
of a joint run decouple and reproduce independent single-model runs
bit-for-bit (same per-model initialisation streams, shared shuffle stream).
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, TrainingDivergenceError
from .sem import Dataset

__all__ = [
    "LinearClassifier",
    "TrainConfig",
    "EpochRecord",
    "SIMILARITIES",
    "initial_classifier",
    "input_gradient",
    "diversity_loss",
    "evaluate",
    "train_erm",
    "train_diverse",
    "training_loss",
    "training_gradients",
    "epoch_records_to_csv",
]

SIMILARITIES = ("raw_dot", "squared_dot", "cosine")
_COSINE_EPS = 1e-12

# fixed stream tags keep init / shuffle draws independent of each other
_INIT_TAG = 101
_SHUFFLE_TAG = 202


@dataclass(frozen=True)
class LinearClassifier:
    """Two-logit linear model: logits = W h + bias."""

    W: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float, copy=True)
        b = np.array(self.bias, dtype=float, copy=True)
        if W.ndim != 2 or W.shape[0] != 2 or b.shape != (2,):
            raise ConfigurationError("W must be (2, d) and bias length 2")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ConfigurationError("classifier parameters must be finite")
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "bias", b)

    @property
    def d(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    n_models: int = 1
    diversity_weight: float = 0.0
    similarity: str = "raw_dot"
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 64
    seed: int = 0
    record_every_epoch: bool = True

    def __post_init__(self):
        if self.n_models < 1:
            raise ConfigurationError("n_models must be at least 1")
        if self.diversity_weight < 0:
            raise ConfigurationError("diversity_weight must be nonnegative")
        if self.similarity not in SIMILARITIES:
            raise ConfigurationError(
                f"similarity must be one of {SIMILARITIES}, got '{self.similarity}'"
            )
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("learning_rate, epochs, batch_size must be positive")
        if self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    model_idx: int
    id_accuracy: float
    ood_accuracy: float
    id_logistic_risk: float
    ood_logistic_risk: float
    classification_loss: float
    diversity_loss: float

    def __post_init__(self):
        if not (0.0 <= self.id_accuracy <= 1.0 and 0.0 <= self.ood_accuracy <= 1.0):
            raise ConfigurationError("accuracies must lie in [0, 1]")


def initial_classifier(seed: int, model_index: int, d: int) -> LinearClassifier:
    """Gaussian init (std 0.01, zero bias) from the (seed, model_index) stream."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _INIT_TAG, model_index]))
    return LinearClassifier(W=rng.normal(0.0, 0.01, size=(2, d)), bias=np.zeros(2))


def _logits(W: np.ndarray, bias: np.ndarray, H: np.ndarray) -> np.ndarray:
    return H @ W.T + bias


def _selected_rows(W: np.ndarray, bias: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Argmax row per batch point; np.argmax breaks ties toward the lower
    class index, matching the input_gradient contract."""
    return np.argmax(_logits(W, bias, H), axis=1)


def input_gradient(model: LinearClassifier, h: np.ndarray) -> np.ndarray:
    """Gradient of the largest logit w.r.t. the input: the argmax W row."""
    h = np.asarray(h, dtype=float)
    if h.shape != (model.d,):
        raise ConfigurationError(f"h has shape {h.shape}, expected ({model.d},)")
    k = int(np.argmax(model.W @ h + model.bias))
    return model.W[k].copy()


def _pair_similarity(gi: np.ndarray, gj: np.ndarray, similarity: str) -> np.ndarray:
    """Row-wise similarity between two (B, d) gradient stacks."""
    dots = np.einsum("bd,bd->b", gi, gj)
    if similarity == "raw_dot":
        return dots
    if similarity == "squared_dot":
        return dots**2
    ni = np.maximum(np.linalg.norm(gi, axis=1), _COSINE_EPS)
    nj = np.maximum(np.linalg.norm(gj, axis=1), _COSINE_EPS)
    return dots / (ni * nj)


def diversity_loss(models, batch: np.ndarray, similarity: str = "raw_dot") -> float:
    """Sum over batch rows and model pairs i<j of sim(grad_i, grad_j).

    `models` is a sequence of LinearClassifier (or (W, bias) pairs).  With a
    single model the loss is 0 and a warning is emitted.
    """
    if similarity not in SIMILARITIES:
        raise ConfigurationError(f"unknown similarity '{similarity}'")
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    params = [(m.W, m.bias) if isinstance(m, LinearClassifier) else m for m in models]
    if len(params) < 2:
        warnings.warn("diversity_loss needs at least 2 models; returning 0")
        return 0.0
    G = np.stack([W[_selected_rows(W, b, batch)] for W, b in params])
    total = 0.0
    for i in range(len(params)):
        for j in range(i + 1, len(params)):
            total += float(np.sum(_pair_similarity(G[i], G[j], similarity)))
    return total


def _mean_ce_and_grad(W, bias, H, cls):
    """Mean softmax cross-entropy, its value and parameter gradients."""
    z = _logits(W, bias, H)
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    sez = ez.sum(axis=1, keepdims=True)
    logp = (z - zmax) - np.log(sez)
    n = H.shape[0]
    loss = float(-logp[np.arange(n), cls].mean())
    delta = ez / sez
    delta[np.arange(n), cls] -= 1.0
    delta /= n
    return loss, delta.T @ H, delta.sum(axis=0)


def _mean_ce(W, bias, H, cls) -> float:
    z = _logits(W, bias, H)
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    n = H.shape[0]
    return float(np.mean(lse - z[np.arange(n), cls]))


def evaluate(model: LinearClassifier, dataset: Dataset) -> tuple[float, float]:
    """(accuracy, logistic risk) of the classifier on the dataset.

    Accuracy is the fraction of rows whose argmax logit matches the label
    class; logistic risk is the mean softmax cross-entropy.
    """
    cls = dataset.class_index
    z = _logits(model.W, model.bias, dataset.features)
    acc = float(np.mean(np.argmax(z, axis=1) == cls))
    return acc, _mean_ce(model.W, model.bias, dataset.features, cls)


def _diversity_grads(Ws, selections, G, similarity, scale):
    """Per-model W gradients of scale * sum_rows sum_pairs sim(g_i, g_j),
    with the argmax selections held fixed."""
    n_models = len(Ws)
    grads = [np.zeros_like(W) for W in Ws]
    if similarity == "cosine":
        norms = np.maximum(np.linalg.norm(G, axis=2), _COSINE_EPS)
        U = G / norms[:, :, None]
    for i in range(n_models):
        dg = np.zeros_like(G[i])
        for j in range(n_models):
            if j == i:
                continue
            if similarity == "raw_dot":
                dg += G[j]
            elif similarity == "squared_dot":
                dots = np.einsum("bd,bd->b", G[i], G[j])
                dg += 2.0 * dots[:, None] * G[j]
            else:  # cosine
                cos = np.einsum("bd,bd->b", U[i], U[j])
                dg += (U[j] - cos[:, None] * U[i]) / norms[i][:, None]
        for r in (0, 1):
            rows = selections[i] == r
            if rows.any():
                grads[i][r] = scale * dg[rows].sum(axis=0)
    return grads


def training_loss(models, H, cls, diversity_weight, similarity, selections=None):
    """Value of the joint per-batch objective:
    sum_i meanCE_i + diversity_weight * diversity_loss / (B * n_pairs).

    `selections` optionally freezes the argmax rows (used by the
    finite-difference gradient checks); by default they are recomputed from
    the models.
    """
    params = [(m.W, m.bias) if isinstance(m, LinearClassifier) else m for m in models]
    H = np.atleast_2d(np.asarray(H, dtype=float))
    total = sum(_mean_ce(W, b, H, cls) for W, b in params)
    n_models = len(params)
    if diversity_weight > 0 and n_models >= 2:
        if selections is None:
            selections = [_selected_rows(W, b, H) for W, b in params]
        G = np.stack([W[sel] for (W, _), sel in zip(params, selections)])
        div = 0.0
        for i in range(n_models):
            for j in range(i + 1, n_models):
                div += float(np.sum(_pair_similarity(G[i], G[j], similarity)))
        n_pairs = n_models * (n_models - 1) // 2
        total += diversity_weight * div / (H.shape[0] * n_pairs)
    return total


def training_gradients(models, H, cls, diversity_weight, similarity):
    """Per-model (gW, gbias) of the joint per-batch objective; the argmax
    selections inside the diversity term are treated as locally constant."""
    params = [(m.W, m.bias) if isinstance(m, LinearClassifier) else m for m in models]
    H = np.atleast_2d(np.asarray(H, dtype=float))
    gWs, gbs = [], []
    for W, b in params:
        _, gW, gb = _mean_ce_and_grad(W, b, H, cls)
        gWs.append(gW)
        gbs.append(gb)
    n_models = len(params)
    if diversity_weight > 0 and n_models >= 2:
        selections = [_selected_rows(W, b, H) for W, b in params]
        G = np.stack([W[sel] for (W, _), sel in zip(params, selections)])
        n_pairs = n_models * (n_models - 1) // 2
        scale = diversity_weight / (H.shape[0] * n_pairs)
        Ws = [W for W, _ in params]
        for gW, dW in zip(gWs, _diversity_grads(Ws, selections, G, similarity, scale)):
            gW += dW
    return gWs, gbs


def _run(
    train: Dataset,
    eval_id: Dataset,
    eval_ood: Dataset,
    config: TrainConfig,
    n_models: int,
    diversity_weight: float,
    model_indices,
    snapshots: list | None = None,
):
    for ds, name in ((eval_id, "eval_id"), (eval_ood, "eval_ood")):
        if ds.d != train.d:
            raise ConfigurationError(
                f"{name} feature width {ds.d} differs from train width {train.d}"
            )
    H = train.features
    cls = train.class_index
    n, d = H.shape
    Ws = []
    bs = []
    for idx in model_indices:
        init = initial_classifier(config.seed, idx, d)
        Ws.append(init.W.copy())
        bs.append(init.bias.copy())
    shuffle_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, _SHUFFLE_TAG])
    )
    records: list[EpochRecord] = []
    use_div = diversity_weight > 0 and n_models >= 2
    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            Hb, cb = H[idx], cls[idx]
            gWs, gbs = [], []
            for i in range(n_models):
                _, gW, gb = _mean_ce_and_grad(Ws[i], bs[i], Hb, cb)
                gWs.append(gW)
                gbs.append(gb)
            if use_div:
                selections = [_selected_rows(Ws[i], bs[i], Hb) for i in range(n_models)]
                G = np.stack([Ws[i][selections[i]] for i in range(n_models)])
                n_pairs = n_models * (n_models - 1) // 2
                scale = diversity_weight / (Hb.shape[0] * n_pairs)
                for gW, dW in zip(
                    gWs, _diversity_grads(Ws, selections, G, config.similarity, scale)
                ):
                    gW += dW
            for i in range(n_models):
                Ws[i] -= config.learning_rate * gWs[i]
                bs[i] -= config.learning_rate * gbs[i]
                if not (np.all(np.isfinite(Ws[i])) and np.all(np.isfinite(bs[i]))):
                    raise TrainingDivergenceError(epoch, f"model {model_indices[i]}")
        if config.record_every_epoch or epoch == config.epochs:
            if use_div:
                div_value = diversity_loss(
                    [(Ws[i], bs[i]) for i in range(n_models)], H, config.similarity
                )
            else:
                div_value = 0.0
            epoch_models = []
            for i in range(n_models):
                model = LinearClassifier(W=Ws[i], bias=bs[i])
                epoch_models.append(model)
                id_acc, id_risk = evaluate(model, eval_id)
                ood_acc, ood_risk = evaluate(model, eval_ood)
                records.append(
                    EpochRecord(
                        epoch=epoch,
                        model_idx=model_indices[i],
                        id_accuracy=id_acc,
                        ood_accuracy=ood_acc,
                        id_logistic_risk=id_risk,
                        ood_logistic_risk=ood_risk,
                        classification_loss=_mean_ce(Ws[i], bs[i], H, cls),
                        diversity_loss=div_value,
                    )
                )
            if snapshots is not None:
                snapshots.append((epoch, epoch_models))
    classifiers = [LinearClassifier(W=Ws[i], bias=bs[i]) for i in range(n_models)]
    return records, classifiers


def train_erm(
    train: Dataset,
    eval_id: Dataset,
    eval_ood: Dataset,
    config: TrainConfig,
    model_index: int = 0,
) -> tuple[list[EpochRecord], LinearClassifier]:
    """Single-model ERM run.  `model_index` selects the initialisation
    substream, letting callers reproduce any member of a decoupled set."""
    if config.n_models != 1:
        raise ConfigurationError("train_erm requires a config with n_models=1")
    records, classifiers = _run(
        train, eval_id, eval_ood, config,
        n_models=1, diversity_weight=0.0, model_indices=[model_index],
    )
    return records, classifiers[0]


def train_erm_checkpoints(
    train: Dataset,
    eval_id: Dataset,
    eval_ood: Dataset,
    config: TrainConfig,
    model_index: int = 0,
):
    """Like train_erm, additionally returning the per-recorded-epoch
    classifier snapshots as a list of (epoch, LinearClassifier)."""
    if config.n_models != 1:
        raise ConfigurationError("train_erm requires a config with n_models=1")
    snaps: list = []
    records, _ = _run(
        train, eval_id, eval_ood, config,
        n_models=1, diversity_weight=0.0, model_indices=[model_index],
        snapshots=snaps,
    )
    return records, [(epoch, models[0]) for epoch, models in snaps]


def train_diverse(
    train: Dataset,
    eval_id: Dataset,
    eval_ood: Dataset,
    config: TrainConfig,
) -> tuple[list[EpochRecord], list[LinearClassifier]]:
    """Jointly train config.n_models copies with the diversity penalty."""
    if config.n_models < 2:
        raise ConfigurationError("train_diverse requires n_models >= 2")
    return _run(
        train, eval_id, eval_ood, config,
        n_models=config.n_models,
        diversity_weight=config.diversity_weight,
        model_indices=list(range(config.n_models)),
    )


def epoch_records_to_csv(entries) -> str:
    """CSV with schema ``method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk``.

    `entries` is an iterable of (method, seed, EpochRecord).
    """
    buf = io.StringIO()
    buf.write("method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk\n")
    for method, seed, rec in entries:
        buf.write(
            f"{method},{seed},{rec.model_idx},{rec.epoch},"
            f"{rec.id_accuracy!r},{rec.ood_accuracy!r},"
            f"{rec.id_logistic_risk!r},{rec.ood_logistic_risk!r}\n"
        )
    return buf.getvalue()
