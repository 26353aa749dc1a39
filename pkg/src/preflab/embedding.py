"""Trajectory-embedding learner.

Segments map to d-dimensional vectors either through a per-segment table
(optimized directly, as in the scalar-value demo) or through a feedforward
encoder over mean-pooled per-step features (generalizes to unseen segments).
Four losses shape the space:

* ambiguity loss: push apart pairs the teacher told apart, pull together
  pairs the teacher skipped;
* quadrilateral loss: for two clearly-labeled queries, cluster winner with
  winner and loser with loser while separating winners from losers;
* norm loss: keep embedding norms near one so the space neither blows up
  nor collapses to the origin;
* reconstruction loss (encoder mode): a decoder must recover actions from
  (state, embedding), grounding the embedding in the data.

All gradients are hand-derived and validated against central finite
differences; training is plain gradient descent.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import PreferenceDataset, PreferenceTriple, Segment
from .nn import MLP, finite_difference_gradient

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class DistanceMetric(Enum):
    L2 = "l2"
    SQUARED_L2 = "squared_l2"


def pair_distances(a: np.ndarray, b: np.ndarray, metric: DistanceMetric) -> np.ndarray:
    """Row-wise distances between (n, d) arrays."""
    diff = np.atleast_2d(a) - np.atleast_2d(b)
    sq = np.einsum("ij,ij->i", diff, diff)
    if metric is DistanceMetric.SQUARED_L2:
        return sq
    return np.sqrt(sq)


def pair_distance_grads(
    a: np.ndarray, b: np.ndarray, metric: DistanceMetric
) -> np.ndarray:
    """Row-wise d(dist)/da; d(dist)/db is its negative.

    At coincident points the L2 metric has a kink; the zero subgradient is
    used there.
    """
    diff = np.atleast_2d(a) - np.atleast_2d(b)
    if metric is DistanceMetric.SQUARED_L2:
        return 2.0 * diff
    norms = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    safe = np.where(norms > 0.0, norms, 1.0)
    grads = diff / safe[:, None]
    grads[norms == 0.0] = 0.0
    return grads


def segment_features(segment: Segment) -> np.ndarray:
    """Mean-pooled per-step [state; action] feature vector."""
    return np.concatenate([segment.states.mean(axis=0), segment.actions.mean(axis=0)])


class EmbeddingMode(Enum):
    TABLE = "table"
    ENCODER = "encoder"


class EmbeddingModel:
    """Segment -> R^d map, as a lookup table or an encoder/decoder pair."""

    def __init__(
        self,
        mode: EmbeddingMode,
        dim: int,
        *,
        ids: Sequence[str] | None = None,
        table: np.ndarray | None = None,
        enc: MLP | None = None,
        dec: MLP | None = None,
    ):
        self.mode = mode
        self.dim = dim
        if mode is EmbeddingMode.TABLE:
            assert ids is not None and table is not None
            self.ids = tuple(ids)
            self.index = {sid: i for i, sid in enumerate(self.ids)}
            self.table = np.asarray(table, dtype=float)
            if self.table.shape != (len(self.ids), dim):
                raise ValueError("table shape must be (n_ids, dim)")
            self.enc = None
            self.dec = None
        else:
            assert enc is not None and dec is not None
            self.enc = enc
            self.dec = dec
            self.ids = ()
            self.index = {}
            self.table = None

    # -- constructors ---------------------------------------------------------

    @classmethod
    def new_table(
        cls, segments_or_ids: Sequence, dim: int = 16, seed: int = 0
    ) -> "EmbeddingModel":
        """Table of standard-normal rows, one per segment id."""
        ids = [s.id if isinstance(s, Segment) else str(s) for s in segments_or_ids]
        if len(set(ids)) != len(ids):
            raise ValueError("table ids must be unique")
        rng = np.random.default_rng(seed)
        table = rng.standard_normal((len(ids), dim))
        return cls(EmbeddingMode.TABLE, dim, ids=ids, table=table)

    @classmethod
    def new_encoder(
        cls,
        state_dim: int,
        action_dim: int,
        dim: int = 16,
        hidden: int = 64,
        seed: int = 0,
    ) -> "EmbeddingModel":
        rng = np.random.default_rng(seed)
        enc = MLP([state_dim + action_dim, hidden, hidden, dim], activation="tanh", rng=rng)
        dec = MLP([state_dim + dim, hidden, hidden, action_dim], activation="tanh", rng=rng)
        return cls(EmbeddingMode.ENCODER, dim, enc=enc, dec=dec)

    # -- parameter vector ------------------------------------------------------

    def params_vector(self) -> np.ndarray:
        if self.mode is EmbeddingMode.TABLE:
            return self.table.ravel().copy()
        return np.concatenate([self.enc.pack(), self.dec.pack()])

    def set_params_vector(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if self.mode is EmbeddingMode.TABLE:
            self.table = flat.reshape(self.table.shape).copy()
        else:
            n_enc = self.enc.n_params()
            self.enc.unpack(flat[:n_enc])
            self.dec.unpack(flat[n_enc:])

    def n_params(self) -> int:
        if self.mode is EmbeddingMode.TABLE:
            return self.table.size
        return self.enc.n_params() + self.dec.n_params()

    # -- encoding ----------------------------------------------------------------

    def encode(self, segment: Segment) -> np.ndarray:
        return self.encode_segments([segment])[0][0].copy()

    def encode_segments(self, segments: Sequence[Segment]) -> tuple[np.ndarray, object]:
        """Batch encode; the returned context feeds ``backprop_z``."""
        if self.mode is EmbeddingMode.TABLE:
            positions = []
            for seg in segments:
                if seg.id not in self.index:
                    raise KeyError(f"segment {seg.id!r} is not in the embedding table")
                positions.append(self.index[seg.id])
            positions = np.asarray(positions, dtype=int)
            return self.table[positions], ("table", positions)
        feats = np.array([segment_features(s) for s in segments])
        z, cache = self.enc.forward(feats)
        return z, ("encoder", cache)

    def backprop_z(self, ctx, d_z: np.ndarray) -> np.ndarray:
        """Gradient of a scalar loss w.r.t. the flat parameter vector,
        given its gradient w.r.t. the encoded batch."""
        kind = ctx[0]
        if kind == "table":
            grad = np.zeros_like(self.table)
            np.add.at(grad, ctx[1], d_z)
            return grad.ravel()
        dws, dbs, _ = self.enc.backward(ctx[1], d_z)
        enc_grad = MLP.pack_grads(dws, dbs)
        return np.concatenate([enc_grad, np.zeros(self.dec.n_params())])


@dataclass(frozen=True)
class LossWeights:
    lambda_amb: float = 0.1
    lambda_quad: float = 1.0
    lambda_norm: float = 0.1

    def __post_init__(self):
        if min(self.lambda_amb, self.lambda_quad, self.lambda_norm) < 0:
            raise ValueError("loss weights must be >= 0")


# ---------------------------------------------------------------------------
# Loss cores: value plus gradient w.r.t. a pre-encoded batch Z.
# ---------------------------------------------------------------------------


def _amb_core(
    z: np.ndarray,
    clear_idx: np.ndarray,
    amb_idx: np.ndarray,
    metric: DistanceMetric,
) -> tuple[float, np.ndarray]:
    value = 0.0
    d_z = np.zeros_like(z)
    if len(clear_idx):
        a, b = z[clear_idx[:, 0]], z[clear_idx[:, 1]]
        value -= float(pair_distances(a, b, metric).mean())
        g = pair_distance_grads(a, b, metric) / len(clear_idx)
        np.add.at(d_z, clear_idx[:, 0], -g)
        np.add.at(d_z, clear_idx[:, 1], g)
    if len(amb_idx):
        a, b = z[amb_idx[:, 0]], z[amb_idx[:, 1]]
        value += float(pair_distances(a, b, metric).mean())
        g = pair_distance_grads(a, b, metric) / len(amb_idx)
        np.add.at(d_z, amb_idx[:, 0], g)
        np.add.at(d_z, amb_idx[:, 1], -g)
    return value, d_z


def _quad_core(
    z: np.ndarray, quads: np.ndarray, metric: DistanceMetric
) -> tuple[float, np.ndarray]:
    """quads columns: winner, winner', loser, loser'."""
    n = len(quads)
    d_z = np.zeros_like(z)
    zp, zpp, zm, zmp = (z[quads[:, k]] for k in range(4))
    value = -float(
        (
            pair_distances(zp, zmp, metric)
            + pair_distances(zpp, zm, metric)
            - pair_distances(zp, zpp, metric)
            - pair_distances(zm, zmp, metric)
        ).mean()
    )
    scale = 1.0 / n
    for cols, sign in ((((0, 3)), -1.0), ((1, 2), -1.0), ((0, 1), 1.0), ((2, 3), 1.0)):
        g = pair_distance_grads(z[quads[:, cols[0]]], z[quads[:, cols[1]]], metric)
        np.add.at(d_z, quads[:, cols[0]], sign * scale * g)
        np.add.at(d_z, quads[:, cols[1]], -sign * scale * g)
    return value, d_z


def _norm_core(z: np.ndarray) -> tuple[float, np.ndarray]:
    norms = np.linalg.norm(z, axis=1)
    value = float(np.maximum(norms, 1.0).mean())
    # kink at ||z|| == 1 takes the norm branch
    active = norms >= 1.0
    safe = np.where(norms > 0.0, norms, 1.0)
    d_z = np.where(active[:, None], z / safe[:, None], 0.0) / len(z)
    return value, d_z


def _recon_core(
    model: EmbeddingModel,
    states: np.ndarray,
    actions: np.ndarray,
    z: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Returns (value, d_z, decoder flat grad)."""
    dec_in = np.concatenate([states, z], axis=1)
    pred, cache = model.dec.forward(dec_in)
    resid = pred - actions
    norms = np.linalg.norm(resid, axis=1)
    value = float(norms.mean())
    safe = np.where(norms > 0.0, norms, 1.0)
    d_pred = np.where((norms > 0.0)[:, None], resid / safe[:, None], 0.0) / len(norms)
    dws, dbs, d_in = model.dec.backward(cache, d_pred)
    d_z = d_in[:, states.shape[1] :]
    return value, d_z, MLP.pack_grads(dws, dbs)


def _clear_or_raise(triples: Sequence[PreferenceTriple]) -> None:
    for t in triples:
        if not t.is_clear:
            raise ValueError("quadrilateral loss is defined on clear triples only")


# ---------------------------------------------------------------------------
# Public loss operations: (value, gradient w.r.t. the flat parameter vector)
# ---------------------------------------------------------------------------


def loss_amb(
    model: EmbeddingModel,
    batch: Sequence[PreferenceTriple],
    metric: DistanceMetric = DistanceMetric.L2,
) -> tuple[float, np.ndarray]:
    """Ambiguity loss: -mean(clear-pair dist) + mean(ambiguous-pair dist)."""
    if not batch:
        raise ValueError("batch must contain at least one triple")
    segs: list[Segment] = []
    clear_idx, amb_idx = [], []
    for t in batch:
        i = len(segs)
        segs.extend([t.seg0, t.seg1])
        (clear_idx if t.is_clear else amb_idx).append((i, i + 1))
    z, ctx = model.encode_segments(segs)
    value, d_z = _amb_core(
        z, np.asarray(clear_idx, dtype=int).reshape(-1, 2),
        np.asarray(amb_idx, dtype=int).reshape(-1, 2), metric
    )
    return value, model.backprop_z(ctx, d_z)


def loss_quad(
    model: EmbeddingModel,
    quad_batch: Sequence[tuple[PreferenceTriple, PreferenceTriple]],
    metric: DistanceMetric = DistanceMetric.L2,
) -> tuple[float, np.ndarray]:
    """Quadrilateral loss over pairs of clear triples."""
    if not quad_batch:
        raise ValueError("quad batch must contain at least one pair of triples")
    segs: list[Segment] = []
    quads = []
    for t0, t1 in quad_batch:
        _clear_or_raise((t0, t1))
        i = len(segs)
        segs.extend([t0.preferred, t1.preferred, t0.rejected, t1.rejected])
        quads.append((i, i + 1, i + 2, i + 3))
    z, ctx = model.encode_segments(segs)
    value, d_z = _quad_core(z, np.asarray(quads, dtype=int), metric)
    return value, model.backprop_z(ctx, d_z)


def loss_norm(
    model: EmbeddingModel, segments: Sequence[Segment]
) -> tuple[float, np.ndarray]:
    """Mean of max(||z||, 1); flat (zero-gradient) inside the unit ball."""
    if not segments:
        raise ValueError("norm loss needs at least one segment")
    z, ctx = model.encode_segments(segments)
    value, d_z = _norm_core(z)
    return value, model.backprop_z(ctx, d_z)


def loss_recon(
    model: EmbeddingModel,
    transitions: Sequence[tuple[Segment, np.ndarray, np.ndarray]],
) -> tuple[float, np.ndarray]:
    """Mean action-reconstruction error ||decoder(s, z) - a||_2."""
    if model.mode is not EmbeddingMode.ENCODER:
        raise ValueError("reconstruction undefined for table embeddings")
    if not transitions:
        raise ValueError("reconstruction loss needs at least one transition")
    segs = [t[0] for t in transitions]
    states = np.array([np.asarray(t[1], dtype=float) for t in transitions])
    actions = np.array([np.asarray(t[2], dtype=float) for t in transitions])
    z, ctx = model.encode_segments(segs)
    value, d_z, dec_grad = _recon_core(model, states, actions, z)
    grad = model.backprop_z(ctx, d_z)
    grad[model.enc.n_params() :] += dec_grad
    return value, grad


@dataclass
class LossBatches:
    """Inputs for one total-loss evaluation."""

    triples: Sequence[PreferenceTriple] = ()
    quad_pairs: Sequence[tuple[PreferenceTriple, PreferenceTriple]] = ()
    segments: Sequence[Segment] = ()
    transitions: Sequence[tuple[Segment, np.ndarray, np.ndarray]] | None = None


def total_loss(
    model: EmbeddingModel,
    batches: LossBatches,
    weights: LossWeights,
    metric: DistanceMetric = DistanceMetric.L2,
) -> tuple[float, np.ndarray]:
    """recon + lambda_amb*amb + lambda_quad*quad + lambda_norm*norm.

    Table mode has no reconstruction term. Components whose batch is empty
    contribute zero; the value and gradient are exactly the weighted sums
    of the component values and gradients.
    """
    if model.mode is EmbeddingMode.TABLE and batches.transitions:
        raise ValueError("reconstruction undefined for table embeddings")
    value = 0.0
    grad = np.zeros(model.n_params())
    if model.mode is EmbeddingMode.ENCODER and batches.transitions:
        v, g = loss_recon(model, batches.transitions)
        value += v
        grad += g
    if weights.lambda_amb != 0.0 and batches.triples:
        v, g = loss_amb(model, batches.triples, metric)
        value += weights.lambda_amb * v
        grad += weights.lambda_amb * g
    if weights.lambda_quad != 0.0 and batches.quad_pairs:
        v, g = loss_quad(model, batches.quad_pairs, metric)
        value += weights.lambda_quad * v
        grad += weights.lambda_quad * g
    if weights.lambda_norm != 0.0 and batches.segments:
        v, g = loss_norm(model, batches.segments)
        value += weights.lambda_norm * v
        grad += weights.lambda_norm * g
    return value, grad


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------


@dataclass
class TraceEntry:
    step: int
    total: float
    amb: float
    quad: float
    norm: float
    recon: float


def train_embedding(
    model: EmbeddingModel,
    segments: Sequence[Segment],
    preferences: PreferenceDataset,
    steps: int,
    lr: float,
    weights: LossWeights = LossWeights(),
    metric: DistanceMetric = DistanceMetric.L2,
    seed: int = 0,
    quad_batch: int = 64,
    recon_batch: int = 64,
    trace_every: int = 100,
) -> list[TraceEntry]:
    """Plain gradient descent on the combined embedding loss.

    ``segments`` is the segment universe: the norm term averages over it,
    reconstruction transitions are drawn from it, and every labeled segment
    must belong to it. Per step the quadrilateral term draws ``quad_batch``
    unordered pairs of distinct clear triples uniformly with replacement;
    the ambiguity term uses the full clear/ambiguous subsets. Deterministic
    for a given seed; the model is updated in place.
    """
    universe = list(segments)
    pos = {s.id: i for i, s in enumerate(universe)}
    if len(pos) != len(universe):
        raise ValueError("segment universe contains duplicate ids")

    def lookup(seg: Segment) -> int:
        try:
            return pos[seg.id]
        except KeyError:
            raise KeyError(f"labeled segment {seg.id!r} is not in the training universe")

    clear = list(preferences.clear)
    amb = list(preferences.ambiguous)
    clear_idx = np.array([(lookup(t.seg0), lookup(t.seg1)) for t in clear], dtype=int).reshape(-1, 2)
    amb_idx = np.array([(lookup(t.seg0), lookup(t.seg1)) for t in amb], dtype=int).reshape(-1, 2)
    pref_idx = np.array(
        [(lookup(t.preferred), lookup(t.rejected)) for t in clear], dtype=int
    ).reshape(-1, 2)

    use_quad = weights.lambda_quad > 0.0
    if use_quad and len(clear) < 2:
        logger.warning(
            "quadrilateral loss needs >= 2 clear triples, have %d; skipping the term",
            len(clear),
        )
        use_quad = False
    encoder_mode = model.mode is EmbeddingMode.ENCODER
    if encoder_mode:
        # static per-universe tensors, hoisted out of the step loop
        feats = np.array([segment_features(s) for s in universe])
        all_states = np.stack([s.states for s in universe])
        all_actions = np.stack([s.actions for s in universe])
        h_lens = np.array([len(s) for s in universe])
    else:
        positions = np.array([model.index[s.id] for s in universe], dtype=int)

    rng = np.random.default_rng(seed)
    trace: list[TraceEntry] = []
    for step in range(steps):
        if encoder_mode:
            z, cache = model.enc.forward(feats)
            ctx = ("encoder", cache)
        else:
            z = model.table[positions]
            ctx = ("table", positions)
        d_z = np.zeros_like(z)
        amb_v = quad_v = norm_v = recon_v = 0.0
        dec_grad = None

        if weights.lambda_amb > 0.0 and (len(clear_idx) or len(amb_idx)):
            amb_v, g = _amb_core(z, clear_idx, amb_idx, metric)
            d_z += weights.lambda_amb * g
        if use_quad:
            i = rng.integers(len(clear), size=quad_batch)
            j = rng.integers(len(clear) - 1, size=quad_batch)
            j = np.where(j >= i, j + 1, j)
            quads = np.column_stack(
                [pref_idx[i, 0], pref_idx[j, 0], pref_idx[i, 1], pref_idx[j, 1]]
            )
            quad_v, g = _quad_core(z, quads, metric)
            d_z += weights.lambda_quad * g
        if weights.lambda_norm > 0.0:
            norm_v, g = _norm_core(z)
            d_z += weights.lambda_norm * g
        if encoder_mode and recon_batch > 0:
            rows = rng.integers(len(universe), size=recon_batch)
            ts = rng.integers(h_lens[rows])
            recon_v, d_z_recon, dec_grad = _recon_core(
                model, all_states[rows, ts], all_actions[rows, ts], z[rows]
            )
            np.add.at(d_z, rows, d_z_recon)

        grad = model.backprop_z(ctx, d_z)
        if dec_grad is not None:
            grad[model.enc.n_params() :] += dec_grad
        model.set_params_vector(model.params_vector() - lr * grad)

        if step % trace_every == 0 or step == steps - 1:
            total = (
                recon_v
                + weights.lambda_amb * amb_v
                + weights.lambda_quad * quad_v
                + weights.lambda_norm * norm_v
            )
            trace.append(TraceEntry(step, total, amb_v, quad_v, norm_v, recon_v))
    return trace


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    worst_index: int
    message: str = ""


def gradient_check(
    loss_op: Callable[[EmbeddingModel], tuple[float, np.ndarray]],
    model,
    tolerance: float = 1e-5,
    h: float = 1e-6,
) -> GradCheckReport:
    """Compare an analytic gradient with central finite differences.

    ``model`` only needs ``params_vector``/``set_params_vector``; the reward
    nets reuse this checker. Relative error per coordinate is
    |g_a - g_n| / max(1, |g_a|, |g_n|).
    """
    theta0 = model.params_vector()
    _, analytic = loss_op(model)
    if not np.all(np.isfinite(analytic)):
        bad = int(np.flatnonzero(~np.isfinite(analytic))[0])
        return GradCheckReport(float("inf"), False, bad, f"non-finite gradient at parameter {bad}")

    def value_at(flat: np.ndarray) -> float:
        model.set_params_vector(flat)
        v, _ = loss_op(model)
        return v

    numeric = finite_difference_gradient(value_at, theta0, h=h)
    model.set_params_vector(theta0)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    rel = np.abs(analytic - numeric) / denom
    worst = int(np.argmax(rel))
    max_rel = float(rel[worst])
    return GradCheckReport(max_rel, max_rel <= tolerance, worst)


# ---------------------------------------------------------------------------
# Theory checks (margin and convex separability)
# ---------------------------------------------------------------------------


@dataclass
class SeparationReport:
    """Margin between clear and ambiguous pair distances plus the centroid
    hyperplane over preferred/non-preferred embeddings.

    Parts that lack data are None ("not applicable")."""

    d_plus_min: float | None = None
    d_minus_max: float | None = None
    margin: float | None = None
    centroid_mu_plus: np.ndarray | None = None
    centroid_mu_minus: np.ndarray | None = None
    w: np.ndarray | None = None
    b: float | None = None
    eta: float | None = None
    train_accuracy: float | None = None


def separation_report(
    model: EmbeddingModel,
    preferences: PreferenceDataset,
    metric: DistanceMetric = DistanceMetric.L2,
) -> SeparationReport:
    report = SeparationReport()
    clear = preferences.clear
    amb = preferences.ambiguous

    def dist(t: PreferenceTriple) -> float:
        z, _ = model.encode_segments([t.seg0, t.seg1])
        return float(pair_distances(z[0:1], z[1:2], metric)[0])

    if clear:
        report.d_plus_min = min(dist(t) for t in clear)
    if amb:
        report.d_minus_max = max(dist(t) for t in amb)
    if clear and amb:
        report.margin = report.d_plus_min - report.d_minus_max

    if clear:
        z_plus, _ = model.encode_segments([t.preferred for t in clear])
        z_minus, _ = model.encode_segments([t.rejected for t in clear])
        mu_plus = z_plus.mean(axis=0)
        mu_minus = z_minus.mean(axis=0)
        w = mu_plus - mu_minus
        w_norm = float(np.linalg.norm(w))
        report.centroid_mu_plus = mu_plus
        report.centroid_mu_minus = mu_minus
        if w_norm > 0.0:
            b = -0.5 * (float(mu_plus @ mu_plus) - float(mu_minus @ mu_minus))
            report.w = w
            report.b = b
            report.eta = 0.5 * w_norm
            signed_plus = (z_plus @ w + b) / w_norm
            signed_minus = (z_minus @ w + b) / w_norm
            correct = int((signed_plus > 0).sum()) + int((signed_minus < 0).sum())
            report.train_accuracy = correct / (len(signed_plus) + len(signed_minus))
    return report


# ---------------------------------------------------------------------------
# 2-D projection export
# ---------------------------------------------------------------------------


def pca_project(z: np.ndarray, orient_by: np.ndarray | None = None) -> np.ndarray:
    """Project rows of ``z`` onto the top-2 principal axes.

    Components are oriented so their correlation with ``orient_by`` is
    >= 0 (falling back to a sign convention on the component itself when
    the correlation is degenerate).
    """
    z = np.asarray(z, dtype=float)
    if len(z) < 2:
        raise ValueError("need at least 2 embeddings for a projection")
    if z.shape[1] < 2:
        raise ValueError("embedding dimension must be >= 2 to project to 2-D")
    centered = z - z.mean(axis=0)
    if float(np.abs(centered).max()) == 0.0:
        raise ValueError("zero variance: all embeddings are identical")
    cov = centered.T @ centered / (len(z) - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    components = eigvecs[:, np.argsort(eigvals)[::-1][:2]]
    proj = centered @ components
    for k in range(2):
        col = proj[:, k]
        flip = False
        if orient_by is not None and np.std(col) > 0 and np.std(orient_by) > 0:
            corr = float(np.corrcoef(col, orient_by)[0, 1])
            if abs(corr) > 1e-12:
                flip = corr < 0
            else:
                flip = components[np.argmax(np.abs(components[:, k])), k] < 0
        else:
            flip = components[np.argmax(np.abs(components[:, k])), k] < 0
        if flip:
            proj[:, k] = -col
            components[:, k] = -components[:, k]
    return proj


def export_embeddings(
    model: EmbeddingModel, segments: Sequence[Segment], path: str | Path
) -> np.ndarray:
    """Write (segment_id, pc1, pc2, true_return_normalized) rows as CSV."""
    segments = list(segments)
    if len(segments) < 2:
        raise ValueError("need at least 2 segments to export")
    z, _ = model.encode_segments(segments)
    returns = np.array([s.true_return for s in segments])
    proj = pca_project(z, orient_by=returns)
    lo, hi = float(returns.min()), float(returns.max())
    if hi > lo:
        normalized = (returns - lo) / (hi - lo)
    else:
        normalized = np.full(len(returns), 0.5)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_id", "pc1", "pc2", "true_return_normalized"])
        for seg, row, r in zip(segments, proj, normalized):
            writer.writerow([seg.id, repr(float(row[0])), repr(float(row[1])), repr(float(r))])
    return proj


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def save_model(model: EmbeddingModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if model.mode is EmbeddingMode.TABLE:
        np.savez(
            path,
            schema_version=CHECKPOINT_VERSION,
            mode="table",
            dim=model.dim,
            ids=np.array(model.ids),
            table=model.table,
        )
    else:
        arrays = {
            "schema_version": CHECKPOINT_VERSION,
            "mode": "encoder",
            "dim": model.dim,
            "enc_sizes": np.array(model.enc.sizes),
            "dec_sizes": np.array(model.dec.sizes),
            "enc_params": model.enc.pack(),
            "dec_params": model.dec.pack(),
        }
        np.savez(path, **arrays)


def load_model(path: str | Path) -> EmbeddingModel:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["schema_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        mode = str(data["mode"])
        dim = int(data["dim"])
        if mode == "table":
            return EmbeddingModel(
                EmbeddingMode.TABLE,
                dim,
                ids=[str(s) for s in data["ids"]],
                table=data["table"],
            )
        enc_sizes = [int(s) for s in data["enc_sizes"]]
        dec_sizes = [int(s) for s in data["dec_sizes"]]
        enc = MLP(enc_sizes, activation="tanh")
        dec = MLP(dec_sizes, activation="tanh")
        enc.unpack(data["enc_params"])
        dec.unpack(data["dec_params"])
        return EmbeddingModel(EmbeddingMode.ENCODER, dim, enc=enc, dec=dec)
