"""Forward regression-forest EM model and inverse passive synthesizers.

The forward model maps spiral geometry [t, w, s, r] to the four-component
EM response; the inverse synthesizer picks, per fractional-turn class, the
dataset geometry maximizing a score that rewards z-scored Q_peak / f_peakQ /
f_SRF and penalizes relative inductance deviation. CPWs and T-lines use a
plain k-NN inverse on their datasets (no forest needed there).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin

from . import em_oracle as em
from .dataset import EmDataset
from .errors import (ExtrapolationError, InsufficientData, NoFeasibleInductor,
                     UnsupportedSchema)
from .tech import TechParams

MODEL_SCHEMA = 1

TARGET_NAMES = ("L", "Q_peak", "f_peakQ", "f_SRF")


@njit(cache=True)
def _grow_tree(X, y, max_depth, min_leaf):
    """CART regression tree: variance-reduction splits over all features,
    mean-vector leaves. Returns flat node arrays."""
    n, n_feat = X.shape
    m = y.shape[1]
    max_nodes = 2 * (n // min_leaf) + 3
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros((max_nodes, m))

    idx = np.arange(n)
    # stack rows: node, start, end, depth
    stack = np.zeros((max_nodes, 4), np.int64)
    stack[0] = (0, 0, n, 0)
    n_stack = 1
    n_nodes = 1

    while n_stack > 0:
        n_stack -= 1
        node, start, end, depth = stack[n_stack]
        n_node = end - start

        total = np.zeros(m)
        for i in range(start, end):
            row = idx[i]
            for t in range(m):
                total[t] += y[row, t]
        for t in range(m):
            value[node, t] = total[t] / n_node

        if depth >= max_depth or n_node < 2 * min_leaf:
            continue

        parent_score = 0.0
        for t in range(m):
            parent_score += total[t] * total[t] / n_node

        best_score = parent_score + 1e-12
        best_feat = -1
        best_thr = 0.0
        xs = np.empty(n_node)
        csum = np.empty(m)
        for j in range(n_feat):
            for i in range(n_node):
                xs[i] = X[idx[start + i], j]
            order = np.argsort(xs, kind="mergesort")
            for t in range(m):
                csum[t] = 0.0
            for i in range(n_node - 1):
                row = idx[start + order[i]]
                for t in range(m):
                    csum[t] += y[row, t]
                n_l = i + 1
                n_r = n_node - n_l
                if n_l < min_leaf:
                    continue
                if n_r < min_leaf:
                    break
                x_i = xs[order[i]]
                x_next = xs[order[i + 1]]
                if x_i == x_next:
                    continue
                score = 0.0
                for t in range(m):
                    score += csum[t] * csum[t] / n_l
                    d = total[t] - csum[t]
                    score += d * d / n_r
                if score > best_score:
                    best_score = score
                    best_feat = j
                    best_thr = 0.5 * (x_i + x_next)

        if best_feat < 0:
            continue

        # stable partition of idx[start:end] around the split
        buf_l = np.empty(n_node, np.int64)
        buf_r = np.empty(n_node, np.int64)
        nl = 0
        nr = 0
        for i in range(start, end):
            row = idx[i]
            if X[row, best_feat] <= best_thr:
                buf_l[nl] = row
                nl += 1
            else:
                buf_r[nr] = row
                nr += 1
        for i in range(nl):
            idx[start + i] = buf_l[i]
        for i in range(nr):
            idx[start + nl + i] = buf_r[i]

        l_node = n_nodes
        r_node = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = l_node
        right[node] = r_node
        stack[n_stack] = (l_node, start, start + nl, depth + 1)
        stack[n_stack + 1] = (r_node, start + nl, end, depth + 1)
        n_stack += 2

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], value[:n_nodes])


@njit(cache=True)
def _forest_leaves(feature, threshold, left, right, roots, X):
    """Leaf node index for every (tree, query) pair."""
    n_trees = roots.shape[0]
    n = X.shape[0]
    out = np.empty((n_trees, n), np.int64)
    for b in range(n_trees):
        root = roots[b]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[b, i] = node
    return out


class ForestRegressor(BaseEstimator, RegressorMixin):
    """Bootstrap-aggregated regression forest with mean-of-trees prediction.

    Targets are standardized internally; the reported prediction is the
    per-tree mean mapped back to natural units.
    """

    def __init__(self, n_estimators=200, max_depth=16, min_samples_leaf=5,
                 random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        n = X.shape[0]
        self.y_mean_ = y.mean(axis=0)
        scale = y.std(axis=0)
        scale[scale == 0.0] = 1.0
        self.y_scale_ = scale
        y_std = np.ascontiguousarray((y - self.y_mean_) / self.y_scale_)
        self.feature_min_ = X.min(axis=0)
        self.feature_max_ = X.max(axis=0)

        rng = np.random.default_rng(self.random_state)
        feats, thrs, lefts, rights, values, roots = [], [], [], [], [], []
        offset = 0
        for _ in range(self.n_estimators):
            boot = rng.integers(0, n, size=n)
            f, t, l, r, v = _grow_tree(np.ascontiguousarray(X[boot]),
                                       np.ascontiguousarray(y_std[boot]),
                                       self.max_depth, self.min_samples_leaf)
            n_nodes = f.shape[0]
            roots.append(offset)
            feats.append(f)
            thrs.append(t)
            # child indices shifted into the stacked arrays
            lefts.append(np.where(l >= 0, l + offset, -1))
            rights.append(np.where(r >= 0, r + offset, -1))
            values.append(v)
            offset += n_nodes
        self.node_feature_ = np.concatenate(feats)
        self.node_threshold_ = np.concatenate(thrs)
        self.node_left_ = np.concatenate(lefts)
        self.node_right_ = np.concatenate(rights)
        self.node_value_ = np.concatenate(values)
        self.tree_roots_ = np.array(roots, dtype=np.int64)
        return self

    def predict_per_tree(self, X):
        """Natural-unit per-tree predictions, shape (n_trees, n, m)."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        leaves = _forest_leaves(self.node_feature_, self.node_threshold_,
                                self.node_left_, self.node_right_,
                                self.tree_roots_, X)
        return self.node_value_[leaves] * self.y_scale_ + self.y_mean_

    def predict(self, X):
        return self.predict_per_tree(X).mean(axis=0)

    def to_doc(self) -> dict:
        return {
            "params": self.get_params(),
            "y_mean": self.y_mean_.tolist(),
            "y_scale": self.y_scale_.tolist(),
            "feature_min": self.feature_min_.tolist(),
            "feature_max": self.feature_max_.tolist(),
            "tree_roots": self.tree_roots_.tolist(),
            "node_feature": self.node_feature_.tolist(),
            "node_threshold": self.node_threshold_.tolist(),
            "node_left": self.node_left_.tolist(),
            "node_right": self.node_right_.tolist(),
            "node_value": self.node_value_.tolist(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ForestRegressor":
        model = cls(**doc["params"])
        model.y_mean_ = np.array(doc["y_mean"])
        model.y_scale_ = np.array(doc["y_scale"])
        model.feature_min_ = np.array(doc["feature_min"])
        model.feature_max_ = np.array(doc["feature_max"])
        model.tree_roots_ = np.array(doc["tree_roots"], dtype=np.int64)
        model.node_feature_ = np.array(doc["node_feature"], dtype=np.int64)
        model.node_threshold_ = np.array(doc["node_threshold"])
        model.node_left_ = np.array(doc["node_left"], dtype=np.int64)
        model.node_right_ = np.array(doc["node_right"], dtype=np.int64)
        model.node_value_ = np.array(doc["node_value"]).reshape(
            len(doc["node_feature"]), -1)
        return model


def _augment(X):
    """Raw spiral parameters plus derived geometric descriptors.

    The derived columns (average diameter, fill ratio, unwound length) give
    axis-aligned splits direct access to the length scales the response
    varies with, which sharpens the trees considerably.
    """
    t, w, s, r = X.T
    d_in = 2.0 * r
    d_out = d_in + 2.0 * t * (w + s)
    d_avg = 0.5 * (d_in + d_out)
    rho = (d_out - d_in) / (d_out + d_in)
    length = 4.0 * t * d_avg
    return np.column_stack([t, w, s, r, d_avg, rho, length])


class EmForestModel:
    """Forward spiral EM model: one 200-tree forest per response component.

    Each forest is trained on the log of its (strictly positive) target so
    splits optimize relative rather than absolute error across the three
    decades of inductance the dataset spans. Per-tree predictions are
    exponentiated back to natural units; the model prediction is their
    arithmetic mean over trees.
    """

    def __init__(self, n_estimators=200, max_depth=16, min_samples_leaf=5,
                 random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state
        self.forests_: list[ForestRegressor] = []

    @property
    def n_trees(self) -> int:
        return self.n_estimators

    def fit(self, X, Y):
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if (Y <= 0.0).any():
            raise ValueError("EM response targets must be strictly positive")
        self.feature_min_ = X.min(axis=0)
        self.feature_max_ = X.max(axis=0)
        XA = _augment(X)
        logY = np.log(Y)
        self.forests_ = []
        for j in range(Y.shape[1]):
            forest = ForestRegressor(self.n_estimators, self.max_depth,
                                     self.min_samples_leaf,
                                     self.random_state + j)
            forest.fit(XA, logY[:, j])
            self.forests_.append(forest)
        return self

    def predict_per_tree(self, X):
        """Natural-unit per-tree predictions, shape (n_trees, n, n_targets)."""
        XA = _augment(np.asarray(X, dtype=np.float64))
        per_target = [np.exp(f.predict_per_tree(XA))[:, :, 0]
                      for f in self.forests_]
        return np.stack(per_target, axis=-1)

    def predict(self, X):
        return self.predict_per_tree(X).mean(axis=0)

    def to_doc(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "targets": list(TARGET_NAMES),
            "params": {"n_estimators": self.n_estimators,
                       "max_depth": self.max_depth,
                       "min_samples_leaf": self.min_samples_leaf,
                       "random_state": self.random_state},
            "feature_min": self.feature_min_.tolist(),
            "feature_max": self.feature_max_.tolist(),
            "forests": [f.to_doc() for f in self.forests_],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EmForestModel":
        if doc.get("schema") != MODEL_SCHEMA:
            raise UnsupportedSchema(f"model schema {doc.get('schema')!r}")
        model = cls(**doc["params"])
        model.feature_min_ = np.array(doc["feature_min"])
        model.feature_max_ = np.array(doc["feature_max"])
        model.forests_ = [ForestRegressor.from_doc(d) for d in doc["forests"]]
        return model

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_doc(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "EmForestModel":
        with open(path) as fh:
            return cls.from_doc(json.load(fh))

    def digest(self) -> str:
        payload = json.dumps(self.to_doc(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass
class TrainReport:
    r2: dict           # per-target held-out R^2
    n_train: int
    n_test: int
    digest: str


def train_forest(dataset: EmDataset, n_estimators=200, max_depth=16,
                 min_samples_leaf=5, seed=0, test_fraction=0.2):
    """Train the forward EM forest on an inductor dataset.

    Returns (model, TrainReport); R^2 is measured per target on a held-out
    split the model never saw.
    """
    if dataset.kind != "inductor":
        raise InsufficientData(
            f"forest expects inductor dataset, got {dataset.kind}")
    n = len(dataset)
    if n < 100:
        raise InsufficientData(f"{n} rows < 100 minimum")
    X, Y = dataset.features(), dataset.targets()

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    model = EmForestModel(n_estimators, max_depth, min_samples_leaf, seed)
    model.fit(X[train_idx], Y[train_idx])
    pred = model.predict(X[test_idx])
    truth = Y[test_idx]
    ss_res = ((truth - pred) ** 2).sum(axis=0)
    ss_tot = ((truth - truth.mean(axis=0)) ** 2).sum(axis=0)
    r2 = 1.0 - ss_res / ss_tot

    report = TrainReport(
        r2={name: float(v) for name, v in zip(TARGET_NAMES, r2)},
        n_train=len(train_idx), n_test=len(test_idx), digest=model.digest())
    return model, report


def predict(model: EmForestModel, geom: em.InductorGeometry) -> em.EmResponse:
    """Forward EM estimate for one geometry. Extrapolation warns, never errors."""
    x = np.array([[geom.t, geom.w, geom.s, geom.r]])
    if ((x < model.feature_min_ - 1e-12).any()
            or (x > model.feature_max_ + 1e-12).any()):
        warnings.warn(f"geometry {geom} outside training ranges; extrapolating",
                      stacklevel=2)
    L, q, fq, fs = model.predict(x)[0]
    return em.EmResponse(L=float(L), q_peak=float(q), f_peak_q=float(fq),
                         f_srf=float(fs))


@dataclass(frozen=True)
class VariantChoice:
    geometry: em.InductorGeometry
    predicted: em.EmResponse
    score: float


@dataclass(frozen=True)
class VariantSet:
    """Per-fractional-turn-class winners for one inductance target."""

    l_target: float
    eps: float
    choices: dict  # frac class -> VariantChoice

    @property
    def best(self) -> VariantChoice:
        order = {c: i for i, c in enumerate(em.FRAC_CLASSES)}
        return max(self.choices.values(),
                   key=lambda ch: (ch.score, -order[ch.geometry.frac_class]))


class InductorSynthesizer:
    """Inverse spiral design over a labeled dataset with forest predictions.

    Dataset predictions are cached at construction, so each query is a band
    filter plus a per-class argmax (well under a millisecond). A row is a
    candidate only when both its predicted and its labeled inductance sit
    inside the eps-band, so returned geometries stay within tolerance under
    the reference model as well as the surrogate.
    """

    def __init__(self, dataset: EmDataset, model: EmForestModel):
        if dataset.kind != "inductor":
            raise ValueError("inductor dataset required")
        self.dataset = dataset
        self.model = model
        self._geoms = [g for g, _ in dataset.rows]
        self._pred = model.predict(dataset.features())  # columns: L, Q, fQ, fS
        self._label_l = dataset.targets()[:, 0]
        self._class_ids = np.array([em.FRAC_CLASSES.index(g.frac_class)
                                    for g in self._geoms])

    def query(self, l_target: float, eps: float = 0.05) -> VariantSet:
        if l_target <= 0.0:
            raise ValueError("l_target must be positive")
        pred_l = self._pred[:, 0]
        rel_dev = (pred_l - l_target) / l_target
        band = (np.abs(rel_dev) <= eps) \
            & (np.abs(self._label_l - l_target) <= eps * l_target)
        if not band.any():
            raise NoFeasibleInductor(
                f"no dataset geometry within {eps:.0%} of {l_target:.4g} H")

        # z-score each maximized response component over the band
        sum_z = np.zeros(int(band.sum()))
        for col in (1, 2, 3):
            vals = self._pred[band, col]
            std = vals.std()
            if std > 0.0:
                sum_z = sum_z + (vals - vals.mean()) / std
        dev2 = rel_dev[band] ** 2
        score = sum_z - dev2
        band_idx = np.nonzero(band)[0]
        band_cls = self._class_ids[band]

        choices = {}
        for ci, cname in enumerate(em.FRAC_CLASSES):
            in_class = band_cls == ci
            if not in_class.any():
                continue
            local = np.nonzero(in_class)[0]
            # maximize the z-score sum; the (bounded, << 1) squared relative
            # L deviation only breaks ties, so the argmax is invariant under
            # any common positive rescaling of the z-scores
            winner = max(local, key=lambda i: (sum_z[i], -dev2[i], -i))
            row = int(band_idx[winner])
            L, q, fq, fs = self._pred[row]
            choices[cname] = VariantChoice(
                geometry=self._geoms[row],
                predicted=em.EmResponse(float(L), float(q), float(fq), float(fs)),
                score=float(score[winner]))
        return VariantSet(l_target=l_target, eps=eps, choices=choices)


def _knn_inverse(features, targets, query, k):
    """Inverse-distance-weighted k-NN in z-scored target space."""
    lo, hi = targets.min(axis=0), targets.max(axis=0)
    if ((query < lo - 1e-12) | (query > hi + 1e-12)).any():
        raise ExtrapolationError(
            f"query {query.tolist()} outside dataset hull "
            f"[{lo.tolist()}, {hi.tolist()}]")
    scale = targets.std(axis=0)
    scale[scale == 0.0] = 1.0
    d = np.sqrt((((targets - query) / scale) ** 2).sum(axis=1))
    nearest = np.argsort(d, kind="stable")[:k]
    dn = d[nearest]
    if dn[0] == 0.0:
        return features[nearest[0]], nearest, True
    w = 1.0 / dn
    return (features[nearest] * w[:, None]).sum(axis=0) / w.sum(), nearest, False


def inverse_cpw(z_target: float, theta_target: float, dataset: EmDataset,
                k: int = 5) -> em.CpwGeometry:
    """k-NN inverse CPW design in normalized (Z, theta) space.

    After the inverse-distance-weighted geometry average, the length is
    rescaled to land exactly on the target phase (phase is linear in length
    and independent of the cross-section), so only the impedance carries
    interpolation error.
    """
    if dataset.kind != "cpw":
        raise ValueError("cpw dataset required")
    geom, nearest, exact = _knn_inverse(dataset.features(), dataset.targets(),
                                        np.array([z_target, theta_target]), k)
    if exact:
        return dataset.rows[int(nearest[0])][0]
    _, w_avg, s_avg = (float(v) for v in geom)
    theta_per_um = dataset.targets()[nearest[0], 1] \
        / dataset.features()[nearest[0], 0]
    return em.CpwGeometry(l=theta_target / theta_per_um, w=w_avg, s=s_avg)


def inverse_tline(l_target: float, dataset: EmDataset, k: int = 5) -> em.TlineGeometry:
    """k-NN inverse T-line design for a target equivalent inductance."""
    if dataset.kind != "tline":
        raise ValueError("tline dataset required")
    geom, nearest, exact = _knn_inverse(dataset.features(),
                                        dataset.targets()[:, :1],
                                        np.array([l_target]), k)
    if exact:
        return dataset.rows[int(nearest[0])][0]
    return em.TlineGeometry(l=float(geom[0]), w=float(geom[1]))


def select_passive_kind(l_target: float, tech: TechParams) -> str:
    """'tline' below the technology inductance floor, 'spiral' at or above it."""
    if l_target <= 0.0:
        raise ValueError("l_target must be positive")
    return "tline" if l_target < tech.l_min else "spiral"
