"""Prototype learning: projection encoder, contrastive losses, Adam training.

Instances are raw exported embeddings h (length D).  A linear encoder W
(d_proto x D) maps them to the prototype space, where cosine similarity
drives two losses:

- instance-instance: for every ordered same-class pair (anchor, positive),
  -log( exp S(anchor, positive) / sum_{other != anchor} exp S(anchor, other) ),
  averaged over pairs.  Anchors in singleton classes contribute no pairs;
  with no pairs at all the loss is 0 by definition and training proceeds on
  the instance-prototype term alone.
- instance-prototype: for every instance, -log softmax over prototypes of
  S(instance, own prototype), averaged over instances.

All softmax-style expressions subtract the row maximum before
exponentiation.  Training is full-batch, single-threaded, and fully
deterministic in the config seed:  W is initialized first, then the
prototypes, both uniform in (-init_scale/sqrt(D), +init_scale/sqrt(D)),
filled row-major from one Philox stream.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateEpisodeError, NumericalError
from .rng import DeterministicRng

LOSS_VARIANTS = ("full", "proto_only", "instance_mean")


@dataclass
class ProjectionEncoder:
    """Linear map from raw embedding space (D) to prototype space (d_proto)."""

    weight: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise DataError("encoder weight must be a 2-D matrix")
        if not np.all(np.isfinite(self.weight)):
            raise NumericalError("encoder weight contains non-finite entries")

    @property
    def d_proto(self):
        return self.weight.shape[0]

    @property
    def dim(self):
        return self.weight.shape[1]


@dataclass
class PrototypeSet:
    """One learned vector per class; all must have strictly positive norm."""

    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise DataError("prototypes must form an N x d_proto matrix")

    @property
    def n_classes(self):
        return self.vectors.shape[0]

    @property
    def d_proto(self):
        return self.vectors.shape[1]


@dataclass(frozen=True)
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 200
    learning_rate: float = 0.01
    seed: int = 0
    loss_variant: str = "full"
    d_proto: int = 128
    init_scale: float = 1.0
    adam: AdamConfig = field(default_factory=AdamConfig)

    def __post_init__(self):
        if self.loss_variant not in LOSS_VARIANTS:
            raise DataError(f"loss_variant must be one of {LOSS_VARIANTS}, "
                            f"got {self.loss_variant!r}")
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be > 0")
        if self.steps < 0:
            raise DataError("steps must be >= 0")
        if self.d_proto < 1:
            raise DataError("d_proto must be >= 1")


@dataclass
class TrainResult:
    encoder: ProjectionEncoder
    prototypes: PrototypeSet
    loss_trace: tuple  # (step, loss_ins, loss_proto, loss_total) per step


def project(encoder, h):
    """W h: raw embedding to prototype space."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.shape[0] != encoder.dim:
        raise DataError(f"embedding has length {h.shape[-1] if h.ndim else 0}, "
                        f"encoder expects {encoder.dim}")
    return encoder.weight @ h


def cosine_similarity(a, b):
    """Dot product of the unit-normalized vectors; errors on zero norms."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("cosine_similarity needs two equal-length vectors")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericalError("cosine similarity undefined for zero-norm input")
    return float(np.clip(np.dot(a / na, b / nb), -1.0, 1.0))


def _flatten_groups(groups):
    """Per-class vector lists -> (matrix M x d, labels M).  Empty classes ok."""
    rows = []
    labels = []
    for c, grp in enumerate(groups):
        for v in grp:
            rows.append(np.asarray(v, dtype=np.float64))
            labels.append(c)
    if not rows:
        raise DegenerateEpisodeError("no instances in any class")
    return np.stack(rows), np.asarray(labels, dtype=np.intp)


def _unit_rows(mat, what):
    norms = np.linalg.norm(mat, axis=1)
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise NumericalError(f"zero-norm {what} at index {int(bad[0])}")
    return mat / norms[:, None], norms


def _logsumexp_rows(mat):
    """Row-wise log-sum-exp with max subtraction; -inf entries are skipped."""
    mx = np.max(mat, axis=1)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    ex = np.exp(mat - safe[:, None])
    return safe + np.log(np.sum(ex, axis=1))


def _pair_structure(labels):
    """Masks for the instance-instance loss over M flattened instances."""
    m = labels.shape[0]
    same = labels[:, None] == labels[None, :]
    eye = np.eye(m, dtype=bool)
    positives = same & ~eye
    return positives, eye


def instance_instance_loss(groups):
    """Pair-mean contrastive loss over projected instances.

    ``groups`` is a per-class list of projected vectors.  Returns 0.0 when
    no same-class pair exists (single-shot classes only).
    """
    vecs, labels = _flatten_groups(groups)
    unit, _ = _unit_rows(vecs, "instance")
    sims = unit @ unit.T
    positives, eye = _pair_structure(labels)
    n_pairs = int(positives.sum())
    if n_pairs == 0:
        return 0.0
    masked = np.where(eye, -np.inf, sims)
    lse = _logsumexp_rows(masked)
    per_anchor_pos = positives.sum(axis=1)
    total = float(np.sum(per_anchor_pos * lse) - np.sum(sims[positives]))
    return total / n_pairs


def instance_prototype_loss(groups, prototypes):
    """Mean over instances of -log softmax(S(v, own prototype))."""
    vecs, labels = _flatten_groups(groups)
    unit, _ = _unit_rows(vecs, "instance")
    punit, _ = _unit_rows(prototypes.vectors, "prototype")
    sims = unit @ punit.T
    lse = _logsumexp_rows(sims)
    own = sims[np.arange(labels.shape[0]), labels]
    return float(np.mean(lse - own))


def total_loss(groups, prototypes, loss_variant="full"):
    """(loss_ins, loss_proto, total) under the given variant."""
    if loss_variant not in ("full", "proto_only"):
        raise DataError(f"total_loss undefined for variant {loss_variant!r}")
    l_ins = instance_instance_loss(groups)
    l_proto = instance_prototype_loss(groups, prototypes)
    total = l_proto if loss_variant == "proto_only" else l_ins + l_proto
    return l_ins, l_proto, total


def _losses_and_grads(h_groups, weight, prototypes, loss_variant):
    """Forward + analytic backward pass.

    h_groups holds RAW embeddings per class; gradients are with respect to
    every entry of W and every prototype vector.  Returns
    (loss_ins, loss_proto, total, dW, dC).
    """
    h_mat, labels = _flatten_groups(h_groups)
    m = labels.shape[0]
    vecs = h_mat @ weight.T
    unit, norms = _unit_rows(vecs, "projected instance")
    punit, pnorms = _unit_rows(prototypes, "prototype")

    grad_v = np.zeros_like(vecs)

    # instance-instance part
    sims = unit @ unit.T
    positives, eye = _pair_structure(labels)
    n_pairs = int(positives.sum())
    if n_pairs > 0:
        masked = np.where(eye, -np.inf, sims)
        lse = _logsumexp_rows(masked)
        per_anchor_pos = positives.sum(axis=1)
        loss_ins = float(np.sum(per_anchor_pos * lse) - np.sum(sims[positives])) / n_pairs
        if loss_variant == "full":
            # dL/dS for each anchor-ordered cosine entry
            soft = np.exp(masked - lse[:, None])
            coeff = (per_anchor_pos[:, None] * soft - positives) / n_pairs
            both = coeff + coeff.T  # cosine is symmetric in its arguments
            grad_v += (both @ unit - np.sum(both * sims, axis=1)[:, None] * unit) \
                / norms[:, None]
    else:
        loss_ins = 0.0

    # instance-prototype part
    psims = unit @ punit.T
    plse = _logsumexp_rows(psims)
    own = psims[np.arange(m), labels]
    loss_proto = float(np.mean(plse - own))
    pcoeff = np.exp(psims - plse[:, None])
    pcoeff[np.arange(m), labels] -= 1.0
    pcoeff /= m
    grad_v += (pcoeff @ punit - np.sum(pcoeff * psims, axis=1)[:, None] * unit) \
        / norms[:, None]
    grad_c = (pcoeff.T @ unit - np.sum(pcoeff * psims, axis=0)[:, None] * punit) \
        / pnorms[:, None]

    total = loss_proto if loss_variant == "proto_only" else loss_ins + loss_proto
    for name, value in (("loss_ins", loss_ins), ("loss_proto", loss_proto)):
        if not np.isfinite(value):
            raise NumericalError(f"{name} is non-finite")
    grad_w = grad_v.T @ h_mat
    return loss_ins, loss_proto, total, grad_w, grad_c


def loss_gradients(h_groups, encoder, prototypes, loss_variant="full"):
    """Analytic gradients of the training objective.

    h_groups holds raw (unprojected) embeddings per class; the encoder is
    applied internally so the W gradient is available.  Returns (dW, dC).
    """
    if loss_variant not in ("full", "proto_only"):
        raise DataError(f"no gradients for variant {loss_variant!r}")
    _, _, _, grad_w, grad_c = _losses_and_grads(
        h_groups, encoder.weight, prototypes.vectors, loss_variant)
    if not (np.all(np.isfinite(grad_w)) and np.all(np.isfinite(grad_c))):
        raise NumericalError("non-finite gradient entries")
    return grad_w, grad_c


@dataclass
class AdamState:
    t: int
    m: list
    v: list


def adam_init(params):
    return AdamState(t=0, m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state, learning_rate, adam=AdamConfig()):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DataError("adam_step: params/grads/state length mismatch")
    t = state.t + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DataError("adam_step: parameter/gradient shape mismatch")
        m = adam.beta1 * m + (1.0 - adam.beta1) * g
        v = adam.beta2 * v + (1.0 - adam.beta2) * g * g
        m_hat = m / (1.0 - adam.beta1**t)
        v_hat = v / (1.0 - adam.beta2**t)
        new_params.append(p - learning_rate * m_hat / (np.sqrt(v_hat) + adam.epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(t=t, m=new_m, v=new_v)


def _episode_h_groups(episode):
    """Raw embeddings grouped by assigned label, canonical order, float64."""
    return [[np.asarray(rec.embedding, dtype=np.float64) for rec in grp]
            for grp in episode.groups()]


def train(episode, header, config):
    """Learn (W, prototypes) from an episode.

    Variants:  ``full`` and ``proto_only`` run ``config.steps`` joint Adam
    updates on W and the prototypes from seeded random init, tracing
    (step, loss_ins, loss_proto, total) before each update.  ``instance_mean``
    keeps the randomly initialized W fixed and sets every prototype to the
    arithmetic mean of its class's projected instances, with no optimization
    and an empty trace.
    """
    h_groups = _episode_h_groups(episode)
    dim = header.dim
    rng = DeterministicRng(config.seed)
    scale = config.init_scale / np.sqrt(dim)
    weight = rng.uniforms((config.d_proto, dim), -scale, scale)
    protos = rng.uniforms((episode.n_way, config.d_proto), -scale, scale)

    if config.loss_variant == "instance_mean":
        means = []
        for c, grp in enumerate(h_groups):
            if not grp:
                raise DegenerateEpisodeError(
                    f"instance_mean variant: class {c} has no support instances")
            projected = np.stack(grp) @ weight.T
            mean = projected.mean(axis=0)
            if np.linalg.norm(mean) == 0.0:
                raise NumericalError(f"class {c} mean prototype has zero norm")
            means.append(mean)
        return TrainResult(encoder=ProjectionEncoder(weight),
                           prototypes=PrototypeSet(np.stack(means)),
                           loss_trace=())

    trace = []
    params = [weight, protos]
    state = adam_init(params)
    for step in range(config.steps):
        l_ins, l_proto, total, grad_w, grad_c = _losses_and_grads(
            h_groups, params[0], params[1], config.loss_variant)
        trace.append((step, l_ins, l_proto, total))
        params, state = adam_step(params, [grad_w, grad_c], state,
                                  config.learning_rate, config.adam)
    return TrainResult(encoder=ProjectionEncoder(params[0]),
                       prototypes=PrototypeSet(params[1]),
                       loss_trace=tuple(trace))


# ---------------------------------------------------------------------------
# checkpoint serialization (NDJSON: header, W rows, prototypes, loss trace)
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    encoder: ProjectionEncoder
    prototypes: PrototypeSet
    loss_trace: tuple
    meta: dict  # dim, d_proto, class_names, loss_variant, seed, ...


def save_checkpoint(result, header, config, path):
    """Write an NDJSON checkpoint; float64 values round-trip exactly."""
    meta = {
        "kind": "protoverb_checkpoint",
        "format_version": 1,
        "dim": header.dim,
        "d_proto": result.encoder.d_proto,
        "n_classes": result.prototypes.n_classes,
        "class_names": list(header.class_names[:result.prototypes.n_classes]),
        "loss_variant": config.loss_variant,
        "seed": config.seed,
        "steps": config.steps,
        "learning_rate": config.learning_rate,
        "init_scale": config.init_scale,
        "adam": {"beta1": config.adam.beta1, "beta2": config.adam.beta2,
                 "epsilon": config.adam.epsilon},
        "template_id": header.template_id,
        "model_id": header.model_id,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta) + "\n")
        for i, row in enumerate(result.encoder.weight):
            fh.write(json.dumps({"kind": "encoder_row", "row": i,
                                 "values": [float(v) for v in row]}) + "\n")
        for c, vec in enumerate(result.prototypes.vectors):
            fh.write(json.dumps({"kind": "prototype", "class_index": c,
                                 "values": [float(v) for v in vec]}) + "\n")
        for step, l_ins, l_proto, total in result.loss_trace:
            fh.write(json.dumps({"kind": "loss_step", "step": step,
                                 "loss_ins": l_ins, "loss_proto": l_proto,
                                 "loss_total": total}) + "\n")
    return str(path)


def load_checkpoint(path):
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    with fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise DataError("empty checkpoint file")
    try:
        meta = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"checkpoint header: invalid JSON ({exc.msg})", line=1) from None
    if meta.get("kind") != "protoverb_checkpoint" or meta.get("format_version") != 1:
        raise DataError("not a recognized checkpoint header", line=1)
    rows = {}
    protos = {}
    trace = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON ({exc.msg})", line=lineno) from None
        kind = obj.get("kind")
        if kind == "encoder_row":
            rows[obj["row"]] = obj["values"]
        elif kind == "prototype":
            protos[obj["class_index"]] = obj["values"]
        elif kind == "loss_step":
            trace.append((obj["step"], obj["loss_ins"], obj["loss_proto"],
                          obj["loss_total"]))
        else:
            raise DataError(f"unknown checkpoint line kind {kind!r}", line=lineno)
    d_proto, dim, n = meta["d_proto"], meta["dim"], meta["n_classes"]
    if sorted(rows) != list(range(d_proto)):
        raise DataError("checkpoint is missing encoder rows")
    if sorted(protos) != list(range(n)):
        raise DataError("checkpoint is missing prototypes")
    weight = np.array([rows[i] for i in range(d_proto)], dtype=np.float64)
    if weight.shape != (d_proto, dim):
        raise DataError("encoder row length does not match header dim")
    pvecs = np.array([protos[i] for i in range(n)], dtype=np.float64)
    if pvecs.shape != (n, d_proto):
        raise DataError("prototype length does not match d_proto")
    return Checkpoint(encoder=ProjectionEncoder(weight),
                      prototypes=PrototypeSet(pvecs),
                      loss_trace=tuple(trace), meta=meta)
