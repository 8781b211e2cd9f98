"""Grouped low-rank expert adapter with sample-level routing.

The adapter sits next to a frozen linear map W0. Experts are grouped:
group i shares one down-projection A_i (rank x d_in) and owns n_members
up-projections B_ij (d_out x rank); the pair (A_i, B_ij) is one expert.
Three routers pick exactly one expert per sample: group scores from W_g
over the raw input, expert scores S_k from W_k over the raw input and
S_l from W_l over the group's down-projected input. Each score vector
sums the per-component softmaxes of the three pooled inputs (head,
relation, candidate block), so it sums to 3.

Routing is hard (deterministic argmax, lowest index on ties) and decided
once per layer per sample. In "exact" mode the selected expert's output
is added as-is, which starves the routers of gradient; the default
"gated" mode multiplies by the product of the selected group's and
expert's routing probabilities, so all three routers receive true
gradients (finite differences confirm them). A degenerate single-group,
single-member layer gates with exactly 1 and matches "exact" bitwise.

Forward code runs on `autodiff` ops: pass plain ndarrays for inference
or tape leaves for training; frozen tensors stay ndarrays and therefore
receive no gradient at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError


@dataclass(frozen=True)
class AdapterConfig:
    d_in: int
    d_out: int
    n_groups: int = 4
    n_members: int = 2
    rank: int = 4
    mode: str = "gated"  # "gated" | "exact"

    def validate(self):
        if min(self.d_in, self.d_out, self.n_groups, self.n_members, self.rank) < 1:
            raise ConfigError("adapter dims and counts must all be >= 1")
        if self.mode not in ("gated", "exact"):
            raise ConfigError(f"unknown adapter mode {self.mode!r}")


@dataclass
class RoutingDecision:
    """Record of one routed sample: selected (group, expert) plus the three
    score vectors, each of which sums to 3 (three stacked softmaxes)."""

    group_index: int
    expert_index: int
    group_scores: np.ndarray
    sk: np.ndarray
    sl: np.ndarray

    def __post_init__(self):
        for name, vec in (("group_scores", self.group_scores),
                          ("sk", self.sk), ("sl", self.sl)):
            if abs(float(np.sum(vec)) - 3.0) > 1e-9:
                raise ValueError(f"{name} does not sum to 3: {np.sum(vec)}")
        if self.group_index != ad.argmax_det(self.group_scores):
            raise ValueError("group_index is not the argmax of group_scores")
        if self.expert_index != ad.argmax_det(self.sk + self.sl):
            raise ValueError("expert_index is not the argmax of sk + sl")


def param_names(cfg: AdapterConfig):
    names = [f"a.{i}" for i in range(cfg.n_groups)]
    names += [f"b.{i}.{j}" for i in range(cfg.n_groups) for j in range(cfg.n_members)]
    return names + ["wg", "wk", "wl"]


def init_params(cfg: AdapterConfig, rng: np.random.Generator):
    """Random down-projections and routers, zero up-projections; the adapter
    contributes exactly nothing until B matrices move."""
    cfg.validate()
    std = 1.0 / np.sqrt(cfg.d_in)
    params = {}
    for i in range(cfg.n_groups):
        params[f"a.{i}"] = rng.normal(0.0, std, (cfg.rank, cfg.d_in))
        for j in range(cfg.n_members):
            params[f"b.{i}.{j}"] = np.zeros((cfg.d_out, cfg.rank))
    params["wg"] = rng.normal(0.0, std, (cfg.n_groups, cfg.d_in))
    params["wk"] = rng.normal(0.0, std, (cfg.n_members, cfg.d_in))
    params["wl"] = rng.normal(0.0, 1.0 / np.sqrt(cfg.rank), (cfg.n_members, cfg.rank))
    return params


def check_components(x_parts, d_in):
    if len(x_parts) != 3:
        raise ValueError("expected three pooled components (head, relation, candidates)")
    for x in x_parts:
        xd = x.data if isinstance(x, ad.Value) else np.asarray(x)
        if xd.shape != (d_in,):
            raise ValueError(f"component shape {xd.shape} != ({d_in},)")


def _softmax_sum(w, x_parts):
    s = ad.softmax(ad.matmul(w, x_parts[0]))
    for x in x_parts[1:]:
        s = ad.add(s, ad.softmax(ad.matmul(w, x)))
    return s


def route_group(x_parts, wg):
    """Group selection: sum of per-component softmaxes of W_g x_m."""
    scores = _softmax_sum(wg, x_parts)
    data = scores.data if isinstance(scores, ad.Value) else scores
    return ad.argmax_det(data), scores


def route_expert(x_parts, a_i, wk, wl):
    """Expert selection inside a group: S_k over raw inputs, S_l over the
    group's down-projected inputs, argmax of their sum."""
    sk = _softmax_sum(wk, x_parts)
    down = [ad.matmul(a_i, x) for x in x_parts]
    sl = _softmax_sum(wl, down)
    sk_d = sk.data if isinstance(sk, ad.Value) else sk
    sl_d = sl.data if isinstance(sl, ad.Value) else sl
    return ad.argmax_det(sk_d + sl_d), sk, sl, down


def forward(x_parts, params, w0, cfg: AdapterConfig):
    """Adapted map per component: y_m = W0 x_m + g * B_ij (A_i x_m).

    Exactly one expert contributes. g is 1 in "exact" mode; in "gated"
    mode g = (group_scores[i]/3) * ((S_k + S_l)[j]/6), the product of the
    selected group's and expert's routing probabilities, which gives all
    three routers a true gradient whenever the loss depends on the expert
    output.

    Returns ([y_h, y_r, y_t], RoutingDecision).
    """
    cfg.validate()
    check_components(x_parts, cfg.d_in)
    w0_d = w0.data if isinstance(w0, ad.Value) else np.asarray(w0)
    if w0_d.shape != (cfg.d_out, cfg.d_in):
        raise ValueError(f"w0 shape {w0_d.shape} != ({cfg.d_out}, {cfg.d_in})")

    gi, group_scores = route_group(x_parts, params["wg"])
    ei, sk, sl, down = route_expert(x_parts, params[f"a.{gi}"],
                                    params["wk"], params["wl"])
    combined = ad.add(sk, sl)
    decision = RoutingDecision(
        gi, ei,
        np.array(ad.raw(group_scores), copy=True),
        np.array(ad.raw(sk), copy=True),
        np.array(ad.raw(sl), copy=True),
    )

    b = params[f"b.{gi}.{ei}"]
    expert_out = [ad.matmul(b, dm) for dm in down]
    if cfg.mode == "gated":
        esel = ad.scale(1.0 / 6.0, ad.pick(combined, ei))
        gsel = ad.scale(1.0 / 3.0, ad.pick(group_scores, gi))
        g = ad.smul(gsel, esel)
        expert_out = [ad.smul(g, e) for e in expert_out]

    ys = [ad.add(ad.matmul(w0, x), e) for x, e in zip(x_parts, expert_out)]
    return ys, decision


def plain_forward(x_parts, params, w0, d_in):
    """Single ungrouped low-rank adapter (no routing): y = W0 x + B(A x)."""
    check_components(x_parts, d_in)
    ys = []
    for x in x_parts:
        ys.append(ad.add(ad.matmul(w0, x),
                         ad.matmul(params["b"], ad.matmul(params["a"], x))))
    return ys


def plain_init(d_in, d_out, rank, rng):
    return {"a": rng.normal(0.0, 1.0 / np.sqrt(d_in), (rank, d_in)),
            "b": np.zeros((d_out, rank))}


def count_params(cfg: AdapterConfig, n_layers: int):
    """Trainable vs per-sample activated parameter counts.

    Activated = one A, one B, and all three routers per layer (routing
    always runs in full; only a single expert's tensors touch the data).
    """
    cfg.validate()
    if n_layers < 1:
        raise ConfigError("n_layers must be >= 1")
    routers = cfg.n_groups * cfg.d_in + cfg.n_members * cfg.d_in + cfg.n_members * cfg.rank
    trainable = (cfg.n_groups * cfg.d_in * cfg.rank
                 + cfg.n_groups * cfg.n_members * cfg.rank * cfg.d_out
                 + routers)
    activated = cfg.d_in * cfg.rank + cfg.rank * cfg.d_out + routers
    return {"trainable": n_layers * trainable, "activated": n_layers * activated}
