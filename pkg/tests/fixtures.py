"""Fixture builders: hand-constructed nets, datasets, and spec documents.

The central trick: a relu hidden layer can realize any piecewise-linear
function of one input coordinate, so we build two-class nets whose runner-up
score is sigmoid(f(u)) for f interpolating logit(m + s * Phi^-1(quantile)).
Uniform box sampling then pushes forward to scores that are normal to within
the interpolation error, which a 256-knot lattice keeps below what the
normality gate can detect at k = 5000. Quantiles are clipped at 1.5e-3, i.e.
the target is a truncated normal; the missing tail mass is far below
detectability.
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy import stats as sps

DEFAULT_KNOTS = 256
DEFAULT_QCLIP = 1.5e-3


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _pwl_units(ts: np.ndarray, ys: np.ndarray, dim: int, d_total: int):
    """Hidden relu units plus output weights realizing the PWL interpolant of (ts, ys).

    Valid for inputs in [ts[0], ts[-1]] with ts[0] > 0 (the linear term rides
    on relu(u) = u for positive u).
    """
    slopes = np.diff(ys) / np.diff(ts)
    rows = []
    out_w = []
    e = np.zeros(d_total)
    e[dim] = 1.0
    rows.append((e.copy(), 0.0))
    out_w.append(slopes[0])
    for j in range(1, len(ts) - 1):
        rows.append((e.copy(), -float(ts[j])))
        out_w.append(float(slopes[j] - slopes[j - 1]))
    const = float(ys[0] - slopes[0] * ts[0])
    return rows, out_w, const


def _assemble_two_class(units_per_dim, label_true: int = 0) -> dict:
    """Stack per-dim PWL units into a 2-class builtin net doc: logits (0, sum of PWLs)."""
    rows, out_w, const = [], [], 0.0
    for r, w, c in units_per_dim:
        rows.extend(r)
        out_w.extend(w)
        const += c
    w1 = np.stack([r[0] for r in rows])
    b1 = np.array([r[1] for r in rows])
    w2 = np.zeros((2, len(rows)))
    b2 = np.zeros(2)
    wrong = 1 - label_true
    w2[wrong, :] = out_w
    b2[wrong] = const
    return {
        "layers": [
            {"w": w1.tolist(), "b": b1.tolist(), "act": "relu"},
            {"w": w2.tolist(), "b": b2.tolist(), "act": "id"},
        ],
        "labels": 2,
    }


def probit_net_1d(
    lo: float,
    hi: float,
    m: float,
    s: float,
    d_total: int = 2,
    active_dim: int = 0,
    knots: int = DEFAULT_KNOTS,
    qclip: float = DEFAULT_QCLIP,
) -> dict:
    """Net whose runner-up score on u[active_dim] ~ U[lo, hi] is ~ Normal(m, s^2)."""
    ts = np.linspace(lo, hi, knots)
    q = np.clip((ts - lo) / (hi - lo), qclip, 1 - qclip)
    ys = np.array([_logit(m + s * sps.norm.ppf(qi)) for qi in q])
    return _assemble_two_class([_pwl_units(ts, ys, active_dim, d_total)])


def probit_net_2d(
    lo: float,
    hi: float,
    m: float,
    s_logit: float,
    d_total: int = 2,
    knots: int = DEFAULT_KNOTS,
    qclip: float = DEFAULT_QCLIP,
) -> dict:
    """Net whose logit is a sum of two probit PWLs: score ~ sigmoid(logit(m) + s_logit * Z).

    With s_logit small the sigmoid is locally affine and the score stays
    normal to well below gate detectability.
    """
    per_dim = []
    w = s_logit / math.sqrt(2.0)
    for dim in range(2):
        ts = np.linspace(lo, hi, knots)
        q = np.clip((ts - lo) / (hi - lo), qclip, 1 - qclip)
        ys = w * sps.norm.ppf(q)
        per_dim.append(_pwl_units(ts, ys, dim, d_total))
    rows, out_w, const = per_dim[0]
    base = _assemble_two_class(per_dim)
    base["layers"][1]["b"][1] += _logit(m)
    return base


def lognormal_net(
    lo: float,
    hi: float,
    median: float,
    sigma: float,
    d_total: int = 2,
    active_dim: int = 0,
    knots: int = DEFAULT_KNOTS,
    qclip: float = DEFAULT_QCLIP,
) -> dict:
    """Net whose runner-up score is ~ lognormal(ln median, sigma^2): skewed, so the
    normality gate rejects raw scores but passes after the power transform."""
    ts = np.linspace(lo, hi, knots)
    q = np.clip((ts - lo) / (hi - lo), qclip, 1 - qclip)
    ys = np.array([_logit(median * math.exp(sigma * sps.norm.ppf(qi))) for qi in q])
    return _assemble_two_class([_pwl_units(ts, ys, active_dim, d_total)])


def bimodal_radial_net(
    center: float,
    eps: float,
    m_inner: float,
    m_outer: float,
    s: float,
    knots_per_half: int = 128,
    qclip: float = DEFAULT_QCLIP,
) -> dict:
    """One-input net whose score depends on |u - center|: inner magnitudes map to
    ~N(m_inner, s^2), outer to ~N(m_outer, s^2). The full neighborhood is a
    bimodal mixture (gate rejects); each half-magnitude band is unimodal."""

    def target(m: float) -> float:
        half = eps / 2.0
        if m <= half:
            q = min(max(m / half, qclip), 1 - qclip)
            return m_inner + s * float(sps.norm.ppf(q))
        q = min(max((m - half) / half, qclip), 1 - qclip)
        return m_outer + s * float(sps.norm.ppf(q))

    ms = np.concatenate([
        np.linspace(0.0, eps / 2, knots_per_half),
        np.linspace(eps / 2 + eps * 1e-4, eps, knots_per_half),
    ])
    ts = np.concatenate([center - ms[:0:-1], center + ms])  # drop the mirrored m=0 duplicate
    ys = np.array([_logit(target(abs(t - center))) for t in ts])
    return _assemble_two_class([_pwl_units(ts, ys, 0, 1)])


def sharp_boundary_net(threshold: float, slope: float = 400.0, d_total: int = 2) -> dict:
    """Near-step score in u[0]: crosses 0.5 at the threshold; scores are so
    concentrated at the extremes that no transform recovers normality."""
    w = [[0.0] * d_total, [0.0] * d_total]
    w[1][0] = slope
    return linear_net(w, [0.0, -slope * threshold])


def linear_net(weights, biases, labels: int = 2) -> dict:
    """Single identity layer followed by softmax."""
    return {
        "layers": [{"w": [list(map(float, r)) for r in weights],
                    "b": list(map(float, biases)), "act": "id"}],
        "labels": labels,
    }


def zero_net(d: int = 2, labels: int = 2) -> dict:
    return linear_net([[0.0] * d for _ in range(labels)], [0.0] * labels, labels)


def text_net(length: int, alpha, bias: float) -> dict:
    """Two-class linear net over normalized codepoints: logit_1 = sum alpha_i cp_i / 128 + bias."""
    w = [[0.0] * length, [a / 128.0 for a in alpha]]
    return linear_net(w, [0.0, bias], 2)


def write_model(path, doc: dict) -> str:
    path = str(path)
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return path


def write_jsonl_dataset(path, records) -> str:
    path = str(path)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


def image_record(point_id: str, values, shape, label: int) -> dict:
    return {"id": point_id, "label": label, "input": list(map(float, values)), "shape": list(shape)}


def text_record(point_id: str, text: str, label: int) -> dict:
    return {"id": point_id, "label": label, "text": text}


def spec_doc(
    domains,
    delta: float = 0.05,
    alpha: float = 0.05,
    category: int = 0,
    seed: int = 20240817,
    samples_per_point: int = 200,
    points_per_category: int = 10,
    dataset_ref: str = "dataset.jsonl",
    authority_id: str = "fixture-authority",
) -> dict:
    return {
        "authority_id": authority_id,
        "delta": delta,
        "alpha": alpha,
        "category": category,
        "dataset_ref": dataset_ref,
        "seed": seed,
        "samples_per_point": samples_per_point,
        "points_per_category": points_per_category,
        "domains": domains,
    }


def domain_doc(name="linf", kind="LinfUniform", epsilon=0.1, omega=1.0, sub_delta=0.04, tau=0.5) -> dict:
    return {"name": name, "kind": kind, "epsilon": epsilon, "omega": omega,
            "sub_delta": sub_delta, "tau": tau}


def write_spec(path, doc: dict) -> str:
    path = str(path)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path
