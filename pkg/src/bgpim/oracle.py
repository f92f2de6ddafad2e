"""Reference optimizer/quantization path for bit-exact verification.

Computes parameter updates directly on numpy vectors using the same
saturating fixed-point rules as the PIM datapath, accumulating terms in
exactly the order the compiled command streams do (saturating adds are not
associative, so equivalence is defined against the compiled order, not
mathematical reals).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fixedpoint import dequantize_vec, quantize_vec, sat_add32_vec
from .scaling import BYPASS, ScalerEntry

SGD = "sgd"
MOMENTUM = "momentum"
MOMENTUM_DECAY = "momentum_decay"
OPTIMIZER_KINDS = (SGD, MOMENTUM, MOMENTUM_DECAY)


@dataclass
class OptimizerSpec:
    """Optimizer kind plus its fitted scale factors and quantize shift.

    The entries must be the very ones programmed into the simulated scaler
    table: `neg_eta` for -(learning rate), `alpha` for the momentum factor,
    `neg_eta_beta` for -(learning rate * weight decay).
    """

    kind: str = MOMENTUM_DECAY
    neg_eta: ScalerEntry = ScalerEntry(-1, -7, 1, -9)     # -0.01 fitted
    alpha: ScalerEntry = ScalerEntry(1, 0, -1, -3)        # 0.9 fitted
    neg_eta_beta: ScalerEntry = ScalerEntry(-1, -13, -1, -15)  # -1e-4 fitted
    qshift: int = 16

    def __post_init__(self) -> None:
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}")


def reference_update_step(theta: np.ndarray, v: np.ndarray, g: np.ndarray,
                          spec: OptimizerSpec) -> tuple[np.ndarray, np.ndarray]:
    """(theta', v') in the compiled accumulation order.

    momentum_decay: v' = ((-eta)g + alpha*v) + (-eta*beta)theta; theta' = v' + theta
    momentum:       v' = (-eta)g + alpha*v;                      theta' = v' + theta
    sgd:            theta' = (-eta)g + theta; v unchanged.
    """
    theta = np.asarray(theta, dtype=np.int32)
    v = np.asarray(v, dtype=np.int32)
    g = np.asarray(g, dtype=np.int32)
    if not (theta.shape == v.shape == g.shape):
        raise ValueError("theta, v, g must have identical shapes")
    if spec.kind == SGD:
        t0 = spec.neg_eta.apply_vec(g)
        theta_new = sat_add32_vec(t0, BYPASS.apply_vec(theta))
        return theta_new, v.copy()
    t0 = spec.neg_eta.apply_vec(g)
    t1 = spec.alpha.apply_vec(v)
    v_new = sat_add32_vec(t0, t1)
    if spec.kind == MOMENTUM_DECAY:
        t0 = spec.neg_eta_beta.apply_vec(theta)
        v_new = sat_add32_vec(t0, v_new)
    theta_new = sat_add32_vec(v_new, BYPASS.apply_vec(theta))
    return theta_new, v_new


def reference_mixed_step(theta: np.ndarray, v: np.ndarray, qg: np.ndarray,
                         spec: OptimizerSpec, ratio: int = 4
                         ) -> dict[str, np.ndarray]:
    """Full mixed-precision step: dequantize gradients, update, re-quantize.

    `qg` holds low-precision gradient lanes. Returns the expected post-run
    contents of every array the update touches.
    """
    bits = 32 // ratio
    g = dequantize_vec(np.asarray(qg, dtype=np.int64), spec.qshift)
    theta_new, v_new = reference_update_step(theta, v, g, spec)
    q_theta = quantize_vec(theta_new, spec.qshift, bits=bits)
    return {"theta": theta_new, "v": v_new, "g": g,
            "q_theta": q_theta.astype(np.int64)}


def reference_quant_roundtrip(x: np.ndarray, qshift: int, bits: int = 8
                              ) -> tuple[np.ndarray, np.ndarray, int]:
    """(quantized, reconstructed, max abs error) for a lane vector."""
    x = np.asarray(x, dtype=np.int64)
    q = quantize_vec(x, qshift, bits=bits)
    xr = dequantize_vec(q, qshift).astype(np.int64)
    max_err = int(np.max(np.abs(xr - x))) if x.size else 0
    return q, xr, max_err


@dataclass
class RegionDiff:
    name: str
    index: int
    expected: int
    actual: int


def compare_memory(read_element, expected: dict[str, np.ndarray],
                   limit: int = 32) -> list[RegionDiff]:
    """Compare named array regions; empty list means bit-identical.

    `read_element(name, index) -> int` abstracts the simulator image so the
    comparison itself stays independent of placement internals.
    """
    diffs: list[RegionDiff] = []
    for name, exp in expected.items():
        for i, want in enumerate(exp):
            got = int(read_element(name, i))
            if got != int(want):
                diffs.append(RegionDiff(name, i, int(want), got))
                if len(diffs) >= limit:
                    return diffs
    return diffs
