"""Transfer rules: step functions of the report error, bounded in [0, 1].

Every transfer here is piecewise constant with compact support (so it
vanishes at infinity), represented by sorted breakpoint edges and the value
on each cell.  Two constructors cover the contract space:

* ``StepTransfer.cutoff(d)`` pays the full unit budget when the report is
  within d of the state;
* ``StepTransfer.from_cells(values, x_max)`` tabulates a symmetric step
  function on a uniform grid over [-x_max, x_max].

Shift / symmetrize / overlay operations produce the intermediate transfers
used by the improvement pipeline and the counterexample construction.
"""

from __future__ import annotations

import numpy as np

__all__ = ["StepTransfer", "TransferValidationError"]

VALUE_TOL = 1e-12


class TransferValidationError(ValueError):
    """Transfer violates the [0, 1] budget/liability bounds or is malformed."""


class StepTransfer:
    """Piecewise-constant transfer with edges e_0 < ... < e_m and values v_k on [e_k, e_{k+1})."""

    def __init__(self, edges, values, kind: str = "tabulated"):
        edges = np.asarray(edges, dtype=float)
        values = np.asarray(values, dtype=float)
        if edges.ndim != 1 or values.ndim != 1 or edges.size != values.size + 1:
            raise TransferValidationError("need m+1 edges for m cell values")
        if np.any(np.diff(edges) < 0):
            raise TransferValidationError("edges must be sorted")
        if not np.all(np.isfinite(edges)):
            raise TransferValidationError("edges must be finite (transfers vanish at infinity)")
        if np.any(values < -VALUE_TOL) or np.any(values > 1.0 + VALUE_TOL):
            raise TransferValidationError("transfer values must lie in [0, 1]")
        self.edges = edges
        self.values = np.clip(values, 0.0, 1.0)
        self.kind = kind

    @classmethod
    def cutoff(cls, d: float) -> "StepTransfer":
        """Pay 1 when |state - report| <= d, else 0."""
        if d < 0:
            raise TransferValidationError(f"cutoff must be nonnegative, got {d}")
        return cls(np.array([-d, d]), np.array([1.0]), kind="cutoff")

    @classmethod
    def from_cells(cls, values, x_max: float) -> "StepTransfer":
        """Symmetric step function: values[k] on the k-th cell of [0, x_max], mirrored."""
        values = np.asarray(values, dtype=float)
        if x_max <= 0 or values.ndim != 1 or values.size == 0:
            raise TransferValidationError("from_cells needs positive x_max and cell values")
        m = values.size
        pos_edges = np.linspace(0.0, x_max, m + 1)
        edges = np.concatenate([-pos_edges[:0:-1], pos_edges])
        vals = np.concatenate([values[::-1], values])
        return cls(edges, vals, kind="tabulated")

    # -- queries --------------------------------------------------------------

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size) & (x < self.edges[-1])
        out = np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)
        return out if out.ndim else float(out)

    @property
    def x_max(self) -> float:
        return float(max(abs(self.edges[0]), abs(self.edges[-1])))

    @property
    def min_step(self) -> float:
        gaps = np.diff(self.edges)
        gaps = gaps[gaps > 0]
        return float(gaps.min()) if gaps.size else self.x_max

    @property
    def is_cutoff(self) -> bool:
        nz = self.values > VALUE_TOL
        if not nz.any():
            return False
        first = int(np.argmax(nz))
        last = int(len(nz) - 1 - np.argmax(nz[::-1]))
        contiguous = bool(np.all(nz[first : last + 1]))
        all_ones = bool(np.allclose(self.values[first : last + 1], 1.0, atol=1e-9))
        centered = abs(self.edges[first] + self.edges[last + 1]) < 1e-9
        return contiguous and all_ones and centered

    @property
    def cutoff_level(self) -> float:
        """Half-width of the paying region for cutoff-shaped transfers."""
        if not self.is_cutoff:
            raise TransferValidationError("not a cutoff transfer")
        nz = self.values > VALUE_TOL
        return float(self.edges[1:][nz][-1])

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        # exact for step functions: probe midpoints of the edge/mirror partition
        edges = np.unique(np.concatenate([self.edges, -self.edges]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        return bool(np.allclose(self(mids), self(-mids), atol=tol))

    # -- constructions used by the improvement pipeline ----------------------

    def shifted(self, delta: float) -> "StepTransfer":
        """Translate the paying region by delta (t_new(x) = t(x - delta))."""
        return StepTransfer(self.edges + delta, self.values, kind="shifted")

    def symmetrized(self) -> "StepTransfer":
        """Even part (t(x) + t(-x)) / 2 as a step transfer on merged edges."""
        edges = np.unique(np.concatenate([self.edges, -self.edges]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        vals = 0.5 * (self(mids) + self(-mids))
        return StepTransfer(edges, vals, kind="symmetrized")

    def with_unit_interior(self, radius: float) -> "StepTransfer":
        """Pay the full budget on |x| < radius, unchanged elsewhere."""
        if radius <= 0:
            return self
        edges = np.unique(np.concatenate([self.edges, [-radius, radius]]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        vals = np.where(np.abs(mids) < radius, 1.0, self(mids))
        return StepTransfer(edges, vals, kind="augmented")

    def with_band_value(self, lo: float, hi: float, value: float) -> "StepTransfer":
        """Overwrite the transfer with ``value`` on |x| in [lo, hi] (both sides)."""
        if not 0.0 <= lo < hi:
            raise TransferValidationError("band requires 0 <= lo < hi")
        new_edges = np.array([-hi, -lo, lo, hi]) if lo > 0 else np.array([-hi, hi])
        edges = np.unique(np.concatenate([self.edges, new_edges]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        in_band = (np.abs(mids) >= lo) & (np.abs(mids) <= hi)
        vals = np.where(in_band, value, self(mids))
        return StepTransfer(edges, vals, kind="modified")

    def simplified(self) -> "StepTransfer":
        """Merge adjacent cells with equal values and strip zero tails."""
        keep = np.ones(self.values.size, dtype=bool)
        keep[1:] = np.abs(np.diff(self.values)) > VALUE_TOL
        starts = np.nonzero(keep)[0]
        edges = np.append(self.edges[starts], self.edges[-1])
        vals = self.values[starts]
        nz = np.nonzero(vals > VALUE_TOL)[0]
        if nz.size == 0:
            return StepTransfer(np.array([0.0, 0.0]), np.array([0.0]), kind=self.kind)
        lo, hi = nz[0], nz[-1]
        return StepTransfer(edges[lo : hi + 2], vals[lo : hi + 1], kind=self.kind)

    def truthful_value(self, density, lam: float) -> float:
        """Expected transfer under truthful reporting at precision lam (dim 1)."""
        cdf_vals = density.cdf(lam * self.edges)
        return float(np.dot(self.values, np.diff(cdf_vals)))

    def __repr__(self):
        return f"StepTransfer(kind={self.kind!r}, cells={self.values.size}, x_max={self.x_max:.4g})"
