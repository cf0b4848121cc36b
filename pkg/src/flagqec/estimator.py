"""Scikit-learn style wrapper around the lookup-table space decoder."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .codes import CssCode, build_hex_color_code, canonical_recovery
from .faultcode import CnotOrdering, FaultCheckMatrix, build_fault_check_matrix
from .gf2core import BitVector
from .lookup import DEFAULT_MAX_ENTRIES, MimSearcher, build_cache


class LookupDecoder(BaseEstimator):
    """Decode full syndromes ``(s, F)`` to a logical class.

    ``fit`` builds the table from a fault check matrix, and ``predict`` maps
    each full syndrome to the logical class of its canonical recovery.

    Args:
        t: Enumeration radius; defaults to the code's ``(d - 1) // 2``.
        mim: Use the Meet-in-the-Middle fallback for keys missing from the table.
        rho: MIM radius (defaults to ``t``).
        max_entries: Cap on enumerated combinations.

    Example:
        >>> dec = LookupDecoder().fit(3)
        >>> dec.predict(np.array([0])).tolist()
        [0]
    """

    def __init__(self, t: int | None = None, mim: bool = False, rho: int | None = None,
                 max_entries: int = DEFAULT_MAX_ENTRIES):
        self.t = t
        self.mim = mim
        self.rho = rho
        self.max_entries = max_entries

    def fit(self, X, y=None) -> LookupDecoder:
        """Build the table.

        Args:
            X: A :class:`FaultCheckMatrix`, a :class:`CssCode` (default CNOT
                ordering) or an odd distance for the hexagonal color code.
            y: Ignored.
        """
        if isinstance(X, FaultCheckMatrix):
            hf = X
        elif isinstance(X, CssCode):
            hf = build_fault_check_matrix(X, CnotOrdering.default(X))
        elif isinstance(X, (int, np.integer)):
            code, _ = build_hex_color_code(int(X))
            hf = build_fault_check_matrix(code)
        else:
            raise TypeError(f"cannot fit on {type(X).__name__}; pass a FaultCheckMatrix, CssCode or distance")
        t = hf.code.t if self.t is None else int(self.t)
        if t < 0:
            raise ValueError(f"t must be non-negative, got {t}")
        self.hf_ = hf
        self.code_ = hf.code
        self.table_ = build_cache(hf, t, max_entries=self.max_entries)
        self.searcher_ = MimSearcher(self.table_, hf, self.rho) if self.mim else None
        self.n_features_in_ = 2 * hf.r
        return self

    def _keys(self, X) -> np.ndarray:
        X = np.asarray(X)
        r = self.code_.r
        if X.ndim == 1:
            if not np.issubdtype(X.dtype, np.integer):
                raise ValueError("1-D input must hold integer keys")
            if X.size and (X.min() < 0 or int(X.max()) >> (2 * r)):
                raise ValueError(f"keys must lie in [0, 2**{2 * r})")
            return X.astype(np.uint64)
        if X.ndim != 2 or X.shape[1] != 2 * r:
            raise ValueError(f"expected integer keys or an (n_samples, {2 * r}) bit array, got shape {X.shape}")
        if not np.isin(X, (0, 1)).all():
            raise ValueError("bit array entries must be 0 or 1")
        weights = np.uint64(1) << np.arange(2 * r, dtype=np.uint64)
        return (X.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)

    def predict(self, X) -> np.ndarray:
        """Logical class per full syndrome.

        Args:
            X: Packed keys (syndrome in the low ``r`` bits, flags above) or an
                ``(n_samples, 2r)`` array laid out as ``[s | F]``.
        """
        check_is_fitted(self, "table_")
        keys = self._keys(X)
        if self.searcher_ is None:
            return self.table_.lookup_many(keys)[1]
        return np.array([self.searcher_.logical_class(int(k)) for k in keys], dtype=np.uint8)

    def recover(self, X) -> np.ndarray:
        """Data recovery per full syndrome as an ``(n_samples, n)`` bit array."""
        classes = self.predict(X)
        keys = self._keys(X)
        r = self.code_.r
        out = np.zeros((len(keys), self.code_.n), dtype=np.uint8)
        logical = self.code_.logical_j.to_array()
        for i, (key, cls) in enumerate(zip(keys, classes)):
            rec = canonical_recovery(self.code_, BitVector.from_int(int(key) & ((1 << r) - 1), r)).to_array()
            out[i] = rec ^ logical if cls else rec
        return out

    def score(self, X, y) -> float:
        """Fraction of samples whose predicted class equals ``y``."""
        return float(np.mean(self.predict(X) == np.asarray(y)))
