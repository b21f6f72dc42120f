"""Completely positive trace-preserving maps.

The Choi matrix convention used throughout: for a map E from an m-dimensional
input to an n-dimensional output,

    choi = sum_ij |i><j| (x) E(|i><j|)

i.e. the input index is the slow (first) tensor factor and the matrix is
unnormalized, ``trace(choi) == m``.  As a four-index array the layout is
``choi4[i, a, j, b]`` with input indices i, j and output indices a, b, so
applying the map is a single contraction over the input pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    InvalidInputError,
    InvalidShapeError,
    as_operator,
    eig_hermitian,
    haar_random_unitary,
    hermitian_basis,
    is_hermitian,
)
from .rng import RngStream
from .states import DensityMatrix, as_density

CP_ATOL = 1e-9
TP_ATOL = 1e-9


class InvalidChannelError(InvalidInputError):
    """The map is not completely positive and trace preserving."""


def choi_from_kraus(kraus, dim_in: int, dim_out: int) -> np.ndarray:
    ks = np.array([as_operator_rect(k, dim_out, dim_in) for k in kraus])
    choi4 = np.einsum("kai,kbj->iajb", ks, ks.conj())
    return choi4.reshape(dim_in * dim_out, dim_in * dim_out)


def as_operator_rect(m, rows: int, cols: int) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.shape != (rows, cols):
        raise InvalidShapeError(f"expected a {rows}x{cols} operator, got {a.shape}")
    return a


def kraus_from_choi(choi: np.ndarray, dim_in: int, dim_out: int) -> list:
    """Canonical Kraus decomposition: eigenvectors of the Choi matrix.

    Eigenvalues below 1e-10 are treated as zero and dropped.  The order is
    descending by eigenvalue, which fixes the operator gauge up to phases.
    """
    w, v = eig_hermitian(choi, atol=1e-8)
    if w[-1] < -CP_ATOL:
        raise InvalidInputError("Choi matrix is not positive semidefinite")
    ops = []
    for k in range(w.size):
        if w[k] <= 1e-10:
            continue
        ops.append(np.sqrt(w[k]) * v[:, k].reshape(dim_in, dim_out).T)
    return ops


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """A CPTP map stored by its Choi matrix.

    ``kraus`` is an optional explicit operator-sum form.  When present it is
    trusted as the preferred decomposition (its Choi matrix is still checked
    against ``choi``); when absent, ``kraus_operators`` falls back to the
    canonical eigendecomposition gauge.
    """

    choi: np.ndarray
    dim_in: int
    dim_out: int
    kraus: tuple | None = None

    def __post_init__(self) -> None:
        c = as_operator(self.choi, dim=self.dim_in * self.dim_out)
        if not is_hermitian(c, atol=1e-8):
            raise InvalidChannelError("Choi matrix is not Hermitian")
        if np.min(np.linalg.eigvalsh(c)) < -CP_ATOL:
            raise InvalidChannelError("map is not completely positive")
        c4 = c.reshape(self.dim_in, self.dim_out, self.dim_in, self.dim_out)
        marginal = np.einsum("iaja->ij", c4)
        if np.max(np.abs(marginal - np.eye(self.dim_in))) > TP_ATOL:
            raise InvalidChannelError("map is not trace preserving")
        object.__setattr__(self, "choi", c)
        if self.kraus is not None:
            ks = tuple(as_operator_rect(k, self.dim_out, self.dim_in) for k in self.kraus)
            rebuilt = choi_from_kraus(ks, self.dim_in, self.dim_out)
            if np.max(np.abs(rebuilt - c)) > 1e-8:
                raise InvalidChannelError("Kraus operators disagree with the Choi matrix")
            object.__setattr__(self, "kraus", ks)

    @property
    def choi4(self) -> np.ndarray:
        return self.choi.reshape(self.dim_in, self.dim_out, self.dim_in, self.dim_out)

    def kraus_operators(self) -> list:
        if self.kraus is not None:
            return list(self.kraus)
        return kraus_from_choi(self.choi, self.dim_in, self.dim_out)

    def apply(self, state) -> DensityMatrix:
        rho = as_density(state).matrix
        if rho.shape[0] != self.dim_in:
            raise InvalidShapeError("state dimension does not match the channel input")
        out = np.einsum("ij,iajb->ab", rho, self.choi4)
        out = 0.5 * (out + out.conj().T)
        return DensityMatrix(out)

    def compose(self, inner: "QuantumChannel") -> "QuantumChannel":
        """self after inner (matrix order: self . inner)."""
        if inner.dim_out != self.dim_in:
            raise InvalidShapeError("channel dimensions do not chain")
        t = transfer_from_choi(self.choi, self.dim_in, self.dim_out) @ transfer_from_choi(
            inner.choi, inner.dim_in, inner.dim_out
        )
        return QuantumChannel(
            choi_from_transfer(t, inner.dim_in, self.dim_out), inner.dim_in, self.dim_out
        )

    def tensor(self, other: "QuantumChannel") -> "QuantumChannel":
        a = self.choi4
        b = other.choi4
        c = np.einsum("iajc,kbld->ikabjlcd", a, b)
        din = self.dim_in * other.dim_in
        dout = self.dim_out * other.dim_out
        return QuantumChannel(c.reshape(din * dout, din * dout), din, dout)

    @classmethod
    def from_kraus(cls, kraus, dim_in: int, dim_out: int) -> "QuantumChannel":
        ks = tuple(as_operator_rect(k, dim_out, dim_in) for k in kraus)
        total = sum(k.conj().T @ k for k in ks)
        if np.max(np.abs(total - np.eye(dim_in))) > 1e-10:
            raise InvalidChannelError("Kraus operators do not satisfy completeness")
        return cls(choi_from_kraus(ks, dim_in, dim_out), dim_in, dim_out, kraus=ks)

    @classmethod
    def from_unitary(cls, u) -> "QuantumChannel":
        m = as_operator(u)
        if np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) > 1e-9:
            raise InvalidInputError("matrix is not unitary")
        return cls.from_kraus([m], m.shape[0], m.shape[0])

    @classmethod
    def identity(cls, dim: int) -> "QuantumChannel":
        return cls.from_kraus([np.eye(dim)], dim, dim)

    @classmethod
    def depolarizing(cls, p: float, dim: int = 2) -> "QuantumChannel":
        """(1-p) id + p (replace with maximally mixed)."""
        if not 0.0 <= p <= 1.0:
            raise InvalidInputError("depolarizing strength must lie in [0, 1]")
        ident = cls.identity(dim)
        # replacement map: rho -> trace(rho) I/dim
        repl4 = np.einsum("ij,ab->iajb", np.eye(dim), np.eye(dim) / dim)
        choi = (1.0 - p) * ident.choi + p * repl4.reshape(dim * dim, dim * dim)
        return cls(choi, dim, dim)

    @classmethod
    def amplitude_damping(cls, gamma: float) -> "QuantumChannel":
        if not 0.0 <= gamma <= 1.0:
            raise InvalidInputError("damping rate must lie in [0, 1]")
        k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]])
        k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])
        return cls.from_kraus([k0, k1], 2, 2)

    @classmethod
    def dephasing(cls, p: float) -> "QuantumChannel":
        """With probability p the off-diagonal terms are killed."""
        if not 0.0 <= p <= 1.0:
            raise InvalidInputError("dephasing strength must lie in [0, 1]")
        sz = np.diag([1.0, -1.0])
        k0 = np.sqrt(1.0 - p / 2.0) * np.eye(2)
        k1 = np.sqrt(p / 2.0) * sz
        return cls.from_kraus([k0, k1], 2, 2)


def random_channel(
    dim_in: int, dim_out: int, rng: RngStream, env_dim: int | None = None
) -> QuantumChannel:
    """Haar-random Stinespring dilation.

    A Haar unitary on the dim_out * env_dim space is restricted to the first
    dim_in columns, giving an isometry V; the channel traces out the
    environment.  ``env_dim`` defaults to dim_in * dim_out, which samples
    full-Kraus-rank channels.
    """
    env = env_dim if env_dim is not None else dim_in * dim_out
    total = dim_out * env
    if total < dim_in:
        raise InvalidShapeError("environment too small for an isometry")
    u = haar_random_unitary(total, rng)
    v = u[:, :dim_in].reshape(dim_out, env, dim_in)
    choi4 = np.einsum("aei,bej->iajb", v, v.conj())
    return QuantumChannel(
        choi4.reshape(dim_in * dim_out, dim_in * dim_out), dim_in, dim_out
    )


def transfer_from_choi(choi: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    """Real transfer matrix in the orthonormal Hermitian operator bases."""
    bin_ = hermitian_basis(dim_in)
    bout = hermitian_basis(dim_out)
    c4 = choi.reshape(dim_in, dim_out, dim_in, dim_out)
    t = np.empty((dim_out * dim_out, dim_in * dim_in))
    for u, bu in enumerate(bin_):
        out = np.einsum("ij,iajb->ab", bu, c4)
        for v_, bv in enumerate(bout):
            t[v_, u] = np.real(np.trace(bv @ out))
    return t


def choi_from_transfer(t: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    bin_ = hermitian_basis(dim_in)
    bout = hermitian_basis(dim_out)
    choi = np.zeros((dim_in * dim_out, dim_in * dim_out), dtype=complex)
    for u, bu in enumerate(bin_):
        for v_, bv in enumerate(bout):
            choi += t[v_, u] * np.kron(bu.T, bv)
    return choi


def channel_distance(a: QuantumChannel, b: QuantumChannel) -> float:
    """Normalized trace distance between Choi matrices."""
    if a.dim_in != b.dim_in or a.dim_out != b.dim_out:
        raise InvalidShapeError("channels act on different spaces")
    diff = (a.choi - b.choi) / a.dim_in
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(w)))
