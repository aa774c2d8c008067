"""Stabilizer-tableau simulator for large ideal (r = 1) Clifford circuits.

The tableau tracks destabilizer and stabilizer generators as binary
symplectic rows with sign bits. Measurements resolve deterministically
when the measured operator is (up to sign) already stabilized and
otherwise force the preferred outcome with explicit sign bookkeeping, so
runs are reproducible without sampling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import PauliString, QubitId
from .protocols import ProtocolScript


def _g_exponents(x1: np.ndarray, z1: np.ndarray, x2: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Per-column i-exponent picked up when multiplying Pauli factors."""
    x1 = x1.astype(np.int8)
    z1 = z1.astype(np.int8)
    x2 = x2.astype(np.int8)
    z2 = z2.astype(np.int8)
    out = np.zeros(np.broadcast(x1, x2).shape, dtype=np.int8)
    is_y = (x1 == 1) & (z1 == 1)
    is_x = (x1 == 1) & (z1 == 0)
    is_z = (x1 == 0) & (z1 == 1)
    out = np.where(is_y, z2 - x2, out)
    out = np.where(is_x, z2 * (2 * x2 - 1), out)
    out = np.where(is_z, x2 * (1 - 2 * z2), out)
    return out


class StabilizerTableau:
    """Destabilizer/stabilizer tableau over a labeled qubit register."""

    def __init__(self, labels: tuple[QubitId, ...]):
        n = len(labels)
        if n < 1:
            raise ValueError("tableau needs at least one qubit")
        if len(set(labels)) != n:
            raise ValueError("duplicate qubit labels")
        self.labels = tuple(labels)
        self.n = n
        # rows 0..n-1 destabilizers, n..2n-1 stabilizers, row 2n scratch
        self.x = np.zeros((2 * n + 1, n), dtype=bool)
        self.z = np.zeros((2 * n + 1, n), dtype=bool)
        self.r = np.zeros(2 * n + 1, dtype=np.int8)
        self.x[np.arange(n), np.arange(n)] = True
        self.z[np.arange(n, 2 * n), np.arange(n)] = True

    # -- construction ------------------------------------------------------

    @classmethod
    def from_graph_edges(
        cls, labels: tuple[QubitId, ...], edges: list[tuple[QubitId, QubitId]]
    ) -> "StabilizerTableau":
        """Graph state: all qubits in |+>, CZ on every edge."""
        tab = cls(labels)
        for q in labels:
            tab.h(q)
        for a, b in edges:
            tab.cz(a, b)
        return tab

    def index(self, q: QubitId) -> int:
        try:
            return self.labels.index(q)
        except ValueError:
            raise ValueError(f"qubit {q} not in tableau") from None

    # -- gates -------------------------------------------------------------

    def h(self, q: QubitId) -> None:
        j = self.index(q)
        self.r ^= (self.x[:, j] & self.z[:, j]).astype(np.int8)
        self.x[:, j], self.z[:, j] = self.z[:, j].copy(), self.x[:, j].copy()

    def s(self, q: QubitId) -> None:
        j = self.index(q)
        self.r ^= (self.x[:, j] & self.z[:, j]).astype(np.int8)
        self.z[:, j] ^= self.x[:, j]

    def x_gate(self, q: QubitId) -> None:
        j = self.index(q)
        self.r ^= self.z[:, j].astype(np.int8)

    def z_gate(self, q: QubitId) -> None:
        j = self.index(q)
        self.r ^= self.x[:, j].astype(np.int8)

    def cnot(self, control: QubitId, target: QubitId) -> None:
        c, t = self.index(control), self.index(target)
        if c == t:
            raise ValueError("control and target must differ")
        self.r ^= (self.x[:, c] & self.z[:, t] & ~(self.x[:, t] ^ self.z[:, c])).astype(np.int8)
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def cz(self, control: QubitId, target: QubitId) -> None:
        self.h(target)
        self.cnot(control, target)
        self.h(target)

    # -- row arithmetic ------------------------------------------------------

    def _rowsum(self, h: int, i: int) -> None:
        """Row h <- (row i) * (row h), phases tracked mod 4."""
        gsum = int(_g_exponents(self.x[i], self.z[i], self.x[h], self.z[h]).sum())
        total = (2 * int(self.r[h]) + 2 * int(self.r[i]) + gsum) % 4
        self.r[h] = 1 if total == 2 else 0
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    def _rowsum_many(self, rows: np.ndarray, i: int) -> None:
        if rows.size == 0:
            return
        gsum = _g_exponents(self.x[i], self.z[i], self.x[rows], self.z[rows]).sum(axis=1)
        total = (2 * self.r[rows].astype(np.int64) + 2 * int(self.r[i]) + gsum) % 4
        self.r[rows] = (total == 2).astype(np.int8)
        self.x[rows] ^= self.x[i]
        self.z[rows] ^= self.z[i]

    # -- measurement ---------------------------------------------------------

    def measure(self, q: QubitId, prefer: int = 0) -> tuple[int, bool]:
        """Z-basis measurement; returns (outcome, deterministic).

        When the outcome is undetermined the preferred value is forced and
        the tableau updated accordingly; determined outcomes are read off
        without state change.
        """
        if prefer not in (0, 1):
            raise ValueError("preferred outcome must be 0 or 1")
        n, j = self.n, self.index(q)
        stab_anti = np.nonzero(self.x[n : 2 * n, j])[0]
        if stab_anti.size:
            p = int(stab_anti[0]) + n
            others = np.nonzero(self.x[: 2 * n, j])[0]
            others = others[others != p]
            self._rowsum_many(others, p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, j] = True
            self.r[p] = prefer
            return prefer, False
        # deterministic: accumulate the relevant stabilizers onto the scratch row
        scratch = 2 * n
        self.x[scratch] = False
        self.z[scratch] = False
        self.r[scratch] = 0
        for i in np.nonzero(self.x[:n, j])[0]:
            self._rowsum(scratch, int(i) + n)
        return int(self.r[scratch]), True

    # -- queries -------------------------------------------------------------

    def _pauli_vectors(self, p: PauliString) -> tuple[np.ndarray, np.ndarray]:
        xv = np.zeros(self.n, dtype=bool)
        zv = np.zeros(self.n, dtype=bool)
        for q, name in p.ops:
            j = self.index(q)
            if name in ("X", "Y"):
                xv[j] = True
            if name in ("Z", "Y"):
                zv[j] = True
        return xv, zv

    def stabilizer_sign(self, p: PauliString) -> int | None:
        """+1 or -1 when p (up to sign) is in the stabilizer group, else None."""
        xv, zv = self._pauli_vectors(p)
        n, scratch = self.n, 2 * self.n
        self.x[scratch] = False
        self.z[scratch] = False
        self.r[scratch] = 0
        for i in range(n):
            anti = bool(np.logical_xor.reduce(self.x[i] & zv) ^ np.logical_xor.reduce(self.z[i] & xv))
            if anti:
                self._rowsum(scratch, i + n)
        if not (np.array_equal(self.x[scratch], xv) and np.array_equal(self.z[scratch], zv)):
            return None
        return -1 if self.r[scratch] else 1

    def generators(self) -> list[tuple[int, PauliString]]:
        """Stabilizer generators as (sign, PauliString) pairs."""
        out = []
        for i in range(self.n, 2 * self.n):
            ops = {}
            for j in range(self.n):
                if self.x[i, j] and self.z[i, j]:
                    ops[self.labels[j]] = "Y"
                elif self.x[i, j]:
                    ops[self.labels[j]] = "X"
                elif self.z[i, j]:
                    ops[self.labels[j]] = "Z"
            out.append((-1 if self.r[i] else 1, PauliString.from_map(ops)))
        return out

    def generators_commute(self) -> bool:
        """Symplectic check: every pair of stabilizer generators commutes."""
        sx = self.x[self.n : 2 * self.n].astype(np.float32)
        sz = self.z[self.n : 2 * self.n].astype(np.float32)
        sym = (sx @ sz.T + sz @ sx.T) % 2
        return not np.any(sym)

    def stabilizer_rank(self) -> int:
        """GF(2) rank of the stabilizer [X|Z] block."""
        m = np.concatenate(
            [self.x[self.n : 2 * self.n], self.z[self.n : 2 * self.n]], axis=1
        ).copy()
        rank = 0
        rows, cols = m.shape
        for j in range(cols):
            piv = np.nonzero(m[rank:, j])[0]
            if piv.size == 0:
                continue
            p = rank + int(piv[0])
            m[[rank, p]] = m[[p, rank]]
            elim = np.nonzero(m[:, j])[0]
            elim = elim[elim != rank]
            m[elim] ^= m[rank]
            rank += 1
            if rank == rows:
                break
        return rank


@dataclass(frozen=True)
class GraphForm:
    """Graph-state normal form of a stabilizer state.

    Applying `corrections` (in order) to the state turns it into the graph
    state whose adjacency matrix is `adjacency` over `labels`.
    """

    labels: tuple[QubitId, ...]
    adjacency: np.ndarray
    corrections: tuple[tuple[str, QubitId], ...]

    def edges(self) -> list[tuple[QubitId, QubitId]]:
        n = len(self.labels)
        return [
            (self.labels[i], self.labels[j])
            for i in range(n)
            for j in range(i + 1, n)
            if self.adjacency[i, j]
        ]


def _rref_x_block(x: np.ndarray, z: np.ndarray, r: np.ndarray) -> int:
    """In-place reduced row echelon form of the X block, phases tracked."""
    n = x.shape[1]
    rank = 0
    for j in range(n):
        piv = np.nonzero(x[rank:, j])[0]
        if piv.size == 0:
            continue
        p = rank + int(piv[0])
        if p != rank:
            x[[rank, p]] = x[[p, rank]]
            z[[rank, p]] = z[[p, rank]]
            r[[rank, p]] = r[[p, rank]]
        targets = np.nonzero(x[:, j])[0]
        targets = targets[targets != rank]
        if targets.size:
            gsum = _g_exponents(x[rank], z[rank], x[targets], z[targets]).sum(axis=1)
            total = (2 * r[targets].astype(np.int64) + 2 * int(r[rank]) + gsum) % 4
            r[targets] = (total == 2).astype(np.int8)
            x[targets] ^= x[rank]
            z[targets] ^= z[rank]
        rank += 1
        if rank == x.shape[0]:
            break
    return rank


def graph_form(tab: StabilizerTableau) -> GraphForm:
    """Reduce a stabilizer state to graph-state form with local corrections.

    Works on a copy of the stabilizer block: row operations recombine
    generators (leaving the state alone) while recorded H/S/Z column
    operations are the local gates that map the state onto the graph
    state being reported.
    """
    n = tab.n
    x = tab.x[n : 2 * n].copy()
    z = tab.z[n : 2 * n].copy()
    r = tab.r[n : 2 * n].copy()
    corrections: list[tuple[str, QubitId]] = []

    def apply_h(j: int) -> None:
        r[:] ^= (x[:, j] & z[:, j]).astype(np.int8)
        x[:, j], z[:, j] = z[:, j].copy(), x[:, j].copy()
        corrections.append(("h", tab.labels[j]))

    rank = _rref_x_block(x, z, r)
    guard = 0
    while rank < n:
        # rows below the X-rank are pure-Z; hadamard a column they occupy
        # that is not an X pivot, then re-reduce.
        pivots = {int(np.nonzero(x[i])[0][0]) for i in range(rank)}
        fixed = False
        for i in range(rank, n):
            cand = [j for j in np.nonzero(z[i])[0] if j not in pivots]
            if cand:
                apply_h(int(cand[0]))
                fixed = True
                break
        if not fixed or guard > n:
            raise RuntimeError("stabilizer block is not full rank")
        rank = _rref_x_block(x, z, r)
        guard += 1

    if not np.array_equal(x, np.eye(n, dtype=bool)):
        raise RuntimeError("X block did not reduce to the identity")
    # clear the Z diagonal with phase gates
    for j in range(n):
        if z[j, j]:
            r[:] ^= (x[:, j] & z[:, j]).astype(np.int8)
            z[:, j] ^= x[:, j]
            corrections.append(("s", tab.labels[j]))
    if not np.array_equal(z, z.T):
        raise RuntimeError("adjacency block is not symmetric")
    # clear signs with Z gates
    for j in range(n):
        if r[j]:
            r[:] ^= x[:, j].astype(np.int8)
            corrections.append(("z", tab.labels[j]))
    if np.any(r):
        raise RuntimeError("signs did not clear")
    return GraphForm(tab.labels, z.copy(), tuple(corrections))


def tableau_run(script: ProtocolScript) -> tuple[StabilizerTableau, list[tuple[QubitId, int, bool]]]:
    """Execute an ideal Clifford script on the tableau.

    Only r = 1 gates among {h, x, z, cnot, cz, measure} are accepted; the
    inheritance gate and any lossy gate are rejected as non-Clifford.
    Returns the final tableau and the measurement log of
    (qubit, outcome, deterministic) triples.
    """
    if not script.is_clifford():
        raise ValueError(
            "non-Clifford script: the tableau path accepts only r = 1 "
            "h/x/z/cnot/cz/measure steps"
        )
    tab = StabilizerTableau(script.register)
    log: list[tuple[QubitId, int, bool]] = []
    for step in script.steps:
        if step.kind == "h":
            tab.h(step.target)
        elif step.kind == "x":
            tab.x_gate(step.target)
        elif step.kind == "z":
            tab.z_gate(step.target)
        elif step.kind == "cnot":
            tab.cnot(step.control, step.target)
        elif step.kind == "cz":
            tab.cz(step.control, step.target)
        else:  # measure
            prefer = 0 if step.postselect is None else step.postselect
            outcome, det = tab.measure(step.target, prefer=prefer)
            log.append((step.target, outcome, det))
    return tab, log
