"""Pure-numpy kernels; drop-in replacement for the compiled ``_ckernels``.

The Jacobian routine processes stages in order and carries every active
column as one batched matrix, so the per-stage numpy call overhead is paid
once per stage rather than once per (stage, column).
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _pauli_tables(dim, xm, zm):
    idx = np.arange(dim, dtype=np.int64)
    parity = np.zeros(dim, dtype=np.int64)
    masked = idx & zm
    while np.any(masked):
        parity ^= masked & 1
        masked = masked >> 1
    sign = 1.0 - 2.0 * parity
    # (P v)[c] = s(c ^ x) v[c ^ x]
    src = idx ^ xm
    return src, sign[src]


def _pauli(v, xm, zm, coef):
    src, sign = _pauli_tables(v.shape[-1], int(xm), int(zm))
    return coef * sign * v[..., src]


def _apply_stage(v, s, kind, bit, mats, didx, diags, adjoint=False):
    """Apply stage ``s`` in place to a (..., dim) array."""
    if kind[s] != 1:
        m = 1 << int(bit[s])
        a00, a01, a10, a11 = mats[s]
        if adjoint:
            a00, a01, a10, a11 = a00.conjugate(), a10.conjugate(), a01.conjugate(), a11.conjugate()
        shaped = v.reshape(v.shape[:-1] + (-1, 2, m))
        x = shaped[..., 0, :].copy()
        y = shaped[..., 1, :]
        shaped[..., 0, :] = a00 * x + a01 * y
        shaped[..., 1, :] = a10 * x + a11 * y
    else:
        d = diags[didx[s]]
        v *= d.conj() if adjoint else d


def forward(psi0, kind, bit, mats, didx, diags):
    out = np.empty((len(kind) + 1, psi0.shape[0]), dtype=np.complex128)
    out[0] = psi0
    for s in range(len(kind)):
        out[s + 1] = out[s]
        _apply_stage(out[s + 1], s, kind, bit, mats, didx, diags)
    return out


def run(psi0, kind, bit, mats, didx, diags):
    v = np.array(psi0, dtype=np.complex128, copy=True)
    for s in range(len(kind)):
        _apply_stage(v, s, kind, bit, mats, didx, diags)
    return v


def jacobian_rows(states, start, xm, zm, coef, kind, bit, mats, didx, diags):
    n_st = len(kind)
    dim = states.shape[1]
    start = np.asarray(start)
    out = np.empty((len(start), dim), dtype=np.complex128)
    order = np.argsort(start, kind="stable")
    active = np.empty((0, dim), dtype=np.complex128)
    rows = []
    pos = 0
    for s in range(n_st + 1):
        new = []
        while pos < len(order) and start[order[pos]] == s:
            c = order[pos]
            new.append(_pauli(states[s], xm[c], zm[c], coef[c]))
            rows.append(c)
            pos += 1
        if new:
            active = np.concatenate([active, np.asarray(new)], axis=0)
        if s < n_st and active.shape[0]:
            _apply_stage(active, s, kind, bit, mats, didx, diags)
    out[np.asarray(rows, dtype=np.int64)] = active
    return out


def apply_paulis(v, xm, zm, coef):
    out = np.zeros(v.shape[0], dtype=np.complex128)
    for t in range(len(xm)):
        out += _pauli(v, xm[t], zm[t], coef[t])
    return out


def adjoint_gradient(final, hpsi, par_stage, xm, zm, coef, slot, n_slots,
                     kind, bit, mats, didx, diags):
    psi = np.array(final, dtype=np.complex128, copy=True)
    lam = np.array(hpsi, dtype=np.complex128, copy=True)
    grad = np.zeros(n_slots)
    k = len(par_stage) - 1
    for s in range(len(kind) - 1, -1, -1):
        while k >= 0 and par_stage[k] == s:
            ov = np.vdot(lam, _pauli(psi, xm[k], zm[k], 1.0))
            grad[slot[k]] += 2.0 * (coef[k] * ov).real
            k -= 1
        _apply_stage(psi, s, kind, bit, mats, didx, diags, adjoint=True)
        _apply_stage(lam, s, kind, bit, mats, didx, diags, adjoint=True)
    return grad


def diag_phase(theta, signs):
    return np.exp(-1j * (np.asarray(theta) @ signs))
