"""Plain-text instance files for MDPs, finite-horizon MDPs and Markov games.

Format: one ``key value...`` line per scalar field, dimensions first, then
array sections whose header line is followed by dense rows in row-major
order. ``#`` starts a comment. Examples::

    kind mdp
    nS 2
    nA 2
    theta 0.9
    rho0 0.5 0.5
    cost            # nS rows of nA entries
    0.1 0.7
    0.2 0.4
    transition      # nS*nA rows of nS entries, ordered (s, a)
    0.9 0.1
    0.5 0.5
    0.3 0.7
    1.0 0.0

A game uses ``kind game``, adds ``nB``, has nS*nA cost rows of nB entries
ordered (s, a) and nS*nA*nB transition rows ordered (s, a, b).

A finite-horizon MDP uses ``kind finite-horizon`` with ``H``, ``states
S_1..S_H``, ``actions A_1..A_H`` and ``rho1``, then ``cost h`` sections of
S_h rows for h = 1..H and ``transition h`` sections of S_h*A_h rows of
S_{h+1} entries for h = 1..H-1.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import InstanceError
from .markov_game import ZeroSumMarkovGame
from .mdp import STOCH_TOL, FiniteHorizonMDP, TabularMDP


def _tokenize(text):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


class _Reader:
    def __init__(self, text):
        self.lines = list(_tokenize(text))
        self.pos = 0
        self.last_line = self.lines[-1][0] if self.lines else 0

    def next(self, field):
        if self.pos >= len(self.lines):
            raise InstanceError("unexpected end of file", line=self.last_line + 1, field=field)
        item = self.lines[self.pos]
        self.pos += 1
        return item

    def done(self):
        return self.pos >= len(self.lines)


def _floats(tokens, no, field, n=None):
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise InstanceError(f"not a number ({exc})", line=no, field=field) from None
    if n is not None and len(vals) != n:
        raise InstanceError(f"expected {n} values, found {len(vals)}", line=no, field=field)
    return vals


def _int(tokens, no, field):
    if len(tokens) != 1:
        raise InstanceError("expected one integer", line=no, field=field)
    try:
        v = int(tokens[0])
    except ValueError:
        raise InstanceError(f"not an integer: {tokens[0]!r}", line=no, field=field) from None
    if v < 1:
        raise InstanceError("must be positive", line=no, field=field)
    return v


def _rows(reader, n_rows, width, field, labels=None, stochastic=False):
    out = []
    for r in range(n_rows):
        no, toks = reader.next(field)
        row = _floats(toks, no, field, width)
        if stochastic and (min(row) < 0 or abs(sum(row) - 1.0) > STOCH_TOL):
            raise InstanceError(f"row {labels[r]} is not a distribution (sum {sum(row)!r})",
                                line=no, field=field)
        out.append(row)
    return np.array(out, dtype=np.float64)


def _labels(*dims):
    return [str(t) for t in np.ndindex(*dims)]


def parse_instance(text: str):
    """Parse instance text. Errors carry the offending line and field."""
    reader = _Reader(text)
    no, toks = reader.next("kind")
    if toks[0] != "kind" or len(toks) != 2:
        raise InstanceError("first line must be 'kind mdp|game|finite-horizon'", line=no, field="kind")
    kind = toks[1]
    if kind == "finite-horizon":
        return _parse_finite_horizon(reader)
    if kind not in ("mdp", "game"):
        raise InstanceError(f"unknown kind {kind!r}", line=no, field="kind")
    dims_keys = ["nS", "nA"] + (["nB"] if kind == "game" else [])
    dims = {}
    for key in dims_keys:
        no, toks = reader.next(key)
        if toks[0] != key:
            raise InstanceError(f"expected '{key}', found '{toks[0]}'", line=no, field=key)
        dims[key] = _int(toks[1:], no, key)
    nS, nA = dims["nS"], dims["nA"]
    nB = dims.get("nB")
    no, toks = reader.next("theta")
    if toks[0] != "theta":
        raise InstanceError(f"expected 'theta', found '{toks[0]}'", line=no, field="theta")
    theta = _floats(toks[1:], no, "theta", 1)[0]
    no, toks = reader.next("rho0")
    if toks[0] != "rho0":
        raise InstanceError(f"expected 'rho0', found '{toks[0]}'", line=no, field="rho0")
    rho0 = np.array(_floats(toks[1:], no, "rho0", nS))
    _section(reader, "cost")
    if kind == "mdp":
        cost = _rows(reader, nS, nA, "cost")
        _section(reader, "transition")
        P = _rows(reader, nS * nA, nS, "transition", _labels(nS, nA), True).reshape(nS, nA, nS)
        inst = TabularMDP(P, cost, theta, rho0)
    else:
        cost = _rows(reader, nS * nA, nB, "cost").reshape(nS, nA, nB)
        _section(reader, "transition")
        P = _rows(reader, nS * nA * nB, nS, "transition", _labels(nS, nA, nB), True)
        inst = ZeroSumMarkovGame(P.reshape(nS, nA, nB, nS), cost, theta, rho0)
    _expect_end(reader)
    return inst


def _section(reader, name, index=None):
    no, toks = reader.next(name)
    want = [name] if index is None else [name, str(index)]
    if toks != want:
        raise InstanceError(f"expected section '{' '.join(want)}', found '{' '.join(toks)}'",
                            line=no, field=name)


def _expect_end(reader):
    if not reader.done():
        no, toks = reader.lines[reader.pos]
        raise InstanceError(f"unexpected trailing content '{' '.join(toks)}'", line=no)


def _parse_finite_horizon(reader):
    no, toks = reader.next("H")
    if toks[0] != "H":
        raise InstanceError("expected 'H'", line=no, field="H")
    H = _int(toks[1:], no, "H")
    sizes = {}
    for key in ("states", "actions"):
        no, toks = reader.next(key)
        if toks[0] != key or len(toks) != H + 1:
            raise InstanceError(f"expected '{key}' with {H} integers", line=no, field=key)
        sizes[key] = [_int([t], no, key) for t in toks[1:]]
    S, A = sizes["states"], sizes["actions"]
    no, toks = reader.next("rho1")
    if toks[0] != "rho1":
        raise InstanceError("expected 'rho1'", line=no, field="rho1")
    rho1 = np.array(_floats(toks[1:], no, "rho1", S[0]))
    costs = []
    for h in range(H):
        _section(reader, "cost", h + 1)
        costs.append(_rows(reader, S[h], A[h], f"cost {h + 1}"))
    trans = []
    for h in range(H - 1):
        _section(reader, "transition", h + 1)
        rows = _rows(reader, S[h] * A[h], S[h + 1], f"transition {h + 1}", _labels(S[h], A[h]), True)
        trans.append(rows.reshape(S[h], A[h], S[h + 1]))
    _expect_end(reader)
    return FiniteHorizonMDP(tuple(costs), tuple(trans), rho1)


def load_instance(path):
    with open(path) as fh:
        return parse_instance(fh.read())


def _row(v):
    return " ".join(repr(float(x)) for x in np.ravel(v))


def format_instance(inst) -> str:
    """Serialize with repr floats so that parsing restores the arrays exactly."""
    out = []
    if isinstance(inst, TabularMDP):
        nS, nA = inst.n_states, inst.n_actions
        out += ["kind mdp", f"nS {nS}", f"nA {nA}", f"theta {inst.theta!r}", f"rho0 {_row(inst.rho0)}", "cost"]
        out += [_row(r) for r in inst.cost]
        out.append("transition")
        out += [_row(r) for r in inst.P.reshape(nS * nA, nS)]
    elif isinstance(inst, ZeroSumMarkovGame):
        nS = inst.n_states
        nA, nB = inst.n_actions
        out += ["kind game", f"nS {nS}", f"nA {nA}", f"nB {nB}", f"theta {inst.theta!r}",
                f"rho0 {_row(inst.rho0)}", "cost"]
        out += [_row(r) for r in inst.cost.reshape(nS * nA, nB)]
        out.append("transition")
        out += [_row(r) for r in inst.P.reshape(nS * nA * nB, nS)]
    elif isinstance(inst, FiniteHorizonMDP):
        S = [c.shape[0] for c in inst.costs]
        A = [c.shape[1] for c in inst.costs]
        out += ["kind finite-horizon", f"H {inst.horizon}", "states " + " ".join(map(str, S)),
                "actions " + " ".join(map(str, A)), f"rho1 {_row(inst.rho1)}"]
        for h, c in enumerate(inst.costs):
            out.append(f"cost {h + 1}")
            out += [_row(r) for r in c]
        for h, p in enumerate(inst.transitions):
            out.append(f"transition {h + 1}")
            out += [_row(r) for r in p.reshape(-1, p.shape[-1])]
    else:
        raise TypeError(f"cannot serialize {type(inst).__name__}")
    return "\n".join(out) + "\n"


def save_instance(inst, path):
    with open(path, "w") as fh:
        fh.write(format_instance(inst))


def instance_digest(inst) -> str:
    """Short SHA-256 of the canonical text form."""
    return hashlib.sha256(format_instance(inst).encode()).hexdigest()[:16]
