"""SMT-LIB2 export of a path's feasibility question, plus a tiny evaluator.

One free real ``P<i>`` per action. Every step declares the trader balances
of the assets the path touches and the fields of the venues it uses; each
action pins the next step with equalities (frame equalities for untouched
fields). The evaluator replays a model through those equalities so the
export can be checked against the simulator without an external solver.
"""
from __future__ import annotations

import hashlib
import math
from decimal import Decimal
from typing import Sequence

from .errors import UnsupportedVenueKind
from .market import BANCOR, CONSTANT_PRODUCT, ONE_TO_ONE, PPM, ActionSpec, WorldState

LOGIC = "QF_NRA"
# real-valued powers (Bancor legs) are outside QF_NRA; solvers such as z3
# accept ``^`` only without that restriction
LOGIC_WITH_POW = "ALL"


def num(x) -> str:
    """SMT-LIB2 real literal whose value rounds back to ``x``."""
    if isinstance(x, int):
        d = Decimal(x)
    else:
        if not math.isfinite(x):
            raise ValueError(f"cannot encode {x!r}")
        d = Decimal(repr(float(x)))
    text = format(abs(d), "f")
    if "." not in text:
        text += ".0"
    return f"(- {text})" if d < 0 else text


def _sym(name: str) -> str:
    return f"|{name}|"


class _Vars:
    """Names of the per-step state variables touched by a path."""

    def __init__(self, path: Sequence[ActionSpec], state: WorldState, base: str):
        assets = {base}
        venues = []
        for a in path:
            v = state.venue(a.venue)
            if v.kind not in (CONSTANT_PRODUCT, BANCOR, ONE_TO_ONE):
                raise UnsupportedVenueKind(f"{v.venue_id}: no closed-form predicate for {v.kind}")
            assets.add(a.input_asset)
            if a.returns:
                assets.add(a.output_asset)
            if v.venue_id not in venues:
                venues.append(v.venue_id)
        self.assets = sorted(assets)
        self.venues = sorted(venues)
        self.fields: list[tuple[str, str]] = []   # (owner, field)
        for vid in self.venues:
            v = state.venue(vid)
            self.fields += [(vid, a) for a in sorted(v.reserves)]
            if v.kind == BANCOR:
                self.fields += [(vid, f"ratio:{a}") for a in sorted(v.ratios)]
                self.fields.append((vid, "fee"))

    def all(self):
        return [("Trader", a) for a in self.assets] + self.fields

    @staticmethod
    def name(step: int, owner: str, field: str) -> str:
        if owner == "Trader":
            return f"S{step}_Trader[{field}]"
        if field == "fee":
            return f"S{step}_{owner}_fee"
        if field.startswith("ratio:"):
            return f"S{step}_{owner}[{field[6:]}]_ratio"
        return f"S{step}_{owner}[{field}]"


def _initial_value(state: WorldState, owner: str, field: str):
    if owner == "Trader":
        return state.balance(field)
    v = state.venue(owner)
    if field == "fee":
        return v.fee_ppm
    if field.startswith("ratio:"):
        return v.ratios[field[6:]]
    return v.reserves[field]


def export_smtlib(path: Sequence[ActionSpec], state: WorldState, z: float, base: str = "ETH") -> str:
    """SMT-LIB2 text asking for parameters that earn at least ``z`` in ``base``."""
    if z < 0 or not math.isfinite(z):
        raise ValueError("target revenue must be finite and >= 0")
    vs = _Vars(path, state, base)
    n = len(path)
    out = [f"; path: {' '.join(a.action_id for a in path)}",
           f"; block {state.block_height}, target {num(z)} {base}",
           f"(set-logic {LOGIC_WITH_POW if _has_pow(path, state) else LOGIC})"]
    for i in range(1, n + 1):
        out.append(f"(declare-const {_sym(f'P{i}')} Real)")
    for step in range(n + 1):
        for owner, field in vs.all():
            out.append(f"(declare-const {_sym(vs.name(step, owner, field))} Real)")
    out.append("; initial state")
    for owner, field in vs.all():
        out.append(f"(assert (= {_sym(vs.name(0, owner, field))} "
                   f"{num(_initial_value(state, owner, field))}))")
    for i, a in enumerate(path, start=1):
        out.append(f"; action {i}: {a.action_id}")
        out += _action(i, a, state, vs)
    out.append("; objective")
    t0 = lambda f: _sym(vs.name(0, "Trader", f))  # noqa: E731
    tn = lambda f: _sym(vs.name(n, "Trader", f))  # noqa: E731
    out.append(f"(assert (>= {tn(base)} (+ {t0(base)} {num(z)})))")
    for asset in vs.assets:
        if asset != base:
            out.append(f"(assert (= {tn(asset)} {t0(asset)}))")
    out.append("(check-sat)")
    out.append("(get-model)")
    return "\n".join(out) + "\n"


def _action(i: int, a: ActionSpec, state: WorldState, vs: _Vars) -> list[str]:
    prev = lambda o, f: _sym(vs.name(i - 1, o, f))  # noqa: E731
    nxt = lambda o, f: _sym(vs.name(i, o, f))  # noqa: E731
    p = _sym(f"P{i}")
    v = state.venue(a.venue)
    src, dst = a.input_asset, a.output_asset
    x, y = prev(v.venue_id, src), prev(v.venue_id, dst)
    if v.kind == CONSTANT_PRODUCT:
        fn, fd = v.fee
        got = f"(/ (* {fn}.0 {p} {y}) (+ (* {x} {fd}.0) (* {fn}.0 {p})))"
    elif v.kind == BANCOR:
        fee = prev(v.venue_id, "fee")
        ratio = f"(/ {prev(v.venue_id, f'ratio:{src}')} {prev(v.venue_id, f'ratio:{dst}')})"
        keep = f"(- {num(PPM)} {fee})"
        got = (f"(/ (* {y} (- 1.0 (^ (/ {x} (+ {x} {p})) {ratio})) {keep} {keep}) "
               f"{num(PPM * PPM)})")
    else:
        got = p
    lines = [f"(assert (>= {p} 0.0))",
             f"(assert (<= {p} {prev('Trader', src)}))"]
    changed = {("Trader", src), ("Trader", dst), (v.venue_id, src), (v.venue_id, dst)}
    lines.append(f"(assert (= {nxt('Trader', src)} (- {prev('Trader', src)} {p})))")
    lines.append(f"(assert (= {nxt('Trader', dst)} (+ {prev('Trader', dst)} {got})))")
    lines.append(f"(assert (= {nxt(v.venue_id, src)} (+ {x} {p})))")
    lines.append(f"(assert (= {nxt(v.venue_id, dst)} (- {y} {got})))")
    lines.append(f"(assert (>= {nxt(v.venue_id, dst)} 0.0))")
    for owner, field in vs.all():
        if (owner, field) not in changed:
            lines.append(f"(assert (= {nxt(owner, field)} {prev(owner, field)}))")
    return lines


def _has_pow(path, state) -> bool:
    return any(state.venue(a.venue).kind == BANCOR for a in path)


def smt_filename(path: Sequence[ActionSpec], state: WorldState) -> str:
    digest = hashlib.sha256(" ".join(a.action_id for a in path).encode()).hexdigest()[:12]
    return f"{state.block_height}_{digest}.smt2"


# --- reading it back ---------------------------------------------------------

def parse_sexprs(text: str) -> list:
    """Parse SMT-LIB2 text into nested lists of atoms (comments dropped)."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c.isspace():
            i += 1
        elif c == "|":
            j = text.index("|", i + 1)
            tokens.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append(text[i:j])
            i = j
    stack: list[list] = [[]]
    for t in tokens:
        if t == "(":
            stack.append([])
        elif t == ")":
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        raise ValueError("unbalanced parentheses")
    return stack[0]


_OPS = {
    "+": lambda *a: math.fsum(a),
    "*": lambda *a: math.prod(a),
    "/": lambda a, b: a / b,
    "^": lambda a, b: a ** b,
}


def _eval(e, env):
    if isinstance(e, str):
        if e in env:
            return env[e]
        return float(e)
    op, *args = e
    vals = [_eval(a, env) for a in args]
    if op == "-":
        return -vals[0] if len(vals) == 1 else vals[0] - math.fsum(vals[1:])
    return _OPS[op](*vals)


def evaluate(text: str, params: Sequence[float], rtol: float = 1e-9):
    """Replay parameters through the exported predicates.

    Returns ``(values, ok)``: every variable's value, and whether all
    remaining (in)equalities hold, equalities up to ``rtol``.
    """
    env = {f"|P{i}|": float(x) for i, x in enumerate(params, start=1)}
    checks = []
    for cmd in parse_sexprs(text):
        if not cmd or cmd[0] != "assert":
            continue
        body = cmd[1]
        if body[0] == "=" and isinstance(body[1], str) and body[1] not in env:
            env[body[1]] = _eval(body[2], env)
        else:
            checks.append(body)
    ok = True
    for op, lhs, rhs in checks:
        a, b = _eval(lhs, env), _eval(rhs, env)
        tol = rtol * max(abs(a), abs(b), 1.0)
        if op == "=":
            ok &= abs(a - b) <= tol
        elif op == ">=":
            ok &= a >= b - tol
        elif op == "<=":
            ok &= a <= b + tol
        elif op == ">":
            ok &= a > b
        elif op == "<":
            ok &= a < b
    return {k.strip("|"): v for k, v in env.items()}, bool(ok)


def state_at(values: dict, step: int, path, state: WorldState, base: str = "ETH") -> dict:
    """``{(owner, field): value}`` of one step, keyed like ``WorldState.read``."""
    vs = _Vars(path, state, base)
    out = {}
    for owner, field in vs.all():
        key = ("trader", field) if owner == "Trader" else (owner, field)
        out[key] = values[vs.name(step, owner, field)]
    return out
