"""Plain-text linear-program export of the allocation model.

The document uses the conventional sectioned LP format (objective,
Subject To, Bounds, Binary, End) so any off-the-shelf MILP solver can
cross-check the exhaustive search.  A parser for the same dialect and a
bridge to scipy's HiGHS backend are included.

Model shape, matching the exhaustive search exactly:

* node universe: all participants, |U|-1 mixer slots, 2|U|-1 compressor
  slots; d_a_b picks the stream edges (at most one per ordered pair)
* compressor output edges carry the configured fixed rate
* x places instantiated VMs on servers, z linearizes placement times
  input degree for the memory bill, j linearizes edge-times-placement
  for the transmission bill
* e marks which VMs carry which participant's stream, f marks the edges
  those streams ride, h marks a mixer holding every stream
* y tracks worst-case stream arrival times through big-M recursion rows,
  bounding both per-VM readiness and the final delivered delay
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

from ..errors import LpFormatError
from ..model.types import Instance

__all__ = ["LpDocument", "LpRow", "LpSolution", "export_lp", "solve_lp_document"]

_NUM = r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?"
_TOKEN = re.compile(rf"<=|>=|=|\+|-|[A-Za-z_][A-Za-z0-9_]*|{_NUM}")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _expr(terms: tuple[tuple[float, str], ...]) -> str:
    parts: list[str] = []
    for coef, var in terms:
        mag = abs(coef)
        body = var if abs(mag - 1.0) < 1e-15 else f"{_fmt(mag)} {var}"
        if not parts:
            parts.append(f"- {body}" if coef < 0 else body)
        else:
            parts.append(f"{'-' if coef < 0 else '+'} {body}")
    return " ".join(parts) if parts else "0 zero"


@dataclass(frozen=True)
class LpRow:
    name: str
    terms: tuple[tuple[float, str], ...]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal", "infeasible", "unknown"
    objective: float | None
    values: dict[str, float]


@dataclass(frozen=True)
class LpDocument:
    comment: str
    objective: tuple[tuple[float, str], ...]
    rows: tuple[LpRow, ...]
    bounds: tuple[tuple[str, float, float], ...]  # (var, lo, hi)
    binaries: tuple[str, ...]

    def variable_names(self) -> list[str]:
        """All variables in first-appearance order."""
        seen: dict[str, None] = {}
        for _, v in self.objective:
            seen.setdefault(v)
        for row in self.rows:
            for _, v in row.terms:
                seen.setdefault(v)
        for v, _, _ in self.bounds:
            seen.setdefault(v)
        for v in self.binaries:
            seen.setdefault(v)
        return list(seen)

    def to_text(self) -> str:
        out: list[str] = []
        if self.comment:
            for line in self.comment.splitlines():
                out.append(f"\\ {line}")
        out.append("Minimize")
        out.append(f" obj: {_expr(self.objective)}")
        out.append("Subject To")
        for row in self.rows:
            out.append(f" {row.name}: {_expr(row.terms)} {row.sense} {_fmt(row.rhs)}")
        out.append("Bounds")
        for var, lo, hi in self.bounds:
            if lo == hi:
                out.append(f" {var} = {_fmt(lo)}")
            else:
                out.append(f" {_fmt(lo)} <= {var} <= {_fmt(hi)}")
        if self.binaries:
            out.append("Binary")
            for var in self.binaries:
                out.append(f" {var}")
        out.append("End")
        return "\n".join(out) + "\n"

    @classmethod
    def parse(cls, text: str) -> "LpDocument":
        section = None
        comment_lines: list[str] = []
        obj_tokens: list[str] = []
        rows: list[LpRow] = []
        bounds: list[tuple[str, float, float]] = []
        binaries: list[str] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("\\"):
                comment_lines.append(line[1:].strip())
                continue
            low = line.lower()
            if low in ("minimize", "maximize"):
                section = "obj"
                continue
            if low in ("subject to", "st", "s.t.", "such that"):
                section = "rows"
                continue
            if low == "bounds":
                section = "bounds"
                continue
            if low in ("binary", "binaries"):
                section = "bin"
                continue
            if low in ("general", "generals"):
                section = "gen"
                continue
            if low == "end":
                break
            if section == "obj":
                body = line.split(":", 1)[1] if ":" in line else line
                obj_tokens.extend(_TOKEN.findall(body))
            elif section == "rows":
                if ":" not in line:
                    raise LpFormatError(f"constraint row without a name: {line!r}")
                name, body = line.split(":", 1)
                terms, sense, rhs = _parse_row(body)
                rows.append(LpRow(name=name.strip(), terms=terms, sense=sense, rhs=rhs))
            elif section == "bounds":
                bounds.append(_parse_bound(line))
            elif section == "bin":
                binaries.extend(_TOKEN.findall(line))
            elif section == "gen":
                raise LpFormatError("general integer variables are not used by this model")
            else:
                raise LpFormatError(f"content before any section header: {line!r}")
        terms = _parse_terms(obj_tokens)
        return cls(
            comment="\n".join(comment_lines),
            objective=terms,
            rows=tuple(rows),
            bounds=tuple(bounds),
            binaries=tuple(binaries),
        )


def _is_number(tok: str) -> bool:
    return bool(re.fullmatch(_NUM, tok))


def _parse_terms(tokens: list[str]) -> tuple[tuple[float, str], ...]:
    terms: list[tuple[float, str]] = []
    sign = 1.0
    coef: float | None = None
    for tok in tokens:
        if tok == "+":
            continue
        if tok == "-":
            sign = -sign
            continue
        if _is_number(tok):
            coef = (coef if coef is not None else 1.0) * float(tok)
            continue
        terms.append((sign * (coef if coef is not None else 1.0), tok))
        sign, coef = 1.0, None
    if coef is not None:
        raise LpFormatError("dangling coefficient without a variable")
    return tuple(terms)


def _parse_row(body: str) -> tuple[tuple[tuple[float, str], ...], str, float]:
    tokens = _TOKEN.findall(body)
    for sense in ("<=", ">=", "="):
        if sense in tokens:
            i = tokens.index(sense)
            lhs, rhs_toks = tokens[:i], tokens[i + 1 :]
            break
    else:
        raise LpFormatError(f"constraint without a comparison: {body!r}")
    rhs_sign = 1.0
    rhs_vals = []
    for tok in rhs_toks:
        if tok == "-":
            rhs_sign = -rhs_sign
        elif tok == "+":
            continue
        elif _is_number(tok):
            rhs_vals.append(rhs_sign * float(tok))
        else:
            raise LpFormatError(f"variables on the right-hand side are not supported: {body!r}")
    if len(rhs_vals) != 1:
        raise LpFormatError(f"expected one right-hand-side constant: {body!r}")
    return _parse_terms(lhs), sense, rhs_vals[0]


def _parse_bound(line: str) -> tuple[str, float, float]:
    tokens = _TOKEN.findall(line)
    # forms: "lo <= var <= hi", "var = v", "var <= hi", "var >= lo"
    if len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
        return tokens[2], float(tokens[0]), float(tokens[4])
    if len(tokens) == 3 and tokens[1] == "=":
        v = float(tokens[2])
        return tokens[0], v, v
    if len(tokens) == 3 and tokens[1] == "<=":
        return tokens[0], 0.0, float(tokens[2])
    if len(tokens) == 3 and tokens[1] == ">=":
        return tokens[0], float(tokens[2]), float("inf")
    raise LpFormatError(f"unsupported bound line: {line!r}")


class _Rows:
    def __init__(self) -> None:
        self.rows: list[LpRow] = []

    def add(self, name: str, terms: list[tuple[float, str]], sense: str, rhs: float) -> None:
        merged: dict[str, float] = {}
        for coef, var in terms:
            merged[var] = merged.get(var, 0.0) + coef
        packed = tuple((c, v) for v, c in merged.items() if abs(c) > 1e-15)
        self.rows.append(LpRow(name=name, terms=packed, sense=sense, rhs=rhs))


def export_lp(instance: Instance) -> LpDocument:
    """Build the full allocation model for one instance.

    The objective prices VM memory per megabyte (overhead plus per-stream
    share) and transmissions per compressed megabyte-distance, matching
    the default cost mode of the evaluators and the exhaustive search.
    """
    n = len(instance.participants)
    if n > 10:
        warnings.warn(
            f"linear-program export grows steeply; {n} participants will be large",
            stacklevel=2,
        )
    media = instance.media
    net = instance.network
    servers = instance.servers
    n_srv = len(servers)
    t_eps = instance.qos.max_delay
    gamma = min(media.fixed_gamma / 100.0, media.max_compression_rate)

    users = [f"u{i}" for i in range(n)]
    mixers = [f"m{i}" for i in range(n - 1)]
    comps = [f"c{i}" for i in range(2 * n - 1)]
    vms = mixers + comps
    nodes = users + vms
    beta = n + len(vms) + 1

    user_site = {f"u{i}": p.site for i, p in enumerate(instance.participants)}
    is_comp = {v: v.startswith("c") for v in vms}
    rate_of = {v: (gamma if is_comp[v] else 0.0) for v in vms}

    tmax = max(max(row) for row in net.time)
    big_m = t_eps + media.time_per_stream * len(nodes) + tmax + 1.0

    def d(a: str, b: str) -> str:
        return f"d_{a}_{b}"

    def indeg(v: str) -> list[tuple[float, str]]:
        return [(media.time_per_stream, d(a, v)) for a in nodes if a != v]

    fixed_zero: set[str] = set()
    for a in nodes:
        fixed_zero.add(d(a, a))
    for a in users:
        for b in users:
            fixed_zero.add(d(a, b))
    for a in comps:
        for b in comps:
            fixed_zero.add(d(a, b))

    rows = _Rows()
    obj: list[tuple[float, str]] = []

    # server memory bill: price * (overhead on placement + per-stream share)
    for v in vms:
        for s in range(n_srv):
            obj.append((servers[s].cost_per_unit * media.vm_overhead, f"x_s{s}_{v}"))
            obj.append((servers[s].cost_per_unit * media.resource_per_stream, f"z_s{s}_{v}"))

    # transmission bill through edge/placement products
    j_rows: list[tuple[str, list[tuple[float, str]], float]] = []
    for u in users:
        for v in vms:
            for s in range(n_srv):
                p = net.p(user_site[u], servers[s].site)
                if p > 1e-15:
                    jv = f"j_{u}_{v}_s{s}"
                    obj.append((p, jv))
                    j_rows.append((jv, [(1.0, jv), (-1.0, d(u, v)), (-1.0, f"x_s{s}_{v}")], -1.0))
    for v in vms:
        for u in users:
            for s in range(n_srv):
                p = net.p(servers[s].site, user_site[u]) * (1.0 - rate_of[v])
                if p > 1e-15:
                    jv = f"j_{v}_{u}_s{s}"
                    obj.append((p, jv))
                    j_rows.append((jv, [(1.0, jv), (-1.0, d(v, u)), (-1.0, f"x_s{s}_{v}")], -1.0))
    for i in vms:
        for v in vms:
            if i == v or d(i, v) in fixed_zero:
                continue
            for s1 in range(n_srv):
                for s2 in range(n_srv):
                    p = net.p(servers[s1].site, servers[s2].site) * (1.0 - rate_of[i])
                    if p > 1e-15:
                        jv = f"j_{i}_{v}_s{s1}_s{s2}"
                        obj.append((p, jv))
                        j_rows.append(
                            (
                                jv,
                                [
                                    (1.0, jv),
                                    (-1.0, d(i, v)),
                                    (-1.0, f"x_s{s1}_{i}"),
                                    (-1.0, f"x_s{s2}_{v}"),
                                ],
                                -2.0,
                            )
                        )

    # each participant sends exactly one stream into the service graph
    # and receives exactly one mixed stream back
    for u in users:
        rows.add(f"out_deg_{u}", [(1.0, d(u, v)) for v in vms], "=", 1.0)
        rows.add(f"in_deg_{u}", [(1.0, d(v, u)) for v in vms], "=", 1.0)

    # a VM is placed on exactly one server iff instantiated, and an
    # instantiated VM both takes and emits at least one stream
    for v in vms:
        rows.add(
            f"place_{v}",
            [(1.0, f"x_s{s}_{v}") for s in range(n_srv)] + [(-1.0, f"g_{v}")],
            "=",
            0.0,
        )
        rows.add(
            f"used_in_{v}",
            [(1.0, f"g_{v}")] + [(-1.0, d(a, v)) for a in nodes if a != v and d(a, v) not in fixed_zero],
            "<=",
            0.0,
        )
        rows.add(
            f"used_out_{v}",
            [(1.0, f"g_{v}")] + [(-1.0, d(v, a)) for a in nodes if a != v and d(v, a) not in fixed_zero],
            "<=",
            0.0,
        )
        for a in nodes:
            if a == v:
                continue
            if d(a, v) not in fixed_zero:
                rows.add(f"gate_in_{a}_{v}", [(1.0, d(a, v)), (-1.0, f"g_{v}")], "<=", 0.0)
            if d(v, a) not in fixed_zero:
                rows.add(f"gate_out_{v}_{a}", [(1.0, d(v, a)), (-1.0, f"g_{v}")], "<=", 0.0)

    # compressors forward every stream they take
    for c in comps:
        rows.add(
            f"balance_{c}",
            [(1.0, d(a, c)) for a in nodes if a != c and d(a, c) not in fixed_zero]
            + [(-1.0, d(c, a)) for a in nodes if a != c and d(c, a) not in fixed_zero],
            "=",
            0.0,
        )

    # stream carriage: e closes over the edge relation, f marks carrying edges
    for u in users:
        for v in vms:
            rows.add(f"carry_src_{u}_{v}", [(1.0, f"e_{u}_{v}"), (-1.0, d(u, v))], ">=", 0.0)
            support = [(1.0, f"e_{u}_{v}"), (-1.0, d(u, v))]
            for i in vms:
                if i == v or d(i, v) in fixed_zero:
                    continue
                fv = f"f_{u}_{i}_{v}"
                rows.add(
                    f"carry_hop_{u}_{i}_{v}",
                    [(1.0, f"e_{u}_{v}"), (-1.0, f"e_{u}_{i}"), (-1.0, d(i, v))],
                    ">=",
                    -1.0,
                )
                rows.add(
                    f"flow_lo_{u}_{i}_{v}",
                    [(1.0, fv), (-1.0, f"e_{u}_{i}"), (-1.0, d(i, v))],
                    ">=",
                    -1.0,
                )
                rows.add(f"flow_edge_{u}_{i}_{v}", [(1.0, fv), (-1.0, d(i, v))], "<=", 0.0)
                rows.add(f"flow_carr_{u}_{i}_{v}", [(1.0, fv), (-1.0, f"e_{u}_{i}")], "<=", 0.0)
                support.append((-1.0, fv))
            rows.add(f"carry_support_{u}_{v}", support, "<=", 0.0)

    # some mixer holds every participant's stream
    for m in mixers:
        rows.add(
            f"cover_full_{m}",
            [(float(n), f"h_{m}")] + [(-1.0, f"e_{u}_{m}") for u in users],
            "<=",
            0.0,
        )
    rows.add("cover_any", [(1.0, f"h_{m}") for m in mixers], ">=", 1.0)

    # the final stream to a participant must come from a VM carrying everyone
    for v in vms:
        for u_to in users:
            for u in users:
                rows.add(
                    f"final_src_{v}_{u_to}_{u}",
                    [(1.0, d(v, u_to)), (-1.0, f"e_{u}_{v}")],
                    "<=",
                    0.0,
                )

    # memory: z_s_v equals the VM's input degree where it is placed
    for v in vms:
        deg = [(1.0, d(a, v)) for a in nodes if a != v and d(a, v) not in fixed_zero]
        for s in range(n_srv):
            rows.add(f"zcap_s{s}_{v}", [(1.0, f"z_s{s}_{v}"), (-float(beta), f"x_s{s}_{v}")], "<=", 0.0)
            rows.add(f"zdeg_s{s}_{v}", [(1.0, f"z_s{s}_{v}")] + [(-c, var) for c, var in deg], "<=", 0.0)
            rows.add(
                f"zforce_s{s}_{v}",
                [(1.0, f"z_s{s}_{v}")]
                + [(-c, var) for c, var in deg]
                + [(-float(beta), f"x_s{s}_{v}")],
                ">=",
                -float(beta),
            )
    for s in range(n_srv):
        rows.add(
            f"capacity_s{s}",
            [(media.vm_overhead, f"x_s{s}_{v}") for v in vms]
            + [(media.resource_per_stream, f"z_s{s}_{v}") for v in vms],
            "<=",
            servers[s].capacity,
        )

    # arrival-time recursion with handling time per input stream
    for u in users:
        for v in vms:
            terms = [(1.0, f"y_{u}_{v}")]
            terms += [(-c, var) for c, var in indeg(v)]
            for s in range(n_srv):
                terms.append((-net.t(user_site[u], servers[s].site), f"x_s{s}_{v}"))
            terms.append((-big_m, d(u, v)))
            rows.add(f"arrive_src_{u}_{v}", terms, ">=", -big_m)
            for i in vms:
                if i == v or d(i, v) in fixed_zero:
                    continue
                fv = f"f_{u}_{i}_{v}"
                for s1 in range(n_srv):
                    for s2 in range(n_srv):
                        t_eff = net.t(servers[s1].site, servers[s2].site) * (1.0 - rate_of[i])
                        terms = [(1.0, f"y_{u}_{v}"), (-1.0, f"y_{u}_{i}")]
                        terms += [(-c, var) for c, var in indeg(v)]
                        terms += [
                            (-big_m, fv),
                            (-big_m, f"x_s{s1}_{i}"),
                            (-big_m, f"x_s{s2}_{v}"),
                        ]
                        rows.add(
                            f"arrive_hop_{u}_{i}_{v}_s{s1}_s{s2}",
                            terms,
                            ">=",
                            t_eff - 3.0 * big_m,
                        )
            rows.add(
                f"arrive_cap_{u}_{v}",
                [(1.0, f"y_{u}_{v}"), (-t_eps, f"e_{u}_{v}")],
                "<=",
                0.0,
            )

    # delivered delay: worst arrival at the final VM plus the return leg
    for u in users:
        for u_to in users:
            for v in vms:
                for s in range(n_srv):
                    t_eff = net.t(servers[s].site, user_site[u_to]) * (1.0 - rate_of[v])
                    rows.add(
                        f"deliver_{u}_{u_to}_{v}_s{s}",
                        [(1.0, f"y_{u}_{v}"), (big_m, d(v, u_to)), (big_m, f"x_s{s}_{v}")],
                        "<=",
                        t_eps - t_eff + 2.0 * big_m,
                    )

    for name, terms, rhs in j_rows:
        rows.add(name, terms, ">=", rhs)

    bounds: list[tuple[str, float, float]] = []
    binaries: list[str] = []
    for a in nodes:
        for b in nodes:
            var = d(a, b)
            binaries.append(var)
            if var in fixed_zero:
                bounds.append((var, 0.0, 0.0))
    for v in vms:
        binaries.append(f"g_{v}")
        for s in range(n_srv):
            binaries.append(f"x_s{s}_{v}")
    for u in users:
        for v in vms:
            binaries.append(f"e_{u}_{v}")
            bounds.append((f"y_{u}_{v}", 0.0, t_eps))
            for i in vms:
                if i != v and d(i, v) not in fixed_zero:
                    binaries.append(f"f_{u}_{i}_{v}")
    for m in mixers:
        binaries.append(f"h_{m}")
    for v in vms:
        for s in range(n_srv):
            bounds.append((f"z_s{s}_{v}", 0.0, float(beta)))
    for name, _, _ in j_rows:
        bounds.append((name, 0.0, 1.0))

    comment = (
        f"stream allocation model: {n} participants, {n_srv} servers, "
        f"{len(mixers)} mixer slots, {len(comps)} compressor slots, "
        f"fixed compression rate {_fmt(gamma)}"
    )
    return LpDocument(
        comment=comment,
        objective=tuple(obj),
        rows=tuple(rows.rows),
        bounds=tuple(bounds),
        binaries=tuple(dict.fromkeys(binaries)),
    )


def solve_lp_document(doc: LpDocument, *, time_limit: float | None = None) -> LpSolution:
    """Solve a parsed or freshly exported document with scipy's MILP
    backend.  Returns objective None unless the solve proves optimality.
    With time_limit set (seconds), an unfinished solve comes back with
    status "unknown" instead of running to completion."""
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import csr_matrix

    names = doc.variable_names()
    idx = {v: i for i, v in enumerate(names)}
    nv = len(names)

    c = np.zeros(nv)
    for coef, var in doc.objective:
        c[idx[var]] += coef

    data: list[float] = []
    ri: list[int] = []
    ci: list[int] = []
    lb = np.empty(len(doc.rows))
    ub = np.empty(len(doc.rows))
    for r, row in enumerate(doc.rows):
        for coef, var in row.terms:
            data.append(coef)
            ri.append(r)
            ci.append(idx[var])
        if row.sense == "<=":
            lb[r], ub[r] = -np.inf, row.rhs
        elif row.sense == ">=":
            lb[r], ub[r] = row.rhs, np.inf
        else:
            lb[r], ub[r] = row.rhs, row.rhs
    mat = csr_matrix((data, (ri, ci)), shape=(len(doc.rows), nv))

    lo = np.zeros(nv)
    hi = np.full(nv, np.inf)
    integrality = np.zeros(nv)
    for var in doc.binaries:
        i = idx[var]
        integrality[i] = 1
        hi[i] = 1.0
    for var, b_lo, b_hi in doc.bounds:
        i = idx[var]
        lo[i], hi[i] = b_lo, b_hi

    res = milp(
        c=c,
        constraints=LinearConstraint(mat, lb, ub),
        integrality=integrality,
        bounds=Bounds(lo, hi),
        options=None if time_limit is None else {"time_limit": time_limit},
    )
    if res.status == 0:
        values = {names[i]: float(res.x[i]) for i in range(nv)}
        return LpSolution(status="optimal", objective=float(res.fun), values=values)
    if res.status == 2:
        return LpSolution(status="infeasible", objective=None, values={})
    return LpSolution(status="unknown", objective=None, values={})
