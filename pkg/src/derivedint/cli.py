"""Scenario-driven command line: parse a .scn file, run one pipeline, print a report.

Exit codes: 0 when every check passes, 1 when some check fails, 2 on a parse error.
"""
from __future__ import annotations

import argparse
import re
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .config import RunConfig
from .gca import Algebra, BaseRing, ParseError, Variable

SECTIONS = ("embedding", "options", "cover", "bundle.N", "bundle.TX", "transition", "tw", "mc", "cocycle")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1, path: str = "<scenario>"):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.line, self.column, self.message = line, column, message


# ---------------------------------------------------------------------------
# scenario files


@dataclass(frozen=True)
class Entry:
    key: str
    value: str
    line: int
    column: int


@dataclass
class Scenario:
    name: str
    path: str
    sections: dict[str, dict[str, Entry]]
    header_lines: dict[str, int] = field(default_factory=dict)

    def has(self, section: str) -> bool:
        return section in self.sections

    def error(self, entry: Entry | None, message: str, offset: int = 0, section: str | None = None) -> ScenarioError:
        if entry is None:
            line = self.header_lines.get(section or "", 1)
            return ScenarioError(message, line, 1, self.path)
        return ScenarioError(message, entry.line, entry.column + offset, self.path)

    def entry(self, section: str, key: str, required: bool = True) -> Entry | None:
        sec = self.sections.get(section)
        if sec is None:
            if required:
                raise ScenarioError(f"missing section [{section}]", 1, 1, self.path)
            return None
        e = sec.get(key)
        if e is None and required:
            raise self.error(None, f"section [{section}] lacks '{key}'", section=section)
        return e

    def integer(self, section: str, key: str, default: int | None = None) -> int | None:
        e = self.entry(section, key, required=default is None)
        if e is None:
            return default
        try:
            return int(e.value)
        except ValueError:
            raise self.error(e, f"expected an integer, found {e.value!r}") from None

    def rational(self, section: str, key: str, default: Fraction | None = None) -> Fraction:
        e = self.entry(section, key, required=default is None)
        if e is None:
            return default
        try:
            return Fraction(e.value)
        except (ValueError, ZeroDivisionError):
            raise self.error(e, f"expected a rational p/q, found {e.value!r}") from None

    def items(self, section: str, key: str, required: bool = True) -> list[tuple[str, int]]:
        """Comma-separated list, each item with its column."""
        e = self.entry(section, key, required)
        if e is None:
            return []
        out, pos = [], 0
        for part in e.value.split(","):
            stripped = part.strip()
            if not stripped:
                raise self.error(e, "empty list item", pos)
            out.append((stripped, e.column + pos + (len(part) - len(part.lstrip()))))
            pos += len(part) + 1
        return out

    def integers(self, section: str, key: str, required: bool = True) -> list[int]:
        e = self.entry(section, key, required)
        out = []
        for text, col in self.items(section, key, required):
            try:
                out.append(int(text))
            except ValueError:
                raise ScenarioError(f"expected an integer, found {text!r}", e.line, col, self.path) from None
        return out

    def declared(self, section: str, key: str) -> list[tuple[str, int]]:
        """``name:weight`` declarations."""
        e = self.entry(section, key)
        out = []
        for text, col in self.items(section, key):
            m = re.fullmatch(r"([A-Za-z][A-Za-z0-9_]*)\s*:\s*(-?\d+)", text)
            if not m:
                raise ScenarioError(f"expected name:weight, found {text!r}", e.line, col, self.path)
            out.append((m.group(1), int(m.group(2))))
        names = [n for n, _ in out]
        if len(set(names)) != len(names):
            raise self.error(e, "variable declared twice")
        return out

    def options(self) -> dict[str, int]:
        out = {}
        for key, e in self.sections.get("options", {}).items():
            try:
                out[key] = int(e.value)
            except ValueError:
                raise self.error(e, f"expected an integer, found {e.value!r}") from None
        return out


def parse_scenario(text: str, path: str = "<scenario>") -> Scenario:
    sections: dict[str, dict[str, Entry]] = {}
    headers: dict[str, int] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        if body.startswith("["):
            if not body.endswith("]"):
                raise ScenarioError("unterminated section header", lineno, indent + len(body) + 1, path)
            name = body[1:-1].strip()
            if name not in SECTIONS:
                raise ScenarioError(f"unknown section [{name}]", lineno, indent + 2, path)
            if name in sections:
                raise ScenarioError(f"section [{name}] repeated", lineno, indent + 1, path)
            sections[name] = {}
            headers[name] = lineno
            current = name
            continue
        if current is None:
            raise ScenarioError("declaration outside any section", lineno, indent + 1, path)
        if "=" not in body:
            raise ScenarioError("expected 'key = value'", lineno, indent + 1, path)
        key, value = body.split("=", 1)
        key = key.strip()
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9_\-]*", key):
            raise ScenarioError(f"invalid key {key!r}", lineno, indent + 1, path)
        if key in sections[current]:
            raise ScenarioError(f"key '{key}' repeated in [{current}]", lineno, indent + 1, path)
        vcol = line.index("=") + 2 + (len(value) - len(value.lstrip()))
        if not value.strip():
            raise ScenarioError("empty value", lineno, line.index("=") + 2, path)
        sections[current][key] = Entry(key, value.strip(), lineno, vcol)
    return Scenario(Path(path).stem, path, sections, headers)


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    return parse_scenario(p.read_text(), str(p))


# ---------------------------------------------------------------------------
# building objects from a scenario


def _element(sc: Scenario, alg, entry: Entry, text: str | None = None, offset: int = 0):
    try:
        return alg.element(entry.value if text is None else text)
    except ParseError as exc:
        raise sc.error(entry, exc.message, offset + exc.column - 1) from None


def koszul_from(sc: Scenario):
    from .resolve import build_koszul
    variables = sc.declared("embedding", "variables")
    base = BaseRing(tuple(Variable(n, w, False) for n, w in variables))
    plain = Algebra(base, ())
    e = sc.entry("embedding", "section")
    comps = []
    for text, col in sc.items("embedding", "section"):
        comps.append(_element(sc, plain, e, text, col - e.column))
    names = [n for n, _ in sc.items("embedding", "names", required=False)] or None
    try:
        return build_koszul(base, comps, names)
    except ValueError as exc:
        raise sc.error(e, str(exc)) from None


_QUOTIENT = re.compile(r"\((.*)\)\s*/\s*\((.*)\)")


def cover_from(sc: Scenario, order: int):
    from .obstructions import ChartCover, neighborhood_ring
    from .thomwhitney import LineBundle
    coord = sc.declared("cover", "coordinate")
    normal = sc.declared("cover", "normal")
    if len(coord) != 1 or len(normal) != 1:
        raise sc.error(sc.entry("cover", "coordinate"), "exactly one coordinate and one normal variable")
    (zname, zw), (nname, nw) = coord[0], normal[0]
    if zw != 1:
        raise sc.error(sc.entry("cover", "coordinate"), "the coordinate must have weight 1")
    charts = sc.integer("cover", "charts", 2)
    if charts != 2:
        raise sc.error(sc.entry("cover", "charts"), "only two-chart covers are supported")
    if order < 1:
        raise ScenarioError("order must be >= 1", 1, 1, sc.path)
    ring = neighborhood_ring(order, nw, zname, nname)
    N = LineBundle(sc.integer("bundle.N", "degree"), sc.rational("bundle.N", "scale", Fraction(1)))
    TX = LineBundle(sc.integer("bundle.TX", "degree"), sc.rational("bundle.TX", "scale", Fraction(1)))
    chart1 = sc.items("cover", "chart1")
    if len(chart1) != 2:
        raise sc.error(sc.entry("cover", "chart1"), "chart1 names the coordinate and the normal coordinate")
    images = []
    for name, _ in chart1:
        e = sc.entry("transition", name)
        m = _QUOTIENT.fullmatch(e.value)
        if m:
            num = _element(sc, ring.ambient, e, m.group(1), m.start(1))
            den = _element(sc, ring.ambient, e, m.group(2), m.start(2))
            try:
                images.append(ring.quotient(num, den))
            except ValueError as exc:
                raise sc.error(e, str(exc)) from None
        else:
            images.append(ring.clip(_element(sc, ring.ambient, e)))
    extra = set(sc.sections.get("transition", {})) - {n for n, _ in chart1}
    if extra:
        raise sc.error(sc.sections["transition"][sorted(extra)[0]], "transition entry for an undeclared chart coordinate")
    return ChartCover(ring, N.dual(), TX, images[0], images[1], sc.name)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple[str, ...]] = field(default_factory=list)

    def add(self, *cells) -> None:
        if len(cells) != len(self.columns):
            raise ValueError("row width does not match the columns")
        self.rows.append(tuple(_cell(c) for c in cells))


def _cell(c) -> str:
    if isinstance(c, bool):
        return "yes" if c else "no"
    if isinstance(c, (tuple, list)):
        return "(" + ",".join(_cell(x) for x in c) + ")"
    if isinstance(c, dict):
        return "{" + ",".join(f"{k}:{_cell(v)}" for k, v in sorted(c.items())) + "}"
    s = str(c)
    if " | " in s or "\n" in s:
        raise ValueError(f"cell {s!r} contains a separator")
    return s


STATUSES = ("pass", "fail", "indeterminate")


@dataclass
class Report:
    command: str
    scenario: str
    checks: list[tuple[str, str]] = field(default_factory=list)
    tables: list[Table] = field(default_factory=list)
    verdicts: list[str] = field(default_factory=list)
    timing: float | None = None

    def check(self, name: str, ok: bool | None) -> bool | None:
        self.checks.append((name, "indeterminate" if ok is None else ("pass" if ok else "fail")))
        return ok

    def table(self, name: str, *columns: str) -> Table:
        t = Table(name, tuple(columns))
        self.tables.append(t)
        return t

    @property
    def status(self) -> str:
        return "fail" if any(s == "fail" for _, s in self.checks) else "pass"

    @property
    def exit_code(self) -> int:
        return 1 if self.status == "fail" else 0

    def body(self) -> str:
        out = ["report 1", f"command: {self.command}", f"scenario: {self.scenario}", f"status: {self.status}"]
        out += [f"check: {s} | {n}" for n, s in self.checks]
        for t in self.tables:
            out.append(f"table: {t.name} | " + " | ".join(t.columns))
            out += ["row: " + " | ".join(r) for r in t.rows]
        out += [f"verdict: {v}" for v in self.verdicts]
        return "\n".join(out) + "\n"

    def render(self) -> str:
        return self.body() + ("" if self.timing is None else f"timing: {self.timing:.3f}\n")


def parse_report(text: str) -> Report:
    lines = text.splitlines()
    if not lines or lines[0] != "report 1":
        raise ValueError("not a report")
    rep = Report("", "")
    declared_status = None
    for line in lines[1:]:
        key, _, rest = line.partition(": ")
        if key == "command":
            rep.command = rest
        elif key == "scenario":
            rep.scenario = rest
        elif key == "status":
            declared_status = rest
        elif key == "check":
            status, _, name = rest.partition(" | ")
            if status not in STATUSES:
                raise ValueError(f"bad check status {status!r}")
            rep.checks.append((name, status))
        elif key == "table":
            parts = rest.split(" | ")
            rep.tables.append(Table(parts[0], tuple(parts[1:])))
        elif key == "row":
            rep.tables[-1].rows.append(tuple(rest.split(" | ")))
        elif key == "verdict":
            rep.verdicts.append(rest)
        elif key == "timing":
            rep.timing = float(rest)
        else:
            raise ValueError(f"unknown report line {line!r}")
    if declared_status != rep.status:
        raise ValueError("status line disagrees with the checks")
    return rep


# ---------------------------------------------------------------------------
# subcommands


def cmd_resolve_check(sc: Scenario, cfg: RunConfig) -> Report:
    from .resolve import check_resolution
    k = koszul_from(sc)
    rep = Report("resolve-check", sc.name)
    res = check_resolution(k, cfg.wmax, cfg.jobs)
    t = rep.table("koszul slices", "weight", "dims", "expected_h0", "euler")
    for r in res.rows:
        t.add(r.weight, r.dims, r.expected_h0, r.euler_ok)
    rep.check("Q^2 = 0 on generators and H^0 matches the quotient", res.ok)
    rep.verdicts += list(res.flags) + list(res.diagnostics)
    return rep


def cmd_ce_check(sc: Scenario, cfg: RunConfig) -> Report:
    from .neighborhoods import build_de_rham, truncate, verify_phi_quasi_iso
    k = koszul_from(sc)
    rep = Report("ce-check", sc.name)
    dr = build_de_rham(k)
    for name, bad in dr.identity_failures().items():
        rep.check(f"{name} identity on generators", not bad)
    t = rep.table("truncations", "k", "h0_per_weight", "total", "higher_vanish")
    for order in range(cfg.k + 1):
        pr = verify_phi_quasi_iso(truncate(dr, order), cfg.wmax, cfg.jobs)
        h0 = tuple(r.dims.get(0, 0) for r in pr.rows)
        t.add(order, h0, sum(h0), all(not v for r in pr.rows for n, v in r.dims.items() if n))
        rep.check(f"k={order}: comparison map is a slice-wise quasi-isomorphism", pr.ok)
        if order == cfg.k:
            rep.verdicts.append(f"H0 dims per weight at k={order}: {_cell(h0)}")
    return rep


def cmd_selfint(sc: Scenario, cfg: RunConfig) -> Report:
    from .neighborhoods import build_self_intersection, verify_completion
    k = koszul_from(sc)
    rep = Report("selfint", sc.name)
    si = build_self_intersection(k)
    ks = list(range(2, max(cfg.k, 2) + 1))
    cr = verify_completion(si, ks, cfg.wmax, cfg.jobs)
    t = rep.table("completion", "k", "weight", "full", "truncated", "induced", "agrees")
    for r in cr.rows:
        t.add(r.k, r.weight, r.full, r.truncated, r.induced, r.agrees)
    for kk in ks:
        rep.check(f"k={kk}: truncated self-intersection agrees with the fiber product", cr.agreement(kk))
    return rep


def cmd_tor(sc: Scenario, cfg: RunConfig) -> Report:
    from .neighborhoods import build_self_intersection, tor_dims
    k = koszul_from(sc)
    rep = Report("tor", sc.name)
    tr = tor_dims(build_self_intersection(k), cfg.wmax, cfg.jobs)
    t = rep.table("tor", "weight", "dims")
    for w, dims in sorted(tr.per_weight.items()):
        t.add(w, dims)
    tot = tr.totals()
    dims = tuple(tot.get(-i, 0) for i in range(k.rank + 1))
    rep.verdicts.append(f"Tor dims {_cell(dims)} (weights <= {cfg.wmax})")
    rep.check("Tor vanishes below -rank", all(v == 0 for n, v in tot.items() if n < -k.rank))
    return rep


def cmd_algebroid(sc: Scenario, cfg: RunConfig) -> Report:
    from .liealgebroid import (algebroid_failures, build_tangent, build_uea, ce_consistency, check_uea,
                               end_complex, jet_comparison, tangent_cohomology)
    k = koszul_from(sc)
    rep = Report("algebroid", sc.name)
    ta = build_tangent(k)
    lowest = -max(g.weight for g in k.algebra.generators)
    tc = tangent_cohomology(ta, range(lowest, cfg.wmax + 1))
    t = rep.table("tangent complex", "weight", "dims", "expected_h1")
    for w, dims in sorted(tc.per_weight.items()):
        t.add(w, dims, tc.expected_h1[w])
    rep.check("tangent complex: cohomology in degree 1 only, matching the normal module", tc.ok)
    bad = algebroid_failures(ta)
    rep.check("Lie algebroid axioms", not bad)
    rep.verdicts += bad
    rep.check(f"Chevalley-Eilenberg differential matches the truncated de Rham complex (k={cfg.k})",
              ce_consistency(ta, cfg.k, cfg.wmax).ok)
    rep.check(f"truncated enveloping algebra (order {cfg.uea_order})", check_uea(build_uea(ta, cfg.uea_order), cfg.wmax).ok)
    jr = jet_comparison(k, cfg.jet_order, cfg.wmax)
    rep.check(f"jet comparison is an isomorphism (order {cfg.jet_order})", jr.isomorphism)
    rep.check("jet comparison is a multiplicative chain map", jr.chain_map and jr.multiplicative and not jr.unit_failures)
    rep.check("jet coproduct", jr.coproduct_ok)
    er = end_complex(k, cfg.window, cfg.uea_order, cfg.jobs)
    rep.check("End complex window stabilized", True if er.stabilized else None)
    rep.check("End complex comparison map", er.u_chain_map and er.u_induced_iso)
    rep.verdicts.append(f"Ext dims {_cell(er.ext_dims())}")
    return rep


def cmd_tw_check(sc: Scenario, cfg: RunConfig) -> Report:
    from .thomwhitney import (LineBundle, check_retraction, constant_diagram, line_bundle_tw, tw_stabilization)
    rep = Report("tw-check", sc.name)
    degrees = sc.integers("tw", "bundles", required=False) if sc.has("tw") else list(range(-3, 4))
    t = rep.table("line bundles", "degree", "h0", "h1", "oracle", "tw_equals_tot", "retraction")
    for d in degrees:
        rows = line_bundle_tw(LineBundle(d), cfg.pmax, cfg.jobs)
        h0 = sum(r.tw.get(0, 0) for r in rows)
        h1 = sum(r.tw.get(1, 0) for r in rows)
        agree = all(_nonzero(r.tw) == _nonzero(r.tot) for r in rows)
        ret = all(r.retraction_ok for r in rows)
        oracle = (max(0, d + 1), max(0, -d - 1))
        t.add(d, h0, h1, oracle, agree, ret)
        rep.check(f"O({d}): TW = Tot, retraction laws, Laurent count", agree and ret and (h0, h1) == oracle)
    if sc.has("embedding"):
        from .resolve import koszul_slice
        w = sc.integer("tw", "constant-weight", 1) if sc.has("tw") else 1
        V = koszul_slice(koszul_from(sc), w)
        copies = cfg.nerve_depth + 1
        D = constant_diagram(V, copies)
        p = max(cfg.pmax, D.depth + 1)
        r = check_retraction(D, p)
        c = rep.table("constant diagram", "copies", "weight", "tw", "tot")
        c.add(copies, w, r.tw_dims, r.tot_dims)
        rep.check("constant diagram: cosimplicial identities", not D.identity_failures())
        rep.check("constant diagram: TW = Tot and retraction laws", r.ok and r.dims_agree)
        stab = tw_stabilization(D, [p, p + 1])
        rep.check("constant diagram: stable in the form cap", len({tuple(sorted(v.items())) for v in stab.values()}) == 1)
    return rep


def _nonzero(dims: dict) -> dict:
    return {n: v for n, v in dims.items() if v}


def cmd_mc_check(sc: Scenario, cfg: RunConfig) -> Report:
    from . import mcgauge as mc
    from .thomwhitney import LineBundle
    rep = Report("mc-check", sc.name)
    if sc.has("mc"):
        name = sc.entry("mc", "lie").value
        makers: dict[str, Callable] = {"abelian": lambda: mc.abelian(1), "heisenberg": mc.heisenberg,
                                       "upper-triangular-4": lambda: mc.upper_triangular(4),
                                       "suspended-heisenberg": mc.suspended_heisenberg}
        if name not in makers:
            raise sc.error(sc.entry("mc", "lie"), f"unknown Lie algebra {name!r}; known: {', '.join(makers)}")
        g = makers[name]()
        instances = sc.integer("mc", "instances", 50)
        seed = sc.integer("mc", "seed", 0)
        law = mc.gauge_laws(g, instances, seed, name)
        t = rep.table("gauge laws", "algebra", "class", "instances", "action", "mc", "holonomy")
        t.add(name, law.nilpotency_class, instances, law.action_failures, law.mc_failures,
              law.holonomy_failures if law.holonomy_checked else "n/a")
        rep.check(f"{name}: gauge action via BCH", not law.action_failures)
        rep.check(f"{name}: Maurer-Cartan preserved", not law.mc_failures)
        if law.holonomy_checked:
            rep.check(f"{name}: holonomy multiplicative on the 2-simplex", not law.holonomy_failures)
        bundles = sc.integers("mc", "bundles", required=False)
        if bundles:
            if len(bundles) != g.dim:
                raise sc.error(sc.entry("mc", "bundles"), f"{g.dim} bundle degrees required")
            _mc_sheaf(sc, rep, g, tuple(LineBundle(d) for d in bundles), seed)
    if sc.has("transition"):
        from .obstructions import neighborhood_h0
        cover = cover_from(sc, cfg.order)
        dr = neighborhood_h0(cover, range(-cfg.window, cfg.window + 1))
        t = rep.table("deformed resolution", "weight", "h0", "glued", "square_zero")
        for r in dr.rows:
            t.add(r.weight, r.h0, r.glued, r.square_zero)
        rep.check("deformed resolution: H^0 equals the glued algebra", dr.ok)
    if not rep.checks:
        raise ScenarioError("mc-check needs an [mc] or [transition] section", 1, 1, sc.path)
    return rep


def _mc_sheaf(sc: Scenario, rep: Report, g, bundles, seed: int) -> None:
    import random
    from . import mcgauge as mc
    rng = random.Random(seed)
    ring = mc.laurent_ring()
    S = mc.SheafLie(g, bundles, ring)
    L1 = S.lie(1)
    z, t, dt = L1.ring.var("z"), L1.ring.var("t1"), L1.ring.gen("dt1")
    zq = ring.var("z")

    def rnd():
        return Fraction(rng.randint(-5, 5), rng.randint(1, 3))

    thetas, gauges = [], []
    table = sc.sections.get("cocycle", {})
    if table:
        T = {}
        for i, nm in enumerate(g.names):
            e = table.get(nm)
            if e is not None:
                T[i] = _element(sc, ring, e)
        thetas.append(mc.cocycle_to_mc(S, mc.NonabelianCocycle({(0, 1): mc.DglaOver(g, ring)._clean(T)})))
    for _ in range(sc.integer("mc", "samples", 4)):
        th = {i: (z ** rng.randint(-4, 2) * rnd() + t * z ** rng.randint(-4, 2) * rnd()) * dt for i in range(g.dim)}
        thetas.append({(0, 1): L1._clean(th)})
    for _ in thetas:
        b0 = {i: zq ** rng.randint(0, 2) * rnd() for i in range(g.dim)}
        b1 = {i: zq ** (bundles[i].d - rng.randint(0, 2)) * rnd() for i in range(g.dim)}
        gauges.append(mc.interpolating_gauge(S, {0: b0, 1: b1}))
    rt = mc.round_trip(S, thetas, gauges)
    t = rep.table("round trips", "samples", "cocycle_fixed", "mc_connected", "gauge_compatible")
    t.add(rt.samples, rt.cocycle_round_trip, rt.mc_round_trip, rt.gauge_compatible)
    rep.check("MC -> cocycle -> MC round trips gauge-connect", not rt.failures)
    rep.verdicts += rt.failures
    if g.dim == 1 and all(d == 0 for d in g.degrees):
        samples = [{a: Fraction(rng.randint(-2, 2)) for a in range(bundles[0].d - 1, 2)} for _ in range(5)]
        ab = mc.abelian_orbits(bundles[0], samples)
        t = rep.table("abelian orbits", "bundle", "cech_h1", "tw_h1", "cech_orbits", "tw_orbits")
        t.add(bundles[0].d, ab.cech_h1, ab.tw_h1, ab.orbits_cech, ab.orbits_tw)
        rep.check("abelian: Čech and TW orbit decisions agree", ab.ok)


def cmd_obstruct(sc: Scenario, cfg: RunConfig) -> Report:
    from .obstructions import obstruction_tower
    cover = cover_from(sc, cfg.order)
    rep = Report("obstruct", sc.name)
    bad = cover.consistency_defects()
    if bad:
        for b in bad:
            rep.check(b, False)
        return rep
    tower = obstruction_tower(cover)
    rep.check("transition cocycle verified", tower.cocycle.ok)
    rep.verdicts += tower.cocycle.failures
    for name, count in tower.relations.checked.items():
        rep.check(f"{name} ({count} samples)", not any(f.startswith(name) for f in tower.relations.failures))
    t = rep.table("classes", "class", "bundle", "ext0", "ext1", "certified", "cech_zero", "tw_zero",
                  "lift", "lift_verified", "representative")
    for c in tower.classes:
        t.add(c.label, f"O({c.bundle.d})", c.ext0, c.ext1, c.cocycle_certified, c.cech_vanishes, c.tw_vanishes,
              c.lift_constructed, c.lift_verified, c.representative.replace(" ", ""))
        rep.check(f"{c.label}: Ext window stabilized", True if c.stabilized else None)
        rep.check(f"{c.label}: Čech and TW routes agree", c.routes_agree)
        if c.vanishes:
            rep.check(f"{c.label}: lift constructed and re-verified", c.lift_constructed and c.lift_verified)
        state = "vanishes" if c.vanishes else "does not vanish"
        rep.verdicts.append(f"{c.label} {state} (Ext¹ dim {c.ext1})")
    if tower.stopped:
        rep.verdicts.append(f"tower stops: {tower.stopped}")
    return rep


COMMANDS: dict[str, Callable[[Scenario, RunConfig], Report]] = {
    "resolve-check": cmd_resolve_check,
    "ce-check": cmd_ce_check,
    "selfint": cmd_selfint,
    "tor": cmd_tor,
    "algebroid": cmd_algebroid,
    "tw-check": cmd_tw_check,
    "mc-check": cmd_mc_check,
    "obstruct": cmd_obstruct,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="derivedint", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("scenario")
    for flag in ("wmax", "k", "order", "window", "nerve-depth", "pmax", "jobs", "uea-order", "jet-order"):
        p.add_argument(f"--{flag}", type=int, default=None)
    p.add_argument("--report", default=None, help="also write the report to this path")
    return p


def run(command: str, scenario_path: str, flags: dict | None = None) -> tuple[Report | None, int, str]:
    """Returns (report, exit code, diagnostic text)."""
    flags = flags or {}
    try:
        sc = load_scenario(scenario_path)
        cfg = RunConfig().merged(sc.options()).merged(flags)
    except ScenarioError as exc:
        return None, 2, str(exc)
    except (KeyError, ValueError) as exc:
        return None, 2, f"{scenario_path}: {exc}"
    except OSError as exc:
        return None, 2, str(exc)
    start = time.perf_counter()
    try:
        rep = COMMANDS[command](sc, cfg)
    except ScenarioError as exc:
        return None, 2, str(exc)
    rep.timing = time.perf_counter() - start
    return rep, rep.exit_code, ""


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "scenario", "report")}
    rep, code, diag = run(args.command, args.scenario, flags)
    if rep is None:
        print(diag, file=sys.stderr)
        return code
    text = rep.render()
    sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
