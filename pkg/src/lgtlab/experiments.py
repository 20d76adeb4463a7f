"""Named experiments driven by :class:`~lgtlab.config.ExperimentConfig`.

Each runner returns an :class:`ExperimentOutput` holding one or more CSV
tables and an overall pass flag. Nothing here touches the file system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .config import ExperimentConfig, parse_volume
from .dynamics import EvolutionPlan, convergence_study, cocycle, dyson_cocycle
from .gauge import (
    boundary_exempt_sites,
    fermi_bilinear,
    gauge_unitary,
    gauss_projector,
    random_gauge_element,
    reduce_observable,
    wilson_loop,
)
from .groundstate import ground, subadditivity_check
from .hamiltonian import assemble, make_layout
from .lattice import Link, boundary_set, build_cube, from_element, is_bulk, neighbor_set, to_text
from .liebrobinson import commutator_experiment
from .linkspace import electric_operator
from .opalg import Operator, operator_norm


@dataclass
class Table:
    header: list[str]
    units: str
    rows: list[list[Any]] = field(default_factory=list)


@dataclass
class ExperimentOutput:
    name: str
    tables: dict[str, Table]
    passed: bool
    meta: dict[str, Any] = field(default_factory=dict)
    texts: dict[str, str] = field(default_factory=dict)


def _electric(layout, model, link: Link) -> Operator:
    return Operator(layout.product(links={link: electric_operator(model)}), layout, from_element(link, layout.lattice.dimension))


def lattice_audit(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.experiment("lattice-audit")
    t = Table(
        ["d", "n", "boundary_links", "expected_links", "boundary_plaquettes", "plaquette_bound", "pass"],
        "counts (dimensionless), 3D cubes",
    )
    ok = True
    texts = {}
    for d, n in p["pairs"]:
        T, R = build_cube(n, 3), build_cube(d, 3)
        nl = len(boundary_set(T, R, "links"))
        npq = len(boundary_set(T, R, "plaquettes"))
        good = nl == 6 * (2 * d + 1) ** 2 and npq <= 24 * (2 * d + 1) ** 2
        ok &= good
        t.rows.append([d, n, nl, 6 * (2 * d + 1) ** 2, npq, 24 * (2 * d + 1) ** 2, int(good)])
        texts[f"cube_S{d}.txt"] = to_text(R, d)
    r = p["bulk_radius"]
    S = build_cube(r, 3)
    nb = Table(["kind", "max_bulk_neighbors", "expected", "pass"], "counts (dimensionless), 3D cube S_%d" % r)
    for kind, expected in (("link", 30), ("plaquette", 48)):
        elems = S.link_list if kind == "link" else S.plaquette_list
        mx = max(len(neighbor_set(S, q)) for q in elems if is_bulk(S, q))
        good = mx == expected
        ok &= good
        nb.rows.append([kind, mx, expected, int(good)])
    return ExperimentOutput("lattice-audit", {"lattice_audit.csv": t, "neighbor_sets.csv": nb}, ok, texts=texts)


def lr_verify(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.experiment("lr-verify")
    S = parse_volume(p["volume"])
    model = cfg.model
    lay = make_layout(S, model, cfg.fermions)
    h = assemble(S, cfg.couplings, model, lay)
    plan = EvolutionPlan(h, dense_threshold=cfg.dense_budget, sparse_budget=cfg.sparse_budget, sector_budget=cfg.sector_budget)
    A = _electric(lay, model, S.link_list[0])
    D = _electric(lay, model, S.link_list[-1])
    rows = commutator_experiment(D, A, plan, p["times"])
    t = Table(["t", "measured", "generic_bound", "closed_form_bound"], "t in 1/energy (hbar=1); norms in energy units of E")
    ok = True
    for r in rows:
        ok &= r.measured < r.generic_bound
        t.rows.append([r.t, r.measured, r.generic_bound, "" if r.closed_form_bound is None else r.closed_form_bound])
    return ExperimentOutput("lr-verify", {"lr_verify.csv": t}, ok, {"method": plan.method, "total_dim": lay.total_dim})


def converge(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.experiment("converge")
    vols = [parse_volume(v) for v in p["volumes"]]
    model = cfg.model
    lay = make_layout(vols[-1], model, cfg.fermions)
    centre = Link((0, 0, 0), (1, 0, 0)) if Link((0, 0, 0), (1, 0, 0)) in vols[0].links else vols[0].link_list[0]
    A = _electric(lay, model, centre)
    rows = convergence_study(
        A, vols, p["times"], cfg.couplings, model, lay,
        dense_threshold=cfg.dense_budget, sparse_budget=cfg.sparse_budget, sector_budget=cfg.sector_budget,
    )
    t = Table(["volume", "t", "diff_norm", "lr_bound"], "volume in sites; t in 1/energy (hbar=1)")
    ok = True
    by_t: dict[float, list[float]] = {}
    for r in rows:
        t.rows.append([r.volume, r.t, r.diff_norm, r.lr_bound])
        ok &= r.diff_norm <= r.lr_bound
        by_t.setdefault(r.t, []).append(r.diff_norm)
    for tt, diffs in by_t.items():
        if tt != 0:
            ok &= all(b < a for a, b in zip(diffs, diffs[1:]))
    meta = {"observable_link": [list(centre.tail), list(centre.head)], "t_grid_points": len(p["times"]),
            "uniformity_proxy": "max over the listed t grid"}
    return ExperimentOutput("converge", {"converge.csv": t}, ok, meta)


def dyson(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.experiment("dyson")
    S = parse_volume(p["volume"])
    model = cfg.model
    lay = make_layout(S, model, cfg.fermions)
    h = assemble(S, cfg.couplings, model, lay)
    plan = EvolutionPlan(h, "dense", dense_threshold=cfg.dense_budget)
    B = _electric(lay, model, S.link_list[0])
    hn = operator_norm(h.h_int.matrix)
    tt = p["x"] / (2 * hn) if hn > 0 else 1.0
    exact = cocycle(B, plan, tt).toarray()
    t = Table(["order", "t", "error", "tail_bound"], "t in 1/energy (hbar=1); operator norms")
    ok = True
    for N in p["orders"]:
        approx, bound = dyson_cocycle(B, plan, tt, N)
        err = float(np.linalg.norm(approx.toarray() - exact, 2))
        ok &= err <= bound + 1e-14
        t.rows.append([N, tt, err, bound])
    return ExperimentOutput("dyson", {"dyson.csv": t}, ok)


def ground_exp(cfg: ExperimentConfig, subadditivity: bool = False) -> ExperimentOutput:
    p = cfg.experiment("ground")
    model = cfg.model
    tables = {}
    t = Table(["volume", "lambda", "degeneracy", "gap"], "energies in units of 1/a")
    for v in p["volumes"]:
        S = parse_volume(v)
        lay = make_layout(S, model, cfg.fermions)
        h = assemble(S, cfg.couplings, model, lay)
        r = ground(h, tol=p["tol"], dense_threshold=cfg.dense_budget)
        t.rows.append([v, r.lambda_grnd, r.degeneracy, r.gap])
    tables["ground.csv"] = t
    ok = True
    if subadditivity:
        s = Table(["outer", "inner", "fermions", "lambda_m", "lambda_n", "lambda_rest", "lhs", "rhs", "slack", "pass"],
                  "energies in units of 1/a")
        for outer, inner, preset in p["subadditivity"]:
            res = subadditivity_check(parse_volume(outer), parse_volume(inner), cfg.couplings, model, preset,
                                      dense_threshold=cfg.dense_budget, budget=cfg.sector_budget)
            ok &= res.passed
            s.rows.append([outer, inner, preset, res.lambda_m, res.lambda_n, res.lambda_rest, res.lhs, res.rhs,
                           res.slack, int(res.passed)])
        tables["subadditivity.csv"] = s
    return ExperimentOutput("ground", tables, ok)


def gauss(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.experiment("gauss")
    model = cfg.model
    rng = np.random.default_rng(cfg.seed)
    t = Table(["volume", "fermions", "check", "value", "tolerance", "pass"], "norms (dimensionless ratios or operator norms); dims as counts")
    ok = True
    presets = p["presets"]
    for v, preset in zip(p["volumes"], presets):
        S = parse_volume(v)
        lay = make_layout(S, model, preset)
        H = assemble(S, cfg.couplings, model, lay).total.matrix
        hn = operator_norm(H)
        observables = {"H": (H, hn)}
        if S.plaquette_list:
            W = wilson_loop(S.plaquette_list[0].links, model, lay).matrix
            observables["wilson_loop"] = (W, operator_norm(W))
        if preset != "none" and S.link_list:
            Q = fermi_bilinear([(S.link_list[0], 1)], model, lay).matrix
            observables["fermi_bilinear"] = (Q, operator_norm(Q))
        worst = dict.fromkeys(observables, 0.0)
        for _ in range(p["trials"]):
            z = random_gauge_element(model, S.site_list, rng)
            U = gauge_unitary(z, lay).matrix
            for name, (M, mn) in observables.items():
                worst[name] = max(worst[name], operator_norm(U @ M - M @ U) / mn)
        checks = [(f"gauge_commutator_rel_{name}", w, 1e-10) for name, w in worst.items()]
        exempt = boundary_exempt_sites(lay) if p["exempt_boundary"] else ()
        P, defect = gauss_projector(lay, model, exempt=exempt)
        Pm = P.matrix
        checks += [
            ("projector_idempotent", operator_norm(Pm @ Pm - Pm), 1e-10),
            ("projector_hermitian", operator_norm(Pm - Pm.conj().T), 1e-10),
            ("projector_commutes_H", operator_norm(Pm @ H - H @ Pm), 1e-10),
        ]
        red, basis = reduce_observable(Operator(H, lay), P)
        checks.append(("reduced_dim", float(basis.shape[1]), float("inf")))
        for name, val, tol in checks:
            good = val <= tol
            ok &= good
            t.rows.append([v, preset, name, val, "" if tol == float("inf") else tol, int(good)])
    return ExperimentOutput("gauss", {"gauss.csv": t}, ok)


RUNNERS: dict[str, Callable[..., ExperimentOutput]] = {
    "lattice-audit": lattice_audit,
    "lr-verify": lr_verify,
    "converge": converge,
    "dyson": dyson,
    "ground": ground_exp,
    "gauss": gauss,
}
