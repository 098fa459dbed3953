use std::sync::Arc;

use novlab_core::bifurcation::{apply_self_slide, loop_consistency};
use novlab_core::complex::NovikovComplex;
use novlab_core::groupoid::GroupoidGraph;
use novlab_core::holonomy::{
    compute_invariants, count_incidence, detect_homoclinic, passage_discs, pole_from_latitude, simulation_groupoid,
    sweep_doubling, v1_dot, velocity_balance, DoublingDisc, HolonomyFamily, IncidenceProbe, PassageOptions,
    SweepOptions,
};
use novlab_core::numerics::linspace;
use novlab_core::{make_elementary_family, SelfSlideInvariants, SlideScript, TruncationContext};
use serde_json::json;

use crate::error::CliError;
use crate::expr;
use crate::report::{fmt_f, fmt_vec, Report, Table};
use crate::scenario::{Scenario, SimDoc};

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub length: Option<f64>,
    pub tol: f64,
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ComplexCmd {
    Check,
    Apply,
    Audit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SimCmd {
    Invariants,
    Passages,
    Incidence,
    Doubling,
}

fn graph(sc: &Scenario) -> Result<Arc<GroupoidGraph>, CliError> {
    GroupoidGraph::from_doc(sc.groupoid()?.clone()).map_err(|e| CliError::Input(format!("groupoid: {e}")))
}

fn context(graph: Arc<GroupoidGraph>, length: Option<f64>) -> Result<TruncationContext, CliError> {
    let l = length.ok_or_else(|| CliError::Input("no truncation length: set `L` or pass --L".into()))?;
    Ok(TruncationContext::new(graph, l)?)
}

pub fn ring(src: &str, sc: &Scenario, st: &Settings) -> Result<Report, CliError> {
    let ctx = context(graph(sc)?, st.length)?;
    let e = expr::evaluate(src, &ctx).map_err(|e| CliError::Input(format!("expression: {e}")))?;
    let rendered = e.render();
    let mut table = Table::new(&["arrow", "u", "coeff"]);
    for (arrow, u, c) in e.sorted_terms() {
        table.push(vec![arrow, fmt_f(u), c.to_string()]);
    }
    Ok(Report {
        json: json!({ "expression": src, "rendered": rendered, "element": e.to_doc() }),
        text: vec![rendered],
        table,
        passed: true,
    })
}

fn load_complex(sc: &Scenario, ctx: &TruncationContext) -> Result<NovikovComplex, CliError> {
    let doc = sc.complex.as_ref().ok_or_else(|| CliError::Input("scenario has no `complex`".into()))?;
    NovikovComplex::from_doc(doc, ctx).map_err(|e| CliError::Input(format!("complex: {e}")))
}

fn load_script(sc: &Scenario, graph: &GroupoidGraph) -> Result<SlideScript, CliError> {
    let doc = sc.script.as_ref().ok_or_else(|| CliError::Input("scenario has no `script`".into()))?;
    SlideScript::from_doc(doc, graph).map_err(|e| CliError::Input(format!("script: {e}")))
}

fn incidence_table(c: &NovikovComplex) -> (Table, Vec<String>) {
    let graph = c.context().graph();
    let mut table = Table::new(&["p", "q", "element"]);
    let mut text = Vec::new();
    for ((p, q), v) in c.incidences() {
        let (p, q) = (graph.object_name(*p), graph.object_name(*q));
        text.push(format!("<{p},{q}> = {v}"));
        table.push(vec![p.to_string(), q.to_string(), v.render()]);
    }
    (table, text)
}

pub fn complex(cmd: ComplexCmd, sc: &Scenario, st: &Settings) -> Result<Report, CliError> {
    let g = graph(sc)?;
    let length = st.length.or(sc.length).or(sc.complex.as_ref().map(|c| c.context.length));
    let ctx = context(g.clone(), length)?;
    match cmd {
        ComplexCmd::Check => {
            let c = load_complex(sc, &ctx)?;
            let r = c.check_d_squared();
            let mut table = Table::new(&["passed", "pairs_checked", "p", "r", "residue"]);
            let (text, violation) = match &r.violation {
                None => {
                    table.push(vec!["true".into(), r.pairs_checked.to_string(), String::new(), String::new(), String::new()]);
                    (format!("d^2 = 0: pass ({} pairs checked)", r.pairs_checked), serde_json::Value::Null)
                }
                Some(v) => {
                    let (p, q) = (g.object_name(v.p), g.object_name(v.r));
                    let res = v.residue.render();
                    table.push(vec!["false".into(), r.pairs_checked.to_string(), p.into(), q.into(), res.clone()]);
                    (
                        format!("d^2 = 0: fail at <{p},{q}>, residue {res}"),
                        json!({ "p": p, "r": q, "residue": v.residue.to_doc() }),
                    )
                }
            };
            Ok(Report {
                json: json!({ "passed": r.passed(), "pairs_checked": r.pairs_checked, "violation": violation }),
                text: vec![text],
                table,
                passed: r.passed(),
            })
        }
        ComplexCmd::Apply => {
            let mut c = load_complex(sc, &ctx)?;
            let script = load_script(sc, &g)?;
            for (k, e) in script.events.iter().enumerate() {
                c = apply_self_slide(&c, e).map_err(|err| CliError::Input(format!("script.events[{k}]: {err}")))?;
            }
            let preserved = c.check_d_squared().passed();
            let (table, mut text) = incidence_table(&c);
            if !preserved {
                text.push("d^2 = 0 fails after the slides".into());
            }
            Ok(Report {
                json: json!({ "complex": c.to_doc(), "d_squared_preserved": preserved }),
                text,
                table,
                passed: preserved,
            })
        }
        ComplexCmd::Audit => {
            let script = load_script(sc, &g)?;
            let a = loop_consistency(&script, &ctx)?;
            let residual = a.residual.render();
            let verdict = if a.consistent { "pass" } else { "fail" };
            let mut table = Table::new(&["passed", "residual"]);
            table.push(vec![a.consistent.to_string(), residual.clone()]);
            Ok(Report {
                json: json!({ "passed": a.consistent, "residual": residual, "element": a.residual.to_doc() }),
                text: vec![format!("loop audit: {verdict}"), format!("residual: {residual}")],
                table,
                passed: a.consistent,
            })
        }
    }
}

fn family(sim: &SimDoc) -> Result<(HolonomyFamily, SelfSlideInvariants), CliError> {
    sim.model.validate().map_err(|e| CliError::Input(format!("sim: {e}")))?;
    let f = make_elementary_family(&sim.model, &sim.params).map_err(|e| CliError::Input(format!("sim: {e}")))?;
    let inv = compute_invariants(&f).map_err(|e| CliError::Input(format!("sim: {e}")))?;
    Ok((f, inv))
}

fn label_line(inv: &SelfSlideInvariants) -> String {
    format!("label: {}{}", inv.label, if inv.marginal { " (marginal)" } else { "" })
}

fn s_values(sim: &SimDoc, st: &Settings, what: &str) -> Result<Vec<f64>, CliError> {
    let [lo, hi] = sim.s_range.ok_or_else(|| CliError::Input(format!("sim.s_range: required for sim {what}")))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::Input("sim.s_range: expected [lo, hi] with lo <= hi".into()));
    }
    let n = st.grid.or(sim.grid.map(|g| g.s())).unwrap_or(2);
    Ok(linspace(lo, hi, n).into_iter().filter(|s| *s != 0.0).collect())
}

fn symmetric(range: Option<[f64; 2]>, field: &str) -> Result<f64, CliError> {
    let [lo, hi] = range.ok_or_else(|| CliError::Input(format!("sim.{field}: required for sim doubling")))?;
    if !(hi > 0.0 && lo == -hi) {
        return Err(CliError::Input(format!("sim.{field}: the sweep needs a symmetric range [-a, a]")));
    }
    Ok(hi)
}

pub fn sim(cmd: SimCmd, sc: &Scenario, st: &Settings) -> Result<Report, CliError> {
    let sim = sc.sim()?;
    let (f, inv) = family(sim)?;
    let opts = PassageOptions { tol: st.tol, ..PassageOptions::default() };
    let k_max = sim.k_max.unwrap_or(4);
    match cmd {
        SimCmd::Invariants => {
            let v1 = v1_dot(&f);
            let (d_up, d_down) = velocity_balance(&f)?;
            let rep = inv.report();
            let mut text = vec![
                label_line(&inv),
                format!("omega_phi: {}", fmt_f(inv.omega_phi)),
                format!("omega_psi: {}", fmt_f(inv.omega_psi)),
                format!("eta: {}", fmt_f(inv.eta)),
                format!("chi: {}", fmt_f(inv.chi)),
            ];
            match &v1 {
                Ok(v) => text.push(format!("v1_dot: {}", fmt_f(*v))),
                Err(e) => text.push(format!("v1_dot: undefined ({e})")),
            }
            text.push(format!("velocity_balance: {} + {} = {}", fmt_f(d_up), fmt_f(d_down), fmt_f(d_up + d_down)));
            let mut table =
                Table::new(&["label", "marginal", "omega_phi", "omega_psi", "eta", "chi", "v1_dot", "balance"]);
            table.push(vec![
                inv.label.to_string(),
                inv.marginal.to_string(),
                fmt_f(inv.omega_phi),
                fmt_f(inv.omega_psi),
                fmt_f(inv.eta),
                fmt_f(inv.chi),
                v1.as_ref().map(|v| fmt_f(*v)).unwrap_or_default(),
                fmt_f(d_up + d_down),
            ]);
            Ok(Report {
                json: json!({
                    "invariants": rep,
                    "v1_dot": v1.as_ref().ok(),
                    "v1_dot_error": v1.as_ref().err().map(|e| e.to_string()),
                    "velocity_balance": [d_up, d_down],
                }),
                text,
                table,
                passed: true,
            })
        }
        SimCmd::Passages => {
            let mut runs = Vec::new();
            let mut text = vec![label_line(&inv)];
            let mut table = Table::new(&["s", "k", "param", "minus", "plus", "orientation"]);
            for s in s_values(sim, st, "passages")? {
                let clouds = passage_discs(&f, s, k_max, opts)?;
                let mut records = Vec::new();
                for c in &clouds {
                    let orient = c.orientation().map_or("none".to_string(), |o| format!("{o:+}"));
                    text.push(format!(
                        "s={} C_{}: {} points, orientation {}{}",
                        fmt_f(s),
                        c.k,
                        c.points.len(),
                        orient,
                        if c.folded { ", folded" } else { "" }
                    ));
                    for p in &c.points {
                        table.push(vec![
                            fmt_f(s),
                            c.k.to_string(),
                            fmt_vec(&p.param),
                            fmt_vec(&p.minus),
                            fmt_vec(&p.plus),
                            p.orientation.to_string(),
                        ]);
                    }
                    if !c.is_empty() {
                        for r in detect_homoclinic(&f, s, c.k, opts)? {
                            text.push(format!(
                                "s={} g^{} orbit through C_{} at {} (sign {:+})",
                                fmt_f(s),
                                r.power,
                                r.k,
                                fmt_vec(&r.xi),
                                r.orientation
                            ));
                            records.push(r);
                        }
                    }
                }
                runs.push(json!({ "s": s, "clouds": clouds, "homoclinic": records }));
            }
            Ok(Report {
                json: json!({ "label": inv.label, "marginal": inv.marginal, "runs": runs }),
                text,
                table,
                passed: true,
            })
        }
        SimCmd::Incidence => {
            let probe = sim.probe.as_ref().ok_or_else(|| CliError::Input("sim.probe: required for sim incidence".into()))?;
            let b = match (&probe.b, probe.latitude) {
                (Some(b), None) => b.clone(),
                (None, Some(w)) => pole_from_latitude(inv.delta_phi.normal(), w)
                    .map_err(|e| CliError::Input(format!("sim.probe.latitude: {e}")))?
                    .iter()
                    .copied()
                    .collect(),
                _ => return Err(CliError::Input("sim.probe: give exactly one of `b` and `latitude`".into())),
            };
            let length = st.length.or(sim.length).or(sc.length);
            let (ctx, g, gamma) = match &sc.groupoid {
                Some(_) => {
                    let graph = graph(sc)?;
                    let name = |n: &Option<String>, field: &str, default: &str| -> Result<_, CliError> {
                        let n = n.as_deref().unwrap_or(default);
                        graph.parse_arrow(n).map_err(|e| CliError::Input(format!("sim.{field}: {e}")))
                    };
                    let g = name(&sim.g, "g", "g")?;
                    let gamma = name(&sim.gamma, "gamma", "gamma")?;
                    (context(graph, length)?, g, gamma)
                }
                None => {
                    let (graph, g, gamma) = simulation_groupoid(sim.model.i);
                    (context(graph, length)?, g, gamma)
                }
            };
            let probe = IncidenceProbe { b, radius: probe.radius };
            let mut rows = Vec::new();
            let mut text = vec![label_line(&inv)];
            let mut table = Table::new(&["s", "count", "crossings"]);
            for s in s_values(sim, st, "incidence")? {
                let c = count_incidence(&f, s, &probe, &ctx, &g, &gamma)?;
                let rendered = c.element.render();
                let crossings: Vec<String> = c.crossings.iter().map(|x| format!("{}:{:+}", x.k, x.orientation)).collect();
                text.push(format!("s={}: {rendered}", fmt_f(s)));
                table.push(vec![fmt_f(s), rendered.clone(), crossings.join(";")]);
                rows.push(json!({ "s": s, "count": rendered, "element": c.element.to_doc(), "crossings": c.crossings }));
            }
            Ok(Report {
                json: json!({ "label": inv.label, "marginal": inv.marginal, "probe": probe, "rows": rows }),
                text,
                table,
                passed: true,
            })
        }
        SimCmd::Doubling => {
            let s_max = symmetric(sim.s_range, "s_range")?;
            let t_max = symmetric(sim.t_range, "t_range")?;
            let grid = match (st.grid, sim.grid) {
                (Some(n), _) => n,
                (None, Some(g)) if g.s() == g.t() => g.s(),
                (None, Some(_)) => return Err(CliError::Input("sim.grid: the sweep needs a square grid".into())),
                (None, None) => SweepOptions::default().grid,
            };
            let disc = DoublingDisc::new(&sim.model, &sim.params)?;
            let opts = SweepOptions { s_max, t_max, grid, k_max: sim.k_max.unwrap_or(2), tol: st.tol, threads: None };
            let r = sweep_doubling(&disc, opts)?;
            let label_at = |j: usize| r.t_labels[j].map_or("none".to_string(), |l| l.to_string());
            let mut table = Table::new(&["s_lo", "s_hi", "t_lo", "t_hi", "label_lo", "label_hi", "classes"]);
            for (n, c) in r.cells.iter().enumerate() {
                let j = n / (grid - 1);
                let classes: Vec<String> = c.classes.iter().map(|m| if *m == 1 { "g".into() } else { format!("g^{m}") }).collect();
                table.push(vec![
                    fmt_f(c.s_lo),
                    fmt_f(c.s_hi),
                    fmt_f(c.t_lo),
                    fmt_f(c.t_hi),
                    label_at(j),
                    label_at(j + 1),
                    classes.join(";"),
                ]);
            }
            let counts: Vec<usize> = (1..=opts.k_max + 1).map(|m| r.flagged(m).count()).collect();
            let side = serde_json::to_value(r.g2_side).expect("serializes");
            let side = side.as_str().unwrap_or("absent").to_string();
            let mut text = vec![format!("base: {}", r.base_label), format!("g^2 locus: {side} half-line")];
            for (m, n) in counts.iter().enumerate() {
                text.push(format!("cells meeting the g^{} locus: {n}", m + 1));
            }
            text.push(format!("transverse g^2 crossings: {}", r.crossings.len()));
            let flagged: Vec<_> = r.cells.iter().filter(|c| !c.classes.is_empty()).collect();
            Ok(Report {
                json: json!({
                    "base_label": r.base_label,
                    "g2_side": r.g2_side,
                    "flagged_counts": counts,
                    "flagged_cells": flagged,
                    "t_values": r.t_values,
                    "t_labels": r.t_labels,
                    "crossings": r.crossings,
                }),
                text,
                table,
                passed: true,
            })
        }
    }
}
