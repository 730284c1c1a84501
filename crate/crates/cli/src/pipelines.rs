//! One function per pipeline. Each reads its knobs from the config, runs the
//! library, and returns results, assertions and in-memory artifacts.

use std::f64::consts::TAU;
use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use fiberlift::lifting::{check_lift_uniqueness, lift_from, lift_measure, stable_leaf_experiment, LiftOptions, Section};
use fiberlift::measures::birkhoff_measure;
use fiberlift::orbit::OrbitStart;
use fiberlift::render::{nesting_defects, render_sequence, RenderGrid};
use fiberlift::rng::stream;
use fiberlift::stats::{clt_diagnostic, correlations, green_kubo, CltOptions};
use fiberlift::systems::{estimate_shrinking, zoo};
use fiberlift::thermo::{build_coboundary, energy_consistency, weighted_transfer, CoboundaryOptions, Observable, Potential};
use fiberlift::transfer::{build_ulam, invariant_density, operator_decay, sample_grid, Construction, SpectralReport, UlamOperator};
use fiberlift::transport::{
    vertical_wasserstein, wasserstein_discrete, FiberBinning, Method, SinkhornOptions, VerticalOptions, FIBER_TOL,
};
use fiberlift::{DecayFit, DecayModel, EmpiricalMeasure, FiberDomain, FiberedSystem, GridMeasure, ModulusClass, Point, Space};
use serde_json::{json, Value};

use crate::config::{PipelineKind, PipelineSpec, RunConfig};
use crate::output::{Artifact, Assertion, Outcome, Table};
use crate::row;

pub struct Ctx {
    pub verbose: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[fiberlift] {}", msg.as_ref());
        }
    }
}

pub fn run(cfg: &RunConfig, ctx: &Ctx) -> Result<Outcome> {
    let sys = zoo::by_name(&cfg.system.name, &cfg.system.params)?;
    ctx.note(format!("system {} ({} fiber dims)", sys.name(), sys.dim_fiber()));
    let p = &cfg.pipeline;
    match p.kind {
        PipelineKind::Lift => lift(&sys, p, ctx),
        PipelineKind::Uniqueness => uniqueness(&sys, p, ctx),
        PipelineKind::StableLeaf => stable_leaf(&sys, p, ctx),
        PipelineKind::Ulam => ulam(&sys, p, ctx),
        PipelineKind::Spectrum => spectrum(&sys, p, ctx),
        PipelineKind::Coboundary => coboundary(&sys, p, ctx),
        PipelineKind::Corr => corr(&sys, p, ctx),
        PipelineKind::Clt => clt(&sys, p, ctx),
        PipelineKind::Attractor => attractor(&sys, p, ctx),
        PipelineKind::Wasserstein => wasserstein(&sys, p, ctx),
    }
}

// ---- registries -------------------------------------------------------------

/// Named observables with their Lipschitz constant in the normalized metric,
/// where known.
fn observable(sys: &FiberedSystem, name: &str) -> Result<(Observable, Option<f64>)> {
    let diam = sys.domain().diameter();
    let needs_fiber = matches!(name, "z1" | "z2" | "norm" | "mixed");
    if needs_fiber && sys.dim_fiber() == 0 {
        bail!("observable `{name}` needs a fiber, but `{}` has none", sys.name());
    }
    if name == "z2" && sys.dim_fiber() < 2 {
        bail!("observable `z2` needs a two-dimensional fiber");
    }
    Ok(match name {
        // not continuous on the circle, so no modulus
        "y" => (Arc::new(|p: &Point| p.y), None),
        "cos" => (Arc::new(|p: &Point| (TAU * p.y).cos()), Some(TAU)),
        "z1" => (Arc::new(|p: &Point| p.z[0]), Some(diam)),
        "z2" => (Arc::new(|p: &Point| p.z[1]), Some(diam)),
        "norm" => (Arc::new(|p: &Point| p.z[0].hypot(p.z[1])), Some(diam)),
        "mixed" => (
            Arc::new(|p: &Point| p.z[0] + 0.5 * (TAU * p.y).cos() + 0.25 * (2.0 * TAU * p.y).cos()),
            Some(diam + TAU),
        ),
        _ => bail!("unknown observable `{name}` (expected y, cos, z1, z2, norm or mixed)"),
    })
}

fn section(sys: &FiberedSystem, name: &str) -> Result<Section> {
    let dom = sys.domain();
    Ok(match (name, dom) {
        ("system", _) => sys.section_fn(),
        (_, FiberDomain::Trivial) => bail!("sections need a fiber, but `{}` has none", sys.name()),
        ("center", d) => {
            let c = d.center();
            Arc::new(move |_| c)
        }
        ("boundary", d) => {
            let b = d.boundary_point();
            Arc::new(move |_| b)
        }
        ("wave", FiberDomain::Interval { lo, hi }) => {
            Arc::new(move |y: f64| [0.5 * (lo + hi) + 0.45 * (hi - lo) * (TAU * y).cos(), 0.0])
        }
        ("wave", FiberDomain::Disk { radius }) => {
            Arc::new(move |y: f64| [0.9 * radius * (TAU * y).cos(), 0.9 * radius * (TAU * y).sin()])
        }
        _ => bail!("unknown section `{name}` (expected system, center, boundary or wave)"),
    })
}

/// Base measure and whether consecutive lifts need marginal rebalancing.
fn base_measure(sys: &FiberedSystem, p: &PipelineSpec, default_atoms: usize) -> Result<(EmpiricalMeasure, bool)> {
    let atoms = p.atoms.unwrap_or(default_atoms);
    match p.base.as_deref().unwrap_or("grid") {
        "orbit" => {
            let seed = p.seed.ok_or_else(|| anyhow!("orbit base needs a seed"))?;
            let mu = birkhoff_measure(sys, OrbitStart::Random { seed }, 1000, atoms)?.project();
            Ok((mu, true))
        }
        _ => {
            // an odd grid is permuted exactly by y ↦ ky; other maps move it
            let exact = sys.base().digit_base().is_some_and(|k| atoms % k as usize != 0);
            Ok((EmpiricalMeasure::base_grid(atoms)?, !exact))
        }
    }
}

fn decay_json(fit: &DecayFit) -> Value {
    let (theta, degree, c) = match fit.model {
        DecayModel::Exponential { theta, c } => (Some(theta), None, Some(c)),
        DecayModel::Polynomial { d, c } => (None, Some(d), Some(c)),
        _ => (fit.theta(), None, None),
    };
    json!({
        "model": fit.label(),
        "theta": theta,
        "degree": degree,
        "c": c,
        "residual": fit.residual,
        "noise_floor": fit.noise_floor,
        "points_used": fit.points_used,
    })
}

fn measure_csv(mu: &EmpiricalMeasure, name: &str) -> Artifact {
    let mut t = Table::new(&["y", "z1", "z2", "weight"]);
    for (p, w) in mu.iter() {
        row!(t; p.y, p.z[0], p.z[1], w);
    }
    t.finish(name)
}

fn grid_csv(g: &GridMeasure, name: &str) -> Artifact {
    let mut t = Table::new(&["cell", "center", "mass"]);
    for (i, m) in g.masses().iter().enumerate() {
        row!(t; i, g.center(i), *m);
    }
    t.finish(name)
}

fn trace_csv(trace: &[(usize, f64)], name: &str) -> Artifact {
    let mut t = Table::new(&["n", "distance"]);
    for &(n, d) in trace {
        row!(t; n, d);
    }
    t.finish(name)
}

// ---- lifting ----------------------------------------------------------------

fn lift_options(p: &PipelineSpec, rebalance: bool) -> LiftOptions {
    LiftOptions {
        tol: p.tol.unwrap_or(1e-3),
        n_max: p.n_max.unwrap_or(100),
        rebalance,
        marginal_tol: if rebalance { 1e-3 } else { 1e-9 },
        ..LiftOptions::default()
    }
}

fn lift(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let (base, rebalance) = base_measure(sys, p, 10_001)?;
    let opts = lift_options(p, rebalance);
    ctx.note(format!("lifting {} atoms, tol {}", base.len(), opts.tol));
    let sec = section(sys, p.section.as_deref().unwrap_or("system"))?;
    let r = lift_from(sys, &base, &*sec, &opts)?;
    let expect = p.expect.as_deref().unwrap_or("converge");
    let assertion = if expect == "converge" {
        Assertion::flag("lift_converged", r.converged && !r.non_shrinking, "consecutive vertical distances fell below tol")
    } else {
        Assertion::flag("flagged_non_shrinking", r.non_shrinking && !r.converged, "lift failed to converge and was flagged")
    };
    Ok(Outcome {
        results: json!({
            "atoms": base.len(),
            "iterations": r.iterations,
            "converged": r.converged,
            "non_shrinking": r.non_shrinking,
            "final_distance": r.cauchy_trace.last().map(|e| e.1),
            "invariance_defect": r.invariance_defect,
            "rebalanced": rebalance,
            "fit": decay_json(&r.fitted_rate),
        }),
        assertions: vec![assertion],
        artifacts: vec![trace_csv(&r.cauchy_trace, "trace.csv"), measure_csv(&r.lifted, "lifted.csv")],
    })
}

fn uniqueness(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let (base, rebalance) = base_measure(sys, p, 10_001)?;
    let names = p.sections.clone().unwrap_or_else(|| vec!["system".into(), "boundary".into()]);
    let sections = names.iter().map(|n| section(sys, n)).collect::<Result<Vec<_>>>()?;
    let opts = lift_options(p, rebalance);
    ctx.note(format!("lifting from {} sections", sections.len()));
    let rep = check_lift_uniqueness(sys, &base, &sections, &opts)?;
    let mut t = Table::new(&["i", "j", "distance"]);
    for &(i, j, d) in &rep.pairwise {
        row!(t; i, j, d);
    }
    Ok(Outcome {
        results: json!({
            "sections": names,
            "iterations": rep.iterations,
            "converged": rep.converged,
            "max_distance": rep.max_distance,
            "threshold": 3.0 * opts.tol,
        }),
        assertions: vec![Assertion::at_most("sections_agree", rep.max_distance, 3.0 * opts.tol)],
        artifacts: vec![t.finish("pairwise.csv")],
    })
}

fn stable_leaf(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let seed = p.seed.expect("validated");
    if sys.dim_fiber() == 0 {
        bail!("stable-leaf needs a fiber, but `{}` has none", sys.name());
    }
    let atoms = p.atoms.unwrap_or(801);
    let base = EmpiricalMeasure::base_grid(atoms)?;
    let opts = LiftOptions { tol: p.tol.unwrap_or(1e-6), n_max: 200, ..LiftOptions::default() };
    let reference = lift_measure(sys, &base, &opts)?;
    let dom = sys.domain();
    let pts: Vec<Point> = base
        .points()
        .iter()
        .enumerate()
        .map(|(i, q)| Point::new(q.y, dom.sample(&mut stream(seed, i as u64, 0))))
        .collect();
    let nu = EmpiricalMeasure::uniform(pts, Space::Total)?;
    let n_max = p.n_max.unwrap_or(10);
    ctx.note(format!("exact transport for {} steps", n_max + 1));
    let rep = stable_leaf_experiment(sys, &nu, &reference, n_max)?;
    let first = rep.distances.first().map_or(0.0, |e| e.1);
    let last = rep.distances.last().map_or(0.0, |e| e.1);
    Ok(Outcome {
        results: json!({ "atoms": atoms, "first": first, "last": last, "fit": decay_json(&rep.fit) }),
        assertions: vec![Assertion::flag("distances_decay", rep.fit.is_decaying() && last < first, "W(Tⁿν, μ) decays")],
        artifacts: vec![trace_csv(&rep.distances, "distances.csv")],
    })
}

// ---- transfer operators -----------------------------------------------------

fn operator(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<(UlamOperator, SpectralReport)> {
    let cells = p.cells.unwrap_or(64);
    let construction = match p.construction.as_deref() {
        Some("monte-carlo") => Construction::MonteCarlo { samples: p.samples.unwrap_or(10_000), seed: p.seed.expect("validated") },
        _ => Construction::ExactBranches,
    };
    ctx.note(format!("Ulam matrix on {cells} cells"));
    let op = build_ulam(&**sys.base(), cells, construction)?;
    let sp = invariant_density(&op, p.tol.unwrap_or(1e-12))?;
    Ok((op, sp))
}

fn spectral_json(op: &UlamOperator, sp: &SpectralReport) -> Value {
    json!({
        "cells": op.n_cells(),
        "nnz": op.matrix().nnz(),
        "stochasticity_defect": op.stochasticity_defect(),
        "leading_eigenvalue": sp.leading_eigenvalue,
        "second_modulus": sp.second_modulus,
        "gap": sp.gap,
        "second_converged": sp.second_converged,
        "no_gap": sp.no_gap,
        "power_iterations": sp.power_iterations,
    })
}

fn ulam(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let (op, sp) = operator(sys, p, ctx)?;
    let mut t = Table::new(&["i", "j", "value"]);
    for (i, j, v) in op.matrix().triplets() {
        row!(t; i, j, v);
    }
    Ok(Outcome {
        results: spectral_json(&op, &sp),
        assertions: vec![Assertion::at_most("leading_eigenvalue_is_one", (sp.leading_eigenvalue - 1.0).abs(), 1e-6)],
        artifacts: vec![t.finish("operator.csv")],
    })
}

fn spectrum(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let (op, sp) = operator(sys, p, ctx)?;
    let (f, _) = observable(sys, p.observable.as_deref().unwrap_or("y"))?;
    let samples = sample_grid(op.n_cells(), |y| f(&Point::base(y)));
    let dec = operator_decay(&op, &sp, &samples, p.n_max.unwrap_or(20))?;
    let mut results = spectral_json(&op, &sp);
    results["decay"] = json!({ "removed_mean": dec.removed_mean, "fit": decay_json(&dec.fit) });
    let mut assertions = vec![Assertion::at_most("leading_eigenvalue_is_one", (sp.leading_eigenvalue - 1.0).abs(), 1e-6)];
    if let Some(e) = p.expect_second {
        assertions.push(Assertion::at_most("second_modulus", (sp.second_modulus - e).abs(), p.second_tol.unwrap_or(0.05)));
    }
    let mut t = Table::new(&["n", "sup_norm", "lipschitz_ratio"]);
    for (&(n, v), r) in dec.norms.iter().zip(&dec.lipschitz_ratios) {
        row!(t; n, v, *r);
    }
    Ok(Outcome { results, assertions, artifacts: vec![grid_csv(&sp.invariant_density, "density.csv"), t.finish("decay.csv")] })
}

// ---- thermodynamic projection -----------------------------------------------

fn coboundary(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let seed = p.seed.expect("validated");
    let name = p.observable.as_deref().unwrap_or("norm");
    let (f, default_h) = observable(sys, name)?;
    let h = p.hol_constant.or(default_h).ok_or_else(|| anyhow!("observable `{name}` needs an explicit hol_constant"))?;
    let phi = Potential::declared(sys, move |x| f(x), ModulusClass::lipschitz(), h, seed)?;
    let shrink = estimate_shrinking(sys, 30, 16, 8, seed)?;
    let opts = CoboundaryOptions { target_osc: p.target_osc.unwrap_or(1e-3), seed, ..CoboundaryOptions::default() };
    ctx.note("choosing the truncation and measuring fiber oscillation");
    let cob = build_coboundary(sys, &phi, &shrink, &opts)?;
    let cells = p.cells.unwrap_or(256);
    let grid = cob.phi_check_grid(cells);

    let mut assertions = vec![
        Assertion::at_most("declared_constant_violations", phi.violations as f64, 0.0),
        Assertion::at_most("fiber_oscillation", cob.fiber_oscillation, 1.1 * cob.truncation_bound),
    ];
    let mut results = json!({
        "observable": name,
        "hol_constant": h,
        "violations": phi.violations,
        "shrink_fit": decay_json(&shrink.fit),
        "n": cob.n,
        "truncation_bound": cob.truncation_bound,
        "fiber_oscillation": cob.fiber_oscillation,
        "target_osc": opts.target_osc,
    });

    let atoms = p.atoms.unwrap_or(100_001);
    let (base, rebalance) = base_measure(sys, &PipelineSpec { atoms: Some(atoms), base: None, ..p.clone() }, atoms)?;
    ctx.note(format!("energy check on {atoms} atoms"));
    let lifted = lift_measure(sys, &base, &lift_options(&PipelineSpec { tol: None, n_max: None, ..p.clone() }, rebalance))?;
    let e = energy_consistency(sys, &cob, &lifted.lifted, &base)?;
    results["energy"] = json!({
        "mu_phi": e.mu_phi,
        "mu_phi_hat": e.mu_phi_hat,
        "base_phi_check": e.base_phi_check,
        "coboundary_term": e.coboundary_term,
        "cancellation_bound": e.cancellation_bound,
        "total_gap": e.total_gap,
    });
    assertions.push(Assertion::at_most("energy_gap", e.total_gap, p.energy_tol.unwrap_or(1e-3)));

    let mut artifacts = Vec::new();
    let mut t = Table::new(&["cell", "center", "phi_check"]);
    for (i, v) in grid.iter().enumerate() {
        row!(t; i, (i as f64 + 0.5) / cells as f64, *v);
    }
    artifacts.push(t.finish("phi_check.csv"));
    let mut t = Table::new(&["n", "a_n"]);
    for (n, a) in shrink.a.iter().enumerate() {
        row!(t; n, *a);
    }
    artifacts.push(t.finish("shrink.csv"));

    if sys.base().branches().is_some() {
        let pc = |y: f64| cob.phi_check(y);
        let wt = weighted_transfer(&**sys.base(), &pc, cells)?;
        results["pressure"] = json!(wt.pressure);
        results["normalization_defect"] = json!(wt.normalization_defect());
        artifacts.push(grid_csv(&wt.equilibrium, "equilibrium.csv"));
    }
    Ok(Outcome { results, assertions, artifacts })
}

// ---- statistics -------------------------------------------------------------

fn corr(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let seed = p.seed.expect("validated");
    let fname = p.observable.as_deref().unwrap_or("y");
    let gname = p.observable_g.as_deref().unwrap_or(fname);
    let (f, _) = observable(sys, fname)?;
    let (g, _) = observable(sys, gname)?;
    let orbit_len = p.orbit_len.unwrap_or(1_000_000);
    ctx.note(format!("orbit of length {orbit_len}"));
    let tr = correlations(sys, &*f, &*g, p.n_max.unwrap_or(20), orbit_len, seed)?;
    let gk = green_kubo(&tr);
    let mut t = Table::new(&["n", "covariance", "std_error", "corr"]);
    for (n, (&c, &se)) in tr.covariances.iter().zip(&tr.std_errors).enumerate() {
        row!(t; n, c, se, c.abs());
    }
    let mut assertions = Vec::new();
    if let Some(e) = p.expect_sigma2 {
        assertions.push(Assertion::at_most("green_kubo_sigma2", (gk.sigma2 - e).abs(), p.sigma2_tol.unwrap_or(0.01)));
    }
    Ok(Outcome {
        results: json!({
            "observable": fname,
            "observable_g": gname,
            "orbit_len": orbit_len,
            "mean_f": tr.mean_f,
            "mean_g": tr.mean_g,
            "fit": decay_json(&tr.fit),
            "green_kubo": { "sigma2": gk.sigma2, "sigma": gk.sigma, "terms": gk.terms, "noise_floor": gk.noise_floor },
        }),
        assertions,
        artifacts: vec![t.finish("corr.csv")],
    })
}

fn clt(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let seed = p.seed.expect("validated");
    let name = p.observable.as_deref().unwrap_or("y");
    let (f, _) = observable(sys, name)?;
    let atoms = p.atoms.unwrap_or(10_001);
    let (base, rebalance) = base_measure(sys, &PipelineSpec { base: None, ..p.clone() }, atoms)?;
    let mu = if sys.dim_fiber() == 0 {
        base
    } else {
        ctx.note("lifting the start measure");
        lift_measure(sys, &base, &lift_options(&PipelineSpec { tol: None, n_max: None, ..p.clone() }, rebalance))?.lifted
    };
    let opts = CltOptions {
        n_block: p.n_block.unwrap_or(10_000),
        samples: p.blocks.unwrap_or(1000),
        seed,
        gk_orbit: p.orbit_len.unwrap_or(1_000_000),
        ..CltOptions::default()
    };
    ctx.note(format!("{} block sums of length {}", opts.samples, opts.n_block));
    let rep = clt_diagnostic(sys, &mu, &*f, &opts)?;
    let ks_max = p.ks_max.unwrap_or(0.05);
    let mut t = Table::new(&["sample", "block_sum"]);
    for (i, v) in rep.block_sums.iter().enumerate() {
        row!(t; i, *v);
    }
    Ok(Outcome {
        results: json!({
            "observable": name,
            "n_block": rep.n_block,
            "samples": rep.samples,
            "ks_statistic": rep.ks_statistic,
            "fitted_mean": rep.fitted_mean,
            "fitted_sigma": rep.fitted_sigma,
            "green_kubo_sigma": rep.green_kubo_sigma,
            "degenerate": rep.degenerate,
        }),
        assertions: vec![
            Assertion::flag("non_degenerate", !rep.degenerate, "Green-Kubo variance is positive"),
            Assertion::at_most("ks_statistic", rep.ks_statistic, ks_max),
        ],
        artifacts: vec![t.finish("block_sums.csv")],
    })
}

// ---- rasters ----------------------------------------------------------------

fn attractor(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    let n_iter = p.n_iter.unwrap_or(8);
    let size = p.size.unwrap_or(512);
    let grid = RenderGrid { base: p.grid_base.unwrap_or(65_537), fiber: p.grid_fiber.unwrap_or(8) };
    ctx.note(format!("rendering {} images of {size}×{size}", n_iter + 1));
    let rasters = render_sequence(sys, n_iter, grid, size)?;
    let defects = nesting_defects(&rasters);
    let mut t = Table::new(&["n", "lit", "outside_annulus", "nesting_defect"]);
    let mut artifacts = Vec::new();
    for (n, r) in rasters.iter().enumerate() {
        let d = if n == 0 { 0 } else { defects[n - 1] };
        row!(t; n, r.count(), r.outside_annulus(), d);
        artifacts.push(Artifact { name: format!("attractor_{n:02}.ppm"), bytes: r.to_ppm() });
        #[cfg(feature = "png")]
        artifacts.push(Artifact { name: format!("attractor_{n:02}.png"), bytes: encode_png(r)? });
    }
    artifacts.push(t.finish("nesting.csv"));
    let outside: usize = rasters.iter().map(|r| r.outside_annulus()).sum();
    let total_defects: usize = defects.iter().sum();
    let last = rasters.last().map_or(0, |r| r.count());
    Ok(Outcome {
        results: json!({ "n_iter": n_iter, "size": size, "nesting_defects": defects, "lit": rasters.iter().map(|r| r.count()).collect::<Vec<_>>() }),
        assertions: vec![
            Assertion::at_most("nesting_defects", total_defects as f64, 0.0),
            Assertion::at_most("outside_annulus", outside as f64, 0.0),
            Assertion::at_least("final_image_lit", last as f64, 1.0),
        ],
        artifacts,
    })
}

#[cfg(feature = "png")]
fn encode_png(r: &fiberlift::render::Raster) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, r.width() as u32, r.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(&r.to_gray())?;
    }
    Ok(out)
}

// ---- transport --------------------------------------------------------------

fn wasserstein(sys: &FiberedSystem, p: &PipelineSpec, ctx: &Ctx) -> Result<Outcome> {
    use fiberlift::rng::Rng;
    let seed = p.seed.expect("validated");
    let dom = sys.domain();
    if sys.dim_fiber() == 0 {
        bail!("the vertical distance needs a fiber, but `{}` has none", sys.name());
    }
    let atoms = p.atoms.unwrap_or(40);
    if atoms > 2000 {
        bail!("config: `atoms` = {atoms} exceeds 2000 for exact transport");
    }
    let pairs = p.pairs.unwrap_or(10);
    let metric = sys.metric();
    let sk = SinkhornOptions { epsilon: p.epsilon.unwrap_or(1e-2), ..SinkhornOptions::default() };
    let vopts = VerticalOptions { binning: FiberBinning::Atoms { tol: FIBER_TOL }, ..VerticalOptions::default() };
    ctx.note(format!("{pairs} pairs of {atoms}-atom measures"));
    let mut t = Table::new(&["pair", "exact", "vertical", "sinkhorn"]);
    let mut worst_dominance = f64::NEG_INFINITY;
    let mut worst_sinkhorn = f64::INFINITY;
    let mut coupling = None;
    for k in 0..pairs {
        let mut r = stream(seed, k as u64, 0);
        let ys: Vec<f64> = (0..atoms).map(|_| r.gen::<f64>()).collect();
        let w: Vec<f64> = (0..atoms).map(|_| r.gen::<f64>() + 0.1).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let mu_pts: Vec<Point> = ys.iter().map(|&y| Point::new(y, dom.sample(&mut r))).collect();
        let nu_pts: Vec<Point> = ys.iter().map(|&y| Point::new(y, dom.sample(&mut r))).collect();
        let mu = EmpiricalMeasure::new(mu_pts, w.clone(), Space::Total)?;
        let nu = EmpiricalMeasure::new(nu_pts, w, Space::Total)?;
        let (exact, plan, _) = wasserstein_discrete(&mu, &nu, &metric, Method::Exact)?;
        let vertical = vertical_wasserstein(&mu, &nu, &metric, &vopts)?.distance;
        let (entropic, _, _) = wasserstein_discrete(&mu, &nu, &metric, Method::Sinkhorn(sk))?;
        worst_dominance = worst_dominance.max(exact - vertical);
        worst_sinkhorn = worst_sinkhorn.min(entropic - exact);
        row!(t; k, exact, vertical, entropic);
        if coupling.is_none() {
            coupling = Some(plan);
        }
    }
    let mut c = Table::new(&["i", "j", "mass"]);
    for &(i, j, m) in &coupling.expect("at least one pair").plan {
        row!(c; i, j, m);
    }
    Ok(Outcome {
        results: json!({ "pairs": pairs, "atoms": atoms, "max_exact_minus_vertical": worst_dominance, "min_sinkhorn_minus_exact": worst_sinkhorn }),
        assertions: vec![
            Assertion::at_most("vertical_dominates", worst_dominance, 1e-9),
            Assertion::at_least("sinkhorn_upper_bound", worst_sinkhorn, -1e-9),
        ],
        artifacts: vec![t.finish("distances.csv"), c.finish("coupling_0.csv")],
    })
}
