//! One runner per experiment kind. Each writes its artifacts and returns
//! whether every assertion it carries held, plus summary lines for stdout.

use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context, Result};
use hjb_core::deterministic::{lax_oleinik_quadratic_closed, lax_oleinik_solve};
use hjb_core::galerkin::converge;
use hjb_core::initial::InitialCondition;
use hjb_core::quadratic::{blowup_time, riccati_ode_crosscheck, QuadraticSolution};
use hjb_core::spectral::summability_report;
use hjb_core::storage::{
    martingale_diagnostic, simulate_paths, verify_value_mc, circle_value_field, MarketConfig,
};
use hjb_core::verify::{
    comparison_gap, comparison_times, default_tolerance, run_suite, shift_defect, transformed_residual, LatticeConfig, SampleSet,
    SuiteInput,
};
use hjb_core::viscous::{read_grid, solve_fd, write_grid, GridField, SeparableOracle, SolutionField};
use hjb_core::{EigenSpectrum, TruncatedPoint};
use serde::Serialize;

use crate::config::{self, FieldSource, PointSet};
use crate::output::{num, point_hash, OutputDir};

pub struct Outcome {
    pub pass: bool,
    pub summary: Vec<String>,
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// The exact field for data that has one, truncated to `dim` modes when given.
pub fn exact_field(initial: &InitialCondition, spectrum: &EigenSpectrum, dim: Option<usize>) -> Result<SolutionField> {
    Ok(match initial {
        InitialCondition::DiagonalQuadratic(q) => {
            let sol = QuadraticSolution::new(spectrum.clone(), q.clone());
            SolutionField::ClosedFormQuadratic(match dim {
                Some(d) => sol.with_level(d - 1),
                None => sol,
            })
        }
        InitialCondition::Separable(s) => SolutionField::SeparableOracle(SeparableOracle::new(s.clone(), spectrum.clone())?),
        InitialCondition::GenericConvex(_) => bail!("generic data has no exact field"),
    })
}

pub fn spectrum_check(cfg: &config::SpectrumCheck, out: &mut OutputDir) -> Result<Outcome> {
    let spectrum = EigenSpectrum::new(cfg.spectrum.clone())?;
    let report = summability_report(&spectrum, cfg.n_terms)?;
    let values = spectrum.eigenvalues(cfg.eigenvalues);
    out.csv(
        "eigenvalues.csv",
        &["index", "lambda"],
        values.iter().enumerate().map(|(i, l)| [i.to_string(), num(*l)]),
    )?;
    #[derive(Serialize)]
    struct Doc<'a> {
        spectrum: String,
        summability: &'a hjb_core::spectral::SummabilityReport,
        eigenvalues: &'a [f64],
    }
    out.json(
        "spectrum.json",
        &Doc {
            spectrum: spectrum.to_string(),
            summability: &report,
            eigenvalues: &values,
        },
    )?;
    Ok(Outcome {
        pass: report.converges,
        summary: vec![format!(
            "{spectrum}: partial sum {:.6} over {} terms, tail <= {:.3e} [{}]",
            report.partial_sum,
            report.n_terms,
            report.tail_bound,
            verdict(report.converges)
        )],
    })
}

#[derive(Serialize)]
struct RiccatiRow {
    lambda: f64,
    mu0: f64,
    t: f64,
    blowup_time: Option<f64>,
    closed_form: Option<f64>,
    integrated: Option<f64>,
    abs_error: Option<f64>,
    status: &'static str,
}

pub fn riccati(cfg: &config::Riccati, out: &mut OutputDir) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &lambda in &cfg.lambdas {
        for &mu0 in &cfg.mu0 {
            for &t in &cfg.times {
                let t_star = blowup_time(mu0, lambda);
                let row = match t_star {
                    Some(ts) if t >= ts => RiccatiRow {
                        lambda,
                        mu0,
                        t,
                        blowup_time: t_star,
                        closed_form: None,
                        integrated: None,
                        abs_error: None,
                        status: "blow_up",
                    },
                    _ => {
                        let c = riccati_ode_crosscheck(mu0, lambda, t, cfg.ode_steps)?;
                        RiccatiRow {
                            lambda,
                            mu0,
                            t,
                            blowup_time: t_star,
                            closed_form: Some(c.closed_form),
                            integrated: Some(c.integrated),
                            abs_error: Some(c.abs_error),
                            status: if c.abs_error <= cfg.tol { "ok" } else { "mismatch" },
                        }
                    }
                };
                rows.push(row);
            }
        }
    }
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    out.csv(
        "riccati.csv",
        &["lambda", "mu0", "t", "blowup_time", "closed_form", "integrated", "abs_error", "status"],
        rows.iter().map(|r| {
            [
                num(r.lambda),
                num(r.mu0),
                num(r.t),
                opt(r.blowup_time),
                opt(r.closed_form),
                opt(r.integrated),
                opt(r.abs_error),
                r.status.to_string(),
            ]
        }),
    )?;
    out.json("riccati.json", &rows)?;
    let worst = rows.iter().filter_map(|r| r.abs_error).fold(0.0, f64::max);
    let blowups = rows.iter().filter(|r| r.status == "blow_up").count();
    let pass = rows.iter().all(|r| r.status != "mismatch");
    let mut summary = vec![format!(
        "{} cases, worst |closed - RK4| = {worst:.3e} (tol {:.1e}), {blowups} past blow-up [{}]",
        rows.len(),
        cfg.tol,
        verdict(pass)
    )];
    let mut seen = Vec::new();
    for r in &rows {
        if let Some(ts) = r.blowup_time {
            if !seen.contains(&(r.lambda.to_bits(), r.mu0.to_bits())) {
                seen.push((r.lambda.to_bits(), r.mu0.to_bits()));
                summary.push(format!("lambda={} mu0={}: blow-up at t* = {}", r.lambda, r.mu0, ts));
            }
        }
    }
    Ok(Outcome { pass, summary })
}

fn points(set: &PointSet, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(match set {
        PointSet::List { points } => points.clone(),
        PointSet::Lattice { dim, count, half_width } => SampleSet::lattice(&LatticeConfig {
            dim: *dim,
            count: *count,
            half_width: *half_width,
            seed,
            ..Default::default()
        })?
        .points
        .into_iter()
        .map(|s| s.x)
        .collect(),
    })
}

#[derive(Serialize)]
struct LaxRecord {
    x: Vec<f64>,
    x_hash: String,
    result: hjb_core::deterministic::LaxOleinikResult,
    closed_value: Option<f64>,
    value_gap: Option<f64>,
    minimizer_gap: Option<f64>,
}

pub fn lax_oleinik(cfg: &config::LaxOleinik, seed: u64, out: &mut OutputDir) -> Result<Outcome> {
    let spectrum = EigenSpectrum::new(cfg.spectrum.clone())?;
    let xs = points(&cfg.points, seed)?;
    let records = xs
        .into_iter()
        .map(|x| {
            let p = TruncatedPoint::new(x.clone())?;
            let result = lax_oleinik_solve(&cfg.initial, &spectrum, cfg.t, &p, &cfg.solver)?;
            let (closed_value, value_gap, minimizer_gap) = match &cfg.initial {
                InitialCondition::DiagonalQuadratic(q) => {
                    let (y, v) = lax_oleinik_quadratic_closed(q, &spectrum, cfg.t, &p)?;
                    let gap = y
                        .coords()
                        .iter()
                        .zip(result.minimizer.coords())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    (Some(v), Some((v - result.value).abs()), Some(gap))
                }
                _ => (None, None, None),
            };
            Ok(LaxRecord {
                x_hash: point_hash(&x),
                x,
                result,
                closed_value,
                value_gap,
                minimizer_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    out.csv(
        "lax_oleinik.csv",
        &["t", "x_hash", "psi", "residual", "iters", "converged", "psi_closed", "value_gap", "minimizer_gap"],
        records.iter().map(|r| {
            [
                num(cfg.t),
                r.x_hash.clone(),
                num(r.result.value),
                num(r.result.residual),
                r.result.iterations.to_string(),
                r.result.converged.to_string(),
                opt(r.closed_value),
                opt(r.value_gap),
                opt(r.minimizer_gap),
            ]
        }),
    )?;
    out.json("lax_oleinik.json", &records)?;
    let converged = records.iter().all(|r| r.result.converged);
    let value_ok = records.iter().all(|r| r.value_gap.is_none_or(|g| g <= cfg.psi_tol));
    let min_ok = records.iter().all(|r| r.minimizer_gap.is_none_or(|g| g <= cfg.minimizer_tol));
    let pass = converged && value_ok && min_ok;
    let worst_v = records.iter().filter_map(|r| r.value_gap).fold(0.0, f64::max);
    let worst_y = records.iter().filter_map(|r| r.minimizer_gap).fold(0.0, f64::max);
    Ok(Outcome {
        pass,
        summary: vec![format!(
            "{} points at t={}: all converged = {converged}, worst value gap {worst_v:.3e}, worst minimizer gap {worst_y:.3e} [{}]",
            records.len(),
            cfg.t,
            verdict(pass)
        )],
    })
}

/// Sup error of `field` against `exact` over a lattice, with its location.
pub fn sup_error(field: &SolutionField, exact: &SolutionField, samples: &SampleSet) -> Result<(f64, Vec<f64>, f64)> {
    let mut worst = (0.0, vec![], 0.0);
    for s in &samples.points {
        let e = (field.value(s.t, &s.x)? - exact.value(s.t, &s.x)?).abs();
        if e > worst.0 {
            worst = (e, s.x.clone(), s.t);
        }
    }
    Ok(worst)
}

fn export_slices(g: &GridField, export: &config::SliceExport, out: &mut OutputDir) -> Result<()> {
    let picks: Vec<usize> = if export.times.is_empty() {
        vec![g.times.len() - 1]
    } else {
        export
            .times
            .iter()
            .map(|&t| {
                (0..g.times.len())
                    .min_by(|&a, &b| (g.times[a] - t).abs().total_cmp(&(g.times[b] - t).abs()))
                    .unwrap_or(0)
            })
            .collect()
    };
    let stride = export.stride.unwrap_or(1).max(1);
    let dim = g.dim();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..dim).map(|a| format!("x{a}")));
    header.push("value".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for k in picks {
        let axes: Vec<Vec<usize>> = g.spec.nodes.iter().map(|&n| (0..n).step_by(stride).collect()).collect();
        let mut idx = vec![0usize; dim];
        loop {
            let index: Vec<usize> = (0..dim).map(|a| axes[a][idx[a]]).collect();
            let mut row = vec![num(g.times[k])];
            row.extend((0..dim).map(|a| num(g.spec.coordinate(a, index[a]))));
            row.push(num(g.node_value(k, &index)));
            rows.push(row);
            // odometer over the strided axes
            let mut a = dim;
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < axes[a].len() {
                    break;
                }
                idx[a] = 0;
                if a == 0 {
                    a = usize::MAX;
                    break;
                }
            }
            if a == usize::MAX {
                break;
            }
        }
    }
    out.csv("slices.csv", &header_refs, rows)
}

#[derive(Serialize)]
struct FdReport {
    dt: Option<f64>,
    slices: usize,
    sup_error: Option<f64>,
    at_t: Option<f64>,
    at_x: Option<Vec<f64>>,
    tolerance: Option<f64>,
    pass: bool,
}

pub fn solve_fd_run(cfg: &config::SolveFd, seed: u64, out: &mut OutputDir) -> Result<Outcome> {
    let spectrum = EigenSpectrum::new(cfg.spectrum.clone())?;
    let field = solve_fd(&cfg.initial, &spectrum, cfg.dim, &cfg.grid)?;
    let SolutionField::Grid(g) = &field else { unreachable!("the solver returns a grid field") };
    out.binary("field.hjbgrid", |w| Ok(write_grid(g, w)?))?;
    export_slices(g, &cfg.export, out)?;
    let mut report = FdReport {
        dt: g.spec.dt,
        slices: g.times.len(),
        sup_error: None,
        at_t: None,
        at_x: None,
        tolerance: None,
        pass: true,
    };
    let mut summary = vec![format!(
        "grid {:?} nodes, dt = {:.3e}, {} stored slices",
        g.spec.nodes,
        g.spec.dt.unwrap_or(f64::NAN),
        g.times.len()
    )];
    if let Some(check) = &cfg.check {
        let exact = exact_field(&cfg.initial, &spectrum, Some(cfg.dim))
            .context("the accuracy check needs quadratic or separable data")?;
        let samples = SampleSet::lattice(&LatticeConfig {
            dim: cfg.dim,
            count: check.count,
            t_min: check.t_min,
            t_max: cfg.grid.horizon,
            half_width: check.half_width,
            seed,
        })?;
        let (err, x, t) = sup_error(&field, &exact, &samples)?;
        let tol = check.tol.unwrap_or(if cfg.dim == 1 { 5e-3 } else { 1e-2 });
        report.sup_error = Some(err);
        report.at_t = Some(t);
        report.at_x = Some(x);
        report.tolerance = Some(tol);
        report.pass = err <= tol;
        summary.push(format!("sup error vs exact field {err:.3e} (tol {tol:.1e}) [{}]", verdict(report.pass)));
    }
    out.json("fd_report.json", &report)?;
    Ok(Outcome { pass: report.pass, summary })
}

#[derive(Serialize)]
struct ComparisonRow {
    gamma: f64,
    sup_gap: f64,
    gap_at_gamma: f64,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyDoc<'a> {
    field: &'static str,
    tolerance: f64,
    estimates: &'a [hjb_core::verify::EstimateReport],
    residuals: &'a [hjb_core::verify::ResidualReport],
    comparison: &'a [ComparisonRow],
    comparison_monotone: Option<bool>,
    shift_defect: Option<f64>,
    pass: bool,
}

pub fn verify_run(cfg: &config::Verify, seed: u64, out: &mut OutputDir) -> Result<Outcome> {
    let spectrum = EigenSpectrum::new(cfg.spectrum.clone())?;
    let field = match &cfg.field {
        FieldSource::ClosedForm { level } => {
            let InitialCondition::DiagonalQuadratic(q) = &cfg.initial else { bail!("closed_form needs quadratic data") };
            let sol = QuadraticSolution::new(spectrum.clone(), q.clone());
            SolutionField::ClosedFormQuadratic(match level {
                Some(l) => sol.with_level(*l),
                None => sol,
            })
        }
        FieldSource::Oracle => exact_field(&cfg.initial, &spectrum, None)?,
        FieldSource::Grid { dim, grid } => solve_fd(&cfg.initial, &spectrum, *dim, grid)?,
        FieldSource::File { path } => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            SolutionField::Grid(read_grid(BufReader::new(f))?)
        }
    };
    let lattice = LatticeConfig { seed, ..cfg.lattice.clone() };
    let samples = SampleSet::lattice(&lattice)?;
    let tol = cfg.tolerance.unwrap_or_else(|| default_tolerance(&field));
    let growth_times: Vec<f64> = if cfg.growth_times.is_empty() {
        (0..5).map(|k| lattice.t_min + (lattice.t_max - lattice.t_min) * k as f64 / 4.0).collect()
    } else {
        cfg.growth_times.clone()
    };
    let xs: Vec<Vec<f64>> = samples.points.iter().take(50).map(|s| s.x.clone()).collect();
    let growth = SampleSet::product(&growth_times, &xs);
    let estimates = run_suite(&SuiteInput {
        field: &field,
        phi0: &cfg.initial,
        spectrum: &spectrum,
        samples: &samples,
        growth_samples: &growth,
        tolerance: tol,
        seed,
    })?;
    let mut residuals = Vec::new();
    if let Some(r) = &cfg.residual {
        let rtol = r.tolerance.unwrap_or(tol);
        for &d in &r.active_modes {
            residuals.push(transformed_residual(&field, &spectrum, d, &samples, rtol)?);
        }
    }
    let mut comparison = Vec::new();
    let mut comparison_monotone = None;
    let mut shift = None;
    let mut shift_ok = true;
    if let Some(c) = &cfg.comparison {
        let FieldSource::Grid { dim, grid } = &cfg.field else { bail!("comparison needs a grid field") };
        let exact = exact_field(&cfg.initial, &spectrum, Some(*dim))?;
        let ctol = c.tolerance.unwrap_or(tol);
        let mut gammas = c.gammas.clone();
        gammas.sort_by(f64::total_cmp);
        let times = comparison_times(&gammas, grid.horizon, c.n_times);
        for &gamma in &gammas {
            let r = comparison_gap(&field, &exact, gamma, &times, &xs, ctol)?;
            comparison.push(ComparisonRow {
                gamma,
                sup_gap: r.sup_gap,
                gap_at_gamma: r.gap_at_gamma,
                pass: r.pass && r.sup_gap <= ctol,
            });
        }
        comparison_monotone = Some(comparison.windows(2).all(|w| w[1].sup_gap <= w[0].sup_gap));
        let shifted = solve_fd(&cfg.initial.shifted(c.shift)?, &spectrum, *dim, grid)?;
        let d = shift_defect(&field, &shifted, c.shift, &samples)?;
        shift_ok = d <= c.shift_tol;
        shift = Some(d);
    }
    let pass = estimates.iter().all(|r| r.pass)
        && residuals.iter().all(|r| r.pass)
        && comparison.iter().all(|r| r.pass)
        && comparison_monotone != Some(false)
        && shift_ok;
    let mut table = format!(
        "{:<28} {:>5} {:>7} {:>12} {:>9}  worst location\n",
        "check", "", "count", "margin", "tol"
    );
    for r in &estimates {
        table.push_str(&r.table_row());
        table.push('\n');
    }
    for r in &residuals {
        table.push_str(&format!(
            "{:<28} {:>5} {:>7} {:>12.4e} {:>9.1e}  R in [{:.3e}, {:.3e}], eps_d = {:.4e}\n",
            format!("transformed_residual d={}", r.active_modes),
            verdict(r.pass),
            r.count,
            r.worst_margin,
            r.tolerance,
            r.min,
            r.max,
            r.eps_d
        ));
    }
    for c in &comparison {
        table.push_str(&format!(
            "{:<28} {:>5} {:>7} {:>12.4e} {:>9}  gap at gamma {:.4e}\n",
            format!("comparison gamma={}", c.gamma),
            verdict(c.pass),
            "",
            c.sup_gap,
            "",
            c.gap_at_gamma
        ));
    }
    if let Some(d) = shift {
        table.push_str(&format!("{:<28} {:>5} {:>7} {:>12.4e}\n", "constant_shift_defect", verdict(shift_ok), "", d));
    }
    out.text("reports.txt", &table)?;
    out.json(
        "reports.json",
        &VerifyDoc {
            field: field.kind(),
            tolerance: tol,
            estimates: &estimates,
            residuals: &residuals,
            comparison: &comparison,
            comparison_monotone,
            shift_defect: shift,
            pass,
        },
    )?;
    let mut summary: Vec<String> = table.lines().map(str::to_string).collect();
    summary.push(format!("{} field, overall [{}]", field.kind(), verdict(pass)));
    Ok(Outcome { pass, summary })
}

pub fn converge_run(cfg: &config::Converge, out: &mut OutputDir) -> Result<Outcome> {
    let spectrum = EigenSpectrum::new(cfg.spectrum.clone())?;
    let InitialCondition::DiagonalQuadratic(q) = &cfg.initial else { bail!("converge needs quadratic data") };
    let x = cfg.point.coords();
    let table = converge(&spectrum, q, cfg.t, &x, &cfg.levels, cfg.tol)?;
    out.csv(
        "converge.csv",
        &["N", "value", "cauchy_diff", "c_tail", "psi_tail", "tail_bound", "pass"],
        table.rows.iter().map(|r| {
            [
                r.level.to_string(),
                num(r.value),
                num(r.cauchy_diff),
                num(r.c_tail),
                num(r.psi_tail),
                num(r.tail_bound),
                r.pass.to_string(),
            ]
        }),
    )?;
    out.json("converge.json", &table)?;
    let mut summary: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            format!(
                "N={:<5} phi^N={:.12} |phi^2N - phi^N|={:.4e} bound={:.4e}",
                r.level, r.value, r.cauchy_diff, r.tail_bound
            )
        })
        .collect();
    summary.push(format!("monotone = {}, overall [{}]", table.monotone, verdict(table.pass)));
    Ok(Outcome { pass: table.pass, summary })
}

#[derive(Serialize)]
struct StorageDoc<'a> {
    value: &'a hjb_core::storage::ValueCheck,
    conservation: hjb_core::storage::ConservationLog,
    martingale_pass: bool,
    checkpoint_times: &'a [f64],
    pass: bool,
}

pub fn storage_run(cfg: &config::StorageSim, seed: u64, out: &mut OutputDir) -> Result<Outcome> {
    let market = MarketConfig {
        sites: cfg.sites,
        sigma: cfg.sigma,
        horizon: cfg.horizon,
        dt: cfg.dt,
        paths: cfg.paths,
        seed,
        objective: cfg.objective.clone(),
        checkpoints: cfg.checkpoints,
    };
    let k0 = cfg.k0.clone().unwrap_or_else(|| vec![0.0; cfg.sites]);
    let ensemble = simulate_paths(&market, &k0)?;
    let field = circle_value_field(&market)?;
    let value = verify_value_mc(&ensemble, &field, cfg.bias_allowance)?;
    let rows = martingale_diagnostic(&ensemble);
    out.csv(
        "summary.csv",
        &["checkpoint", "site", "mean_k", "mean_p", "se_p", "drift", "se_drift", "pass"],
        rows.iter().map(|r| {
            [
                r.checkpoint.to_string(),
                r.site.to_string(),
                num(r.mean_k),
                num(r.mean_p),
                num(r.se_p),
                num(r.drift),
                num(r.se_drift),
                r.pass.to_string(),
            ]
        }),
    )?;
    if cfg.save_paths {
        let mut recs = Vec::new();
        for (p, path) in ensemble.paths.iter().enumerate() {
            for (j, s) in path.iter().enumerate() {
                for site in 0..cfg.sites {
                    recs.push([
                        p.to_string(),
                        j.to_string(),
                        num(s.s),
                        site.to_string(),
                        num(s.levels[site]),
                        num(s.prices[site]),
                        num(s.flows[site]),
                        num(s.running_cost),
                    ]);
                }
            }
        }
        out.csv("paths.csv", &["path", "checkpoint", "s", "site", "level", "price", "flow", "running_cost"], recs)?;
    }
    let martingale_pass = rows.iter().all(|r| r.pass);
    let conserved = ensemble.conservation.violations == 0;
    let pass = value.pass && martingale_pass && conserved;
    out.json(
        "storage.json",
        &StorageDoc {
            value: &value,
            conservation: ensemble.conservation,
            martingale_pass,
            checkpoint_times: &ensemble.checkpoint_times,
            pass,
        },
    )?;
    Ok(Outcome {
        pass,
        summary: vec![
            format!(
                "value: MC {:.6} +- {:.6} vs field {:.6} (z = {:.2}) [{}]",
                value.mc_estimate,
                value.std_error,
                value.field_value,
                value.z_score,
                verdict(value.pass)
            ),
            format!(
                "martingale: {} interval-site drifts within 3 SE [{}]",
                rows.len(),
                verdict(martingale_pass)
            ),
            format!(
                "conservation: {} steps, {} violations [{}]",
                ensemble.conservation.steps_checked,
                ensemble.conservation.violations,
                verdict(conserved)
            ),
        ],
    })
}
