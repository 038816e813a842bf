//! Executes an [`ExperimentConfig`].

use std::path::Path;

use osfield::covariance::FrequencyBand;
use osfield::harness::checks::random_lags;
use osfield::harness::dims::boundary_jump;
use osfield::harness::modulus::{band_split_study, default_lil_radii, default_umc_radii, DyadicGrid, ModulusReport};
use osfield::harness::planar_cell::{planar_cell_exponent, DirectionalReport};
use osfield::harness::{
    alpha_argmin, alpha_theta, dimensions, estimate_grid_moduli, planar_cell_curves, planar_cell_directional_modulus,
    scaling_check, slnd_random, slnd_scaling, truncation_study, Curve,
};
use osfield::sampler::{model_fingerprint, sample_cholesky, sample_spectral};
use osfield::{FieldModel, HVector};
use serde_json::{json, Value};

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::report::{coord_names, envelope, f64le_columns, read_points, write_bytes, write_json, Gate, Table};

/// Runs the experiment and returns whether every gate passed.
pub fn run(cfg: &ExperimentConfig) -> CliResult<bool> {
    let exp = &cfg.experiment;
    if exp.is_stochastic() && cfg.seed.is_none() {
        return Err(CliError::Missing("seed"));
    }
    let model = if exp.needs_model() {
        let m = cfg.model.as_ref().ok_or(CliError::Missing("model"))?;
        Some(m.build()?)
    } else {
        None
    };
    let seed = cfg.seed.unwrap_or(0);
    let out = cfg.output.path.as_deref();
    let trace = cfg.output.csv.as_deref();
    let echo = json!({
        "model": cfg.model,
        "experiment": exp,
        "seed": cfg.seed,
    });

    let (command, gates, result, table) = match exp {
        Experiment::Tau(p) => return tau(model.as_ref().unwrap(), p, out).map(|_| true),
        Experiment::Variogram(p) => return variogram(model.as_ref().unwrap(), p, out).map(|_| true),
        Experiment::Simulate(p) => return simulate(model.as_ref().unwrap(), p, seed, out).map(|_| true),
        Experiment::Slnd(p) => slnd(model.as_ref().unwrap(), p, seed)?,
        Experiment::Umc(p) => umc(model.as_ref().unwrap(), p, seed)?,
        Experiment::Lil(p) => lil(model.as_ref().unwrap(), p, seed)?,
        Experiment::Scaling(p) => scaling(model.as_ref().unwrap(), p, seed)?,
        Experiment::Truncation(p) => truncation(model.as_ref().unwrap(), p, seed)?,
        Experiment::PlanarCell(p) => planar_cell(p, seed)?,
        Experiment::Dims(p) => dims(p)?,
        Experiment::Alpha(p) => alpha(p)?,
    };
    let fingerprint = model.as_ref().map(model_fingerprint);
    let report = envelope(command, &echo, fingerprint.as_deref(), &gates, result)?;
    write_json(out, &report)?;
    if let Some(path) = trace {
        write_bytes(Some(path), &table.to_csv()?)?;
    }
    for g in &gates {
        eprintln!("{}", g.summary());
    }
    Ok(gates.iter().all(|g| g.pass))
}

type Outcome = (&'static str, Vec<Gate>, Value, Table);

fn need<'a>(p: &'a Option<std::path::PathBuf>, name: &'static str) -> CliResult<&'a Path> {
    p.as_deref().ok_or(CliError::Missing(name))
}

fn tau(model: &FieldModel, p: &TauParams, out: Option<&Path>) -> CliResult<()> {
    let e = model.exponent();
    let n = e.dim();
    let points = read_points(need(&p.points, "points")?, n)?;
    let mut header = coord_names("x", n);
    header.push("tau".into());
    header.extend(coord_names("dir", n));
    let mut table = Table::new(header);
    for x in &points {
        let polar = e.polar_decompose(x)?;
        let mut row: Vec<Option<f64>> = x.iter().map(|&v| Some(v)).collect();
        row.push(Some(polar.tau));
        match polar.direction {
            Some(d) => row.extend(d.into_iter().map(Some)),
            None => row.extend(std::iter::repeat_n(None, n)),
        }
        table.push(row);
    }
    write_bytes(out, &table.to_csv()?)
}

fn variogram(model: &FieldModel, p: &VariogramParams, out: Option<&Path>) -> CliResult<()> {
    let e = model.exponent();
    let n = e.dim();
    let lags = read_points(need(&p.lags, "lags")?, n)?;
    let gammas = model.variogram_many(&lags)?;
    let mut header = coord_names("h", n);
    header.extend(["gamma".into(), "tau".into(), "ratio".into()]);
    let mut table = Table::new(header);
    for (h, g) in lags.iter().zip(gammas) {
        let t = e.tau(h)?;
        let mut row: Vec<Option<f64>> = h.iter().map(|&v| Some(v)).collect();
        row.extend([Some(g), Some(t), (t > 0.0).then(|| g / (t * t))]);
        table.push(row);
    }
    write_bytes(out, &table.to_csv()?)
}

fn simulate(model: &FieldModel, p: &SimulateParams, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let n = model.dim();
    let points = match (p.level, &p.points) {
        (Some(level), None) => DyadicGrid::new(n, level)?.points(),
        (None, Some(path)) => read_points(path, n)?,
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either a grid level or a points file, not both".into(),
            ))
        }
        (None, None) => return Err(CliError::Missing("level")),
    };
    let real = match p.method {
        SimMethod::Cholesky => sample_cholesky(model, &points, seed)?,
        SimMethod::Spectral => {
            let band = FrequencyBand::new(p.band_lo, p.band_hi.unwrap_or(f64::INFINITY))?;
            sample_spectral(model, &points, &band, p.freq_count, seed)?
        }
    };
    let bytes = match p.format {
        Format::Csv => {
            let mut header = coord_names("x", n);
            header.push("value".into());
            let mut table = Table::new(header);
            for (x, v) in real.points.iter().zip(&real.values) {
                let mut row: Vec<Option<f64>> = x.iter().map(|&c| Some(c)).collect();
                row.push(Some(*v));
                table.push(row);
            }
            table.to_csv()?
        }
        Format::F64le => {
            let mut cols: Vec<Vec<f64>> = (0..n).map(|i| real.points.iter().map(|x| x[i]).collect()).collect();
            cols.push(real.values.clone());
            f64le_columns(&cols)
        }
    };
    write_bytes(out, &bytes)?;
    eprintln!(
        "simulated {} points, method {:?}, seed {}, model {}",
        real.points.len(),
        p.method,
        seed,
        &real.fingerprint[..12]
    );
    Ok(())
}

/// A fixed spread-out configuration in `[0, 1]^N`.
fn default_base(dim: usize) -> Vec<Vec<f64>> {
    (0..4)
        .map(|k| {
            (0..dim)
                .map(|i| (0.618_033_988_75 * (k + 1) as f64 + 0.414_213_562_37 * (i + 1) as f64).fract())
                .collect()
        })
        .collect()
}

fn slnd(model: &FieldModel, p: &SlndParams, seed: u64) -> CliResult<Outcome> {
    let random = slnd_random(model, p.count, p.max_points, seed)?;
    let base = p.base.clone().unwrap_or_else(|| default_base(model.dim()));
    let scaled = slnd_scaling(model, &base, &p.scales)?;
    let spread = scaled.max_ratio / scaled.min_ratio - 1.0;
    let gates = vec![
        Gate::above("slnd.min_ratio", random.min_ratio, 0.0),
        Gate::at_most("slnd.scale_spread", spread, p.scale_tol),
    ];
    let mut table = Table::new(vec![
        "set".into(),
        "index".into(),
        "points".into(),
        "scale".into(),
        "ratio".into(),
    ]);
    for (i, (c, r)) in random.configs.iter().zip(&random.ratios).enumerate() {
        table.push(vec![Some(0.0), Some(i as f64), Some(c.len() as f64), None, Some(*r)]);
    }
    for (i, (c, r)) in p.scales.iter().zip(&scaled.ratios).enumerate() {
        table.push(vec![
            Some(1.0),
            Some(i as f64),
            Some(base.len() as f64),
            Some(*c),
            Some(*r),
        ]);
    }
    let result = json!({ "random": random, "scaling": scaled, "scale_spread": spread });
    Ok(("verify slnd", gates, result, table))
}

fn concentration_gates(prefix: &str, r: &ModulusReport) -> Vec<Gate> {
    let m = r.estimates.len();
    (m.saturating_sub(2)..m)
        .map(|k| {
            Gate::below(
                format!("{prefix}.cv[r={:.4e}]", r.radii[k]),
                r.estimates[k].cv,
                r.cv_gate,
            )
        })
        .collect()
}

fn modulus_table(r: &ModulusReport) -> Table {
    let mut t = Table::new(vec![
        "replica".into(),
        "radius".into(),
        "count".into(),
        "statistic".into(),
    ]);
    for (rep, row) in r.statistics.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            t.push(vec![
                Some(rep as f64),
                Some(r.radii[k]),
                Some(r.counts[k] as f64),
                Some(*v),
            ]);
        }
    }
    t
}

fn umc(model: &FieldModel, p: &UmcParams, seed: u64) -> CliResult<Outcome> {
    let radii = default_umc_radii(model, p.level, p.radii)?;
    let lil = default_lil_radii(model, p.level, 0, 1)?;
    let (report, _) = estimate_grid_moduli(model, p.level, &radii, &lil, p.replicas, seed)?;
    let gates = concentration_gates("umc", &report);
    let table = modulus_table(&report);
    Ok(("verify umc", gates, crate::report::to_value(&report)?, table))
}

fn lil(model: &FieldModel, p: &LilParams, seed: u64) -> CliResult<Outcome> {
    let umc_radii = default_umc_radii(model, p.level, 1)?;
    let radii = default_lil_radii(model, p.level, p.smallest_ball, p.radii)?;
    let (_, mut report) = estimate_grid_moduli(model, p.level, &umc_radii, &radii, p.replicas, seed)?;
    let mut gates = concentration_gates("lil", &report);
    if let Some(split) = &p.band_split {
        let origin = vec![0.0; model.dim()];
        let bs = band_split_study(model, &origin, split, seed ^ 0x5b11_7000)?;
        gates.push(Gate::holds("lil.band_split.i2_decreasing", bs.i2_decreasing));
        report.band_split = Some(bs);
    }
    let table = modulus_table(&report);
    Ok(("verify lil", gates, crate::report::to_value(&report)?, table))
}

fn scaling(model: &FieldModel, p: &ScalingParams, seed: u64) -> CliResult<Outcome> {
    let lags = random_lags(model.dim(), p.lags, seed);
    let r = scaling_check(model, &lags, &p.factors)?;
    let gates = vec![Gate::at_most("scaling.max_rel_err", r.max_rel_err, r.tol)];
    let mut table = Table::new(vec!["factor".into(), "lag".into(), "rel_err".into()]);
    for (c, row) in r.factors.iter().zip(&r.rel_errors) {
        for (i, v) in row.iter().enumerate() {
            table.push(vec![Some(*c), Some(i as f64), Some(*v)]);
        }
    }
    Ok(("verify scaling", gates, crate::report::to_value(&r)?, table))
}

fn truncation(model: &FieldModel, p: &TruncationParams, seed: u64) -> CliResult<Outcome> {
    let r = truncation_study(model, p.count, seed)?;
    let gates = vec![Gate::at_most("truncation.max_ratio", r.max_ratio, 1.0 + r.slack)];
    let n = model.dim();
    let mut header = coord_names("t", n);
    header.extend(["u".into(), "lhs".into(), "rhs".into()]);
    let mut table = Table::new(header);
    for s in &r.samples {
        let mut row: Vec<Option<f64>> = s.t.iter().map(|&v| Some(v)).collect();
        row.extend([Some(s.u), Some(s.lhs), Some(s.rhs)]);
        table.push(row);
    }
    Ok(("verify truncation", gates, crate::report::to_value(&r)?, table))
}

fn max_rel(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.map(|(got, want)| ((got - want) / want).abs()).fold(0.0, f64::max)
}

fn planar_cell(p: &PlanarCellParams, seed: u64) -> CliResult<Outcome> {
    let a = p.a;
    let e = planar_cell_exponent(a)?;
    let probes = [-10.0, -1.0, -0.1, 0.1, 1.0, 10.0];
    let norm_err = max_rel(
        probes
            .iter()
            .map(|&s| Ok((e.e_norm(&[0.0, s])?, s.abs() / a)))
            .collect::<CliResult<Vec<_>>>()?
            .into_iter(),
    );
    let tau_err = max_rel(
        [0.1, 0.5, 1.0, 2.0]
            .iter()
            .map(|&s: &f64| Ok((e.tau(&[0.0, a * s.powf(a)])?, s)))
            .collect::<CliResult<Vec<_>>>()?
            .into_iter(),
    );
    let theta = p.theta.abs();
    let alpha_err = max_rel(
        [theta, -theta]
            .iter()
            .map(|&t| Ok((t.abs() / alpha_theta(a, t)?, a)))
            .collect::<CliResult<Vec<_>>>()?
            .into_iter(),
    );
    let mut gates = vec![
        Gate::at_most("planar_cell.norm_axis_rel_err", norm_err, 1e-9),
        Gate::at_most("planar_cell.tau_axis_rel_err", tau_err, 1e-7),
        Gate::at_most("planar_cell.theta_over_alpha_rel_err", alpha_err, 0.05),
    ];
    let curves = [
        ("log_shift", Curve::LogShift { c: p.log_shift }),
        ("axis", Curve::Axis),
        ("fixed_theta", Curve::FixedTheta { theta: p.fixed_theta }),
    ];
    let mut table = Table::new(
        ["curve", "y_norm", "s", "tau", "predicted", "ratio"]
            .map(String::from)
            .to_vec(),
    );
    let mut tables = Vec::new();
    for (k, (name, curve)) in curves.iter().enumerate() {
        let t = planar_cell_curves(a, *curve, &p.y_norms)?;
        gates.push(Gate::at_most(
            format!("planar_cell.{name}.tail_slope"),
            t.tail_slope.abs(),
            t.slope_tol,
        ));
        for r in &t.rows {
            table.push(vec![
                Some(k as f64),
                Some(r.y_norm),
                Some(r.s),
                Some(r.tau),
                Some(r.predicted),
                Some(r.ratio),
            ]);
        }
        tables.push(t);
    }
    let mut directional: Vec<DirectionalReport> = Vec::new();
    if !p.directional.is_empty() {
        let model = FieldModel::tau_dual(e.clone())?;
        for (i, fam) in p.directional.iter().enumerate() {
            let r = planar_cell_directional_modulus(&model, a, *fam, &p.levels, p.replicas, seed ^ i as u64)?;
            gates.push(Gate::holds(
                format!(
                    "planar_cell.{}.concentrated",
                    serde_json::to_value(fam).unwrap().as_str().unwrap_or("family")
                ),
                r.concentrated,
            ));
            directional.push(r);
        }
    }
    let (theta0, alpha0) = alpha_argmin(a)?;
    let result = json!({
        "norm_axis_rel_err": norm_err,
        "tau_axis_rel_err": tau_err,
        "theta_over_alpha_rel_err": alpha_err,
        "theta0": theta0,
        "alpha_min": alpha0,
        "curves": tables,
        "directional": directional,
    });
    Ok(("verify planar-cell", gates, result, table))
}

fn dims(p: &DimsParams) -> CliResult<Outcome> {
    let h = HVector::new(p.h.clone())?;
    let report = dimensions(&h, p.d);
    let mut jump = boundary_jump(h.as_slice());
    let mut table = Table::new(vec!["h1".into(), "h2".into(), "boundary_jump".into()]);
    if p.sweep >= 2 {
        for j in 0..p.sweep {
            let x = 0.05 + 0.9 * j as f64 / (p.sweep - 1) as f64;
            let pair = if x <= 0.5 { vec![x, 0.5] } else { vec![0.5, x] };
            let b = boundary_jump(&pair);
            jump = jump.max(b);
            table.push(vec![Some(pair[0]), Some(pair[1]), Some(b)]);
        }
    }
    let gates = vec![Gate::at_most("dims.boundary_jump", jump, 1e-12)];
    Ok(("dims", gates, crate::report::to_value(&report)?, table))
}

fn alpha(p: &AlphaParams) -> CliResult<Outcome> {
    let mut table = Table::new(vec!["theta".into(), "alpha".into(), "abs_theta_over_alpha".into()]);
    let mut rows = Vec::new();
    let mut min_alpha = f64::INFINITY;
    for &t in &p.thetas {
        let v = alpha_theta(p.a, t)?;
        min_alpha = min_alpha.min(v);
        table.push(vec![Some(t), Some(v), Some(t.abs() / v)]);
        rows.push(json!({ "theta": t, "alpha": v }));
    }
    let argmin = if p.argmin {
        let (t, v) = alpha_argmin(p.a)?;
        min_alpha = min_alpha.min(v);
        Some(json!({ "theta": t, "alpha": v }))
    } else {
        None
    };
    let mut gates = Vec::new();
    if min_alpha.is_finite() {
        gates.push(Gate::above("alpha.min", min_alpha, 1.0 / p.a));
    }
    let result = json!({ "a": p.a, "values": rows, "argmin": argmin });
    Ok(("alpha", gates, result, table))
}
