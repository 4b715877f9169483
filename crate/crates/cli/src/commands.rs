//! Subcommand implementations; each returns its tables for the writer.

use mesofluct::cumulants::operator_dimension;
use mesofluct::funcspace::{sigma_bilinear, DEFAULT_DELTA};
use mesofluct::toeplitz::{commutator_check, trace_norm_bound_check, ExponentialFactors};
use mesofluct::{
    cd_kernel, certify_combes_thomas, compute_cumulants, cumulant_difference, empirical_cumulants, fit_best, generate_recurrence,
    pole_symbol, product_identity_check, resolvent_window, sample_dpp, sigma_poles_closed, sigma_quadrature, CumulantReport,
    JacobiOperator, MesoscopicFrame, PoleCombination, QuadratureGrid, SpectralPoint, TestFunction, WeightSpec,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{float, Table};

const FIT_TRANSLATES: usize = mesofluct::cumulants::DEFAULT_FIT_TRANSLATES;
/// The sampler works with dense `M x n` factors.
const MAX_SAMPLE_N: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Recurrence,
    Resolvent,
    Cumulants,
    Compare,
    FreeIdentities,
    VarianceLimit,
    Sample,
}

pub fn run(cmd: Subcommand, cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    match cmd {
        Subcommand::Recurrence => recurrence(cfg),
        Subcommand::Resolvent => resolvent(cfg),
        Subcommand::Cumulants => cumulants(cfg),
        Subcommand::Compare => compare(cfg),
        Subcommand::FreeIdentities => free_identities(cfg),
        Subcommand::VarianceLimit => variance_limit(cfg),
        Subcommand::Sample => sample(cfg),
    }
}

fn recurrence(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let coeffs = generate_recurrence(&cfg.weight, cfg.recurrence_n).map_err(|e| CliError::core(e, "recurrence.n"))?;
    if let (Some(limits), true) = (cfg.weight.limits(), coeffs.len() >= 50) {
        match mesofluct::measures::fit_decay_rate(&coeffs, limits) {
            Ok(fit) => log::info!("decay fit against {limits:?}: {fit:?}"),
            Err(e) => log::warn!("decay fit failed: {e}"),
        }
    }
    let mut t = Table::new("recurrence", vec!["n", "a_n", "b_n"])
        .with_plot("plot file using 1:2 with lines title 'a_n', file using 1:3 with lines title 'b_n'");
    for k in 1..=coeffs.len() {
        t.push(vec![k.to_string(), float(coeffs.a(k)), float(coeffs.b(k))]);
    }
    Ok(vec![t])
}

fn resolvent(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let s = &cfg.resolvent;
    let z = SpectralPoint::new(s.lambda);
    let max_index = *s.rows.end().max(s.cols.end());
    let op = JacobiOperator::for_indices(&cfg.weight, max_index, &[s.lambda]).map_err(|e| CliError::core(e, "resolvent"))?;
    let w = resolvent_window(&op, &z, s.rows.clone(), s.cols.clone()).map_err(|e| CliError::core(e, "resolvent"))?;
    let mut window = Table::new("window", vec!["row", "col", "re", "im"])
        .with_plot("set logscale y\nplot file using ($1 - $2):(sqrt($3**2 + $4**2)) with points title '|G_jk|'");
    for j in s.rows.clone() {
        for k in s.cols.clone() {
            let g = w.get(j, k);
            window.push(vec![j.to_string(), k.to_string(), float(g.re), float(g.im)]);
        }
    }
    let mut out = vec![window];
    if let Some(radius) = s.radius {
        let op = JacobiOperator::for_indices(&cfg.weight, 2 * radius + 1, &[s.lambda])
            .map_err(|e| CliError::core(e, "resolvent.radius"))?;
        let rep = certify_combes_thomas(&op, &z, radius).map_err(|e| CliError::core(e, "resolvent.radius"))?;
        log::info!("Combes-Thomas certification: max ratio {}", rep.max_ratio);
        let mut t = Table::new("certification", vec!["distance", "max_abs_g", "bound"]).with_plot(
            "set logscale y\nplot file using 1:2 with linespoints title 'max |G|', file using 1:3 with lines title 'bound'",
        );
        for (d, g, b) in rep.rows {
            t.push(vec![d.to_string(), float(g), float(b)]);
        }
        out.push(t);
    }
    Ok(out)
}

/// The pole combination used for window sizing; sampled functions are fit once.
fn poles_for(f: &TestFunction) -> Result<PoleCombination, CliError> {
    match f {
        TestFunction::PoleCombination(p) => Ok(p.clone()),
        TestFunction::SampledC1(s) => Ok(fit_best(s, FIT_TRANSLATES, DEFAULT_DELTA).map_err(|e| CliError::core(e, "f.path"))?.poles),
    }
}

fn limits_of(spec: &WeightSpec) -> (f64, f64) {
    match spec {
        WeightSpec::Explicit { a, b } => (*a.last().unwrap(), *b.last().unwrap()),
        other => other.limits().expect("closed-form limits"),
    }
}

/// Operator dimension for every frame under every spec.
fn dimensions(specs: &[&WeightSpec], frames: &[MesoscopicFrame], poles: &PoleCombination) -> Result<Vec<usize>, CliError> {
    frames
        .iter()
        .map(|fr| {
            specs.iter().try_fold(0usize, |acc, spec| {
                let d = operator_dimension(fr, poles, limits_of(spec), spec.coefficient_bound())
                    .map_err(|e| CliError::core(e, "frame"))?;
                Ok(acc.max(d))
            })
        })
        .collect()
}

fn base_operator(spec: &WeightSpec, dim: usize, field: &str) -> Result<JacobiOperator, CliError> {
    JacobiOperator::from_spec(spec, dim).map_err(|e| CliError::core(e, field))
}

fn frame_cells(fr: &MesoscopicFrame) -> Vec<String> {
    vec![fr.n.to_string(), float(fr.alpha), float(fr.x0)]
}

fn frame_cumulants(
    base: &JacobiOperator,
    dim: usize,
    frame: &MesoscopicFrame,
    f: &TestFunction,
    orders: &[usize],
) -> Result<CumulantReport, CliError> {
    let op = base.clone().with_dim(dim).map_err(|e| CliError::core(e, "weight"))?;
    compute_cumulants(&op, frame, f, orders).map_err(|e| CliError::core(e, "cumulants.orders"))
}

fn cumulants(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let poles = poles_for(&cfg.f)?;
    let f: TestFunction = poles.clone().into();
    let dims = dimensions(&[&cfg.weight], &cfg.frames, &poles)?;
    let base = base_operator(&cfg.weight, *dims.iter().max().unwrap(), "weight")?;
    let reports: Vec<CumulantReport> = cfg
        .frames
        .par_iter()
        .zip(&dims)
        .map(|(fr, &d)| {
            log::debug!("cumulants at {fr:?}, dimension {d}");
            frame_cumulants(&base, d, fr, &f, &cfg.orders)
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new("cumulants", vec!["n", "alpha", "x0", "m", "value", "trunc_err"])
        .with_plot("set logscale x\nplot for [m in '1 2 3 4'] file using ($4 == m ? $1 : 1/0):5 with linespoints title 'C_'.m");
    for rep in &reports {
        for (i, &m) in rep.m_values.iter().enumerate() {
            let mut row = frame_cells(&rep.frame);
            row.extend([m.to_string(), float(rep.values[i]), float(rep.truncation_error[i])]);
            t.push(row);
        }
    }
    Ok(vec![t])
}

fn compare(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let target = cfg.target.as_ref().ok_or_else(|| CliError::validation("target.kind", "compare needs a target weight"))?;
    let poles = poles_for(&cfg.f)?;
    let f: TestFunction = poles.clone().into();
    let dims = dimensions(&[&cfg.weight, target], &cfg.frames, &poles)?;
    let max = *dims.iter().max().unwrap();
    let base_a = base_operator(&cfg.weight, max, "weight")?;
    let base_b = base_operator(target, max, "target")?;
    let rows: Vec<Vec<Vec<String>>> = cfg
        .frames
        .par_iter()
        .zip(&dims)
        .map(|(fr, &d)| {
            let a = base_a.clone().with_dim(d).map_err(|e| CliError::core(e, "weight"))?;
            let b = base_b.clone().with_dim(d).map_err(|e| CliError::core(e, "target"))?;
            cfg.compare_orders
                .iter()
                .map(|&m| {
                    let r = cumulant_difference(&a, &b, fr, &f, m, cfg.compare).map_err(|e| CliError::core(e, "compare.orders"))?;
                    let mut row = frame_cells(fr);
                    row.extend([
                        m.to_string(),
                        float(r.value_a),
                        float(r.value_b),
                        float(r.diff),
                        r.trace_norm_diag.map(float).unwrap_or_default(),
                    ]);
                    Ok(row)
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new("compare", vec!["n", "alpha", "x0", "m", "value_a", "value_b", "diff", "trace_norm_diag"])
        .with_plot("set logscale xy\nplot file using 1:(abs($7)) with linespoints title '|diff|'");
    rows.into_iter().flatten().for_each(|r| t.push(r));
    Ok(vec![t])
}

fn free_identities(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let s = &cfg.identities;
    let poles = poles_for(&cfg.f)?;
    let phi = pole_symbol(s.x0, poles.poles(), poles.coefficients(), s.n, s.alpha).map_err(|e| CliError::core(e, "identities"))?;
    log::info!("symbol cutoff {}", phi.cutoff());
    let cases: Vec<(usize, Option<f64>)> =
        s.sizes.iter().flat_map(|&size| std::iter::once((size, None)).chain(s.t.iter().map(move |&t| (size, Some(t))))).collect();
    let rows: Vec<Vec<Vec<String>>> = cases
        .par_iter()
        .map(|&(size, t)| {
            let row = |name: &str, t: f64, r: f64, a: f64| vec![name.to_string(), size.to_string(), float(t), float(r), float(a)];
            match t {
                None => {
                    let p = product_identity_check(&phi, &phi.reflected(), size);
                    let c = commutator_check(&phi, size);
                    let tn = trace_norm_bound_check(&phi, size);
                    Ok(vec![
                        row("product", 0.0, p.residual, p.allowance.max(s.tol)),
                        row("commutator", 0.0, c.residual, c.allowance.max(s.tol)),
                        row("trace_norm", 0.0, tn.trace_norm, tn.bound),
                    ])
                }
                Some(t) => {
                    let ex = ExponentialFactors::new(&phi, t, size);
                    let e = ex.ehrhardt();
                    let d = ex.determinant_identity(size / 2).map_err(|e| CliError::core(e, "identities.sizes"))?;
                    Ok(vec![row("ehrhardt", t, e.residual, e.allowance.max(s.tol)), row("determinant", t, d.residual(), s.tol)])
                }
            }
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new("identities", vec!["identity", "size", "t", "residual", "allowance"])
        .with_plot("set logscale y\nset style data points\nplot file using 0:4 title 'residual', file using 0:5 title 'allowance'");
    rows.into_iter().flatten().for_each(|r| t.push(r));
    Ok(vec![t])
}

fn variance_limit(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new("variance", vec!["description", "value", "method"]);
    let row = |d: &str, v: f64, m: &str| vec![d.to_string(), float(v), m.to_string()];
    let mut out = Vec::new();
    match &cfg.f {
        TestFunction::PoleCombination(p) => {
            let closed = sigma_poles_closed(p.poles(), p.coefficients()).map_err(|e| CliError::core(e, "f"))?;
            let quad = sigma_quadrature(&cfg.f).map_err(|e| CliError::core(e, "f"))?;
            let bil = sigma_bilinear(p).map_err(|e| CliError::core(e, "f"))?;
            t.push(row("sigma^2", closed, "closed_form"));
            t.push(row("sigma^2", quad, "quadrature"));
            t.push(row("sigma^2", bil, "pairwise_quadrature"));
        }
        TestFunction::SampledC1(s) => {
            let fit = fit_best(s, FIT_TRANSLATES, DEFAULT_DELTA).map_err(|e| CliError::core(e, "f.path"))?;
            let quad = sigma_quadrature(&cfg.f).map_err(|e| CliError::core(e, "f.path"))?;
            let closed = sigma_poles_closed(fit.poles.poles(), fit.poles.coefficients()).map_err(|e| CliError::core(e, "f.path"))?;
            t.push(row("sigma^2", quad, "quadrature"));
            t.push(row("sigma^2 of the smoothed fit", closed, "closed_form"));
            t.push(row("fit residual", fit.residual, "trapezoid"));
            let mut ft = Table::new("fit", vec!["c", "re_eta", "im_eta"]);
            for (&c, e) in fit.poles.coefficients().iter().zip(fit.poles.poles()) {
                ft.push(vec![float(c), float(e.re), float(e.im)]);
            }
            out.push(ft);
        }
    }
    out.insert(0, t);
    Ok(out)
}

fn sample(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let s = &cfg.sample;
    if let Some(fr) = cfg.frames.iter().find(|fr| fr.n > MAX_SAMPLE_N) {
        return Err(CliError::validation("frame.n", format!("{} exceeds the sampler limit {MAX_SAMPLE_N}", fr.n)));
    }
    let mut stats = Table::new("stats", vec!["m", "estimate", "stderr", "n", "alpha", "x0", "reference"])
        .with_plot("plot file using 1:2:3 with yerrorbars title 'estimate', file using 1:7 with points title 'reference'");
    let mut batch_table = Table::new("batch", vec!["n", "alpha", "x0", "sample", "positions"]);
    batch_table.ragged = true;
    let poles = poles_for(&cfg.f)?;
    let dims = dimensions(&[&cfg.weight], &cfg.frames, &poles)?;
    for (i, (fr, &dim)) in cfg.frames.iter().zip(&dims).enumerate() {
        let coeffs = generate_recurrence(&cfg.weight, fr.n).map_err(|e| CliError::core(e, "weight"))?;
        let grid = QuadratureGrid::for_weight(&cfg.weight, s.nodes * fr.n).map_err(|e| CliError::core(e, "sample.nodes"))?;
        let kernel = cd_kernel(&coeffs, fr.n, &grid).map_err(|e| CliError::core(e, "sample.nodes"))?;
        let seed = cfg.seed.wrapping_add(i as u64);
        let batch = sample_dpp(&kernel, s.count, seed).map_err(|e| CliError::core(e, "sample.count"))?;
        let emp = empirical_cumulants(&batch, &cfg.f, fr, s.max_m).map_err(|e| CliError::core(e, "sample.max_m"))?;
        let base = base_operator(&cfg.weight, dim, "weight")?;
        let orders: Vec<usize> = (1..=s.max_m).collect();
        let reference = frame_cumulants(&base, dim, fr, &poles.clone().into(), &orders)?;
        for (k, &m) in emp.m_values.iter().enumerate() {
            let mut row = vec![m.to_string(), float(emp.values[k]), float(emp.standard_errors[k])];
            row.extend(frame_cells(fr));
            row.push(float(reference.values[k]));
            stats.push(row);
        }
        for (j, conf) in batch.samples.iter().enumerate() {
            let mut row = frame_cells(fr);
            row.push(j.to_string());
            row.extend(conf.iter().map(|&x| float(x)));
            batch_table.push(row);
        }
    }
    Ok(vec![stats, batch_table])
}
