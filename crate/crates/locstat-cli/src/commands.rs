use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use locstat::empirical::{stationarity_statistic, default_grids, stationarity_test, StationarityConfig};
use locstat::io::{read_model, read_series, write_series, ModelFile};
use locstat::likelihood::{
    block_whittle_fit, exact_mle_fit, generalized_whittle_fit, local_conditional_fit, local_whittle_fit,
    matrix_approximation_gap, model_scan, szego_check, BlockWhittleConfig, ConditionalFamily, CurveModel, PolyTvAr,
};
use locstat::local::{local_yule_walker, LocalWindow};
use locstat::model::simulate as simulate_model;
use locstat::spectral::{linspace, smoothed_tv_spectrum, SmoothingConfig, SpectralGrid};
use locstat::{Error, Kernel, Taper, TvModelSpec};

use crate::{
    FitArgs, MatrixArgs, Method, SimulateArgs, SpectrumArgs, StationarityArgs, EXIT_DATA, EXIT_NOT_CONVERGED, EXIT_USAGE,
};

/// Library errors map to the exit-code contract; anything else is a usage error.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Window(_)
            | Error::Segmentation(_)
            | Error::Rank { .. }
            | Error::Domain(_)
            | Error::Definiteness(_)
            | Error::NearStationary(_)
            | Error::NearFlat(_),
        ) => EXIT_DATA,
        _ => EXIT_USAGE,
    }
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_model(path: &Path) -> Result<(ModelFile, TvModelSpec)> {
    let file = read_model(path).with_context(|| format!("reading model {}", path.display()))?;
    let spec = file.to_spec().with_context(|| format!("invalid model {}", path.display()))?;
    Ok((file, spec))
}

/// Data with its sample mean removed, and that mean.
fn load_series(path: &Path) -> Result<(Vec<f64>, f64)> {
    let r = read_series(path).with_context(|| format!("reading series {}", path.display()))?;
    let mean = r.mean();
    Ok((r.demeaned().values, mean))
}

pub fn simulate(a: &SimulateArgs) -> Result<u8> {
    let (mut file, spec) = load_model(&a.model)?;
    let t_len = match a.t_len.or(file.t_len.map(|t| t as i64)) {
        Some(t) if t >= 1 => t as usize,
        Some(t) => bail!("sample size T must be positive, got {t}"),
        None => bail!("sample size missing: pass --T or set \"T\" in the model file"),
    };
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let r = simulate_model(&spec, t_len, seed)?;
    out_dir(&a.output.out)?;
    let mut w = create(&a.output.out.join("series.csv"))?;
    write_series(&mut w, &r.values, true)?;
    w.flush()?;
    file.seed = Some(seed);
    file.t_len = Some(t_len);
    write_json(&a.output.out.join("model.json"), &file)?;
    println!("wrote {} values (seed {seed}) to {}", t_len, a.output.out.display());
    Ok(0)
}

fn padded_orders(orders: &[usize], p: usize) -> Vec<usize> {
    (0..p).map(|j| orders.get(j).copied().unwrap_or(0)).collect()
}

fn write_curves(path: &Path, p: usize, rows: &[(f64, Vec<f64>, f64)]) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "u")?;
    for j in 1..=p {
        write!(w, ",alpha{j}")?;
    }
    writeln!(w, ",sigma2")?;
    for (u, alpha, s2) in rows {
        write!(w, "{u}")?;
        for a in alpha {
            write!(w, ",{a}")?;
        }
        writeln!(w, ",{s2}")?;
    }
    w.flush()?;
    Ok(())
}

fn u_grid(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        bail!("--grid-u must be positive");
    }
    Ok(if n == 1 { vec![0.5] } else { linspace(0.0, 1.0, n) })
}

pub fn fit(a: &FitArgs) -> Result<u8> {
    let (x, data_mean) = load_series(&a.input)?;
    let kernel = Kernel::from_name(&a.kernel)?;
    let taper = Taper::from_name(&a.taper)?;
    let grid = u_grid(a.grid_u)?;
    out_dir(&a.output.out)?;
    let out = &a.output.out;
    if a.p == 0 && a.method != Method::BlockWhittle {
        bail!("--p must be at least 1");
    }
    let local_rows = |fits: &[(f64, Vec<f64>, f64)], method: &str, details: serde_json::Value| -> Result<()> {
        write_curves(&out.join("curves.csv"), a.p, fits)?;
        write_json(
            &out.join("fit.json"),
            &json!({ "method": method, "data_mean": data_mean, "u": grid, "fits": details }),
        )
    };
    match a.method {
        Method::LocalYw => {
            let window = match (a.b, a.n) {
                (Some(b), _) => LocalWindow::kernel(b, kernel),
                (None, Some(n)) => LocalWindow::taper(n, taper),
                (None, None) => bail!("local-yw needs --b or --N"),
            };
            let fits = grid
                .iter()
                .map(|&u| local_yule_walker(&x, u, a.p, &window))
                .collect::<locstat::Result<Vec<_>>>()?;
            let rows: Vec<_> = fits.iter().map(|f| (f.u0, f.alpha.clone(), f.sigma2)).collect();
            local_rows(&rows, "local-yw", serde_json::to_value(&fits)?)?;
            Ok(0)
        }
        Method::LocalWhittle => {
            let Some(n) = a.n else { bail!("local-whittle needs --N") };
            let model = PolyTvAr::stationary(a.p);
            let fits = grid
                .iter()
                .map(|&u| local_whittle_fit(&x, u, &model, n, &taper, None))
                .collect::<locstat::Result<Vec<_>>>()?;
            let rows: Vec<_> = grid
                .iter()
                .zip(&fits)
                .map(|(&u, f)| (u, f.eta[..a.p].to_vec(), f.eta[a.p]))
                .collect();
            local_rows(&rows, "local-whittle", serde_json::to_value(&fits)?)?;
            Ok(if fits.iter().all(|f| f.converged) { 0 } else { EXIT_NOT_CONVERGED })
        }
        Method::LocalConditional => {
            let Some(b) = a.b else { bail!("local-conditional needs --b") };
            let fits = grid
                .iter()
                .map(|&u| local_conditional_fit(&x, u, b, &kernel, ConditionalFamily::TvAr { p: a.p }, a.degree))
                .collect::<locstat::Result<Vec<_>>>()?;
            let rows: Vec<_> = grid
                .iter()
                .zip(&fits)
                .map(|(&u, f)| (u, f.eta[..a.p].to_vec(), f.eta[a.p]))
                .collect();
            local_rows(&rows, "local-conditional", serde_json::to_value(&fits)?)?;
            Ok(0)
        }
        Method::BlockWhittle | Method::Gw | Method::Mle => {
            let model = if a.method == Method::BlockWhittle && a.scan {
                let (Some(n), Some(s)) = (a.n, a.s) else { bail!("block-whittle needs --N and --S") };
                let cfg = BlockWhittleConfig::new(n, s).with_taper(taper.clone());
                let k1 = a.orders.first().copied().unwrap_or(0);
                let k_rest = a.orders.get(1).copied().unwrap_or(0);
                let scan = model_scan(&x, a.p, k1, k_rest, &cfg);
                let mut w = create(&out.join("aic.csv"))?;
                scan.write_csv(&mut w)?;
                w.flush()?;
                let Some(best) = scan.best_row() else { bail!(Error::Rank { cond: f64::INFINITY }) };
                println!("selected p = {}, K1 = {}, K_rest = {}", best.p, best.k1, best.k_rest);
                PolyTvAr::new((0..best.p).map(|j| if j == 0 { best.k1 } else { best.k_rest }).collect())
            } else {
                if a.p == 0 {
                    bail!("--p must be at least 1");
                }
                PolyTvAr::new(padded_orders(&a.orders, a.p))
            };
            let fit = match a.method {
                Method::BlockWhittle => {
                    let (Some(n), Some(s)) = (a.n, a.s) else { bail!("block-whittle needs --N and --S") };
                    block_whittle_fit(&x, &model, &BlockWhittleConfig::new(n, s).with_taper(taper))?
                }
                Method::Gw => generalized_whittle_fit(&x, &model, None)?,
                _ => exact_mle_fit(&x, &model, None)?,
            };
            let rows: Vec<_> = grid
                .iter()
                .map(|&u| {
                    let th = model.theta(&fit.eta, u);
                    (u, th.alpha, th.sigma2)
                })
                .collect();
            write_curves(&out.join("curves.csv"), model.order(), &rows)?;
            let mut v = fit.to_json();
            v["data_mean"] = json!(data_mean);
            v["orders"] = json!(model.orders);
            write_json(&out.join("fit.json"), &v)?;
            if fit.converged {
                Ok(0)
            } else {
                eprintln!("optimizer did not converge; partial result written");
                Ok(EXIT_NOT_CONVERGED)
            }
        }
    }
}

pub fn spectrum(a: &SpectrumArgs) -> Result<u8> {
    if a.grid_u == 0 || a.grid_l < 2 {
        bail!("--grid-u must be positive and --grid-l at least 2");
    }
    let u = u_grid(a.grid_u)?;
    let lambda = linspace(0.0, std::f64::consts::PI, a.grid_l);
    let truth = match &a.model {
        Some(p) => {
            let (_, spec) = load_model(p)?;
            Some(SpectralGrid::truth(&spec, &u, &lambda)?)
        }
        None => None,
    };
    out_dir(&a.output.out)?;
    let out = &a.output.out;
    let main = match &a.input {
        Some(path) => {
            let (x, _) = load_series(path)?;
            let mut cfg = if a.pre_periodogram {
                SmoothingConfig::pre_periodogram(a.bt, a.bf)
            } else {
                SmoothingConfig::segment(a.bt, a.bf)
            };
            cfg.taper = Taper::from_name(&a.taper)?;
            cfg.time_kernel = cfg.taper.induced_kernel();
            cfg.freq_kernel = Kernel::from_name(&a.kernel)?;
            smoothed_tv_spectrum(&x, &u, &lambda, &cfg)?
        }
        None => match &truth {
            Some(t) => t.clone(),
            None => bail!("spectrum needs --input, --model, or both"),
        },
    };
    let mut w = create(&out.join("spectrum.csv"))?;
    match (&a.input, &truth) {
        (Some(_), Some(t)) => {
            let diff = SpectralGrid {
                values: main
                    .values
                    .iter()
                    .zip(&t.values)
                    .map(|(r, s)| r.iter().zip(s).map(|(a, b)| a - b).collect())
                    .collect(),
                ..t.clone()
            };
            main.write_csv(&mut w, &[("ftrue", t), ("diff", &diff)])?;
        }
        _ => main.write_csv(&mut w, &[])?,
    }
    w.flush()?;
    let mut header = main.header_json();
    header["ridge"] = json!(main.ridge());
    write_json(&out.join("spectrum.json"), &header)?;
    Ok(0)
}

pub fn test_stationarity(a: &StationarityArgs) -> Result<u8> {
    if a.reps < 100 {
        bail!("calibration needs --reps >= 100, got {}", a.reps);
    }
    if a.grid_u == 0 || a.grid_l == 0 {
        bail!("--grid-u and --grid-l must be positive");
    }
    let (x, _) = load_series(&a.input)?;
    let cfg = StationarityConfig::default()
        .with_grid(a.grid_u, a.grid_l)
        .with_reps(a.reps)
        .with_seed(a.seed);
    let report = stationarity_test(&x, &cfg)?;
    let refinement = a
        .refine
        .iter()
        .filter(|&&r| r > 0)
        .map(|&r| {
            let (ug, lg) = default_grids(a.grid_u * r, a.grid_l * r);
            stationarity_statistic(&x, &ug, &lg)
                .map(|s| json!({ "grid_u": ug.len(), "grid_lambda": lg.len(), "statistic": s.value }))
        })
        .collect::<locstat::Result<Vec<_>>>()?;
    out_dir(&a.output.out)?;
    let mut v = serde_json::to_value(&report)?;
    if !refinement.is_empty() {
        v["refinement"] = json!(refinement);
    }
    write_json(&a.output.out.join("stationarity.json"), &v)?;
    print!("{}", report.verdict_table());
    Ok(0)
}

pub fn matrix_check(a: &MatrixArgs) -> Result<u8> {
    let (_, spec) = load_model(&a.model)?;
    if a.t_grid.is_empty() || a.t_grid.contains(&0) {
        bail!("--T needs positive sample sizes");
    }
    out_dir(&a.output.out)?;
    let mut w = create(&a.output.out.join("matrix_check.csv"))?;
    writeln!(w, "T,gap,gap_times_T,log_det,integral,residual")?;
    for &t in &a.t_grid {
        let gap = matrix_approximation_gap(&spec, t)?;
        let s = szego_check(&spec, t)?;
        writeln!(w, "{t},{gap},{},{},{},{}", gap * t as f64, s.log_det, s.integral, s.residual)?;
    }
    w.flush()?;
    Ok(0)
}
