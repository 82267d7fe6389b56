use chaoskit::assumptions::{check_all, estimate_beta, AssumptionReport};
use chaoskit::chaos::GaussianSample;
use chaoskit::kernels::{uniform_grid, KernelFamily, PathSampler};
use chaoskit::nondegen::{
    alpha_at_grid, norris_check, sde_density_experiment, verify_corollary_bounds, verify_dx_in_f,
    verify_energy_identity, verify_interpolation, verify_nonvanishing, verify_uniform_bound, CorollaryOptions,
    EnergyOptions, Integrand, NorrisOptions, PathOptions, Report, SdeOptions,
};
use chaoskit::stats::derive_seed;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Auto, ExperimentConfig, FloorSpec};
use crate::output::{OutDir, Plot};

type Outcome = Result<bool, String>;

const NORRIS_TAG: u64 = 0x4e0;

fn err(e: chaoskit::Error) -> String {
    e.to_string()
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn family_meta(fam: &KernelFamily) -> Value {
    json!({
        "name": fam.name(),
        "order": fam.order(),
        "dim": fam.dim(),
        "theta": fam.theta(),
        "rho": fam.rho(),
        "covariance_floor": fam.covariance_floor(),
    })
}

fn run_meta(cfg: &ExperimentConfig, fam: &KernelFamily) -> Value {
    json!({
        "family": family_meta(fam),
        "seed": cfg.seed,
        "grid": cfg.grid,
        "samples": cfg.samples,
    })
}

pub fn check(cfg: &ExperimentConfig, out: &mut OutDir) -> Outcome {
    let fam = cfg.family()?;
    let report: AssumptionReport = check_all(&fam, &cfg.check_options(&fam)).map_err(err)?;
    println!("assumptions for {} (n = {}, d = {})", fam.name(), fam.order(), fam.dim());
    let rows = [
        ("regularity: theta", report.regularity.result.theta, report.regularity.result.pass),
        ("regularity: min increment", report.regularity.result.min_norm, report.regularity.result.pass),
        ("alpha", report.alpha.result.value, report.alpha.result.pass),
        ("beta", report.beta.result.value, report.beta.result.pass),
        ("row sums: min", report.row_sums.result.min, report.row_sums.result.pass),
    ];
    for (name, value, pass) in rows {
        println!("  {name:<28} {value:>12.6}  {}", verdict(pass));
    }
    out.json("check.json", &report)?;
    Ok(report.pass)
}

#[derive(Serialize)]
struct Suite {
    suite: &'static str,
    reports: Vec<Value>,
    skipped: Vec<String>,
    pass: bool,
}

impl Suite {
    fn new(suite: &'static str) -> Self {
        Suite {
            suite,
            reports: Vec::new(),
            skipped: Vec::new(),
            pass: true,
        }
    }

    fn add<D: Serialize>(&mut self, label: &str, r: &Report<D>) -> Result<(), String> {
        println!(
            "  {:<14} {:<10} {}  lhs {:.6e}  rhs {:.6e}  slack {:.6e}",
            self.suite,
            label,
            verdict(r.pass),
            r.lhs,
            r.rhs,
            r.slack
        );
        self.pass &= r.pass;
        self.reports.push(serde_json::to_value(r).map_err(|e| e.to_string())?);
        Ok(())
    }
}

fn nonzero_deterministic(g: &Integrand) -> bool {
    g.is_deterministic() && !matches!(g, Integrand::Constant { value } if *value == 0.0)
}

fn table_csv<D: Serialize>(out: &mut OutDir, name: &str, r: &Report<D>) -> Result<(), String> {
    match &r.table {
        Some(t) => out.csv(name, &t.columns, &t.rows),
        None => Ok(()),
    }
}

pub fn verify(cfg: &ExperimentConfig, out: &mut OutDir) -> Outcome {
    let fam = cfg.family()?;
    let v = &cfg.verify;
    let wants = |s: &str| v.suites.iter().any(|x| x == s);
    let per_g = |pick: fn(&Integrand) -> bool| -> (Vec<&Integrand>, Vec<String>) {
        let (a, b): (Vec<&Integrand>, Vec<&Integrand>) = v.integrands.iter().partition(|g| pick(g));
        (a, b.into_iter().map(|g| g.label()).collect())
    };
    let paths = PathOptions {
        grid: cfg.grid,
        n_samples: cfg.samples,
        seed: cfg.seed,
    };
    println!("verifying {} on a grid of {} steps", fam.name(), cfg.grid);

    let mut constants = serde_json::Map::new();
    let beta = if wants("interpolation") || wants("corollary") {
        match v.beta {
            Auto::Value(b) => b,
            Auto::Auto => {
                let configs = cfg.check_options(&fam).sampler.configs();
                let est = estimate_beta(&fam, &configs, cfg.check.rank_tol).map_err(err)?;
                constants.insert("beta".into(), serde_json::to_value(&est).map_err(|e| e.to_string())?);
                est.value
            }
        }
    } else {
        f64::NAN
    };

    let mut suites = Vec::new();
    for name in crate::config::ALL_SUITES.iter().filter(|s| wants(s)) {
        let mut suite = Suite::new(name);
        match *name {
            "energy" => {
                let (gs, skipped) = per_g(nonzero_deterministic);
                suite.skipped = skipped;
                let opts = EnergyOptions {
                    identity_points: v.identity_points,
                    grid: cfg.grid,
                    n_samples: cfg.samples,
                    seed: cfg.seed,
                };
                for g in gs {
                    suite.add(&g.label(), &verify_energy_identity(&fam, g, &opts).map_err(err)?)?;
                }
            }
            "interpolation" => {
                let (gs, skipped) = per_g(nonzero_deterministic);
                suite.skipped = skipped;
                for g in gs {
                    suite.add(&g.label(), &verify_interpolation(&fam, g, beta, cfg.grid).map_err(err)?)?;
                }
            }
            "corollary" => {
                let (gs, skipped) = per_g(nonzero_deterministic);
                suite.skipped = skipped;
                let floor_points = match cfg.floor {
                    FloorSpec::Fit { points, .. } => points,
                    _ => 33,
                };
                let opts = CorollaryOptions {
                    grid: cfg.grid,
                    floor_points,
                    n_samples: cfg.samples,
                    seed: cfg.seed,
                };
                for g in gs {
                    suite.add(&g.label(), &verify_corollary_bounds(&fam, g, beta, &opts).map_err(err)?)?;
                }
            }
            "uniform" => {
                let alpha = match v.alpha {
                    Auto::Value(a) => a,
                    Auto::Auto => {
                        let est = alpha_at_grid(&fam, cfg.grid, cfg.check.rank_tol).map_err(err)?;
                        constants.insert("alpha".into(), serde_json::to_value(&est).map_err(|e| e.to_string())?);
                        est.value
                    }
                };
                let r = verify_uniform_bound(&fam, &v.integrands, alpha, &paths).map_err(err)?;
                table_csv(out, "verify_uniform.csv", &r)?;
                suite.add("all", &r)?;
            }
            "nonvanishing" => {
                let r = verify_nonvanishing(&fam, &v.integrands, &paths).map_err(err)?;
                table_csv(out, "verify_nonvanishing.csv", &r)?;
                suite.add("all", &r)?;
            }
            "dx_in_f" => {
                let r = verify_dx_in_f(&fam, &paths, v.controls).map_err(err)?;
                table_csv(out, "verify_dx_in_f.csv", &r)?;
                suite.add("all", &r)?;
            }
            "norris" => {
                let grid = uniform_grid(cfg.grid);
                let z = GaussianSample::draw(fam.dim(), derive_seed(cfg.seed, NORRIS_TAG), 0);
                let path = PathSampler::new(&fam, &grid).and_then(|s| s.sample(&z)).map_err(err)?;
                for g in &v.integrands {
                    let values = g.values(&grid, Some(&path.x)).map_err(err)?;
                    let mut opts = NorrisOptions::new(v.nu, g.tau(fam.rho()), fam.rho());
                    if let Some(e) = &v.epsilons {
                        opts.epsilons = e.clone();
                    }
                    suite.add(&g.label(), &norris_check(&path.dx, &grid, &values, &opts).map_err(err)?)?;
                }
            }
            _ => unreachable!("suite names are validated with the config"),
        }
        suites.push(suite);
    }
    let pass = suites.iter().all(|s| s.pass);
    let mut doc = run_meta(cfg, &fam);
    doc["constants"] = Value::Object(constants);
    doc["suites"] = serde_json::to_value(&suites).map_err(|e| e.to_string())?;
    doc["pass"] = json!(pass);
    out.json("verify.json", &doc)?;
    Ok(pass)
}

pub fn sde(cfg: &ExperimentConfig, out: &mut OutDir) -> Outcome {
    let fam = cfg.family()?;
    let fields = cfg.fields()?;
    let y0 = cfg.y0(fields.dim())?;
    let opts = SdeOptions {
        t: cfg.sde.t,
        grid: cfg.grid,
        n_samples: cfg.samples,
        seed: cfg.seed,
        ellipticity_floor: cfg.sde.ellipticity_floor,
        spot_checks: cfg.sde.spot_checks,
        density: cfg.density_options(),
    };
    let r = sde_density_experiment(&fam, &fields, &y0, &opts).map_err(err)?;
    println!(
        "sde {} driven by {}: min lambda {:.6e}, {}",
        fields.name(),
        fam.name(),
        r.detail.min_eigenvalue,
        verdict(r.pass)
    );
    for (c, d) in r.detail.density.iter().enumerate() {
        println!("  density Y_{}: {}", c + 1, verdict(d.pass));
    }
    if let Some(note) = &r.detail.note {
        println!("  note: {note}");
    }
    let mut doc = run_meta(cfg, &fam);
    doc["report"] = serde_json::to_value(&r).map_err(|e| e.to_string())?;
    out.json("sde.json", &doc)?;
    table_csv(out, "sde_samples.csv", &r)?;
    if cfg.svg {
        for (c, d) in r.detail.density.iter().enumerate() {
            let plot = Plot {
                title: format!("KDE of Y_{} at t = {}", c + 1, cfg.sde.t),
                x_label: format!("Y_{}", c + 1),
                series: vec![(format!("h = {:.4}", d.silverman_bandwidth), d.curve.clone())],
            };
            out.svg(&format!("density_Y{}.svg", c + 1), &plot)?;
        }
    }
    Ok(r.pass)
}

pub fn simulate(cfg: &ExperimentConfig, out: &mut OutDir) -> Outcome {
    let fam = cfg.family()?;
    let grid = uniform_grid(cfg.grid);
    let sampler = PathSampler::new(&fam, &grid).map_err(err)?;
    let d = fam.dim();
    let mut header = vec!["t".to_string(), "X".to_string()];
    header.extend((1..=d).map(|j| format!("DX_{j}")));
    let width = (cfg.samples - 1).to_string().len();
    let mut files = Vec::with_capacity(cfg.samples);
    let mut x_end = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let path = sampler.sample(&GaussianSample::draw(d, cfg.seed, i as u64)).map_err(err)?;
        let rows: Vec<Vec<f64>> = (0..grid.len())
            .map(|k| {
                let mut row = vec![grid[k], path.x[k]];
                row.extend(path.dx[k].iter());
                row
            })
            .collect();
        let name = if cfg.samples == 1 {
            "path.csv".to_string()
        } else {
            format!("path_{i:0width$}.csv")
        };
        out.csv(&name, &header, &rows)?;
        files.push(name);
        x_end.push(path.x[cfg.grid]);
        if cfg.svg && i == 0 {
            let mut series = vec![("X".to_string(), grid.iter().copied().zip(path.x.iter().copied()).collect())];
            for j in 0..d.min(4) {
                series.push((format!("DX_{}", j + 1), grid.iter().map(|&t| t).zip(path.dx.iter().map(|v| v[j])).collect()));
            }
            out.svg(
                "path.svg",
                &Plot {
                    title: format!("{} sample path", fam.name()),
                    x_label: "t".into(),
                    series,
                },
            )?;
        }
    }
    println!("simulated {} path(s) of {} on {} steps", cfg.samples, fam.name(), cfg.grid);
    let mut doc = run_meta(cfg, &fam);
    doc["files"] = json!(files);
    doc["x_at_1"] = json!(x_end);
    out.json("simulate.json", &doc)?;
    Ok(true)
}
