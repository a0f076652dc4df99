use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use sbtm::evalkit::{group_size_trajectories, groups_per_frame, median, nmi_per_frame, plugin_estimates};
use sbtm::genmodel::{sample_params, simulate as run_simulation, without_inactivity, ParamSource};
use sbtm::greedy::{fit as run_fit, FitConfig, InitMethod};
use sbtm::icl::{log_icl_full, HyperScalars, Hyperparameters};
use sbtm::io;
use sbtm::netcube::{discretize, AdjacencyCube};
use sbtm::rng::derive_seed;
use sbtm::suffstats::{compute_stats, AllocationMatrix};

use crate::manifest::Manifest;
use crate::{EvaluateArgs, FitArgs, IclArgs, Init, SimulateArgs};

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn hyper_scalars(path: Option<&Path>) -> Result<HyperScalars> {
    match path {
        Some(p) => io::read_hyper_overrides(p, HyperScalars::default()).with_context(|| format!("reading {}", show(p))),
        None => Ok(HyperScalars::default()),
    }
}

fn record_scalars(m: &mut Manifest, s: &HyperScalars) {
    m.set("delta", s.delta);
    m.set("eta0", s.eta0);
    m.set("zeta0", s.zeta0);
    m.set("a_p", s.a_p);
    m.set("b_p", s.b_p);
    m.set("a_q", s.a_q);
    m.set("b_q", s.b_q);
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", show(dir)))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", show(path)))
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut m = Manifest::new("simulate");
    m.set("n", a.n);
    m.set("t", a.t);
    m.set("seed", a.seed);
    m.set("no_inactive", a.no_inactive);
    let source = match (&a.params, a.k) {
        (Some(path), _) => {
            let params = io::read_params(path, a.stay).with_context(|| format!("reading {}", show(path)))?;
            m.set("params", show(path));
            m.set("stay", a.stay);
            ParamSource::Fixed(if a.no_inactive { without_inactivity(&params) } else { params })
        }
        (None, Some(k)) => {
            let scalars = hyper_scalars(a.hyper.as_deref())?;
            m.set("k", k);
            m.set_opt("hyper", a.hyper.as_deref().map(show));
            record_scalars(&mut m, &scalars);
            let hyper = Hyperparameters::from_scalars(k, scalars);
            if a.no_inactive {
                let drawn = sample_params(k, &hyper, derive_seed(a.seed, 0))?;
                ParamSource::Fixed(without_inactivity(&drawn))
            } else {
                ParamSource::Prior { k, hyper }
            }
        }
        (None, None) => bail!("either --k or --params is required"),
    };
    let started = Instant::now();
    let out = run_simulation(a.n, a.t, &source, a.seed)?;
    let seconds = started.elapsed().as_secs_f64();

    create_dir(&a.out)?;
    io::write_cube(&a.out.join("cube.txt"), &out.cube)?;
    io::write_activity(&a.out.join("activity.txt"), out.cube.activity())?;
    io::write_allocation(&a.out.join("z_true.csv"), &out.z_true)?;
    io::write_params(&a.out.join("params.txt"), &out.params)?;
    m.set("edges", out.cube.n_edges());
    m.set("inactive_fraction", out.cube.activity().inactive_fraction());
    m.set("wall_time", seconds);
    m.write(&a.out)?;
    println!("n={} t={} edges={} seconds={}", a.n, a.t, out.cube.n_edges(), seconds);
    Ok(())
}

fn load_cube(a: &FitArgs, m: &mut Manifest) -> Result<(AdjacencyCube, Option<Vec<String>>)> {
    if let Some(path) = &a.cube {
        m.set("cube", show(path));
        m.set_opt("activity", a.activity.as_deref().map(show));
        let cube = io::read_cube(path, a.activity.as_deref()).with_context(|| format!("reading {}", show(path)))?;
        return Ok((cube, None));
    }
    let (Some(path), Some(width)) = (&a.edges, a.frame_width) else {
        bail!("either --cube or --edges with --frame-width is required");
    };
    m.set("edges", show(path));
    m.set("frame_width", width);
    let parsed = io::read_edge_list(path).with_context(|| format!("reading {}", show(path)))?;
    let cube = discretize(&parsed.events, width)?;
    Ok((cube, Some(parsed.ids)))
}

fn trajectories_csv(z: &AllocationMatrix) -> String {
    let m = group_size_trajectories(z);
    let mut s = String::from("frame,inactive");
    for g in 1..m.rows() {
        let _ = write!(s, ",group_{g}");
    }
    s.push('\n');
    for t in 0..m.cols() {
        let _ = write!(s, "{t}");
        for g in 0..m.rows() {
            let _ = write!(s, ",{}", m[(g, t)]);
        }
        s.push('\n');
    }
    s
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let mut m = Manifest::new("fit");
    let (cube, ids) = load_cube(a, &mut m)?;
    let scalars = hyper_scalars(a.hyper.as_deref())?;
    let config = FitConfig {
        k_up: a.kup,
        n_restarts: a.restarts,
        init_method: match a.init {
            Init::Random => InitMethod::Random,
            Init::Kmeans => InitMethod::KmeansProfile,
        },
        seed: a.seed,
        max_sweeps: a.max_sweeps,
        resweep_after_merge: a.resweep_after_merge,
        threads: a.threads,
    };
    config.validate()?;
    m.set("n", cube.n_nodes());
    m.set("t", cube.n_frames());
    m.set("k_up", a.kup);
    m.set("restarts", a.restarts);
    m.set("seed", a.seed);
    m.set("init", format!("{:?}", a.init).to_lowercase());
    m.set("max_sweeps", a.max_sweeps);
    m.set("resweep_after_merge", a.resweep_after_merge);
    m.set_opt("hyper", a.hyper.as_deref().map(show));
    record_scalars(&mut m, &scalars);
    let hyper = Hyperparameters::from_scalars(a.kup, scalars);

    let started = Instant::now();
    let result = run_fit(&cube, &hyper, &config)?;
    let seconds = started.elapsed().as_secs_f64();

    create_dir(&a.out)?;
    if let Some(ids) = ids {
        io::write_cube(&a.out.join("cube.txt"), &cube)?;
        io::write_activity(&a.out.join("activity.txt"), cube.activity())?;
        let listing: String = ids.iter().enumerate().map(|(k, id)| format!("{k} {id}\n")).collect();
        write_text(&a.out.join("nodes.txt"), &listing)?;
    }
    io::write_allocation(&a.out.join("z_hat.csv"), &result.z_hat)?;
    let est = plugin_estimates(&compute_stats(&cube, &result.z_hat)?);
    write_text(&a.out.join("theta_hat.csv"), &io::format_matrix(&est.theta_hat))?;
    write_text(&a.out.join("p_hat.csv"), &io::format_matrix(&est.p_hat))?;
    write_text(&a.out.join("q_hat.csv"), &io::format_matrix(&est.q_hat))?;
    write_text(&a.out.join("pi_hat.csv"), &io::format_matrix(&est.pi_hat))?;
    write_text(&a.out.join("trajectories.csv"), &trajectories_csv(&result.z_hat))?;

    let log_icl = io::format_real(result.log_icl);
    m.set("log_icl", &log_icl);
    m.set("k_hat", result.k_hat);
    m.set("sweeps", result.n_sweeps);
    m.set("merges", result.n_merges);
    m.set("restart_index", result.restart_index);
    m.set("wall_time", seconds);
    m.write(&a.out)?;
    println!("log_icl={log_icl} k={} sweeps={} seconds={seconds}", result.k_hat, result.n_sweeps);
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let z_hat = io::read_allocation(&a.z_hat, None).with_context(|| format!("reading {}", show(&a.z_hat)))?;
    let z_true = io::read_allocation(&a.z_true, None).with_context(|| format!("reading {}", show(&a.z_true)))?;
    let nmis = nmi_per_frame(&z_hat, &z_true)?;
    let (k_hat, k_true) = (groups_per_frame(&z_hat), groups_per_frame(&z_true));

    let mut nmi_csv = String::from("frame,nmi\n");
    let mut groups_csv = String::from("frame,k_hat,k_true\n");
    for (t, v) in nmis.iter().enumerate() {
        let cell = v.map_or_else(|| "NA".to_string(), io::format_real);
        let _ = writeln!(nmi_csv, "{t},{cell}");
        let _ = writeln!(groups_csv, "{t},{},{}", k_hat[t], k_true[t]);
    }
    create_dir(&a.out)?;
    write_text(&a.out.join("nmi.csv"), &nmi_csv)?;
    write_text(&a.out.join("groups.csv"), &groups_csv)?;

    let med = median(&nmis).map_or_else(|| "NA".to_string(), io::format_real);
    let mut m = Manifest::new("evaluate");
    m.set("z_hat", show(&a.z_hat));
    m.set("z_true", show(&a.z_true));
    m.set("median_nmi", &med);
    m.write(&a.out)?;
    println!("median_nmi={med}");
    Ok(())
}

pub fn icl(a: &IclArgs) -> Result<()> {
    let cube = io::read_cube(&a.cube, a.activity.as_deref()).with_context(|| format!("reading {}", show(&a.cube)))?;
    let z = io::read_allocation(&a.z, None).with_context(|| format!("reading {}", show(&a.z)))?;
    z.check_consistent(&cube)?;
    let hyper = Hyperparameters::from_scalars(z.k_up(), hyper_scalars(a.hyper.as_deref())?);
    let value = log_icl_full(&compute_stats(&cube, &z)?, &hyper)?;
    println!("log_icl={}", io::format_real(value.log_icl));
    Ok(())
}
