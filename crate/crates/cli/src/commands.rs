use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bufsched::lp::{build_lp, solve_lp, sweep, SweepPoint};
use bufsched::mrp::{build_transition_piecewise, stationary_distribution};
use bufsched::pareto::evaluate_deterministic_cloud;
use bufsched::sim::{simulate as run_simulation, simulate_traced, trace_csv, SimulationResult};
use bufsched::validate::{run_battery, Outcome, VerifyOptions};
use bufsched::{evaluate, threshold_walk, Error, ModelParams, Policy, RawParams, ThresholdPolicy};
use log::{info, warn};

use crate::{LpArgs, ParamArgs, ParetoArgs, SimulateArgs, VerifyArgs};

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    /// Failed check or solver trouble.
    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    /// Bad flags, parameters or input files.
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: format!("{}\n(run with --help for usage)", message.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load_params(args: &ParamArgs) -> Result<ModelParams, Failure> {
    let mut raw = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            RawParams::parse(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        None => RawParams::default(),
    };
    let mut flags = RawParams {
        alpha: args.alpha,
        packet_size: args.packet_size,
        max_transmit: args.max_transmit,
        buffer: args.buffer,
        power: None,
    };
    if let Some(power) = &args.power {
        flags
            .set("power", power)
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    raw = raw.overlay(&flags);
    raw.validate().map_err(|e| Failure::usage(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn gnuplot_script(with_cloud: bool) -> String {
    let mut s = String::from(
        "# gnuplot -p plot.gp\n\
         set xlabel \"average power\"\n\
         set ylabel \"average delay\"\n\
         set key top right\n\
         set grid\n",
    );
    if with_cloud {
        s.push_str(
            "plot \"cloud.dat\" using 1:2 with points pt 7 ps 0.4 lc rgb \"gray60\" title \"deterministic policies\", \\\n     ",
        );
    } else {
        s.push_str("plot ");
    }
    s.push_str("\"curve.dat\" using 1:2 with linespoints lw 2 pt 7 title \"optimal tradeoff\"\n");
    s
}

pub fn pareto(args: &ParetoArgs) -> CmdResult {
    let params = load_params(&args.params)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", args.out.display())))?;
    let curve = threshold_walk(&params).map_err(|e| Failure::runtime(e.to_string()))?;

    let out = |name: &str| args.out.join(name);
    write_file(&out("curve.csv"), &curve.to_csv(&params))?;
    let json = serde_json::to_string_pretty(&curve.to_json(&params)).expect("curve serializes");
    write_file(&out("curve.json"), &(json + "\n"))?;
    write_file(&out("curve.dat"), &curve.to_dat())?;

    println!("{} curve vertices", curve.len());
    println!("{:>14} {:>14}  thresholds", "power", "delay");
    for v in curve.vertices() {
        let ks = v
            .thresholds
            .as_ref()
            .map(|t| format!("{:?}", t.thresholds()))
            .unwrap_or_default();
        println!("{:>14.9} {:>14.9}  {ks}", v.point.power, v.point.delay);
    }

    let mut too_large = None;
    let mut with_cloud = false;
    if !args.no_cloud {
        match evaluate_deterministic_cloud(&params, args.cap) {
            Ok(cloud) => {
                write_file(&out("cloud.csv"), &cloud.to_csv())?;
                write_file(&out("cloud.dat"), &cloud.to_dat())?;
                println!(
                    "{} deterministic policies, {} with a singular chain",
                    cloud.entries.len(),
                    cloud.singular
                );
                with_cloud = true;
            }
            Err(e @ Error::EnumerationTooLarge { .. }) => too_large = Some(e),
            Err(e) => return Err(Failure::runtime(e.to_string())),
        }
    }
    write_file(&out("plot.gp"), &gnuplot_script(with_cloud))?;

    match too_large {
        Some(e) => Err(Failure {
            code: 3,
            message: format!("{e}; cloud skipped, curve written"),
        }),
        None => Ok(()),
    }
}

fn parse_sweep(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || {
        Failure::usage(format!(
            "--sweep expects lo:hi:n with 0 <= lo <= hi and n >= 1, got {text:?}"
        ))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || lo < 0.0 || hi < lo {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

pub fn lp(args: &LpArgs) -> CmdResult {
    let params = load_params(&args.params)?;
    if let Some(range) = &args.sweep {
        let budgets = parse_sweep(range)?;
        let points = sweep(&params, &budgets);
        let csv = SweepPoint::to_csv(&points);
        write_file(&args.out, &csv)?;
        print!("{csv}");
        for p in &points {
            if let Err(e) = &p.result {
                warn!("budget {}: {e}", p.budget);
            }
        }
        return Ok(());
    }

    let pth = args.pth.expect("clap requires --pth or --sweep");
    if pth.is_nan() || pth < 0.0 {
        return Err(Failure::usage(format!(
            "--pth must be a nonnegative number, got {pth}"
        )));
    }
    let problem = build_lp(&params, pth).map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(path) = &args.mps {
        write_file(path, &problem.to_mps())?;
    }
    let sol = solve_lp(&problem).map_err(|e| Failure::runtime(e.to_string()))?;
    println!("p_th {pth:.6}");
    if sol.is_optimal() {
        println!("delay {:.6}", sol.delay);
        println!("power {:.6}", sol.power);
    } else {
        println!("delay nan");
    }
    println!("status {}", sol.status);
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let params = load_params(&args.params)?;
    if let Some(tol) = args.tol {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(Failure::usage(format!(
                "--tol must be a nonnegative number, got {tol}"
            )));
        }
    }
    if args.slots == 0 {
        return Err(Failure::usage("--slots must be at least 1"));
    }
    let opts = VerifyOptions {
        seed: args.seed,
        trials: args.trials,
        geometry_tol: args.tol,
        sim_slots: args.slots,
        enumeration_cap: args.cap,
        ..VerifyOptions::default()
    };
    let checks = run_battery(&params, &opts).map_err(|e| Failure::runtime(e.to_string()))?;
    for c in &checks {
        println!("{c}");
    }
    let count = |o: Outcome| checks.iter().filter(|c| c.outcome == o).count();
    let (passed, failed, skipped) = (
        count(Outcome::Pass),
        count(Outcome::Fail),
        count(Outcome::Skip),
    );
    println!("{passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 {
        let names: Vec<&str> = checks
            .iter()
            .filter(|c| c.outcome == Outcome::Fail)
            .map(|c| c.name)
            .collect();
        return Err(Failure::runtime(format!("failed: {}", names.join(", "))));
    }
    Ok(())
}

fn load_policy(params: &ModelParams, args: &SimulateArgs) -> Result<Policy, Failure> {
    if let Some(path) = &args.policy {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        return Policy::from_csv(params, &text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())));
    }
    if let Some(list) = &args.thresholds {
        let ks: Vec<usize> = list
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::usage(format!("--thresholds expects integers, got {list:?}")))?;
        return ThresholdPolicy::deterministic(params, ks)
            .and_then(|tp| tp.to_policy(params))
            .map_err(|e| Failure::usage(e.to_string()));
    }
    Ok(Policy::immediate(params))
}

fn report(params: &ModelParams, policy: &Policy, r: &SimulationResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "slots      {}", r.slots);
    let _ = writeln!(s, "burn_in    {}", r.burn_in);
    let _ = writeln!(s, "seed       {}", r.seed);
    let _ = writeln!(s, "power      {:.6}", r.empirical_power);
    let _ = writeln!(s, "delay      {:.6}", r.empirical_delay);
    let chain = build_transition_piecewise(params, policy).ok();
    match (
        evaluate(params, policy),
        chain.and_then(|c| stationary_distribution(&c).ok()),
    ) {
        (Ok(exact), Some(pi)) => {
            let _ = writeln!(
                s,
                "analytic   power {:.6} delay {:.6}",
                exact.power, exact.delay
            );
            let _ = writeln!(s, "occupancy  total variation {:.6}", r.tv_distance(&pi));
        }
        _ => {
            let _ = writeln!(s, "analytic   unavailable (singular chain)");
        }
    }
    let _ = writeln!(
        s,
        "violations overflow {} underflow {}",
        r.overflow_violations, r.underflow_violations
    );
    s
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let params = load_params(&args.params)?;
    if args.slots == 0 {
        return Err(Failure::usage("--slots must be at least 1"));
    }
    let policy = load_policy(&params, args)?;
    let result = match &args.trace {
        Some(path) => {
            let (r, rows) = simulate_traced(&params, &policy, args.slots, args.seed)
                .map_err(|e| Failure::runtime(e.to_string()))?;
            write_file(path, &trace_csv(&rows))?;
            r
        }
        None => run_simulation(&params, &policy, args.slots, args.seed)
            .map_err(|e| Failure::runtime(e.to_string()))?,
    };
    print!("{}", report(&params, &policy, &result));
    Ok(())
}
