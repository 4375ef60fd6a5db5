//! Subcommand implementations.
//!
//! Each command reads its input, runs the corresponding library routine and
//! writes a JSON or CSV artifact. All simulation seeds derive from the
//! global `--seed`, so reruns with identical inputs and flags produce
//! byte-identical outputs.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use serde_json::json;

use auctionfolio_core::counterfactual::{
    estimate_s_curve, estimate_t_curve, make_spec, revenue_delta_curve, CounterfactualKind,
};
use auctionfolio_core::inference::{
    reserve_price_test_with_envelope, uniform_band_q, uniform_band_s, uniform_band_t,
    uniform_band_value, SimConfig,
};
use auctionfolio_core::pipeline::{self, select_subsample, TruncationScope};
use auctionfolio_core::quantile::rule_of_thumb_bandwidth;
use auctionfolio_core::simulation::{run_coverage, Dgp, DgpFamily};
use auctionfolio_core::{beliefs, rng, Bandwidth, BidSample, Error, Kernel, Result};

use crate::input::{self, LoadedSample};
use crate::{
    BandTarget, BandsArgs, BandwidthArg, CounterfactualArgs, EstimateArgs, EstimatorArg,
    KindArg, MontecarloArgs, ResidualizeArgs, ScopeArg, SmoothingArgs, TestReserveArgs,
};

fn resolve_bandwidth(arg: BandwidthArg, sample: &BidSample) -> Result<Bandwidth> {
    match arg {
        BandwidthArg::Auto => rule_of_thumb_bandwidth(sample),
        BandwidthArg::Manual(h) => Bandwidth::manual(h),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| Error::Csv(format!("serializing output: {e}")))?;
    writer.write_all(b"\n")?;
    Ok(())
}

fn load_smoothed(
    path: &Path,
    smoothing: &SmoothingArgs,
) -> Result<(LoadedSample, Bandwidth, Kernel)> {
    let loaded = input::load(path, smoothing.bidders)?;
    let bandwidth = resolve_bandwidth(smoothing.bandwidth, &loaded.sample)?;
    Ok((loaded, bandwidth, smoothing.kernel.into()))
}

/// Index selection that evenly thins `len` points down to at most
/// `max_points`, always keeping the first.
fn thin(len: usize, max_points: Option<usize>) -> Result<Vec<usize>> {
    match max_points {
        None => Ok((0..len).collect()),
        Some(0) => Err(Error::Config("--max-points must be positive".into())),
        Some(m) => {
            let stride = len.div_ceil(m).max(1);
            Ok((0..len).step_by(stride).collect())
        }
    }
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let (loaded, bandwidth, kernel) = load_smoothed(&args.input, &args.smoothing)?;
    let mut v_est =
        beliefs::value_quantile(&loaded.sample, &loaded.beliefs, kernel, bandwidth)?;
    let range = match args.trim {
        Some(tau) => {
            v_est.set_trim(tau)?;
            v_est.q_estimates().trimmed_indices()?
        }
        None => 0..v_est.grid().len(),
    };
    let picks = thin(range.len(), args.max_points)?;
    let bids = loaded.sample.bids();
    let q_est = v_est.q_estimates();
    let mut grid = Vec::with_capacity(picks.len());
    let mut q_cap = Vec::with_capacity(picks.len());
    let mut q_hat = Vec::with_capacity(picks.len());
    let mut v_hat = Vec::with_capacity(picks.len());
    for &offset in &picks {
        let g = range.start + offset;
        grid.push(q_est.grid()[g]);
        // Q_hat(k/n) = b_(k) on the canonical grid.
        q_cap.push(bids[g + 1]);
        q_hat.push(q_est.q_hat()[g]);
        v_hat.push(v_est.v_hat()[g]);
    }
    write_json(
        &args.output,
        &json!({
            "n": loaded.sample.n(),
            "h": bandwidth.value(),
            "grid": grid,
            "Q_hat": q_cap,
            "q_hat": q_hat,
            "v_hat": v_hat,
        }),
    )
}

pub fn bands(args: &BandsArgs, seed: u64) -> Result<()> {
    let (loaded, bandwidth, kernel) = load_smoothed(&args.input, &args.smoothing)?;
    let tau = args.trim.unwrap_or_else(|| bandwidth.value());
    let config = SimConfig::new(args.n_sims, seed)?
        .with_approximation(args.approximation.into())
        .with_side(args.side.into())
        .with_studentization(args.studentization.into());
    let sample = &loaded.sample;
    let band = match args.target {
        BandTarget::Q => {
            uniform_band_q(sample, kernel, bandwidth, tau, args.alpha, &config)?
        }
        BandTarget::V => uniform_band_value(
            sample,
            &loaded.beliefs,
            kernel,
            bandwidth,
            tau,
            args.alpha,
            &config,
        )?,
        BandTarget::BidderSurplus | BandTarget::Revenue => {
            let kind = match args.target {
                BandTarget::BidderSurplus => CounterfactualKind::BidderSurplus,
                _ => CounterfactualKind::Revenue,
            };
            let spec = make_spec(kind, &loaded.beliefs)?;
            uniform_band_t(sample, &spec, kernel, bandwidth, tau, args.alpha, &config)?
        }
        BandTarget::TotalSurplus => {
            let spec = make_spec(CounterfactualKind::TotalSurplus, &loaded.beliefs)?;
            uniform_band_s(sample, &spec, kernel, bandwidth, tau, args.alpha, &config)?
        }
    };
    write_json(&args.output, &band)
}

pub fn counterfactual(args: &CounterfactualArgs) -> Result<()> {
    let (loaded, bandwidth, kernel) = load_smoothed(&args.input, &args.smoothing)?;
    let sample = &loaded.sample;
    let curve = match (args.kind, args.estimator) {
        (KindArg::RevenueDelta, EstimatorArg::S) => {
            return Err(Error::Config(
                "revenue-delta needs the kernel estimator; pass --estimator t".into(),
            ));
        }
        (KindArg::RevenueDelta, EstimatorArg::T) => {
            revenue_delta_curve(sample, &loaded.beliefs, kernel, bandwidth)?
        }
        (kind, flavor) => {
            let kind = match kind {
                KindArg::BidderSurplus => CounterfactualKind::BidderSurplus,
                KindArg::Revenue => CounterfactualKind::Revenue,
                KindArg::TotalSurplus => CounterfactualKind::TotalSurplus,
                KindArg::RevenueDelta => unreachable!("handled above"),
            };
            let spec = make_spec(kind, &loaded.beliefs)?;
            match flavor {
                EstimatorArg::S => estimate_s_curve(sample, &spec)?,
                EstimatorArg::T => estimate_t_curve(sample, &spec, kernel, bandwidth)?,
            }
        }
    };
    let picks = thin(curve.grid().len(), args.max_points)?;
    let grid: Vec<f64> = picks.iter().map(|&g| curve.grid()[g]).collect();
    let values: Vec<f64> = picks.iter().map(|&g| curve.values()[g]).collect();
    write_json(
        &args.output,
        &json!({
            "kind": curve.kind(),
            "estimator": curve.estimator(),
            "bandwidth": curve.bandwidth().map(|b| b.value()),
            "grid": grid,
            "values": values,
        }),
    )
}

pub fn test_reserve(args: &TestReserveArgs, seed: u64) -> Result<()> {
    let scope = match args.truncation_scope {
        ScopeArg::Pooled => TruncationScope::Pooled,
        ScopeArg::PerSubsample => TruncationScope::PerSubsample,
    };
    let loaded = input::load(&args.input, args.smoothing.bidders)?;
    let (sample, beliefs) = match (&loaded.records, args.bidder_range) {
        (None, Some(_)) => {
            return Err(Error::Config(
                "--bidder-range needs the full auction schema input".into(),
            ));
        }
        (None, None) => (loaded.sample, loaded.beliefs),
        (Some(records), range) => {
            // Re-select from the parsed records so the bidder range and
            // truncation scope apply to the residualized sample.
            let residualized =
                pipeline::residualize(records, pipeline::Formula::all())?;
            let (lo, hi) = range.unwrap_or_else(|| {
                (2, records.iter().map(|r| r.n_bidders()).max().unwrap_or(2).max(2))
            });
            let subsample = select_subsample(&residualized, lo, hi, scope)?;
            let beliefs = subsample.beliefs()?;
            (subsample.sample().clone(), beliefs)
        }
    };
    let bandwidth = resolve_bandwidth(args.smoothing.bandwidth, &sample)?;
    let config = SimConfig::new(args.n_sims, seed)?;
    let (result, grid, envelope) = reserve_price_test_with_envelope(
        &sample,
        &beliefs,
        args.smoothing.kernel.into(),
        bandwidth,
        args.alpha,
        &config,
    )?;
    let verdict = if result.reject() { "reject" } else { "fail-to-reject" };
    let mut body = serde_json::to_value(&result)
        .map_err(|e| Error::Csv(format!("serializing output: {e}")))?;
    let obj = body
        .as_object_mut()
        .expect("test result serializes to an object");
    obj.insert("verdict".into(), json!(verdict));
    obj.insert("envelope".into(), json!({ "grid": grid, "lower": envelope }));
    write_json(&args.output, &body)
}

struct RunSpec {
    family: DgpFamily<f64>,
    n: usize,
    trim: f64,
}

fn montecarlo_runs(args: &MontecarloArgs) -> Result<(Vec<RunSpec>, usize, usize)> {
    const FAMILIES: [&str; 6] = [
        "beta(1,1)",
        "beta(2,2)",
        "beta(5,2)",
        "beta(2,5)",
        "powerlaw(2)",
        "powerlaw(3)",
    ];
    let parse = |s: &str| s.parse::<DgpFamily<f64>>();
    match args.preset.as_deref() {
        Some("desk") => {
            let runs = FAMILIES
                .iter()
                .map(|f| {
                    Ok(RunSpec {
                        family: parse(f)?,
                        n: 1000,
                        trim: 0.03,
                    })
                })
                .collect::<Result<_>>()?;
            Ok((runs, args.outer.unwrap_or(200), args.inner.unwrap_or(500)))
        }
        Some("full") => {
            let mut runs = Vec::new();
            for &(n, trim) in &[(1000, 0.03), (10_000, 0.015), (100_000, 0.007)] {
                for f in FAMILIES {
                    runs.push(RunSpec {
                        family: parse(f)?,
                        n,
                        trim,
                    });
                }
            }
            Ok((runs, args.outer.unwrap_or(500), args.inner.unwrap_or(500)))
        }
        Some(other) => Err(Error::Config(format!(
            "unknown preset '{other}', expected desk or full"
        ))),
        None => {
            let family = args
                .dgp
                .as_deref()
                .expect("clap requires --dgp without --preset")
                .parse::<DgpFamily<f64>>()?;
            let runs = vec![RunSpec {
                family,
                n: args.n.expect("clap requires --n without --preset"),
                trim: args.trim.expect("clap requires --trim without --preset"),
            }];
            Ok((runs, args.outer.unwrap_or(500), args.inner.unwrap_or(500)))
        }
    }
}

pub fn montecarlo(args: &MontecarloArgs, seed: u64) -> Result<()> {
    let (runs, outer, inner) = montecarlo_runs(args)?;
    let kernel: Kernel = args.kernel.into();
    let mut reports = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let dgp = Dgp::new(run.family)?;
        let config = SimConfig::new(inner, rng::derive_seed(seed, &[101, i as u64]))?
            .with_approximation(args.approximation.into());
        reports.push(run_coverage(
            &dgp, run.n, kernel, run.trim, args.alpha, outer, &config,
        )?);
    }

    let mut writer = BufWriter::new(File::create(&args.output)?);
    writeln!(writer, "dgp,n,trim,q,v,bidder_surplus,revenue,total_surplus")?;
    for (run, report) in runs.iter().zip(&reports) {
        let c = report.coverage();
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{}",
            run.family, run.n, run.trim, c[0], c[1], c[2], c[3], c[4]
        )?;
    }
    writer.flush()?;

    if let Some(json_path) = &args.json {
        write_json(json_path, &reports)?;
    }
    Ok(())
}

pub fn residualize(args: &ResidualizeArgs) -> Result<()> {
    let records = input::load_auctions(&args.input)?;
    let formula = input::parse_formula(&args.formula)?;
    let result = pipeline::residualize(&records, formula)?;
    result.write_csv(BufWriter::new(File::create(&args.output)?))?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.output.with_extension("manifest.json"));
    write_json(&manifest_path, &result.manifest())
}
