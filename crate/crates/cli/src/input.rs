//! Input loading with header sniffing.
//!
//! Three CSV shapes are accepted everywhere a bid sample is expected:
//!
//! * a single `bid` column of raw bids,
//! * an `auction_id,residual` file as written by `residualize`,
//! * the full auction schema
//!   `auction_id,bid,n_bidders,year,location,log_adv_value,log_hhi`,
//!   which is residualized with every covariate before estimation.
//!
//! Plain bid and residual inputs carry no bidder counts, so beliefs put
//! all mass on the declared `--bidders` value. Full-schema inputs estimate
//! beliefs from the observed counts and keep the parsed records around for
//! commands that re-select subsamples.

use std::fs::File;
use std::io::Read as _;
use std::path::Path;

use auctionfolio_core::pipeline::{
    load_csv, read_residual_csv, residualize, select_subsample, AuctionRecord, Formula,
    TruncationScope,
};
use auctionfolio_core::{BeliefFunctions, BidSample, Error, Result};

/// A bid sample, the beliefs that go with it, and (for full-schema
/// inputs) the parsed auction records.
pub struct LoadedSample {
    pub sample: BidSample,
    pub beliefs: BeliefFunctions,
    pub records: Option<Vec<AuctionRecord<f64>>>,
}

const AUCTION_HEADER: [&str; 7] = [
    "auction_id",
    "bid",
    "n_bidders",
    "year",
    "location",
    "log_adv_value",
    "log_hhi",
];

fn read_to_string(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    Ok(text)
}

fn header_fields(text: &str) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(Error::from)?;
    Ok(headers.iter().map(|h| h.trim().to_string()).collect())
}

/// Point-mass beliefs at the declared bidder count.
pub fn declared_beliefs(bidders: u32) -> Result<BeliefFunctions> {
    if bidders < 2 {
        return Err(Error::Config(format!(
            "--bidders must be at least 2, got {bidders}"
        )));
    }
    let mut p = vec![0.0; bidders as usize];
    p[bidders as usize - 1] = 1.0;
    BeliefFunctions::from_probabilities(p)
}

fn single_bid_column(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut bids = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(Error::from)?;
        let field = record
            .get(0)
            .ok_or_else(|| Error::Csv(format!("row {}: missing bid", i + 2)))?;
        let bid: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("row {}: invalid bid '{field}'", i + 2)))?;
        bids.push(bid);
    }
    Ok(bids)
}

/// Pools every auction's residual with the pooled truncation and the
/// declared maximum set to the largest observed count.
pub fn pooled_subsample(
    records: &[AuctionRecord<f64>],
    scope: TruncationScope,
) -> Result<(BidSample, BeliefFunctions)> {
    let residualized = residualize(records, Formula::all())?;
    let max_m = records.iter().map(|r| r.n_bidders()).max().unwrap_or(2);
    let subsample = select_subsample(&residualized, 2, max_m.max(2), scope)?;
    let beliefs = subsample.beliefs()?;
    Ok((subsample.sample().clone(), beliefs))
}

/// Loads any of the three accepted shapes as a pooled bid sample.
pub fn load(path: &Path, bidders: u32) -> Result<LoadedSample> {
    let text = read_to_string(path)?;
    let headers = header_fields(&text)?;
    let names: Vec<&str> = headers.iter().map(String::as_str).collect();

    if names == ["bid"] {
        let sample = BidSample::new(single_bid_column(&text)?)?;
        return Ok(LoadedSample {
            sample,
            beliefs: declared_beliefs(bidders)?,
            records: None,
        });
    }
    if names == ["auction_id", "residual"] {
        let rows = read_residual_csv::<f64, _>(text.as_bytes())?;
        let sample = BidSample::new(rows.into_iter().map(|(_, r)| r).collect())?;
        return Ok(LoadedSample {
            sample,
            beliefs: declared_beliefs(bidders)?,
            records: None,
        });
    }
    if names == AUCTION_HEADER {
        let records = load_csv::<f64, _>(text.as_bytes())?;
        let (sample, beliefs) = pooled_subsample(&records, TruncationScope::Pooled)?;
        return Ok(LoadedSample {
            sample,
            beliefs,
            records: Some(records),
        });
    }
    Err(Error::Csv(format!(
        "unrecognized header [{}]; expected 'bid', 'auction_id,residual' or \
         the full auction schema '{}'",
        names.join(","),
        AUCTION_HEADER.join(",")
    )))
}

/// Loads the full auction schema only; other shapes are rejected.
pub fn load_auctions(path: &Path) -> Result<Vec<AuctionRecord<f64>>> {
    let text = read_to_string(path)?;
    let headers = header_fields(&text)?;
    let names: Vec<&str> = headers.iter().map(String::as_str).collect();
    if names != AUCTION_HEADER {
        return Err(Error::Csv(format!(
            "this command needs the full auction schema '{}', got [{}]",
            AUCTION_HEADER.join(","),
            names.join(","),
        )));
    }
    load_csv::<f64, _>(text.as_bytes())
}

/// Parses the `--formula` flag into a covariate selection.
pub fn parse_formula(spec: &str) -> Result<Formula> {
    let spec = spec.trim();
    if spec == "1" {
        return Ok(Formula::none());
    }
    let mut formula = Formula::none();
    for term in spec.split(',') {
        match term.trim() {
            "year" => formula = formula.with_year(true),
            "location" => formula = formula.with_location(true),
            "log_adv_value" => formula = formula.with_log_adv_value(true),
            "log_hhi" => formula = formula.with_log_hhi(true),
            other => {
                return Err(Error::Config(format!(
                    "unknown covariate '{other}'; choose from year, location, \
                     log_adv_value, log_hhi, or '1' for intercept only"
                )))
            }
        }
    }
    Ok(formula)
}
