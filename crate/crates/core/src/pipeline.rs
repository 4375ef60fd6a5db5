//! Data pipeline: loading auction CSVs, residualizing winning bids on
//! auction covariates, and carving bidder-count subsamples for the
//! estimators.
//!
//! The homogenization model is `log b_l = x_l' gamma + e_l` per auction
//! `l`, fit by least squares through an orthogonal decomposition (QR), not
//! the normal equations, so near-collinear covariates do not get squared
//! condition numbers. Exponentiated residuals `exp(e_hat_l)` act as
//! homogenized bids; the fitted common component `exp(gamma_0)` restores
//! the original scale when needed.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::io;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::beliefs::{AuctionCounts, BeliefFunctions};
use crate::quantile::BidSample;
use crate::scalar::Real;
use crate::{Error, Result};

const TRUNCATION_FRACTION: f64 = 0.05;

/// One auction: its winning bid and covariates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuctionRecord<T> {
    auction_id: String,
    bid: T,
    n_bidders: u32,
    year: i32,
    location: String,
    log_adv_value: T,
    log_hhi: T,
}

impl<T: Real> AuctionRecord<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        auction_id: impl Into<String>,
        bid: T,
        n_bidders: u32,
        year: i32,
        location: impl Into<String>,
        log_adv_value: T,
        log_hhi: T,
    ) -> Result<Self> {
        let auction_id = auction_id.into();
        let location = location.into();
        if auction_id.is_empty() {
            return Err(Error::Domain("auction_id must be nonempty".into()));
        }
        if location.is_empty() {
            return Err(Error::Domain("location must be nonempty".into()));
        }
        if !(bid > T::zero()) || !bid.is_finite() {
            return Err(Error::Domain(format!(
                "bid must be positive and finite, got {bid}"
            )));
        }
        if n_bidders < 2 {
            return Err(Error::Domain(format!(
                "auctions need at least 2 bidders, got {n_bidders}"
            )));
        }
        if !log_adv_value.is_finite() || !log_hhi.is_finite() {
            return Err(Error::Domain("covariates must be finite".into()));
        }
        Ok(Self {
            auction_id,
            bid,
            n_bidders,
            year,
            location,
            log_adv_value,
            log_hhi,
        })
    }

    pub fn auction_id(&self) -> &str {
        &self.auction_id
    }

    pub fn bid(&self) -> T {
        self.bid
    }

    pub fn n_bidders(&self) -> u32 {
        self.n_bidders
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn location(&self) -> &str {
        &self.location
    }

    pub fn log_adv_value(&self) -> T {
        self.log_adv_value
    }

    pub fn log_hhi(&self) -> T {
        self.log_hhi
    }
}

const CSV_HEADER: [&str; 7] = [
    "auction_id",
    "bid",
    "n_bidders",
    "year",
    "location",
    "log_adv_value",
    "log_hhi",
];

fn csv_err(line: u64, message: impl std::fmt::Display) -> Error {
    Error::Csv(format!("line {line}: {message}"))
}

/// Loads auction records from bid-level CSV data.
///
/// Expected header: `auction_id,bid,n_bidders,year,location,log_adv_value,log_hhi`.
/// Rows sharing an `auction_id` are the bids of one auction: the maximum
/// (the winning bid) is kept and the covariates must agree across rows.
/// Any malformed row fails the load with its line number.
pub fn load_csv<T: Real, R: io::Read>(reader: R) -> Result<Vec<AuctionRecord<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != CSV_HEADER {
            return Err(Error::Csv(format!(
                "unexpected header {got:?}, expected {CSV_HEADER:?}"
            )));
        }
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, (AuctionRecord<T>, u64)> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Csv(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != CSV_HEADER.len() {
            return Err(csv_err(
                line,
                format!("expected {} fields, got {}", CSV_HEADER.len(), row.len()),
            ));
        }
        let field = |i: usize| row.get(i).unwrap_or_default();
        let parse_f64 = |i: usize| -> Result<T> {
            field(i)
                .parse::<f64>()
                .map(T::from_f64_lossy)
                .map_err(|_| csv_err(line, format!("invalid {} '{}'", CSV_HEADER[i], field(i))))
        };
        let bid = parse_f64(1)?;
        let n_bidders: u32 = field(2)
            .parse()
            .map_err(|_| csv_err(line, format!("invalid n_bidders '{}'", field(2))))?;
        let year: i32 = field(3)
            .parse()
            .map_err(|_| csv_err(line, format!("invalid year '{}'", field(3))))?;
        let record = AuctionRecord::new(
            field(0),
            bid,
            n_bidders,
            year,
            field(4),
            parse_f64(5)?,
            parse_f64(6)?,
        )
        .map_err(|e| csv_err(line, e))?;

        match by_id.get_mut(record.auction_id()) {
            None => {
                order.push(record.auction_id().to_owned());
                by_id.insert(record.auction_id().to_owned(), (record, line));
            }
            Some((existing, first_line)) => {
                let same_covariates = existing.n_bidders == record.n_bidders
                    && existing.year == record.year
                    && existing.location == record.location
                    && existing.log_adv_value == record.log_adv_value
                    && existing.log_hhi == record.log_hhi;
                if !same_covariates {
                    return Err(csv_err(
                        line,
                        format!(
                            "auction '{}' disagrees with its covariates on line {first_line}",
                            record.auction_id()
                        ),
                    ));
                }
                if record.bid > existing.bid {
                    existing.bid = record.bid;
                }
            }
        }
    }
    if order.is_empty() {
        return Err(Error::InsufficientData("CSV contains no data rows".into()));
    }
    Ok(order
        .into_iter()
        .map(|id| by_id.remove(&id).expect("ordered ids are present").0)
        .collect())
}

/// Which covariates enter the homogenization regression. The intercept is
/// always included; `year` and `location` enter as dummies against the
/// smallest (lexicographically for strings) baseline category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Formula {
    year: bool,
    location: bool,
    log_adv_value: bool,
    log_hhi: bool,
}

impl Formula {
    pub fn all() -> Self {
        Self {
            year: true,
            location: true,
            log_adv_value: true,
            log_hhi: true,
        }
    }

    /// Intercept-only model.
    pub fn none() -> Self {
        Self {
            year: false,
            location: false,
            log_adv_value: false,
            log_hhi: false,
        }
    }

    pub fn with_year(mut self, on: bool) -> Self {
        self.year = on;
        self
    }

    pub fn with_location(mut self, on: bool) -> Self {
        self.location = on;
        self
    }

    pub fn with_log_adv_value(mut self, on: bool) -> Self {
        self.log_adv_value = on;
        self
    }

    pub fn with_log_hhi(mut self, on: bool) -> Self {
        self.log_hhi = on;
        self
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "log_bid ~ 1")?;
        for (on, name) in [
            (self.year, "year"),
            (self.location, "location"),
            (self.log_adv_value, "log_adv_value"),
            (self.log_hhi, "log_hhi"),
        ] {
            if on {
                write!(f, " + {name}")?;
            }
        }
        Ok(())
    }
}

/// One auction after residualization.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow<T> {
    auction_id: String,
    n_bidders: u32,
    /// Exponentiated regression residual `exp(e_hat)`.
    residual: T,
    /// Inside the pooled truncation bounds.
    kept: bool,
}

impl<T: Real> ResidualRow<T> {
    pub fn auction_id(&self) -> &str {
        &self.auction_id
    }

    pub fn n_bidders(&self) -> u32 {
        self.n_bidders
    }

    pub fn residual(&self) -> T {
        self.residual
    }

    pub fn kept(&self) -> bool {
        self.kept
    }
}

/// A named regression coefficient.
#[derive(Clone, Debug, Serialize)]
pub struct Coefficient<T> {
    pub name: String,
    pub value: T,
}

/// Run summary for the manifest file.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<T> {
    pub formula: String,
    pub coefficients: Vec<Coefficient<T>>,
    pub r_squared: T,
    pub n_auctions: usize,
    pub dropped_rows: usize,
    pub truncation_bounds: (T, T),
}

/// Full residualization output: every auction's exponentiated residual
/// with its pooled truncation flag, plus the fit diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct Residualized<T> {
    rows: Vec<ResidualRow<T>>,
    formula: Formula,
    coefficients: Vec<Coefficient<T>>,
    r_squared: T,
    intercept: T,
    truncation_bounds: (T, T),
    dropped: usize,
}

impl<T: Real> Residualized<T> {
    /// All auctions in input order, including truncated ones.
    pub fn rows(&self) -> &[ResidualRow<T>] {
        &self.rows
    }

    pub fn coefficients(&self) -> &[Coefficient<T>] {
        &self.coefficients
    }

    pub fn r_squared(&self) -> T {
        self.r_squared
    }

    /// The fitted common component `exp(gamma_0)`.
    pub fn common_component(&self) -> T {
        self.intercept.exp()
    }

    /// Pooled truncation bounds (smallest and largest kept residual).
    pub fn truncation_bounds(&self) -> (T, T) {
        self.truncation_bounds
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn manifest(&self) -> Manifest<T> {
        Manifest {
            formula: self.formula.to_string(),
            coefficients: self.coefficients.clone(),
            r_squared: self.r_squared,
            n_auctions: self.rows.len(),
            dropped_rows: self.dropped,
            truncation_bounds: self.truncation_bounds,
        }
    }

    /// Writes `auction_id,residual` for the kept rows. Residuals print in
    /// the shortest form that parses back bit-for-bit.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["auction_id", "residual"])
            .map_err(|e| Error::Csv(e.to_string()))?;
        for row in self.rows.iter().filter(|r| r.kept) {
            w.write_record([row.auction_id.as_str(), &format!("{}", row.residual)])
                .map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(Error::from)?;
        Ok(())
    }
}

/// Reads an `auction_id,residual` CSV written by [`Residualized::write_csv`].
pub fn read_residual_csv<T: Real, R: io::Read>(reader: R) -> Result<Vec<(String, T)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    {
        let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["auction_id", "residual"] {
            return Err(Error::Csv(format!(
                "unexpected residual header {got:?}"
            )));
        }
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Csv(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row.get(0).unwrap_or_default().to_owned();
        let value = row
            .get(1)
            .unwrap_or_default()
            .parse::<f64>()
            .map(T::from_f64_lossy)
            .map_err(|_| csv_err(line, "invalid residual"))?;
        out.push((id, value));
    }
    Ok(out)
}

/// Column-by-column dependence scan via modified Gram-Schmidt: returns the
/// names of columns that lie in the span of their predecessors.
fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let m = x.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..x.ncols() {
        let mut v = DVector::from_iterator(m, x.column(j).iter().copied());
        let original = v.norm().max(1.0);
        for b in &basis {
            let coeff = b.dot(&v);
            v -= b * coeff;
        }
        if v.norm() <= 1e-8 * original {
            dependent.push(names[j].clone());
        } else {
            let norm = v.norm();
            basis.push(v / norm);
        }
    }
    dependent
}

fn design_matrix<T: Real>(
    records: &[AuctionRecord<T>],
    formula: Formula,
) -> (DMatrix<f64>, Vec<String>) {
    let mut names = vec!["(intercept)".to_owned()];
    let mut columns: Vec<Box<dyn Fn(&AuctionRecord<T>) -> f64>> = vec![Box::new(|_| 1.0)];
    if formula.year {
        let years: BTreeSet<i32> = records.iter().map(|r| r.year).collect();
        for year in years.into_iter().skip(1) {
            names.push(format!("year={year}"));
            columns.push(Box::new(move |r| if r.year == year { 1.0 } else { 0.0 }));
        }
    }
    if formula.location {
        let locations: BTreeSet<&str> = records.iter().map(|r| r.location.as_str()).collect();
        for location in locations.into_iter().skip(1) {
            let location = location.to_owned();
            names.push(format!("location={location}"));
            columns.push(Box::new(move |r| {
                if r.location == location {
                    1.0
                } else {
                    0.0
                }
            }));
        }
    }
    if formula.log_adv_value {
        names.push("log_adv_value".to_owned());
        columns.push(Box::new(|r| {
            r.log_adv_value.to_f64().expect("covariate converts to f64")
        }));
    }
    if formula.log_hhi {
        names.push("log_hhi".to_owned());
        columns.push(Box::new(|r| {
            r.log_hhi.to_f64().expect("covariate converts to f64")
        }));
    }
    let x = DMatrix::from_fn(records.len(), columns.len(), |i, j| columns[j](&records[i]));
    (x, names)
}

/// Stable truncation order: by value, ties by original position.
fn truncation_flags<T: Real>(values: &[T]) -> Result<(Vec<bool>, (T, T), usize)> {
    let n = values.len();
    let drop_per_tail = (TRUNCATION_FRACTION * n as f64).ceil() as usize;
    if 2 * drop_per_tail >= n {
        return Err(Error::InsufficientData(format!(
            "truncating {drop_per_tail} rows per tail empties the {n}-row sample"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .partial_cmp(&values[j])
            .expect("residuals are comparable")
            .then(i.cmp(&j))
    });
    let mut keep = vec![true; n];
    for &i in &order[..drop_per_tail] {
        keep[i] = false;
    }
    for &i in &order[n - drop_per_tail..] {
        keep[i] = false;
    }
    let bounds = (
        values[order[drop_per_tail]],
        values[order[n - 1 - drop_per_tail]],
    );
    Ok((keep, bounds, 2 * drop_per_tail))
}

/// Fits the homogenization regression and exponentiates its residuals.
///
/// The 5% most extreme residuals in each tail (`ceil(0.05 N)` rows per
/// tail, ties broken by input order) are flagged as dropped rather than
/// winsorized. Exactly collinear covariates abort with the offending
/// column names.
pub fn residualize<T: Real>(
    records: &[AuctionRecord<T>],
    formula: Formula,
) -> Result<Residualized<T>> {
    let (x, names) = design_matrix(records, formula);
    if records.len() <= x.ncols() {
        return Err(Error::InsufficientData(format!(
            "{} auctions cannot identify {} regression columns",
            records.len(),
            x.ncols()
        )));
    }
    let dependent = collinear_columns(&x, &names);
    if !dependent.is_empty() {
        return Err(Error::Collinear(dependent));
    }

    let y = DVector::from_iterator(
        records.len(),
        records
            .iter()
            .map(|r| r.bid.to_f64().expect("bid converts to f64").ln()),
    );
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &y;
    let gamma = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Collinear(names.clone()))?;
    let fitted = &x * &gamma;
    let residuals: Vec<T> = y
        .iter()
        .zip(fitted.iter())
        .map(|(&yi, &fi)| T::from_f64_lossy((yi - fi).exp()))
        .collect();

    let y_bar = y.mean();
    let ss_total: f64 = y.iter().map(|&yi| (yi - y_bar).powi(2)).sum();
    let ss_residual: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(&yi, &fi)| (yi - fi).powi(2))
        .sum();
    let r_squared = if ss_total > 0.0 {
        T::from_f64_lossy(1.0 - ss_residual / ss_total)
    } else {
        T::one()
    };

    let (keep, bounds, dropped) = truncation_flags(&residuals)?;
    let rows = records
        .iter()
        .zip(&residuals)
        .zip(&keep)
        .map(|((record, &residual), &kept)| ResidualRow {
            auction_id: record.auction_id.clone(),
            n_bidders: record.n_bidders,
            residual,
            kept,
        })
        .collect();
    let coefficients = names
        .into_iter()
        .zip(gamma.iter())
        .map(|(name, &value)| Coefficient {
            name,
            value: T::from_f64_lossy(value),
        })
        .collect();
    Ok(Residualized {
        rows,
        formula,
        coefficients,
        r_squared,
        intercept: T::from_f64_lossy(gamma[0]),
        truncation_bounds: bounds,
        dropped,
    })
}

/// Where the 5%/95% truncation is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationScope {
    /// Use the pooled bounds computed over every auction (the default).
    Pooled,
    /// Recompute the truncation within the selected subsample.
    PerSubsample,
}

/// Homogenized bids for one bidder-count subsample, ready for estimation.
#[derive(Clone, Debug)]
pub struct ResidualSample<T> {
    sample: BidSample<T>,
    counts: AuctionCounts,
    declared_m: u32,
    common: T,
    truncation: (T, T),
}

impl<T: Real> ResidualSample<T> {
    /// Sorted exponentiated residuals.
    pub fn sample(&self) -> &BidSample<T> {
        &self.sample
    }

    /// Bidder counts of the kept auctions, in input order.
    pub fn counts(&self) -> &AuctionCounts {
        &self.counts
    }

    /// The declared number of potential bidders (the selection's upper
    /// bound), which may exceed the largest observed count.
    pub fn declared_m(&self) -> u32 {
        self.declared_m
    }

    /// The fitted common component `exp(gamma_0)` of the regression.
    pub fn common_component(&self) -> T {
        self.common
    }

    /// Residual bounds that survived truncation.
    pub fn truncation_bounds(&self) -> (T, T) {
        self.truncation
    }

    /// Belief probabilities `(p_1, ..., p_M)` with `M` the declared
    /// maximum, padding unobserved counts with zero mass.
    pub fn beliefs(&self) -> Result<BeliefFunctions<T>> {
        let m = self.declared_m as usize;
        let total = T::from_usize_exact(self.counts.n_auctions());
        let mut p = vec![T::zero(); m];
        for &count in self.counts.counts() {
            p[count as usize - 1] = p[count as usize - 1] + T::one() / total;
        }
        BeliefFunctions::from_probabilities(p)
    }
}

/// Selects auctions with `lo <= n_bidders <= hi` and packages their
/// residuals as a bid sample with `M = hi` declared potential bidders.
pub fn select_subsample<T: Real>(
    residualized: &Residualized<T>,
    lo: u32,
    hi: u32,
    scope: TruncationScope,
) -> Result<ResidualSample<T>> {
    if lo < 2 || lo > hi {
        return Err(Error::Config(format!(
            "bidder-count range [{lo}, {hi}] is invalid: need 2 <= lo <= hi"
        )));
    }
    let in_range =
        |row: &&ResidualRow<T>| row.n_bidders >= lo && row.n_bidders <= hi;
    let (kept_rows, truncation): (Vec<&ResidualRow<T>>, (T, T)) = match scope {
        TruncationScope::Pooled => (
            residualized
                .rows
                .iter()
                .filter(in_range)
                .filter(|row| row.kept)
                .collect(),
            residualized.truncation_bounds,
        ),
        TruncationScope::PerSubsample => {
            let subsample: Vec<&ResidualRow<T>> =
                residualized.rows.iter().filter(in_range).collect();
            if subsample.is_empty() {
                return Err(Error::EmptySubsample(format!(
                    "no auctions with {lo} to {hi} bidders"
                )));
            }
            let values: Vec<T> = subsample.iter().map(|row| row.residual).collect();
            let (keep, bounds, _) = truncation_flags(&values)?;
            (
                subsample
                    .into_iter()
                    .zip(keep)
                    .filter_map(|(row, kept)| kept.then_some(row))
                    .collect(),
                bounds,
            )
        }
    };
    if kept_rows.is_empty() {
        return Err(Error::EmptySubsample(format!(
            "no auctions with {lo} to {hi} bidders survive truncation"
        )));
    }
    let mut bids: Vec<T> = kept_rows.iter().map(|row| row.residual).collect();
    bids.sort_by(|a, b| a.partial_cmp(b).expect("residuals are comparable"));
    let counts = AuctionCounts::new(kept_rows.iter().map(|row| row.n_bidders).collect())?;
    Ok(ResidualSample {
        sample: BidSample::from_sorted(bids)?,
        counts,
        declared_m: hi,
        common: residualized.common_component(),
        truncation,
    })
}
