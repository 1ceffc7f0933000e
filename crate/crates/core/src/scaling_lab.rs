//! Sweeps over `eps`, exponent fits and the scaling-law sandwich check.
//!
//! "Best" is the minimum over the evaluated candidates, an upper bound on the
//! infimum of the functional. Energies are in the unrescaled form.

use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::{branching_profile, constant_profile};
use crate::energy::{energy_analytic, evaluate_grid, EnergyBreakdown, EnergyParams};
use crate::error::{Error, Result};
use crate::minimizer::{minimize, Init, MinimizeOptions};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Constant,
    Branching,
    /// Grid minimizer started from the best analytic candidate.
    Minimized,
}

impl Construction {
    pub fn label(self) -> &'static str {
        match self {
            Construction::Constant => "constant",
            Construction::Branching => "branching",
            Construction::Minimized => "minimized",
        }
    }
}

impl std::fmt::Display for Construction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Construction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Construction::Constant),
            "branching" => Ok(Construction::Branching),
            "minimized" => Ok(Construction::Minimized),
            _ => Err(Error::InvalidParameter(format!("unknown construction `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord<T> {
    pub p: T,
    pub theta: T,
    pub epsilon: T,
    pub sigma: T,
    pub construction: Construction,
    /// `None` when the construction failed; see `error`.
    pub energy: Option<EnergyBreakdown<T>>,
    pub error: Option<String>,
    pub wall_time_s: f64,
    pub best: bool,
}

impl<T: Real> SweepRecord<T> {
    pub fn total(&self) -> Option<T> {
        self.energy.as_ref().map(|e| e.total)
    }

    /// `theta^p min{1, (eps/theta^p)^{p/(p+1)}}`.
    pub fn scaling_law(&self) -> T {
        scaling_law(self.p, self.theta, self.epsilon)
    }
}

pub fn scaling_law<T: Real>(p: T, theta: T, epsilon: T) -> T {
    let tp = theta.powf(p);
    tp * T::one().min((epsilon / tp).powf(p / (p + T::one())))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub constructions: Vec<Construction>,
    /// Grid refinement of the best analytic candidate, if set.
    pub refine_with_minimizer: Option<MinimizeOptions>,
}

impl SweepOptions {
    pub fn analytic() -> Self {
        Self {
            constructions: vec![Construction::Constant, Construction::Branching],
            refine_with_minimizer: None,
        }
    }
}

/// `n` values log-spaced over `[lo, hi]`, ascending.
pub fn log_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * T::from_count(k) / T::from_count(n - 1)).exp())
        .collect()
}

/// Evaluates each requested construction at every `eps` (in parallel) and
/// flags the lowest total per `eps`.
pub fn sweep<T: Real>(p: T, theta: T, eps_list: &[T], opts: &SweepOptions) -> Result<Vec<SweepRecord<T>>> {
    if opts.constructions.is_empty() && opts.refine_with_minimizer.is_none() {
        return Err(Error::InvalidParameter("no constructions requested".into()));
    }
    if eps_list.iter().any(|e| !(*e > T::zero()) || !e.is_finite()) {
        return Err(Error::InvalidParameter("epsilon values must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("epsilon values must be sorted".into()));
    }
    EnergyParams::unrescaled(p, theta, T::one())?;
    let rows: Vec<Vec<SweepRecord<T>>> = eps_list
        .par_iter()
        .map(|&eps| sweep_point(p, theta, eps, opts))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn sweep_point<T: Real>(p: T, theta: T, eps: T, opts: &SweepOptions) -> Result<Vec<SweepRecord<T>>> {
    let params = EnergyParams::unrescaled(p, theta, eps)?;
    let mut kinds = opts.constructions.clone();
    kinds.sort();
    kinds.dedup();
    let mut out = Vec::new();
    let record = |c: Construction, started: Instant, r: Result<EnergyBreakdown<T>>| {
        let (energy, error) = match r {
            Ok(e) => (Some(e), None),
            Err(e) => (None, Some(e.to_string())),
        };
        SweepRecord {
            p,
            theta,
            epsilon: eps,
            sigma: params.sigma,
            construction: c,
            energy,
            error,
            wall_time_s: started.elapsed().as_secs_f64(),
            best: false,
        }
    };
    for c in kinds {
        let t0 = Instant::now();
        let r = match c {
            Construction::Constant => energy_analytic(&constant_profile(), &params),
            Construction::Branching if eps > params.theta_p() => continue,
            Construction::Branching => branching_profile(&params).and_then(|(prof, _)| energy_analytic(&prof, &params)),
            Construction::Minimized => continue,
        };
        out.push(record(c, t0, r));
    }
    if let Some(mopts) = &opts.refine_with_minimizer {
        let t0 = Instant::now();
        let branching_best = out
            .iter()
            .filter(|r| r.energy.is_some())
            .min_by(|a, b| a.total().partial_cmp(&b.total()).expect("finite"))
            .is_some_and(|r| r.construction == Construction::Branching);
        let init = if branching_best { Init::Branching } else { Init::Constant };
        let r = minimize(&params, mopts, &init).and_then(|m| evaluate_grid(&m.field, &params));
        out.push(record(Construction::Minimized, t0, r));
    }
    if let Some(best) = out
        .iter_mut()
        .filter(|r| r.energy.is_some())
        .min_by(|a, b| a.total().partial_cmp(&b.total()).expect("finite"))
    {
        best.best = true;
    }
    Ok(out)
}

/// Writes `p,theta,epsilon,sigma,construction,elastic_d1,elastic_d2,interfacial,total,best_flag`.
pub fn write_csv<T: Real, W: Write>(records: &[SweepRecord<T>], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "p",
        "theta",
        "epsilon",
        "sigma",
        "construction",
        "elastic_d1",
        "elastic_d2",
        "interfacial",
        "total",
        "best_flag",
    ])
    .map_err(csv_err)?;
    let f = |x: T| format!("{:.16e}", x.to_f64_lossy());
    for r in records {
        let parts = r
            .energy
            .as_ref()
            .map(|e| [f(e.elastic_d1), f(e.elastic_d2), f(e.interfacial), f(e.total)])
            .unwrap_or_else(|| std::array::from_fn(|_| "NaN".to_string()));
        wr.write_record([
            f(r.p),
            f(r.theta),
            f(r.epsilon),
            f(r.sigma),
            r.construction.label().to_string(),
            parts[0].clone(),
            parts[1].clone(),
            parts[2].clone(),
            parts[3].clone(),
            u8::from(r.best).to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn records_to_csv<T: Real>(records: &[SweepRecord<T>]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    p: f64,
    theta: f64,
    epsilon: f64,
    sigma: f64,
    construction: String,
    elastic_d1: f64,
    elastic_d2: f64,
    interfacial: f64,
    total: f64,
    best_flag: u8,
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

/// Reads records written by [`write_csv`]; wall times are not stored.
pub fn read_csv<T: Real, R: Read>(r: R) -> Result<Vec<SweepRecord<T>>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (n, row) in rd.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        let construction: Construction = row.construction.parse().map_err(|e: Error| Error::Parse {
            line: n + 2,
            msg: e.to_string(),
        })?;
        let params = EnergyParams::unrescaled(T::lit(row.p), T::lit(row.theta), T::lit(row.epsilon))?;
        let energy = row.total.is_finite().then(|| EnergyBreakdown {
            elastic_d1: T::lit(row.elastic_d1),
            elastic_d2: T::lit(row.elastic_d2),
            interfacial: T::lit(row.interfacial),
            total: T::lit(row.total),
            params,
        });
        out.push(SweepRecord {
            p: params.p,
            theta: params.theta,
            epsilon: params.epsilon,
            sigma: T::lit(row.sigma),
            construction,
            error: energy.is_none().then(|| "failed in source sweep".to_string()),
            energy,
            wall_time_s: 0.0,
            best: row.best_flag != 0,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `eps <= theta^p / 16`.
    Branching,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub slope: T,
    pub intercept: T,
    /// Largest absolute deviation of `log(best)` from the fitted line.
    pub residual: T,
    pub points: usize,
}

/// Least-squares slope of `log(best)` against `log(eps)` over the best
/// records inside the regime.
pub fn fit_exponent<T: Real>(records: &[SweepRecord<T>], regime: Regime) -> Result<FitResult<T>> {
    let Regime::Branching = regime;
    let mut pts = Vec::new();
    for r in records.iter().filter(|r| r.best) {
        if r.epsilon > r.theta.powf(r.p) / T::lit(16.0) {
            continue;
        }
        let e = r.total().ok_or_else(|| Error::InsufficientData("best record without energy".into()))?;
        if !(e > T::zero()) {
            return Err(Error::InvalidParameter(format!("non-positive energy {e} at eps = {}", r.epsilon)));
        }
        pts.push((r.epsilon.ln(), e.ln()));
    }
    fit_line(&pts)
}

/// Least-squares line through `(x, y)` pairs.
pub fn fit_line<T: Real>(pts: &[(T, T)]) -> Result<FitResult<T>> {
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 points in the regime, found {}",
            pts.len()
        )));
    }
    let n = T::from_count(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::InsufficientData("all points share one abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(T::zero(), T::max);
    Ok(FitResult {
        slope,
        intercept,
        residual,
        points: pts.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport<T> {
    /// `(eps, best / scaling law)` per sweep point.
    pub ratios: Vec<(T, T)>,
    pub min_ratio: T,
    pub max_ratio: T,
    pub band: T,
    pub passes: bool,
    pub note: String,
}

pub const SANDWICH_LIMIT: f64 = 100.0;

/// Ratio of the best energy to `theta^p min{1, (eps/theta^p)^{p/(p+1)}}`.
pub fn sandwich_check<T: Real>(records: &[SweepRecord<T>]) -> SandwichReport<T> {
    let ratios: Vec<(T, T)> = records
        .iter()
        .filter(|r| r.best)
        .filter_map(|r| r.total().map(|e| (r.epsilon, e / r.scaling_law())))
        .collect();
    let min_ratio = ratios.iter().map(|r| r.1).fold(T::infinity(), T::min);
    let max_ratio = ratios.iter().map(|r| r.1).fold(T::neg_infinity(), T::max);
    let (band, passes) = if ratios.is_empty() {
        (T::one(), true)
    } else {
        let band = max_ratio / min_ratio;
        let lim = T::lit(SANDWICH_LIMIT);
        (band, band <= lim && max_ratio <= lim)
    };
    SandwichReport {
        ratios,
        min_ratio,
        max_ratio,
        band,
        passes,
        note: "best is an upper bound on the infimum; the lower side is a plausibility check, not certified".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synthetic(eps: &[f64], f: impl Fn(f64) -> f64) -> Vec<SweepRecord<f64>> {
        eps.iter()
            .map(|&e| {
                let params = EnergyParams::unrescaled(2.0, 0.5, e).unwrap();
                SweepRecord {
                    p: 2.0,
                    theta: 0.5,
                    epsilon: e,
                    sigma: params.sigma,
                    construction: Construction::Branching,
                    energy: Some(EnergyBreakdown::new(0.0, 0.0, f(e), params)),
                    error: None,
                    wall_time_s: 0.0,
                    best: true,
                }
            })
            .collect()
    }

    #[test]
    fn exact_power_law_fit() {
        let eps = log_space(1e-8, 1e-3, 7);
        let recs = synthetic(&eps, |e| e.powf(2.0 / 3.0));
        let fit = fit_exponent(&recs, Regime::Branching).unwrap();
        assert!((fit.slope - 2.0 / 3.0).abs() <= 1e-12);
        assert!(fit.residual <= 1e-12);
    }

    #[test]
    fn fit_needs_points_and_positive_energy() {
        let recs = synthetic(&[1e-4, 1e-3, 1e-2], |e| e);
        assert!(matches!(fit_exponent(&recs, Regime::Branching), Err(Error::InsufficientData(_))));
        let recs = synthetic(&[1e-5, 1e-4, 1e-3, 1e-2], |_| 0.0);
        assert!(fit_exponent(&recs, Regime::Branching).is_err());
    }

    #[test]
    fn constant_only_at_uniform_regime() {
        let theta: f64 = 0.25;
        let opts = SweepOptions {
            constructions: vec![Construction::Constant],
            refine_with_minimizer: None,
        };
        let recs = sweep(2.0, theta, &[theta.powi(2), 2.0 * theta.powi(2)], &opts).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert!(r.best);
            assert_relative_eq!(r.total().unwrap(), 0.0625, max_relative = 1e-12);
        }
        let rep = sandwich_check(&recs);
        assert!(rep.passes);
        assert!(rep.ratios.iter().all(|r| (r.1 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn best_decreases_with_eps() {
        let theta: f64 = 0.25;
        let tp = theta.powi(2);
        let eps = log_space(tp * 1e-5, tp * 1e-1, 17);
        let recs = sweep(2.0, theta, &eps, &SweepOptions::analytic()).unwrap();
        let best: Vec<f64> = recs.iter().filter(|r| r.best).map(|r| r.total().unwrap()).collect();
        assert_eq!(best.len(), eps.len());
        assert!(best.windows(2).all(|w| w[0] <= w[1]), "{best:?}");
        let rep = sandwich_check(&recs);
        assert!(rep.ratios.iter().all(|r| r.1 >= 0.1 && r.1 <= 100.0));
    }

    #[test]
    fn csv_round_trip() {
        let theta: f64 = 0.25;
        let tp = theta.powi(2);
        let recs = sweep(3.0, theta, &log_space(tp * 1e-4, tp, 4), &SweepOptions::analytic()).unwrap();
        let text = records_to_csv(&recs);
        assert!(text.starts_with("p,theta,epsilon,sigma,construction,elastic_d1,elastic_d2,interfacial,total,best_flag\n"));
        let back: Vec<SweepRecord<f64>> = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.total().unwrap().to_bits(), b.total().unwrap().to_bits());
            assert_eq!(a.best, b.best);
            assert_eq!(a.construction, b.construction);
        }
    }

    #[test]
    fn empty_construction_set_rejected() {
        assert!(sweep(2.0, 0.25, &[1e-3], &SweepOptions::default()).is_err());
        let single = synthetic(&[1e-3], |e| e);
        assert!(sandwich_check(&single).passes);
    }
}
