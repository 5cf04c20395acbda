//! Finite-size-scaling fits of failure-probability grids.
//!
//! Near the critical concentration the failure probability collapses onto a
//! function of the scaling variable x = (p - p_c0) * L^(1/nu0). Expanding
//! that function to quadratic order around x = 0 gives the fit model
//!
//! ```text
//! P_fail = A + B x + C x^2                  (plain)
//! P_fail = A + B x + C x^2 + D L^(-1/mu)    (with nonuniversal correction)
//! ```
//!
//! fitted by weighted least squares (weights 1 / stderr^2) over
//! (A, B, C, p_c0, nu0[, D, mu]), with a multi-start grid over (p_c0, nu0)
//! seeded by the curve-crossing estimate. The slope of log(dP/dp at p_c0)
//! against log L provides an independent read of 1/nu0.

mod lm;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::disorder::{Model, Prob};
use crate::error::{Error, Result};
use crate::montecarlo::PfailPoint;

/// Which lattice sizes participate in a fit. Even and odd sizes carry
/// different finite-size corrections, so pooling is allowed but flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    All,
}

impl Parity {
    pub fn matches(&self, l: usize) -> bool {
        match self {
            Parity::Even => l % 2 == 0,
            Parity::Odd => l % 2 == 1,
            Parity::All => true,
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            "all" => Ok(Parity::All),
            other => Err(Error::InvalidInput(format!(
                "unknown parity '{other}' (expected even, odd, or all)"
            ))),
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ansatz {
    Quadratic,
    Corrected,
}

impl std::str::FromStr for Ansatz {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Ansatz::Quadratic),
            "corrected" => Ok(Ansatz::Corrected),
            other => Err(Error::InvalidInput(format!(
                "unknown ansatz '{other}' (expected quadratic or corrected)"
            ))),
        }
    }
}

/// Scaling-function parameters; also the generator for synthetic data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p_c0: f64,
    pub nu0: f64,
    /// Nonuniversal additive correction (D, mu): adds D * L^(-1/mu).
    pub correction: Option<(f64, f64)>,
}

impl AnsatzParams {
    pub fn evaluate(&self, l: usize, p: f64) -> f64 {
        let x = (p - self.p_c0) * (l as f64).powf(1.0 / self.nu0);
        let mut y = self.a + self.b * x + self.c * x * x;
        if let Some((d, mu)) = self.correction {
            y += d * (l as f64).powf(-1.0 / mu);
        }
        y
    }
}

/// Synthetic failure-probability grid from exact ansatz values, optionally
/// with Gaussian noise of size `stderr` added to each point.
pub fn synthetic_points(
    model: Model,
    params: &AnsatzParams,
    sizes: &[usize],
    p_values: &[Prob],
    stderr: f64,
    noise_seed: Option<u64>,
) -> Vec<PfailPoint> {
    let mut rng = noise_seed.map(ChaCha8Rng::seed_from_u64);
    let mut out = Vec::new();
    for &l in sizes {
        for &p in p_values {
            let mut y = params.evaluate(l, p.value());
            if let Some(rng) = rng.as_mut() {
                let z: f64 = StandardNormal.sample(rng);
                y += stderr * z;
            }
            out.push(PfailPoint {
                model,
                l,
                p,
                n_samples: 0,
                n_fail: 0,
                pfail: y,
                stderr,
                master_seed: noise_seed.unwrap_or(0),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitParam {
    pub value: f64,
    pub one_sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_sigma: Option<f64>,
}

impl FitParam {
    fn new(value: f64, one_sigma: f64) -> Self {
        FitParam {
            value,
            one_sigma,
            bootstrap_sigma: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitTrace {
    pub starts: usize,
    pub converged_starts: usize,
    pub best_start: usize,
    pub iterations: usize,
    /// Set when parities were pooled; even/odd sizes are known to carry
    /// different finite-size corrections.
    pub pooled_parities: bool,
}

/// Fitted scaling parameters with one-sigma errors from the inverse
/// curvature at the optimum.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub model: Model,
    pub parity: Parity,
    pub ansatz: Ansatz,
    pub p_c0: FitParam,
    pub nu0: FitParam,
    pub a: FitParam,
    pub b: FitParam,
    pub c: FitParam,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<FitParam>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<FitParam>,
    pub chi2: f64,
    pub dof: usize,
    pub points_used: usize,
    pub trace: FitTrace,
}

impl ScalingFit {
    pub fn params(&self) -> AnsatzParams {
        AnsatzParams {
            a: self.a.value,
            b: self.b.value,
            c: self.c.value,
            p_c0: self.p_c0.value,
            nu0: self.nu0.value,
            correction: match (&self.d, &self.mu) {
                (Some(d), Some(mu)) => Some((d.value, mu.value)),
                _ => None,
            },
        }
    }
}

/// The numeric core of a fit: filtered, validated point arrays.
struct FitData {
    model: Model,
    l: Vec<f64>,
    ln_l: Vec<f64>,
    p: Vec<f64>,
    y: Vec<f64>,
    inv_sigma: Vec<f64>,
}

impl FitData {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn gather(points: &[PfailPoint], parity: Parity) -> Result<FitData> {
        let selected: Vec<&PfailPoint> =
            points.iter().filter(|pt| parity.matches(pt.l)).collect();
        if selected.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no points with parity {parity}"
            )));
        }
        let model = selected[0].model;
        if selected.iter().any(|pt| pt.model != model) {
            return Err(Error::InvalidInput(
                "fit input mixes models; fit them separately".into(),
            ));
        }
        if let Some(bad) = selected.iter().find(|pt| !(pt.stderr > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "point (L={}, p={}) has nonpositive stderr",
                bad.l, bad.p
            )));
        }
        Ok(FitData {
            model,
            l: selected.iter().map(|pt| pt.l as f64).collect(),
            ln_l: selected.iter().map(|pt| (pt.l as f64).ln()).collect(),
            p: selected.iter().map(|pt| pt.p.value()).collect(),
            y: selected.iter().map(|pt| pt.pfail).collect(),
            inv_sigma: selected.iter().map(|pt| 1.0 / pt.stderr).collect(),
        })
    }

    fn distinct_sizes(&self) -> usize {
        let mut ls: Vec<u64> = self.l.iter().map(|&v| v as u64).collect();
        ls.sort_unstable();
        ls.dedup();
        ls.len()
    }

    fn distinct_ps(&self) -> usize {
        let mut ps: Vec<u64> = self.p.iter().map(|&v| (v * 1e6).round() as u64).collect();
        ps.sort_unstable();
        ps.dedup();
        ps.len()
    }

    fn p_grid_step(&self) -> f64 {
        let mut ps: Vec<f64> = self.p.clone();
        ps.sort_by(f64::total_cmp);
        ps.dedup_by(|a, b| (*a - *b).abs() < 5e-7);
        if ps.len() < 2 {
            return 1e-3;
        }
        let mut diffs: Vec<f64> = ps.windows(2).map(|w| w[1] - w[0]).collect();
        diffs.sort_by(f64::total_cmp);
        diffs[diffs.len() / 2]
    }

    fn median_p(&self) -> f64 {
        let mut ps = self.p.clone();
        ps.sort_by(f64::total_cmp);
        ps[ps.len() / 2]
    }

    /// theta layout: [a, b, c, p_c0, nu0] (+ [d, mu] when corrected)
    fn residuals(&self, theta: &[f64], out: &mut [f64]) {
        let corrected = theta.len() == 7;
        for i in 0..self.len() {
            let x = (self.p[i] - theta[3]) * self.l[i].powf(1.0 / theta[4]);
            let mut f = theta[0] + theta[1] * x + theta[2] * x * x;
            if corrected {
                f += theta[5] * self.l[i].powf(-1.0 / theta[6]);
            }
            out[i] = (f - self.y[i]) * self.inv_sigma[i];
        }
    }

    fn jacobian(&self, theta: &[f64], out: &mut [f64]) {
        let n = theta.len();
        let corrected = n == 7;
        for i in 0..self.len() {
            let lpow = self.l[i].powf(1.0 / theta[4]);
            let x = (self.p[i] - theta[3]) * lpow;
            let w = self.inv_sigma[i];
            let slope = theta[1] + 2.0 * theta[2] * x;
            let row = &mut out[i * n..(i + 1) * n];
            row[0] = w;
            row[1] = x * w;
            row[2] = x * x * w;
            row[3] = -slope * lpow * w;
            row[4] = -slope * x * self.ln_l[i] / (theta[4] * theta[4]) * w;
            if corrected {
                let decay = self.l[i].powf(-1.0 / theta[6]);
                row[5] = decay * w;
                row[6] = theta[5] * decay * self.ln_l[i] / (theta[6] * theta[6]) * w;
            }
        }
    }

    /// Weighted linear solve for the coefficients that enter the model
    /// linearly, at fixed (p_c0, nu0[, mu]); used to seed the starts.
    fn linear_init(&self, p_c0: f64, nu0: f64, mu: Option<f64>) -> Option<Vec<f64>> {
        let nb = 3 + mu.is_some() as usize;
        let mut a = vec![0.0; nb * nb];
        let mut rhs = vec![0.0; nb];
        let mut basis = vec![0.0; nb];
        for i in 0..self.len() {
            let x = (self.p[i] - p_c0) * self.l[i].powf(1.0 / nu0);
            basis[0] = 1.0;
            basis[1] = x;
            basis[2] = x * x;
            if let Some(mu) = mu {
                basis[3] = self.l[i].powf(-1.0 / mu);
            }
            let w2 = self.inv_sigma[i] * self.inv_sigma[i];
            for j in 0..nb {
                rhs[j] += w2 * basis[j] * self.y[i];
                for k in 0..nb {
                    a[j * nb + k] += w2 * basis[j] * basis[k];
                }
            }
        }
        if lm::solve_in_place(&mut a, &mut rhs, nb) {
            Some(rhs)
        } else {
            None
        }
    }
}

const NU0_STARTS: [f64; 5] = [0.8, 1.0, 1.25, 1.5, 1.75];
const MU_STARTS: [f64; 2] = [0.71, 1.5];

/// Global quadratic-ansatz fit over (A, B, C, p_c0, nu0).
pub fn fit_quadratic(points: &[PfailPoint], parity: Parity) -> Result<ScalingFit> {
    fit_ansatz(points, parity, Ansatz::Quadratic)
}

/// Fit with the nonuniversal additive correction D * L^(-1/mu) for the
/// selected parity subset (seven parameters).
pub fn fit_corrected(points: &[PfailPoint], parity: Parity) -> Result<ScalingFit> {
    fit_ansatz(points, parity, Ansatz::Corrected)
}

fn fit_ansatz(points: &[PfailPoint], parity: Parity, ansatz: Ansatz) -> Result<ScalingFit> {
    let data = FitData::gather(points, parity)?;
    let n_params = match ansatz {
        Ansatz::Quadratic => 5,
        Ansatz::Corrected => 7,
    };
    let min_sizes = match ansatz {
        Ansatz::Quadratic => 2,
        Ansatz::Corrected => 4,
    };
    if data.distinct_sizes() < min_sizes {
        return Err(Error::InvalidInput(format!(
            "{:?} fit needs >= {} distinct L values, got {}",
            ansatz,
            min_sizes,
            data.distinct_sizes()
        )));
    }
    if data.distinct_ps() < 3 {
        return Err(Error::InvalidInput(format!(
            "fit needs >= 3 distinct p values, got {}",
            data.distinct_ps()
        )));
    }
    if data.len() <= n_params {
        return Err(Error::InvalidInput(format!(
            "fit needs more points ({}) than parameters ({n_params})",
            data.len()
        )));
    }

    // multi-start centers: crossing estimate when available, median p otherwise
    let center = crossing_estimate(points)
        .ok()
        .and_then(|c| c.median)
        .unwrap_or_else(|| data.median_p());
    let step = data.p_grid_step();
    let mut p_starts = Vec::new();
    for k in [-2.0f64, -1.0, 0.0, 1.0, 2.0] {
        let cand = (center + k * step).clamp(1e-6, 1.0 - 1e-6);
        if p_starts.iter().all(|&v: &f64| (v - cand).abs() > 1e-12) {
            p_starts.push(cand);
        }
    }
    let mu_starts: &[Option<f64>] = match ansatz {
        Ansatz::Quadratic => &[None],
        Ansatz::Corrected => &[Some(MU_STARTS[0]), Some(MU_STARTS[1])],
    };

    let m = data.len();
    let opts = lm::LmOptions::default();
    let mut best: Option<(lm::LmResult, usize)> = None;
    let mut starts = 0usize;
    let mut converged_starts = 0usize;
    let mut best_chi2_any = f64::INFINITY;
    for &p0 in &p_starts {
        for &nu0 in &NU0_STARTS {
            for &mu in mu_starts {
                starts += 1;
                let lin = data
                    .linear_init(p0, nu0, mu)
                    .unwrap_or_else(|| vec![0.3, 1.0, 0.0, 0.01][..3 + mu.is_some() as usize].to_vec());
                let mut theta0 = vec![lin[0], lin[1], lin[2], p0, nu0];
                if let Some(mu) = mu {
                    theta0.push(lin[3]);
                    theta0.push(mu);
                }
                let result = lm::minimize(
                    |t, out| data.residuals(t, out),
                    |t, out| data.jacobian(t, out),
                    &theta0,
                    m,
                    &opts,
                );
                best_chi2_any = best_chi2_any.min(result.chi2);
                if !result.converged {
                    continue;
                }
                converged_starts += 1;
                if !params_valid(&result.theta, data.model) {
                    continue;
                }
                if best.as_ref().map_or(true, |(b, _)| result.chi2 < b.chi2) {
                    best = Some((result, starts - 1));
                }
            }
        }
    }

    let (result, best_start) = best.ok_or(Error::FitFailure {
        message: format!(
            "no start converged to a valid optimum ({starts} starts, {converged_starts} converged)"
        ),
        best_chi2: best_chi2_any,
    })?;
    let sigma = |j: usize| {
        result
            .covariance
            .as_ref()
            .map(|cov| cov[j * n_params + j].max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    };
    let t = &result.theta;
    Ok(ScalingFit {
        model: data.model,
        parity,
        ansatz,
        a: FitParam::new(t[0], sigma(0)),
        b: FitParam::new(t[1], sigma(1)),
        c: FitParam::new(t[2], sigma(2)),
        p_c0: FitParam::new(t[3], sigma(3)),
        nu0: FitParam::new(t[4], sigma(4)),
        d: (n_params == 7).then(|| FitParam::new(t[5], sigma(5))),
        mu: (n_params == 7).then(|| FitParam::new(t[6], sigma(6))),
        chi2: result.chi2,
        dof: m - n_params,
        points_used: m,
        trace: FitTrace {
            starts,
            converged_starts,
            best_start,
            iterations: result.iterations,
            pooled_parities: parity == Parity::All,
        },
    })
}

fn params_valid(theta: &[f64], model: Model) -> bool {
    let (a, p_c0, nu0) = (theta[0], theta[3], theta[4]);
    nu0 > 0.0
        && p_c0 > 0.0
        && p_c0 < 1.0
        && a > 0.0
        && a < model.failure_asymptote()
        && theta.iter().all(|v| v.is_finite())
}

/// Gaussian-resampling errors: each replica perturbs every point by
/// N(0, stderr) and refits from the original optimum. The sample standard
/// deviation per parameter lands in the `bootstrap_sigma` fields.
pub fn add_bootstrap_errors(
    fit: &mut ScalingFit,
    points: &[PfailPoint],
    replicas: usize,
    seed: u64,
) -> Result<()> {
    let data = FitData::gather(points, fit.parity)?;
    let n_params = if fit.ansatz == Ansatz::Corrected { 7 } else { 5 };
    let mut theta0 = vec![
        fit.a.value,
        fit.b.value,
        fit.c.value,
        fit.p_c0.value,
        fit.nu0.value,
    ];
    if let (Some(d), Some(mu)) = (&fit.d, &fit.mu) {
        theta0.push(d.value);
        theta0.push(mu.value);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = lm::LmOptions::default();
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let mut noisy = data.y.clone();
        for (i, y) in noisy.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *y += z / data.inv_sigma[i];
        }
        let replica = FitData {
            y: noisy,
            model: data.model,
            l: data.l.clone(),
            ln_l: data.ln_l.clone(),
            p: data.p.clone(),
            inv_sigma: data.inv_sigma.clone(),
        };
        let result = lm::minimize(
            |t, out| replica.residuals(t, out),
            |t, out| replica.jacobian(t, out),
            &theta0,
            data.len(),
            &opts,
        );
        if result.converged && params_valid(&result.theta, data.model) {
            samples.push(result.theta);
        }
    }
    if samples.len() < replicas / 2 {
        return Err(Error::FitFailure {
            message: format!(
                "bootstrap unstable: only {}/{replicas} replicas converged",
                samples.len()
            ),
            best_chi2: fit.chi2,
        });
    }
    let stddev = |j: usize| {
        let mean = samples.iter().map(|t| t[j]).sum::<f64>() / samples.len() as f64;
        let var = samples
            .iter()
            .map(|t| (t[j] - mean) * (t[j] - mean))
            .sum::<f64>()
            / (samples.len() - 1) as f64;
        var.sqrt()
    };
    fit.a.bootstrap_sigma = Some(stddev(0));
    fit.b.bootstrap_sigma = Some(stddev(1));
    fit.c.bootstrap_sigma = Some(stddev(2));
    fit.p_c0.bootstrap_sigma = Some(stddev(3));
    fit.nu0.bootstrap_sigma = Some(stddev(4));
    if n_params == 7 {
        if let Some(d) = fit.d.as_mut() {
            d.bootstrap_sigma = Some(stddev(5));
        }
        if let Some(mu) = fit.mu.as_mut() {
            mu.bootstrap_sigma = Some(stddev(6));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeSlope {
    pub l: usize,
    pub slope: f64,
    pub slope_err: f64,
    /// False when the estimated slope was nonpositive and the size was
    /// excluded from the log-log fit.
    pub used: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeExponent {
    pub nu0: f64,
    pub error: f64,
    pub per_size: Vec<SizeSlope>,
}

/// Independent nu0 estimate: per size, the slope of P_fail(p) at `p_ref` by
/// weighted linear regression; then a weighted fit of log(slope) against
/// log L, whose slope is 1/nu0.
pub fn slope_exponent(points: &[PfailPoint], p_ref: f64) -> Result<SlopeExponent> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no points".into()));
    }
    let pmin = points.iter().map(|pt| pt.p.value()).fold(f64::INFINITY, f64::min);
    let pmax = points.iter().map(|pt| pt.p.value()).fold(f64::NEG_INFINITY, f64::max);
    if !(pmin <= p_ref && p_ref <= pmax) {
        return Err(Error::InvalidInput(format!(
            "p grid [{pmin}, {pmax}] does not bracket p_ref = {p_ref}"
        )));
    }
    let mut by_l: BTreeMap<usize, Vec<&PfailPoint>> = BTreeMap::new();
    for pt in points {
        by_l.entry(pt.l).or_default().push(pt);
    }
    if by_l.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "slope exponent needs >= 3 distinct L values, got {}",
            by_l.len()
        )));
    }
    let mut per_size = Vec::new();
    for (&l, pts) in &by_l {
        if pts.len() < 2 {
            continue;
        }
        // local regression: a window symmetric about p_ref, so that the
        // quadratic term of the scaling function cancels out of the slope
        // (odd moments vanish) instead of biasing it
        let lo = pts.iter().map(|pt| pt.p.value()).fold(f64::INFINITY, f64::min);
        let hi = pts
            .iter()
            .map(|pt| pt.p.value())
            .fold(f64::NEG_INFINITY, f64::max);
        let half_window = (p_ref - lo).min(hi - p_ref).max(0.0) + 1e-12;
        let mut local: Vec<&&PfailPoint> = pts
            .iter()
            .filter(|pt| (pt.p.value() - p_ref).abs() <= half_window)
            .collect();
        if local.len() < 3 {
            // p_ref sits near the grid edge; fall back to the nearest points
            let mut by_dist: Vec<&&PfailPoint> = pts.iter().collect();
            by_dist.sort_by(|a, b| {
                (a.p.value() - p_ref)
                    .abs()
                    .total_cmp(&(b.p.value() - p_ref).abs())
            });
            local = by_dist.into_iter().take(4).collect();
        }
        // weighted linear regression of pfail on (p - p_ref)
        let (mut s0, mut s1, mut s2, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for pt in local {
            let w = 1.0 / (pt.stderr * pt.stderr);
            let dx = pt.p.value() - p_ref;
            s0 += w;
            s1 += w * dx;
            s2 += w * dx * dx;
            sy += w * pt.pfail;
            sxy += w * dx * pt.pfail;
        }
        let det = s0 * s2 - s1 * s1;
        if det <= 0.0 {
            continue;
        }
        let slope = (s0 * sxy - s1 * sy) / det;
        let slope_err = (s0 / det).sqrt();
        per_size.push(SizeSlope {
            l,
            slope,
            slope_err,
            used: slope > 0.0,
        });
    }
    let usable: Vec<&SizeSlope> = per_size.iter().filter(|s| s.used).collect();
    if usable.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "slope exponent needs >= 3 usable L values, got {} (nonpositive slopes excluded)",
            usable.len()
        )));
    }
    // weighted fit of ln(slope) on ln(L)
    let (mut s0, mut s1, mut s2, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in &usable {
        let sigma_ln = s.slope_err / s.slope;
        let w = 1.0 / (sigma_ln * sigma_ln);
        let x = (s.l as f64).ln();
        let y = s.slope.ln();
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    let det = s0 * s2 - s1 * s1;
    let inv_nu = (s0 * sxy - s1 * sy) / det;
    let inv_nu_err = (s0 / det).sqrt();
    if inv_nu <= 0.0 {
        return Err(Error::FitFailure {
            message: format!("log-log slope {inv_nu} is nonpositive; no scaling trend"),
            best_chi2: f64::NAN,
        });
    }
    Ok(SlopeExponent {
        nu0: 1.0 / inv_nu,
        error: inv_nu_err / (inv_nu * inv_nu),
        per_size,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairCrossing {
    pub l_low: usize,
    pub l_high: usize,
    /// Absent when the two curves do not cross in their shared p range.
    pub crossing: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingEstimate {
    pub median: Option<f64>,
    pub spread: Option<f64>,
    pub per_pair: Vec<PairCrossing>,
}

/// Where adjacent-size P_fail(p) curves cross, found by linear
/// interpolation; the median over size pairs estimates p_c0 and seeds the
/// fit multi-start.
pub fn crossing_estimate(points: &[PfailPoint]) -> Result<CrossingEstimate> {
    let mut by_l: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for pt in points {
        by_l.entry(pt.l).or_default().push((pt.p.value(), pt.pfail));
    }
    if by_l.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "crossing estimate needs >= 2 distinct L values, got {}",
            by_l.len()
        )));
    }
    for curve in by_l.values_mut() {
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let sizes: Vec<usize> = by_l.keys().copied().collect();
    let interp = |curve: &[(f64, f64)], p: f64| -> Option<f64> {
        if p < curve[0].0 || p > curve[curve.len() - 1].0 {
            return None;
        }
        let idx = curve.partition_point(|&(cp, _)| cp <= p);
        if idx == 0 {
            return Some(curve[0].1);
        }
        if idx == curve.len() {
            return Some(curve[curve.len() - 1].1);
        }
        let (p0, y0) = curve[idx - 1];
        let (p1, y1) = curve[idx];
        if p1 == p0 {
            return Some(y0);
        }
        Some(y0 + (y1 - y0) * (p - p0) / (p1 - p0))
    };
    let mut per_pair = Vec::new();
    for w in sizes.windows(2) {
        let (low, high) = (&by_l[&w[0]], &by_l[&w[1]]);
        let lo = low[0].0.max(high[0].0);
        let hi = low[low.len() - 1].0.min(high[high.len() - 1].0);
        let mut crossings = Vec::new();
        if lo <= hi {
            let mut grid: Vec<f64> = low
                .iter()
                .chain(high.iter())
                .map(|&(p, _)| p)
                .filter(|&p| p >= lo && p <= hi)
                .collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let diffs: Vec<(f64, f64)> = grid
                .iter()
                .filter_map(|&p| {
                    Some((p, interp(high, p)? - interp(low, p)?))
                })
                .collect();
            for pair in diffs.windows(2) {
                let (p0, d0) = pair[0];
                let (p1, d1) = pair[1];
                if d0 == 0.0 {
                    crossings.push(p0);
                } else if d0 * d1 < 0.0 {
                    crossings.push(p0 + (p1 - p0) * d0 / (d0 - d1));
                }
            }
            if let Some(&(p_last, d_last)) = diffs.last() {
                if d_last == 0.0 {
                    crossings.push(p_last);
                }
            }
        }
        crossings.sort_by(f64::total_cmp);
        crossings.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        per_pair.push(PairCrossing {
            l_low: w[0],
            l_high: w[1],
            crossing: if crossings.is_empty() {
                None
            } else {
                Some(crossings[crossings.len() / 2])
            },
        });
    }
    let mut found: Vec<f64> = per_pair.iter().filter_map(|p| p.crossing).collect();
    found.sort_by(f64::total_cmp);
    let median = if found.is_empty() {
        None
    } else {
        Some(found[found.len() / 2])
    };
    let spread = median.map(|med| {
        let mut dev: Vec<f64> = found.iter().map(|v| (v - med).abs()).collect();
        dev.sort_by(f64::total_cmp);
        dev[dev.len() / 2]
    });
    Ok(CrossingEstimate {
        median,
        spread,
        per_pair,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(ps: &[&str]) -> Vec<Prob> {
        ps.iter().map(|s| Prob::parse_decimal(s).unwrap()).collect()
    }

    fn desk_grid() -> Vec<Prob> {
        let mut out = Vec::new();
        let mut micro = 95_000;
        while micro <= 115_000 {
            out.push(Prob::from_micro(micro).unwrap());
            micro += 2_000;
        }
        out
    }

    const TRUTH: AnsatzParams = AnsatzParams {
        a: 0.3,
        b: 5.0,
        c: 8.0,
        p_c0: 0.103,
        nu0: 1.46,
        correction: None,
    };

    #[test]
    fn quadratic_fit_recovers_exact_parameters() {
        let pts = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12, 16, 24],
            &desk_grid(),
            0.005,
            None,
        );
        let fit = fit_quadratic(&pts, Parity::All).unwrap();
        let rel = |got: f64, want: f64| (got - want).abs() / want.abs();
        assert!(rel(fit.a.value, 0.3) < 1e-6, "A = {}", fit.a.value);
        assert!(rel(fit.b.value, 5.0) < 1e-6, "B = {}", fit.b.value);
        assert!(rel(fit.c.value, 8.0) < 1e-6, "C = {}", fit.c.value);
        assert!(rel(fit.p_c0.value, 0.103) < 1e-6, "p_c0 = {}", fit.p_c0.value);
        assert!(rel(fit.nu0.value, 1.46) < 1e-6, "nu0 = {}", fit.nu0.value);
        assert!(fit.chi2 < 1e-12);
        assert_eq!(fit.dof, 4 * 11 - 5);
    }

    #[test]
    fn corrected_fit_recovers_injected_correction() {
        let truth = AnsatzParams {
            correction: Some((0.165, 0.71)),
            ..TRUTH
        };
        let pts = synthetic_points(
            Model::Rbim2d,
            &truth,
            &[8, 12, 16, 24, 32],
            &desk_grid(),
            0.005,
            None,
        );
        let fit = fit_corrected(&pts, Parity::Even).unwrap();
        let rel = |got: f64, want: f64| (got - want).abs() / want.abs();
        assert!(rel(fit.p_c0.value, 0.103) < 1e-3);
        assert!(rel(fit.nu0.value, 1.46) < 1e-3);
        assert!(rel(fit.a.value, 0.3) < 1e-3);
        assert!(rel(fit.b.value, 5.0) < 1e-3);
        assert!(rel(fit.c.value, 8.0) < 1e-3);
        assert!(rel(fit.d.as_ref().unwrap().value, 0.165) < 1e-3);
        assert!(rel(fit.mu.as_ref().unwrap().value, 0.71) < 1e-3);
    }

    #[test]
    fn corrected_and_quadratic_agree_when_correction_absent() {
        let pts = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12, 16, 24],
            &desk_grid(),
            0.005,
            Some(42),
        );
        let q = fit_quadratic(&pts, Parity::Even).unwrap();
        let c = fit_corrected(&pts, Parity::Even).unwrap();
        let sep = (q.p_c0.value - c.p_c0.value).abs();
        assert!(
            sep < q.p_c0.one_sigma + c.p_c0.one_sigma,
            "p_c0 disagree: {} vs {} (sigmas {} {})",
            q.p_c0.value,
            c.p_c0.value,
            q.p_c0.one_sigma,
            c.p_c0.one_sigma
        );
        let sep_nu = (q.nu0.value - c.nu0.value).abs();
        assert!(sep_nu < q.nu0.one_sigma + c.nu0.one_sigma);
        // nested models: the corrected fit can only improve chi2
        assert!(c.chi2 <= q.chi2 + 1e-9);
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        let pts = synthetic_points(Model::Rbim2d, &TRUTH, &[8], &desk_grid(), 0.005, None);
        assert!(matches!(
            fit_quadratic(&pts, Parity::All),
            Err(Error::InvalidInput(_))
        ));
        let pts3 =
            synthetic_points(Model::Rbim2d, &TRUTH, &[8, 12, 16], &desk_grid(), 0.005, None);
        assert!(matches!(
            fit_corrected(&pts3, Parity::All),
            Err(Error::InvalidInput(_))
        ));
        let two_p = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12, 16],
            &grid(&["0.1", "0.11"]),
            0.005,
            None,
        );
        assert!(fit_quadratic(&two_p, Parity::All).is_err());
    }

    #[test]
    fn chi2_gradient_vanishes_at_optimum() {
        let pts = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12, 16, 24],
            &desk_grid(),
            0.005,
            Some(7),
        );
        let fit = fit_quadratic(&pts, Parity::All).unwrap();
        let data = FitData::gather(&pts, Parity::All).unwrap();
        let theta = vec![
            fit.a.value,
            fit.b.value,
            fit.c.value,
            fit.p_c0.value,
            fit.nu0.value,
        ];
        let m = data.len();
        let chi2_of = |t: &[f64]| {
            let mut r = vec![0.0; m];
            data.residuals(t, &mut r);
            r.iter().map(|v| v * v).sum::<f64>()
        };
        // analytic gradient: 2 J^T r
        let mut r = vec![0.0; m];
        let mut jac = vec![0.0; m * 5];
        data.residuals(&theta, &mut r);
        data.jacobian(&theta, &mut jac);
        for j in 0..5 {
            let analytic: f64 = (0..m).map(|i| 2.0 * jac[i * 5 + j] * r[i]).sum();
            let h = 1e-7 * theta[j].abs().max(1e-3);
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let numeric = (chi2_of(&tp) - chi2_of(&tm)) / (2.0 * h);
            assert!(
                (analytic - numeric).abs() <= 1e-5 * (1.0 + numeric.abs()),
                "param {j}: analytic {analytic} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn shifting_p_shifts_p_c0_exactly() {
        let pts = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12, 16, 24],
            &desk_grid(),
            0.005,
            Some(13),
        );
        let fit = fit_quadratic(&pts, Parity::All).unwrap();
        let shifted: Vec<PfailPoint> = pts
            .iter()
            .map(|pt| {
                let mut s = pt.clone();
                s.p = Prob::from_micro(pt.p.micro() + 10_000).unwrap();
                s
            })
            .collect();
        let fit2 = fit_quadratic(&shifted, Parity::All).unwrap();
        assert!(
            (fit2.p_c0.value - fit.p_c0.value - 0.01).abs() < 1e-6,
            "shift: {} -> {}",
            fit.p_c0.value,
            fit2.p_c0.value
        );
        assert!((fit2.nu0.value - fit.nu0.value).abs() < 1e-6);
    }

    #[test]
    fn bootstrap_errors_track_curvature_errors() {
        let pts = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12, 16, 24],
            &desk_grid(),
            0.005,
            Some(3),
        );
        let mut fit = fit_quadratic(&pts, Parity::All).unwrap();
        add_bootstrap_errors(&mut fit, &pts, 100, 17).unwrap();
        let boot = fit.p_c0.bootstrap_sigma.unwrap();
        assert!(boot > 0.0);
        let ratio = boot / fit.p_c0.one_sigma;
        assert!(
            (0.3..3.0).contains(&ratio),
            "bootstrap sigma {boot} vs curvature {}",
            fit.p_c0.one_sigma
        );
    }

    #[test]
    fn slope_exponent_recovers_nu0() {
        let pts = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12, 16, 24],
            &desk_grid(),
            0.002,
            None,
        );
        let est = slope_exponent(&pts, 0.103).unwrap();
        assert!(
            (est.nu0 - 1.46).abs() / 1.46 < 0.02,
            "nu0 = {} +- {}",
            est.nu0,
            est.error
        );
        assert!(est.per_size.iter().all(|s| s.used));
        // functional form: slope at p_c0 scales as L^(1/nu0)
        let s8 = est.per_size.iter().find(|s| s.l == 8).unwrap().slope;
        let s16 = est.per_size.iter().find(|s| s.l == 16).unwrap().slope;
        let measured = (s16 / s8).ln() / (16f64 / 8.0).ln();
        assert!((measured - 1.0 / 1.46).abs() < 0.02);
    }

    #[test]
    fn slope_exponent_validates_input() {
        let pts = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12],
            &desk_grid(),
            0.005,
            None,
        );
        assert!(slope_exponent(&pts, 0.103).is_err(), "needs 3 sizes");
        let pts4 = synthetic_points(
            Model::Rbim2d,
            &TRUTH,
            &[8, 12, 16, 24],
            &desk_grid(),
            0.005,
            None,
        );
        assert!(slope_exponent(&pts4, 0.2).is_err(), "p_ref outside grid");
    }

    #[test]
    fn crossing_found_exactly_for_linear_curves() {
        // two curves linear in p crossing exactly at p = 0.103
        let mk = |l: usize, slope: f64| -> Vec<PfailPoint> {
            grid(&["0.095", "0.1", "0.105", "0.11"])
                .iter()
                .map(|&p| PfailPoint {
                    model: Model::Rbim2d,
                    l,
                    p,
                    n_samples: 0,
                    n_fail: 0,
                    pfail: 0.3 + slope * (p.value() - 0.103),
                    stderr: 0.005,
                    master_seed: 0,
                })
                .collect()
        };
        let mut pts = mk(8, 2.0);
        pts.extend(mk(16, 5.0));
        let est = crossing_estimate(&pts).unwrap();
        let med = est.median.unwrap();
        assert!((med - 0.103).abs() < 1e-12, "median = {med}");
        assert_eq!(est.per_pair.len(), 1);
    }

    #[test]
    fn non_crossing_curves_report_absent_estimate() {
        let mk = |l: usize, offset: f64| -> Vec<PfailPoint> {
            grid(&["0.095", "0.1", "0.105"])
                .iter()
                .map(|&p| PfailPoint {
                    model: Model::Rbim2d,
                    l,
                    p,
                    n_samples: 0,
                    n_fail: 0,
                    pfail: offset + p.value(),
                    stderr: 0.005,
                    master_seed: 0,
                })
                .collect()
        };
        let mut pts = mk(8, 0.0);
        pts.extend(mk(16, 0.5)); // parallel curves, never cross
        let est = crossing_estimate(&pts).unwrap();
        assert!(est.median.is_none());
        assert!(est.per_pair[0].crossing.is_none());
        let single = mk(8, 0.0);
        assert!(crossing_estimate(&single).is_err());
    }

    #[test]
    fn mixed_models_are_rejected() {
        let mut pts = synthetic_points(Model::Rbim2d, &TRUTH, &[8, 12], &desk_grid(), 0.005, None);
        let three_d = synthetic_points(Model::Rpgm3d, &TRUTH, &[6, 8], &desk_grid(), 0.005, None);
        pts.extend(three_d);
        assert!(matches!(
            fit_quadratic(&pts, Parity::All),
            Err(Error::InvalidInput(_))
        ));
    }
}
