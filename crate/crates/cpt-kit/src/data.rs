//! Dataset ingestion, model fitting, and the screening step.
//!
//! Two CSV schemas are read (headers are exact):
//!
//! * dataset files: `x,y,z1,...,zp` — x real, y real or categorical,
//!   z columns real;
//! * ride files: `duration_s,route,time_min,y` — duration positive real,
//!   route a label, time of day in minutes in `[0, 1440)`.
//!
//! Fitting covers maximum-likelihood least squares for the Gaussian linear
//! family (σ̂² divided by N, not N−k) and the grouped kernel estimator for
//! the route/time family. Screening drops test records whose covariates
//! carry too little training mass; it reads only Z, never X or Y, which is
//! what keeps the downstream tests valid on the screened data.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    Covariate, Dataset, GaussianLinearModel, KernelGaussianModel, Response, MINUTES_PER_DAY,
};
use crate::num::Real;

/// Unlabeled (x, z) sample used to fit conditional models.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledSet<R> {
    x: Vec<R>,
    z: Vec<Vec<R>>,
}

impl<R: Real> UnlabeledSet<R> {
    pub fn new(x: Vec<R>, z: Vec<Vec<R>>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidData("empty unlabeled set".into()));
        }
        if x.len() != z.len() {
            return Err(Error::InvalidData(format!(
                "x has {} rows but z has {}",
                x.len(),
                z.len()
            )));
        }
        let p = z[0].len();
        if p == 0 {
            return Err(Error::InvalidData("z has no columns".into()));
        }
        if z.iter().any(|row| row.len() != p) {
            return Err(Error::InvalidData("ragged z matrix".into()));
        }
        if !x.iter().all(|v| v.is_finite())
            || !z.iter().all(|row| row.iter().all(|v| v.is_finite()))
        {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        Ok(UnlabeledSet { x, z })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn width(&self) -> usize {
        self.z[0].len()
    }

    pub fn x(&self) -> &[R] {
        &self.x
    }

    pub fn z(&self) -> &[Vec<R>] {
        &self.z
    }
}

/// Relative pivot tolerance for declaring the Gram matrix rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Solve the SPD system G w = c in place by Cholesky factorization.
fn cholesky_solve<R: Real>(gram: &mut [Vec<R>], rhs: &mut [R]) -> Result<Vec<R>> {
    let p = rhs.len();
    let scale = (0..p)
        .map(|k| gram[k][k])
        .fold(R::zero(), R::max)
        .max(R::min_positive_value());
    let tol = scale * R::of(RANK_TOL);

    // Lower factor overwrites the lower triangle of `gram`.
    for j in 0..p {
        let mut d = gram[j][j];
        for k in 0..j {
            d = d - gram[j][k] * gram[j][k];
        }
        if !(d > tol) {
            return Err(Error::RankDeficient);
        }
        let l_jj = d.sqrt();
        gram[j][j] = l_jj;
        for i in (j + 1)..p {
            let mut v = gram[i][j];
            for k in 0..j {
                v = v - gram[i][k] * gram[j][k];
            }
            gram[i][j] = v / l_jj;
        }
    }
    // Forward then backward substitution.
    for i in 0..p {
        let mut v = rhs[i];
        for k in 0..i {
            v = v - gram[i][k] * rhs[k];
        }
        rhs[i] = v / gram[i][i];
    }
    let mut out = vec![R::zero(); p];
    for i in (0..p).rev() {
        let mut v = rhs[i];
        for k in (i + 1)..p {
            v = v - gram[k][i] * out[k];
        }
        out[i] = v / gram[i][i];
    }
    Ok(out)
}

/// Maximum-likelihood least squares: β̂ solves the normal equations and
/// σ̂² = RSS / N (ML convention; divisor N, not N − k).
///
/// Rank deficiency is detected first, so a collinear design errors as such
/// even when N is also too small; otherwise N ≥ p + 2 is required.
pub fn fit_gaussian_linear<R: Real>(unlabeled: &UnlabeledSet<R>) -> Result<GaussianLinearModel<R>> {
    let n = unlabeled.len();
    let p = unlabeled.width();
    let z = unlabeled.z();
    let x = unlabeled.x();

    let mut gram = vec![vec![R::zero(); p]; p];
    let mut rhs = vec![R::zero(); p];
    for (row, &xi) in z.iter().zip(x) {
        for a in 0..p {
            rhs[a] += row[a] * xi;
            for b in 0..=a {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in (a + 1)..p {
            gram[a][b] = gram[b][a];
        }
    }

    let beta = cholesky_solve(&mut gram, &mut rhs)?;
    if n < p + 2 {
        return Err(Error::TooFewObservations { n, min: p + 2 });
    }

    let mut rss = R::zero();
    for (row, &xi) in z.iter().zip(x) {
        let fitted: R = row.iter().zip(&beta).map(|(&zi, &bi)| zi * bi).sum();
        let r = xi - fitted;
        rss += r * r;
    }
    let sigma2 = (rss / R::of(n as f64)).max(R::min_positive_value());
    GaussianLinearModel::new(beta, sigma2)
}

/// A typed response value for one ride.
#[derive(Clone, Debug, PartialEq)]
pub enum ResponseValue<R> {
    Real(R),
    Label(String),
}

/// One observed ride: duration (the X variable), route and time of day
/// (the Z variables), and a response (the Y variable).
#[derive(Clone, Debug, PartialEq)]
pub struct RideRecord<R> {
    pub duration_s: R,
    pub route: String,
    pub time_min: R,
    pub response: ResponseValue<R>,
}

impl<R: Real> RideRecord<R> {
    pub fn new(
        duration_s: R,
        route: impl Into<String>,
        time_min: R,
        response: ResponseValue<R>,
    ) -> Result<Self> {
        if !duration_s.is_finite() || !(duration_s > R::zero()) {
            return Err(Error::InvalidData(format!(
                "duration must be finite and positive, got {duration_s}"
            )));
        }
        if !time_min.is_finite()
            || time_min < R::zero()
            || time_min >= R::of(MINUTES_PER_DAY)
        {
            return Err(Error::InvalidData(format!(
                "time of day must lie in [0, 1440), got {time_min}"
            )));
        }
        if let ResponseValue::Real(v) = &response {
            if !v.is_finite() {
                return Err(Error::InvalidData("non-finite response".into()));
            }
        }
        Ok(RideRecord { duration_s, route: route.into(), time_min, response })
    }

    pub fn covariate(&self) -> Covariate<R> {
        Covariate::route_time(self.route.clone(), self.time_min)
    }
}

/// Default variance floor: this times the global training variance of x.
pub const VARIANCE_FLOOR_SCALE: f64 = 1e-8;

/// Default screening threshold on the kernel mass N(z).
pub const SCREEN_THRESHOLD: f64 = 20.0;

/// Default kernel bandwidth in minutes.
pub const DEFAULT_BANDWIDTH_MIN: f64 = 20.0;

/// Fit the kernel conditional Gaussian: group training rides by route and
/// store them for kernel-weighted evaluation over time of day. The variance
/// floor is `VARIANCE_FLOOR_SCALE` times the global variance of the
/// training durations, guarding against degenerate neighborhoods.
pub fn fit_kernel_gaussian<R: Real>(
    train: &[RideRecord<R>],
    bandwidth_h: R,
) -> Result<KernelGaussianModel<R>> {
    if train.is_empty() {
        return Err(Error::InvalidData("empty training set".into()));
    }
    let count = R::of(train.len() as f64);
    let mean = train.iter().map(|r| r.duration_s).sum::<R>() / count;
    let var = train
        .iter()
        .map(|r| {
            let d = r.duration_s - mean;
            d * d
        })
        .sum::<R>()
        / count;
    let floor = var * R::of(VARIANCE_FLOOR_SCALE);

    // Routes are directed: "A->B" and "B->A" are distinct groups.
    let mut groups: BTreeMap<String, Vec<(R, R)>> = BTreeMap::new();
    for record in train {
        groups
            .entry(record.route.clone())
            .or_default()
            .push((record.time_min, record.duration_s));
    }
    KernelGaussianModel::new(groups, bandwidth_h, floor)
}

/// Keep the records whose covariates carry kernel mass >= threshold.
/// Reads only Z; order-preserving and idempotent.
pub fn screen<R: Real>(
    test: &[RideRecord<R>],
    model: &KernelGaussianModel<R>,
    threshold: R,
) -> Result<Vec<RideRecord<R>>> {
    let mut kept = Vec::new();
    for record in test {
        if model.effective_mass(&record.covariate())? >= threshold {
            kept.push(record.clone());
        }
    }
    Ok(kept)
}

/// Assemble a [`Dataset`] from ride records: x = duration, z = route/time,
/// y = the response column (which must be of one consistent kind).
pub fn rides_to_dataset<R: Real>(records: &[RideRecord<R>]) -> Result<Dataset<R>> {
    if records.is_empty() {
        return Err(Error::InvalidData("no rides".into()));
    }
    let x: Vec<R> = records.iter().map(|r| r.duration_s).collect();
    let z: Vec<Covariate<R>> = records.iter().map(RideRecord::covariate).collect();
    let all_real = records
        .iter()
        .all(|r| matches!(r.response, ResponseValue::Real(_)));
    let all_label = records
        .iter()
        .all(|r| matches!(r.response, ResponseValue::Label(_)));
    let y = if all_real {
        Response::Real(
            records
                .iter()
                .map(|r| match &r.response {
                    ResponseValue::Real(v) => *v,
                    ResponseValue::Label(_) => unreachable!(),
                })
                .collect(),
        )
    } else if all_label {
        Response::Categorical(
            records
                .iter()
                .map(|r| match &r.response {
                    ResponseValue::Label(l) => l.clone(),
                    ResponseValue::Real(_) => unreachable!(),
                })
                .collect(),
        )
    } else {
        return Err(Error::InvalidData(
            "mixed real and categorical responses".into(),
        ));
    };
    Dataset::new(x, y, z)
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_finite(raw: &str, line: u64, column: &str) -> Result<f64> {
    let value: f64 = raw.trim().parse().map_err(|_| Error::Row {
        line,
        msg: format!("column {column:?}: cannot parse {raw:?} as a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Row {
            line,
            msg: format!("column {column:?}: non-finite value {raw:?}"),
        });
    }
    Ok(value)
}

/// Classify a raw y column: real if every entry parses to a finite number,
/// categorical otherwise.
fn classify_responses(raw: &[String]) -> Response<f64> {
    let parsed: Option<Vec<f64>> = raw
        .iter()
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    match parsed {
        Some(values) => Response::Real(values),
        None => Response::Categorical(raw.to_vec()),
    }
}

/// Load a dataset CSV with header `x,y,z1,...,zp`.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset<f64>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::InvalidData(format!(
            "expected header x,y,z1,...,zp in {}",
            path.display()
        )));
    }
    for (k, name) in headers.iter().skip(2).enumerate() {
        let want = format!("z{}", k + 1);
        if name != want {
            return Err(Error::InvalidData(format!(
                "expected column {want:?}, found {name:?} in {}",
                path.display()
            )));
        }
    }
    let p = headers.len() - 2;

    let mut x = Vec::new();
    let mut raw_y = Vec::new();
    let mut z_rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != headers.len() {
            return Err(Error::Row {
                line,
                msg: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        x.push(parse_finite(&record[0], line, "x")?);
        raw_y.push(record[1].trim().to_string());
        let mut row = Vec::with_capacity(p);
        for k in 0..p {
            row.push(parse_finite(&record[2 + k], line, &format!("z{}", k + 1))?);
        }
        z_rows.push(row);
    }
    if x.is_empty() {
        return Err(Error::InvalidData(format!("no rows in {}", path.display())));
    }
    Dataset::from_matrix(x, classify_responses(&raw_y), z_rows)
}

/// Load a ride CSV with header `duration_s,route,time_min,y`.
pub fn load_rides_csv(path: impl AsRef<Path>) -> Result<Vec<RideRecord<f64>>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["duration_s", "route", "time_min", "y"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::InvalidData(format!(
            "expected header duration_s,route,time_min,y in {}",
            path.display()
        )));
    }

    let mut rows: Vec<(u64, f64, String, f64, String)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 4 {
            return Err(Error::Row {
                line,
                msg: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let duration = parse_finite(&record[0], line, "duration_s")?;
        let time = parse_finite(&record[2], line, "time_min")?;
        rows.push((
            line,
            duration,
            record[1].trim().to_string(),
            time,
            record[3].trim().to_string(),
        ));
    }
    if rows.is_empty() {
        return Err(Error::InvalidData(format!("no rows in {}", path.display())));
    }

    let raw_y: Vec<String> = rows.iter().map(|r| r.4.clone()).collect();
    let responses = classify_responses(&raw_y);
    let mut records = Vec::with_capacity(rows.len());
    for (idx, (line, duration, route, time, _)) in rows.into_iter().enumerate() {
        let response = match &responses {
            Response::Real(vals) => ResponseValue::Real(vals[idx]),
            Response::Categorical(labels) => ResponseValue::Label(labels[idx].clone()),
        };
        records.push(
            RideRecord::new(duration, route, time, response)
                .map_err(|e| Error::Row { line, msg: e.to_string() })?,
        );
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConditionalDensity;
    use crate::streams::substream;
    use std::io::Write;

    #[test]
    fn fit_recovers_noiseless_coefficients() {
        let b = [1.5, -2.0, 0.25];
        let mut rng = substream(70, &[0]);
        let mut x = Vec::new();
        let mut z = Vec::new();
        for _ in 0..40 {
            let row: Vec<f64> = (0..3).map(|_| f64::std_normal(&mut rng)).collect();
            x.push(row.iter().zip(b).map(|(zi, bi)| zi * bi).sum());
            z.push(row);
        }
        let fit = fit_gaussian_linear(&UnlabeledSet::new(x, z).unwrap()).unwrap();
        for (got, want) in fit.coefficients().iter().zip(b) {
            assert!((got - want).abs() < 1e-8);
        }
        assert!(fit.sigma2() <= 1e-12);
    }

    #[test]
    fn fit_is_consistent_as_n_grows() {
        let p = 20usize;
        let mut rng = substream(71, &[0]);
        let b: Vec<f64> = (0..p).map(|_| f64::std_normal(&mut rng)).collect();
        let mut med_errs = Vec::new();
        for &n in &[100usize, 1000, 10_000] {
            let mut errs = Vec::new();
            for rep in 0..50 {
                let mut rng = substream(72, &[n as u64, rep]);
                let mut x = Vec::with_capacity(n);
                let mut z = Vec::with_capacity(n);
                for _ in 0..n {
                    let row: Vec<f64> = (0..p).map(|_| f64::std_normal(&mut rng)).collect();
                    let mean: f64 = row.iter().zip(&b).map(|(zi, bi)| zi * bi).sum();
                    x.push(mean + f64::std_normal(&mut rng));
                    z.push(row);
                }
                let fit = fit_gaussian_linear(&UnlabeledSet::new(x, z).unwrap()).unwrap();
                let err: f64 = fit
                    .coefficients()
                    .iter()
                    .zip(&b)
                    .map(|(a, c)| (a - c).powi(2))
                    .sum::<f64>()
                    .sqrt();
                errs.push(err);
            }
            errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            med_errs.push(errs[25]);
        }
        assert!(
            med_errs[0] > med_errs[1] && med_errs[1] > med_errs[2],
            "median errors not decreasing: {med_errs:?}"
        );
    }

    #[test]
    fn fit_reports_rank_deficiency_before_small_n() {
        // N = p + 1 with a duplicated column: the rank error wins.
        let p = 3usize;
        let mut z = Vec::new();
        let mut x = Vec::new();
        for i in 0..(p + 1) {
            let v = i as f64 + 1.0;
            z.push(vec![v, 2.0 * v, v * v]); // column 2 = 2 * column 1
            x.push(v);
        }
        let err = fit_gaussian_linear(&UnlabeledSet::new(x, z).unwrap());
        assert!(matches!(err, Err(Error::RankDeficient)));
    }

    #[test]
    fn fit_requires_enough_rows() {
        // Full-rank design but N < p + 2.
        let z = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let x = vec![1.0, 2.0, 3.0];
        let err = fit_gaussian_linear(&UnlabeledSet::new(x, z).unwrap());
        assert!(matches!(err, Err(Error::TooFewObservations { .. })));
    }

    #[test]
    fn fit_residuals_orthogonal_to_design() {
        let mut rng = substream(73, &[0]);
        let p = 5usize;
        let n = 200usize;
        let b: Vec<f64> = (0..p).map(|_| f64::std_normal(&mut rng)).collect();
        let mut x = Vec::new();
        let mut z = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..p).map(|_| f64::std_normal(&mut rng)).collect();
            let mean: f64 = row.iter().zip(&b).map(|(zi, bi)| zi * bi).sum();
            x.push(mean + f64::std_normal(&mut rng));
            z.push(row);
        }
        let set = UnlabeledSet::new(x, z).unwrap();
        let fit = fit_gaussian_linear(&set).unwrap();
        for col in 0..p {
            let mut dot = 0.0;
            for (row, &xi) in set.z().iter().zip(set.x()) {
                let fitted: f64 = row
                    .iter()
                    .zip(fit.coefficients())
                    .map(|(zi, bi)| zi * bi)
                    .sum();
                dot += row[col] * (xi - fitted);
            }
            assert!(dot.abs() < 1e-8, "column {col} residual dot {dot}");
        }
    }

    fn ride(duration: f64, route: &str, time: f64) -> RideRecord<f64> {
        RideRecord::new(duration, route, time, ResponseValue::Real(0.0)).unwrap()
    }

    #[test]
    fn kernel_fit_single_point() {
        let model = fit_kernel_gaussian(&[ride(7.0, "r", 600.0)], 20.0).unwrap();
        let z = Covariate::route_time("r", 600.0);
        let stats = model.stats(&z).unwrap();
        assert_eq!(stats.mean, 7.0);
        // Single training point: raw variance 0, clamped to the floor
        // (which is 0 here because the global variance is 0).
        assert_eq!(stats.raw_variance, 0.0);
        assert_eq!(stats.variance, model.variance_floor());
        assert!((model.effective_mass(&z).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_fit_two_coincident_points() {
        let train = [ride(0.0 + 1e-9, "r", 300.0), ride(2.0, "r", 300.0)];
        // Durations must be positive; use 1e-9 and 2 and check against the
        // exact weighted moments.
        let model = fit_kernel_gaussian(&train, 20.0).unwrap();
        let z = Covariate::route_time("r", 300.0);
        let stats = model.stats(&z).unwrap();
        assert!((stats.mean - (2.0 + 1e-9) / 2.0).abs() < 1e-12);
        assert!((stats.raw_variance - ((2.0 - 1e-9f64) / 2.0).powi(2)).abs() < 1e-9);
        assert!((model.effective_mass(&z).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_weighted_variance_identity() {
        // sigma^2(z) = weighted second moment - mean^2 must match the direct
        // weighted variance sum w (x - mean)^2 / mass.
        let mut rng = substream(74, &[0]);
        let mut train = Vec::new();
        for _ in 0..300 {
            let t = f64::uniform(&mut rng) * MINUTES_PER_DAY;
            let x = 100.0 + 30.0 * f64::std_normal(&mut rng);
            train.push(ride(x.max(1.0), "r", t));
        }
        let model = fit_kernel_gaussian(&train, 20.0).unwrap();
        for k in 0..50 {
            let time = k as f64 * 28.8;
            let z = Covariate::route_time("r", time);
            let stats = model.stats(&z).unwrap();
            let mut mass = 0.0;
            let mut direct = 0.0;
            for r in &train {
                let d = crate::model::circular_minutes(r.time_min, time);
                let w = (-d * d / (2.0 * 20.0 * 20.0)).exp();
                mass += w;
                direct += w * (r.duration_s - stats.mean).powi(2);
            }
            assert!((stats.raw_variance - direct / mass).abs() < 1e-10);
        }
    }

    #[test]
    fn screen_threshold_and_order() {
        let train: Vec<RideRecord<f64>> =
            (0..20).map(|_| ride(5.0, "popular", 700.0)).collect();
        let model = fit_kernel_gaussian(&train, 20.0).unwrap();

        let test = vec![
            ride(1.0, "popular", 700.0), // mass exactly 20
            ride(2.0, "unseen", 700.0),  // mass 0
            ride(3.0, "popular", 700.0),
        ];
        // Mass exactly at the threshold is retained (>=, not >).
        let kept = screen(&test, &model, 20.0).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].duration_s, 1.0);
        assert_eq!(kept[1].duration_s, 3.0);

        // Threshold 0 keeps everything, including unseen routes.
        let all = screen(&test, &model, 0.0).unwrap();
        assert_eq!(all.len(), 3);

        // Unseen routes only: empty output at the default threshold.
        let none = screen(&[ride(1.0, "nowhere", 10.0)], &model, SCREEN_THRESHOLD).unwrap();
        assert!(none.is_empty());

        // Idempotence.
        let again = screen(&kept, &model, 20.0).unwrap();
        assert_eq!(again, kept);
    }

    #[test]
    fn kernel_model_sampling_uses_fitted_moments() {
        let train: Vec<RideRecord<f64>> = (0..50)
            .map(|i| ride(300.0 + (i % 5) as f64, "r", 600.0))
            .collect();
        let model = fit_kernel_gaussian(&train, 20.0).unwrap();
        let z = Covariate::route_time("r", 600.0);
        let mut rng = substream(75, &[0]);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| model.sample(&z, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let stats = model.stats(&z).unwrap();
        assert!((mean - stats.mean).abs() < 0.05);
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn dataset_csv_round_trip() {
        let f = write_temp("x,y,z1,z2\n1.0,0.5,0.1,0.2\n2.0,1.5,0.3,0.4\n3.0,2.5,0.5,0.6\n");
        let ds = load_dataset_csv(f.path()).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.x(), &[1.0, 2.0, 3.0]);
        assert!(matches!(ds.y(), Response::Real(v) if v == &[0.5, 1.5, 2.5]));
    }

    #[test]
    fn dataset_csv_categorical_response() {
        let f = write_temp("x,y,z1\n1.0,A,0.1\n2.0,B,0.3\n");
        let ds = load_dataset_csv(f.path()).unwrap();
        assert!(matches!(ds.y(), Response::Categorical(v) if v.len() == 2));
    }

    #[test]
    fn dataset_csv_rejects_empty_and_bad_rows() {
        let f = write_temp("x,y,z1\n");
        let err = load_dataset_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("no rows"));

        let f = write_temp("x,y,z1\n1.0,2.0,0.5\nbogus,2.0,0.5\n");
        let err = load_dataset_csv(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "line number missing: {msg}");

        let f = write_temp("a,b,c\n1,2,3\n");
        assert!(load_dataset_csv(f.path()).is_err());
    }

    #[test]
    fn rides_csv_parses_and_validates() {
        let f = write_temp(
            "duration_s,route,time_min,y\n300,A->B,480,Member\n200,B->A,900,Casual\n",
        );
        let rides = load_rides_csv(f.path()).unwrap();
        assert_eq!(rides.len(), 2);
        assert_eq!(rides[0].route, "A->B");
        assert!(matches!(rides[0].response, ResponseValue::Label(_)));

        let f = write_temp("duration_s,route,time_min,y\nnot_a_number,A->B,480,1\n");
        let err = load_rides_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");

        let f = write_temp("duration_s,route,time_min,y\n300,A->B,1500,1\n");
        assert!(load_rides_csv(f.path()).is_err());
    }

    #[test]
    fn rides_to_dataset_requires_consistent_kinds() {
        let a = RideRecord::new(1.0, "r", 0.0, ResponseValue::Real(1.0)).unwrap();
        let b = RideRecord::new(1.0, "r", 0.0, ResponseValue::Label("x".into())).unwrap();
        assert!(rides_to_dataset(&[a.clone(), b]).is_err());
        let ds = rides_to_dataset(&[a.clone(), a]).unwrap();
        assert_eq!(ds.n(), 2);
    }

    #[test]
    fn missing_file_error_names_path() {
        let err = load_dataset_csv("/definitely/not/here.csv").unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.csv"));
    }
}
