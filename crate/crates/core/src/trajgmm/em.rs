use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmConfig, FitMeta, InitMethod, GmmComponent, GmmError, GmmModel, TrainingMatrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal with a cached Cholesky factor.
#[derive(Clone, Debug)]
pub struct Gaussian {
    dim: usize,
    mean: Vec<f64>,
    /// Lower-triangular factor, row-major.
    chol: Vec<f64>,
    log_norm: f64,
}

impl Gaussian {
    /// `None` when the covariance is not positive definite.
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<Self> {
        let dim = mean.len();
        let l = nalgebra::Cholesky::new(cov.clone())?.unpack();
        let mut chol = vec![0.0; dim * dim];
        let mut log_det = 0.0;
        for r in 0..dim {
            for c in 0..=r {
                chol[r * dim + c] = l[(r, c)];
            }
            log_det += 2.0 * l[(r, r)].ln();
        }
        if !log_det.is_finite() {
            return None;
        }
        Some(Self {
            dim,
            mean: mean.as_slice().to_vec(),
            chol,
            log_norm: -0.5 * (dim as f64 * LN_2PI + log_det),
        })
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        // Forward substitution L y = x − μ, small fixed buffer for d <= 8.
        let d = self.dim;
        let mut buf = [0.0f64; 8];
        let mut heap;
        let y: &mut [f64] = if d <= 8 {
            &mut buf[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut maha = 0.0;
        for r in 0..d {
            let mut acc = x[r] - self.mean[r];
            for c in 0..r {
                acc -= self.chol[r * d + c] * y[c];
            }
            let v = acc / self.chol[r * d + r];
            y[r] = v;
            maha += v * v;
        }
        self.log_norm - 0.5 * maha
    }
}

fn gaussians(components: &[GmmComponent]) -> Result<Vec<Gaussian>, GmmError> {
    components
        .iter()
        .enumerate()
        .map(|(i, c)| Gaussian::new(&c.mean, &c.covariance).ok_or(GmmError::NotPositiveDefinite(i)))
        .collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Σ_j log Σ_k π_k N(ξ_j; μ_k, Σ_k). Empty input gives 0.
pub fn loglik(model: &GmmModel, rows: &TrainingMatrix) -> Result<f64, GmmError> {
    if rows.is_empty() {
        return Ok(0.0);
    }
    let dim = model.dim();
    let gs = gaussians(&model.components)?;
    let log_priors: Vec<f64> = model.components.iter().map(|c| c.prior.ln()).collect();
    let mut buf = vec![0.0; gs.len()];
    let mut total = 0.0;
    for row in &rows.rows {
        if row.len() != dim {
            return Err(GmmError::Shape {
                expected: dim,
                got: row.len(),
            });
        }
        for ((b, g), lp) in buf.iter_mut().zip(&gs).zip(&log_priors) {
            *b = lp + g.log_density(row);
        }
        total += log_sum_exp(&buf);
    }
    Ok(total)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Flat row-major data in canonical (lexicographic) row order.
struct Data {
    n: usize,
    d: usize,
    x: Vec<f64>,
}

impl Data {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding plus a few Lloyd steps on standardized data; returns a
/// cluster index per row and the centers (standardized units).
fn kmeans_init(
    z: &Data,
    k: usize,
    iters: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let n = z.n;
    let mut centers: Vec<Vec<f64>> = vec![z.row(rng.random_range(0..n)).to_vec()];
    let mut dist2: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, w) in dist2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > u {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| dist2.iter().rposition(|w| *w > 0.0).unwrap_or(n - 1))
        } else {
            rng.random_range(0..n)
        };
        let c = z.row(pick).to_vec();
        for (i, d2) in dist2.iter_mut().enumerate() {
            *d2 = d2.min(sq_dist(z.row(i), &c));
        }
        centers.push(c);
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let row = z.row(i);
                let mut best = (0, f64::INFINITY);
                for (j, c) in centers.iter().enumerate() {
                    let d2 = sq_dist(row, c);
                    if d2 < best.1 {
                        best = (j, d2);
                    }
                }
                best.0
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; z.d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(z.row(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    (labels, centers)
}

fn weighted_moments(
    data: &Data,
    weights: impl Fn(usize) -> f64,
    reg: &[f64],
) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
    let d = data.d;
    // Accumulate offsets from a reference row to limit cancellation.
    let origin = data.row(0);
    let mut nk = 0.0;
    let mut shift = vec![0.0; d];
    for i in 0..data.n {
        let w = weights(i);
        if w == 0.0 {
            continue;
        }
        nk += w;
        for ((m, v), o) in shift.iter_mut().zip(data.row(i)).zip(origin) {
            *m += w * (v - o);
        }
    }
    if !(nk > 0.0) {
        return None;
    }
    let mean = DVector::from_iterator(d, shift.iter().zip(origin).map(|(s, o)| o + s / nk));
    let mut cov = DMatrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for i in 0..data.n {
        let w = weights(i);
        if w == 0.0 {
            continue;
        }
        for (df, (v, m)) in diff.iter_mut().zip(data.row(i).iter().zip(mean.iter())) {
            *df = v - m;
        }
        for r in 0..d {
            for c in 0..=r {
                cov[(r, c)] += w * diff[r] * diff[c];
            }
        }
    }
    for r in 0..d {
        for c in 0..=r {
            let v = cov[(r, c)] / nk;
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
        cov[(r, r)] += reg[r];
    }
    Some((nk, mean, cov))
}

/// Fits a `k`-component full-covariance mixture by EM.
///
/// Rows are first put in lexicographic order, so the result does not depend
/// on input row order. Initialization is k-means++ on standardized data drawn
/// from a ChaCha stream seeded with `seed`; standardization makes the chosen
/// seeds invariant to per-dimension shifts and positive scalings. Every
/// M-step adds `max(reg_scale·var_d, reg_floor)` to each covariance diagonal.
pub fn fit(
    data: &TrainingMatrix,
    k: usize,
    cfg: &EmConfig,
    seed: u64,
) -> Result<GmmModel, GmmError> {
    cfg.check()?;
    if k == 0 {
        return Err(GmmError::Config("components must be >= 1".into()));
    }
    let n = data.len();
    let d = data.dim;
    if n < k {
        return Err(GmmError::InsufficientData { n, k });
    }
    if d == 0 {
        return Err(GmmError::Shape {
            expected: 1,
            got: 0,
        });
    }
    for (i, row) in data.rows.iter().enumerate() {
        if row.len() != d {
            return Err(GmmError::Shape {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GmmError::NonFinite(i));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(&data.rows[a], &data.rows[b]));
    let x: Vec<f64> = order.iter().flat_map(|&i| data.rows[i].iter().copied()).collect();
    let data = Data { n, d, x };

    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut var = vec![0.0; d];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= nf);
    let reg: Vec<f64> = var
        .iter()
        .map(|v| (cfg.reg_scale * v).max(cfg.reg_floor))
        .collect();
    let sd: Vec<f64> = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();

    let z = Data {
        n,
        d,
        x: data
            .x
            .chunks(d)
            .flat_map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&sd)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    let global = weighted_moments(&data, |_| 1.0, &reg).expect("n > 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<EmRun> = None;
    let restarts = match cfg.init {
        InitMethod::KMeansPlusPlus => cfg.restarts,
        InitMethod::TimeBins => 1,
    };
    for _ in 0..restarts {
        let (labels, centers) = match cfg.init {
            InitMethod::KMeansPlusPlus => {
                let (labels, centers) = kmeans_init(&z, k, cfg.kmeans_iters, &mut rng);
                let centers: Vec<Vec<f64>> = centers
                    .iter()
                    .map(|c| c.iter().zip(&mean).zip(&sd).map(|((c, m), s)| c * s + m).collect())
                    .collect();
                (labels, centers)
            }
            InitMethod::TimeBins => time_bins(&data, k),
        };
        let components: Vec<GmmComponent> = (0..k)
            .map(|j| match weighted_moments(&data, |i| f64::from(u8::from(labels[i] == j)), &reg) {
                Some((nk, mu, cov)) => GmmComponent {
                    prior: nk,
                    mean: mu,
                    covariance: cov,
                },
                None => GmmComponent {
                    prior: 1.0,
                    mean: DVector::from_vec(centers[j].clone()),
                    covariance: global.2.clone(),
                },
            })
            .collect();
        let run = run_em(components, &data, &reg, cfg)?;
        if best.as_ref().is_none_or(|b| run.ll > b.ll) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");

    Ok(GmmModel {
        components: best.components,
        input_dims: vec![0],
        output_dims: (1..d).collect(),
        fit_meta: FitMeta {
            iterations: best.iterations,
            log_likelihood: best.ll,
            converged: best.converged,
            seed,
            time_normalization: cfg.time_normalization,
            loglik_trace: best.trace,
        },
    })
}

struct EmRun {
    components: Vec<GmmComponent>,
    ll: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn run_em(
    mut components: Vec<GmmComponent>,
    data: &Data,
    reg: &[f64],
    cfg: &EmConfig,
) -> Result<EmRun, GmmError> {
    let (n, k) = (data.n, components.len());
    let total: f64 = components.iter().map(|c| c.prior).sum();
    components.iter_mut().for_each(|c| c.prior /= total);

    let mut resp = vec![0.0; n * k];
    let mut ll = e_step(&components, data, &mut resp)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        m_step(&mut components, data, &resp, reg);
        let next = e_step(&components, data, &mut resp)?;
        trace.push(next);
        let gain = (next - ll) / n as f64;
        ll = next;
        if gain < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(EmRun {
        components,
        ll,
        trace,
        iterations,
        converged,
    })
}

/// Splits the rows into `k` equal-width bins of the first (time) column.
fn time_bins(data: &Data, k: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let ts = (0..data.n).map(|i| data.row(i)[0]);
    let lo = ts.clone().fold(f64::INFINITY, f64::min);
    let hi = ts.fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / k as f64;
    let labels = (0..data.n)
        .map(|i| {
            if width > 0.0 {
                (((data.row(i)[0] - lo) / width) as usize).min(k - 1)
            } else {
                0
            }
        })
        .collect();
    let centers = (0..k)
        .map(|j| {
            let mut c = vec![0.0; data.d];
            c[0] = lo + width * (j as f64 + 0.5);
            c
        })
        .collect();
    (labels, centers)
}

fn e_step(components: &[GmmComponent], data: &Data, resp: &mut [f64]) -> Result<f64, GmmError> {
    let k = components.len();
    let gs = gaussians(components)?;
    let log_priors: Vec<f64> = components.iter().map(|c| c.prior.ln()).collect();
    let mut ll = 0.0;
    for i in 0..data.n {
        let row = data.row(i);
        let r = &mut resp[i * k..(i + 1) * k];
        for ((slot, g), lp) in r.iter_mut().zip(&gs).zip(&log_priors) {
            *slot = lp + g.log_density(row);
        }
        let lse = log_sum_exp(r);
        r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        ll += lse;
    }
    Ok(ll)
}

fn m_step(components: &mut [GmmComponent], data: &Data, resp: &[f64], reg: &[f64]) {
    let k = components.len();
    for (j, comp) in components.iter_mut().enumerate() {
        match weighted_moments(data, |i| resp[i * k + j], reg) {
            Some((nk, mu, cov)) if nk > 1e-12 => {
                comp.prior = nk;
                comp.mean = mu;
                comp.covariance = cov;
            }
            // A component with no support keeps its parameters and loses its weight.
            other => comp.prior = other.map_or(0.0, |(nk, _, _)| nk),
        }
    }
    let total: f64 = components.iter().map(|c| c.prior).sum();
    components.iter_mut().for_each(|c| c.prior /= total);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_log_density_at_mean() {
        let g = Gaussian::new(&DVector::from_vec(vec![0.0]), &DMatrix::identity(1, 1)).unwrap();
        assert!((g.log_density(&[0.0]) + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_collapse_to_floor() {
        let data = TrainingMatrix::from_rows(vec![vec![0.3, -1.2]; 50]);
        let cfg = EmConfig::default();
        let m = fit(&data, 1, &cfg, 1).unwrap();
        let c = &m.components[0];
        assert_eq!(c.prior, 1.0);
        assert_eq!(c.mean.as_slice(), &[0.3, -1.2]);
        assert_eq!(c.covariance, DMatrix::identity(2, 2) * cfg.reg_floor);
    }

    #[test]
    fn too_few_rows_and_bad_values() {
        let cfg = EmConfig::default();
        let data = TrainingMatrix::from_rows(vec![vec![0.0, 1.0]; 3]);
        assert!(matches!(fit(&data, 4, &cfg, 0), Err(GmmError::InsufficientData { n: 3, k: 4 })));
        let data = TrainingMatrix::from_rows(vec![vec![0.0, 1.0], vec![f64::NAN, 0.0]]);
        assert!(matches!(fit(&data, 1, &cfg, 0), Err(GmmError::NonFinite(1))));
    }

    #[test]
    fn loglik_empty_and_shape() {
        let data = TrainingMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![0.2, 0.1]]);
        let m = fit(&data, 1, &EmConfig::default(), 0).unwrap();
        assert_eq!(loglik(&m, &TrainingMatrix::new(2)).unwrap(), 0.0);
        let bad = TrainingMatrix::from_rows(vec![vec![1.0]]);
        assert!(matches!(loglik(&m, &bad), Err(GmmError::Shape { .. })));
    }
}
