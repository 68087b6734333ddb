//! Positive BLASSO on discrete observations, and a noise-robustness harness.
//!
//! The solver alternates greedy insertion at the dual maximum, an exact
//! non-negative amplitude solve, and joint Newton sliding of amplitudes and
//! positions. Every accepted step lowers the objective.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpikeError};
use crate::framework::{Framework, SpikeConfiguration};
use crate::kernel::Kernel;
use crate::linalg::{Matrix, SpdFactor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Coarse grid used to locate the dual maximum.
    pub grid_points: usize,
    pub max_outer: usize,
    pub max_slide: usize,
    /// A new atom is inserted only where `eta > 1 + dual_tol`.
    pub dual_tol: f64,
    /// Atoms closer than `merge_tol * span` are fused.
    pub merge_tol: f64,
    /// Search interval for positions; derived from kernel and samples when absent.
    pub domain: Option<(f64, f64)>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid_points: 2001,
            max_outer: 64,
            max_slide: 300,
            dual_tol: 1e-9,
            merge_tol: 1e-7,
            domain: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimality {
    /// `max(0, sup eta - 1)` over the refined grid.
    pub max_dual_violation: f64,
    /// `eta(x_i)` at each recovered position.
    pub support_dual_values: Vec<f64>,
    /// Primal-dual gap relative to the objective.
    pub relative_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub spikes: SpikeConfiguration,
    pub objective: f64,
    pub optimality: Optimality,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
}

impl SolverResult {
    pub fn ensure_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(SpikeError::NotConverged {
                iterations: self.iterations,
            })
        }
    }

    /// Larger of the dual violation and the relative primal-dual gap.
    pub fn dual_gap(&self) -> f64 {
        self.optimality.max_dual_violation.max(self.optimality.relative_gap.abs())
    }
}

/// Default search interval: `4 sigma` around the samples for the Gaussian,
/// `[c, c + 15 / s_min]` for the Laplace kernel.
pub fn default_domain(fw: &Framework) -> (f64, f64) {
    let s = fw.measure().locations();
    match *fw.kernel() {
        Kernel::Gaussian { sigma } => {
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo - 4.0 * sigma, hi + 4.0 * sigma)
        }
        Kernel::Laplace { c } => {
            let smin = s.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
            let reach = if smin.is_finite() { 15.0 / smin } else { 15.0 };
            (c, c + reach)
        }
    }
}

struct Problem<'a> {
    fw: &'a Framework,
    y: &'a [f64],
    lambda: f64,
    lo: f64,
    hi: f64,
}

/// Atom and its first two derivatives as sample vectors.
struct Atom {
    v: [Vec<f64>; 3],
}

impl<'a> Problem<'a> {
    fn atom(&self, x: f64, order: usize) -> Result<Atom> {
        let jet = self.fw.atom_jet::<f64>(x, order)?;
        let k = self.y.len();
        let get = |d: usize| if d <= order { jet.row(d).to_vec() } else { vec![0.0; k] };
        Ok(Atom {
            v: [get(0), get(1), get(2)],
        })
    }

    fn residual(&self, atoms: &[Atom], amps: &[f64]) -> Vec<f64> {
        let mut r = self.y.to_vec();
        for (at, &a) in atoms.iter().zip(amps) {
            for (ri, &p) in r.iter_mut().zip(&at.v[0]) {
                *ri -= a * p;
            }
        }
        r
    }

    fn objective_from(&self, r: &[f64], amps: &[f64]) -> f64 {
        self.lambda * amps.iter().sum::<f64>() + 0.5 * self.fw.inner(r, r)
    }

    fn objective(&self, xs: &[f64], amps: &[f64]) -> Result<f64> {
        let atoms = xs.iter().map(|&x| self.atom(x, 0)).collect::<Result<Vec<_>>>()?;
        let r = self.residual(&atoms, amps);
        Ok(self.objective_from(&r, amps))
    }

    fn eta(&self, t: f64, r: &[f64], order: usize) -> Result<[f64; 3]> {
        let a = self.atom(t, order)?;
        let mut out = [0.0; 3];
        for (d, o) in out.iter_mut().enumerate().take(order + 1) {
            *o = self.fw.inner(&a.v[d], r) / self.lambda;
        }
        Ok(out)
    }

    fn grid(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Location and value of the dual maximum: coarse grid, local 1:100 grid, Newton polish.
    fn dual_max(&self, r: &[f64], grid: &[f64]) -> Result<(f64, f64)> {
        let vals: Vec<f64> = grid
            .par_iter()
            .map(|&t| self.eta(t, r, 0).map(|e| e[0]))
            .collect::<Result<_>>()?;
        let (mut i, mut best) = (0, f64::NEG_INFINITY);
        for (j, &v) in vals.iter().enumerate() {
            if v > best {
                best = v;
                i = j;
            }
        }
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        let mut t_best = grid[i];
        for j in 0..=100 {
            let t = a + (b - a) * j as f64 / 100.0;
            let v = self.eta(t, r, 0)?[0];
            if v > best {
                best = v;
                t_best = t;
            }
        }
        let mut t = t_best;
        for _ in 0..30 {
            let e = self.eta(t, r, 2)?;
            if !(e[2] < 0.0) {
                break;
            }
            let next = t - e[1] / e[2];
            if !(next >= a && next <= b) {
                break;
            }
            let v = self.eta(next, r, 0)?[0];
            if v < best {
                break;
            }
            let moved = (next - t).abs();
            best = v;
            t = next;
            if moved <= 1e-15 * (1.0 + t.abs()) {
                break;
            }
        }
        Ok((t, best))
    }

    /// Optimal amplitudes at fixed positions.
    fn amplitudes(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let atoms = xs.iter().map(|&x| self.atom(x, 0)).collect::<Result<Vec<_>>>()?;
        let n = atoms.len();
        let h = Matrix::from_fn(n, n, |i, j| self.fw.inner(&atoms[i].v[0], &atoms[j].v[0]));
        let c: Vec<f64> = atoms
            .iter()
            .map(|a| self.fw.inner(&a.v[0], self.y) - self.lambda)
            .collect();
        Ok(nnls(&h, &c))
    }

    /// Joint Newton steps on amplitudes and positions with Levenberg damping.
    fn slide(&self, xs: &mut [f64], amps: &mut [f64], max_iter: usize) -> Result<()> {
        let n = xs.len();
        if n == 0 {
            return Ok(());
        }
        let mut mu = 1e-6;
        let mut current = self.objective(xs, amps)?;
        for _ in 0..max_iter {
            let atoms = xs.iter().map(|&x| self.atom(x, 2)).collect::<Result<Vec<_>>>()?;
            let r = self.residual(&atoms, amps);
            let ip = |a: &[f64], b: &[f64]| self.fw.inner(a, b);
            let mut g = vec![0.0; 2 * n];
            for i in 0..n {
                g[i] = self.lambda - ip(&atoms[i].v[0], &r);
                g[n + i] = -amps[i] * ip(&atoms[i].v[1], &r);
            }
            let mut h = Matrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] = ip(&atoms[i].v[0], &atoms[j].v[0]);
                    let ax = amps[j] * ip(&atoms[i].v[0], &atoms[j].v[1]);
                    let xx = amps[i] * amps[j] * ip(&atoms[i].v[1], &atoms[j].v[1]);
                    h[(i, n + j)] = ax;
                    h[(n + j, i)] = ax;
                    h[(n + i, n + j)] = xx;
                }
                let d1 = ip(&atoms[i].v[1], &r);
                h[(i, n + i)] -= d1;
                h[(n + i, i)] -= d1;
                h[(n + i, n + i)] -= amps[i] * ip(&atoms[i].v[2], &r);
            }
            // amplitudes pinned at zero with outward gradient stay put
            let fixed: Vec<bool> = (0..2 * n)
                .map(|p| (p < n && amps[p] <= 0.0 && g[p] >= 0.0) || (p >= n && amps[p - n] <= 0.0))
                .collect();
            let gmax = (0..2 * n).filter(|&p| !fixed[p]).map(|p| g[p].abs()).fold(0.0, f64::max);
            if gmax <= 1e-15 * self.lambda.max(1e-300) {
                break;
            }
            let diag_scale: Vec<f64> = (0..2 * n).map(|p| h[(p, p)].abs().max(1e-300)).collect();
            let mut accepted = false;
            while mu < 1e16 {
                let free: Vec<usize> = (0..2 * n).filter(|&p| !fixed[p]).collect();
                let hf = Matrix::from_fn(free.len(), free.len(), |a, b| {
                    let (p, q) = (free[a], free[b]);
                    h[(p, q)] + if p == q { mu * diag_scale[p] } else { 0.0 }
                });
                let rhs: Vec<f64> = free.iter().map(|&p| -g[p]).collect();
                let step = match SpdFactor::new(&hf, 1e-15) {
                    Ok(f) => f.solve(&rhs),
                    Err(_) => {
                        mu *= 10.0;
                        continue;
                    }
                };
                let mut nx = xs.to_vec();
                let mut na = amps.to_vec();
                for (&p, &s) in free.iter().zip(&step) {
                    if p < n {
                        na[p] = (na[p] + s).max(0.0);
                    } else {
                        nx[p - n] = (nx[p - n] + s).clamp(self.lo, self.hi);
                    }
                }
                let val = self.objective(&nx, &na)?;
                if val < current {
                    let tiny = step.iter().map(|s| s.abs()).fold(0.0, f64::max) <= 1e-15;
                    xs.copy_from_slice(&nx);
                    amps.copy_from_slice(&na);
                    current = val;
                    mu = (mu / 5.0).max(1e-12);
                    accepted = !tiny;
                    break;
                }
                mu *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        Ok(())
    }
}

/// Minimizes `a^T H a / 2 - c^T a` over `a >= 0` (Lawson-Hanson active set).
pub fn nnls(h: &Matrix<f64>, c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut a = vec![0.0; n];
    let mut passive = vec![false; n];
    let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    for _ in 0..(3 * n + 10) {
        let ha = h.mul_vec(&a);
        let grad: Vec<f64> = (0..n).map(|i| c[i] - ha[i]).collect();
        let pick = (0..n)
            .filter(|&i| !passive[i] && grad[i] > 1e-14 * scale)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = pick else { break };
        passive[j] = true;
        let mut stuck = false;
        for _ in 0..(2 * n + 2) {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let hp = Matrix::from_fn(idx.len(), idx.len(), |p, q| h[(idx[p], idx[q])]);
            let cp: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
            let z = match SpdFactor::new(&hp, 1e-15) {
                Ok(f) => f.solve(&cp),
                Err(_) => {
                    stuck = true;
                    break;
                }
            };
            if z.iter().all(|&v| v > 0.0) {
                a.iter_mut().for_each(|v| *v = 0.0);
                for (&i, &v) in idx.iter().zip(&z) {
                    a[i] = v;
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (&i, &v) in idx.iter().zip(&z) {
                if v <= 0.0 {
                    alpha = alpha.min(a[i] / (a[i] - v));
                }
            }
            for (&i, &v) in idx.iter().zip(&z) {
                a[i] += alpha * (v - a[i]);
                if a[i] <= 1e-300 {
                    a[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
        if stuck {
            passive[j] = false;
            break;
        }
    }
    a
}

/// Optimal non-negative amplitudes for fixed positions.
pub fn amplitudes_at(fw: &Framework, y: &[f64], lambda: f64, positions: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = default_domain(fw);
    let p = problem(fw, y, lambda, (lo, hi))?;
    p.amplitudes(positions)
}

fn problem<'a>(fw: &'a Framework, y: &'a [f64], lambda: f64, domain: (f64, f64)) -> Result<Problem<'a>> {
    if !fw.is_discrete() {
        return Err(SpikeError::InvalidConfig("the solver needs discrete observations".into()));
    }
    if y.len() != fw.measure().len() {
        return Err(SpikeError::InvalidConfig(format!(
            "{} observations for {} samples",
            y.len(),
            fw.measure().len()
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SpikeError::DomainViolation {
            what: "lambda",
            value: lambda,
            domain: "(0, inf)".into(),
        });
    }
    let (lo, hi) = domain;
    if !(lo < hi) {
        return Err(SpikeError::InvalidConfig(format!("empty domain [{lo}, {hi}]")));
    }
    Ok(Problem { fw, y, lambda, lo, hi })
}

/// Solves `min lambda * sum a_i + |Phi m - y|^2 / 2` over non-negative spike trains.
pub fn solve_pblasso(fw: &Framework, y: &[f64], lambda: f64, opts: &SolverOptions) -> Result<SolverResult> {
    let domain = opts.domain.unwrap_or_else(|| default_domain(fw));
    let p = problem(fw, y, lambda, domain)?;
    let grid = p.grid(opts.grid_points);
    let span = p.hi - p.lo;
    let mut xs: Vec<f64> = Vec::new();
    let mut amps: Vec<f64> = Vec::new();
    let mut history = vec![p.objective(&xs, &amps)?];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_outer {
        iterations += 1;
        let r = p.residual(&xs.iter().map(|&x| p.atom(x, 0)).collect::<Result<Vec<_>>>()?, &amps);
        let (t, val) = p.dual_max(&r, &grid)?;
        if val <= 1.0 + opts.dual_tol {
            converged = true;
            break;
        }
        if xs.iter().any(|&x| (x - t).abs() <= opts.merge_tol * span) {
            // the maximum sits on an existing atom: polish instead of inserting
            p.slide(&mut xs, &mut amps, opts.max_slide)?;
        } else {
            xs.push(t);
            amps.push(0.0);
            amps = p.amplitudes(&xs)?;
            p.slide(&mut xs, &mut amps, opts.max_slide)?;
        }
        amps = p.amplitudes(&xs)?;
        prune(&mut xs, &mut amps);
        merge(&p, &mut xs, &mut amps, opts.merge_tol * span)?;
        history.push(p.objective(&xs, &amps)?.min(*history.last().expect("nonempty")));
    }

    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let xs: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
    let amps: Vec<f64> = order.iter().map(|&i| amps[i]).collect();

    let atoms = xs.iter().map(|&x| p.atom(x, 0)).collect::<Result<Vec<_>>>()?;
    let r = p.residual(&atoms, &amps);
    let objective = p.objective_from(&r, &amps);
    let (_, sup) = p.dual_max(&r, &grid)?;
    let support_dual_values = xs.iter().map(|&x| p.eta(x, &r, 0).map(|e| e[0])).collect::<Result<Vec<_>>>()?;
    let sup = support_dual_values.iter().copied().fold(sup, f64::max);
    // dual point r / (lambda * max(1, sup eta)) is feasible
    let s = sup.max(1.0);
    let rr = p.fw.inner(&r, &r);
    let ry = p.fw.inner(&r, y);
    let dual = ry / s - rr / (2.0 * s * s);
    let relative_gap = if objective > 0.0 { (objective - dual) / objective } else { 0.0 };

    Ok(SolverResult {
        spikes: SpikeConfiguration {
            positions: xs,
            amplitudes: amps,
        },
        objective,
        optimality: Optimality {
            max_dual_violation: (sup - 1.0).max(0.0),
            support_dual_values,
            relative_gap,
        },
        iterations,
        converged,
        objective_history: history,
    })
}

fn prune(xs: &mut Vec<f64>, amps: &mut Vec<f64>) {
    let keep: Vec<usize> = (0..xs.len()).filter(|&i| amps[i] > 0.0).collect();
    *xs = keep.iter().map(|&i| xs[i]).collect();
    *amps = keep.iter().map(|&i| amps[i]).collect();
}

fn merge(p: &Problem, xs: &mut Vec<f64>, amps: &mut Vec<f64>, tol: f64) -> Result<()> {
    loop {
        let mut pair = None;
        'outer: for i in 0..xs.len() {
            for j in (i + 1)..xs.len() {
                if (xs[i] - xs[j]).abs() <= tol {
                    pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = pair else { return Ok(()) };
        let before = p.objective(xs, amps)?;
        let a = amps[i] + amps[j];
        let x = (amps[i] * xs[i] + amps[j] * xs[j]) / a;
        let mut nx = xs.clone();
        nx[i] = x;
        nx.remove(j);
        let mut na = p.amplitudes(&nx)?;
        prune(&mut nx, &mut na);
        if p.objective(&nx, &na)? <= before * (1.0 + 1e-14) {
            *xs = nx;
            *amps = na;
        } else {
            return Ok(());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    pub noise_scales: Vec<f64>,
    /// `lambda = h / alpha` at noise level `h`.
    pub alpha: f64,
    /// Lower bound on `lambda`, relative to the clean-signal norm.
    pub lambda_floor: f64,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            noise_scales: vec![1e-6, 3e-6, 1e-5, 3e-5, 1e-4],
            alpha: 0.5,
            lambda_floor: 1e-10,
            trials: 10,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub noise: f64,
    pub trial: usize,
    pub lambda: f64,
    pub n_spikes: usize,
    pub pos_err: f64,
    pub amp_err: f64,
    pub dual_gap: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub noise: f64,
    pub median_pos_err: f64,
    pub max_pos_err: f64,
    /// Fraction of trials recovering the true number of spikes.
    pub exact_count_rate: f64,
    pub max_dual_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub records: Vec<TrialRecord>,
    pub levels: Vec<LevelSummary>,
    /// Least-squares slope of `log median pos_err` against `log h`.
    pub slope: Option<f64>,
}

/// Noise vector with unit-variance Gaussian entries rescaled to weighted norm `h`.
pub fn noise_vector(fw: &Framework, h: f64, seed: u64, level: usize, trial: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((level as u64) << 32) | trial as u64);
    let k = fw.measure().len();
    let mut w: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = fw.inner(&w, &w).sqrt();
    if norm > 0.0 {
        w.iter_mut().for_each(|v| *v *= h / norm);
    }
    w
}

/// Recovery error against the truth: each true spike is matched to the
/// nearest recovered one.
fn recovery_errors(truth: &SpikeConfiguration, found: &SpikeConfiguration) -> (f64, f64) {
    if found.positions.is_empty() {
        return (f64::INFINITY, f64::INFINITY);
    }
    let mut pos = 0.0f64;
    let mut amp = 0.0f64;
    for (&x, &a) in truth.positions.iter().zip(&truth.amplitudes) {
        let (j, d) = found
            .positions
            .iter()
            .enumerate()
            .map(|(j, &y)| (j, (y - x).abs()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("nonempty");
        pos = pos.max(d);
        amp = amp.max((found.amplitudes[j] - a).abs());
    }
    (pos, amp)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `log y` against `log x` over positive finite pairs.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solves noisy instances at each noise level and reports recovery errors.
pub fn support_stability_experiment(
    fw: &Framework,
    spikes: &SpikeConfiguration,
    opts: &ExperimentOptions,
) -> Result<ExperimentReport> {
    spikes.validate()?;
    if !(opts.alpha > 0.0) {
        return Err(SpikeError::DomainViolation {
            what: "alpha",
            value: opts.alpha,
            domain: "(0, inf)".into(),
        });
    }
    let clean = fw
        .forward(spikes)?
        .samples()
        .ok_or_else(|| SpikeError::InvalidConfig("the experiment needs discrete observations".into()))?
        .to_vec();
    let clean_norm = fw.inner(&clean, &clean).sqrt();
    let jobs: Vec<(usize, usize)> = (0..opts.noise_scales.len())
        .flat_map(|l| (0..opts.trials).map(move |t| (l, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(level, trial)| {
            let h = opts.noise_scales[level];
            let noise = noise_vector(fw, h, opts.seed, level, trial);
            let y: Vec<f64> = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let lambda = (h / opts.alpha).max(opts.lambda_floor * clean_norm);
            let res = solve_pblasso(fw, &y, lambda, &opts.solver)?;
            let (pos_err, amp_err) = recovery_errors(spikes, &res.spikes);
            Ok(TrialRecord {
                noise: h,
                trial,
                lambda,
                n_spikes: res.spikes.len(),
                pos_err,
                amp_err,
                dual_gap: res.dual_gap(),
                converged: res.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let m = spikes.len();
    let levels: Vec<LevelSummary> = opts
        .noise_scales
        .iter()
        .map(|&h| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.noise == h).collect();
            let mut errs: Vec<f64> = rows.iter().map(|r| r.pos_err).collect();
            let max_pos_err = errs.iter().copied().fold(0.0, f64::max);
            LevelSummary {
                noise: h,
                median_pos_err: median(&mut errs),
                max_pos_err,
                exact_count_rate: rows.iter().filter(|r| r.n_spikes == m).count() as f64 / rows.len().max(1) as f64,
                max_dual_gap: rows.iter().map(|r| r.dual_gap).fold(0.0, f64::max),
            }
        })
        .collect();
    let slope = log_log_slope(&levels.iter().map(|l| (l.noise, l.median_pos_err)).collect::<Vec<_>>());
    Ok(ExperimentReport { records, levels, slope })
}
