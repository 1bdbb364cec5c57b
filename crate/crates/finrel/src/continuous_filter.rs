//! Continuous-time filtering with endogenous volatility.
//!
//! The market observes `d xi_t = sigma X dt + dB_t` for a hidden terminal
//! value `X`. The posterior over `X` stays an exponential tilt of the prior
//! with potential `sigma x xi_t - sigma^2 x^2 t / 2`, and as a process it
//! solves
//!
//! ```text
//! dq_t(x) = sigma (x - m_t) q_t(x) dW_t
//! ```
//!
//! driven by the innovation `dW_t = d xi_t - sigma m_t dt`, where `m_t` is
//! the posterior mean. The price `S_t = e^{-r_f (T - t)} m_t` then diffuses
//! with coefficient `Sigma_t = e^{-r_f (T - t)} sigma Var(X | F_t)`:
//! volatility is the posterior variance in disguise. In the two-point case
//! the posterior probability `pi_t` of the high state closes on itself,
//! `d pi = sigma (H - L) pi (1 - pi) dW`, and the discounted price
//! `L + (H - L) pi_t` has volatility `sigma (H - L)^2 pi (1 - pi)`.
//!
//! Priors over a continuum are discretized to a finite grid and the density
//! equation is applied per grid atom; the two-point model is the smallest
//! such grid. Simulation uses the Euler-Maruyama scheme with negative-mass
//! clipping and renormalization after each step. All randomness flows
//! through a seeded portable generator; batch runs derive one independent
//! stream per path from (seed, path index), so results do not depend on
//! scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("dt must satisfy 0 < dt <= T, got dt = {dt}, T = {horizon}")]
    BadStep { dt: f64, horizon: f64 },
    #[error("grid must be strictly increasing")]
    GridNotIncreasing,
    #[error("grid and weights must have equal positive length")]
    GridShape,
    #[error("grid weight {value} at {index} is not strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("binary bounds must satisfy H > L, got L = {low}, H = {high}")]
    BadBounds { low: f64, high: f64 },
    #[error("initial probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("posterior mass vanished at step {step}; use a smaller dt")]
    ZeroMass { step: usize },
}

/// Observation process parameters: constraint strength `sigma`, horizon
/// `T`, step `dt`, and the continuously-compounded rate `r_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModel {
    pub sigma: f64,
    pub horizon: f64,
    pub dt: f64,
    pub r_f: f64,
}

impl ObservationModel {
    pub fn new(sigma: f64, horizon: f64, dt: f64, r_f: f64) -> Result<Self, FilterError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(FilterError::NonPositiveSigma(sigma));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(FilterError::NonPositiveHorizon(horizon));
        }
        if !(dt > 0.0) || dt > horizon {
            return Err(FilterError::BadStep { dt, horizon });
        }
        Ok(Self {
            sigma,
            horizon,
            dt,
            r_f,
        })
    }

    /// Number of Euler steps covering the horizon.
    pub fn num_steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }

    fn discount(&self, t: f64) -> f64 {
        (-self.r_f * (self.horizon - t)).exp()
    }
}

/// A prior over terminal values supported on a finite grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPrior {
    grid: Vec<f64>,
    weights: Vec<f64>,
}

impl GridPrior {
    pub fn new(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self, FilterError> {
        if grid.is_empty() || grid.len() != weights.len() {
            return Err(FilterError::GridShape);
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(FilterError::GridNotIncreasing);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(FilterError::NonPositiveWeight { index, value });
            }
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(Self { grid, weights })
    }

    /// Two-point prior on `{low, high}` with `P(high) = pi0`; `pi0` must be
    /// interior so both atoms carry mass.
    pub fn binary(low: f64, high: f64, pi0: f64) -> Result<Self, FilterError> {
        if !(high > low) {
            return Err(FilterError::BadBounds { low, high });
        }
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(FilterError::BadProbability(pi0));
        }
        Self::new(vec![low, high], vec![1.0 - pi0, pi0])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// A realized observation path `xi` over a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ObservationPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len(), "times and values must align");
        assert!(times.len() >= 2, "a path needs at least two points");
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Keeps every `factor`-th point. The step count must divide evenly so
    /// the terminal point is preserved.
    pub fn thin(&self, factor: usize) -> ObservationPath {
        assert!(factor >= 1);
        assert_eq!(
            (self.times.len() - 1) % factor,
            0,
            "thinning must keep the endpoint"
        );
        let times = self.times.iter().step_by(factor).cloned().collect();
        let values = self.values.iter().step_by(factor).cloned().collect();
        ObservationPath { times, values }
    }
}

/// The per-time posterior representation of a filter path.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorPath {
    /// One probability vector over the grid per time.
    Grid(Vec<Vec<f64>>),
    /// The probability of the high state per time.
    Binary(Vec<f64>),
}

/// One simulated filtering path: posterior, moments, price, and volatility
/// per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPath {
    times: Vec<f64>,
    xi: Vec<f64>,
    posterior: PosteriorPath,
    mean: Vec<f64>,
    variance: Vec<f64>,
    price: Vec<f64>,
    vol: Vec<f64>,
    clip_count: usize,
    max_mass_drift: f64,
}

impl FilterPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn posterior(&self) -> &PosteriorPath {
        &self.posterior
    }

    /// High-state probabilities for binary paths.
    pub fn pi(&self) -> Option<&[f64]> {
        match &self.posterior {
            PosteriorPath::Binary(pi) => Some(pi),
            PosteriorPath::Grid(_) => None,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn price(&self) -> &[f64] {
        &self.price
    }

    pub fn vol(&self) -> &[f64] {
        &self.vol
    }

    /// Number of negative-mass clips performed along the path.
    pub fn clip_count(&self) -> usize {
        self.clip_count
    }

    /// Largest pre-renormalization deviation of the posterior mass from 1
    /// seen along the path. The Euler step preserves mass exactly in exact
    /// arithmetic, so this is rounding plus clipped mass and shrinks with
    /// the step size.
    pub fn max_mass_drift(&self) -> f64 {
        self.max_mass_drift
    }

    pub fn terminal_mean(&self) -> f64 {
        *self.mean.last().expect("path is nonempty")
    }

    /// Realized quadratic variation of the price path.
    pub fn realized_quadratic_variation(&self) -> f64 {
        self.price.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
    }

    /// Left-endpoint quadrature of the integrated squared volatility.
    pub fn integrated_squared_vol(&self) -> f64 {
        self.times
            .windows(2)
            .zip(&self.vol)
            .map(|(w, &v)| v * v * (w[1] - w[0]))
            .sum()
    }
}

/// A deterministic, portable stream for path `index` of a batch seeded by
/// `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates the observation process for a hidden terminal value:
/// `xi_{k+1} = xi_k + sigma * true_state * dt + sqrt(dt) Z_k`.
pub fn simulate_observation(
    model: &ObservationModel,
    true_state: f64,
    seed: u64,
) -> ObservationPath {
    let mut rng = path_rng(seed, 0);
    observation_path_with(model, true_state, &mut rng)
}

fn observation_path_with(
    model: &ObservationModel,
    true_state: f64,
    rng: &mut ChaCha8Rng,
) -> ObservationPath {
    observation_path_from_noise(model, true_state, || rng.sample(StandardNormal))
}

fn observation_path_from_noise(
    model: &ObservationModel,
    true_state: f64,
    mut next_normal: impl FnMut() -> f64,
) -> ObservationPath {
    let steps = model.num_steps();
    let sqrt_dt = model.dt.sqrt();
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    values.push(0.0);
    let mut xi = 0.0;
    for k in 0..steps {
        xi += model.sigma * true_state * model.dt + sqrt_dt * next_normal();
        times.push((k + 1) as f64 * model.dt);
        values.push(xi);
    }
    ObservationPath { times, values }
}

/// The exact Bayes posterior over the grid after observing `xi_t` at time
/// `t`: `q(x) ∝ p(x) exp(sigma x xi_t - sigma^2 x^2 t / 2)`, normalized in
/// log space.
pub fn exact_posterior(prior: &GridPrior, model: &ObservationModel, xi_t: f64, t: f64) -> Vec<f64> {
    assert!(t >= 0.0, "time must be nonnegative");
    let scores: Vec<f64> = prior
        .grid
        .iter()
        .zip(&prior.weights)
        .map(|(&x, &w)| w.ln() + model.sigma * x * xi_t - 0.5 * model.sigma.powi(2) * x * x * t)
        .collect();
    let shift = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnormalized: Vec<f64> = scores.iter().map(|s| (s - shift).exp()).collect();
    let total: f64 = unnormalized.iter().sum();
    unnormalized.iter().map(|w| w / total).collect()
}

/// How the driving noise of a filter simulation is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimulationMode {
    /// The observation path is generated around a hidden terminal value and
    /// the innovation is computed as `d xi - sigma m dt`.
    Observation { true_state: f64 },
    /// The innovation increments are drawn directly as the primitive noise.
    Innovation,
}

fn grid_moments(grid: &[f64], weights: &[f64]) -> (f64, f64) {
    let mean: f64 = grid.iter().zip(weights).map(|(x, w)| x * w).sum();
    let second: f64 = grid.iter().zip(weights).map(|(x, w)| x * x * w).sum();
    (mean, (second - mean * mean).max(0.0))
}

/// Accumulates the per-time records of a grid filter path.
struct GridRecorder<'a> {
    model: &'a ObservationModel,
    grid: &'a [f64],
    posterior: Vec<Vec<f64>>,
    mean: Vec<f64>,
    variance: Vec<f64>,
    price: Vec<f64>,
    vol: Vec<f64>,
}

impl<'a> GridRecorder<'a> {
    fn new(model: &'a ObservationModel, grid: &'a [f64], capacity: usize) -> Self {
        Self {
            model,
            grid,
            posterior: Vec::with_capacity(capacity),
            mean: Vec::with_capacity(capacity),
            variance: Vec::with_capacity(capacity),
            price: Vec::with_capacity(capacity),
            vol: Vec::with_capacity(capacity),
        }
    }

    /// Records the state at time `t` and returns the posterior mean.
    fn record(&mut self, t: f64, weights: &[f64]) -> f64 {
        let (mu, var) = grid_moments(self.grid, weights);
        let discount = self.model.discount(t);
        self.posterior.push(weights.to_vec());
        self.mean.push(mu);
        self.variance.push(var);
        self.price.push(discount * mu);
        self.vol.push(discount * self.model.sigma * var);
        mu
    }

    fn finish(
        self,
        times: Vec<f64>,
        xi: Vec<f64>,
        clip_count: usize,
        max_mass_drift: f64,
    ) -> FilterPath {
        FilterPath {
            times,
            xi,
            posterior: PosteriorPath::Grid(self.posterior),
            mean: self.mean,
            variance: self.variance,
            price: self.price,
            vol: self.vol,
            clip_count,
            max_mass_drift,
        }
    }
}

/// One Euler step of the density equation under innovation increment `dw`:
/// multiply by `1 + sigma (x - m) dw`, clip negatives, renormalize.
/// Returns the number of clips and the pre-renormalization total, or
/// `None` when all mass vanished.
fn density_step(
    weights: &mut [f64],
    grid: &[f64],
    sigma: f64,
    m: f64,
    dw: f64,
) -> Option<(usize, f64)> {
    let mut clips = 0usize;
    let mut total = 0.0;
    for (w, &x) in weights.iter_mut().zip(grid) {
        let factor = 1.0 + sigma * (x - m) * dw;
        let mut next = *w * factor;
        if next < 0.0 {
            next = 0.0;
            clips += 1;
        }
        *w = next;
        total += next;
    }
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Some((clips, total))
}

/// Runs the Euler-Maruyama density filter along a given observation path;
/// the step sizes are taken from the path's own time grid.
pub fn filter_on_path(
    prior: &GridPrior,
    model: &ObservationModel,
    path: &ObservationPath,
) -> Result<FilterPath, FilterError> {
    let steps = path.len() - 1;
    let mut weights = prior.weights.clone();
    let mut clip_count = 0usize;
    let mut max_mass_drift = 0.0f64;
    let mut recorder = GridRecorder::new(model, &prior.grid, steps + 1);
    let mut m_k = recorder.record(path.times[0], &weights);

    for k in 0..steps {
        let dt = path.times[k + 1] - path.times[k];
        let d_xi = path.values[k + 1] - path.values[k];
        let innovation = d_xi - model.sigma * m_k * dt;
        let (clips, total) = density_step(&mut weights, &prior.grid, model.sigma, m_k, innovation)
            .ok_or(FilterError::ZeroMass { step: k + 1 })?;
        clip_count += clips;
        max_mass_drift = max_mass_drift.max((total - 1.0).abs());
        m_k = recorder.record(path.times[k + 1], &weights);
    }
    Ok(recorder.finish(
        path.times.clone(),
        path.values.clone(),
        clip_count,
        max_mass_drift,
    ))
}

/// Simulates the grid density filter, either around a hidden state
/// (observation mode) or with the innovation as primitive noise. The
/// observation path is reported in both modes; in innovation mode it is
/// reconstructed from `d xi = sigma m dt + dW`.
pub fn simulate_filter_sde(
    prior: &GridPrior,
    model: &ObservationModel,
    mode: SimulationMode,
    seed: u64,
) -> Result<FilterPath, FilterError> {
    let mut rng = path_rng(seed, 0);
    simulate_filter_sde_with(prior, model, mode, &mut rng)
}

fn simulate_filter_sde_with(
    prior: &GridPrior,
    model: &ObservationModel,
    mode: SimulationMode,
    rng: &mut ChaCha8Rng,
) -> Result<FilterPath, FilterError> {
    match mode {
        SimulationMode::Observation { true_state } => {
            let path = observation_path_with(model, true_state, rng);
            filter_on_path(prior, model, &path)
        }
        SimulationMode::Innovation => {
            let steps = model.num_steps();
            let sqrt_dt = model.dt.sqrt();
            let mut weights = prior.weights.clone();
            let mut clip_count = 0usize;
            let mut max_mass_drift = 0.0f64;
            let mut times = Vec::with_capacity(steps + 1);
            let mut xi = Vec::with_capacity(steps + 1);
            times.push(0.0);
            xi.push(0.0);
            let mut recorder = GridRecorder::new(model, &prior.grid, steps + 1);
            let mut m_k = recorder.record(0.0, &weights);
            let mut xi_value = 0.0;

            for k in 0..steps {
                let dw = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
                xi_value += model.sigma * m_k * model.dt + dw;
                times.push((k + 1) as f64 * model.dt);
                xi.push(xi_value);
                let (clips, total) = density_step(&mut weights, &prior.grid, model.sigma, m_k, dw)
                    .ok_or(FilterError::ZeroMass { step: k + 1 })?;
                clip_count += clips;
                max_mass_drift = max_mass_drift.max((total - 1.0).abs());
                m_k = recorder.record((k + 1) as f64 * model.dt, &weights);
            }
            Ok(recorder.finish(times, xi, clip_count, max_mass_drift))
        }
    }
}

/// Simulates the closed two-point posterior equation
/// `d pi = sigma (H - L) pi (1 - pi) dW` with the innovation as primitive
/// noise, clamping to `[0, 1]`.
pub fn simulate_binary_sde(
    model: &ObservationModel,
    low: f64,
    high: f64,
    pi0: f64,
    seed: u64,
) -> Result<FilterPath, FilterError> {
    let mut rng = path_rng(seed, 0);
    simulate_binary_sde_with(model, low, high, pi0, &mut rng)
}

fn simulate_binary_sde_with(
    model: &ObservationModel,
    low: f64,
    high: f64,
    pi0: f64,
    rng: &mut ChaCha8Rng,
) -> Result<FilterPath, FilterError> {
    if !(high > low) {
        return Err(FilterError::BadBounds { low, high });
    }
    if !(0.0..=1.0).contains(&pi0) {
        return Err(FilterError::BadProbability(pi0));
    }
    let gap = high - low;
    let steps = model.num_steps();
    let sqrt_dt = model.dt.sqrt();

    let capacity = steps + 1;
    let mut times = Vec::with_capacity(capacity);
    let mut xi = Vec::with_capacity(capacity);
    let mut pi_path = Vec::with_capacity(capacity);
    let mut mean = Vec::with_capacity(capacity);
    let mut variance = Vec::with_capacity(capacity);
    let mut price = Vec::with_capacity(capacity);
    let mut vol = Vec::with_capacity(capacity);
    let mut clip_count = 0usize;

    let push = |t: f64,
                pi: f64,
                times: &mut Vec<f64>,
                pi_path: &mut Vec<f64>,
                mean: &mut Vec<f64>,
                variance: &mut Vec<f64>,
                price: &mut Vec<f64>,
                vol: &mut Vec<f64>| {
        let m = low + gap * pi;
        let v = gap * gap * pi * (1.0 - pi);
        let discount = model.discount(t);
        times.push(t);
        pi_path.push(pi);
        mean.push(m);
        variance.push(v);
        price.push(discount * m);
        vol.push(discount * model.sigma * v);
    };

    let mut pi = pi0;
    let mut xi_value = 0.0;
    xi.push(0.0);
    push(
        0.0,
        pi,
        &mut times,
        &mut pi_path,
        &mut mean,
        &mut variance,
        &mut price,
        &mut vol,
    );

    for k in 0..steps {
        let dw = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
        xi_value += model.sigma * (low + gap * pi) * model.dt + dw;
        xi.push(xi_value);

        let mut next = pi + model.sigma * gap * pi * (1.0 - pi) * dw;
        if !(0.0..=1.0).contains(&next) {
            next = next.clamp(0.0, 1.0);
            clip_count += 1;
        }
        pi = next;
        push(
            (k + 1) as f64 * model.dt,
            pi,
            &mut times,
            &mut pi_path,
            &mut mean,
            &mut variance,
            &mut price,
            &mut vol,
        );
    }

    Ok(FilterPath {
        times,
        xi,
        posterior: PosteriorPath::Binary(pi_path),
        mean,
        variance,
        price,
        vol,
        clip_count,
        // The scalar state is renormalized by construction.
        max_mass_drift: 0.0,
    })
}

/// Tabulates the endogenous volatility
/// `Sigma(pi) = sigma (H - L)^2 pi (1 - pi)` on a 101-point grid over
/// `[0, 1]`. Grid points and values are mirror-symmetric by construction:
/// both members of a `(pi, 1 - pi)` pair share one product evaluation.
pub fn volatility_uncertainty_curve(
    model: &ObservationModel,
    low: f64,
    high: f64,
) -> Vec<(f64, f64)> {
    const POINTS: usize = 101;
    let gap = high - low;
    let scale = model.sigma * gap * gap;
    let mut curve = vec![(0.0f64, 0.0f64); POINTS];
    for k in 0..=(POINTS / 2) {
        let lo = k as f64 / (POINTS - 1) as f64;
        let hi = 1.0 - lo;
        let value = scale * lo * hi;
        curve[k] = (lo, value);
        curve[POINTS - 1 - k] = (hi, value);
    }
    curve
}

/// What a batch of paths simulates.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulationJob {
    Grid {
        prior: GridPrior,
        model: ObservationModel,
        mode: SimulationMode,
    },
    Binary {
        model: ObservationModel,
        low: f64,
        high: f64,
        pi0: f64,
    },
}

/// Monte Carlo diagnostics over a batch: the martingale check on the
/// tracked statistic (the high-state probability for binary jobs, the
/// posterior mean otherwise) and the quadratic-variation check against the
/// integrated squared volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub paths: usize,
    /// Initial value of the tracked statistic.
    pub initial: f64,
    /// Sample mean of the terminal tracked statistic.
    pub terminal_mean: f64,
    /// Standard error of that sample mean.
    pub terminal_std_error: f64,
    /// `|terminal_mean - initial|` in units of the standard error.
    pub martingale_z: f64,
    /// Mean over paths of `|QV / integral(Sigma^2 dt) - 1|`.
    pub qv_mean_rel_error: f64,
    /// Total negative-mass clips across all paths.
    pub clip_total: usize,
    /// Largest pre-renormalization mass drift seen on any path.
    pub max_mass_drift: f64,
}

/// Runs `paths` independent simulations with per-path derived streams and
/// summarizes them; each finished path is handed to `on_path`.
pub fn simulate_batch<F>(
    job: &SimulationJob,
    paths: usize,
    seed: u64,
    mut on_path: F,
) -> Result<BatchSummary, FilterError>
where
    F: FnMut(usize, &FilterPath),
{
    assert!(paths >= 1, "a batch needs at least one path");
    let mut terminal = Vec::with_capacity(paths);
    let mut qv_error_sum = 0.0f64;
    let mut clip_total = 0usize;
    let mut max_mass_drift = 0.0f64;
    let mut initial = 0.0;

    for index in 0..paths {
        let mut rng = path_rng(seed, index as u64);
        let path = match job {
            SimulationJob::Grid { prior, model, mode } => {
                simulate_filter_sde_with(prior, model, *mode, &mut rng)?
            }
            SimulationJob::Binary {
                model,
                low,
                high,
                pi0,
            } => simulate_binary_sde_with(model, *low, *high, *pi0, &mut rng)?,
        };
        let (first, last) = match path.pi() {
            Some(pi) => (pi[0], *pi.last().expect("nonempty")),
            None => (path.mean()[0], path.terminal_mean()),
        };
        initial = first;
        terminal.push(last);

        let integral = path.integrated_squared_vol();
        if integral > 0.0 {
            qv_error_sum += (path.realized_quadratic_variation() / integral - 1.0).abs();
        }
        clip_total += path.clip_count();
        max_mass_drift = max_mass_drift.max(path.max_mass_drift());
        on_path(index, &path);
    }

    let n = paths as f64;
    let terminal_mean: f64 = terminal.iter().sum::<f64>() / n;
    let var: f64 = terminal
        .iter()
        .map(|v| (v - terminal_mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let terminal_std_error = (var / n).sqrt();
    let martingale_z = if terminal_std_error > 0.0 {
        (terminal_mean - initial).abs() / terminal_std_error
    } else {
        0.0
    };

    Ok(BatchSummary {
        paths,
        initial,
        terminal_mean,
        terminal_std_error,
        martingale_z,
        qv_mean_rel_error: qv_error_sum / n,
        clip_total,
        max_mass_drift,
    })
}
