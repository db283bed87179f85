//! Exact open-loop Nash equilibrium of the linear-quadratic lending game,
//! the convergence certificate of fictitious play on it, and scoring of
//! learned profiles against the equilibrium on shared noise.

use serde::Serialize;

use crate::best_response::{simulate_profile, BeliefProfile, ControlPaths, NoiseBatch, PathArray, ProfileOutcome, RolloutData, StatePaths};
use crate::error::{invalid, DfpError, Result};
use crate::game_model::{lq_game, LqParams};
use crate::policy::{profile_controls, PlayerPolicy};

pub const DEFAULT_GRID: usize = 10_000;
const BLOW_UP: f64 = 1e8;

/// Backward solutions of the two Riccati equations on a uniform grid of
/// `[0, T]`, with the derived mean-reversion gains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiSolution {
    pub times: Vec<f64>,
    pub k: Vec<f64>,
    pub eta: Vec<f64>,
    /// `a + (1 - 1/N) q + (1 - 1/N)^2 K`.
    pub gamma: Vec<f64>,
    /// `a + q + (1 - 1/N) eta`.
    pub kappa: Vec<f64>,
    pub k_max: f64,
    pub k_min: f64,
    /// `gamma` evaluated at `k_min`.
    pub gamma_min: f64,
    n_players: usize,
    q: f64,
}

struct Coefficients {
    a: f64,
    q: f64,
    r: f64,
    n: f64,
    source: f64,
}

impl Coefficients {
    fn new(p: &LqParams) -> Self {
        let n = p.n() as f64;
        Self {
            a: p.a,
            q: p.q,
            r: 1.0 - 1.0 / n,
            n,
            source: p.epsilon - p.q * p.q,
        }
    }

    fn k_dot(&self, k: f64) -> f64 {
        2.0 * (self.a + self.r * self.q) * k + self.r * self.r * k * k - self.source
    }

    fn eta_dot(&self, e: f64) -> f64 {
        2.0 * (self.a + (1.0 - 0.5 / self.n) * self.q) * e + self.r * e * e - self.source
    }

    fn gamma(&self, k: f64) -> f64 {
        self.a + self.r * self.q + self.r * self.r * k
    }

    fn kappa(&self, e: f64) -> f64 {
        self.a + self.q + self.r * e
    }

    fn gain(&self, e: f64) -> f64 {
        self.q + self.r * e
    }
}

/// One classic Runge-Kutta step of `y' = f(y)` from `t` to `t - h`.
fn rk4_back<const D: usize>(y: [f64; D], h: f64, f: impl Fn(&[f64; D]) -> [f64; D]) -> [f64; D] {
    let shift = |y: &[f64; D], k: &[f64; D], s: f64| {
        let mut out = *y;
        for (o, ki) in out.iter_mut().zip(k) {
            *o -= s * ki;
        }
        out
    };
    let k1 = f(&y);
    let k2 = f(&shift(&y, &k1, h / 2.0));
    let k3 = f(&shift(&y, &k2, h / 2.0));
    let k4 = f(&shift(&y, &k3, h));
    let mut out = y;
    for i in 0..D {
        out[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

pub fn solve_riccati(params: &LqParams, grid: usize) -> Result<RiccatiSolution> {
    params.validate()?;
    if grid < 100 {
        return Err(invalid("oracle_grid", "must be at least 100"));
    }
    let co = Coefficients::new(params);
    let horizon = params.dims.horizon;
    let h = horizon / grid as f64;
    let times: Vec<f64> = (0..=grid).map(|j| j as f64 * h).collect();
    let mut k = vec![0.0; grid + 1];
    let mut eta = vec![0.0; grid + 1];
    k[grid] = params.c;
    eta[grid] = params.c;
    for j in (0..grid).rev() {
        let [kj, ej] = rk4_back([k[j + 1], eta[j + 1]], h, |y| [co.k_dot(y[0]), co.eta_dot(y[1])]);
        if !(kj.abs() <= BLOW_UP && ej.abs() <= BLOW_UP) {
            return Err(DfpError::RiccatiBlowUp { t: times[j] });
        }
        k[j] = kj;
        eta[j] = ej;
    }
    let k_max = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k_min = k.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RiccatiSolution {
        gamma: k.iter().map(|&v| co.gamma(v)).collect(),
        kappa: eta.iter().map(|&v| co.kappa(v)).collect(),
        gamma_min: co.gamma(k_min),
        times,
        k,
        eta,
        k_max,
        k_min,
        n_players: params.n(),
        q: params.q,
    })
}

impl RiccatiSolution {
    pub fn grid_size(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is non-empty")
    }

    fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let g = self.grid_size();
        let pos = (t / self.horizon() * g as f64).clamp(0.0, g as f64);
        let j = (pos.floor() as usize).min(g - 1);
        let w = pos - j as f64;
        (1.0 - w) * values[j] + w * values[j + 1]
    }

    pub fn k_at(&self, t: f64) -> f64 {
        self.interpolate(&self.k, t)
    }

    pub fn eta_at(&self, t: f64) -> f64 {
        self.interpolate(&self.eta, t)
    }

    pub fn kappa_at(&self, t: f64) -> f64 {
        self.interpolate(&self.kappa, t)
    }

    pub fn gamma_at(&self, t: f64) -> f64 {
        self.interpolate(&self.gamma, t)
    }

    /// Equilibrium feedback gain on the deviation from the mean,
    /// `q + (1 - 1/N) eta(t)`.
    pub fn gain_at(&self, t: f64) -> f64 {
        self.q + (1.0 - 1.0 / self.n_players as f64) * self.eta_at(t)
    }

    pub fn k_nondecreasing(&self) -> bool {
        self.k.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Which of the classic sufficient parameter regimes certify convergence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeDiagnostics {
    /// Largest horizon below which the factor stays under 1, with all other
    /// parameters fixed; `None` when no crossing was found up to 1024.
    pub horizon_threshold: Option<f64>,
    pub short_horizon: bool,
    /// `K` nondecreasing, `a > 0` and `C / a < 1`.
    pub strong_reversion: bool,
    /// `C / gamma_min < 1`.
    pub small_coefficients: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub constant: f64,
    /// `(1 - exp(-2 T gamma_min)) / gamma_min`.
    pub horizon_weight: f64,
    pub factor: f64,
    pub converges: bool,
    pub gamma_min: f64,
    pub k_max: f64,
    pub k_min: f64,
    pub regimes: RegimeDiagnostics,
}

fn horizon_weight(horizon: f64, gamma_min: f64) -> f64 {
    -(-2.0 * horizon * gamma_min).exp_m1() / gamma_min
}

fn contraction_constant(n: usize, q: f64, k_max: f64, weight: f64) -> f64 {
    let r = 1.0 - 1.0 / n as f64;
    let (r2, r4) = (r * r, r.powi(4));
    let k2 = k_max * k_max;
    r2 * (r2 * k2 + (q + r * k_max).powi(2) * (weight * r4 * k2 + 2.0))
}

fn factor_parts(params: &LqParams, ric: &RiccatiSolution) -> Result<(f64, f64, f64)> {
    if !(ric.gamma_min > 0.0) {
        return Err(DfpError::NonPositiveGamma(ric.gamma_min));
    }
    let weight = horizon_weight(params.dims.horizon, ric.gamma_min);
    let constant = contraction_constant(params.n(), params.q, ric.k_max, weight);
    Ok((constant, weight, weight * constant))
}

fn factor_at_horizon(params: &LqParams, horizon: f64) -> f64 {
    let mut p = params.clone();
    p.dims.horizon = horizon;
    solve_riccati(&p, 2000)
        .and_then(|ric| factor_parts(&p, &ric))
        .map_or(f64::INFINITY, |(_, _, f)| f)
}

fn horizon_threshold(params: &LqParams) -> Option<f64> {
    let mut hi = params.dims.horizon;
    while factor_at_horizon(params, hi) < 1.0 {
        hi *= 2.0;
        if hi > 1024.0 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if factor_at_horizon(params, mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * hi {
            break;
        }
    }
    Some(lo)
}

pub fn contraction_factor(params: &LqParams, riccati: &RiccatiSolution) -> Result<ContractionReport> {
    let (constant, weight, factor) = factor_parts(params, riccati)?;
    let threshold = horizon_threshold(params);
    Ok(ContractionReport {
        constant,
        horizon_weight: weight,
        factor,
        converges: factor < 1.0,
        gamma_min: riccati.gamma_min,
        k_max: riccati.k_max,
        k_min: riccati.k_min,
        regimes: RegimeDiagnostics {
            horizon_threshold: threshold,
            short_horizon: threshold.is_none_or(|t| params.dims.horizon < t),
            strong_reversion: riccati.k_nondecreasing() && params.a > 0.0 && constant / params.a < 1.0,
            small_coefficients: constant / riccati.gamma_min < 1.0,
        },
    })
}

fn check_noise(params: &LqParams, noise: &NoiseBatch) -> Result<()> {
    let dims = &params.dims;
    if noise.n_steps() != dims.n_steps || noise.n_sources() != dims.n_sources() || noise.noise_dim() != 1 {
        return Err(DfpError::BatchMismatch("noise batch does not match the game dimensions".into()));
    }
    Ok(())
}

/// Euler paths of each player's equilibrium deviation from the mean,
/// `(path, step 0..=N_T, player)`.
pub fn simulate_xi(params: &LqParams, riccati: &RiccatiSolution, noise: &NoiseBatch) -> Result<StatePaths> {
    params.validate()?;
    check_noise(params, noise)?;
    let n = params.n();
    let dims = &params.dims;
    let h = dims.step_size();
    let loading = params.sigma * (1.0 - params.rho * params.rho).sqrt();
    let mean0 = params.mean_x0();
    let kappa: Vec<f64> = (0..dims.n_steps).map(|s| riccati.kappa_at(dims.time(s))).collect();
    let mut xi = PathArray::zeros(noise.n_paths(), dims.n_steps + 1, n);
    for path in 0..noise.n_paths() {
        for (x, x0) in xi.at_mut(path, 0).iter_mut().zip(&params.x0) {
            *x = mean0 - x0;
        }
        for step in 0..dims.n_steps {
            let inc = noise.increments_at(path, step);
            let idio = &inc[1..=n];
            let mean_dw = idio.iter().sum::<f64>() / n as f64;
            let current = xi.at(path, step).to_vec();
            let next = xi.at_mut(path, step + 1);
            for i in 0..n {
                next[i] = current[i] - kappa[step] * current[i] * h + loading * (mean_dw - idio[i]);
            }
        }
    }
    Ok(xi)
}

/// Equilibrium controls `(path, step, player)` from deviation paths.
pub fn nash_control(params: &LqParams, riccati: &RiccatiSolution, xi: &StatePaths) -> Result<ControlPaths> {
    let dims = &params.dims;
    if xi.n_steps() != dims.n_steps + 1 || xi.width() != params.n() {
        return Err(DfpError::BatchMismatch("deviation paths do not match the game".into()));
    }
    let mut out = ControlPaths::zeros(xi.n_paths(), dims.n_steps, params.n());
    for step in 0..dims.n_steps {
        let gain = riccati.gain_at(dims.time(step));
        for path in 0..xi.n_paths() {
            for (o, x) in out.at_mut(path, step).iter_mut().zip(xi.at(path, step)) {
                *o = gain * x;
            }
        }
    }
    Ok(out)
}

/// Controls, states and per-player pathwise costs of the exact equilibrium.
pub fn nash_profile(params: &LqParams, riccati: &RiccatiSolution, noise: &NoiseBatch) -> Result<(ControlPaths, ProfileOutcome)> {
    let xi = simulate_xi(params, riccati, noise)?;
    let controls = nash_control(params, riccati, &xi)?;
    let outcome = play_profile(params, noise, controls.clone())?;
    Ok((controls, outcome))
}

/// Monte-Carlo costs of every player under the exact equilibrium.
pub fn nash_cost(params: &LqParams, riccati: &RiccatiSolution, noise: &NoiseBatch) -> Result<ProfileOutcome> {
    Ok(nash_profile(params, riccati, noise)?.1)
}

fn play_profile(params: &LqParams, noise: &NoiseBatch, controls: ControlPaths) -> Result<ProfileOutcome> {
    let game = lq_game(params.clone())?;
    let beliefs = BeliefProfile::new(0, params.n(), 1, controls)?;
    let data = RolloutData::new(&game, noise, None, &beliefs)?;
    simulate_profile(&game, &data)
}

/// Integrates the ODE satisfied by `K - eta` alongside both Riccati
/// equations and returns the largest gap between the two on the grid.
pub fn verify_f_identity(params: &LqParams, riccati: &RiccatiSolution) -> Result<f64> {
    params.validate()?;
    let co = Coefficients::new(params);
    let grid = riccati.grid_size();
    let h = params.dims.horizon / grid as f64;
    let rhs = |y: &[f64; 3]| {
        let [k, e, f] = *y;
        let forcing = k / co.n * co.gain(e);
        [co.k_dot(k), co.eta_dot(e), f * (co.kappa(e) + co.gamma(k)) - forcing]
    };
    let mut y = [params.c, params.c, 0.0];
    let mut worst = (y[2] - (y[0] - y[1])).abs();
    for _ in 0..grid {
        y = rk4_back(y, h, rhs);
        worst = worst.max((y[2] - (y[0] - y[1])).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostComparison {
    pub player: usize,
    pub oracle_cost: f64,
    pub dfp_cost: f64,
    pub oracle_std_error: f64,
    pub dfp_std_error: f64,
    /// Relative error, or absolute error when the oracle cost is zero.
    pub error: f64,
    pub relative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryGap {
    pub player: usize,
    pub step: usize,
    pub t: f64,
    /// Mean of `X_dfp - X_true` over paths.
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub n_paths: usize,
    pub noise_seed: u64,
    pub costs: Vec<CostComparison>,
    pub max_cost_error: f64,
    /// Max over players and steps of the path-averaged absolute state gap.
    pub trajectory_error: f64,
    pub trajectory_error_by_player: Vec<f64>,
    pub trajectory_metric: String,
}

/// A benchmark report plus the paths behind it.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: BenchmarkReport,
    pub gaps: Vec<TrajectoryGap>,
    pub oracle_controls: ControlPaths,
    pub dfp_controls: ControlPaths,
    pub oracle: ProfileOutcome,
    pub dfp: ProfileOutcome,
}

/// Scores a learned control profile against the exact equilibrium on the
/// same noise.
pub fn compare_profiles(params: &LqParams, riccati: &RiccatiSolution, noise: &NoiseBatch, dfp_controls: ControlPaths) -> Result<Comparison> {
    let (oracle_controls, oracle) = nash_profile(params, riccati, noise)?;
    let dfp = play_profile(params, noise, dfp_controls.clone())?;
    let n = params.n();
    let (oj, dj) = (oracle.mean_costs(), dfp.mean_costs());
    let (ose, dse) = (oracle.std_errors(), dfp.std_errors());
    let costs: Vec<CostComparison> = (0..n)
        .map(|i| {
            let relative = oj[i] != 0.0;
            let gap = (dj[i] - oj[i]).abs();
            CostComparison {
                player: i,
                oracle_cost: oj[i],
                dfp_cost: dj[i],
                oracle_std_error: ose[i],
                dfp_std_error: dse[i],
                error: if relative { gap / oj[i].abs() } else { gap },
                relative,
            }
        })
        .collect();

    let m = noise.n_paths() as f64;
    let steps = params.dims.n_steps + 1;
    let mut gaps = Vec::with_capacity(n * steps);
    let mut by_player = vec![0.0_f64; n];
    for i in 0..n {
        for step in 0..steps {
            let (mut sum, mut sum_sq, mut sum_abs) = (0.0, 0.0, 0.0);
            for path in 0..noise.n_paths() {
                let e = dfp.states.get(path, step, i) - oracle.states.get(path, step, i);
                sum += e;
                sum_sq += e * e;
                sum_abs += e.abs();
            }
            let mean = sum / m;
            let var = (sum_sq / m - mean * mean).max(0.0);
            by_player[i] = by_player[i].max(sum_abs / m);
            gaps.push(TrajectoryGap {
                player: i,
                step,
                t: params.dims.time(step),
                mean_error: mean,
                std_error: var.sqrt(),
                mean_abs_error: sum_abs / m,
            });
        }
    }
    let report = BenchmarkReport {
        n_paths: noise.n_paths(),
        noise_seed: noise.seed(),
        max_cost_error: costs.iter().map(|c| c.error).fold(0.0, f64::max),
        trajectory_error: by_player.iter().copied().fold(0.0, f64::max),
        trajectory_error_by_player: by_player,
        trajectory_metric: "max over players and steps of the mean over paths of |X_dfp - X_true|".into(),
        costs,
    };
    Ok(Comparison {
        report,
        gaps,
        oracle_controls,
        dfp_controls,
        oracle,
        dfp,
    })
}

/// Scores trained policies against the exact equilibrium on `noise`.
pub fn compare_to_oracle(params: &LqParams, riccati: &RiccatiSolution, policies: &[PlayerPolicy], noise: &NoiseBatch) -> Result<Comparison> {
    let controls = profile_controls(&params.dims, &params.x0, policies, noise)?;
    compare_profiles(params, riccati, noise, controls)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_game(n: usize) -> LqParams {
        LqParams::benchmark_players(n, 20)
    }

    #[test]
    fn terminal_conditions_are_exact() {
        let mut p = reference_game(5);
        p.c = 0.7;
        let r = solve_riccati(&p, 500).unwrap();
        assert_eq!(*r.k.last().unwrap(), 0.7);
        assert_eq!(*r.eta.last().unwrap(), 0.7);
        assert!(solve_riccati(&p, 99).is_err());
    }

    #[test]
    fn zero_source_and_terminal_give_zero_solution() {
        let mut p = reference_game(4);
        p.q = 0.5;
        p.epsilon = 0.25;
        p.c = 0.0;
        let r = solve_riccati(&p, 1000).unwrap();
        assert!(r.k.iter().chain(&r.eta).all(|&v| v == 0.0));
        assert_eq!(verify_f_identity(&p, &r).unwrap(), 0.0);
        // With K = 0 the constant reduces to 2 q^2 (1 - 1/N)^2.
        let rep = contraction_factor(&p, &r).unwrap();
        assert!((rep.constant - 2.0 * 0.25 * 0.75f64.powi(2)).abs() < 1e-15);
        p.q = 0.0;
        p.epsilon = 0.0;
        let r = solve_riccati(&p, 1000).unwrap();
        let rep = contraction_factor(&p, &r).unwrap();
        assert_eq!(rep.constant, 0.0);
        assert_eq!(rep.factor, 0.0);
    }

    #[test]
    fn grid_refinement_agrees() {
        let p = reference_game(5);
        let coarse = solve_riccati(&p, 1_000).unwrap();
        let fine = solve_riccati(&p, 10_000).unwrap();
        assert!((coarse.k[0] - fine.k[0]).abs() < 1e-8);
        assert!((coarse.eta[0] - fine.eta[0]).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_convergence() {
        let p = reference_game(5);
        let k0 = |g| solve_riccati(&p, g).unwrap().k[0];
        let reference = k0(16_000);
        let (e1, e2) = (k0(250) - reference, k0(500) - reference);
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
        let e3 = k0(1000) - reference;
        assert!((12.0..=20.0).contains(&(e2 / e3)), "ratio {}", e2 / e3);
    }

    #[test]
    fn ode_residual_is_small() {
        let p = reference_game(10);
        let r = solve_riccati(&p, 10_000).unwrap();
        let co = Coefficients::new(&p);
        let h = p.dims.horizon / 10_000.0;
        for j in 1..10_000 {
            let dk = (r.k[j + 1] - r.k[j - 1]) / (2.0 * h);
            assert!((dk - co.k_dot(r.k[j])).abs() < 1e-6);
            let de = (r.eta[j + 1] - r.eta[j - 1]) / (2.0 * h);
            assert!((de - co.eta_dot(r.eta[j])).abs() < 1e-6);
        }
    }

    #[test]
    fn extrema_sit_at_endpoints() {
        for n in [2, 5, 10] {
            let r = solve_riccati(&reference_game(n), 2000).unwrap();
            let ends = [r.k[0], *r.k.last().unwrap()];
            assert_eq!(r.k_max, ends[0].max(ends[1]));
            assert_eq!(r.k_min, ends[0].min(ends[1]));
            if r.k_nondecreasing() {
                assert_eq!(r.k_max, 1.0);
            }
        }
    }

    #[test]
    fn reference_contraction_factors() {
        for (n, expected) in [(5, 0.9568), (10, 1.5420), (24, 1.9995)] {
            let p = reference_game(n);
            let r = solve_riccati(&p, DEFAULT_GRID).unwrap();
            let rep = contraction_factor(&p, &r).unwrap();
            assert!((rep.factor - expected).abs() < 5e-4, "N={n}: {}", rep.factor);
            assert_eq!(rep.converges, n == 5);
        }
    }

    #[test]
    fn horizon_threshold_separates_regimes() {
        let p = reference_game(10);
        let t = horizon_threshold(&p).unwrap();
        assert!(t < 1.0);
        assert!(factor_at_horizon(&p, 0.99 * t) < 1.0);
        assert!(factor_at_horizon(&p, 1.01 * t) >= 1.0);
    }

    #[test]
    fn gain_at_terminal_time() {
        let mut p = reference_game(4);
        p.q = 0.3;
        p.c = 2.0;
        let r = solve_riccati(&p, 1000).unwrap();
        assert!((r.gain_at(1.0) - (0.3 + 0.75 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn equal_initial_states_without_noise_stay_put() {
        let p = LqParams::benchmark(vec![2.0; 4], 10);
        let r = solve_riccati(&p, 1000).unwrap();
        let noise = NoiseBatch::zeros(&p.dims, 3);
        let xi = simulate_xi(&p, &r, &noise).unwrap();
        assert!(xi.values().iter().all(|&v| v == 0.0));
        let a = nash_control(&p, &r, &xi).unwrap();
        assert!(a.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_cost_parameters_give_zero_costs() {
        let mut p = reference_game(3);
        p.epsilon = 0.0;
        p.c = 0.0;
        let r = solve_riccati(&p, 1000).unwrap();
        let noise = NoiseBatch::sample(&p.dims, 50, 3);
        let (a, out) = nash_profile(&p, &r, &noise).unwrap();
        assert!(a.values().iter().all(|&v| v == 0.0));
        assert!(out.mean_costs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn self_comparison_is_exact() {
        let p = reference_game(5);
        let r = solve_riccati(&p, 2000).unwrap();
        let noise = NoiseBatch::sample(&p.dims, 200, 8);
        let (a, _) = nash_profile(&p, &r, &noise).unwrap();
        let cmp = compare_profiles(&p, &r, &noise, a).unwrap();
        assert_eq!(cmp.report.max_cost_error, 0.0);
        assert_eq!(cmp.report.trajectory_error, 0.0);
    }

    #[test]
    fn symmetric_players_pay_the_same() {
        // Players 0 and 2 sit symmetrically around the mean of (1, 2, 3).
        let p = LqParams::benchmark(vec![1.0, 2.0, 3.0], 10);
        let r = solve_riccati(&p, 1000).unwrap();
        let noise = NoiseBatch::zeros(&p.dims, 1);
        let costs = nash_cost(&p, &r, &noise).unwrap().mean_costs();
        assert!((costs[0] - costs[2]).abs() < 1e-12);
        assert!(costs[1].abs() < 1e-12);
    }
}
