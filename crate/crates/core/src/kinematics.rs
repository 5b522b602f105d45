//! Ball flight times, player intercept times and the arrival probability
//! built on the asymmetric Lorentzian residual distribution.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::court::{Point, Vec2};
use crate::error::{Error, Result};
use crate::estimation::simplex::{nelder_mead_minimize, Bounds, SimplexConfig};
use crate::tracking::{Movement, PlayerState, Side};

/// Physical model parameters shared by every player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Magnitude of the constant acceleration, m/s².
    pub accel: f64,
    pub v_max: f64,
    /// Control rate, 1/s.
    pub lambda: f64,
    /// Defender control-rate multiplier.
    pub kappa: f64,
    pub reaction_attacker: f64,
    pub reaction_defender: f64,
}

impl Default for ModelParams {
    /// Starting point of the likelihood search.
    fn default() -> Self {
        ModelParams {
            accel: 7.0,
            v_max: 5.0,
            lambda: 30.0,
            kappa: 1.72,
            reaction_attacker: 0.32,
            reaction_defender: 0.32,
        }
    }
}

impl ModelParams {
    pub const ACCEL_RANGE: (f64, f64) = (1.0, 8.0);
    pub const REACTION_RANGE: (f64, f64) = (0.0, 1.0);

    pub fn validate(&self) -> Result<()> {
        let (amin, amax) = Self::ACCEL_RANGE;
        let (rmin, rmax) = Self::REACTION_RANGE;
        let ok = (amin..=amax).contains(&self.accel)
            && self.v_max.is_finite()
            && self.v_max > 0.0
            && self.lambda.is_finite()
            && self.lambda >= 1.0
            && self.kappa.is_finite()
            && self.kappa >= 1.0
            && (rmin..=rmax).contains(&self.reaction_attacker)
            && (rmin..=rmax).contains(&self.reaction_defender);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("model parameters out of range: {self:?}")))
        }
    }

    pub fn reaction_time(&self, side: Side, is_possessor: bool) -> f64 {
        match (is_possessor, side) {
            (true, _) => 0.0,
            (false, Side::Attack) => self.reaction_attacker,
            (false, Side::Defense) => self.reaction_defender,
        }
    }

    pub fn control_rate(&self, side: Side) -> f64 {
        match side {
            Side::Attack => self.lambda,
            Side::Defense => self.kappa * self.lambda,
        }
    }
}

/// Two-sided Lorentzian: half-width `gamma_left` below `location`,
/// `gamma_right` above, joined continuously at the mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualParams {
    pub location: f64,
    pub gamma_left: f64,
    pub gamma_right: f64,
}

impl ResidualParams {
    pub fn new(location: f64, gamma_left: f64, gamma_right: f64) -> Result<Self> {
        let rp = ResidualParams {
            location,
            gamma_left,
            gamma_right,
        };
        rp.validate()?;
        Ok(rp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.location.is_finite() && self.gamma_left > 0.0 && self.gamma_right > 0.0
            && self.gamma_left.is_finite() && self.gamma_right.is_finite()
        {
            Ok(())
        } else {
            Err(Error::config(format!("invalid residual distribution {self:?}")))
        }
    }

    /// Probability mass below the mode.
    pub fn left_weight(&self) -> f64 {
        self.gamma_left / (self.gamma_left + self.gamma_right)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let w = self.left_weight();
        let z = x - self.location;
        let f = if z < 0.0 {
            (2.0 * w / PI) * (PI / 2.0 + (z / self.gamma_left).atan())
        } else {
            w + (2.0 * (1.0 - w) / PI) * (z / self.gamma_right).atan()
        };
        f.clamp(0.0, 1.0)
    }

    /// Mean of the CDF over `[a, b]`, from its closed-form antiderivative.
    pub fn mean_cdf(&self, a: f64, b: f64) -> f64 {
        if (b - a).abs() < 1e-4 {
            return self.cdf(0.5 * (a + b));
        }
        ((self.cdf_antiderivative(b) - self.cdf_antiderivative(a)) / (b - a)).clamp(0.0, 1.0)
    }

    /// Antiderivative of the CDF, zero at the mode.
    fn cdf_antiderivative(&self, x: f64) -> f64 {
        let w = self.left_weight();
        let z = x - self.location;
        let log_atan = |u: f64| u * u.atan() - 0.5 * u.mul_add(u, 1.0).ln();
        if z < 0.0 {
            (2.0 * w / PI) * (PI / 2.0 * z + self.gamma_left * log_atan(z / self.gamma_left))
        } else {
            w * z + (2.0 * (1.0 - w) / PI) * self.gamma_right * log_atan(z / self.gamma_right)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = x - self.location;
        let g = if z < 0.0 { self.gamma_left } else { self.gamma_right };
        2.0 / (PI * (self.gamma_left + self.gamma_right)) / (1.0 + (z / g).powi(2))
    }
}

pub fn residual_cdf(x: f64, rp: &ResidualParams) -> f64 {
    rp.cdf(x)
}

pub const SPEED_BIN_WIDTH: f64 = 1.0;
pub const SPEED_BINS: usize = 10;

/// Mean ball speed as a function of travel distance. Evaluated by linear
/// interpolation between bin centers, with the terminal speed pinned at the
/// end of the last bin and held constant beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpeedProfile {
    pub movement: Movement,
    pub bin_width: f64,
    pub mean_speeds: Vec<f64>,
    pub terminal_speed: f64,
}

impl BallSpeedProfile {
    pub fn constant(movement: Movement, speed: f64) -> Self {
        BallSpeedProfile {
            movement,
            bin_width: SPEED_BIN_WIDTH,
            mean_speeds: vec![speed; SPEED_BINS],
            terminal_speed: speed,
        }
    }

    /// Tabulates `speed(d)` at the bin centers and at the end of the binned range.
    pub fn from_fn(movement: Movement, speed: impl Fn(f64) -> f64) -> Self {
        BallSpeedProfile {
            movement,
            bin_width: SPEED_BIN_WIDTH,
            mean_speeds: (0..SPEED_BINS).map(|k| speed((k as f64 + 0.5) * SPEED_BIN_WIDTH)).collect(),
            terminal_speed: speed(SPEED_BINS as f64 * SPEED_BIN_WIDTH),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = !self.mean_speeds.is_empty()
            && self.bin_width > 0.0
            && self
                .mean_speeds
                .iter()
                .chain(std::iter::once(&self.terminal_speed))
                .all(|s| s.is_finite() && *s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid {} speed profile", self.movement.as_str())))
        }
    }

    pub fn max_distance(&self) -> f64 {
        self.mean_speeds.len() as f64 * self.bin_width
    }

    pub fn speed(&self, distance: f64) -> f64 {
        let w = self.bin_width;
        let n = self.mean_speeds.len();
        let first_center = 0.5 * w;
        if distance <= first_center {
            return self.mean_speeds[0];
        }
        if distance >= self.max_distance() {
            return self.terminal_speed;
        }
        let last_center = (n as f64 - 0.5) * w;
        if distance >= last_center {
            let frac = (distance - last_center) / (self.max_distance() - last_center);
            return self.mean_speeds[n - 1] + frac * (self.terminal_speed - self.mean_speeds[n - 1]);
        }
        let pos = distance / w - 0.5;
        let k = (pos.floor() as usize).min(n - 2);
        let frac = pos - k as f64;
        self.mean_speeds[k] + frac * (self.mean_speeds[k + 1] - self.mean_speeds[k])
    }
}

/// Straight-line flight time at the profile's speed for the full distance.
pub fn time_of_flight(start: Point, target: Point, profile: &BallSpeedProfile) -> f64 {
    let d = start.distance(target);
    if d == 0.0 {
        0.0
    } else {
        d / profile.speed(d)
    }
}

/// Time to cover `distance` from speed `s0` under constant acceleration up to `v_max`.
fn run_time(distance: f64, s0: f64, accel: f64, v_max: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let ramp = (v_max * v_max - s0 * s0) / (2.0 * accel);
    if distance <= ramp {
        // Rationalized root of d = s0 t + a t² / 2.
        2.0 * distance / (s0 + (s0 * s0 + 2.0 * accel * distance).sqrt())
    } else {
        (v_max - s0) / accel + (distance - ramp) / v_max
    }
}

/// Expected time for a player to reach `target`: drift at the current
/// velocity during the reaction time, then run straight at the target,
/// starting from the velocity component already pointing there.
pub fn expected_intercept_time(position: Point, velocity: Vec2, target: Point, params: &ModelParams, reaction: f64) -> f64 {
    let drifted = position + velocity * reaction;
    let offset = target - drifted;
    let d = offset.norm();
    if d == 0.0 {
        return reaction;
    }
    let s0 = (velocity.dot(offset) / d).clamp(0.0, params.v_max);
    reaction + run_time(d, s0, params.accel, params.v_max)
}

pub fn player_intercept_time(player: &PlayerState, target: Point, params: &ModelParams, is_possessor: bool) -> f64 {
    let rt = params.reaction_time(player.side, is_possessor);
    expected_intercept_time(player.position, player.velocity, target, params, rt)
}

/// Probability that the player reaches `target` before time `t`.
pub fn arrival_probability(
    player: &PlayerState,
    target: Point,
    t: f64,
    params: &ModelParams,
    rp: &ResidualParams,
    is_possessor: bool,
) -> f64 {
    rp.cdf(t - player_intercept_time(player, target, params, is_possessor))
}

pub const RESIDUAL_BIN_WIDTH: f64 = 0.1;
pub const MIN_RESIDUALS: usize = 100;
const RESIDUAL_WINDOW: f64 = 20.0;

/// Least-squares fit of the asymmetric Lorentzian to a 0.1 s histogram of
/// residuals. Bins are compared as probability masses so the fit does not
/// depend on the bin width being small against the half-widths.
pub fn fit_residual_distribution(residuals: &[f64]) -> Result<ResidualParams> {
    let mut xs: Vec<f64> = residuals.iter().copied().filter(|x| x.is_finite()).collect();
    if xs.len() < MIN_RESIDUALS {
        return Err(Error::insufficient(format!(
            "{} residuals, need at least {MIN_RESIDUALS}",
            xs.len()
        )));
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let quantile = |q: f64| xs[((q * (n - 1.0)).round() as usize).min(xs.len() - 1)];
    let median = quantile(0.5);
    let lo = quantile(0.005).max(median - RESIDUAL_WINDOW);
    let hi = quantile(0.995).min(median + RESIDUAL_WINDOW);
    let bw = RESIDUAL_BIN_WIDTH;
    let first = (lo / bw).floor() as i64;
    let last = (hi / bw).ceil() as i64;
    let n_bins = ((last - first).max(1)) as usize;
    let start = first as f64 * bw;
    let mut counts = vec![0.0; n_bins];
    for &x in &xs {
        let k = ((x - start) / bw).floor();
        if k >= 0.0 && (k as usize) < n_bins {
            counts[k as usize] += 1.0;
        }
    }
    let masses: Vec<f64> = counts.iter().map(|c| c / n).collect();
    let edges: Vec<f64> = (0..=n_bins).map(|k| start + k as f64 * bw).collect();

    // Start from the modal bin and the half-maximum widths on each side.
    let (mode_bin, peak) = masses
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, m)| if m > acc.1 { (k, m) } else { acc });
    let half_width = |range: &mut dyn Iterator<Item = usize>| {
        let steps = range.take_while(|&k| masses[k] >= 0.5 * peak).count();
        (steps as f64 * bw).max(0.5 * bw)
    };
    let x0 = start + (mode_bin as f64 + 0.5) * bw;
    let gl = half_width(&mut (0..mode_bin).rev());
    let gr = half_width(&mut (mode_bin + 1..n_bins));

    let objective = |p: &[f64]| {
        let rp = ResidualParams {
            location: p[0],
            gamma_left: p[1].exp(),
            gamma_right: p[2].exp(),
        };
        let mut prev = rp.cdf(edges[0]);
        let mut sse = 0.0;
        for (k, m) in masses.iter().enumerate() {
            let next = rp.cdf(edges[k + 1]);
            sse += (next - prev - m).powi(2);
            prev = next;
        }
        sse
    };
    let mut cfg = SimplexConfig::new(vec![bw, 0.3, 0.3], Bounds::unbounded(3));
    cfg.max_iterations = 4000;
    cfg.tolerance = 1e-16;
    cfg.x_tolerance = 1e-7;
    let mut point = vec![x0, gl.ln(), gr.ln()];
    for _ in 0..3 {
        point = nelder_mead_minimize(objective, &point, &cfg)?.point;
    }
    ResidualParams::new(point[0], point[1].exp(), point[2].exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::PlayerId;
    use proptest::prelude::*;

    fn reference_params() -> ModelParams {
        ModelParams {
            accel: 7.76,
            v_max: 5.0,
            lambda: 36.6,
            kappa: 1.02,
            reaction_attacker: 0.157,
            reaction_defender: 0.495,
        }
    }

    /// Fine-step integration of the drift-then-accelerate motion.
    fn simulated_intercept(p: Point, v: Vec2, target: Point, params: &ModelParams, rt: f64) -> f64 {
        let dt: f64 = 1e-6;
        let mut pos = p;
        let mut t = 0.0;
        while t < rt {
            let h = dt.min(rt - t);
            pos += v * h;
            t += h;
        }
        let dir = (target - pos) * (1.0 / (target - pos).norm());
        let mut speed = v.dot(dir).clamp(0.0, params.v_max);
        let mut covered = 0.0;
        let d = (target - pos).norm();
        while covered < d {
            let next = (speed + params.accel * dt).min(params.v_max);
            covered += 0.5 * (speed + next) * dt;
            speed = next;
            t += dt;
        }
        t
    }

    fn player(side: Side, pos: Point, vel: Vec2) -> PlayerState {
        PlayerState {
            id: PlayerId("p".into()),
            side,
            position: pos,
            velocity: vel,
        }
    }

    #[test]
    fn flight_time_examples() {
        let flat = BallSpeedProfile::constant(Movement::Pass, 5.0);
        let a = Point::new(1.0, 1.0);
        assert_eq!(time_of_flight(a, a, &flat), 0.0);
        assert!((time_of_flight(a, Point::new(11.0, 1.0), &flat) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn profile_interpolation_matches_table_lookup() {
        let profile = BallSpeedProfile {
            movement: Movement::Pass,
            bin_width: 1.0,
            mean_speeds: vec![3.0, 3.5, 4.2, 5.0, 5.5, 6.1, 6.4, 7.0, 7.3, 7.8],
            terminal_speed: 8.6,
        };
        // Table lookup by hand: 3.5 m is the center of bin 3; 3.7 m lies 20% towards bin 4.
        assert!((time_of_flight(Point::ZERO, Point::new(3.5, 0.0), &profile) - 3.5 / 5.0).abs() < 1e-12);
        assert!((profile.speed(3.7) - (5.0 + 0.2 * 0.5)).abs() < 1e-12);
        assert!((profile.speed(9.75) - (7.8 + 0.5 * 0.8)).abs() < 1e-12);
        assert_eq!(profile.speed(0.1), 3.0);
        assert_eq!(profile.speed(25.0), 8.6);
        let near_ten = [profile.speed(10.0 - 1e-9), profile.speed(10.0), profile.speed(10.0 + 1e-9)];
        assert!((near_ten[0] - near_ten[2]).abs() < 1e-6);
    }

    #[test]
    fn intercept_at_target_is_zero_for_possessor() {
        let p = reference_params();
        let pl = player(Side::Attack, Point::new(3.0, 3.0), Point::ZERO);
        assert_eq!(player_intercept_time(&pl, Point::new(3.0, 3.0), &p, true), 0.0);
    }

    #[test]
    fn intercept_from_rest_six_meters() {
        let params = ModelParams {
            reaction_attacker: 0.157,
            ..reference_params()
        };
        let pl = player(Side::Attack, Point::new(2.0, 5.0), Point::ZERO);
        let target = Point::new(8.0, 5.0);
        let t = player_intercept_time(&pl, target, &params, false);
        let expected = 0.157 + 5.0 / 7.76 + (6.0 - 25.0 / (2.0 * 7.76)) / 5.0;
        assert!((t - expected).abs() < 1e-12);
        assert!((t - 1.679).abs() < 1e-3);
        let sim = simulated_intercept(pl.position, pl.velocity, target, &params, 0.157);
        assert!((t - sim).abs() < 1e-4, "closed form {t} vs simulated {sim}");
    }

    #[test]
    fn intercept_matches_simulation_with_velocity() {
        let params = reference_params();
        let cases = [
            (Point::new(2.0, 5.0), Point::new(2.0, 1.0), Point::new(6.0, 7.0), 0.3),
            (Point::new(8.0, 3.0), Point::new(-3.0, 0.5), Point::new(4.0, 9.0), 0.0),
            (Point::new(5.0, 5.0), Point::new(0.0, -4.0), Point::new(5.5, 5.2), 0.495),
        ];
        for (p, v, target, rt) in cases {
            let closed = expected_intercept_time(p, v, target, &params, rt);
            let sim = simulated_intercept(p, v, target, &params, rt);
            assert!((closed - sim).abs() < 1e-4, "{closed} vs {sim}");
        }
    }

    #[test]
    fn short_runs_never_reach_top_speed() {
        let params = reference_params();
        let d = 0.5;
        let t = expected_intercept_time(Point::ZERO, Point::ZERO, Point::new(d, 0.0), &params, 0.0);
        assert!((t - (2.0 * d / params.accel).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn possessor_flag_zeroes_reaction() {
        let params = reference_params();
        let pl = player(Side::Defense, Point::new(4.0, 4.0), Point::new(1.0, -1.0));
        let target = Point::new(9.0, 2.0);
        let zero_rt = ModelParams {
            reaction_defender: 0.0,
            ..params
        };
        assert_eq!(
            player_intercept_time(&pl, target, &params, true),
            player_intercept_time(&pl, target, &zero_rt, false)
        );
    }

    #[test]
    fn residual_cdf_examples() {
        let sym = ResidualParams::new(0.2, 0.3, 0.3).unwrap();
        assert!((sym.cdf(0.2) - 0.5).abs() < 1e-15);
        assert!(sym.cdf(1e9) > 1.0 - 1e-9);
        assert!(sym.cdf(-1e9) < 1e-9);
        let skew = ResidualParams::new(0.0, 0.1, 0.3).unwrap();
        assert!((skew.cdf(0.0) - 0.25).abs() < 1e-15);
        let left = skew.cdf(-1e-13);
        let right = skew.cdf(0.0);
        assert!((left - right).abs() < 1e-12);
    }

    #[test]
    fn residual_pdf_integrates_to_cdf() {
        let rp = ResidualParams::new(0.1, 0.2, 0.6).unwrap();
        // Simpson's rule from -5 to 3 against the closed-form CDF.
        let (a, b, n) = (-5.0, 3.0, 20_000);
        let h = (b - a) / n as f64;
        let mut s = rp.pdf(a) + rp.pdf(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * rp.pdf(x);
        }
        let integral = s * h / 3.0;
        assert!((integral - (rp.cdf(b) - rp.cdf(a))).abs() < 1e-6);
    }

    #[test]
    fn arrival_probability_examples() {
        let params = reference_params();
        let sym = ResidualParams::new(0.0, 0.2, 0.2).unwrap();
        let pl = player(Side::Attack, Point::new(3.0, 3.0), Point::ZERO);
        let target = Point::new(6.0, 7.0);
        let tau = player_intercept_time(&pl, target, &params, false);
        assert!((arrival_probability(&pl, target, tau, &params, &sym, false) - 0.5).abs() < 1e-12);
        // Six half-widths left of the mode leaves 2w(1/2 - atan(6)/pi) of mass.
        let early = tau + sym.location - 6.0 * sym.gamma_left;
        let symmetric_tail = arrival_probability(&pl, target, early, &params, &sym, false);
        assert!((symmetric_tail - (0.5 - 6f64.atan() / PI)).abs() < 1e-12);
        let skew = ResidualParams::new(0.05, 0.1, 0.3).unwrap();
        let early = tau + skew.location - 6.0 * skew.gamma_left - 0.01;
        assert!(arrival_probability(&pl, target, early, &params, &skew, false) < 0.05);
    }

    #[test]
    fn residual_fit_rejects_small_samples() {
        assert!(matches!(
            fit_residual_distribution(&[0.1; 50]),
            Err(Error::InsufficientData(_))
        ));
    }

    /// Half-Cauchy on either side of the mode, side chosen with the left mass.
    fn lorentzian_samples(rp: &ResidualParams, n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        use statrs::distribution::{Cauchy, ContinuousCDF};
        let c = Cauchy::new(0.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(0.5..1.0);
                let half = c.inverse_cdf(u).abs();
                if rng.random::<f64>() < rp.left_weight() {
                    rp.location - rp.gamma_left * half
                } else {
                    rp.location + rp.gamma_right * half
                }
            })
            .collect()
    }

    #[test]
    fn residual_fit_recovers_asymmetric_parameters() {
        let truth = ResidualParams::new(0.1, 0.2, 0.6).unwrap();
        let fit = fit_residual_distribution(&lorentzian_samples(&truth, 100_000, 11)).unwrap();
        assert!((fit.location - truth.location).abs() / truth.location < 0.1, "{fit:?}");
        assert!((fit.gamma_left - truth.gamma_left).abs() / truth.gamma_left < 0.1, "{fit:?}");
        assert!((fit.gamma_right - truth.gamma_right).abs() / truth.gamma_right < 0.1, "{fit:?}");
    }

    #[test]
    fn residual_fit_of_symmetric_cauchy_is_symmetric() {
        let truth = ResidualParams::new(-0.3, 0.4, 0.4).unwrap();
        let fit = fit_residual_distribution(&lorentzian_samples(&truth, 100_000, 5)).unwrap();
        assert!((fit.gamma_left / fit.gamma_right - 1.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn mean_cdf_matches_quadrature() {
        let rp = ResidualParams::new(0.05, 0.01, 0.1).unwrap();
        for (a, b) in [(-3.0, -2.9), (-0.1, 0.2), (0.04, 0.0), (0.3, 0.34), (-0.02, 0.06), (1.0, 1.00001)] {
            let n = 20_000;
            let h = (b - a) / n as f64;
            let riemann: f64 = (0..n).map(|k| rp.cdf(a + (k as f64 + 0.5) * h)).sum::<f64>() / n as f64;
            assert!((rp.mean_cdf(a, b) - riemann).abs() < 1e-7, "[{a}, {b}]");
        }
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_bounded(x0 in -1.0..1.0f64, gl in 0.01..2.0f64, gr in 0.01..2.0f64, a in -20.0..20.0f64, da in 0.0..5.0f64) {
            let rp = ResidualParams::new(x0, gl, gr).unwrap();
            let (fa, fb) = (rp.cdf(a), rp.cdf(a + da));
            prop_assert!((0.0..=1.0).contains(&fa));
            prop_assert!(fb >= fa);
        }

        #[test]
        fn intercept_monotone_in_distance(x in 0.0..14.0f64, y in 0.0..15.0f64, vx in -5.0..5.0f64, vy in -5.0..5.0f64,
                                        theta in 0.0..6.28f64, d in 0.0..10.0f64, extra in 0.0..5.0f64, rt in 0.0..1.0f64) {
            let params = reference_params();
            let p = Point::new(x, y);
            let v = Point::new(vx, vy);
            let drifted = p + v * rt;
            let dir = Point::new(theta.cos(), theta.sin());
            let near = expected_intercept_time(p, v, drifted + dir * d, &params, rt);
            let far = expected_intercept_time(p, v, drifted + dir * (d + extra), &params, rt);
            prop_assert!(far >= near - 1e-12);
        }

        #[test]
        fn flight_time_linear_under_constant_profile(d in 0.01..30.0f64, k in 1.0..3.0f64, speed in 1.0..12.0f64) {
            let prof = BallSpeedProfile::constant(Movement::Dribble, speed);
            let t1 = time_of_flight(Point::ZERO, Point::new(d, 0.0), &prof);
            let tk = time_of_flight(Point::ZERO, Point::new(k * d, 0.0), &prof);
            prop_assert!((tk - k * t1).abs() < 1e-9 * tk.max(1.0));
        }
    }
}
