//! Half-return map on the positive y-axis, limit-cycle detection and
//! stability classification via the divergence integral.
//!
//! The vector field is symmetric about the origin, so symmetric cycles are
//! exactly the fixed points of the half-return map: any y0 > 0 whose
//! half-turn arrives back at (0, -y0) closes into a periodic orbit.

use crate::flow::{
    self, integrate_with_stop, segment_quadrature, IntegrationOptions, LienardField, StopMode,
    Terminal, Trajectory,
};
use crate::model::SystemSpec;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CyclesError {
    #[error(transparent)]
    Flow(#[from] flow::FlowError),
    #[error("trajectory does not close: section ordinate mismatch {mismatch} exceeds {tol}")]
    NonClosed { mismatch: f64, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions {
    pub integration: IntegrationOptions,
    pub n_grid: usize,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub t_max: f64,
    /// Relative tolerance on y0 for displacement-root bisection.
    pub root_rel_tol: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            integration: IntegrationOptions::default(),
            n_grid: 200,
            y_min: None,
            y_max: None,
            t_max: 1e4,
            root_rel_tol: 1e-10,
        }
    }
}

impl CycleOptions {
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            integration: self.integration.tightened(factor),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HalfReturnOutcome {
    Returned,
    FellIntoOrigin,
    Escaped,
}

/// One evaluation of the half-return map from (0, y0), y0 > 0.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HalfReturnRecord {
    pub y0: f64,
    /// Magnitude of the arrival ordinate at the next crossing with y < 0.
    pub y1: f64,
    pub displacement: f64,
    pub half_period: f64,
    pub max_x: f64,
    pub outcome: HalfReturnOutcome,
}

/// Install the origin-trap termination when it is sound: with the two-zero
/// shape, F >= 0 on [0, beta1], so the energy is nonincreasing inside the
/// strip |x| <= beta1 and an orbit dropping below both G(beta1) and the scan
/// floor's energy there can never cross the section above the floor again.
fn integration_with_trap(field: &impl LienardField, opts: &CycleOptions) -> IntegrationOptions {
    let mut io = opts.integration;
    if io.origin_trap.is_none() {
        if let Some(b1) = field.beta1() {
            let floor = opts.y_min.unwrap_or(1e-3 * field.section_scale());
            let energy = field.big_g(b1).min(0.5 * floor * floor) * (1.0 - 1e-9);
            if energy > 0.0 && energy.is_finite() {
                io.origin_trap = Some((energy, b1));
            }
        }
    }
    io
}

pub fn half_return(
    field: &impl LienardField,
    y0: f64,
    opts: &CycleOptions,
) -> Result<HalfReturnRecord, CyclesError> {
    let traj = integrate_with_stop(
        field,
        0.0,
        y0,
        opts.t_max,
        &integration_with_trap(field, opts),
        StopMode::HalfReturn,
    )?;
    Ok(record_from(&traj, y0))
}

fn record_from(traj: &Trajectory, y0: f64) -> HalfReturnRecord {
    let (t_end, _, y_end) = traj.final_state();
    match traj.terminal {
        Terminal::ReturnedToSection => {
            let y1 = y_end.abs();
            HalfReturnRecord {
                y0,
                y1,
                displacement: y1 - y0,
                half_period: t_end,
                max_x: max_abs_x(traj),
                outcome: HalfReturnOutcome::Returned,
            }
        }
        Terminal::EnteredOriginDisk => HalfReturnRecord {
            y0,
            y1: 0.0,
            displacement: -y0,
            half_period: t_end,
            max_x: max_abs_x(traj),
            outcome: HalfReturnOutcome::FellIntoOrigin,
        },
        Terminal::LeftDomain | Terminal::TimeOut => HalfReturnRecord {
            y0,
            y1: f64::NAN,
            displacement: f64::NAN,
            half_period: t_end,
            max_x: max_abs_x(traj),
            outcome: HalfReturnOutcome::Escaped,
        },
    }
}

/// Half-return that treats integration failure as an escape, for sweeps.
fn half_return_lenient(
    field: &impl LienardField,
    y0: f64,
    opts: &CycleOptions,
) -> HalfReturnRecord {
    half_return(field, y0, opts).unwrap_or(HalfReturnRecord {
        y0,
        y1: f64::NAN,
        displacement: f64::NAN,
        half_period: 0.0,
        max_x: 0.0,
        outcome: HalfReturnOutcome::Escaped,
    })
}

/// Signed displacement for root bracketing: decaying outcomes count as
/// negative, growing/escaping ones as positive.
fn displacement_signed(rec: &HalfReturnRecord) -> f64 {
    match rec.outcome {
        HalfReturnOutcome::Returned => rec.displacement,
        HalfReturnOutcome::FellIntoOrigin => -rec.y0,
        HalfReturnOutcome::Escaped => rec.y0,
    }
}

/// Max of |x| over the dense output. Per segment the Hermite cubic's
/// interior extrema are solved in closed form, so the amplitude is accurate
/// at the integration tolerance rather than the sample spacing.
fn max_abs_x(traj: &Trajectory) -> f64 {
    let mut best = 0.0f64;
    for seg in &traj.segments {
        best = best.max(seg.x0.abs()).max(seg.x1.abs());
        let h = seg.t1 - seg.t0;
        // x(s) = c3 s^3 + c2 s^2 + c1 s + c0 on s in [0, 1]
        let c3 = 2.0 * seg.x0 + h * seg.dx0 - 2.0 * seg.x1 + h * seg.dx1;
        let c2 = -3.0 * seg.x0 - 2.0 * h * seg.dx0 + 3.0 * seg.x1 - h * seg.dx1;
        let c1 = h * seg.dx0;
        let a = 3.0 * c3;
        let b = 2.0 * c2;
        let mut consider = |s: f64| {
            if (0.0..=1.0).contains(&s) {
                let (x, _) = seg.eval(seg.t0 + s * h);
                best = best.max(x.abs());
            }
        };
        if a.abs() < 1e-300 {
            if b.abs() > 1e-300 {
                consider(-c1 / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c1;
            if disc >= 0.0 {
                let r = disc.sqrt();
                consider((-b - r) / (2.0 * a));
                consider((-b + r) / (2.0 * a));
            }
        }
    }
    best
}

/// Half-return sweep over a geometric grid of section ordinates.
#[derive(Debug, Clone, Serialize)]
pub struct DisplacementProfile {
    pub records: Vec<HalfReturnRecord>,
    pub sign_changes: Vec<(f64, f64)>,
    pub tangencies: Vec<f64>,
}

pub fn scan_displacement(
    field: &impl LienardField,
    y_min: f64,
    y_max: f64,
    n_grid: usize,
    opts: &CycleOptions,
) -> DisplacementProfile {
    assert!(0.0 < y_min && y_min < y_max, "need 0 < y_min < y_max");
    let n = n_grid.max(16);
    let ratio = (y_max / y_min).ln();
    let grid: Vec<f64> = (0..n)
        .map(|i| y_min * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect();
    let records: Vec<HalfReturnRecord> = grid
        .par_iter()
        .map(|&y0| half_return_lenient(field, y0, opts))
        .collect();

    let mut sign_changes = Vec::new();
    let mut tangencies = Vec::new();
    for pair in records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        // Signed surrogates keep the boundary of the origin's basin usable
        // as a bracket: just inside an unstable cycle the orbit falls into
        // the origin disk instead of returning to the section.
        let (da, db) = (displacement_signed(a), displacement_signed(b));
        if !da.is_finite() || !db.is_finite() {
            continue;
        }
        if da != 0.0 && db != 0.0 && da.signum() != db.signum() {
            sign_changes.push((a.y0, b.y0));
        }
    }
    for win in records.windows(3) {
        let (l, m, r) = (&win[0], &win[1], &win[2]);
        if [l, m, r]
            .iter()
            .any(|rec| rec.outcome != HalfReturnOutcome::Returned)
        {
            continue;
        }
        let same_sign = l.displacement.signum() == m.displacement.signum()
            && m.displacement.signum() == r.displacement.signum();
        if same_sign && m.displacement.abs() < 1e-7 * m.y0 {
            tangencies.push(m.y0);
        }
    }
    DisplacementProfile {
        records,
        sign_changes,
        tangencies,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
    SemistableCandidate,
    Marginal,
}

/// A detected fixed point of the return map.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitCycle {
    pub y0_star: f64,
    pub amplitude: f64,
    pub period: f64,
    pub div_integral: f64,
    pub stability: Stability,
    pub intersects_alpha1: bool,
    /// |y(T) - y0_star| of the reconstructed full turn.
    pub closure_residual: f64,
}

/// Weighted count: a semistable candidate stands for a double cycle.
pub fn cycle_count_weighted(cycles: &[LimitCycle]) -> usize {
    cycles
        .iter()
        .map(|c| {
            if c.stability == Stability::SemistableCandidate {
                2
            } else {
                1
            }
        })
        .sum()
}

/// ∮ -F'(x) dt over one period, on dense output with quadrature split at
/// the corner passage times of F.
pub fn divergence_integral(
    field: &impl LienardField,
    cycle_traj: &Trajectory,
) -> Result<f64, CyclesError> {
    let (_, _, y_start) = cycle_traj.samples[0];
    let (_, _, y_end) = cycle_traj.final_state();
    let mismatch = (y_end - y_start).abs();
    let tol = 1e-6 * y_start.abs();
    if mismatch > tol {
        return Err(CyclesError::NonClosed { mismatch, tol });
    }
    let corners = field.f_corners();
    let mut total = 0.0;
    for seg in &cycle_traj.segments {
        total += segment_quadrature(seg, &corners, |x, _, _| -field.f_prime(x));
    }
    Ok(total)
}

/// d(displacement)/d(y0) by centered finite differences.
pub fn displacement_slope(
    field: &impl LienardField,
    y0: f64,
    opts: &CycleOptions,
) -> Result<f64, CyclesError> {
    let h = 1e-5 * y0;
    let lo = half_return(field, y0 - h, opts)?;
    let hi = half_return(field, y0 + h, opts)?;
    Ok((hi.displacement - lo.displacement) / (2.0 * h))
}

pub fn find_cycles(
    field: &impl LienardField,
    opts: &CycleOptions,
) -> Result<Vec<LimitCycle>, CyclesError> {
    let y_scale = field.section_scale();
    let y_cap = 10.0 * (2.0 * field.big_g(field.domain_d())).sqrt();
    let y_min = opts.y_min.unwrap_or(1e-3 * y_scale);
    let y_max = opts.y_max.unwrap_or(y_cap).min(y_cap).max(2.0 * y_min);
    // resolve the scan window and origin trap once for the whole search
    let opts = &{
        let mut o = *opts;
        o.y_min = Some(y_min);
        o.y_max = Some(y_max);
        o.integration = integration_with_trap(field, &o);
        o
    };
    let profile = scan_displacement(field, y_min, y_max, opts.n_grid, opts);

    let mut brackets = profile.sign_changes.clone();
    let mut semistable_at: Vec<(f64, f64)> = Vec::new(); // (y0, |displacement| achieved)

    // A fold of cycles shows up as a narrow positive hump of the
    // displacement between two negative stretches; a coarse grid can step
    // over it. Refine every strict interior local maximum of the sampled
    // displacement that did not already produce a sign change.
    let recs = &profile.records;
    for i in 1..recs.len().saturating_sub(1) {
        let (l, m, r) = (&recs[i - 1], &recs[i], &recs[i + 1]);
        if [l, m, r]
            .iter()
            .any(|rec| rec.outcome != HalfReturnOutcome::Returned)
        {
            continue;
        }
        if m.displacement >= 0.0
            || m.displacement <= l.displacement
            || m.displacement <= r.displacement
        {
            continue;
        }
        let (y_peak, d_peak) =
            golden_max(|y| displacement_signed(&half_return_lenient(field, y, opts)), l.y0, r.y0);
        if d_peak > 0.0 {
            brackets.push((l.y0, y_peak));
            brackets.push((y_peak, r.y0));
        } else if d_peak.abs() < 1e-7 * y_peak {
            semistable_at.push((y_peak, d_peak.abs()));
        }
    }
    // spec-level tangency candidates re-examined at the refined resolution
    for &y_t in &profile.tangencies {
        if semistable_at
            .iter()
            .all(|&(y, _)| (y - y_t).abs() > 1e-3 * y_t)
        {
            let rec = half_return_lenient(field, y_t, opts);
            if rec.outcome == HalfReturnOutcome::Returned && rec.displacement.abs() < 1e-7 * y_t {
                semistable_at.push((y_t, rec.displacement.abs()));
            }
        }
    }
    brackets.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut roots: Vec<(f64, bool)> = Vec::new();
    for &(lo, hi) in &brackets {
        if let Some(root) = bisect_displacement(field, lo, hi, opts) {
            roots.push(root);
        }
    }
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    roots.dedup_by(|a, b| {
        if (a.0 - b.0).abs() <= 1e-6 * b.0.abs() {
            b.1 |= a.1;
            true
        } else {
            false
        }
    });

    let mut cycles = Vec::new();
    for (y0, certified) in roots {
        if let Some(cycle) = build_cycle(field, y0, opts, false, certified)? {
            cycles.push(cycle);
        }
    }
    for (y0, _achieved) in semistable_at {
        if cycles
            .iter()
            .any(|c: &LimitCycle| (c.y0_star - y0).abs() <= 1e-4 * y0)
        {
            continue;
        }
        if let Some(cycle) = build_cycle(field, y0, opts, true, false)? {
            cycles.push(cycle);
        }
    }
    cycles.sort_by(|a, b| a.y0_star.partial_cmp(&b.y0_star).unwrap());
    Ok(cycles)
}

/// Bisect a sign change of the (signed) displacement. The returned flag says
/// whether the final bracket certifies a fixed point: it does unless an
/// endpoint escaped, because a returned-to-returned sign change pins a root
/// by continuity and a fell-into-origin-to-returned change pins the basin
/// boundary, which is the (unstable) cycle itself.
fn bisect_displacement(
    field: &impl LienardField,
    mut lo: f64,
    mut hi: f64,
    opts: &CycleOptions,
) -> Option<(f64, bool)> {
    let rec_lo = half_return_lenient(field, lo, opts);
    let rec_hi = half_return_lenient(field, hi, opts);
    let mut d_lo = displacement_signed(&rec_lo);
    let d_hi = displacement_signed(&rec_hi);
    let mut lo_escaped = rec_lo.outcome == HalfReturnOutcome::Escaped;
    let mut hi_escaped = rec_hi.outcome == HalfReturnOutcome::Escaped;
    if d_lo == 0.0 {
        return Some((lo, !lo_escaped));
    }
    if d_hi == 0.0 {
        return Some((hi, !hi_escaped));
    }
    if d_lo.signum() == d_hi.signum() {
        return None;
    }
    while hi - lo > opts.root_rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        let rec_mid = half_return_lenient(field, mid, opts);
        let d_mid = displacement_signed(&rec_mid);
        if d_mid == 0.0 {
            return Some((mid, rec_mid.outcome != HalfReturnOutcome::Escaped));
        }
        let mid_escaped = rec_mid.outcome == HalfReturnOutcome::Escaped;
        if d_mid.signum() == d_lo.signum() {
            lo = mid;
            d_lo = d_mid;
            lo_escaped = mid_escaped;
        } else {
            hi = mid;
            hi_escaped = mid_escaped;
        }
    }
    Some((0.5 * (lo + hi), !lo_escaped && !hi_escaped))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if b - a <= 1e-10 * b {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn build_cycle(
    field: &impl LienardField,
    y0: f64,
    opts: &CycleOptions,
    semistable: bool,
    certified: bool,
) -> Result<Option<LimitCycle>, CyclesError> {
    // F and g are odd, so a fixed point of the half-return map is a cycle
    // whose second half is the point reflection of the first. Building the
    // cycle from the half turn keeps strongly repelling cycles constructible:
    // a full turn integrated from the best floating-point approximation of
    // an unstable fixed point can drift visibly before it closes.
    let traj = integrate_with_stop(
        field,
        0.0,
        y0,
        opts.t_max,
        &opts.integration,
        StopMode::HalfReturn,
    )?;
    if traj.terminal != Terminal::ReturnedToSection {
        return Ok(None);
    }
    let (half_period, _, y1) = traj.final_state();
    let closure_residual = (y1.abs() - y0).abs();
    // A certified root carries a sign-change bracket of width root_rel_tol,
    // so it stands however repelling the cycle is; the residual is then a
    // diagnostic (root_rel_tol amplified by the multiplier). Uncertified
    // candidates must actually close.
    if !certified && closure_residual > 1e-2 * y0 {
        return Ok(None);
    }
    let period = 2.0 * half_period;
    let amplitude = max_abs_x(&traj);
    let corners = field.f_corners();
    // -F' is even: the reflected half contributes the same amount.
    let div_integral = 2.0
        * traj
            .segments
            .iter()
            .map(|seg| segment_quadrature(seg, &corners, |x, _, _| -field.f_prime(x)))
            .sum::<f64>();
    let tol_div = 1e-6 * period;
    let stability = if semistable {
        Stability::SemistableCandidate
    } else if div_integral < -tol_div {
        Stability::Stable
    } else if div_integral > tol_div {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    let intersects_alpha1 = field.alpha1().map(|a| amplitude > a).unwrap_or(false);
    Ok(Some(LimitCycle {
        y0_star: y0,
        amplitude,
        period,
        div_integral,
        stability,
        intersects_alpha1,
        closure_residual,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OriginStability {
    Sink,
    Source,
    Marginal,
}

/// Probe the half-return map at two small ordinates to classify the origin.
pub fn origin_stability(
    field: &impl LienardField,
    opts: &CycleOptions,
) -> OriginStability {
    let y_scale = field.section_scale();
    let probe_opts = CycleOptions {
        integration: opts.integration.tightened(100.0),
        ..*opts
    };
    let mut signs = Vec::new();
    for factor in [1e-4, 1e-3] {
        let y0 = factor * y_scale;
        let rec = half_return_lenient(field, y0, &probe_opts);
        let d = displacement_signed(&rec);
        let tol = 1e-9 * y0;
        signs.push(if d < -tol {
            -1
        } else if d > tol {
            1
        } else {
            0
        });
    }
    if signs.iter().all(|&s| s == -1) {
        OriginStability::Sink
    } else if signs.iter().all(|&s| s == 1) {
        OriginStability::Source
    } else {
        OriginStability::Marginal
    }
}

// ---------------------------------------------------------------------------
// Normalizing transformation u = sgn(x) sqrt(2 G(x))
// ---------------------------------------------------------------------------

/// The transformed system u' = y - F̂(u), y' = -u with F̂(u) = F(h⁻¹(u)).
/// The transformation fixes the y-axis and leaves y unchanged, so cycle
/// section ordinates agree with the original system. Used for validation.
pub struct NormalizedSystem {
    inner: SystemSpec,
    u_domain: f64,
    // monotone lookup table (x, u = h(x)) for fast inversion
    xs: Vec<f64>,
    us: Vec<f64>,
}

pub fn normalize_system(spec: &SystemSpec) -> NormalizedSystem {
    let d = spec.domain_d();
    let n = 4096;
    let mut xs = Vec::with_capacity(n + 1);
    let mut us = Vec::with_capacity(n + 1);
    xs.push(0.0);
    us.push(0.0);
    for i in 0..n {
        let x = 1e-9 * d * ((d / (1e-9 * d)).ln() * i as f64 / (n - 1) as f64).exp();
        xs.push(x);
        us.push((2.0 * spec.eval_big_g(x)).sqrt());
    }
    let u_domain = *us.last().unwrap();
    NormalizedSystem {
        inner: spec.clone(),
        u_domain,
        xs,
        us,
    }
}

impl NormalizedSystem {
    pub fn h(&self, x: f64) -> f64 {
        x.signum() * (2.0 * self.inner.eval_big_g(x)).sqrt()
    }

    /// Inverse of h on the positive axis, extended oddly.
    pub fn h_inv(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let ua = u.abs().min(self.u_domain);
        let idx = self.us.partition_point(|&v| v < ua).min(self.us.len() - 1);
        let (mut lo, mut hi) = if idx == 0 {
            (0.0, self.xs[0].max(f64::MIN_POSITIVE))
        } else {
            (self.xs[idx - 1], self.xs[idx])
        };
        // safeguarded Newton on h(x) - ua = 0; h'(x) = g(x)/h(x)
        let mut x = 0.5 * (lo + hi);
        for _ in 0..60 {
            let hx = (2.0 * self.inner.eval_big_g(x)).sqrt();
            let r = hx - ua;
            if r.abs() <= 1e-15 * (1.0 + ua) {
                break;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let g = self.inner.eval_g(x);
            let newton = if g > 0.0 && hx > 0.0 {
                x - r * hx / g
            } else {
                f64::NAN
            };
            x = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        u.signum() * x
    }

    pub fn big_f_hat(&self, u: f64) -> f64 {
        self.inner.eval_big_f(self.h_inv(u))
    }
}

impl LienardField for NormalizedSystem {
    fn big_f(&self, u: f64) -> f64 {
        self.big_f_hat(u)
    }
    fn g_side(&self, u: f64, _side: f64) -> f64 {
        u
    }
    fn big_g(&self, u: f64) -> f64 {
        0.5 * u * u
    }
    fn f_prime(&self, u: f64) -> f64 {
        let h = 1e-6 * u.abs().max(1e-3);
        (self.big_f_hat(u + h) - self.big_f_hat(u - h)) / (2.0 * h)
    }
    fn domain_d(&self) -> f64 {
        self.u_domain
    }
    fn section_scale(&self) -> f64 {
        self.inner.section_scale()
    }
    fn alpha1(&self) -> Option<f64> {
        self.inner.alpha1().map(|x| self.h(x))
    }
    fn beta1(&self) -> Option<f64> {
        self.inner.beta1().map(|x| self.h(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;

    fn fast_opts() -> CycleOptions {
        CycleOptions {
            n_grid: 60,
            y_max: Some(10.0),
            ..Default::default()
        }
    }

    #[test]
    fn hamiltonian_displacement_is_zero() {
        let s = model::hamiltonian_test();
        let opts = CycleOptions::default();
        for i in 1..=8 {
            let y0 = 0.25 * i as f64;
            let rec = half_return(&s, y0, &opts).unwrap();
            assert_eq!(rec.outcome, HalfReturnOutcome::Returned);
            assert!(
                rec.displacement.abs() < 1e-8,
                "y0 = {y0}: displacement {}",
                rec.displacement
            );
            assert!((rec.max_x - y0).abs() < 1e-7); // circular orbit
        }
    }

    #[test]
    fn origin_sink_and_source_probes() {
        let opts = CycleOptions::default();
        let sink = model::glo(1.0, -2.6, 1.0).unwrap();
        let rec = half_return(&sink, 1e-3, &opts).unwrap();
        assert!(rec.displacement < 0.0, "sink probe {}", rec.displacement);

        let source = model::glo(-1.0, 0.0, 1.0).unwrap();
        let rec = half_return(&source, 1e-3, &opts).unwrap();
        assert!(rec.displacement > 0.0, "source probe {}", rec.displacement);
    }

    #[test]
    fn origin_stability_classification() {
        let opts = CycleOptions::default();
        assert_eq!(
            origin_stability(&model::glo(1.0, 0.0, 1.0).unwrap(), &opts),
            OriginStability::Sink
        );
        assert_eq!(
            origin_stability(&model::glo(-1.0, 0.0, 1.0).unwrap(), &opts),
            OriginStability::Source
        );
        // fine focus of order 1: still a sink, just weakly attracting
        assert_eq!(
            origin_stability(&model::glo(0.0, 1.0, 1.0).unwrap(), &opts),
            OriginStability::Sink
        );
    }

    #[test]
    fn scan_counts_sign_changes() {
        let opts = fast_opts();
        let none = model::glo(1.0, -2.0, 1.0).unwrap();
        let p = scan_displacement(&none, 1e-3, 10.0, opts.n_grid, &opts);
        assert_eq!(p.sign_changes.len(), 0);

        let one = model::glo(-1.0, 0.0, 1.0).unwrap();
        let p = scan_displacement(&one, 1e-3, 10.0, opts.n_grid, &opts);
        assert_eq!(p.sign_changes.len(), 1);

        let two = model::glo(1.0, -2.6, 1.0).unwrap();
        let p = scan_displacement(&two, 1e-3, 10.0, opts.n_grid, &opts);
        assert_eq!(p.sign_changes.len(), 2);
    }

    #[test]
    fn two_cycles_inner_unstable_outer_stable() {
        let s = model::glo(1.0, -2.6, 1.0).unwrap();
        let opts = fast_opts();
        let cycles = find_cycles(&s, &opts).unwrap();
        assert_eq!(cycles.len(), 2, "{cycles:?}");
        let (inner, outer) = (&cycles[0], &cycles[1]);
        assert_eq!(inner.stability, Stability::Unstable);
        assert_eq!(outer.stability, Stability::Stable);
        assert!(inner.amplitude < outer.amplitude);
        // the outer cycle reaches past alpha1; the inner one stays inside the
        // strip |x| <= alpha1 here, which is exactly the configuration allowed:
        // at most one such cycle, and it must be the unstable one
        assert!(outer.intersects_alpha1);
        assert!(!inner.intersects_alpha1);
        let alpha1 = s.characteristic_points().unwrap().alpha1;
        assert!(inner.amplitude > s.characteristic_points().unwrap().beta1);
        assert!(inner.amplitude < alpha1);
        assert!(inner.div_integral > 0.0);
        assert!(outer.div_integral < 0.0);
        // divergence sign matches return-map slope sign
        for c in &cycles {
            let slope = displacement_slope(&s, c.y0_star, &opts).unwrap();
            assert_eq!(
                slope.signum(),
                c.div_integral.signum(),
                "cycle at {}",
                c.y0_star
            );
        }
    }

    #[test]
    fn no_cycles_in_nonnegative_damping_regime() {
        let s = model::glo(1.0, -2.0, 1.0).unwrap();
        let cycles = find_cycles(&s, &fast_opts()).unwrap();
        assert!(cycles.is_empty(), "{cycles:?}");
    }

    #[test]
    fn unique_stable_cycle_for_negative_a() {
        let s = model::glo(-1.0, 0.0, 1.0).unwrap();
        let cycles = find_cycles(&s, &fast_opts()).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].stability, Stability::Stable);
        assert!(cycles[0].div_integral < 0.0);
    }

    #[test]
    fn pls_at_most_two_cycles() {
        let s = model::pls(1.0, 1.0, -1.8).unwrap();
        let opts = CycleOptions {
            n_grid: 60,
            y_max: Some(20.0),
            ..Default::default()
        };
        let cycles = find_cycles(&s, &opts).unwrap();
        assert!(cycle_count_weighted(&cycles) <= 2, "{cycles:?}");
    }

    #[test]
    fn divergence_integral_vanishes_for_hamiltonian() {
        let s = model::hamiltonian_test();
        let opts = CycleOptions::default();
        let traj = integrate_with_stop(
            &s,
            0.0,
            1.0,
            opts.t_max,
            &opts.integration,
            StopMode::FullReturn,
        )
        .unwrap();
        let div = divergence_integral(&s, &traj).unwrap();
        assert!(div.abs() < 1e-8, "div = {div}");
    }

    #[test]
    fn normalize_is_identity_for_linear_g() {
        let s = model::rychkov(1.0, -3.0).unwrap(); // g = x, c = 0
        let norm = normalize_system(&s);
        for i in 1..50 {
            let x = s.domain_d() * i as f64 / 51.0;
            assert!(
                (norm.h(x) - x).abs() < 1e-12 * x,
                "h({x}) = {}",
                norm.h(x)
            );
            assert!(
                (norm.big_f_hat(x) - s.eval_big_f(x)).abs() < 1e-9 * s.eval_big_f(x).abs().max(1.0)
            );
        }
    }

    #[test]
    fn h_is_odd_increasing() {
        let s = model::glo(1.0, -2.6, 1.0).unwrap();
        let norm = normalize_system(&s);
        assert_eq!(norm.h(0.0), 0.0);
        let mut prev = 0.0;
        for i in 1..100 {
            let x = s.domain_d() * i as f64 / 101.0;
            let u = norm.h(x);
            assert!(u > prev);
            assert_eq!(norm.h(-x), -u);
            // inverse round-trip
            assert!((norm.h_inv(u) - x).abs() < 1e-10 * x.max(1e-6));
            prev = u;
        }
    }
}
