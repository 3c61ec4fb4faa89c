//! Event-accurate integration of the planar field (y - F(x), -g(x)).
//!
//! The field may jump across x = 0 (g picks up c*sgn(x)), so each smooth
//! side is integrated separately with an embedded Dormand-Prince 5(4) pair:
//! a step never evaluates g across the jump. Crossings of x = 0 are located
//! on cubic Hermite dense output and the state is snapped to the section
//! before integration restarts on the destination side.

use crate::model::SystemSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("step size underflow at t = {t}, (x, y) = ({x}, {y})")]
    StepUnderflow { t: f64, x: f64, y: f64 },
}

/// Abstraction over the Liénard data the integrator needs; implemented by
/// `SystemSpec` and by the normalized system of `cycles::normalize_system`.
pub trait LienardField: Sync {
    fn big_f(&self, x: f64) -> f64;
    /// g evaluated on one smooth side: g0(x) + c * side.
    fn g_side(&self, x: f64, side: f64) -> f64;
    fn big_g(&self, x: f64) -> f64;
    /// F'(x); may be one-sided at corners, +inf where unbounded.
    fn f_prime(&self, x: f64) -> f64;
    fn domain_d(&self) -> f64;
    /// Positive abscissae where F' jumps (quadrature splits there).
    fn f_corners(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Frequency scale sqrt(max(g0'(0+), 1)) for the origin-disk metric.
    fn origin_omega(&self) -> f64 {
        1.0
    }
    /// sqrt(2 G(beta2)) when the landmark points exist: the natural scale
    /// for section ordinates. Falls back to 1.
    fn section_scale(&self) -> f64 {
        1.0
    }
    /// The minimum location of F in (beta1, beta2), when it exists.
    fn alpha1(&self) -> Option<f64> {
        None
    }
    /// First positive zero of F when F has the two-zero shape (so F >= 0 on
    /// [0, beta1]); enables the origin-trap termination.
    fn beta1(&self) -> Option<f64> {
        None
    }
}

impl LienardField for SystemSpec {
    fn big_f(&self, x: f64) -> f64 {
        self.eval_big_f(x)
    }
    fn g_side(&self, x: f64, side: f64) -> f64 {
        self.eval_g0(x) + self.c() * side
    }
    fn big_g(&self, x: f64) -> f64 {
        self.eval_big_g(x)
    }
    fn f_prime(&self, x: f64) -> f64 {
        self.f_unchecked(x)
    }
    fn domain_d(&self) -> f64 {
        self.domain_d()
    }
    fn f_corners(&self) -> Vec<f64> {
        SystemSpec::f_corners(self)
    }
    fn origin_omega(&self) -> f64 {
        self.g0_slope_at_origin().clamp(1.0, 1e12).sqrt()
    }
    fn section_scale(&self) -> f64 {
        match self.characteristic_points() {
            Ok(p) => (2.0 * self.eval_big_g(p.beta2)).sqrt(),
            Err(_) => 1.0,
        }
    }
    fn alpha1(&self) -> Option<f64> {
        self.characteristic_points().ok().map(|p| p.alpha1)
    }
    fn beta1(&self) -> Option<f64> {
        self.characteristic_points().ok().map(|p| p.beta1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// `(energy, x_bound)`: terminate with `EnteredOriginDisk` once
    /// `G(x) + y^2/2 <= energy` with `|x| <= x_bound`. Sound when F >= 0 on
    /// `[0, x_bound]` and `energy <= G(x_bound)`: the energy is then
    /// nonincreasing and the orbit is confined, so it can never return to
    /// the section above `sqrt(2 * energy)`. Spares integrating slow decays
    /// toward the origin to the (much smaller) origin disk.
    pub origin_trap: Option<(f64, f64)>,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 50_000_000,
            origin_trap: None,
        }
    }
}

impl IntegrationOptions {
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: (self.rel_tol / factor).max(1e-14),
            abs_tol: (self.abs_tol / factor).max(5e-16),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingDirection {
    LeftToRight,
    RightToLeft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub t: f64,
    pub y: f64,
    pub direction: CrossingDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    TimeOut,
    ReturnedToSection,
    EnteredOriginDisk,
    LeftDomain,
}

/// One accepted dense-output segment: cubic Hermite data plus the side of
/// the section the segment lives on (so g can be re-evaluated exactly).
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub dx0: f64,
    pub dy0: f64,
    pub dx1: f64,
    pub dy1: f64,
    pub side: f64,
}

impl Segment {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let (h00, h10, h01, h11) = hermite_basis(s);
        (
            h00 * self.x0 + h10 * h * self.dx0 + h01 * self.x1 + h11 * h * self.dx1,
            h00 * self.y0 + h10 * h * self.dy0 + h01 * self.y1 + h11 * h * self.dy1,
        )
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

/// Event-annotated numerical orbit.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<(f64, f64, f64)>,
    pub events: Vec<CrossingEvent>,
    pub terminal: Terminal,
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn final_state(&self) -> (f64, f64, f64) {
        *self.samples.last().expect("trajectory has samples")
    }
}

/// When the driver should stop, besides t_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMode {
    /// Run until t_max.
    Time,
    /// Stop at the first crossing of x = 0 with y < 0.
    HalfReturn,
    /// Stop at the first crossing of x = 0 with y > 0 (one full turn when
    /// started on the positive y-axis).
    FullReturn,
}

/// y² — positive means the crossing at (0, y) is transversal.
pub fn crossing_indicator(_spec: &SystemSpec, y: f64) -> f64 {
    y * y
}

pub fn integrate(
    field: &impl LienardField,
    x0: f64,
    y0: f64,
    t_max: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory, FlowError> {
    integrate_with_stop(field, x0, y0, t_max, opts, StopMode::Time)
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub fn integrate_with_stop(
    field: &impl LienardField,
    x0: f64,
    y0: f64,
    t_max: f64,
    opts: &IntegrationOptions,
    stop: StopMode,
) -> Result<Trajectory, FlowError> {
    let d = field.domain_d();
    let omega = field.origin_omega();
    let origin_radius = 1e-7 * d;
    let eps_slide = 1e-9 * y0.abs().max(1.0);

    let mut samples = Vec::new();
    let mut events = Vec::new();
    let mut segments = Vec::new();

    let mut t = 0.0;
    let mut x = x0;
    let mut y = y0;
    // side of the section the current smooth piece lives on
    let mut side = if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else if y != 0.0 {
        // x' = y at the section, so motion enters the side of sign(y)
        y.signum()
    } else {
        1.0
    };
    samples.push((t, x, y));

    let deriv = |x: f64, y: f64, side: f64| (y - field.big_f(x), -field.g_side(x, side));

    if scaled_radius(x, y, omega) < origin_radius {
        return Ok(Trajectory {
            samples,
            events,
            terminal: Terminal::EnteredOriginDisk,
            segments,
        });
    }

    let (mut dx, mut dy) = deriv(x, y, side);
    let speed = (dx * dx + dy * dy).sqrt().max(1e-8);
    let mut h = (0.01 * (x * x + y * y).sqrt().max(1.0) / speed).min(t_max / 10.0);
    let mut terminal = Terminal::TimeOut;
    let mut steps = 0usize;

    'outer: while t < t_max {
        if steps >= opts.max_steps {
            break;
        }
        steps += 1;
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(FlowError::StepUnderflow { t, x, y });
        }
        let mut clipped = false;
        if t + h >= t_max {
            h = t_max - t;
            clipped = true;
        }

        // DP45 stages on the current side
        let k1 = (dx, dy);
        let k2 = deriv(x + h * A21 * k1.0, y + h * A21 * k1.1, side);
        let k3 = deriv(
            x + h * (A31 * k1.0 + A32 * k2.0),
            y + h * (A31 * k1.1 + A32 * k2.1),
            side,
        );
        let k4 = deriv(
            x + h * (A41 * k1.0 + A42 * k2.0 + A43 * k3.0),
            y + h * (A41 * k1.1 + A42 * k2.1 + A43 * k3.1),
            side,
        );
        let k5 = deriv(
            x + h * (A51 * k1.0 + A52 * k2.0 + A53 * k3.0 + A54 * k4.0),
            y + h * (A51 * k1.1 + A52 * k2.1 + A53 * k3.1 + A54 * k4.1),
            side,
        );
        let k6 = deriv(
            x + h * (A61 * k1.0 + A62 * k2.0 + A63 * k3.0 + A64 * k4.0 + A65 * k5.0),
            y + h * (A61 * k1.1 + A62 * k2.1 + A63 * k3.1 + A64 * k4.1 + A65 * k5.1),
            side,
        );
        let x_new = x + h * (B1 * k1.0 + B3 * k3.0 + B4 * k4.0 + B5 * k5.0 + B6 * k6.0);
        let y_new = y + h * (B1 * k1.1 + B3 * k3.1 + B4 * k4.1 + B5 * k5.1 + B6 * k6.1);
        let k7 = deriv(x_new, y_new, side);
        let ex = h * (E1 * k1.0 + E3 * k3.0 + E4 * k4.0 + E5 * k5.0 + E6 * k6.0 + E7 * k7.0);
        let ey = h * (E1 * k1.1 + E3 * k3.1 + E4 * k4.1 + E5 * k5.1 + E6 * k6.1 + E7 * k7.1);
        let scx = opts.abs_tol + opts.rel_tol * x.abs().max(x_new.abs());
        let scy = opts.abs_tol + opts.rel_tol * y.abs().max(y_new.abs());
        let err = (0.5 * ((ex / scx).powi(2) + (ey / scy).powi(2))).sqrt();

        // overflow in a trial stage poisons the error estimate; treat as reject
        if !err.is_finite() || !x_new.is_finite() || !y_new.is_finite() {
            h *= 0.2;
            continue;
        }
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            continue;
        }

        // accepted
        let seg = Segment {
            t0: t,
            t1: t + h,
            x0: x,
            y0: y,
            x1: x_new,
            y1: y_new,
            dx0: k1.0,
            dy0: k1.1,
            dx1: k7.0,
            dy1: k7.1,
            side,
        };

        // section crossing inside this step?
        let crossed = x_new * side < 0.0;
        if crossed {
            let t_event = locate_zero_x(&seg);
            let (_, y_event) = seg.eval(t_event);
            let mut ev_seg = seg;
            ev_seg.t1 = t_event;
            ev_seg.x1 = 0.0;
            ev_seg.y1 = y_event;
            let (edx, edy) = deriv(0.0, y_event, side);
            ev_seg.dx1 = edx;
            ev_seg.dy1 = edy;
            segments.push(ev_seg);

            let direction = if side < 0.0 {
                CrossingDirection::LeftToRight
            } else {
                CrossingDirection::RightToLeft
            };
            t = t_event;
            x = 0.0;
            y = y_event;
            samples.push((t, x, y));

            if y_event.abs() <= eps_slide || scaled_radius(0.0, y_event, omega) < origin_radius {
                terminal = Terminal::EnteredOriginDisk;
                break 'outer;
            }
            events.push(CrossingEvent {
                t: t_event,
                y: y_event,
                direction,
            });
            let returned = match stop {
                StopMode::Time => false,
                StopMode::HalfReturn => y_event < 0.0,
                StopMode::FullReturn => y_event > 0.0,
            };
            if returned {
                terminal = Terminal::ReturnedToSection;
                break 'outer;
            }
            side = -side;
            let (ndx, ndy) = deriv(x, y, side);
            dx = ndx;
            dy = ndy;
            h *= (0.9 * err.max(1e-4).powf(-0.2)).clamp(0.2, 5.0);
            continue;
        }

        segments.push(seg);
        t += h;
        x = x_new;
        y = y_new;
        dx = k7.0;
        dy = k7.1;
        samples.push((t, x, y));

        if x.abs() > d {
            terminal = Terminal::LeftDomain;
            break;
        }
        if scaled_radius(x, y, omega) < origin_radius {
            terminal = Terminal::EnteredOriginDisk;
            break;
        }
        if let Some((e_trap, x_trap)) = opts.origin_trap {
            if x.abs() <= x_trap && field.big_g(x) + 0.5 * y * y <= e_trap {
                terminal = Terminal::EnteredOriginDisk;
                break;
            }
        }
        if clipped && t >= t_max {
            terminal = Terminal::TimeOut;
            break;
        }
        h *= (0.9 * err.max(1e-4).powf(-0.2)).clamp(0.2, 5.0);
    }

    Ok(Trajectory {
        samples,
        events,
        terminal,
        segments,
    })
}

fn scaled_radius(x: f64, y: f64, omega: f64) -> f64 {
    (x * x + (y / omega) * (y / omega)).sqrt()
}

/// Bisection for x(t) = 0 on a segment whose endpoints straddle the section,
/// to 1e-13 relative in t.
fn locate_zero_x(seg: &Segment) -> f64 {
    let mut lo = seg.t0;
    let mut hi = seg.t1;
    let sign_lo = seg.x0.signum();
    let tol = 1e-13 * hi.abs().max(1.0);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (xm, _) = seg.eval(mid);
        if xm == 0.0 {
            return mid;
        }
        if xm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// 5-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// ∫ w(x(t), y(t), side) dt over one dense segment, split at passage times
/// of the given corner abscissae of |x|.
pub fn segment_quadrature(
    seg: &Segment,
    corners: &[f64],
    mut integrand: impl FnMut(f64, f64, f64) -> f64,
) -> f64 {
    // split points: times where |x| crosses a corner abscissa
    let mut cuts = vec![seg.t0, seg.t1];
    for &corner in corners {
        for target in [corner, -corner] {
            let a = seg.x0 - target;
            let b = seg.x1 - target;
            if a != 0.0 && b != 0.0 && a.signum() != b.signum() {
                let mut lo = seg.t0;
                let mut hi = seg.t1;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let (xm, _) = seg.eval(mid);
                    if (xm - target).signum() == a.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let tt = mid + half * node;
            let (xx, yy) = seg.eval(tt);
            acc += weight * integrand(xx, yy, seg.side);
        }
        total += acc * half;
    }
    total
}

/// Max over dense segments of |ΔE - ∫ -g(x)F(x) dt| / (1 + |E|): an
/// integration-quality metric (dE/dt = -g(x)F(x) along orbits).
pub fn energy_residual(field: &impl LienardField, traj: &Trajectory) -> f64 {
    let energy = |x: f64, y: f64| field.big_g(x) + 0.5 * y * y;
    let mut worst = 0.0f64;
    for seg in &traj.segments {
        let e0 = energy(seg.x0, seg.y0);
        let e1 = energy(seg.x1, seg.y1);
        let integral = segment_quadrature(seg, &[], |x, y, side| {
            let _ = y;
            -field.g_side(x, side) * field.big_f(x)
        });
        worst = worst.max((e1 - e0 - integral).abs() / (1.0 + e1.abs()));
    }
    worst
}

/// CSV export: header `t,x,y,event`, 17 significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,y,event\n");
    let mut by_time: std::collections::BTreeMap<u64, &CrossingEvent> = Default::default();
    for ev in &traj.events {
        by_time.insert(ev.t.to_bits(), ev);
    }
    for &(t, x, y) in &traj.samples {
        let tag = match by_time.get(&t.to_bits()) {
            Some(ev) if x == 0.0 => match ev.direction {
                CrossingDirection::LeftToRight => "L2R",
                CrossingDirection::RightToLeft => "R2L",
            },
            _ => "",
        };
        out.push_str(&format!("{:.16e},{:.16e},{:.16e},{}\n", t, x, y, tag));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;

    #[test]
    fn hamiltonian_circle_closes() {
        // F = 0, g = x: orbit through (0, 1) is the unit circle, period 2*pi
        let s = model::hamiltonian_test();
        let opts = IntegrationOptions::default();
        let period = 2.0 * std::f64::consts::PI;
        let traj = integrate(&s, 0.0, 1.0, period, &opts).unwrap();
        let (_, xf, yf) = traj.final_state();
        assert!((xf - 0.0).abs() < 1e-8, "x drifted to {xf}");
        assert!((yf - 1.0).abs() < 1e-8, "y drifted to {yf}");
        assert_eq!(traj.terminal, Terminal::TimeOut);
    }

    #[test]
    fn hamiltonian_energy_conserved_over_ten_periods() {
        let s = model::hamiltonian_test();
        let opts = IntegrationOptions::default();
        let t_max = 10.0 * 2.0 * std::f64::consts::PI;
        let traj = integrate(&s, 0.0, 1.0, t_max, &opts).unwrap();
        assert!(energy_residual(&s, &traj) < 1e-8);
        let (_, xf, yf) = traj.final_state();
        let drift = (s.eval_energy(xf, yf) - 0.5).abs();
        assert!(drift < 1e-8, "energy drift {drift}");
    }

    #[test]
    fn filippov_events_alternate_and_stay_transversal() {
        let s = model::filippov(1.0, -2.6, 1.0).unwrap();
        let opts = IntegrationOptions::default();
        let traj = integrate(&s, 0.0, 3.0, 30.0, &opts).unwrap();
        assert!(traj.events.len() >= 4, "expected several crossings");
        let mut last: Option<CrossingDirection> = None;
        for ev in &traj.events {
            assert!(ev.y.abs() > 0.1, "near-tangential crossing y = {}", ev.y);
            if let Some(prev) = last {
                assert_ne!(prev, ev.direction, "crossings must alternate");
            }
            last = Some(ev.direction);
        }
    }

    #[test]
    fn central_symmetry_of_trajectories() {
        let s = model::glo(1.0, -2.6, 1.0).unwrap();
        let opts = IntegrationOptions::default();
        let fwd = integrate(&s, 0.3, 2.0, 10.0, &opts).unwrap();
        let mirrored = integrate(&s, -0.3, -2.0, 10.0, &opts).unwrap();
        // compare final states at the shared horizon
        let (tf, xf, yf) = fwd.final_state();
        let (tm, xm, ym) = mirrored.final_state();
        assert!((tf - tm).abs() < 1e-12);
        assert!((xf + xm).abs() < 1e-8, "{xf} vs {xm}");
        assert!((yf + ym).abs() < 1e-8, "{yf} vs {ym}");
    }

    #[test]
    fn determinism_bit_identical() {
        let s = model::filippov(1.0, -2.6, 1.0).unwrap();
        let opts = IntegrationOptions::default();
        let a = integrate(&s, 0.0, 3.0, 20.0, &opts).unwrap();
        let b = integrate(&s, 0.0, 3.0, 20.0, &opts).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (sa, sb) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn events_snap_onto_section() {
        let s = model::glo(1.0, -2.6, 1.0).unwrap();
        let opts = IntegrationOptions::default();
        let traj = integrate(&s, 0.0, 3.0, 30.0, &opts).unwrap();
        for &(_, x, y) in &traj.samples {
            let _ = y;
            assert!(x.abs() <= s.domain_d());
        }
        for ev in &traj.events {
            // event samples were snapped to x = 0 exactly
            let hit = traj
                .samples
                .iter()
                .any(|&(t, x, _)| t == ev.t && x == 0.0);
            assert!(hit, "event at t = {} has no snapped sample", ev.t);
        }
        // sample times strictly increasing
        for w in traj.samples.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
    }

    #[test]
    fn crossing_indicator_is_y_squared() {
        let s = model::hamiltonian_test();
        assert_eq!(crossing_indicator(&s, 2.0), 4.0);
        assert_eq!(crossing_indicator(&s, 0.0), 0.0);
        assert_eq!(crossing_indicator(&s, -3.0), 9.0);
    }

    #[test]
    fn energy_residual_self_consistent_across_tolerances() {
        let s = model::glo(1.0, -2.6, 1.0).unwrap();
        let loose = IntegrationOptions::default();
        let tight = loose.tightened(100.0);
        let a = integrate_with_stop(&s, 0.0, 2.0, 100.0, &loose, StopMode::HalfReturn).unwrap();
        let b = integrate_with_stop(&s, 0.0, 2.0, 100.0, &tight, StopMode::HalfReturn).unwrap();
        assert_eq!(a.terminal, Terminal::ReturnedToSection);
        assert_eq!(b.terminal, Terminal::ReturnedToSection);
        assert!(energy_residual(&s, &a) < 1e-7);
        assert!(energy_residual(&s, &b) < 1e-7);
        let (_, _, ya) = a.final_state();
        let (_, _, yb) = b.final_state();
        assert!((ya - yb).abs() < 1e-7);
    }

    #[test]
    fn domain_exit_reported() {
        let s = model::glo(1.0, -2.6, 1.0).unwrap();
        let opts = IntegrationOptions::default();
        // enormous initial ordinate: the orbit shoots past |x| = d
        let traj = integrate(&s, 0.0, 1e5, 100.0, &opts).unwrap();
        assert_eq!(traj.terminal, Terminal::LeftDomain);
    }
}
