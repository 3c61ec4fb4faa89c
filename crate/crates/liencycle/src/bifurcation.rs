//! Parameter-plane classification of the quintic family and tracing of the
//! double-limit-cycle curve b = phi(a, c) by bisection on the cycle count,
//! with verification of the analytic bound -5*sqrt(a)/2 < phi < -2*sqrt(a).

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cycles::{
    cycle_count_weighted, find_cycles, origin_stability, CycleOptions, CyclesError,
    OriginStability, Stability,
};
use crate::model::{self, ModelError, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Glo,
    Filippov,
    Rychkov,
}

impl Family {
    /// Instantiate the quintic member at (a, b, c). The Rychkov family has
    /// g(x) = x and no jump, so c is ignored there.
    pub fn build(self, a: f64, b: f64, c: f64) -> Result<SystemSpec, ModelError> {
        match self {
            Family::Glo => model::glo(a, b, c),
            Family::Filippov => model::filippov(a, b, c),
            Family::Rychkov => model::rychkov(a, b),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "glo" => Some(Family::Glo),
            "filippov" => Some(Family::Filippov),
            "rychkov" => Some(Family::Rychkov),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    I,
    II,
    III,
    H1,
    H2,
    DlNear,
    Unclassified,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::I => "I",
            RegionLabel::II => "II",
            RegionLabel::III => "III",
            RegionLabel::H1 => "H1",
            RegionLabel::H2 => "H2",
            RegionLabel::DlNear => "DL_near",
            RegionLabel::Unclassified => "Unclassified",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionCell {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// semistable candidates count twice
    pub cycle_count: usize,
    pub label: RegionLabel,
    pub origin: OriginStability,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DlCurvePoint {
    pub a: f64,
    pub c: f64,
    pub phi: f64,
    pub bracket_width: f64,
    /// -5*sqrt(a)/2
    pub lower_bound: f64,
    /// -2*sqrt(a)
    pub upper_bound: f64,
    pub bounds_ok: bool,
}

#[derive(Debug, Error)]
pub enum BifurcationError {
    #[error(
        "cycle-count bracket invalid at a = {a}: count {count_low} at b = {b_low}, \
         count {count_high} at b = {b_high} (expected 2 and 0)"
    )]
    BracketInvalid {
        a: f64,
        b_low: f64,
        count_low: usize,
        b_high: f64,
        count_high: usize,
    },
    #[error("system construction failed: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cycles(#[from] CyclesError),
}

fn count_at(
    family: Family,
    a: f64,
    b: f64,
    c: f64,
    opts: &CycleOptions,
) -> Result<(usize, bool), BifurcationError> {
    let spec = family.build(a, b, c)?;
    let cycles = find_cycles(&spec, opts)?;
    let semistable = cycles
        .iter()
        .any(|cy| cy.stability == Stability::SemistableCandidate);
    Ok((cycle_count_weighted(&cycles), semistable))
}

/// Label one parameter point per the region table: I for a < 0, the Hopf
/// lines H1/H2 on a = 0, and for a > 0 either II (no cycles), III (two),
/// or DL_near when the scan sees a semistable candidate.
pub fn classify_point(
    family: Family,
    a: f64,
    b: f64,
    c: f64,
    opts: &CycleOptions,
) -> RegionCell {
    let spec = match family.build(a, b, c) {
        Ok(s) => s,
        Err(e) => {
            return RegionCell {
                a,
                b,
                c,
                cycle_count: 0,
                label: RegionLabel::Unclassified,
                origin: OriginStability::Marginal,
                reason: Some(e.to_string()),
            }
        }
    };
    let origin = origin_stability(&spec, opts);
    let (cycle_count, semistable, reason) = match find_cycles(&spec, opts) {
        Ok(cycles) => (
            cycle_count_weighted(&cycles),
            cycles
                .iter()
                .any(|cy| cy.stability == Stability::SemistableCandidate),
            None,
        ),
        Err(e) => {
            return RegionCell {
                a,
                b,
                c,
                cycle_count: 0,
                label: RegionLabel::Unclassified,
                origin,
                reason: Some(e.to_string()),
            }
        }
    };
    let label = if a < 0.0 {
        RegionLabel::I
    } else if a == 0.0 {
        if b >= 0.0 {
            RegionLabel::H1
        } else {
            RegionLabel::H2
        }
    } else if semistable {
        RegionLabel::DlNear
    } else {
        match cycle_count {
            0 => RegionLabel::II,
            2 => RegionLabel::III,
            _ => RegionLabel::Unclassified,
        }
    };
    RegionCell {
        a,
        b,
        c,
        cycle_count,
        label,
        origin,
        reason,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionMap {
    pub cells: Vec<RegionCell>,
    /// fixed-a columns (a > 0) where III cells do not all lie below II cells
    pub column_violations: Vec<String>,
}

fn axis_values(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    // floating grids rarely hit the Hopf line exactly; pin it when straddled
    if lo < 0.0 && hi > 0.0 && !vals.iter().any(|&v| v == 0.0) {
        vals.push(0.0);
        vals.sort_by(|p, q| p.partial_cmp(q).unwrap());
    }
    vals
}

/// Classify an (a, b) grid at fixed c. Cells come back in row-major order
/// (a outer, b inner, both ascending).
pub fn region_map(
    family: Family,
    c: f64,
    a_range: (f64, f64),
    b_range: (f64, f64),
    grid: (usize, usize),
    opts: &CycleOptions,
) -> RegionMap {
    let (na, nb) = grid;
    assert!(na >= 2 && nb >= 2, "grid must be at least 2x2");
    let a_vals = axis_values(a_range.0, a_range.1, na);
    let b_vals = axis_values(b_range.0, b_range.1, nb);

    let mut points = Vec::with_capacity(a_vals.len() * b_vals.len());
    for &a in &a_vals {
        for &b in &b_vals {
            points.push((a, b));
        }
    }
    let cells: Vec<RegionCell> = points
        .par_iter()
        .map(|&(a, b)| classify_point(family, a, b, c, opts))
        .collect();

    // within each a > 0 column, every III must precede every II in b
    let mut column_violations = Vec::new();
    for (ai, &a) in a_vals.iter().enumerate() {
        if a <= 0.0 {
            continue;
        }
        let col = &cells[ai * b_vals.len()..(ai + 1) * b_vals.len()];
        let mut seen_ii = false;
        for cell in col {
            match cell.label {
                RegionLabel::II => seen_ii = true,
                RegionLabel::III if seen_ii => {
                    column_violations.push(format!(
                        "a = {a}: III cell at b = {} above a II cell",
                        cell.b
                    ));
                }
                _ => {}
            }
        }
    }
    RegionMap {
        cells,
        column_violations,
    }
}

/// Locate phi(a, c) for each requested a by bisecting the cycle-count
/// transition inside the proven bracket [-5*sqrt(a)/2, -2*sqrt(a)].
/// The count is 2 on the low side and 0 on the high side; a semistable
/// candidate is the boundary itself and stops the bisection. Tolerances
/// are tightened 100x once the bracket is narrow.
pub fn trace_dl(
    family: Family,
    c: f64,
    a_values: &[f64],
    opts: &CycleOptions,
) -> Result<Vec<DlCurvePoint>, BifurcationError> {
    a_values
        .par_iter()
        .map(|&a| trace_dl_at(family, c, a, opts))
        .collect()
}

fn trace_dl_at(
    family: Family,
    c: f64,
    a: f64,
    opts: &CycleOptions,
) -> Result<DlCurvePoint, BifurcationError> {
    assert!(a > 0.0, "the fold curve is only defined for a > 0");
    let sqrt_a = a.sqrt();
    let lower_bound = -2.5 * sqrt_a;
    let upper_bound = -2.0 * sqrt_a;
    let target = 1e-4 * sqrt_a;
    let tight_below = 1e-2 * sqrt_a;

    let mut lo = lower_bound; // count 2 here
    let mut hi = upper_bound; // count 0 here
    let tight_opts = opts.tightened(100.0);

    let (count_low, _) = count_at(family, a, lo, c, opts)?;
    let (count_high, _) = count_at(family, a, hi, c, opts)?;
    if count_low != 2 || count_high != 0 {
        return Err(BifurcationError::BracketInvalid {
            a,
            b_low: lo,
            count_low,
            b_high: hi,
            count_high,
        });
    }

    let mut phi = 0.5 * (lo + hi);
    let mut width = hi - lo;
    while width > target {
        let mid = 0.5 * (lo + hi);
        let use_opts = if width <= tight_below {
            &tight_opts
        } else {
            opts
        };
        let (count, semistable) = count_at(family, a, mid, c, use_opts)?;
        if semistable {
            // sitting on the fold: accept mid as the located value
            phi = mid;
            width = target;
            break;
        }
        match count {
            2 => lo = mid,
            0 => hi = mid,
            other => {
                return Err(BifurcationError::BracketInvalid {
                    a,
                    b_low: lo,
                    count_low: 2,
                    b_high: mid,
                    count_high: other,
                })
            }
        }
        phi = 0.5 * (lo + hi);
        width = hi - lo;
    }

    Ok(DlCurvePoint {
        a,
        c,
        phi,
        bracket_width: width,
        lower_bound,
        upper_bound,
        bounds_ok: lower_bound < phi && phi < upper_bound,
    })
}

/// True when phi is strictly decreasing along ascending a.
pub fn phi_decreasing(points: &[DlCurvePoint]) -> bool {
    let mut sorted: Vec<&DlCurvePoint> = points.iter().collect();
    sorted.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap());
    sorted.windows(2).all(|w| w[1].phi < w[0].phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::IntegrationOptions;

    fn fast_opts() -> CycleOptions {
        CycleOptions {
            integration: IntegrationOptions {
                rel_tol: 1e-9,
                abs_tol: 1e-11,
                ..Default::default()
            },
            n_grid: 60,
            y_max: Some(10.0),
            ..Default::default()
        }
    }

    #[test]
    fn classify_the_three_regions() {
        let opts = fast_opts();
        let i = classify_point(Family::Glo, -1.0, 0.0, 1.0, &opts);
        assert_eq!(i.label, RegionLabel::I);
        assert_eq!(i.cycle_count, 1);
        assert_eq!(i.origin, OriginStability::Source);

        let ii = classify_point(Family::Glo, 1.0, -2.0, 1.0, &opts);
        assert_eq!(ii.label, RegionLabel::II);
        assert_eq!(ii.cycle_count, 0);
        assert_eq!(ii.origin, OriginStability::Sink);

        let iii = classify_point(Family::Glo, 1.0, -2.6, 1.0, &opts);
        assert_eq!(iii.label, RegionLabel::III);
        assert_eq!(iii.cycle_count, 2);
    }

    #[test]
    fn hopf_lines_at_zero_a() {
        let opts = fast_opts();
        let h1 = classify_point(Family::Glo, 0.0, 1.0, 1.0, &opts);
        assert_eq!(h1.label, RegionLabel::H1);
        let h2 = classify_point(Family::Glo, 0.0, -1.0, 1.0, &opts);
        assert_eq!(h2.label, RegionLabel::H2);
    }

    #[test]
    fn grid_pins_the_hopf_line() {
        let vals = axis_values(-1.0, 1.0, 4);
        assert!(vals.contains(&0.0));
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
        // ranges that do not straddle zero are left alone
        assert_eq!(axis_values(0.5, 1.5, 3).len(), 3);
    }

    #[test]
    fn small_region_map_is_consistent() {
        let opts = fast_opts();
        let map = region_map(Family::Glo, 1.0, (-0.5, 1.0), (-3.0, -1.0), (3, 4), &opts);
        assert!(map.column_violations.is_empty(), "{:?}", map.column_violations);
        assert!(map.cells.len() >= 12);
        for cell in &map.cells {
            if cell.a < 0.0 {
                assert_eq!(cell.label, RegionLabel::I, "{cell:?}");
            }
            if cell.a > 0.0 && cell.b <= -2.5 * cell.a.sqrt() {
                assert_eq!(cell.label, RegionLabel::III, "{cell:?}");
            }
        }
    }

    #[test]
    fn region_map_is_deterministic() {
        let opts = fast_opts();
        let one = region_map(Family::Glo, 1.0, (0.5, 1.0), (-3.0, -2.0), (2, 3), &opts);
        let two = region_map(Family::Glo, 1.0, (0.5, 1.0), (-3.0, -2.0), (2, 3), &opts);
        for (p, q) in one.cells.iter().zip(two.cells.iter()) {
            assert_eq!(p.label, q.label);
            assert_eq!(p.cycle_count, q.cycle_count);
        }
    }

    #[test]
    fn dl_point_inside_proven_bounds() {
        let opts = fast_opts();
        let pts = trace_dl(Family::Glo, 1.0, &[1.0], &opts).unwrap();
        let p = &pts[0];
        assert!(p.bounds_ok, "{p:?}");
        assert!(p.phi > -2.5 && p.phi < -2.0, "{p:?}");
        assert!(p.bracket_width <= 1e-4);
        // the located fold separates a two-cycle side from a no-cycle side
        let below = classify_point(Family::Glo, 1.0, p.phi - 10.0 * p.bracket_width, 1.0, &opts);
        let above = classify_point(Family::Glo, 1.0, p.phi + 10.0 * p.bracket_width, 1.0, &opts);
        assert_eq!(below.cycle_count, 2, "{below:?}");
        assert_eq!(above.cycle_count, 0, "{above:?}");
    }
}
