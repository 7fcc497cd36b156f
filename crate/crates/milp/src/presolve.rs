use crate::problem::{Problem, RowSense};

const ROUND_SLACK: f64 = 1e-9;

/// Activity-based bound tightening restricted to integer columns.
///
/// Returns `false` when some row cannot be satisfied within the bounds.
pub fn tighten_integer_bounds(problem: &Problem, lower: &mut [f64], upper: &mut [f64]) -> bool {
    for _ in 0..8 {
        let mut changed = false;
        for row in &problem.rows {
            let mut min_act = 0.0;
            let mut max_act = 0.0;
            for &(j, a) in &row.coeffs {
                if a > 0.0 {
                    min_act += a * lower[j];
                    max_act += a * upper[j];
                } else {
                    min_act += a * upper[j];
                    max_act += a * lower[j];
                }
            }
            let tol = 1e-9 * (1.0 + row.rhs.abs());
            let le = matches!(row.sense, RowSense::Le | RowSense::Eq);
            let ge = matches!(row.sense, RowSense::Ge | RowSense::Eq);
            if (le && min_act > row.rhs + tol) || (ge && max_act < row.rhs - tol) {
                return false;
            }
            for &(j, a) in &row.coeffs {
                if !problem.columns[j].integer {
                    continue;
                }
                if le {
                    let own = if a > 0.0 { a * lower[j] } else { a * upper[j] };
                    let slack = row.rhs - (min_act - own);
                    if a > 0.0 {
                        let hi = (slack / a + ROUND_SLACK).floor();
                        if hi < upper[j] {
                            upper[j] = hi;
                            changed = true;
                        }
                    } else {
                        let lo = (slack / a - ROUND_SLACK).ceil();
                        if lo > lower[j] {
                            lower[j] = lo;
                            changed = true;
                        }
                    }
                }
                if ge {
                    let own = if a > 0.0 { a * upper[j] } else { a * lower[j] };
                    let need = row.rhs - (max_act - own);
                    if a > 0.0 {
                        let lo = (need / a - ROUND_SLACK).ceil();
                        if lo > lower[j] {
                            lower[j] = lo;
                            changed = true;
                        }
                    } else {
                        let hi = (need / a + ROUND_SLACK).floor();
                        if hi < upper[j] {
                            upper[j] = hi;
                            changed = true;
                        }
                    }
                }
                if lower[j] > upper[j] {
                    return false;
                }
            }
        }
        if !changed {
            break;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Sense;

    #[test]
    fn time_window_fixes_binary_to_zero() {
        // t - 5 y >= 0, t <= 4  =>  y = 0
        let mut p = Problem::new("tw", Sense::Maximize);
        let y = p.add_binary("y", 1.0);
        let t = p.add_column("t", 0.0, 4.0, false, 0.0);
        p.add_row("r", vec![(t, 1.0), (y, -5.0)], RowSense::Ge, 0.0);
        let (mut lo, mut hi) = (p.lower_bounds(), p.upper_bounds());
        assert!(tighten_integer_bounds(&p, &mut lo, &mut hi));
        assert_eq!(hi[y], 0.0);
        assert_eq!(hi[t], 4.0);
    }

    #[test]
    fn detects_infeasible_row() {
        let mut p = Problem::new("inf", Sense::Maximize);
        let y = p.add_binary("y", 1.0);
        p.add_row("r", vec![(y, 1.0)], RowSense::Ge, 2.0);
        let (mut lo, mut hi) = (p.lower_bounds(), p.upper_bounds());
        assert!(!tighten_integer_bounds(&p, &mut lo, &mut hi));
    }

    #[test]
    fn exact_boundary_keeps_binary_free() {
        let mut p = Problem::new("edge", Sense::Maximize);
        let y = p.add_binary("y", 1.0);
        let t = p.add_column("t", 0.0, 4.0, false, 0.0);
        p.add_row("r", vec![(t, 1.0), (y, -4.0)], RowSense::Ge, 0.0);
        let (mut lo, mut hi) = (p.lower_bounds(), p.upper_bounds());
        assert!(tighten_integer_bounds(&p, &mut lo, &mut hi));
        assert_eq!(hi[y], 1.0);
    }
}
