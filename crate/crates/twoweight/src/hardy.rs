//! Weighted Hardy operators on the half-line, the kernel `1/(x+y)`, and the
//! Hilbert form restricted to complementary half-lines.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::a2::{a2_star, A2Star};
use crate::error::{Error, Result};
use crate::hilbert::HilbertForm;
use crate::linalg::{spectral_norm, NormEstimate};
use crate::measure::{grid_point_index, GridMeasure, Orientation};

fn check_half_line(mu: &GridMeasure, name: &'static str) -> Result<()> {
    match mu.hull() {
        Some(h) if h.lo < 0 => Err(Error::NotOnHalfLine(name)),
        _ => Ok(()),
    }
}

fn check_pair(sigma: &GridMeasure, w: &GridMeasure) -> Result<()> {
    if sigma.scale() != w.scale() {
        return Err(Error::ScaleMismatch(sigma.scale(), w.scale()));
    }
    check_half_line(sigma, "sigma")?;
    check_half_line(w, "w")
}

/// Joint support as `(cell, sigma mass, w mass)`.
fn joint(sigma: &GridMeasure, w: &GridMeasure) -> Vec<(i64, f64, f64)> {
    let mut cells: Vec<i64> = sigma.atoms().map(|a| a.0).chain(w.atoms().map(|a| a.0)).collect();
    cells.sort_unstable();
    cells.dedup();
    cells.into_iter().map(|k| (k, sigma.mass(k), w.mass(k))).collect()
}

/// `A = sup_t sigma(0, t]^{1/2} w[t, oo)^{1/2}`.
pub fn hardy_constant(sigma: &GridMeasure, w: &GridMeasure) -> Result<f64> {
    check_pair(sigma, w)?;
    let pts = joint(sigma, w);
    let mut tail: f64 = pts.iter().map(|p| p.2).sum();
    let mut head = 0.0;
    let mut best: f64 = 0.0;
    for &(_, s, wm) in &pts {
        head += s;
        best = best.max(head * tail);
        tail -= wm;
    }
    Ok(best.max(0.0).sqrt())
}

/// Norm of `f -> int_{(0, x]} f dsigma` from `L^2(sigma)` to `L^2(w)`.
pub fn hardy_norm(sigma: &GridMeasure, w: &GridMeasure) -> Result<NormEstimate> {
    check_pair(sigma, w)?;
    let rows: Vec<(i64, f64)> = w.atoms().collect();
    let cols: Vec<(i64, f64)> = sigma.atoms().collect();
    let m = DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        let (p, wp) = rows[a];
        let (q, sq) = cols[b];
        if q <= p {
            (wp * sq).sqrt()
        } else {
            0.0
        }
    });
    Ok(spectral_norm(&m))
}

/// Both sides of `sum_k w_k w[x_k, oo)^{-alpha} <= w[t, oo)^{1-alpha} / (1-alpha)`.
pub fn tail_power_bound(w: &GridMeasure, t: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }
    let pts: Vec<(f64, f64)> = w.points().into_iter().filter(|p| p.0 >= t).collect();
    let mut tail: f64 = pts.iter().map(|p| p.1).sum();
    let total = tail;
    let mut lhs = 0.0;
    for (_, m) in pts {
        lhs += m * tail.powf(-alpha);
        tail -= m;
    }
    Ok((lhs, total.powf(1.0 - alpha) / (1.0 - alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLineKernel {
    /// `sup_t (sigma(0,t] int_{[t,oo)} dw / x^2)^{1/2}`
    pub a1: f64,
    /// the same with `sigma` and `w` exchanged
    pub a2: f64,
    pub a: f64,
    /// norm of the form with kernel `1/(x+y)`
    pub c: f64,
}

fn half_line_a(sigma: &GridMeasure, w: &GridMeasure) -> f64 {
    let pts = joint(sigma, w);
    let scale = sigma.scale();
    let weight = |k: i64, m: f64| {
        let x = crate::measure::cell_center(k, scale);
        m / (x * x)
    };
    let mut tail: f64 = pts.iter().map(|p| weight(p.0, p.2)).sum();
    let mut head = 0.0;
    let mut best: f64 = 0.0;
    for &(k, s, wm) in &pts {
        head += s;
        best = best.max(head * tail);
        tail -= weight(k, wm);
    }
    best.max(0.0).sqrt()
}

pub fn halfline_kernel_norm(sigma: &GridMeasure, w: &GridMeasure) -> Result<f64> {
    check_pair(sigma, w)?;
    let rows = w.points();
    let cols = sigma.points();
    let m = DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        let (x, wm) = rows[a];
        let (y, sm) = cols[b];
        (wm * sm).sqrt() / (x + y)
    });
    Ok(spectral_norm(&m).value)
}

pub fn halfline_characterization(sigma: &GridMeasure, w: &GridMeasure) -> Result<HalfLineKernel> {
    check_pair(sigma, w)?;
    let a1 = half_line_a(sigma, w);
    let a2 = half_line_a(w, sigma);
    Ok(HalfLineKernel { a1, a2, a: a1 + a2, c: halfline_kernel_norm(sigma, w)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplementaryNorm {
    pub a: f64,
    /// `f` left of `a`, `g` right of `a`, computed on the form itself
    pub left_to_right: f64,
    pub right_to_left: f64,
    /// the same two values through reflection to the kernel `1/(x+y)`
    pub reflected_left_to_right: f64,
    pub reflected_right_to_left: f64,
    pub value: f64,
}

/// Best constant for `f` and `g` supported on opposite sides of the grid point `a`.
pub fn complementary_halfline_norm(form: &HilbertForm, a: f64) -> Result<ComplementaryNorm> {
    let scale = form.scale();
    let j = grid_point_index(a, scale)?;
    let left = |m: &GridMeasure| m.restrict_by(|k| k < j);
    let right = |m: &GridMeasure| m.restrict_by(|k| k >= j);
    let direct = |s: &GridMeasure, w: &GridMeasure| -> f64 {
        if s.is_empty() || w.is_empty() {
            return 0.0;
        }
        HilbertForm::new(s.clone(), w.clone()).map(|b| b.operator_norm().value).unwrap_or(0.0)
    };
    let (sig, w) = (form.sigma(), form.w());
    let left_to_right = direct(&left(sig), &right(w));
    let right_to_left = direct(&right(sig), &left(w));
    let reflected_left_to_right = halfline_kernel_norm(
        &left(sig).reflect_translate(a, Orientation::Reversed)?,
        &right(w).reflect_translate(a, Orientation::Forward)?,
    )?;
    let reflected_right_to_left = halfline_kernel_norm(
        &right(sig).reflect_translate(a, Orientation::Forward)?,
        &left(w).reflect_translate(a, Orientation::Reversed)?,
    )?;
    Ok(ComplementaryNorm {
        a,
        left_to_right,
        right_to_left,
        reflected_left_to_right,
        reflected_right_to_left,
        value: left_to_right.max(right_to_left),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplementSummary {
    pub sup_norm: f64,
    pub argmax: f64,
    pub a2_star: f64,
    pub a2_star_dual: f64,
    /// `sup_norm / (A2* + A2*')`, infinite when both vanish and the norm does not
    pub ratio: f64,
    /// largest disagreement between direct and reflected evaluation
    pub reflection_gap: f64,
}

/// Supremum of the complementary half-line norms over all split points between
/// consecutive support cells.
pub fn complement_constants(form: &HilbertForm) -> Result<ComplementSummary> {
    let h = form.sigma().cell_len();
    let mut best = (0.0, form.cells()[0] as f64 * h);
    let mut gap: f64 = 0.0;
    for &k in &form.cells()[1..] {
        let a = k as f64 * h;
        let c = complementary_halfline_norm(form, a)?;
        gap = gap
            .max((c.left_to_right - c.reflected_left_to_right).abs())
            .max((c.right_to_left - c.reflected_right_to_left).abs());
        if c.value > best.0 {
            best = (c.value, a);
        }
    }
    let A2Star { forward, dual } = a2_star(form);
    let denom = forward.value + dual.value;
    let ratio = if denom > 0.0 {
        best.0 / denom
    } else if best.0 > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(ComplementSummary {
        sup_norm: best.0,
        argmax: best.1,
        a2_star: forward.value,
        a2_star_dual: dual.value,
        ratio,
        reflection_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(cells: &[i64]) -> GridMeasure {
        GridMeasure::from_cells(0, cells.iter().map(|&k| (k, 1.0))).unwrap()
    }

    #[test]
    fn rank_one_hardy() {
        let sigma = GridMeasure::from_atoms(&[(1.0, 2.0)], 0).unwrap();
        let w = GridMeasure::from_atoms(&[(2.0, 3.0)], 0).unwrap();
        assert_relative_eq!(hardy_constant(&sigma, &w).unwrap(), 6f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(hardy_norm(&sigma, &w).unwrap().value, 6f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn eight_unit_masses() {
        // atoms at 1..=8, both measures; closed ends on both sides give k (9 - k)
        let mu = unit(&[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_relative_eq!(hardy_constant(&mu, &mu).unwrap(), 20f64.sqrt(), epsilon = 1e-14);
        let c = hardy_norm(&mu, &mu).unwrap().value;
        assert!(c >= 20f64.sqrt() && c <= 2.0 * 20f64.sqrt());
    }

    #[test]
    fn negative_support_rejected() {
        let mu = unit(&[-1, 2]);
        assert!(matches!(hardy_constant(&mu, &mu), Err(Error::NotOnHalfLine("sigma"))));
    }

    #[test]
    fn tail_power_example() {
        let w = GridMeasure::from_atoms(&[(1.0, 1.0), (2.0, 1.0)], 0).unwrap();
        let (lhs, rhs) = tail_power_bound(&w, 0.0, 0.5).unwrap();
        assert_relative_eq!(lhs, 1.0 + 0.5f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(rhs, 2.0 * 2f64.sqrt(), epsilon = 1e-14);
        assert!(tail_power_bound(&w, 0.0, 1.0).is_err());
    }

    #[test]
    fn one_atom_half_line_kernel() {
        let sigma = GridMeasure::from_cells(0, [(1, 2.0)]).unwrap();
        let w = GridMeasure::from_cells(0, [(3, 5.0)]).unwrap();
        let h = halfline_characterization(&sigma, &w).unwrap();
        assert_relative_eq!(h.c, 10f64.sqrt() / (1.5 + 3.5), epsilon = 1e-14);
        assert!(h.a / 4.0 <= h.c && h.c <= 2.0 * h.a);
    }

    #[test]
    fn two_cells_split_between() {
        let form = HilbertForm::new(unit(&[0]), unit(&[1])).unwrap();
        let c = complementary_halfline_norm(&form, 1.0).unwrap();
        assert_relative_eq!(c.value, 1.0, epsilon = 1e-14);
        assert_relative_eq!(c.reflected_left_to_right, 1.0, epsilon = 1e-14);
    }
}
