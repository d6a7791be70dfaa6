//! Central finite-difference oracle for validating jet evaluation.
//!
//! Steps follow a precision ladder balancing truncation against round-off in
//! double precision: 1e-6 for first, 1e-4 for second, 1e-3 for third
//! derivatives, each scaled by the magnitude of the evaluation point. Mixed
//! derivatives are taken as nested central first differences.

use crate::error::{Error, Result};
use crate::fieldspec::FieldDef;
use crate::spray::Point;

fn step_for(order: usize, p: &Point) -> f64 {
    let scale = p
        .x
        .iter()
        .chain(p.y.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let base = match order {
        1 => 1e-6,
        2 => 1e-4,
        // large enough that eps/h^3 round-off stays small at the finest
        // Richardson level h/4
        _ => 1e-2,
    };
    base * scale
}

fn shift(p: &Point, var: usize, delta: f64) -> Point {
    let n = p.n();
    let mut q = p.clone();
    if var < n {
        q.x[var] += delta;
    } else {
        q.y[var - n] += delta;
    }
    q
}

fn eval_component(field: &FieldDef, comp: usize, p: &Point) -> Result<f64> {
    let vals = field.eval_values(p)?;
    vals.get(comp)
        .copied()
        .ok_or_else(|| Error::Config(format!("component index {comp} out of range")))
}

fn fd_rec(field: &FieldDef, comp: usize, p: &Point, vars: &[usize], h: f64) -> Result<f64> {
    match vars.split_first() {
        None => eval_component(field, comp, p),
        Some((&v, rest)) => {
            let plus = fd_rec(field, comp, &shift(p, v, h), rest, h)?;
            let minus = fd_rec(field, comp, &shift(p, v, -h), rest, h)?;
            Ok((plus - minus) / (2.0 * h))
        }
    }
}

/// Central finite-difference estimate of the partial derivative of component
/// `comp` of `field` with respect to the (global-index) variables in
/// `multi_index`, |multi_index| <= 3.
pub fn fd_oracle(field: &FieldDef, comp: usize, p: &Point, multi_index: &[usize]) -> Result<f64> {
    if multi_index.len() > 3 {
        return Err(Error::Config("multi-index order above 3".into()));
    }
    if multi_index.is_empty() {
        return eval_component(field, comp, p);
    }
    let h = step_for(multi_index.len(), p);
    // Richardson extrapolation kills the h² truncation term of the nested
    // central stencils; third derivatives get a second level (removing h⁴
    // as well) since their truncation constants grow fastest
    let f0 = fd_rec(field, comp, p, multi_index, h)?;
    let f1 = fd_rec(field, comp, p, multi_index, h / 2.0)?;
    let r1 = (4.0 * f1 - f0) / 3.0;
    if multi_index.len() < 3 {
        return Ok(r1);
    }
    let f2 = fd_rec(field, comp, p, multi_index, h / 4.0)?;
    let r2 = (4.0 * f2 - f1) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}
