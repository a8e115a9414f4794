//! Globally adaptive composite Simpson quadrature.
//!
//! Panels are refined largest-error-first until the summed Richardson error
//! estimate drops below the absolute tolerance. This copes with the
//! square-root behaviour of angles next to a degeneracy wall, where local
//! tolerance halving would recurse far too deep.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

pub(crate) const MAX_INTERVALS: usize = 1 << 20;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    // f at a, a + h/4, a + h/2, a + 3h/4, b
    fs: [f64; 5],
    value: f64,
    err: f64,
}

impl Panel {
    fn new(a: f64, b: f64, fs: [f64; 5]) -> Self {
        let h = b - a;
        let coarse = h / 6.0 * (fs[0] + 4.0 * fs[2] + fs[4]);
        let fine = h / 12.0 * (fs[0] + 4.0 * fs[1] + 2.0 * fs[2] + 4.0 * fs[3] + fs[4]);
        let diff = fine - coarse;
        Self {
            a,
            b,
            fs,
            value: fine + diff / 15.0,
            err: diff.abs() / 15.0,
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// ∫_a^b f with absolute tolerance `tol`, starting from `panels` equal panels.
pub(crate) fn integrate<F>(mut f: F, a: f64, b: f64, tol: f64, panels: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(4 * panels);
    let mut left = f(a)?;
    for p in 0..panels {
        let pa = a + h * p as f64;
        let pb = if p + 1 == panels { b } else { a + h * (p + 1) as f64 };
        let w = pb - pa;
        let fs = [
            left,
            f(pa + 0.25 * w)?,
            f(pa + 0.5 * w)?,
            f(pa + 0.75 * w)?,
            f(pb)?,
        ];
        left = fs[4];
        heap.push(Panel::new(pa, pb, fs));
    }
    let mut count = panels;
    let mut total_err: f64 = heap.iter().map(|p| p.err).sum();
    let mut since_resum = 0;
    while total_err > tol {
        if count >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure {
                tolerance: tol,
                intervals: count,
            });
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        let q = 0.25 * (p.b - p.a);
        let l = Panel::new(
            p.a,
            m,
            [p.fs[0], f(p.a + 0.5 * q)?, p.fs[1], f(p.a + 1.5 * q)?, p.fs[2]],
        );
        let r = Panel::new(
            m,
            p.b,
            [p.fs[2], f(m + 0.5 * q)?, p.fs[3], f(m + 1.5 * q)?, p.fs[4]],
        );
        total_err += l.err + r.err - p.err;
        heap.push(l);
        heap.push(r);
        count += 1;
        since_resum += 1;
        if since_resum == 256 {
            total_err = heap.iter().map(|p| p.err).sum();
            since_resum = 0;
        }
    }
    let mut done = heap.into_vec();
    done.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(done.iter().map(|p| p.value).sum())
}
