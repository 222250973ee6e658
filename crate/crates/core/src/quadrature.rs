//! Cached Gauss-Legendre rules.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

/// Nodes used per cell for smooth integrands.
pub const CELL_NODES: usize = 8;

fn rule(nodes: usize) -> &'static GaussLegendre {
    static R8: OnceLock<GaussLegendre> = OnceLock::new();
    static R16: OnceLock<GaussLegendre> = OnceLock::new();
    static R32: OnceLock<GaussLegendre> = OnceLock::new();
    let (cell, n) = match nodes {
        0..=8 => (&R8, 8),
        9..=16 => (&R16, 16),
        _ => (&R32, 32),
    };
    cell.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(n).expect("nonzero")))
}

/// Integrates `f` over `[a, b]` with a Gauss-Legendre rule of at least `nodes` points
/// (rounded up to 8, 16 or 32).
pub fn integrate(a: f64, b: f64, nodes: usize, f: impl FnMut(f64) -> f64) -> f64 {
    if a == b {
        return 0.0;
    }
    rule(nodes).integrate(a, b, f)
}

/// Composite rule on `panels` equal panels.
pub fn integrate_composite(
    a: f64,
    b: f64,
    panels: usize,
    nodes: usize,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == panels { b } else { lo + h };
            integrate(lo, hi, nodes, &mut f)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        // 8 nodes integrate degree 15 exactly
        let v = integrate(0.0, 2.0, 8, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-10);
    }

    #[test]
    fn composite_matches_smooth_integral() {
        let v = integrate_composite(0.0, std::f64::consts::PI, 10, 16, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
