//! Reference prior for the 1D problem via the closed-form Green's function.
//!
//! For -u'' = f on the unit interval with homogeneous Dirichlet data the
//! solution operator has kernel G(x,y) = x(1-y) for x <= y (symmetric in
//! its arguments), so the mean and covariance of the solution process are
//! one- and two-dimensional integrals against G. The covariance double
//! integral is evaluated with a composite Gauss-Legendre rule whose panels
//! are split at the evaluation points (G(·, x) has a derivative kink at x,
//! and keeping kinks on panel boundaries preserves the full order of the
//! rule) and refined by subdividing every panel until successive results
//! agree to a relative tolerance.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::field::{GaussianSource, Point};
use crate::forcing::ForcingModel;
use crate::quadrature::{GL4_NODES, GL4_WEIGHTS};

/// Green's function of the 1D Poisson problem, G(x,y) = x(1-y)Θ(y-x) +
/// (1-x)yΘ(x-y) with Θ(0) = 1 (both branches agree at x = y).
pub fn greens_eval(x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidArgument(format!(
            "greens_eval arguments must lie in [0,1], got ({x}, {y})"
        )));
    }
    Ok(if x <= y { x * (1.0 - y) } else { (1.0 - x) * y })
}

/// Exact solution prior on the unit interval: mean ∫G(x,w)f̄(w)dw and
/// covariance ∫∫G(x,w)k_f(w,t)G(t,y)dtdw.
#[derive(Debug, Clone)]
pub struct ExactPrior1d {
    model: ForcingModel,
    rel_tol: f64,
    max_doublings: u32,
}

impl ExactPrior1d {
    pub fn new(model: ForcingModel) -> ExactPrior1d {
        ExactPrior1d {
            model,
            rel_tol: 1e-8,
            max_doublings: 12,
        }
    }

    pub fn model(&self) -> &ForcingModel {
        &self.model
    }

    /// Override the quadrature convergence criterion (successive relative
    /// change under panel doubling).
    pub fn with_tolerance(mut self, rel_tol: f64, max_doublings: u32) -> ExactPrior1d {
        self.rel_tol = rel_tol;
        self.max_doublings = max_doublings;
        self
    }

    fn check_points(pts: &[Point]) -> Result<Vec<f64>> {
        pts.iter()
            .map(|p| {
                if !(0.0..=1.0).contains(&p[0]) {
                    Err(Error::OutOfDomain(*p))
                } else {
                    Ok(p[0])
                }
            })
            .collect()
    }

    /// Segment boundaries: the domain endpoints plus every evaluation
    /// point, so the Green's-function kinks never fall inside a panel.
    fn breakpoints(point_sets: &[&[f64]]) -> Vec<f64> {
        let mut breaks = vec![0.0, 1.0];
        for set in point_sets {
            breaks.extend_from_slice(set);
        }
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        breaks
    }

    /// Composite GL4 rule: each segment between consecutive breakpoints is
    /// split into `subdiv` equal panels.
    fn rule(breaks: &[f64], subdiv: usize) -> (Vec<f64>, Vec<f64>) {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in breaks.windows(2) {
            let width = (seg[1] - seg[0]) / subdiv as f64;
            for p in 0..subdiv {
                let lo = seg[0] + p as f64 * width;
                let mid = lo + 0.5 * width;
                for k in 0..4 {
                    nodes.push(mid + 0.5 * width * GL4_NODES[k]);
                    weights.push(0.5 * width * GL4_WEIGHTS[k]);
                }
            }
        }
        (nodes, weights)
    }

    /// Weighted Green's evaluations: out[(p, i)] = ω_p G(node_p, x_i).
    fn weighted_greens(nodes: &[f64], weights: &[f64], xs: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn((nodes.len(), xs.len()), |(p, i)| {
            let w = nodes[p];
            let x = xs[i];
            let g = if w <= x { w * (1.0 - x) } else { (1.0 - w) * x };
            weights[p] * g
        })
    }

    fn cov_with_subdiv(
        &self,
        xa: &[f64],
        xb: &[f64],
        breaks: &[f64],
        subdiv: usize,
    ) -> Array2<f64> {
        let (nodes, weights) = Self::rule(breaks, subdiv);
        let ga = Self::weighted_greens(&nodes, &weights, xa);
        let gb = Self::weighted_greens(&nodes, &weights, xb);
        let n_quad = nodes.len();
        let all: Vec<Point> = nodes.iter().map(|&w| [w, 0.0]).collect();
        // T = K gb, assembled in node blocks to bound the kernel matrix size
        let mut t = Array2::zeros((n_quad, xb.len()));
        const BLOCK: usize = 1024;
        let mut start = 0;
        while start < n_quad {
            let stop = (start + BLOCK).min(n_quad);
            let k_block = self.model.kernel_matrix(&all, &all[start..stop]);
            let prod = k_block.dot(&gb.slice(ndarray::s![start..stop, ..]));
            t += &prod;
            start = stop;
        }
        ga.t().dot(&t)
    }

    fn mean_with_subdiv(&self, xs: &[f64], breaks: &[f64], subdiv: usize) -> Array1<f64> {
        let (nodes, weights) = Self::rule(breaks, subdiv);
        let g = Self::weighted_greens(&nodes, &weights, xs);
        let fbar = Array1::from_iter(nodes.iter().map(|&w| self.model.mean([w, 0.0])));
        g.t().dot(&fbar)
    }
}

impl GaussianSource for ExactPrior1d {
    fn mean_at(&self, pts: &[Point]) -> Result<Array1<f64>> {
        let xs = Self::check_points(pts)?;
        if self.model.mean_is_unit() {
            return Ok(Array1::from_iter(xs.iter().map(|&x| 0.5 * x * (1.0 - x))));
        }
        let breaks = Self::breakpoints(&[&xs]);
        let mut subdiv = 1;
        let mut current = self.mean_with_subdiv(&xs, &breaks, subdiv);
        for _ in 0..self.max_doublings {
            subdiv *= 2;
            let next = self.mean_with_subdiv(&xs, &breaks, subdiv);
            let diff = (&next - &current).mapv(f64::abs).sum();
            let scale = next.mapv(f64::abs).sum().max(f64::MIN_POSITIVE);
            current = next;
            if diff / scale < self.rel_tol {
                return Ok(current);
            }
        }
        Err(Error::QuadratureAccuracy(format!(
            "prior mean quadrature not converged after {} doublings",
            self.max_doublings
        )))
    }

    fn cov_between(&self, a: &[Point], b: &[Point]) -> Result<Array2<f64>> {
        let xa = Self::check_points(a)?;
        let xb = Self::check_points(b)?;
        let breaks = Self::breakpoints(&[&xa, &xb]);
        let mut subdiv = 1;
        let mut current = self.cov_with_subdiv(&xa, &xb, &breaks, subdiv);
        for _ in 0..self.max_doublings {
            subdiv *= 2;
            let next = self.cov_with_subdiv(&xa, &xb, &breaks, subdiv);
            let diff = (&next - &current).mapv(|v| v * v).sum().sqrt();
            let scale = next.mapv(|v| v * v).sum().sqrt().max(f64::MIN_POSITIVE);
            current = next;
            if diff / scale < self.rel_tol {
                return Ok(current);
            }
        }
        Err(Error::QuadratureAccuracy(format!(
            "prior covariance quadrature not converged after {} doublings",
            self.max_doublings
        )))
    }
}
