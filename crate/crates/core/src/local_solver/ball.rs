//! Ball-constrained quadratic `min sum_l (w_lᴴ Θ_l w_l - 2 Re{ξ_lᴴ w_l})`
//! subject to `sum_l ||w_l||^2 <= P`, solved through one Hermitian
//! eigendecomposition per block and a scalar search on the KKT multiplier.

use crate::linalg::hermitian_eigen;
use crate::{CMat, CVec, Error, Result, C64};

/// Relative eigenvalue floor used when the power constraint is inactive.
pub const EIG_FLOOR: f64 = 1e-12;
/// Bisection stops once `|h(lambda)| < LINE_SEARCH_TOL * P`.
pub const LINE_SEARCH_TOL: f64 = 1e-10;
pub const MAX_BISECTION: usize = 200;

/// Block-diagonal quadratic over the beamformers of one satellite.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedQuadratic {
    /// User served by each block, ascending.
    pub users: Vec<usize>,
    pub theta: Vec<CMat>,
    pub xi: Vec<CVec>,
    pub budget: f64,
}

impl ReducedQuadratic {
    pub fn n_blocks(&self) -> usize {
        self.theta.len()
    }

    /// Objective value at block vectors `w`.
    pub fn objective(&self, w: &[CVec]) -> f64 {
        self.theta
            .iter()
            .zip(&self.xi)
            .zip(w)
            .map(|((t, x), w)| (w.adjoint() * t * w)[(0, 0)].re - 2.0 * x.dotc(w).re)
            .sum()
    }

    pub fn spectral(&self) -> Result<SpectralQuadratic> {
        let blocks = self
            .theta
            .iter()
            .zip(&self.xi)
            .map(|(t, x)| {
                let (vals, vecs) = hermitian_eigen(t)?;
                let varpi = vecs.adjoint() * x;
                Ok(SpectralBlock { vals, vecs, varpi })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralQuadratic {
            blocks,
            budget: self.budget,
        })
    }
}

/// `Θ = U diag(ω) Uᴴ` together with `ϖ = Uᴴ ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    pub vals: Vec<f64>,
    pub vecs: CMat,
    pub varpi: CVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralQuadratic {
    pub blocks: Vec<SpectralBlock>,
    pub budget: f64,
}

impl SpectralQuadratic {
    pub fn max_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.vals.iter().copied())
            .fold(0.0, f64::max)
    }

    /// `h(λ) = sum |ϖ_n|^2 / (ω_n + λ)^2 - P` with eigenvalues clipped at zero.
    pub fn h(&self, lambda: f64) -> f64 {
        self.norm_sq(lambda, 0.0) - self.budget
    }

    fn norm_sq(&self, lambda: f64, floor: f64) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.vals.iter().zip(b.varpi.iter()))
            .map(|(&w, p)| {
                let a = p.norm_sqr();
                if a == 0.0 {
                    0.0
                } else {
                    a / (w.max(floor) + lambda).powi(2)
                }
            })
            .sum()
    }

    /// Block beamformers `U diag(1 / (ω + λ)) ϖ`.
    pub fn recover(&self, lambda: f64, floor: f64) -> Vec<CVec> {
        self.blocks
            .iter()
            .map(|b| {
                let scaled = CVec::from_iterator(
                    b.varpi.len(),
                    b.vals.iter().zip(b.varpi.iter()).map(|(&w, &p)| {
                        if p.norm_sqr() == 0.0 {
                            C64::new(0.0, 0.0)
                        } else {
                            p / (w.max(floor) + lambda)
                        }
                    }),
                );
                &b.vecs * scaled
            })
            .collect()
    }
}

/// Solution of the ball-constrained problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSolution {
    pub w: Vec<CVec>,
    pub lambda: f64,
    pub bisection_steps: usize,
}

pub fn solve_ball_constrained(quad: &ReducedQuadratic) -> Result<BallSolution> {
    solve_spectral(&quad.spectral()?)
}

pub fn solve_spectral(sq: &SpectralQuadratic) -> Result<BallSolution> {
    let budget = sq.budget;
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::Numeric(format!("power budget {budget}")));
    }
    let zeros = || sq.blocks.iter().map(|b| CVec::zeros(b.varpi.len())).collect();
    let xi_sq: f64 = sq.blocks.iter().map(|b| b.varpi.norm_squared()).sum();
    if xi_sq == 0.0 || budget == 0.0 {
        return Ok(BallSolution {
            w: zeros(),
            lambda: 0.0,
            bisection_steps: 0,
        });
    }

    let omega_max = sq.max_eigenvalue();
    if omega_max > 0.0 {
        let floor = EIG_FLOOR * omega_max;
        if sq.norm_sq(0.0, floor) <= budget {
            return Ok(BallSolution {
                w: sq.recover(0.0, floor),
                lambda: 0.0,
                bisection_steps: 0,
            });
        }
    }

    // h is decreasing on (0, inf) and h(||ξ|| / sqrt(P)) <= 0.
    let cap = xi_sq.sqrt() / budget.sqrt();
    let mut hi = if omega_max > 0.0 {
        (omega_max * 1e-6).min(cap)
    } else {
        cap
    };
    let mut lo = 0.0;
    while sq.h(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let tol = LINE_SEARCH_TOL * budget;
    let mut lambda = hi;
    let mut steps = 0;
    for _ in 0..MAX_BISECTION {
        let h = sq.h(lambda);
        if h <= 0.0 && (h.abs() < tol && (lambda * h).abs() < tol) {
            break;
        }
        steps += 1;
        if h > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        lambda = 0.5 * (lo + hi);
        if hi - lo <= f64::EPSILON * hi {
            lambda = hi;
            break;
        }
    }
    if !lambda.is_finite() {
        return Err(Error::Numeric("line search diverged".into()));
    }
    Ok(BallSolution {
        w: sq.recover(lambda, 0.0),
        lambda,
        bisection_steps: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn identity_case() -> ReducedQuadratic {
        ReducedQuadratic {
            users: vec![0, 1],
            theta: vec![CMat::identity(2, 2), CMat::identity(2, 2)],
            xi: vec![
                CVec::from_vec(vec![c(1.0), c(1.0)]),
                CVec::from_vec(vec![c(1.0), C64::new(0.0, 1.0)]),
            ],
            budget: 1.0,
        }
    }

    #[test]
    fn identity_blocks_give_unit_multiplier() {
        let sol = solve_ball_constrained(&identity_case()).unwrap();
        assert!((sol.lambda - 1.0).abs() < 1e-9, "{}", sol.lambda);
        let p: f64 = sol.w.iter().map(|v| v.norm_squared()).sum();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_quadratic_aligns_with_linear_term() {
        let xi = CVec::from_vec(vec![c(3.0), C64::new(0.0, 4.0)]);
        let quad = ReducedQuadratic {
            users: vec![0],
            theta: vec![CMat::zeros(2, 2)],
            xi: vec![xi.clone()],
            budget: 4.0,
        };
        let sol = solve_ball_constrained(&quad).unwrap();
        assert!((sol.lambda - 5.0 / 2.0).abs() < 1e-9);
        let expect = &xi * c(2.0 / 5.0);
        assert!((&sol.w[0] - expect).norm() < 1e-9);
    }

    #[test]
    fn inactive_constraint_returns_newton_point() {
        let quad = ReducedQuadratic {
            users: vec![0],
            theta: vec![CMat::identity(2, 2) * c(4.0)],
            xi: vec![CVec::from_vec(vec![c(1.0), c(0.0)])],
            budget: 1.0,
        };
        let sol = solve_ball_constrained(&quad).unwrap();
        assert_eq!(sol.lambda, 0.0);
        assert!((sol.w[0][0] - c(0.25)).norm() < 1e-14);
    }

    #[test]
    fn zero_linear_term_gives_zero() {
        let quad = ReducedQuadratic {
            users: vec![0],
            theta: vec![CMat::identity(3, 3)],
            xi: vec![CVec::zeros(3)],
            budget: 2.0,
        };
        let sol = solve_ball_constrained(&quad).unwrap();
        assert!(sol.w[0].norm() == 0.0 && sol.lambda == 0.0);
    }

    #[test]
    fn eigen_h_matches_inverse_h() {
        let quad = identity_case();
        let sq = quad.spectral().unwrap();
        for &lam in &[0.1, 0.5, 2.0, 7.0] {
            let mut direct = -quad.budget;
            for (t, x) in quad.theta.iter().zip(&quad.xi) {
                let n = t.nrows();
                let w = solve(t + CMat::identity(n, n) * c(lam), x).unwrap();
                direct += w.norm_squared();
            }
            assert!((direct - sq.h(lam)).abs() < 1e-12);
        }
    }
}
