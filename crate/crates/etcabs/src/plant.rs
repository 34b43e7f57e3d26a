//! Closed-loop event-triggered LTI system: triggering matrices and the
//! state-dependent inter-sample time.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{int_expm, Matrix, Vector};

const BISECTION_TOL: f64 = 1e-9;
const ORIGIN_NORM: f64 = 1e-12;

/// LTI plant xi' = A xi + B v under v = K xi(t_k), triggered when
/// |e|^2 >= alpha |xi|^2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Plant {
    pub a: Matrix,
    pub b: Matrix,
    pub k: Matrix,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct TriggeringEvaluation {
    pub sigma: f64,
    pub lambda: Matrix,
    pub phi: Matrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEvent {
    pub index: usize,
    /// Sampling instant t_k.
    pub time: f64,
    pub state: Vector,
    /// Inter-sample time tau_k elapsed until the next event.
    pub tau: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    /// Set when the simulation stopped because the state reached the origin.
    pub truncated_at_origin: bool,
}

impl Plant {
    pub fn new(a: Matrix, b: Matrix, k: Matrix, alpha: f64) -> Result<Self, Error> {
        if !a.is_square() {
            return Err(Error::Dimension("A must be square".into()));
        }
        let n = a.rows();
        if b.rows() != n {
            return Err(Error::Dimension("B must have as many rows as A".into()));
        }
        if k.rows() != b.cols() || k.cols() != n {
            return Err(Error::Dimension("K must be m x n with m = cols(B)".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Contract(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(Plant { a, b, k, alpha })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    /// A + BK.
    pub fn closed_loop(&self) -> Matrix {
        &self.a + &(&self.b * &self.k)
    }

    /// Lambda(sigma) = I + (int_0^sigma e^{Ar} dr)(A + BK).
    pub fn lambda_at(&self, sigma: f64) -> Result<Matrix, Error> {
        if sigma < 0.0 {
            return Err(Error::Contract(format!("sigma must be >= 0, got {sigma}")));
        }
        let integral = int_expm(&self.a, sigma)?;
        Ok(&Matrix::identity(self.dim()) + &(&integral * &self.closed_loop()))
    }

    /// Phi(sigma) = (I - Lambda)^T (I - Lambda) - alpha Lambda^T Lambda,
    /// symmetrized against round-off.
    pub fn phi_at(&self, sigma: f64) -> Result<Matrix, Error> {
        let lambda = self.lambda_at(sigma)?;
        Ok(self.phi_of_lambda(&lambda))
    }

    pub fn phi_of_lambda(&self, lambda: &Matrix) -> Matrix {
        let eye = Matrix::identity(self.dim());
        let err = &eye - lambda;
        let phi = &(&err.transpose() * &err) - &(&lambda.transpose() * lambda).scale(self.alpha);
        phi.symmetrize()
    }

    pub fn triggering_at(&self, sigma: f64) -> Result<TriggeringEvaluation, Error> {
        let lambda = self.lambda_at(sigma)?;
        let phi = self.phi_of_lambda(&lambda);
        Ok(TriggeringEvaluation { sigma, lambda, phi })
    }

    /// tau(x): first sigma in (0, sigma_bar] where x^T Phi(sigma) x reaches
    /// zero from below, found by a forward scan at step dt plus bisection.
    pub fn inter_sample_time(
        &self,
        x: &Vector,
        sigma_bar: f64,
        dt: f64,
    ) -> Result<f64, Error> {
        if x.norm() == 0.0 {
            return Err(Error::UndefinedPoint("tau(0) is undefined".into()));
        }
        if sigma_bar <= 0.0 || dt <= 0.0 {
            return Err(Error::Contract("sigma_bar and dt must be positive".into()));
        }
        let q = |sigma: f64| -> Result<f64, Error> { Ok(self.phi_at(sigma)?.quad_form(x)) };

        // q(0) = -alpha |x|^2 < 0, so the first nonnegative value is a sign change.
        let mut prev_sigma = 0.0;
        let mut sigma = dt;
        loop {
            if sigma > sigma_bar {
                sigma = sigma_bar;
            }
            if q(sigma)? >= 0.0 {
                break;
            }
            if sigma >= sigma_bar {
                return Err(Error::HorizonExceeded { sigma_bar });
            }
            prev_sigma = sigma;
            sigma += dt;
        }

        let (mut lo, mut hi) = (prev_sigma, sigma);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if q(mid)? >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Event-triggered trace from x0: x_{k+1} = Lambda(tau(x_k)) x_k until the
    /// cumulative time exceeds the horizon.
    pub fn simulate_traffic(
        &self,
        x0: &Vector,
        horizon: f64,
        sigma_bar: f64,
        dt: f64,
    ) -> Result<Trace, Error> {
        if x0.norm() == 0.0 {
            return Err(Error::UndefinedPoint("cannot simulate from the origin".into()));
        }
        if horizon <= 0.0 {
            return Err(Error::Contract("horizon must be positive".into()));
        }
        let mut events = Vec::new();
        let mut x = x0.clone();
        let mut t = 0.0;
        let mut k = 0;
        let mut truncated = false;
        while t <= horizon {
            if x.norm() < ORIGIN_NORM {
                truncated = true;
                break;
            }
            let tau = self.inter_sample_time(&x, sigma_bar, dt)?;
            events.push(TraceEvent { index: k, time: t, state: x.clone(), tau });
            x = self.lambda_at(tau)?.mul_vec(&x)?;
            t += tau;
            k += 1;
        }
        Ok(Trace { events, truncated_at_origin: truncated })
    }
}

/// Default scan step for the root search: sigma_bar / 1e4.
pub fn default_scan_dt(sigma_bar: f64) -> f64 {
    sigma_bar / 1e4
}
