use super::kernel::KernelSpec;
use super::rates::RateProfiles;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance of the quadrature fallback for exponential moments.
pub const MGF_QUADRATURE_TOL: f64 = 1e-10;

/// `H(x, q) = b(x) - d(x) + p M_G(q)` with `M_G(q) = ∫ G(y) e^{q y} dy`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    rates: RateProfiles,
    kernel: KernelSpec,
}

impl Hamiltonian {
    pub fn new(rates: RateProfiles, kernel: KernelSpec) -> Result<Self> {
        rates.validate()?;
        if !kernel.has_superexponential_tail() {
            return Err(Error::UnboundedKernelTail(kernel.name()));
        }
        Ok(Hamiltonian { rates, kernel })
    }

    pub fn rates(&self) -> &RateProfiles {
        &self.rates
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn has_closed_form(&self) -> bool {
        self.kernel.log_mgf_closed_form(0.0).is_some()
    }

    /// `M_G(q)`; closed form when available, otherwise adaptive quadrature.
    pub fn mgf<T: Real>(&self, q: T) -> Result<T> {
        let qf = q.as_f64();
        if !qf.is_finite() {
            return Err(Error::param("q", "gradient must be finite"));
        }
        match self.kernel.log_mgf_closed_form(qf) {
            Some(exponent) => {
                if exponent > T::max_exp_arg().as_f64() {
                    return Err(Error::Saturation { q: qf, exponent });
                }
                Ok(T::lit(exponent).exp())
            }
            None => {
                let m = self.kernel.mgf_quadrature(qf, 0, MGF_QUADRATURE_TOL);
                if !m.is_finite() || m > T::max_value().as_f64() {
                    return Err(Error::Saturation {
                        q: qf,
                        exponent: m.ln(),
                    });
                }
                Ok(T::lit(m))
            }
        }
    }

    /// `M_G'(q)`, the slope of the exponential moment.
    pub fn mgf_slope<T: Real>(&self, q: T) -> Result<T> {
        let qf = q.as_f64();
        let v = match self.kernel.mgf_derivative_closed_form(qf) {
            Some(v) => v,
            None => self.kernel.mgf_quadrature(qf, 1, MGF_QUADRATURE_TOL),
        };
        if !v.is_finite() {
            return Err(Error::Saturation {
                q: qf,
                exponent: f64::INFINITY,
            });
        }
        Ok(T::lit(v))
    }

    pub fn eval<T: Real>(&self, x: T, q: T) -> Result<T> {
        let net = T::lit(self.rates.net(x.as_f64()));
        Ok(net + T::lit(self.rates.mutation) * self.mgf(q)?)
    }

    /// `b(x) - d(x)` at `x`.
    pub fn net<T: Real>(&self, x: T) -> T {
        T::lit(self.rates.net(x.as_f64()))
    }

    pub fn p(&self) -> f64 {
        self.rates.mutation
    }
}
