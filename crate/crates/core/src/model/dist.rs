use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Distribution of the intrinsic lying-aversion type `t` on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub enum TypeDistribution<S> {
    Uniform { t_max: S },
    /// Piecewise-linear CDF through `(t, F(t))` knots, from `(0, 0)` to `(T, 1)`.
    Table { knots: Vec<(S, S)> },
}

impl<S: Scalar> TypeDistribution<S> {
    pub fn uniform(t_max: S) -> Result<Self> {
        if t_max <= S::zero() {
            return Err(Error::Parameter(format!("t_max must be positive, got {t_max}")));
        }
        Ok(TypeDistribution::Uniform { t_max })
    }

    pub fn table(knots: Vec<(S, S)>) -> Result<Self> {
        let d = TypeDistribution::Table { knots };
        d.check()?;
        Ok(d)
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            TypeDistribution::Uniform { .. } => "uniform",
            TypeDistribution::Table { .. } => "table",
        }
    }

    pub fn t_max(&self) -> S {
        match self {
            TypeDistribution::Uniform { t_max } => *t_max,
            TypeDistribution::Table { knots } => knots[knots.len() - 1].0,
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        match self {
            TypeDistribution::Uniform { t_max } if *t_max <= S::zero() => {
                Err(Error::Parameter(format!("t_max must be positive, got {t_max}")))
            }
            TypeDistribution::Uniform { .. } => Ok(()),
            TypeDistribution::Table { knots } => {
                if knots.len() < 2 {
                    return Err(Error::Parameter("CDF table needs at least two knots".into()));
                }
                if knots[0] != (S::zero(), S::zero()) {
                    return Err(Error::Parameter("CDF table must start at (0, 0)".into()));
                }
                if knots[knots.len() - 1].1 != S::one() {
                    return Err(Error::Parameter("CDF table must end at F = 1".into()));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].1) {
                    return Err(Error::Parameter("CDF table must be strictly increasing".into()));
                }
                Ok(())
            }
        }
    }

    /// `F(t)`, clamped to `[0, 1]` outside the support.
    pub fn cdf(&self, t: S) -> S {
        if t <= S::zero() {
            return S::zero();
        }
        match self {
            TypeDistribution::Uniform { t_max } => {
                if t >= *t_max {
                    S::one()
                } else {
                    t / *t_max
                }
            }
            TypeDistribution::Table { knots } => {
                for w in knots.windows(2) {
                    let (t0, f0) = w[0];
                    let (t1, f1) = w[1];
                    if t <= t1 {
                        return f0 + (f1 - f0) * (t - t0) / (t1 - t0);
                    }
                }
                S::one()
            }
        }
    }

    /// Inverse CDF for sampling, `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            TypeDistribution::Uniform { t_max } => u * t_max.to_f64_lossy(),
            TypeDistribution::Table { knots } => {
                for w in knots.windows(2) {
                    let (t0, f0) = (w[0].0.to_f64_lossy(), w[0].1.to_f64_lossy());
                    let (t1, f1) = (w[1].0.to_f64_lossy(), w[1].1.to_f64_lossy());
                    if u <= f1 {
                        return t0 + (t1 - t0) * (u - f0) / (f1 - f0);
                    }
                }
                self.t_max().to_f64_lossy()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cdf_and_quantile() {
        let d = TypeDistribution::uniform(13.0).unwrap();
        assert_eq!(d.cdf(6.5), 0.5);
        assert_eq!(d.cdf(-1.0), 0.0);
        assert_eq!(d.cdf(20.0), 1.0);
        assert_eq!(d.quantile(0.5), 6.5);
        assert!(TypeDistribution::uniform(0.0).is_err());
    }

    #[test]
    fn table_cdf_roundtrips_quantile() {
        let d = TypeDistribution::<f64>::table(vec![(0.0, 0.0), (2.0, 0.5), (10.0, 1.0)]).unwrap();
        assert_eq!(d.t_max(), 10.0);
        assert!((d.cdf(1.0) - 0.25).abs() < 1e-12);
        assert!((d.cdf(6.0) - 0.75).abs() < 1e-12);
        for u in [0.0, 0.1, 0.25, 0.5, 0.8, 1.0] {
            assert!((d.cdf(d.quantile(u)) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn table_validation() {
        assert!(TypeDistribution::table(vec![(0.0, 0.0)]).is_err());
        assert!(TypeDistribution::table(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
        assert!(TypeDistribution::table(vec![(0.0, 0.0), (1.0, 0.9)]).is_err());
        assert!(TypeDistribution::table(vec![(0.0, 0.0), (1.0, 0.5), (2.0, 0.5), (3.0, 1.0)]).is_err());
    }
}
