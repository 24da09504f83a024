//! Step-size schedules for the sliding methods.
//!
//! A schedule fixes the outer parameters `β_k, γ_k, T_k` and the inner
//! parameters `p_t = t/2`, `θ_t = 2(t+1)/(t(t+3))`, together with the derived
//! products `P_t = 2/((t+1)(t+2))` and `Γ_k = Π_{i=2}^k (1 − γ_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlideError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    FixedHorizon,
    CompactSet,
    Custom,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::FixedHorizon => "fixed_horizon",
            PolicyKind::CompactSet => "compact_set",
            PolicyKind::Custom => "custom",
        }
    }
}

/// Explicit per-iteration parameters for [`PolicyKind::Custom`]; index `k−1`
/// holds the values for outer iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomSteps {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub big_t: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingSchedule {
    kind: PolicyKind,
    lipschitz: f64,
    nonsmooth: f64,
    sigma: f64,
    modulus: f64,
    d_tilde: f64,
    horizon: Option<usize>,
    custom: Option<CustomSteps>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(SlideError::param(name, "must be positive and finite"));
    }
    Ok(())
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(SlideError::param(name, "must be finite and nonnegative"));
    }
    Ok(())
}

impl SlidingSchedule {
    /// `β_k = 2L/(νk)`, `γ_k = 2/(k+1)`, `T_k = ⌈M²Nk²/(D̃L²)⌉`.
    pub fn fixed_horizon(l: f64, m: f64, nu: f64, n: usize, d_tilde: f64) -> Result<Self> {
        positive("L", l)?;
        nonnegative("M", m)?;
        positive("nu", nu)?;
        positive("D_tilde", d_tilde)?;
        if n == 0 {
            return Err(SlideError::param("N", "must be at least 1"));
        }
        Ok(SlidingSchedule {
            kind: PolicyKind::FixedHorizon,
            lipschitz: l,
            nonsmooth: m,
            sigma: 0.0,
            modulus: nu,
            d_tilde,
            horizon: Some(n),
            custom: None,
        })
    }

    /// `β_k = 9L(1−P_{T_k})/(2ν(k+1))`, `γ_k = 3/(k+2)`, `T_k = ⌈M²(k+1)³/(D̃L²)⌉`.
    pub fn compact_set(l: f64, m: f64, nu: f64, d_tilde: f64) -> Result<Self> {
        positive("L", l)?;
        nonnegative("M", m)?;
        positive("nu", nu)?;
        positive("D_tilde", d_tilde)?;
        Ok(SlidingSchedule {
            kind: PolicyKind::CompactSet,
            lipschitz: l,
            nonsmooth: m,
            sigma: 0.0,
            modulus: nu,
            d_tilde,
            horizon: None,
            custom: None,
        })
    }

    /// Fixed-horizon policy for the stochastic method: `M²` becomes `M² + σ²`.
    pub fn stochastic_fixed_horizon(
        l: f64,
        m: f64,
        sigma: f64,
        nu: f64,
        n: usize,
        d_tilde: f64,
    ) -> Result<Self> {
        Self::fixed_horizon(l, m, nu, n, d_tilde)?.with_noise(sigma)
    }

    /// Compact-set policy for the stochastic method: `M²` becomes `M² + σ²`.
    pub fn stochastic_compact_set(l: f64, m: f64, sigma: f64, nu: f64, d_tilde: f64) -> Result<Self> {
        Self::compact_set(l, m, nu, d_tilde)?.with_noise(sigma)
    }

    /// User-supplied `β_k, γ_k, T_k`; checked by [`SlidingSchedule::validate`].
    pub fn custom(l: f64, m: f64, nu: f64, steps: CustomSteps) -> Result<Self> {
        positive("L", l)?;
        nonnegative("M", m)?;
        positive("nu", nu)?;
        let n = steps.beta.len();
        if n == 0 || steps.gamma.len() != n || steps.big_t.len() != n {
            return Err(SlideError::param(
                "custom",
                "beta, gamma and T must be nonempty and of equal length",
            ));
        }
        if steps.beta.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(SlideError::param("beta", "must be positive"));
        }
        if steps.gamma.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            return Err(SlideError::param("gamma", "must lie in (0, 1]"));
        }
        if steps.big_t.contains(&0) {
            return Err(SlideError::param("T", "must be at least 1"));
        }
        Ok(SlidingSchedule {
            kind: PolicyKind::Custom,
            lipschitz: l,
            nonsmooth: m,
            sigma: 0.0,
            modulus: nu,
            d_tilde: 1.0,
            horizon: Some(n),
            custom: Some(steps),
        })
    }

    pub fn with_noise(mut self, sigma: f64) -> Result<Self> {
        nonnegative("sigma", sigma)?;
        self.sigma = sigma;
        Ok(self)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn d_tilde(&self) -> f64 {
        self.d_tilde
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn nonsmooth(&self) -> f64 {
        self.nonsmooth
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    /// `M² + σ²`, the quantity driving `T_k`.
    pub fn noise_energy(&self) -> f64 {
        self.nonsmooth * self.nonsmooth + self.sigma * self.sigma
    }

    pub fn p(&self, t: u64) -> f64 {
        t as f64 / 2.0
    }

    pub fn theta(&self, t: u64) -> f64 {
        let t = t as f64;
        2.0 * (t + 1.0) / (t * (t + 3.0))
    }

    /// `P_t = 2/((t+1)(t+2))`, with `P_0 = 1`.
    pub fn big_p(&self, t: u64) -> f64 {
        let t = t as f64;
        2.0 / ((t + 1.0) * (t + 2.0))
    }

    pub fn beta(&self, k: usize) -> f64 {
        let kf = k as f64;
        let (l, nu) = (self.lipschitz, self.modulus);
        match self.kind {
            PolicyKind::FixedHorizon => 2.0 * l / (nu * kf),
            PolicyKind::CompactSet => {
                9.0 * l * (1.0 - self.big_p(self.big_t(k))) / (2.0 * nu * (kf + 1.0))
            }
            PolicyKind::Custom => self.custom_steps().beta[k - 1],
        }
    }

    pub fn gamma(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self.kind {
            PolicyKind::FixedHorizon => 2.0 / (kf + 1.0),
            PolicyKind::CompactSet => 3.0 / (kf + 2.0),
            PolicyKind::Custom => self.custom_steps().gamma[k - 1],
        }
    }

    pub fn big_t(&self, k: usize) -> u64 {
        let kf = k as f64;
        let denom = self.d_tilde * self.lipschitz * self.lipschitz;
        let raw = match self.kind {
            PolicyKind::FixedHorizon => {
                let n = self.horizon.unwrap_or(1) as f64;
                self.noise_energy() * n * kf * kf / denom
            }
            PolicyKind::CompactSet => self.noise_energy() * (kf + 1.0).powi(3) / denom,
            PolicyKind::Custom => return self.custom_steps().big_t[k - 1],
        };
        // the M = 0 case would give T_k = 0; one inner step is the minimum
        (raw.ceil() as u64).max(1)
    }

    /// `Γ_k`; closed forms for the built-in policies, the product otherwise.
    pub fn big_gamma(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self.kind {
            PolicyKind::FixedHorizon => 2.0 / (kf * (kf + 1.0)),
            PolicyKind::CompactSet => 6.0 / (kf * (kf + 1.0) * (kf + 2.0)),
            PolicyKind::Custom => (2..=k).map(|i| 1.0 - self.gamma(i)).product(),
        }
    }

    /// `Σ_{k≤N} T_k`.
    pub fn total_inner(&self, n: usize) -> u64 {
        (1..=n).map(|k| self.big_t(k)).sum()
    }

    fn custom_steps(&self) -> &CustomSteps {
        self.custom.as_ref().expect("custom schedule carries its steps")
    }

    /// `γ_kβ_k / (Γ_k(1 − P_{T_k}))`, whose monotonicity selects the bound.
    pub fn weight(&self, k: usize) -> f64 {
        self.gamma(k) * self.beta(k) / (self.big_gamma(k) * (1.0 - self.big_p(self.big_t(k))))
    }

    /// Checks `γ₁ = 1` and `νβ_k − Lγ_k ≥ 0` for `k ≤ n` against the
    /// problem constants, and that the weight sequence is monotone in the
    /// direction required by the policy.
    pub fn validate(&self, l: f64, nu: f64, n: usize) -> Result<()> {
        if let Some(h) = self.horizon {
            if n > h {
                return Err(SlideError::InvalidSchedule(format!(
                    "horizon: schedule covers {h} outer iterations, {n} requested"
                )));
            }
        }
        if (self.gamma(1) - 1.0).abs() > 1e-12 {
            return Err(SlideError::InvalidSchedule("gamma_1 = 1".into()));
        }
        for k in 1..=n {
            if nu * self.beta(k) - l * self.gamma(k) < -1e-12 * l {
                return Err(SlideError::InvalidSchedule(format!(
                    "nu*beta_k - L*gamma_k >= 0 at k = {k}"
                )));
            }
        }
        let tol = 1e-12;
        for k in 2..=n {
            let (prev, cur) = (self.weight(k - 1), self.weight(k));
            let ok = match self.kind {
                PolicyKind::FixedHorizon => cur <= prev * (1.0 + tol),
                PolicyKind::CompactSet => cur >= prev * (1.0 - tol),
                PolicyKind::Custom => true,
            };
            if !ok {
                return Err(SlideError::InvalidSchedule(format!(
                    "weight monotonicity at k = {k}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the weights are nonincreasing up to `n` (bound of the first kind).
    pub fn weights_nonincreasing(&self, n: usize) -> bool {
        (2..=n).all(|k| self.weight(k) <= self.weight(k - 1) * (1.0 + 1e-12))
    }

    /// Whether the weights are nondecreasing up to `n` (bound of the second kind).
    pub fn weights_nondecreasing(&self, n: usize) -> bool {
        (2..=n).all(|k| self.weight(k) >= self.weight(k - 1) * (1.0 - 1e-12))
    }
}

/// Default `D̃` for the fixed-horizon policy: `3D_X/(2ν)`.
pub fn default_d_tilde_fixed(d_x: f64, nu: f64) -> f64 {
    1.5 * d_x / nu
}

/// Default `D̃` for the compact-set policy: `81D_X/(16ν)`.
pub fn default_d_tilde_compact(d_x: f64, nu: f64) -> f64 {
    81.0 * d_x / (16.0 * nu)
}

/// Default `D̃` for the stochastic fixed-horizon policy: `3D_X/(4ν)`.
pub fn default_d_tilde_stochastic(d_x: f64, nu: f64) -> f64 {
    0.75 * d_x / nu
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_horizon_examples() {
        let s = SlidingSchedule::fixed_horizon(1.0, 1.0, 1.0, 10, 1.0).unwrap();
        assert_eq!(s.big_t(2), 40);
        assert_eq!(s.gamma(1), 1.0);
        assert!((s.big_gamma(3) - 1.0 / 6.0).abs() < 1e-15);
        s.validate(1.0, 1.0, 10).unwrap();
    }

    #[test]
    fn compact_set_examples() {
        let s = SlidingSchedule::compact_set(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.gamma(1), 1.0);
        assert_eq!(s.big_t(1), 8);
        assert!((s.big_gamma(4) - 0.05).abs() < 1e-15);
        s.validate(1.0, 1.0, 50).unwrap();
    }

    #[test]
    fn stochastic_t_uses_noise_energy() {
        let s = SlidingSchedule::stochastic_fixed_horizon(1.0, 1.0, 2.0, 1.0, 3, 1.0).unwrap();
        assert_eq!(s.big_t(1), 15);
        let c = SlidingSchedule::stochastic_compact_set(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        // 2·8/4
        assert_eq!(c.big_t(1), 4);
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(SlidingSchedule::fixed_horizon(0.0, 1.0, 1.0, 3, 1.0).is_err());
        assert!(SlidingSchedule::fixed_horizon(1.0, 1.0, 1.0, 0, 1.0).is_err());
        assert!(SlidingSchedule::compact_set(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(SlidingSchedule::compact_set(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_nonsmooth_gives_single_inner_step() {
        let s = SlidingSchedule::fixed_horizon(1.0, 0.0, 1.0, 5, 1.0).unwrap();
        assert!((1..=5).all(|k| s.big_t(k) == 1));
    }

    #[test]
    fn validation_catches_violations() {
        // β too small for L
        let s = SlidingSchedule::fixed_horizon(1.0, 1.0, 1.0, 5, 1.0).unwrap();
        assert!(s.validate(2.0, 1.0, 5).is_err());
        let steps = CustomSteps {
            beta: vec![1.0, 1.0],
            gamma: vec![0.5, 0.5],
            big_t: vec![1, 1],
        };
        let c = SlidingSchedule::custom(1.0, 0.0, 1.0, steps).unwrap();
        assert!(c.validate(1.0, 1.0, 2).is_err());
        assert!(s.validate(1.0, 1.0, 6).is_err());
    }

    #[test]
    fn custom_gamma_product() {
        let steps = CustomSteps {
            beta: vec![3.0; 4],
            gamma: vec![1.0, 0.5, 0.5, 0.25],
            big_t: vec![1; 4],
        };
        let c = SlidingSchedule::custom(1.0, 0.0, 1.0, steps).unwrap();
        assert_eq!(c.big_gamma(1), 1.0);
        assert_eq!(c.big_gamma(4), 0.5 * 0.5 * 0.75);
    }
}
