//! Multi-indices `k = (k0, k1)` under the parabolic scaling `(2, 1)`.

use serde::{Deserialize, Serialize};

/// A pair of naturals; `k0` counts time derivatives, `k1` space derivatives.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Multi {
    pub k0: u8,
    pub k1: u8,
}

impl Multi {
    pub const ZERO: Multi = Multi { k0: 0, k1: 0 };

    pub fn new(k0: u8, k1: u8) -> Self {
        Multi { k0, k1 }
    }

    /// Parabolic size `|k|_s = 2 k0 + k1`.
    pub fn par_deg(&self) -> u32 {
        2 * self.k0 as u32 + self.k1 as u32
    }

    pub fn is_zero(&self) -> bool {
        self.k0 == 0 && self.k1 == 0
    }

    pub fn add(&self, o: Multi) -> Multi {
        Multi { k0: self.k0 + o.k0, k1: self.k1 + o.k1 }
    }

    /// Componentwise subtraction; `None` unless `o ≤ self`.
    pub fn checked_sub(&self, o: Multi) -> Option<Multi> {
        if o.k0 <= self.k0 && o.k1 <= self.k1 {
            Some(Multi { k0: self.k0 - o.k0, k1: self.k1 - o.k1 })
        } else {
            None
        }
    }

    pub fn leq(&self, o: Multi) -> bool {
        self.k0 <= o.k0 && self.k1 <= o.k1
    }

    /// `k! = k0! k1!`
    pub fn factorial(&self) -> u128 {
        fact(self.k0) * fact(self.k1)
    }

    /// `C(self, sub)` componentwise; 0 unless `sub ≤ self`.
    pub fn binomial(&self, sub: Multi) -> u128 {
        if !sub.leq(*self) {
            return 0;
        }
        binom(self.k0, sub.k0) * binom(self.k1, sub.k1)
    }

    /// All `j` with `j ≤ self` componentwise, in lexicographic order.
    pub fn sub_indices(&self) -> Vec<Multi> {
        let mut out = Vec::with_capacity((self.k0 as usize + 1) * (self.k1 as usize + 1));
        for a in 0..=self.k0 {
            for b in 0..=self.k1 {
                out.push(Multi { k0: a, k1: b });
            }
        }
        out
    }

    /// All multi-indices with `|k|_s ≤ cap`.
    pub fn with_par_deg_at_most(cap: u32) -> Vec<Multi> {
        let mut out = Vec::new();
        for k0 in 0..=(cap / 2) as u8 {
            for k1 in 0..=(cap - 2 * k0 as u32) as u8 {
                out.push(Multi { k0, k1 });
            }
        }
        out
    }

    /// Monomial value `(y0-x0)^{k0} (y1-x1)^{k1}`.
    pub fn eval_monomial(&self, d0: f64, d1: f64) -> f64 {
        d0.powi(self.k0 as i32) * d1.powi(self.k1 as i32)
    }
}

fn fact(n: u8) -> u128 {
    (1..=n as u128).product()
}

fn binom(n: u8, k: u8) -> u128 {
    if k > n {
        return 0;
    }
    fact(n) / (fact(k) * fact(n - k))
}

impl std::fmt::Debug for Multi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.k0, self.k1)
    }
}

impl std::fmt::Display for Multi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.k0, self.k1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabolic_degree_weights_time_twice() {
        assert_eq!(Multi::new(1, 0).par_deg(), 2);
        assert_eq!(Multi::new(0, 1).par_deg(), 1);
        assert_eq!(Multi::new(2, 3).par_deg(), 7);
    }

    #[test]
    fn binomials() {
        assert_eq!(Multi::new(2, 1).binomial(Multi::new(1, 1)), 2);
        assert_eq!(Multi::new(2, 1).binomial(Multi::new(3, 0)), 0);
        assert_eq!(Multi::new(3, 2).factorial(), 12);
    }

    #[test]
    fn enumeration_respects_cap() {
        let all = Multi::with_par_deg_at_most(2);
        assert!(all.contains(&Multi::new(1, 0)));
        assert!(all.contains(&Multi::new(0, 2)));
        assert!(!all.iter().any(|k| k.par_deg() > 2));
    }
}
