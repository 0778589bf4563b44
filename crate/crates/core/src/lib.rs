//! Symbolic renormalization of singular stochastic PDE systems
//! `(∂_{x0} - a(x1)∂²_{x1} - b(x1)∂_{x1}) u_i = f^i(u) ξ + g^i(u, ∂_{x1}u)`
//! on `ℝ×𝕋`, together with the numerical heat calculus for the fourth-order
//! operator `G = ∂²_{x0} - L²` that backs the kernel estimates.
//!
//! The crate has two halves. The symbolic half (`trees`, `algebra`, `rules`,
//! `renorm`) manipulates decorated rooted trees with exact rational
//! coefficients: coproducts, the positive-sector antipode, root extraction,
//! grafting, state-dependent preparation maps and the counter-terms of the
//! renormalized equation. The numeric half (`parametrix`, `models`) builds
//! the heat-kernel parametrix by a Volterra series, derives the singular
//! integration kernels from it, and evaluates canonical and renormalized
//! models on spacetime grids.

pub mod algebra;
pub mod expr;
pub mod grid;
pub mod models;
pub mod multi;
pub mod parametrix;
pub mod renorm;
pub mod rules;
pub mod symfun;
pub mod trees;

use num::BigRational;

/// Exact scalar used throughout the symbolic half.
pub type Rat = BigRational;

/// A spacetime point `(x0, x1)` with `x1` understood modulo `2π`.
pub type Point = (f64, f64);

/// Torus circumference. All spatial coefficients are `2π`-periodic.
pub const TORUS_LEN: f64 = std::f64::consts::TAU;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid equation spec: {0}")]
    Spec(String),
    #[error("unknown noise index {0}")]
    UnknownNoise(u8),
    #[error("unknown operator sort {0}")]
    UnknownSort(u8),
    #[error("{0} is not of product form (the root carries a noise)")]
    NotProductForm(String),
    #[error("tree {0} is outside the expected space: {1}")]
    OutsideSpace(String, String),
    #[error("preparation-map hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Parses an exact rational from `"p/q"`, `"p"` or a decimal like `"-1.5"`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    use num::{BigInt, FromPrimitive};
    let s = s.trim();
    if let Ok(r) = s.parse::<Rat>() {
        return Ok(r);
    }
    if let Some((int, frac)) = s.split_once('.') {
        let digits = frac.len() as u32;
        let scale = BigInt::from(10u32).pow(digits);
        let int_part: BigInt = if int.is_empty() || int == "-" {
            BigInt::from(0)
        } else {
            int.parse()
                .map_err(|_| Error::Parse { pos: 0, msg: format!("bad rational {s:?}") })?
        };
        let neg = int.starts_with('-');
        let frac_part: BigInt = frac
            .parse()
            .map_err(|_| Error::Parse { pos: 0, msg: format!("bad rational {s:?}") })?;
        let num = int_part * &scale + if neg { -frac_part } else { frac_part };
        return Ok(Rat::new(num, scale));
    }
    if let Ok(f) = s.parse::<f64>() {
        return Rat::from_f64(f).ok_or_else(|| Error::Parse { pos: 0, msg: format!("bad rational {s:?}") });
    }
    Err(Error::Parse { pos: 0, msg: format!("bad rational {s:?}") })
}

/// Exact conversion of an `f64` to its dyadic rational value.
pub fn rat_from_f64(x: f64) -> Rat {
    num::FromPrimitive::from_f64(x).expect("finite float")
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    use num::ToPrimitive;
    r.to_f64().expect("rational fits in f64 range")
}
