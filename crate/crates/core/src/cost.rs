//! Closed-form cost algebra for encoder cascades.
//!
//! Every formula is generic over [`Scalar`], so the same code runs on `f64`
//! and on exact [`BigRational`] values.
//!
//! * lifetime image-encoding cost: `n·t_s + f·n·Σ t_i`
//! * two-level lifetime speedup over the uncascaded large tier:
//!   `t_1 / (t_s + f·t_1)`
//! * per-query speedup of a deep cascade over the two-level cascade that
//!   sends all `m_1` candidates straight to the last tier:
//!   `m_1·t_r / Σ m_i·t_i`

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num};

use crate::engine::CostLedger;
use crate::error::{Error, Result};

pub trait Scalar: Num + Clone + PartialOrd + FromPrimitive + fmt::Debug {}

impl<T: Num + Clone + PartialOrd + FromPrimitive + fmt::Debug> Scalar for T {}

/// Exact binary value of a finite `f64`.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite cost value")
}

/// `numer / denom` as an exact rational.
pub fn ratio(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

fn from_count<T: Scalar>(n: u64) -> T {
    T::from_u64(n).expect("count representable")
}

/// Cost model inputs. `t = [t_s, t_1, …, t_r]`; `m = [m_1, …, m_r]` may be
/// empty when only the lifetime cost is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct CostParams<T = f64> {
    pub n: u64,
    pub f: T,
    pub t: Vec<T>,
    pub m: Vec<usize>,
}

impl<T: Scalar> CostParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_fraction(&self.f)?;
        match self.t.first() {
            None => return Err(Error::config("cost list is empty")),
            Some(t_s) if *t_s <= T::zero() => {
                return Err(Error::config("tier costs must be positive"))
            }
            _ => {}
        }
        if !self.t.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("tier costs must be strictly increasing"));
        }
        if !self.m.is_empty() {
            if self.m.len() + 1 != self.t.len() {
                return Err(Error::config(format!(
                    "{} candidate counts for {} runtime tiers",
                    self.m.len(),
                    self.t.len() - 1
                )));
            }
            check_decreasing(&self.m)?;
        }
        Ok(())
    }
}

fn check_fraction<T: Scalar>(f: &T) -> Result<()> {
    if !(*f > T::zero() && *f <= T::one()) {
        return Err(Error::config(format!("return fraction {f:?} outside (0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_decreasing(m: &[usize]) -> Result<()> {
    if m.contains(&0) {
        return Err(Error::config("candidate counts must be positive"));
    }
    if !m.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::config(format!(
            "candidate counts {m:?} are not strictly decreasing"
        )));
    }
    Ok(())
}

/// `n·t_s + f·n·Σ_{i≥1} t_i`.
pub fn lifetime_cost<T: Scalar>(params: &CostParams<T>) -> Result<T> {
    params.validate()?;
    let n: T = from_count(params.n);
    let runtime = params.t[1..]
        .iter()
        .cloned()
        .fold(T::zero(), |acc, t| acc + t);
    Ok(n.clone() * params.t[0].clone() + params.f.clone() * n * runtime)
}

/// Lifetime cost ratio of `[I_1]` over `[I_s, I_1]`: `t_1 / (t_s + f·t_1)`.
/// The cascade pays off exactly when this exceeds 1.
pub fn two_level_speedup<T: Scalar>(t_s: T, t_1: T, f: T) -> Result<T> {
    if t_s <= T::zero() || t_1 <= T::zero() {
        return Err(Error::config("tier costs must be positive"));
    }
    if t_s >= t_1 {
        return Err(Error::config("small tier must be cheaper than large tier"));
    }
    check_fraction(&f)?;
    let denom = t_s + f * t_1.clone();
    Ok(t_1 / denom)
}

/// `m_1·t_r / Σ m_i·t_i` over runtime tiers `t = [t_1, …, t_r]`.
pub fn query_speedup<T: Scalar>(m: &[usize], t: &[T]) -> Result<T> {
    if m.is_empty() || m.len() != t.len() {
        return Err(Error::config(format!(
            "need one cost per candidate count, got {} and {}",
            m.len(),
            t.len()
        )));
    }
    check_decreasing(m)?;
    if t.iter().any(|x| *x <= T::zero()) {
        return Err(Error::config("tier costs must be positive"));
    }
    let weighted = m
        .iter()
        .zip(t)
        .fold(T::zero(), |acc, (&mi, ti)| acc + from_count::<T>(mi as u64) * ti.clone());
    Ok(from_count::<T>(m[0] as u64) * t[t.len() - 1].clone() / weighted)
}

/// Candidate count for the middle tier of a three-tier cascade that hits a
/// target query speedup `s`: `m_1·(1/s − t_1/t_2)`, rounded to nearest and
/// clamped to `[1, m_1 − 1]`.
pub fn solve_intermediate_m(m_1: usize, target: f64, t_1: f64, t_2: f64) -> Result<usize> {
    if !(target > 1.0 && target.is_finite()) {
        return Err(Error::config(format!("target speedup {target} must exceed 1")));
    }
    if !(t_1 > 0.0 && t_2 > t_1) {
        return Err(Error::config("need 0 < t_1 < t_2"));
    }
    if m_1 < 2 {
        return Err(Error::Infeasible(format!(
            "m_1 = {m_1} leaves no room for an intermediate level"
        )));
    }
    let raw = m_1 as f64 * (1.0 / target - t_1 / t_2);
    if raw <= 0.0 {
        return Err(Error::Infeasible(format!(
            "speedup {target} needs m_2 = {raw:.3} <= 0"
        )));
    }
    Ok((raw.round() as usize).clamp(1, m_1 - 1))
}

/// Realized lifetime return fraction `|⋃ S_q| / n`.
pub fn estimate_f(ledger: &CostLedger) -> Result<f64> {
    if ledger.n() == 0 {
        return Err(Error::config("empty collection has no return fraction"));
    }
    Ok(ledger.touched_union_len() as f64 / ledger.n() as f64)
}

/// `true` iff the two-level cascade is cheaper over its lifetime.
pub fn cascade_is_cheaper<T: Scalar>(t_s: &T, t_1: &T, f: &T) -> bool {
    t_s.clone() + f.clone() * t_1.clone() < t_1.clone()
}
