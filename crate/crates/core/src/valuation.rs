//! Variable valuations and variable subsets.
//!
//! A valuation is a point in `Q^|X|`: values are stored in the model's fixed
//! variable order, and names are resolved through the owning model.

use std::fmt;
use std::ops::Index;

use crate::rational::Rational;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Valuation(Vec<Rational>);

impl Valuation {
    pub fn zero(vars: usize) -> Self {
        Valuation(vec![Rational::zero(); vars])
    }

    pub fn from_values(values: Vec<Rational>) -> Self {
        Valuation(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, var: usize) -> &Rational {
        &self.0[var]
    }

    pub fn set(&mut self, var: usize, value: Rational) {
        self.0[var] = value;
    }

    pub fn values(&self) -> &[Rational] {
        &self.0
    }

    /// `self + rates * delay`.
    pub fn advance(&self, rates: &[Rational], delay: &Rational) -> Valuation {
        debug_assert_eq!(rates.len(), self.0.len());
        Valuation(
            self.0
                .iter()
                .zip(rates)
                .map(|(v, r)| if r.is_zero() { v.clone() } else { v + &(r * delay) })
                .collect(),
        )
    }

    /// `self[vars := 0]`.
    pub fn reset(&mut self, vars: VarSet) {
        for i in vars.iter() {
            self.0[i] = Rational::zero();
        }
    }

    /// `self[vars := other]`.
    pub fn overwrite_from(&mut self, vars: VarSet, other: &Valuation) {
        for i in vars.iter() {
            self.0[i] = other.0[i].clone();
        }
    }

    /// Pairs each value with the matching name.
    pub fn named<'a>(&'a self, names: &'a [String]) -> impl Iterator<Item = (&'a str, &'a Rational)> {
        names.iter().map(String::as_str).zip(self.0.iter())
    }
}

impl Index<usize> for Valuation {
    type Output = Rational;
    fn index(&self, var: usize) -> &Rational {
        &self.0[var]
    }
}

impl fmt::Debug for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// A subset of at most 64 variables, by index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct VarSet(u64);

impl VarSet {
    pub const MAX_VARS: usize = 64;

    pub fn empty() -> Self {
        VarSet(0)
    }

    pub fn all(vars: usize) -> Self {
        if vars >= 64 {
            VarSet(u64::MAX)
        } else {
            VarSet((1u64 << vars) - 1)
        }
    }

    pub fn singleton(var: usize) -> Self {
        VarSet(1 << var)
    }

    pub fn insert(&mut self, var: usize) {
        self.0 |= 1 << var;
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0 & (1 << var) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |i| self.0 & (1 << i) != 0)
    }

    pub fn bits(&self) -> u64 {
        self.0
    }
}

impl FromIterator<usize> for VarSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut set = VarSet::empty();
        for v in iter {
            set.insert(v);
        }
        set
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn advance_and_reset() {
        let v = Valuation::from_values(vec![q(1, 2), q(0, 1)]);
        let w = v.advance(&[q(1, 1), q(0, 1)], &q(1, 4));
        assert_eq!(w.values(), &[q(3, 4), q(0, 1)]);
        let mut w = w;
        w.reset(VarSet::singleton(0));
        assert_eq!(w[0], q(0, 1));
    }

    #[test]
    fn varset_ops() {
        let s: VarSet = [0, 2].into_iter().collect();
        assert!(s.contains(2) && !s.contains(1));
        assert_eq!(s.len(), 2);
        assert_eq!(VarSet::all(3).iter().collect::<Vec<_>>(), vec![0, 1, 2]);
    }
}
