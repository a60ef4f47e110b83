use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;

/// Exact rational scalar used for radii and function values.
pub type Q = Ratio<i64>;

/// A dyadic rational `num / 2^exp` in lowest terms (odd numerator, or 0).
///
/// Distances in the standard ultrametric are always of this form, and
/// the distance dump format prints them as `<num>/2^<exp>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i64,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: i64, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.normalize();
        d
    }

    /// `2^(-k)`.
    pub fn pow2_neg(k: u32) -> Self {
        Dyadic { num: 1, exp: k }
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        while self.num % 2 == 0 && self.exp > 0 {
            self.num /= 2;
            self.exp -= 1;
        }
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_ratio(&self) -> Q {
        Q::new(self.num, 1i64 << self.exp)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        // compare num1/2^e1 with num2/2^e2 via cross multiplication
        let e = self.exp.max(other.exp);
        let a = (self.num as i128) << (e - self.exp);
        let b = (other.num as i128) << (e - other.exp);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.exp)
    }
}

/// Compare a dyadic with a general rational without leaving integers.
pub fn dyadic_lt_q(d: Dyadic, q: Q) -> bool {
    d.to_ratio() < q
}

pub fn dyadic_ge_q(d: Dyadic, q: Q) -> bool {
    d.to_ratio() >= q
}
