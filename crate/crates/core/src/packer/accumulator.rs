use serde::{Deserialize, Serialize};

use crate::order::Order;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn starting_at(x: f64) -> Self {
        CompensatedSum { sum: x, comp: 0.0 }
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Running sum and compensation; their exact sum carries the digits
    /// that [`value`](Self::value) rounds away.
    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Streaming moments `M_alpha(n) = sum_k r_k^alpha` and the pore volume
/// `Phi_n = L^d - V_d M_d(n)`, updated in O(|alphas|) per insertion.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    orders: Vec<Order>,
    sums: Vec<CompensatedSum>,
    volume_sum: CompensatedSum,
    pore_sum: CompensatedSum,
    dim: u32,
    unit_volume: f64,
    count: u64,
}

impl MomentAccumulator {
    pub fn new(orders: Vec<Order>, dim: u32, total_volume: f64, unit_volume: f64) -> Self {
        let sums = vec![CompensatedSum::default(); orders.len()];
        MomentAccumulator {
            orders,
            sums,
            volume_sum: CompensatedSum::default(),
            pore_sum: CompensatedSum::starting_at(total_volume),
            dim,
            unit_volume,
            count: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, r: f64) {
        for (order, sum) in self.orders.iter().zip(&mut self.sums) {
            sum.add(order.pow(r));
        }
        let v = r.powi(self.dim as i32);
        self.volume_sum.add(v);
        self.pore_sum.add(-self.unit_volume * v);
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    /// `M_alpha(n)`; order zero is the sphere count even if not tracked.
    pub fn moment(&self, order: Order) -> Option<f64> {
        if order == Order::ZERO {
            return Some(self.count as f64);
        }
        if order == Order::int(self.dim) {
            return Some(self.volume_sum.value());
        }
        self.orders
            .iter()
            .position(|o| *o == order)
            .map(|i| self.sums[i].value())
    }

    pub fn values(&self) -> Vec<(Order, f64)> {
        self.orders
            .iter()
            .zip(&self.sums)
            .map(|(o, s)| (*o, s.value()))
            .collect()
    }

    pub fn pore(&self) -> f64 {
        self.pore_sum.value()
    }

    /// [`pore`](Self::pore) as an unevaluated sum of two floats. Late
    /// spheres can be smaller than one ulp of the rounded value; this pair
    /// still decreases strictly with each of them.
    pub fn pore_parts(&self) -> (f64, f64) {
        self.pore_sum.parts()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut acc = CompensatedSum::default();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-12)).abs() < 1e-20);
    }

    #[test]
    fn accumulator_tracks_pore_and_count() {
        let mut acc = MomentAccumulator::new(
            vec![Order::ONE, Order::int(2)],
            2,
            100.0,
            std::f64::consts::PI,
        );
        acc.push(1.0);
        acc.push(2.0);
        assert_eq!(acc.moment(Order::ZERO), Some(2.0));
        assert_eq!(acc.moment(Order::ONE), Some(3.0));
        assert_eq!(acc.moment(Order::int(2)), Some(5.0));
        assert!((acc.pore() - (100.0 - 5.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert_eq!(acc.moment(Order::int(3)), None);
    }
}
