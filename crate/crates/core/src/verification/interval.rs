use rand::Rng;
use serde::{Deserialize, Serialize};

use super::VerificationError;
use crate::policy::{Activation, PolicyNetwork};

/// Axis-aligned box `[lo, hi]` in observation (or output) coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, VerificationError> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn point(x: &[f64]) -> Self {
        Self { lo: x.to_vec(), hi: x.to_vec() }
    }

    pub fn validate(&self) -> Result<(), VerificationError> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(VerificationError::InvalidBox("lo/hi lengths differ or are empty".into()));
        }
        for (i, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(l.is_finite() && h.is_finite()) {
                return Err(VerificationError::InvalidBox(format!("non-finite bound in dimension {i}")));
            }
            if l > h {
                return Err(VerificationError::InvalidBox(format!("lo > hi in dimension {i}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| other.lo[i] >= self.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Lebesgue measure over the dimensions where `reference` has positive
    /// width (degenerate dimensions are ignored).
    pub fn measure_relative_to(&self, reference: &IntervalBox) -> f64 {
        (0..self.dim())
            .filter(|&i| reference.width(i) > 0.0)
            .map(|i| self.width(i) / reference.width(i))
            .product()
    }

    /// True when the interiors intersect (touching faces do not count).
    pub fn interiors_overlap(&self, other: &IntervalBox) -> bool {
        (0..self.dim()).all(|i| {
            if self.width(i) == 0.0 || other.width(i) == 0.0 {
                self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i]
            } else {
                self.lo[i] < other.hi[i] && other.lo[i] < self.hi[i]
            }
        })
    }

    pub fn split(&self, dim: usize) -> (IntervalBox, IntervalBox) {
        let mid = 0.5 * (self.lo[dim] + self.hi[dim]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[dim] = mid;
        right.lo[dim] = mid;
        (left, right)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
            .collect()
    }

    /// Sub-box over the given coordinates.
    pub fn project(&self, dims: &[usize]) -> IntervalBox {
        IntervalBox {
            lo: dims.iter().map(|&d| self.lo[d]).collect(),
            hi: dims.iter().map(|&d| self.hi[d]).collect(),
        }
    }
}

/// One output constraint: safe iff `c . a + b >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfplane {
    pub c: Vec<f64>,
    pub b: f64,
}

/// Conjunction of halfplanes over the network outputs `a = [v1, w3]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputProperty {
    pub halfplanes: Vec<Halfplane>,
}

impl OutputProperty {
    pub fn new(halfplanes: Vec<Halfplane>) -> Result<Self, VerificationError> {
        let p = Self { halfplanes };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), VerificationError> {
        if self.halfplanes.is_empty() {
            return Err(VerificationError::InvalidProperty("no halfplanes".into()));
        }
        for (i, h) in self.halfplanes.iter().enumerate() {
            if h.c.len() != crate::policy::OUTPUT_DIM {
                return Err(VerificationError::InvalidProperty(format!(
                    "halfplane {i} has {} coefficients",
                    h.c.len()
                )));
            }
            if !(h.b.is_finite() && h.c.iter().all(|v| v.is_finite())) {
                return Err(VerificationError::InvalidProperty(format!("halfplane {i} is not finite")));
            }
        }
        Ok(())
    }

    /// `w3 <= bound`
    pub fn yaw_at_most(bound: f64) -> Self {
        Self { halfplanes: vec![Halfplane { c: vec![0.0, -1.0], b: bound }] }
    }

    /// `w3 >= bound`
    pub fn yaw_at_least(bound: f64) -> Self {
        Self { halfplanes: vec![Halfplane { c: vec![0.0, 1.0], b: -bound }] }
    }

    /// `v1 <= bound`
    pub fn surge_at_most(bound: f64) -> Self {
        Self { halfplanes: vec![Halfplane { c: vec![-1.0, 0.0], b: bound }] }
    }

    /// Smallest constraint value; the property holds iff it is `>= 0`.
    pub fn margin(&self, a: &[f64]) -> f64 {
        self.halfplanes
            .iter()
            .map(|h| h.c.iter().zip(a).map(|(c, v)| c * v).sum::<f64>() + h.b)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn holds(&self, a: &[f64]) -> bool {
        self.margin(a) >= 0.0
    }

    /// Every output in the box satisfies every halfplane.
    pub fn certified_by(&self, out: &IntervalBox) -> bool {
        self.halfplanes.iter().all(|h| halfplane_range(h, out).0 >= 0.0)
    }

    /// Every output in the box violates at least one halfplane.
    pub fn refuted_by(&self, out: &IntervalBox) -> bool {
        self.halfplanes.iter().any(|h| halfplane_range(h, out).1 < 0.0)
    }
}

/// Range of `c . a + b` over a box.
fn halfplane_range(h: &Halfplane, out: &IntervalBox) -> (f64, f64) {
    let mut lo = h.b;
    let mut hi = h.b;
    for (i, c) in h.c.iter().enumerate() {
        let (x, y) = (c * out.lo[i], c * out.hi[i]);
        lo += x.min(y);
        hi += x.max(y);
    }
    (lo, hi)
}

fn widen(lo: f64, hi: f64, slack: f64) -> (f64, f64) {
    (lo - slack, hi + slack)
}

/// Sound interval bound propagation through the network including the
/// tanh output head. Affine layers split weights by sign; activations and the
/// output head are monotone so they are applied to the endpoints. Bounds are
/// widened by a floating-point error allowance so that concrete evaluations
/// always land inside.
pub fn interval_forward(net: &PolicyNetwork, input: &IntervalBox) -> Result<IntervalBox, VerificationError> {
    if input.dim() != net.input_dim {
        return Err(VerificationError::DimensionMismatch { expected: net.input_dim, got: input.dim() });
    }
    let eps = f64::EPSILON;
    let (mut lo, mut hi) = match &net.normalization {
        None => (input.lo.clone(), input.hi.clone()),
        Some(n) => {
            let mut lo = Vec::with_capacity(input.dim());
            let mut hi = Vec::with_capacity(input.dim());
            for i in 0..input.dim() {
                let a = (input.lo[i] - n.offset[i]) * n.scale[i];
                let b = (input.hi[i] - n.offset[i]) * n.scale[i];
                let slack = 4.0 * eps * a.abs().max(b.abs());
                let (l, h) = widen(a.min(b), a.max(b), slack);
                lo.push(l);
                hi.push(h);
            }
            (lo, hi)
        }
    };

    for layer in &net.layers {
        let mut next_lo = Vec::with_capacity(layer.rows);
        let mut next_hi = Vec::with_capacity(layer.rows);
        for (row, bias) in layer.weights.chunks_exact(layer.cols).zip(&layer.bias) {
            let mut l = *bias;
            let mut h = *bias;
            let mut magnitude = bias.abs();
            for (j, w) in row.iter().enumerate() {
                if *w >= 0.0 {
                    l += w * lo[j];
                    h += w * hi[j];
                } else {
                    l += w * hi[j];
                    h += w * lo[j];
                }
                magnitude += w.abs() * lo[j].abs().max(hi[j].abs());
            }
            // dot-product rounding error bound, gamma_n * sum |w x|
            let slack = (layer.cols as f64 + 2.0) * eps * magnitude;
            let (l, h) = widen(l, h, slack);
            let (l, h) = match layer.activation {
                Activation::Linear => (l, h),
                Activation::Relu => (l.max(0.0), h.max(0.0)),
                Activation::Tanh => {
                    let (a, b) = (l.tanh(), h.tanh());
                    ((a - 2.0 * eps).max(-1.0), (b + 2.0 * eps).min(1.0))
                }
            };
            next_lo.push(l);
            next_hi.push(h);
        }
        lo = next_lo;
        hi = next_hi;
    }

    let head_lo = net.ranges.scale([lo[0], lo[1]]);
    let head_hi = net.ranges.scale([hi[0], hi[1]]);
    let r = net.ranges;
    let spans = [r.v1[1] - r.v1[0], r.w3[1] - r.w3[0]];
    let mags = [r.v1[0].abs().max(r.v1[1].abs()), r.w3[0].abs().max(r.w3[1].abs())];
    let mut out_lo = Vec::with_capacity(2);
    let mut out_hi = Vec::with_capacity(2);
    for i in 0..2 {
        let slack = 8.0 * eps * (mags[i] + spans[i]);
        out_lo.push(head_lo[i] - slack);
        out_hi.push(head_hi[i] + slack);
    }
    Ok(IntervalBox { lo: out_lo, hi: out_hi })
}

/// Outcome of checking a property on one input box.
#[derive(Debug, Clone, PartialEq)]
pub enum BoxVerdict {
    CertifiedSafe,
    CounterexampleFound(Vec<f64>),
    Unknown,
}

/// Certifies with interval bounds; otherwise tests the midpoint and
/// `samples - 1` seeded random points for a violation.
pub fn check_box<R: Rng>(
    net: &PolicyNetwork,
    input: &IntervalBox,
    prop: &OutputProperty,
    samples: usize,
    rng: &mut R,
) -> Result<BoxVerdict, VerificationError> {
    let out = interval_forward(net, input)?;
    if prop.certified_by(&out) {
        return Ok(BoxVerdict::CertifiedSafe);
    }
    let mid = input.midpoint();
    if violates(net, prop, &mid)? {
        return Ok(BoxVerdict::CounterexampleFound(mid));
    }
    for _ in 1..samples {
        let x = input.sample(rng);
        if violates(net, prop, &x)? {
            return Ok(BoxVerdict::CounterexampleFound(x));
        }
    }
    Ok(BoxVerdict::Unknown)
}

pub(crate) fn violates(net: &PolicyNetwork, prop: &OutputProperty, x: &[f64]) -> Result<bool, VerificationError> {
    let a = net.forward(x).map_err(VerificationError::Network)?;
    Ok(!prop.holds(&a.as_array()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Layer, OutputRanges};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_layer(w: Vec<f64>, b: Vec<f64>, act: Activation, in_dim: usize) -> PolicyNetwork {
        PolicyNetwork::new(
            in_dim,
            OutputRanges::default(),
            None,
            vec![Layer { rows: 2, cols: in_dim, weights: w, bias: b, activation: act }],
        )
        .unwrap()
    }

    /// Interval through hidden layers only (no output head), for the
    /// elementwise examples.
    fn hidden_bounds(net: &PolicyNetwork, b: &IntervalBox) -> IntervalBox {
        let head = interval_forward(net, b).unwrap();
        // invert the monotone head on each endpoint
        let r = net.ranges;
        let inv = |range: [f64; 2], y: f64| {
            let t = ((y - range[0]) / (range[1] - range[0]) * 2.0 - 1.0).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
            t.atanh()
        };
        IntervalBox {
            lo: vec![inv(r.v1, head.lo[0]), inv(r.w3, head.lo[1])],
            hi: vec![inv(r.v1, head.hi[0]), inv(r.w3, head.hi[1])],
        }
    }

    #[test]
    fn identity_layer_preserves_box() {
        let net = single_layer(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Linear, 2);
        let b = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let h = hidden_bounds(&net, &b);
        for i in 0..2 {
            assert!((h.lo[i] - 0.0).abs() < 1e-9 && (h.hi[i] - 1.0).abs() < 1e-9, "{h:?}");
        }
    }

    #[test]
    fn relu_clamps_lower_endpoint() {
        let net = single_layer(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Relu, 2);
        let b = IntervalBox::new(vec![-1.0, -1.0], vec![2.0, 2.0]).unwrap();
        let h = hidden_bounds(&net, &b);
        assert!(h.lo[0].abs() < 1e-9 && (h.hi[0] - 2.0).abs() < 1e-9, "{h:?}");
    }

    #[test]
    fn dimension_mismatch() {
        let net = single_layer(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Relu, 2);
        let b = IntervalBox::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(interval_forward(&net, &b), Err(VerificationError::DimensionMismatch { .. })));
    }

    #[test]
    fn monte_carlo_enclosure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..5 {
            let act = [Activation::Relu, Activation::Tanh][k % 2];
            let net = PolicyNetwork::random(&mut rng, 4, &[16, 8], act);
            let lo: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..0.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.0..2.0)).collect();
            let b = IntervalBox::new(lo, hi).unwrap();
            let out = interval_forward(&net, &b).unwrap();
            for _ in 0..20_000 {
                let a = net.forward(&b.sample(&mut rng)).unwrap().as_array();
                assert!(out.contains(&a));
            }
        }
    }

    #[test]
    fn check_box_verdicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = IntervalBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        // constant output w3 = tanh(-2) * 1.5 < 0 everywhere
        let negative = single_layer(vec![0.0; 4], vec![0.0, -2.0], Activation::Linear, 2);
        let prop = OutputProperty::yaw_at_most(0.0);
        assert_eq!(check_box(&negative, &b, &prop, 10, &mut rng).unwrap(), BoxVerdict::CertifiedSafe);
        let positive = single_layer(vec![0.0; 4], vec![0.0, 2.0], Activation::Linear, 2);
        assert_eq!(
            check_box(&positive, &b, &prop, 10, &mut rng).unwrap(),
            BoxVerdict::CounterexampleFound(vec![0.0, 0.0])
        );
        // w3 pre-activation = x0 - 0.999: violations only in a thin sliver
        // x0 > 0.999 that the midpoint and a handful of samples miss.
        let threshold = single_layer(vec![0.0, 0.0, 1.0, 0.0], vec![0.0, -0.999], Activation::Linear, 2);
        assert_eq!(check_box(&threshold, &b, &prop, 3, &mut rng).unwrap(), BoxVerdict::Unknown);
    }

    #[test]
    fn property_helpers() {
        assert!(OutputProperty::yaw_at_most(0.0).holds(&[1.0, -0.1]));
        assert!(!OutputProperty::yaw_at_most(0.0).holds(&[1.0, 0.1]));
        assert!(OutputProperty::yaw_at_least(0.0).holds(&[1.0, 0.1]));
        assert!(OutputProperty::surge_at_most(0.2).holds(&[0.1, 5.0]));
        assert!(!OutputProperty::surge_at_most(0.2).holds(&[0.3, 5.0]));
        assert!(OutputProperty::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn enclosure_is_monotone(seed in 0u64..500, shrink in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = PolicyNetwork::random(&mut rng, 3, &[8], Activation::Tanh);
            let outer = IntervalBox::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
            let inner = IntervalBox::new(vec![-1.0 + shrink; 3], vec![1.0 - shrink * 0.5; 3]).unwrap();
            let a = interval_forward(&net, &inner).unwrap();
            let b = interval_forward(&net, &outer).unwrap();
            prop_assert!(b.contains_box(&a));
        }
    }
}
