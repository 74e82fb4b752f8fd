//! Central-difference gradient verification.

/// Parameter containers addressable by a flat coordinate.
pub trait FlatParams: Clone {
    fn param_count(&self) -> usize;
    fn get(&self, index: usize) -> f64;
    fn set(&mut self, index: usize, value: f64);
    fn label(&self, index: usize) -> String;
}

impl FlatParams for crate::neural::mlp::Mlp {
    fn param_count(&self) -> usize {
        crate::neural::mlp::Mlp::param_count(self)
    }
    fn get(&self, index: usize) -> f64 {
        self.param(index)
    }
    fn set(&mut self, index: usize, value: f64) {
        *self.param_mut(index) = value;
    }
    fn label(&self, index: usize) -> String {
        self.param_label(index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub label: String,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.entries.iter().map(|e| e.relative_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.relative_error < self.tolerance)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries.iter().filter(|e| e.relative_error >= self.tolerance)
    }
}

/// Denominator floor keeps near-zero gradients from dominating the relative error.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compare `analytic` (shaped like `params`) against central differences of
/// `loss` at the given coordinates.
pub fn gradient_check<P, F>(
    params: &P,
    analytic: &P,
    coordinates: &[usize],
    step: f64,
    tolerance: f64,
    loss: F,
) -> GradCheckReport
where
    P: FlatParams,
    F: Fn(&P) -> f64,
{
    let mut probe = params.clone();
    let entries = coordinates
        .iter()
        .map(|&i| {
            let original = params.get(i);
            probe.set(i, original + step);
            let plus = loss(&probe);
            probe.set(i, original - step);
            let minus = loss(&probe);
            probe.set(i, original);
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(i);
            GradCheckEntry {
                label: params.label(i),
                analytic: a,
                numeric,
                relative_error: relative_error(a, numeric),
            }
        })
        .collect();
    GradCheckReport { entries, tolerance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::Mlp;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_sq_loss(mlp: &Mlp, x: &Array2<f64>) -> f64 {
        let y = mlp.infer(x.view()).unwrap();
        0.5 * y.iter().map(|v| v * v).sum::<f64>()
    }

    fn analytic(mlp: &Mlp, x: &Array2<f64>) -> Mlp {
        let (y, cache) = mlp.forward(x.view()).unwrap();
        mlp.backward(&cache, y.view()).unwrap().0
    }

    #[test]
    fn known_gradient_is_exact() {
        // f(w) = 0.5 * (w x)^2 for a single linear unit.
        let mut mlp = Mlp::new(&[1, 1], &mut ChaCha8Rng::seed_from_u64(0));
        mlp.layers[0].weights[[0, 0]] = 0.8;
        let x = Array2::from_elem((1, 1), 1.5);
        let g = analytic(&mlp, &x);
        let report = gradient_check(&mlp, &g, &[0, 1], 1e-5, 1e-7, |m| half_sq_loss(m, &x));
        assert!(report.passed(), "{report:?}");
        assert!((g.param(0) - 0.8 * 1.5 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn corrupted_backward_is_flagged() {
        let mlp = Mlp::new(&[3, 4, 2], &mut ChaCha8Rng::seed_from_u64(1));
        let x = Array2::from_shape_fn((2, 3), |(i, j)| (i as f64 - j as f64) * 0.4);
        let mut g = analytic(&mlp, &x);
        *g.param_mut(0) *= 1.5;
        *g.param_mut(0) += 0.1;
        let report = gradient_check(&mlp, &g, &[0, 5], 1e-5, 1e-4, |m| half_sq_loss(m, &x));
        assert!(!report.passed());
        assert_eq!(report.failures().count(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn backward_agrees_with_finite_differences(
            sizes in prop::collection::vec(1usize..7, 2..5),
            batch in 1usize..4,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mlp = Mlp::new(&sizes, &mut rng);
            let x = Array2::from_shape_fn((batch, sizes[0]), |(i, j)| ((seed as f64) * 1e-3 + i as f64 * 0.7 - j as f64 * 0.3).sin());
            let g = analytic(&mlp, &x);
            let coords: Vec<usize> = (0..mlp.param_count()).collect();
            let report = gradient_check(&mlp, &g, &coords, 1e-5, 1e-4, |m| half_sq_loss(m, &x));
            prop_assert!(report.passed(), "max rel error {}", report.max_relative_error());
        }
    }
}
