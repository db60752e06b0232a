//! GP predictive distributions against a dense linear-solve oracle built on
//! nalgebra's LU decomposition — an independent route to kᵀC⁻¹x and
//! k(t̂,t̂) − kᵀC⁻¹k.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use motionseg::gp::{kernel_eval, GpClassModel, SegmentData};
use motionseg::rng::stream;
use motionseg::types::KernelParams;

struct DenseOracle {
    ts: Vec<f64>,
    xs: Vec<Vec<f64>>,
    kernel: KernelParams,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseOracle {
    fn new(ts: Vec<f64>, xs: Vec<Vec<f64>>, kernel: KernelParams) -> Self {
        let n = ts.len();
        let mut c = DMatrix::zeros(n, n);
        for p in 0..n {
            for q in 0..n {
                c[(p, q)] = kernel_eval(ts[p], ts[q], &kernel)
                    + if p == q { kernel.noise_var } else { 0.0 };
            }
        }
        DenseOracle { ts, xs, kernel, lu: c.lu() }
    }

    fn predict(&self, t_hat: f64, dim: usize) -> (f64, f64) {
        let n = self.ts.len();
        let k = DVector::from_fn(n, |p, _| kernel_eval(self.ts[p], t_hat, &self.kernel));
        let x = DVector::from_row_slice(&self.xs[dim]);
        let solved = self.lu.solve(&k).expect("oracle covariance solvable");
        let mean = solved.dot(&x);
        let var = kernel_eval(t_hat, t_hat, &self.kernel) - k.dot(&solved);
        (mean, var)
    }
}

#[test]
fn predictive_moments_match_dense_solve() {
    let started = std::time::Instant::now();
    let mut rng = stream(2024, &[]);
    for instance in 0..100u64 {
        let kernel = KernelParams {
            theta0: 0.5 + rng.gen::<f64>(),
            theta1: 0.2 + rng.gen::<f64>(),
            theta2: rng.gen::<f64>() * 0.5,
            theta3: rng.gen::<f64>() * 20.0,
            noise_var: 0.02 + rng.gen::<f64>() * 0.5,
        };
        let dims = 1 + (instance % 3) as usize;
        let n_points = 1 + rng.gen_range(0..50usize);

        // build as whole segments so the within-segment timesteps pool the
        // way the model sees them
        let mut model = GpClassModel::new(kernel, dims, 50, 1e-12, 7 + instance);
        let mut ts: Vec<f64> = Vec::new();
        let mut xs = vec![Vec::new(); dims];
        let mut remaining = n_points;
        while remaining > 0 {
            let len = rng.gen_range(1..=remaining.min(12));
            let mut values = Vec::with_capacity(len * dims);
            for t in 0..len {
                ts.push(t as f64);
                for x in xs.iter_mut() {
                    let v = rng.gen::<f64>() * 4.0 - 2.0;
                    values.push(v);
                    x.push(v);
                }
            }
            model.add_segment(SegmentData { len, values });
            remaining -= len;
        }
        let oracle = DenseOracle::new(ts, xs, kernel);

        for probe in 0..8 {
            let t_hat = probe as f64 * 1.5;
            for d in 0..dims {
                let (mean, var) = model.predict(t_hat, d);
                let (mean_o, var_o) = oracle.predict(t_hat, d);
                // data is O(1); means below 1e-3 are cancellation-dominated,
                // so the relative error gets a scale floor there
                let mean_rel = (mean - mean_o).abs() / mean_o.abs().max(1e-3);
                let var_rel = (var - var_o.max(1e-12)).abs() / var_o.abs().max(1e-3);
                assert!(
                    mean_rel < 1e-8,
                    "instance {instance}, t̂={t_hat}, dim {d}: mean {mean} vs {mean_o}"
                );
                assert!(
                    var_rel < 1e-8,
                    "instance {instance}, t̂={t_hat}, dim {d}: var {var} vs {var_o}"
                );
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "oracle comparison took {elapsed:?}");
}
