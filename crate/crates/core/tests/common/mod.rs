#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use soilres::dataset::{Covariates, EncodedRecord, SoilRecord, SoilType};

pub const MOL_LEVELS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// Log-scale response surface of the printed MARS2 equation.
pub fn log_surface(x: &Covariates) -> f64 {
    let h = |v: f64| v.max(0.0);
    4.958 - 0.8739 * x.st_k + 2.808 * h(0.5 - x.mol) - 0.9058 * h(x.mol - 0.5)
        + 0.739 * h(x.mol - 1.0)
        - 0.2447 * h(x.moist - 5.0)
        + 0.07649 * h(x.moist - 15.0)
        + 105.9 * h(x.uw - 1.005)
        - 119.0 * h(x.uw - 1.014)
        + 12.28 * h(x.uw - 1.099)
        + 2.504 * h(1.663 - x.uw)
}

/// Laboratory-style design: every soil type at every salt level, integer
/// moisture 3..=27 and unit weight over the observed range, lognormal noise
/// of log-scale sd `noise`.
pub fn synthetic(per_cell: usize, noise: f64, seed: u64) -> Vec<EncodedRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for st in SoilType::ALL {
        for mol in MOL_LEVELS {
            for _ in 0..per_cell {
                let moist = rng.random_range(3..=27) as f64;
                let uw = rng.random_range(0.7158..1.92);
                let x = Covariates::new(st, mol, moist, uw);
                let z: f64 = rng.sample(StandardNormal);
                out.push(EncodedRecord {
                    x,
                    er: (log_surface(&x) + noise * z).exp(),
                });
            }
        }
    }
    out
}

/// 864 complete rows.
pub fn synthetic_full(seed: u64) -> Vec<EncodedRecord> {
    synthetic(24, 0.4, seed)
}

pub fn to_records(data: &[EncodedRecord]) -> Vec<SoilRecord> {
    data.iter().map(EncodedRecord::to_soil_record).collect()
}

pub fn write_synthetic_csv(path: &std::path::Path, data: &[EncodedRecord]) {
    let f = std::fs::File::create(path).unwrap();
    soilres::dataset::write_csv(&to_records(data), f).unwrap();
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least squares through the normal equations; `cols` excludes the intercept.
pub fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut x: Vec<Vec<f64>> = vec![vec![1.0; n]];
    x.extend(cols.iter().cloned());
    let p = x.len();
    let xtx: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| dot(&x[i], &x[j])).collect())
        .collect();
    let xty: Vec<f64> = (0..p).map(|i| dot(&x[i], y)).collect();
    let beta = gauss_solve(xtx, xty);
    let rss = (0..n)
        .map(|r| {
            let f: f64 = (0..p).map(|j| beta[j] * x[j][r]).sum();
            (y[r] - f).powi(2)
        })
        .sum();
    (beta, rss)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random design with an intercept column and `k` covariates.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    let beta: Vec<f64> = (0..=k).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            beta[0] + (0..k).map(|j| beta[j + 1] * cols[j][i]).sum::<f64>() + z
        })
        .collect();
    (cols, y)
}

pub fn design_matrix(cols: &[Vec<f64>], n: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(
        n,
        cols.len() + 1,
        |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] },
    )
}

pub fn names(k: usize) -> Vec<String> {
    std::iter::once("(Intercept)".to_string())
        .chain((1..=k).map(|j| format!("x{j}")))
        .collect()
}

/// Largest coefficient gap between the QR path and the normal-equations
/// oracle over `count` random designs.
pub fn ols_oracle_max_diff(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = rng.random_range(10..40);
        let k = rng.random_range(1..6);
        let (cols, y) = random_design(&mut rng, n, k);
        let fit = soilres::linmod::ols_design(&design_matrix(&cols, n), &y, &names(k)).unwrap();
        let (oracle, _) = normal_equations(&cols, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Noiseless `y = 2 + 3 exp(-0.5 moist)` with st_k, mol and uw varying but
/// inactive.
pub fn exp_decay_data() -> Vec<EncodedRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut out = Vec::new();
    for st in SoilType::ALL {
        for mol in MOL_LEVELS {
            for _ in 0..3 {
                let moist = rng.random_range(0.0..10.0);
                let uw = rng.random_range(0.72..1.92);
                let x = Covariates::new(st, mol, moist, uw);
                out.push(EncodedRecord {
                    x,
                    er: 2.0 + 3.0 * (-0.5 * moist).exp(),
                });
            }
        }
    }
    out
}

/// STK-form parameters of [`exp_decay_data`]: b0, b1, st_k, mol, moist, uw.
pub const EXP_DECAY_TRUTH: [f64; 6] = [2.0, 3.0, 0.0, 0.0, -0.5, 0.0];

/// Largest absolute parameter error after fitting [`exp_decay_data`].
pub fn nls_recovery_error() -> f64 {
    use soilres::nlsfit::*;
    let data = exp_decay_data();
    let start = starting_values(&data, NlsForm::Stk).unwrap();
    let opts = NlsOptions {
        tol: 1e-15,
        max_iter: 200,
        ..NlsOptions::default()
    };
    let fit = fit_nls(NlsForm::Stk, &data, &start, &opts).unwrap();
    fit.beta
        .iter()
        .zip(EXP_DECAY_TRUTH)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Largest relative gap between analytic and central-difference gradients of
/// every form at `points` random parameter vectors.
pub fn nls_jacobian_max_rel_err(points: usize, seed: u64) -> f64 {
    use soilres::nlsfit::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for form in NlsForm::ALL {
        for _ in 0..points {
            let mut beta: Vec<f64> = (0..form.parameter_count())
                .map(|_| rng.random_range(-0.2..0.2))
                .collect();
            beta[0] = rng.random_range(-50.0..50.0);
            beta[1] = rng.random_range(1.0..1000.0);
            if let Some(m) = form.linear_mol_index() {
                beta[m] = rng.random_range(-40.0..40.0);
            }
            let st = SoilType::ALL[rng.random_range(0..9)];
            let x = Covariates::new(
                st,
                MOL_LEVELS[rng.random_range(0..4)],
                rng.random_range(3.0..27.0),
                rng.random_range(0.72..1.92),
            );
            let g = form.gradient(&beta, &x);
            for j in 0..beta.len() {
                let h = 1e-6 * beta[j].abs().max(1.0);
                let mut up = beta.clone();
                let mut dn = beta.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (eval_form(form, &up, &x).unwrap() - eval_form(form, &dn, &x).unwrap())
                    / (2.0 * h);
                let scale = g[j].abs().max(fd.abs()).max(1e-6);
                worst = worst.max((g[j] - fd).abs() / scale);
            }
        }
    }
    worst
}

/// Normal-equations least squares that reports exact collinearity as `None`.
pub fn normal_equations_checked(cols: &[Vec<f64>], y: &[f64]) -> Option<f64> {
    let n = y.len();
    let mut x: Vec<Vec<f64>> = vec![vec![1.0; n]];
    x.extend(cols.iter().cloned());
    let p = x.len();
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| dot(&x[i], &x[j])).collect())
        .collect();
    let mut b: Vec<f64> = (0..p).map(|i| dot(&x[i], y)).collect();
    let diag_max = (0..p).map(|i| a[i][i]).fold(0.0, f64::max);
    for c in 0..p {
        let piv = (c..p)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[piv][c].abs() <= 1e-9 * diag_max {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..p {
            let f = a[r][c] / a[c][c];
            for k in c..p {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut beta = vec![0.0; p];
    for r in (0..p).rev() {
        let s: f64 = (r + 1..p).map(|k| a[r][k] * beta[k]).sum();
        beta[r] = (b[r] - s) / a[r][r];
    }
    Some(
        (0..n)
            .map(|r| (y[r] - (0..p).map(|j| beta[j] * x[j][r]).sum::<f64>()).powi(2))
            .sum(),
    )
}

/// Two predictors with one kinked effect plus small noise.
pub fn kinked_dataset(rng: &mut ChaCha8Rng, n: usize) -> (soilres::mars::FeatureMatrix, Vec<f64>) {
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let var = rng.random_range(0..2);
    let src = if var == 0 { &x1 } else { &x2 };
    let knot = rng.random_range(0.25..0.75)
        * (src.iter().cloned().fold(f64::MIN, f64::max)
            - src.iter().cloned().fold(f64::MAX, f64::min))
        + src.iter().cloned().fold(f64::MAX, f64::min);
    let slope_l = rng.random_range(-2.0..2.0);
    let slope_r =
        slope_l + rng.random_range(1.0..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let v = src[i];
            let z: f64 = rng.sample(StandardNormal);
            1.0 + if v < knot {
                slope_l * (v - knot)
            } else {
                slope_r * (v - knot)
            } + 0.1 * z
        })
        .collect();
    let fm =
        soilres::mars::FeatureMatrix::new(vec!["x1".into(), "x2".into()], vec![x1, x2]).unwrap();
    (fm, y)
}

/// Exhaustive search for the best first reflected pair: `(var, knot, rss)`.
pub fn exhaustive_first_knot(x: &soilres::mars::FeatureMatrix, y: &[f64]) -> (usize, f64, f64) {
    let mut best = (0, f64::NAN, f64::INFINITY);
    for var in 0..x.columns.len() {
        for knot in x.knot_candidates(var) {
            let up: Vec<f64> = x.columns[var].iter().map(|v| (v - knot).max(0.0)).collect();
            let dn: Vec<f64> = x.columns[var].iter().map(|v| (knot - v).max(0.0)).collect();
            let cols: Vec<Vec<f64>> = [up, dn]
                .into_iter()
                .filter(|c| c.iter().any(|v| *v != 0.0))
                .collect();
            let rss = normal_equations_checked(&cols, y).unwrap_or(f64::INFINITY);
            if rss < best.2 {
                best = (var, knot, rss);
            }
        }
    }
    best
}

/// Count of `count` kinked datasets whose forward-pass first knot equals the
/// exhaustive-search knot.
pub fn mars_first_knot_agreement(count: usize, seed: u64) -> usize {
    use soilres::mars::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .filter(|_| {
            let n = rng.random_range(30..80);
            let (x, y) = kinked_dataset(&mut rng, n);
            let opts = ForwardOptions {
                max_terms: 3,
                ..ForwardOptions::default()
            };
            let fwd = forward_pass(&x, &y, &opts).unwrap();
            let (var, knot, _) = exhaustive_first_knot(&x, &y);
            let h = fwd.basis[0].factors[0];
            h.var == var && h.knot == knot
        })
        .count()
}

/// Count of `count` datasets on which GCV pruning of a forward basis of at
/// most six terms selects the exhaustive-subset argmin.
pub fn mars_gcv_oracle_agreement(count: usize, seed: u64) -> usize {
    use soilres::mars::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .filter(|_| {
            let n = rng.random_range(30..80);
            let (x, y) = kinked_dataset(&mut rng, n);
            let opts = ForwardOptions {
                max_terms: 7,
                threshold: 0.0,
                ..ForwardOptions::default()
            };
            let fwd = forward_pass(&x, &y, &opts).unwrap();
            let cols: Vec<Vec<f64>> = fwd.basis.iter().map(|b| b.column(&x)).collect();
            let m = cols.len();
            assert!(m <= 6);
            let mut best: (Vec<usize>, f64) = (vec![], f64::INFINITY);
            for mask in 0u32..(1 << m) {
                let subset: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
                let sub: Vec<Vec<f64>> = subset.iter().map(|&k| cols[k].clone()).collect();
                let Some(rss) = normal_equations_checked(&sub, &y) else {
                    continue;
                };
                let p = subset.len() as f64 + 1.0;
                let c = p + 2.0 * (p - 1.0) / 2.0;
                let g = (rss / n as f64) / (1.0 - c / n as f64).powi(2);
                if g < best.1 * (1.0 - 1e-12) {
                    best = (subset, g);
                }
            }
            let pruned = prune_gcv(&fwd.basis, &x, &y, 2.0, PruneMethod::Auto).unwrap();
            pruned.selected == best.0 && rel_err(pruned.gcv, best.1) < 1e-8
        })
        .count()
}

/// Fixed 10-point, 3-input dataset on the scaled axes.
pub fn ann_gradient_data() -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let y = x.iter().map(|r| (r[0] * 2.0).sin() + r[1] * r[2]).collect();
    (x, y)
}

/// Largest relative error `|g - fd| / max(|g|, |fd|)` (vector norms) of the
/// analytic loss gradient at `points` random weight vectors.
pub fn ann_gradient_max_rel_err(points: usize, seed: u64, decay: f64) -> f64 {
    use soilres::ann::Shape;
    let (x, y) = ann_gradient_data();
    let shape = Shape {
        inputs: 3,
        hidden: 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let w: Vec<f64> = (0..shape.param_count())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let (_, g) = shape.loss_and_grad(&w, &x, &y, decay);
        let fd: Vec<f64> = (0..w.len())
            .map(|j| {
                let h = 1e-6;
                let mut up = w.clone();
                let mut dn = w.clone();
                up[j] += h;
                dn[j] -= h;
                (shape.loss_and_grad(&up, &x, &y, decay).0
                    - shape.loss_and_grad(&dn, &x, &y, decay).0)
                    / (2.0 * h)
            })
            .collect();
        let diff = g
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = dot(&g, &g).sqrt().max(dot(&fd, &fd).sqrt());
        worst = worst.max(diff / scale);
    }
    worst
}

/// Largest change of the network output (scaled response axis) after
/// reversing the hidden units of a trained network.
pub fn ann_permutation_gap() -> f64 {
    use soilres::ann::*;
    use soilres::dataset::Covariate;
    use soilres::linmod::Term;
    let data = synthetic(3, 0.3, 6);
    let inputs = [
        Term::Main(Covariate::Moist),
        Term::Main(Covariate::Uw),
        Term::Main(Covariate::Mol),
    ];
    let cfg = TrainConfig {
        hidden_size: 5,
        max_iterations: 200,
        ..TrainConfig::default()
    };
    let m = train_ann(&data, &inputs, &cfg).unwrap();
    let perm: Vec<usize> = (0..5).rev().collect();
    let p = m.permute_hidden(&perm);
    data.iter()
        .map(|r| {
            let s = m.scaled_inputs(&r.x);
            (m.scaled_output(&s) - p.scaled_output(&s)).abs()
        })
        .fold(0.0, f64::max)
}

/// Two trainings with the same seed give bit-identical weights.
pub fn ann_training_reproducible() -> bool {
    use soilres::ann::*;
    use soilres::dataset::Covariate;
    use soilres::linmod::Term;
    let data = synthetic(3, 0.3, 6);
    let inputs = [Term::Main(Covariate::Moist), Term::Main(Covariate::Uw)];
    let cfg = TrainConfig {
        hidden_size: 3,
        max_iterations: 300,
        seed: 77,
        ..TrainConfig::default()
    };
    let a = train_ann(&data, &inputs, &cfg).unwrap();
    let b = train_ann(&data, &inputs, &cfg).unwrap();
    let bits = |m: &AnnModel| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    bits(&a) == bits(&b)
}

/// Checks partition, sizes and determinism of `random_split` over `pairs`
/// random `(n, seed)` pairs; returns the number of violations.
pub fn split_violations(pairs: usize, seed: u64) -> usize {
    use soilres::evalcv::random_split;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs)
        .filter(|_| {
            let n = rng.random_range(4..2000);
            let s: u64 = rng.random();
            let f = 0.75;
            let plan = random_split(n, f, s).unwrap();
            let mut all: Vec<usize> = plan.train.iter().chain(&plan.validation).copied().collect();
            all.sort_unstable();
            let partition = all == (0..n).collect::<Vec<_>>();
            let size = plan.train.len() == (f * n as f64).round() as usize;
            let sorted = plan.train.windows(2).all(|w| w[0] < w[1])
                && plan.validation.windows(2).all(|w| w[0] < w[1]);
            let again = random_split(n, f, s).unwrap() == plan;
            !(partition && size && sorted && again)
        })
        .count()
}

/// Recipe that records the exact rows it is handed and predicts the
/// training mean.
pub struct Recorder {
    pub label: String,
    pub seen: std::sync::Mutex<Vec<(Vec<u64>, Vec<u64>)>>,
}

impl Recorder {
    pub fn new(label: &str) -> Self {
        Recorder {
            label: label.into(),
            seen: std::sync::Mutex::new(Vec::new()),
        }
    }
}

fn fingerprint(rows: &[EncodedRecord]) -> Vec<u64> {
    rows.iter()
        .flat_map(|r| {
            [
                r.x.mol.to_bits(),
                r.x.moist.to_bits(),
                r.x.uw.to_bits(),
                r.er.to_bits(),
            ]
        })
        .collect()
}

impl soilres::evalcv::Recipe for Recorder {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn fit_predict(
        &self,
        train: &[EncodedRecord],
        validation: &[EncodedRecord],
        _seed: u64,
    ) -> soilres::Result<Vec<f64>> {
        self.seen
            .lock()
            .unwrap()
            .push((fingerprint(train), fingerprint(validation)));
        let mean = train.iter().map(|r| r.er).sum::<f64>() / train.len() as f64;
        Ok(vec![mean; validation.len()])
    }
}

struct Shared(std::sync::Arc<Recorder>);

impl soilres::evalcv::Recipe for Shared {
    fn name(&self) -> String {
        self.0.label.clone()
    }

    fn fit_predict(
        &self,
        t: &[EncodedRecord],
        v: &[EncodedRecord],
        s: u64,
    ) -> soilres::Result<Vec<f64>> {
        soilres::evalcv::Recipe::fit_predict(&*self.0, t, v, s)
    }
}

/// Fairness over `repeats`: every recipe in a repeat received identical
/// training and validation rows.
pub fn harness_is_fair(data: &[EncodedRecord], repeats: usize, seed: u64) -> bool {
    use soilres::evalcv::*;
    use std::sync::Arc;
    let opts = CvOptions {
        repeats,
        master_seed: seed,
        ..CvOptions::default()
    };
    (0..repeats).all(|r| {
        let a = Arc::new(Recorder::new("a"));
        let b = Arc::new(Recorder::new("b"));
        let recipes: Vec<Box<dyn Recipe>> =
            vec![Box::new(Shared(a.clone())), Box::new(Shared(b.clone()))];
        run_repeat(data, &recipes, &opts, r).unwrap();
        let sa = a.seen.lock().unwrap();
        let sb = b.seen.lock().unwrap();
        sa.len() == 1 && *sa == *sb
    })
}
