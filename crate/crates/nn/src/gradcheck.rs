//! Central finite-difference gradient checks.

use ndarray::Array2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::GraphInput;
use crate::models::*;
use crate::params::Params;
use crate::tape::{Tape, Var};
use crate::NnError;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest per-input [`relative_error`].
    pub max_rel_error: f64,
    /// Per-input relative errors in argument order.
    pub rel_errors: Vec<f64>,
}

fn norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Denominator floor so that vanishing gradients compare absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// `‖a − n‖ / max(‖a‖, ‖n‖, REL_FLOOR)`.
pub fn relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let diff = norm(&(analytic - numeric));
    diff / norm(analytic).max(norm(numeric)).max(REL_FLOOR)
}

/// Compare the backward pass of a scalar function `f` against central
/// differences with step [`FD_STEP`] for every entry of every input.
pub fn check_gradients<F>(inputs: &[Array2<f64>], f: F) -> Result<GradCheckReport, NnError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, NnError>,
{
    let eval = |vals: &[Array2<f64>]| -> Result<f64, NnError> {
        let mut t = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|v| t.var(v.clone())).collect();
        let out = f(&mut t, &vars)?;
        Ok(t.scalar(out))
    };
    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| t.var(v.clone())).collect();
    let out = f(&mut t, &vars)?;
    let grads = t.backward(out);
    let mut rel_errors = Vec::new();
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[k])
            .cloned()
            .unwrap_or_else(|| Array2::zeros(input.dim()));
        let mut numeric = Array2::zeros(input.dim());
        let mut probe: Vec<Array2<f64>> = inputs.to_vec();
        for idx in ndarray::indices(input.dim()) {
            let orig = input[idx];
            probe[k][idx] = orig + FD_STEP;
            let plus = eval(&probe)?;
            probe[k][idx] = orig - FD_STEP;
            let minus = eval(&probe)?;
            probe[k][idx] = orig;
            numeric[idx] = (plus - minus) / (2.0 * FD_STEP);
        }
        rel_errors.push(relative_error(&analytic, &numeric));
    }
    Ok(GradCheckReport {
        max_rel_error: rel_errors.iter().cloned().fold(0.0, f64::max),
        rel_errors,
    })
}

/// Central-difference check of every parameter of a model. `loss` evaluates
/// the model with the given parameter values and returns the loss and the
/// analytic gradients, one per parameter.
pub fn check_param_gradients<F>(params: &mut Params, mut loss: F) -> GradCheckReport
where
    F: FnMut(&Params) -> (f64, Vec<Array2<f64>>),
{
    let (_, analytic) = loss(params);
    let mut rel_errors = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let mut numeric = Array2::zeros(params.value(k).dim());
        for idx in ndarray::indices(numeric.dim()) {
            let orig = params.value(k)[idx];
            params.value_mut(k)[idx] = orig + FD_STEP;
            let plus = loss(params).0;
            params.value_mut(k)[idx] = orig - FD_STEP;
            let minus = loss(params).0;
            params.value_mut(k)[idx] = orig;
            numeric[idx] = (plus - minus) / (2.0 * FD_STEP);
        }
        rel_errors.push(relative_error(&analytic[k], &numeric));
    }
    GradCheckReport {
        max_rel_error: rel_errors.iter().cloned().fold(0.0, f64::max),
        rel_errors,
    }
}

/// Random entries with magnitude in `[0.1, 1.5)`, away from relu and clamp
/// kinks.
pub fn kink_free<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let v: f64 = rng.gen_range(0.1..1.5);
        if rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

/// Random tree on `n` nodes with Gaussian features and cycling categories.
pub fn toy_graph<R: Rng>(rng: &mut R, n: usize, f: usize) -> GraphInput {
    let mut a = Array2::zeros((n, n));
    for i in 1..n {
        let p = rng.gen_range(0..i);
        a[[i, p]] = 1.0;
        a[[p, i]] = 1.0;
    }
    let x = standard_normal(rng, n, f);
    let cats = (0..n).map(|i| i % 3).collect();
    GraphInput::new(x, a, cats, Some(1))
}

type OpCase = (&'static str, Vec<(usize, usize)>, Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, NnError>>);

/// Gradient check of every tape operation. Non-scalar outputs are reduced
/// with a fixed random projection.
pub fn op_checks(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = kink_free(&mut rng, 3, 4);
    let probs_target = Array2::from_shape_fn((3, 4), |(i, j)| ((i + j) % 2) as f64);
    let weight = Array2::from_shape_fn((3, 4), |(i, j)| if i == j { 0.0 } else { 1.0 + i as f64 });
    let mask = Array2::from_shape_fn((3, 3), |(i, j)| if i == 2 || (i + j) % 2 == 0 { 1.0 } else { 0.0 });
    let eps = kink_free(&mut rng, 3, 4);
    let cases: Vec<OpCase> = vec![
        ("matmul", vec![(3, 4), (4, 2)], Box::new(|t, v| t.matmul(v[0], v[1]))),
        ("matmul_t", vec![(3, 4), (2, 4)], Box::new(|t, v| t.matmul_t(v[0], v[1]))),
        ("add", vec![(3, 4), (3, 4)], Box::new(|t, v| t.add(v[0], v[1]))),
        ("add_row", vec![(3, 4), (1, 4)], Box::new(|t, v| t.add_row(v[0], v[1]))),
        ("sub", vec![(3, 4), (3, 4)], Box::new(|t, v| t.sub(v[0], v[1]))),
        ("mul", vec![(3, 4), (3, 4)], Box::new(|t, v| t.mul(v[0], v[1]))),
        ("scale", vec![(3, 4)], Box::new(|t, v| Ok(t.scale(v[0], -1.7)))),
        ("relu", vec![(3, 4)], Box::new(|t, v| Ok(t.relu(v[0])))),
        ("leaky_relu", vec![(3, 4)], Box::new(|t, v| Ok(t.leaky_relu(v[0], 0.2)))),
        ("sigmoid", vec![(3, 4)], Box::new(|t, v| Ok(t.sigmoid(v[0])))),
        ("exp", vec![(3, 4)], Box::new(|t, v| Ok(t.exp(v[0])))),
        ("clamp", vec![(3, 4)], Box::new(|t, v| Ok(t.clamp(v[0], -1.0, 1.0)))),
        ("softmax_rows", vec![(3, 4)], Box::new(|t, v| Ok(t.softmax_rows(v[0])))),
        (
            "masked_softmax_rows",
            vec![(3, 3)],
            Box::new(move |t, v| t.masked_softmax_rows(v[0], mask.clone())),
        ),
        ("concat_cols", vec![(3, 2), (3, 4)], Box::new(|t, v| t.concat_cols(v[0], v[1]))),
        ("mean_rows", vec![(3, 4)], Box::new(|t, v| Ok(t.mean_rows(v[0])))),
        ("lookup_rows", vec![(4, 3)], Box::new(|t, v| t.lookup_rows(v[0], &[2, 0, 2, 3]))),
        ("transpose", vec![(3, 4)], Box::new(|t, v| Ok(t.transpose(v[0])))),
        ("outer_add", vec![(3, 1), (1, 4)], Box::new(|t, v| t.outer_add(v[0], v[1]))),
        ("sum_all", vec![(3, 4)], Box::new(|t, v| Ok(t.sum_all(v[0])))),
        (
            "reparameterize",
            vec![(3, 4), (3, 4)],
            Box::new(move |t, v| t.reparameterize(v[0], v[1], eps.clone())),
        ),
        ("mse", vec![(3, 4)], Box::new(move |t, v| t.mse(v[0], &target))),
        (
            "bce",
            vec![(3, 4)],
            Box::new(move |t, v| {
                let p = t.sigmoid(v[0]);
                t.bce(p, &probs_target, Some(&weight))
            }),
        ),
        ("kl", vec![(3, 4), (3, 4)], Box::new(|t, v| t.kl(v[0], v[1]))),
        ("cross_entropy", vec![(3, 4)], Box::new(|t, v| t.cross_entropy(v[0], &[0, 3, 1]))),
    ];
    let mut out = Vec::with_capacity(cases.len());
    for (name, shapes, f) in cases {
        let inputs: Vec<Array2<f64>> = shapes.iter().map(|&(r, c)| kink_free(&mut rng, r, c)).collect();
        let proj_seed: u64 = rng.gen();
        let report = check_gradients(&inputs, |t, v| {
            let y = f(t, v)?;
            let mut prng = ChaCha8Rng::seed_from_u64(proj_seed);
            let w = t.constant(Array2::from_shape_fn(t.value(y).dim(), |_| prng.gen_range(-1.0..1.0)));
            let prod = t.mul(y, w)?;
            Ok(t.sum_all(prod))
        })?;
        out.push((name, report));
    }
    Ok(out)
}

/// Parameter gradient checks of the three models on small random graphs.
pub fn model_checks(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (name, attention) in [("classifier", false), ("classifier_attention", true)] {
        let g = toy_graph(&mut rng, 5, 4);
        let mut cfg = ClassifierConfig::new(4, 2);
        cfg.hidden = 6;
        cfg.attention = attention;
        let mut m = SageClassifier::new(cfg, &mut rng);
        let mut params = m.params.clone();
        let mut failure = None;
        let report = check_param_gradients(&mut params, |p| {
            m.params = p.clone();
            let mut t = Tape::new();
            match m.loss(&mut t, &g, 1) {
                Ok(l) => (t.scalar(l), t.backward(l).for_params(&m.params)),
                Err(e) => {
                    failure = Some(e);
                    (f64::NAN, Vec::new())
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        out.push((name, report));
    }

    let g = toy_graph(&mut rng, 5, 4);
    let mut cfg = CgvaeConfig::new(4, 3);
    cfg.hidden = 6;
    cfg.latent = 3;
    cfg.embed = 2;
    let mut m = Cgvae::new(cfg, &mut rng);
    let eps = standard_normal(&mut rng, 5, 3);
    let mut params = m.params.clone();
    let mut failure = None;
    let report = check_param_gradients(&mut params, |p| {
        m.params = p.clone();
        let mut t = Tape::new();
        match m.loss_with_noise(&mut t, &g, eps.clone()) {
            Ok(o) => (t.scalar(o.loss), t.backward(o.loss).for_params(&m.params)),
            Err(e) => {
                failure = Some(e);
                (f64::NAN, Vec::new())
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    out.push(("cgvae", report));

    let g = toy_graph(&mut rng, 6, 3);
    let mut cfg = LinkPredConfig::new(3);
    cfg.hidden = 5;
    cfg.latent = 4;
    let mut m = GraphAutoEncoder::new(cfg, &mut rng);
    let w = off_diagonal_mask(6) * 2.0;
    let mut params = m.params.clone();
    let mut failure = None;
    let report = check_param_gradients(&mut params, |p| {
        m.params = p.clone();
        let mut t = Tape::new();
        match m.loss(&mut t, &g.x, &g.a_gcn, &g.a, &w) {
            Ok(l) => (t.scalar(l), t.backward(l).for_params(&m.params)),
            Err(e) => {
                failure = Some(e);
                (f64::NAN, Vec::new())
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    out.push(("link_prediction", report));
    Ok(out)
}
