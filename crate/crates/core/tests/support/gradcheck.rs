//! Central finite-difference oracle for every differentiable tape op.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlens_core::tensor::{Tape, Tensor, Var};

pub const STEP: f64 = 1e-5;

/// Relative error ‖a − n‖ / max(‖a‖, ‖n‖) between analytic and numeric
/// gradients of `build(inputs)` (reduced to a scalar with a fixed random
/// projection), taken over all inputs.
pub fn check<F>(inputs: &[Tensor], build: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    // Projection weights for non-scalar outputs, fixed per call.
    let proj = {
        let mut tape = Tape::with_seed(1);
        let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t)).collect();
        let out = build(&mut tape, &vars);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = tape.value(out).len();
        Tensor::new(
            tape.value(out).shape().to_vec(),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    };
    let scalar = |tape: &mut Tape, out: Var| {
        let r = tape.constant(proj.clone());
        let p = tape.mul(out, r).unwrap();
        tape.sum(p)
    };

    let tracked: Vec<Tensor> = inputs.iter().map(|t| t.clone().with_requires_grad(true)).collect();
    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::with_seed(1);
        let vars: Vec<Var> = tracked.iter().map(|t| tape.input(t)).collect();
        let out = build(&mut tape, &vars);
        let loss = scalar(&mut tape, out);
        let grads = tape.backward(loss).unwrap();
        vars.iter()
            .zip(inputs)
            .map(|(v, t)| grads.of(*v).map_or(vec![0.0; t.len()], <[f64]>::to_vec))
            .collect()
    };

    let eval = |perturbed: &[Tensor]| {
        let mut tape = Tape::with_seed(1);
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.input(t)).collect();
        let out = build(&mut tape, &vars);
        let loss = scalar(&mut tape, out);
        tape.value(loss).item().unwrap()
    };

    let mut diff2 = 0.0;
    let mut a2 = 0.0;
    let mut n2 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        for (j, &a) in analytic[k].iter().enumerate().take(input.len()) {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[j] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[j] -= STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
        }
    }
    let denom = a2.sqrt().max(n2.sqrt());
    if denom == 0.0 {
        0.0
    } else {
        diff2.sqrt() / denom
    }
}

pub fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

/// Like [`random`] but bounded away from zero, for ops with a kink there.
pub fn random_off_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.5);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub struct OpReport {
    pub op: &'static str,
    pub shapes: usize,
    pub worst: f64,
}

/// Runs the oracle for every differentiable op on five random shapes each.
pub fn all_ops(seed: u64) -> Vec<OpReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = |rng: &mut ChaCha8Rng| (rng.random_range(1..5usize), rng.random_range(1..5usize));
    let mut reports = Vec::new();
    let mut run = |op: &'static str, errs: Vec<f64>| {
        reports.push(OpReport {
            op,
            shapes: errs.len(),
            worst: errs.into_iter().fold(0.0, f64::max),
        });
    };
    const SHAPES: usize = 5;

    let mut errs = Vec::new();
    for _ in 0..SHAPES {
        let (m, k) = dims(&mut rng);
        let n = rng.random_range(1..5);
        let a = random(&mut rng, &[m, k]);
        let b = random(&mut rng, &[k, n]);
        errs.push(check(&[a, b], |t, v| t.matmul(v[0], v[1]).unwrap()));
    }
    run("matmul", errs);

    for (name, op) in [("add", 0), ("sub", 1), ("mul", 2)] {
        let mut errs = Vec::new();
        for _ in 0..SHAPES {
            let (r, c) = dims(&mut rng);
            let a = random(&mut rng, &[r, c]);
            let b = random(&mut rng, &[r, c]);
            errs.push(check(&[a, b], |t, v| match op {
                0 => t.add(v[0], v[1]).unwrap(),
                1 => t.sub(v[0], v[1]).unwrap(),
                _ => t.mul(v[0], v[1]).unwrap(),
            }));
        }
        run(name, errs);
    }

    let mut errs = Vec::new();
    for _ in 0..SHAPES {
        let (r, c) = dims(&mut rng);
        let x = random(&mut rng, &[r, c]);
        let b = random(&mut rng, &[c]);
        errs.push(check(&[x, b], |t, v| t.add_bias(v[0], v[1]).unwrap()));
    }
    run("add_bias", errs);

    let mut errs = Vec::new();
    for _ in 0..SHAPES {
        let (r, c) = dims(&mut rng);
        let x = random(&mut rng, &[r, c]);
        let s = rng.random_range(-2.0..2.0);
        errs.push(check(&[x], move |t, v| t.scale(v[0], s)));
    }
    run("scale", errs);

    for (name, kind) in [("relu", 0), ("sigmoid", 1), ("gelu", 2), ("dropout_train", 3)] {
        let mut errs = Vec::new();
        for _ in 0..SHAPES {
            let (r, c) = dims(&mut rng);
            let x = random_off_zero(&mut rng, &[r, c]);
            errs.push(check(&[x], |t, v| match kind {
                0 => t.relu(v[0]),
                1 => t.sigmoid(v[0]),
                2 => t.gelu(v[0]),
                _ => t.dropout(v[0], 0.3, true).unwrap(),
            }));
        }
        run(name, errs);
    }

    let mut errs = Vec::new();
    for i in 0..SHAPES {
        let (r, c) = dims(&mut rng);
        let d = rng.random_range(2..4);
        let x = random(&mut rng, &[r, c, d]);
        let axis = i % 3;
        errs.push(check(&[x], move |t, v| t.softmax(v[0], axis).unwrap()));
    }
    run("softmax", errs);

    let mut errs = Vec::new();
    for _ in 0..SHAPES {
        let r = rng.random_range(1..4);
        let d = rng.random_range(2..6);
        let x = random(&mut rng, &[r, d]);
        let g = random(&mut rng, &[d]);
        let b = random(&mut rng, &[d]);
        errs.push(check(&[x, g, b], |t, v| t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap()));
    }
    run("layer_norm", errs);

    let mut errs = Vec::new();
    for _ in 0..SHAPES {
        let (r, c) = dims(&mut rng);
        let p = random(&mut rng, &[r, c]);
        let y = random(&mut rng, &[r, c]);
        errs.push(check(&[p, y], |t, v| t.mse_loss(v[0], v[1]).unwrap()));
    }
    run("mse_loss", errs);

    for (name, op) in [("sum", 0), ("mean", 1), ("transpose", 2)] {
        let mut errs = Vec::new();
        for _ in 0..SHAPES {
            let (r, c) = dims(&mut rng);
            let x = random(&mut rng, &[r, c]);
            errs.push(check(&[x], |t, v| match op {
                0 => t.sum(v[0]),
                1 => t.mean(v[0]),
                _ => t.transpose(v[0]).unwrap(),
            }));
        }
        run(name, errs);
    }

    let mut errs = Vec::new();
    for _ in 0..SHAPES {
        let (r, c) = dims(&mut rng);
        let table = random(&mut rng, &[r + 1, c]);
        let ids: Vec<usize> = (0..rng.random_range(1..6)).map(|_| rng.random_range(0..=r)).collect();
        errs.push(check(&[table], move |t, v| t.gather_rows(v[0], &ids).unwrap()));
    }
    run("gather_rows", errs);

    let mut errs = Vec::new();
    for _ in 0..SHAPES {
        let (r, c) = dims(&mut rng);
        let r2 = rng.random_range(1..4);
        let a = random(&mut rng, &[r, c]);
        let b = random(&mut rng, &[r2, c]);
        errs.push(check(&[a, b], |t, v| t.concat_rows(&[v[0], v[1], v[0]]).unwrap()));
    }
    run("concat_rows", errs);

    let mut errs = Vec::new();
    for _ in 0..SHAPES {
        let (r, c) = dims(&mut rng);
        let c2 = rng.random_range(1..4);
        let a = random(&mut rng, &[r, c]);
        let b = random(&mut rng, &[r, c2]);
        errs.push(check(&[a, b], |t, v| t.concat_cols(&[v[1], v[0]]).unwrap()));
    }
    run("concat_cols", errs);

    for (name, rows) in [("slice_rows", true), ("slice_cols", false)] {
        let mut errs = Vec::new();
        for _ in 0..SHAPES {
            let (r, c) = dims(&mut rng);
            let x = random(&mut rng, &[r + 1, c + 1]);
            let len = if rows { r + 1 } else { c + 1 };
            let start = rng.random_range(0..len);
            let end = rng.random_range(start + 1..=len);
            errs.push(check(&[x], move |t, v| {
                if rows {
                    t.slice_rows(v[0], start, end).unwrap()
                } else {
                    t.slice_cols(v[0], start, end).unwrap()
                }
            }));
        }
        run(name, errs);
    }

    reports
}
