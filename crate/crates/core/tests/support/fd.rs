//! Central finite-difference oracle for every differentiable tape op.

#![allow(dead_code)]

use monsoon_core::autodiff::{AutodiffError, RngState, Tape, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-9;
pub const POINTS: usize = 10;

type OpFn = Box<dyn Fn(&Tape<f64>, &[Var]) -> Result<Var, AutodiffError>>;

/// How input values are drawn.
#[derive(Clone, Copy)]
pub enum Domain {
    Any,
    Positive,
    /// |x| >= 0.05, keeps relu away from its kink.
    AwayFromZero,
}

pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub domain: Domain,
    pub f: OpFn,
}

fn case(
    name: &'static str,
    shapes: &[&[usize]],
    domain: Domain,
    f: impl Fn(&Tape<f64>, &[Var]) -> Result<Var, AutodiffError> + 'static,
) -> OpCase {
    OpCase {
        name,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        domain,
        f: Box::new(f),
    }
}

pub fn op_cases() -> Vec<OpCase> {
    use Domain::*;
    vec![
        case("add", &[&[3, 4], &[3, 4]], Any, |t, x| t.add(x[0], x[1])),
        case("add_broadcast", &[&[2, 3, 4], &[4]], Any, |t, x| {
            t.add(x[0], x[1])
        }),
        case("sub", &[&[3, 4], &[3, 4]], Any, |t, x| t.sub(x[0], x[1])),
        case("sub_broadcast", &[&[5, 2], &[2]], Any, |t, x| {
            t.sub(x[0], x[1])
        }),
        case("mul", &[&[3, 4], &[3, 4]], Any, |t, x| t.mul(x[0], x[1])),
        case("mul_broadcast", &[&[2, 3, 4], &[3, 4]], Any, |t, x| {
            t.mul(x[0], x[1])
        }),
        case("add_scalar", &[&[6]], Any, |t, x| t.add_scalar(x[0], 0.7)),
        case("mul_scalar", &[&[6]], Any, |t, x| t.mul_scalar(x[0], -1.3)),
        case("matmul", &[&[2, 3], &[3, 4]], Any, |t, x| {
            t.matmul(x[0], x[1])
        }),
        case("matmul_batched_lhs", &[&[2, 3, 5], &[5, 2]], Any, |t, x| {
            t.matmul(x[0], x[1])
        }),
        case("batch_matmul", &[&[2, 3, 4], &[2, 4, 5]], Any, |t, x| {
            t.batch_matmul(x[0], x[1])
        }),
        case("transpose", &[&[3, 4]], Any, |t, x| t.transpose(x[0])),
        case("permute", &[&[2, 3, 4]], Any, |t, x| {
            t.permute(x[0], &[2, 0, 1])
        }),
        case("reshape", &[&[2, 6]], Any, |t, x| t.reshape(x[0], &[3, 4])),
        case("concat", &[&[2, 3], &[2, 2]], Any, |t, x| {
            t.concat(&[x[0], x[1]], 1)
        }),
        case("slice", &[&[3, 5]], Any, |t, x| t.slice(x[0], 1, 1, 3)),
        case("sum_axis", &[&[3, 4]], Any, |t, x| t.sum_axis(x[0], 0)),
        case("mean_axis", &[&[2, 3, 4]], Any, |t, x| t.mean_axis(x[0], 1)),
        case("sum", &[&[3, 4]], Any, |t, x| t.sum(x[0])),
        case("tanh", &[&[7]], Any, |t, x| t.tanh(x[0])),
        case("sigmoid", &[&[7]], Any, |t, x| t.sigmoid(x[0])),
        case("relu", &[&[7]], AwayFromZero, |t, x| t.relu(x[0])),
        case("exp", &[&[7]], Any, |t, x| t.exp(x[0])),
        case("log", &[&[7]], Positive, |t, x| t.log(x[0])),
        case("softmax_last", &[&[3, 4]], Any, |t, x| t.softmax(x[0], 1)),
        case("softmax_first", &[&[3, 4]], Any, |t, x| t.softmax(x[0], 0)),
        case("layer_norm", &[&[3, 5]], Any, |t, x| {
            t.layer_norm(x[0], 1e-5)
        }),
        case("dropout", &[&[8]], Any, |t, x| {
            t.dropout(
                x[0],
                &[true, false, true, true, false, true, true, true],
                0.25,
            )
        }),
        case("mse_loss", &[&[2, 3], &[2, 3]], Any, |t, x| {
            t.mse_loss(x[0], x[1])
        }),
    ]
}

fn draw(rng: &mut RngState, shape: &[usize], domain: Domain) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| match domain {
        Domain::Any => rng.normal(),
        Domain::Positive => rng.uniform_range(0.2, 3.0),
        Domain::AwayFromZero => {
            let v = rng.uniform_range(0.05, 2.0);
            if rng.uniform() < 0.5 {
                -v
            } else {
                v
            }
        }
    })
}

/// Scalar objective `sum(op(inputs) * weights)` and its analytic gradients.
fn evaluate(
    c: &OpCase,
    inputs: &[Tensor<f64>],
    weights: &Tensor<f64>,
    grads: bool,
) -> (f64, Vec<Tensor<f64>>) {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = (c.f)(&tape, &vars).expect("op evaluates");
    let w = tape.constant(weights.clone());
    let loss = tape.sum(tape.mul(out, w).unwrap()).unwrap();
    let value = tape.value(loss).item();
    if !grads {
        return (value, vec![]);
    }
    let g = tape.backward(loss).expect("backward");
    (value, g.collect(&vars))
}

/// Largest relative error over all coordinates of all inputs at `POINTS` random points.
pub fn check(c: &OpCase, seed: u64) -> Result<f64, String> {
    let mut rng = RngState::seeded(seed);
    let mut worst: f64 = 0.0;
    for point in 0..POINTS {
        let inputs: Vec<Tensor<f64>> = c
            .shapes
            .iter()
            .map(|s| draw(&mut rng, s, c.domain))
            .collect();
        let out_shape = {
            let tape = Tape::new();
            let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
            let out = (c.f)(&tape, &vars).map_err(|e| e.to_string())?;
            tape.shape(out)
        };
        let weights = draw(&mut rng, &out_shape, Domain::Any);
        let (_, analytic) = evaluate(c, &inputs, &weights, true);
        for (i, input) in inputs.iter().enumerate() {
            for j in 0..input.len() {
                let mut plus = inputs.clone();
                plus[i].data_mut()[j] += FD_STEP;
                let mut minus = inputs.clone();
                minus[i].data_mut()[j] -= FD_STEP;
                let numeric = (evaluate(c, &plus, &weights, false).0
                    - evaluate(c, &minus, &weights, false).0)
                    / (2.0 * FD_STEP);
                let a = analytic[i].data()[j];
                let abs = (a - numeric).abs();
                let scale = a.abs().max(numeric.abs());
                if abs <= ABS_TOL {
                    continue;
                }
                let rel = abs / scale;
                worst = worst.max(rel);
                if rel > REL_TOL {
                    return Err(format!("{} point {point} input {i}[{j}]: analytic {a} numeric {numeric} rel {rel:e}", c.name));
                }
            }
        }
    }
    Ok(worst)
}
