//! Every op's backward rule against central finite differences on randomly
//! composed graphs.

use proptest::prelude::*;
use wkode_autodiff::{grad_check, rk4_integrate, NodeId, ParamStore, Result, Tape, Tensor};

#[derive(Clone, Debug)]
enum Step {
    MatMul(usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    Exp(usize),
    Broadcast(usize),
    ConcatSlice(usize, usize, usize),
    Clamp(usize),
    RowCol(usize, usize),
    Div(usize, usize),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (0..8usize).prop_map(Step::MatMul),
        (0..8usize, 0..8usize).prop_map(|(a, b)| Step::Add(a, b)),
        (0..8usize, 0..8usize).prop_map(|(a, b)| Step::Mul(a, b)),
        (0..8usize, -2.0..2.0f64).prop_map(|(a, s)| Step::Scale(a, s)),
        (0..8usize).prop_map(Step::Tanh),
        (0..8usize).prop_map(Step::Sigmoid),
        (0..8usize).prop_map(Step::Exp),
        (0..8usize).prop_map(Step::Broadcast),
        (0..8usize, 0..8usize, 0..4usize).prop_map(|(a, b, o)| Step::ConcatSlice(a, b, o)),
        (0..8usize).prop_map(Step::Clamp),
        (0..8usize, 0..8usize).prop_map(|(a, b)| Step::RowCol(a, b)),
        (0..8usize, 0..8usize).prop_map(|(a, b)| Step::Div(a, b)),
    ]
}

fn build(tape: &mut Tape, s: &ParamStore, steps: &[Step], use_mse: bool) -> Result<NodeId> {
    let a = tape.param(s, s.id("a").unwrap());
    let c = tape.param(s, s.id("c").unwrap());
    let mut pool = vec![tape.param(s, s.id("x").unwrap()), tape.param(s, s.id("y").unwrap())];
    let pick = |pool: &Vec<NodeId>, i: usize| pool[i % pool.len()];
    for st in steps {
        let out = match *st {
            Step::MatMul(i) => tape.matmul(a, pick(&pool, i))?,
            Step::Add(i, j) => tape.add(pick(&pool, i), pick(&pool, j))?,
            Step::Mul(i, j) => tape.mul(pick(&pool, i), pick(&pool, j))?,
            Step::Scale(i, f) => tape.scale(pick(&pool, i), f),
            Step::Tanh(i) => tape.tanh(pick(&pool, i)),
            Step::Sigmoid(i) => tape.sigmoid(pick(&pool, i)),
            Step::Exp(i) => {
                let t = tape.tanh(pick(&pool, i));
                tape.exp(t)
            }
            Step::Broadcast(i) => tape.mul(c, pick(&pool, i))?,
            Step::ConcatSlice(i, j, o) => {
                let cat = tape.concat(&[pick(&pool, i), pick(&pool, j)])?;
                tape.slice(cat, o, 3)?
            }
            Step::Clamp(i) => tape.clamp(pick(&pool, i), -0.8, 0.8),
            Step::RowCol(i, j) => {
                // 3x2 intermediate exercising row and column broadcasting.
                let r = tape.param(s, s.id("r").unwrap());
                let w = tape.param(s, s.id("w").unwrap());
                let outer = tape.matmul(pick(&pool, i), r)?;
                let scaled = tape.mul(outer, r)?;
                let shifted = tape.add(pick(&pool, j), scaled)?;
                tape.matmul(shifted, w)?
            }
            Step::Div(i, j) => {
                // Denominator kept in [e^-1, e] away from zero.
                let t = tape.tanh(pick(&pool, j));
                let d = tape.exp(t);
                tape.div(pick(&pool, i), d)?
            }
        };
        pool.push(out);
    }
    let last = *pool.last().unwrap();
    if use_mse {
        let target = tape.constant(Tensor::column(vec![0.3, -0.2, 0.1]));
        tape.mse(last, target)
    } else {
        let m = tape.matmul(a, last)?;
        Ok(tape.sum(m))
    }
}

fn store(vals: &[f64]) -> ParamStore {
    let mut s = ParamStore::new();
    s.insert("a", Tensor::from_vec(3, 3, vals[0..9].to_vec()).unwrap());
    s.insert("x", Tensor::column(vals[9..12].to_vec()));
    s.insert("y", Tensor::column(vals[12..15].to_vec()));
    s.insert("c", Tensor::scalar(vals[15]));
    s.insert("r", Tensor::from_vec(1, 2, vals[16..18].to_vec()).unwrap());
    s.insert("w", Tensor::column(vals[18..20].to_vec()));
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn random_graphs_match_finite_differences(
        vals in proptest::collection::vec(-1.0..1.0f64, 20),
        steps in proptest::collection::vec(step(), 1..8),
        use_mse in any::<bool>(),
    ) {
        let s = store(&vals);
        let err = grad_check(|t, p| build(t, p, &steps, use_mse), &s, 1e-5).unwrap();
        prop_assert!(err <= 1e-4, "max rel error {err} for {steps:?}");
    }

    #[test]
    fn replay_is_bit_identical(
        vals in proptest::collection::vec(-1.0..1.0f64, 20),
        steps in proptest::collection::vec(step(), 1..8),
    ) {
        let grads = || {
            let mut s = store(&vals);
            let mut t = Tape::new();
            let l = build(&mut t, &s, &steps, false).unwrap();
            t.backward(l, &mut s).unwrap();
            s.ids().flat_map(|id| s.grad(id).data().to_vec()).collect::<Vec<_>>()
        };
        let (g1, g2) = (grads(), grads());
        prop_assert_eq!(
            g1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            g2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn gradient_through_rk4_nonlinear_field() {
    let mut s = ParamStore::new();
    s.insert("w", Tensor::from_vec(2, 2, vec![0.4, -0.7, 0.3, 0.2]).unwrap());
    s.insert("z0", Tensor::column(vec![0.5, -1.0]));
    let err = grad_check(
        |tape, p| {
            let w = tape.param(p, p.id("w").unwrap());
            let z0 = tape.param(p, p.id("z0").unwrap());
            let z = rk4_integrate(
                tape,
                |t, z| {
                    let m = t.matmul(w, z)?;
                    Ok(t.tanh(m))
                },
                z0,
                (0.0, 1.0),
                6,
            )?;
            let sq = tape.mul(z, z)?;
            Ok(tape.sum(sq))
        },
        &s,
        1e-5,
    )
    .unwrap();
    assert!(err <= 1e-6, "{err}");
}
