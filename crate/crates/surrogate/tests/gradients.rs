use modkit_surrogate::lngru::{parameter_blocks, Architecture, SequenceModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Loss `sum c*y + 0.5 * sum y^2`, so the output gradient is `c + y`.
fn loss(model: &SequenceModel, x: &[f64], c: &[f64]) -> f64 {
    let (y, _) = model.forward(x).unwrap();
    y.iter().zip(c).map(|(y, c)| c * y + 0.5 * y * y).sum()
}

fn random_instance(seed: u64) -> (SequenceModel, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.gen_range(1..=4);
    let hidden = rng.gen_range(1..=8);
    let layers = rng.gen_range(1..=3);
    let output = rng.gen_range(1..=3);
    let steps = rng.gen_range(1..=12);
    let mut arch = Architecture::new(input, hidden, layers, output);
    if rng.gen_bool(0.5) {
        arch = arch.with_skip((0..output).map(|_| rng.gen_range(0..input)).collect());
    }
    let mut m = SequenceModel::init(arch, &mut rng).unwrap();
    // move gains and offsets away from 1 and 0 so their gradients are generic
    for p in m.params.iter_mut() {
        *p += rng.gen_range(-0.3..0.3);
    }
    let x = (0..steps * input).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let c = (0..steps * output).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (m, x, c)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn check_instance(seed: u64) {
    let (m, x, c) = random_instance(seed);
    let (y, cache) = m.forward(&x).unwrap();
    let d_out: Vec<f64> = y.iter().zip(&c).map(|(y, c)| c + y).collect();
    let (grad, d_in) = m.backward(&cache, &d_out).unwrap();

    let mut numeric = vec![0.0; m.params.len()];
    let mut probe = m.clone();
    for i in 0..m.params.len() {
        let h = 1e-5 * (1.0 + m.params[i].abs());
        probe.params[i] = m.params[i] + h;
        let up = loss(&probe, &x, &c);
        probe.params[i] = m.params[i] - h;
        let down = loss(&probe, &x, &c);
        probe.params[i] = m.params[i];
        numeric[i] = (up - down) / (2.0 * h);
    }
    for (name, range) in parameter_blocks(&m.arch) {
        let e = rel_err(&grad[range.clone()], &numeric[range.clone()]);
        assert!(e <= 1e-4, "seed {seed} {:?}: block {name} relative error {e:.3e}", m.arch);
        for i in range {
            let tol = 1e-4 * grad[i].abs().max(numeric[i].abs()) + 1e-8;
            assert!((grad[i] - numeric[i]).abs() <= tol, "seed {seed}: {name}[{i}] {} vs {}", grad[i], numeric[i]);
        }
    }

    let mut xs = x.clone();
    let mut d_num = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = 1e-5 * (1.0 + x[i].abs());
        xs[i] = x[i] + h;
        let up = loss(&m, &xs, &c);
        xs[i] = x[i] - h;
        let down = loss(&m, &xs, &c);
        xs[i] = x[i];
        d_num[i] = (up - down) / (2.0 * h);
    }
    let e = rel_err(&d_in, &d_num);
    assert!(e <= 1e-4, "seed {seed}: input gradient relative error {e:.3e}");
}

#[test]
fn analytic_gradients_match_central_differences() {
    for seed in 0..12 {
        check_instance(seed);
    }
}

#[test]
fn gradient_accumulates_across_calls() {
    let (m, x, c) = random_instance(99);
    let (y, cache) = m.forward(&x).unwrap();
    let d_out: Vec<f64> = y.iter().zip(&c).map(|(y, c)| c + y).collect();
    let (g1, _) = m.backward(&cache, &d_out).unwrap();
    let mut acc = g1.clone();
    m.backward_into(&cache, &d_out, &mut acc).unwrap();
    for (a, b) in acc.iter().zip(&g1) {
        assert!((a - 2.0 * b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}
