use fedleaf::arch::{tiny_cnn, tiny_cnn_bn, tiny_mlp};
use fedleaf::nn::gradcheck::{check_layer, check_model};
use fedleaf::nn::{
    argmax, cross_entropy, BatchNorm2d, Conv2d, Dense, Flatten, Layer, MaxPool2d, Model, Relu, SgdMomentum, Tensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Values bounded away from zero so no ReLU input sits on its kink.
fn away_from_zero(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

fn single_weight_model(w: f64) -> Model<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut dense = Dense::new(1, 1, false, &mut rng);
    dense.weight.data_mut()[0] = w;
    Model::new(vec![1], vec![Layer::Dense(dense)]).unwrap()
}

/// Runs forward on x=1 and backward with upstream gradient `g`, which makes
/// the weight gradient exactly `g`.
fn set_gradient(model: &mut Model<f64>, g: f64) {
    let x = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
    model.forward(&x, true).unwrap();
    model.backward(&Tensor::new(vec![1, 1], vec![g]).unwrap()).unwrap();
}

fn weight(model: &Model<f64>) -> f64 {
    model.layers()[0].params()[0].data()[0]
}

#[test]
fn dense_identity_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut d = Dense::new(2, 2, true, &mut rng);
    d.weight = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    d.bias = Some(Tensor::zeros(vec![2]));
    let mut layer = Layer::Dense(d);
    let y = layer
        .forward(&Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap(), true)
        .unwrap();
    assert_eq!(y.data(), &[3.0, 4.0]);
}

#[test]
fn relu_and_maxpool_forward() {
    let mut relu = Layer::<f64>::Relu(Relu::default());
    let y = relu
        .forward(&Tensor::new(vec![1, 2], vec![-1.0, 2.0]).unwrap(), true)
        .unwrap();
    assert_eq!(y.data(), &[0.0, 2.0]);
    let mut pool = Layer::<f64>::MaxPool2d(MaxPool2d::new(2, 2));
    let y = pool
        .forward(&Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(), true)
        .unwrap();
    assert_eq!(y.shape(), &[1, 1, 1, 1]);
    assert_eq!(y.data(), &[4.0]);
}

#[test]
fn plain_sgd_step() {
    let mut model = single_weight_model(1.0);
    let mut opt = SgdMomentum::new(0.5, 0.0).unwrap();
    set_gradient(&mut model, 2.0);
    opt.step(&mut model);
    assert_eq!(weight(&model), 0.0);
}

#[test]
fn momentum_two_steps() {
    let mut model = single_weight_model(1.0);
    let mut opt = SgdMomentum::new(0.1, 0.9).unwrap();
    set_gradient(&mut model, 1.0);
    opt.step(&mut model);
    assert!((opt.velocity()[0].data()[0] - 1.0).abs() < 1e-15);
    assert!((weight(&model) - 0.9).abs() < 1e-15);
    set_gradient(&mut model, 1.0);
    opt.step(&mut model);
    assert!((opt.velocity()[0].data()[0] - 1.9).abs() < 1e-15);
    assert!((weight(&model) - 0.71).abs() < 1e-15);
}

#[test]
fn zero_gradient_decays_velocity_only() {
    let mut model = single_weight_model(1.0);
    let mut opt = SgdMomentum::new(0.1, 0.9).unwrap();
    set_gradient(&mut model, 1.0);
    opt.step(&mut model);
    let w = weight(&model);
    set_gradient(&mut model, 0.0);
    opt.step(&mut model);
    assert!((opt.velocity()[0].data()[0] - 0.9).abs() < 1e-15);
    assert!((weight(&model) - (w - 0.1 * 0.9)).abs() < 1e-15);
}

#[test]
fn invalid_hyperparameters() {
    assert!(SgdMomentum::<f64>::new(-1.0, 0.0).is_err());
    assert!(SgdMomentum::<f64>::new(f64::NAN, 0.0).is_err());
    assert!(SgdMomentum::<f64>::new(0.1, 1.0).is_err());
}

#[test]
fn zero_upstream_gradient_gives_zero_parameter_gradients() {
    let mut model = tiny_cnn_bn([1, 6, 6], 3).unwrap().build::<f64>(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random(vec![2, 1, 6, 6], &mut rng);
    model.forward(&x, true).unwrap();
    model.backward(&Tensor::zeros(vec![2, 3])).unwrap();
    for layer in model.layers() {
        for g in layer.grads() {
            assert!(g.data().iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn backward_before_forward_is_an_error() {
    let mut model = tiny_mlp(4, 3, 2).unwrap().build::<f64>(0).unwrap();
    assert!(model.backward(&Tensor::zeros(vec![1, 2])).is_err());
}

#[test]
fn shape_mismatch_and_non_finite_input() {
    let mut model = tiny_mlp(4, 3, 2).unwrap().build::<f64>(0).unwrap();
    assert!(model.forward(&Tensor::zeros(vec![1, 5]), false).is_err());
    let bad = Tensor::new(vec![1, 4], vec![0.0, f64::NAN, 0.0, 0.0]).unwrap();
    assert!(model.forward(&bad, false).is_err());
}

#[test]
fn gradient_check_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut layer = Layer::Dense(Dense::new(5, 3, true, &mut rng));
    let x = random(vec![4, 5], &mut rng);
    let r = check_layer(&mut layer, &x, STEP, 1).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
    assert_eq!(r.checked, 20 + 15 + 3);
}

#[test]
fn gradient_check_conv2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (stride, padding) in [(1, 0), (1, 1), (2, 1)] {
        let mut layer = Layer::Conv2d(Conv2d::new(2, 3, (3, 3), stride, padding, true, &mut rng));
        let x = random(vec![2, 2, 5, 5], &mut rng);
        let r = check_layer(&mut layer, &x, STEP, 2).unwrap();
        assert!(r.max_rel_error < TOL, "stride {stride} padding {padding}: {r:?}");
    }
}

#[test]
fn gradient_check_maxpool() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut layer = Layer::MaxPool2d(MaxPool2d::new(2, 2));
    let x = random(vec![2, 3, 4, 4], &mut rng);
    let r = check_layer(&mut layer, &x, STEP, 3).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn gradient_check_relu() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut layer = Layer::Relu(Relu::default());
    let x = away_from_zero(vec![3, 7], &mut rng);
    let r = check_layer(&mut layer, &x, STEP, 4).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn gradient_check_flatten() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut layer = Layer::Flatten(Flatten::default());
    let x = random(vec![2, 2, 3, 3], &mut rng);
    let r = check_layer(&mut layer, &x, STEP, 5).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn gradient_check_batchnorm() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut bn = BatchNorm2d::new(3);
    bn.gamma = random(vec![3], &mut rng);
    bn.beta = random(vec![3], &mut rng);
    let mut layer = Layer::BatchNorm2d(bn);
    let x = random(vec![4, 3, 3, 3], &mut rng);
    let r = check_layer(&mut layer, &x, STEP, 6).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn gradient_check_whole_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for arch in [
        tiny_mlp(6, 5, 3).unwrap(),
        tiny_cnn([1, 6, 6], 3).unwrap(),
        tiny_cnn_bn([2, 6, 6], 3).unwrap(),
    ] {
        let mut model = arch.build::<f64>(7).unwrap();
        let mut shape = vec![4];
        shape.extend(arch.input_shape());
        let x = away_from_zero(shape, &mut rng);
        let labels = [0, 1, 2, 1];
        let r = check_model(&mut model, &x, &labels, STEP).unwrap();
        assert!(r.max_rel_error < TOL, "{}: {r:?}", arch.name());
    }
}

#[test]
fn batchnorm_eval_uses_running_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut bn = BatchNorm2d::<f64>::new(2);
    let x = random(vec![3, 2, 2, 2], &mut rng);
    // Fresh running stats are mean 0, var 1: eval is nearly the identity.
    let y = bn.forward(&x, false).unwrap();
    for (a, b) in y.data().iter().zip(x.data()) {
        assert!((a - b / (1.0 + 1e-5f64).sqrt()).abs() < 1e-12);
    }
    bn.forward(&x, true).unwrap();
    assert!(bn.running_mean.data().iter().any(|m| *m != 0.0));
}

fn separable_toy(rng: &mut ChaCha8Rng) -> (Tensor<f64>, Vec<usize>) {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let c = i % 2;
        let centre = if c == 0 { -2.0 } else { 2.0 };
        data.push(centre + rng.random_range(-0.5..0.5));
        data.push(rng.random_range(-1.0..1.0));
        labels.push(c);
    }
    (Tensor::new(vec![40, 2], data).unwrap(), labels)
}

#[test]
fn loss_decreases_on_separable_toy() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let (x, y) = separable_toy(&mut rng);
    let mut model = tiny_mlp(2, 4, 2).unwrap().build::<f64>(3).unwrap();
    let mut opt = SgdMomentum::new(0.1, 0.9).unwrap();
    let before = cross_entropy(&model.infer(&x).unwrap(), &y).unwrap().0;
    for _ in 0..100 {
        model.train_batch(&x, &y, &mut opt).unwrap();
    }
    let logits = model.infer(&x).unwrap();
    let after = cross_entropy(&logits, &y).unwrap().0;
    assert!(after < before, "{after} >= {before}");
    let correct = logits
        .data()
        .chunks(2)
        .zip(&y)
        .filter(|(row, l)| argmax(row) == **l)
        .count();
    assert_eq!(correct, 40);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let (x, y) = separable_toy(&mut rng);
        let mut model = tiny_cnn_bn([1, 4, 4], 2).unwrap().build::<f32>(5).unwrap();
        let x = Tensor::<f32>::from_f64(vec![5, 1, 4, 4], x.data()).unwrap();
        let mut opt = SgdMomentum::new(0.05, 0.9).unwrap();
        for _ in 0..5 {
            model.train_batch(&x, &y[..5], &mut opt).unwrap();
        }
        model.state_values()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn shape_function_matches_forward(
        c in 1usize..3, h in 4usize..9, w in 4usize..9,
        k in 1usize..4, stride in 1usize..3, padding in 0usize..2, batch in 1usize..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut layers = vec![
            Layer::Conv2d(Conv2d::new(c, 2, (k, k), stride, padding, true, &mut rng)),
            Layer::BatchNorm2d(BatchNorm2d::new(2)),
            Layer::Relu(Relu::default()),
            Layer::MaxPool2d(MaxPool2d::new(2, 1)),
            Layer::Flatten(Flatten::default()),
        ];
        let mut shape = vec![c, h, w];
        let mut x = random(vec![batch, c, h, w], &mut rng);
        for layer in &mut layers {
            shape = match layer.output_shape(&shape) {
                Ok(s) => s,
                Err(_) => return Ok(()),
            };
            x = layer.forward(&x, true).unwrap();
            prop_assert_eq!(&x.shape()[1..], shape.as_slice());
        }
    }
}
