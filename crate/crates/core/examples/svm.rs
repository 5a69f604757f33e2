//! SMO on a precomputed kernel: train on four points, predict two more.

use tmkl::data::Stance;
use tmkl::kernels::linear_feature_kernel;
use tmkl::svm::{smo_train, svm_predict, SmoConfig};

fn main() -> tmkl::Result<()> {
    let points = vec![
        vec![2.0, 1.0],
        vec![1.5, 2.0],
        vec![-1.0, -1.5],
        vec![-2.0, -0.5],
        vec![1.0, 0.5],
        vec![-0.5, -1.0],
    ];
    let users: Vec<String> = (0..points.len()).map(|i| format!("p{i}")).collect();
    let k = linear_feature_kernel(users, &points)?;
    let train = [0, 1, 2, 3];
    let y = [Stance::Yes, Stance::Yes, Stance::No, Stance::No];
    let model = smo_train(&k.select(&train), &y, 1.0, &SmoConfig::default())?;
    println!("alphas {:?}, bias {:.4}, {} iterations", model.alphas, model.bias, model.iterations);
    let pred = svm_predict(&model, &k.cross(&[4, 5], &train))?;
    for (l, m) in pred.labels.iter().zip(&pred.margins) {
        println!("{l} (margin {m:.4})");
    }
    Ok(())
}
