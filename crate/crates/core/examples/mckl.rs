//! SILP kernel weights when one kernel carries the labels and one is noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmkl::data::Stance;
use tmkl::kernels::{linear_feature_kernel, normalize, KernelTag};
use tmkl::mckl::{silp_train, SilpConfig};

fn main() -> tmkl::Result<()> {
    let n = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y: Vec<Stance> = (0..n).map(|i| if i % 2 == 0 { Stance::Yes } else { Stance::No }).collect();
    let users: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
    let informative: Vec<Vec<f64>> = y.iter().map(|l| vec![l.sign() + rng.random_range(-0.5..0.5), 1.0]).collect();
    let noise: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ks = vec![
        normalize(&linear_feature_kernel(users.clone(), &informative)?)?.with_tag(KernelTag::W),
        normalize(&linear_feature_kernel(users, &noise)?)?.with_tag(KernelTag::Noise),
    ];
    let model = silp_train(&ks, &y, 1.0, &SilpConfig::default())?;
    for (tag, w) in model.tags.iter().zip(&model.weights) {
        println!("{tag}: {w:.4}");
    }
    println!("{} SILP iterations, converged: {}", model.trace.len(), model.converged);
    Ok(())
}
