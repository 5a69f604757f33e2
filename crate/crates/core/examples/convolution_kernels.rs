//! Plain and temporal convolution kernels between a few hand-made users.

use tmkl::data::ItemSeries;
use tmkl::kernels::{conv_kernel, gram, normalize, temporal_conv_kernel, SubKernel};

const DAY: i64 = 86_400;

fn main() -> tmkl::Result<()> {
    let users = vec![
        ItemSeries::from_items("early_yes", 2, vec![(vec![1.0, 0.2], 0), (vec![0.9, 0.1], DAY)])?,
        ItemSeries::from_items("late_yes", 2, vec![(vec![1.0, 0.0], 5 * DAY), (vec![0.8, 0.3], 6 * DAY)])?,
        ItemSeries::from_items("no", 2, vec![(vec![-0.2, 1.0], 0), (vec![0.0, 0.9], 6 * DAY)])?,
    ];
    let time = SubKernel::rbf(0.5)?;
    for a in &users {
        for b in &users {
            let plain = conv_kernel(a, b, SubKernel::Linear)?;
            let temporal = temporal_conv_kernel(a, b, SubKernel::Linear, time)?;
            println!("{:>10} {:>10}  plain {plain:.4}  temporal {temporal:.4}", a.user_id, b.user_id);
        }
    }
    let k = normalize(&gram(&users, SubKernel::Linear, Some(time))?)?;
    println!("normalised temporal gram, min eigenvalue {:.3e}", k.min_eigenvalue());
    for i in 0..k.n() {
        let row: Vec<String> = k.row(i).iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
