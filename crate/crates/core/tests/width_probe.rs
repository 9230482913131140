//! Exploratory probe of the SLR/SIA/NIA width ordering on the fuzz corpus.
//! Run with --nocapture to see the distribution.

mod common;

use relucheck_core::{nia_forward, sia_forward, slr_forward, ForcedMap};

#[test]
#[ignore]
fn probe_width_ordering() {
    // per dense-layer count: [slr>sia, sia>nia, slr>nia, instances]
    let mut by_depth = std::collections::BTreeMap::<usize, [usize; 4]>::new();
    let mut ratio_sum = 0.0f64;
    let mut ratio_count = 0usize;
    let mut worst: Option<(u64, f64)> = None;
    let total = 1000;
    for seed in 0..total {
        let mut r = common::rng(seed);
        let dims = common::random_architecture(&mut r);
        let net = common::random_dense_net(&mut r, &dims);
        let box_ = common::random_box(&mut r, dims[0], 0.05, 0.5);
        let depth = dims.len() - 1;

        let slr = slr_forward(&net, &box_, &ForcedMap::new()).unwrap();
        let sia = sia_forward(&net, &box_).unwrap();
        let nia = nia_forward(&net, &box_).unwrap();
        let slr_b = slr.output_bounds();
        let sia_b = sia.output_bounds();

        let entry = by_depth.entry(depth).or_default();
        entry[3] += 1;
        for j in 0..net.output_dim() {
            let ws = slr_b[j].width();
            let wi = sia_b[j].width();
            let wn = nia[j].width();
            if ws > wi + 1e-9 {
                entry[0] += 1;
                let excess = ws - wi;
                if worst.is_none_or(|(_, w)| excess > w) {
                    worst = Some((seed, excess));
                }
            }
            if wi > wn + 1e-9 {
                entry[1] += 1;
            }
            if ws > wn + 1e-9 {
                entry[2] += 1;
            }
            if ws > 1e-12 {
                ratio_sum += wn / ws;
                ratio_count += 1;
            }
        }
    }
    for (depth, [ss, sn, slrn, count]) in &by_depth {
        println!(
            "dense layers {depth}: {count} instances, slr>sia {ss}, sia>nia {sn}, slr>nia {slrn}"
        );
    }
    println!(
        "mean nia/slr ratio: {:.3}; worst slr-sia excess: {:?}",
        ratio_sum / ratio_count as f64,
        worst
    );
}
