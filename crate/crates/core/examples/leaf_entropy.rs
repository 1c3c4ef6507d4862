//! Leaf-wise topological entropy from separated and generating sets, next to
//! the geometric growth of the same leaf.
//!
//! cargo run --release --example leaf_entropy

use anosov_lab::families::SmoothConjugateFamily;
use anosov_lab::foliation::LeafOptions;
use anosov_lab::leaf_entropy::{default_eps_schedule, entropy_growth_gap};
use anosov_lab::torus::{AnosovMap, BundleTag, ConeRequest, TorusPoint};

fn main() -> anosov_lab::error::Result<()> {
    let fam = SmoothConjugateFamily::new(0.05);
    let map = AnosovMap::certified(
        fam.linear_part(),
        fam.perturbation(),
        ConeRequest::default(),
        12,
    )?;
    let x = TorusPoint::new(0.1, 0.2, 0.3);
    let r = 0.1;
    let opts = LeafOptions::with_max_step(2.5e-4);

    for (tag, n_max) in [
        (BundleTag::StrongUnstable, 7),
        (BundleTag::WeakUnstable, 12),
    ] {
        let g = entropy_growth_gap(
            map.forward(),
            tag,
            &x,
            r,
            n_max,
            &default_eps_schedule(r),
            &opts,
        )?;
        println!(
            "{}: h = {:.5}  chi = {:.5}  gap = {:+.1e}",
            tag.short(),
            g.entropy.h,
            g.growth.chi,
            g.gap
        );
        for s in &g.entropy.slopes {
            println!(
                "    eps {:.4}: separated {:.5}  generator {:.5}",
                s.eps, s.separated_slope, s.generator_slope
            );
        }
        let last = g
            .entropy
            .table
            .cells
            .iter()
            .filter(|c| c.n == n_max)
            .collect::<Vec<_>>();
        for c in last {
            println!(
                "    n = {} eps = {:.4}: s = {} g = {}",
                c.n, c.eps, c.s_count, c.g_count
            );
        }
    }
    Ok(())
}
