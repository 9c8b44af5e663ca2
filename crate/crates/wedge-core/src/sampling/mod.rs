//! Wedge-sample generation, uniform entry sampling, wedge-matrix
//! construction, and debiased observations.

mod uniform;
mod wedge;

pub use uniform::{debiased_dense, debiased_unfolding, sample_uniform, ObservationSet};
pub use wedge::{build_wedge_matrix, sample_wedges, WedgeMatrix, WedgeSampleSet, WedgeTriple};

use rand::Rng;

/// Draw `count` distinct u64 values uniformly from `[0, total)`, sorted
/// ascending.
///
/// For draw fractions above one half the complement is sampled instead and
/// inverted, so the expected work stays `O(count)` in all regimes. Drawing
/// `count ~ Binomial(total, p)` first and then a uniform `count`-subset is
/// distributionally identical to including each element independently with
/// probability `p`.
pub(crate) fn sample_distinct_sorted(
    total: u64,
    count: u64,
    rng: &mut impl Rng,
) -> Vec<u64> {
    assert!(count <= total);
    if count == 0 {
        return Vec::new();
    }
    if count == total {
        return (0..total).collect();
    }
    if count * 2 > total {
        // Sample the complement and invert.
        let excluded = draw_distinct(total, total - count, rng);
        let mut out = Vec::with_capacity(count as usize);
        let mut ex_iter = excluded.iter().peekable();
        for v in 0..total {
            match ex_iter.peek() {
                Some(&&e) if e == v => {
                    ex_iter.next();
                }
                _ => out.push(v),
            }
        }
        out
    } else {
        draw_distinct(total, count, rng)
    }
}

fn draw_distinct(total: u64, count: u64, rng: &mut impl Rng) -> Vec<u64> {
    let mut seen = std::collections::HashSet::with_capacity(count as usize * 2);
    while (seen.len() as u64) < count {
        let v = rng.gen_range(0..total);
        seen.insert(v);
    }
    let mut out: Vec<u64> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distinct_sorted_covers_both_density_regimes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(total, count) in &[(100u64, 3u64), (100, 97), (100, 100), (10, 0)] {
            let v = sample_distinct_sorted(total, count, &mut rng);
            assert_eq!(v.len(), count as usize);
            assert!(v.windows(2).all(|w| w[0] < w[1]));
            assert!(v.iter().all(|&x| x < total));
        }
    }
}
