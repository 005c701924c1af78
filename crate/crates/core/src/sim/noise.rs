use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::strategy::{self, MixedStrategy};

/// Empirical density of `draws` independent samples from `sigma`.
pub fn resample_strategy(sigma: &[f64], draws: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if draws == 0 {
        return Err(Error::config("draws must be positive"));
    }
    let k = sigma.len();
    let dist = WeightedIndex::new(sigma.iter().copied())
        .map_err(|e| Error::domain(format!("cannot sample from density: {e}")))?;
    let mut counts = vec![0usize; k];
    for _ in 0..draws {
        counts[dist.sample(rng)] += 1;
    }
    Ok(counts.iter().map(|&c| (k * c) as f64 / draws as f64).collect())
}

/// Replaces every stored strategy by the empirical density of `draws`
/// independent samples from it, and recomputes the velocities from the
/// corrupted strategies.
pub fn corrupt_strategies_by_resampling(dataset: &TrajectoryDataset, draws: usize, seed: u64) -> Result<TrajectoryDataset> {
    if draws == 0 {
        return Err(Error::config("draws must be positive"));
    }
    if !dataset.has_strategies() {
        return Err(Error::config("resampling needs a dataset with strategies"));
    }
    let space = dataset
        .meta
        .strategies
        .as_ref()
        .ok_or_else(|| Error::config("dataset has no strategy space"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    for snap in &mut out.snapshots {
        let states = snap.states()?;
        let sig = snap.sigma.as_mut().expect("checked above");
        for (i, s) in sig.iter_mut().enumerate() {
            let density = resample_strategy(s, draws, &mut rng)?;
            let v = strategy::strategy_velocity(states.row(i), &density, space)?;
            let target = snap.v.row_mut(i);
            let m = target.len();
            target.copy_from_slice(&v[..m]);
            *s = MixedStrategy::from_raw(density);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Cloud;
    use crate::dataset::{DatasetMeta, Snapshot};
    use crate::sim::ModelKind;
    use crate::strategy::StrategySpace;

    fn single(sigma: Vec<f64>) -> TrajectoryDataset {
        let space = StrategySpace::scalar(&[-1.0, 0.0, 1.0]).unwrap();
        let v = strategy::strategy_velocity(&[0.0], &sigma, &space).unwrap();
        TrajectoryDataset {
            meta: DatasetMeta {
                kind: ModelKind::FastReaction,
                dim: 1,
                agents: 1,
                strategies: Some(space),
                eps: Some(1.0),
                lambda: None,
                dt: 0.02,
                steps: 1,
                subsample: 1,
                seed: 0,
                realizations: 1,
                payoff: None,
                pedestrian: None,
            },
            snapshots: vec![Snapshot {
                r: 0,
                t: 0.0,
                x: Cloud::from_scalars(&[0.0]).unwrap(),
                v: Cloud::from_scalars(&v).unwrap(),
                sigma: Some(vec![MixedStrategy::new(sigma).unwrap()]),
                theta: None,
                theta_bar: None,
            }],
        }
    }

    #[test]
    fn dirac_is_unchanged() {
        let ds = single(vec![0.0, 3.0, 0.0]);
        let c = corrupt_strategies_by_resampling(&ds, 20, 1).unwrap();
        assert_eq!(c, ds);
    }

    #[test]
    fn corrupted_data_stays_consistent() {
        let ds = single(vec![0.5, 1.0, 1.5]);
        let c = corrupt_strategies_by_resampling(&ds, 20, 3).unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn mean_of_corruptions_recovers_density() {
        let sigma = vec![0.3, 1.2, 1.5];
        let ds = single(sigma.clone());
        let reps = 1000;
        let draws = 20;
        let mut sum = [0.0; 3];
        for seed in 0..reps {
            let c = corrupt_strategies_by_resampling(&ds, draws, seed).unwrap();
            let s = &c.snapshots[0].sigma.as_ref().unwrap()[0];
            for (a, b) in sum.iter_mut().zip(s.iter()) {
                *a += b;
            }
        }
        for (k, &s) in sigma.iter().enumerate() {
            let p = s / 3.0;
            // standard error of K·count/draws averaged over the repetitions
            let se = 3.0 * (p * (1.0 - p) / draws as f64).sqrt() / (reps as f64).sqrt();
            assert!((sum[k] / reps as f64 - s).abs() <= 3.0 * se, "entry {k}");
        }
    }
}
