//! The deploy step: black-box distribution maps, sample ledgers, and
//! exploration data collection.
//!
//! A [`TrueMap`] is the ground truth `theta -> D(theta)`, exposed only
//! through sampling — exactly the access a learner has in the field.
//! [`deploy_and_collect`] deploys a fresh exploration parameter per draw
//! and records (parameter, observation) pairs; [`SampleCounter`] ledgers
//! make sample budgets auditable across competing methods.

use crate::core::geom::ThetaSet;
use crate::core::rng::RngStream;
use crate::error::{CollectError, MapError};
use std::sync::atomic::{AtomicU64, Ordering};

/// A ground-truth distribution map, sampled one observation at a time.
pub trait TrueMap: Send + Sync {
    /// Dimension of the deployable parameter.
    fn theta_dim(&self) -> usize;

    /// Dimension of one observation.
    fn obs_dim(&self) -> usize;

    /// Draw one observation from `D(theta)`.
    fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError>;
}

/// Thread-safe ledger of how many ground-truth draws have been consumed.
#[derive(Debug, Default)]
pub struct SampleCounter(AtomicU64);

impl SampleCounter {
    pub fn new() -> Self {
        SampleCounter(AtomicU64::new(0))
    }

    pub fn add(&self, draws: u64) {
        self.0.fetch_add(draws, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Wraps a map so every draw is charged to a [`SampleCounter`].
///
/// Experiment cells hand methods a `CountingMap`; afterwards the ledger
/// must read exactly the advertised budget, or the run is flagged.
pub struct CountingMap<'a> {
    map: &'a dyn TrueMap,
    counter: &'a SampleCounter,
}

impl<'a> CountingMap<'a> {
    pub fn new(map: &'a dyn TrueMap, counter: &'a SampleCounter) -> Self {
        CountingMap { map, counter }
    }
}

impl TrueMap for CountingMap<'_> {
    fn theta_dim(&self) -> usize {
        self.map.theta_dim()
    }

    fn obs_dim(&self) -> usize {
        self.map.obs_dim()
    }

    fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
        let z = self.map.sample(theta, rng)?;
        self.counter.add(1);
        Ok(z)
    }
}

/// How exploration parameters are chosen during collection.
#[derive(Clone, Debug)]
pub enum Exploration {
    /// Fresh uniform draw from the set for every observation.
    Uniform(ThetaSet),
    /// Always deploy the same parameter.
    Degenerate(Vec<f64>),
}

impl Exploration {
    pub fn dim(&self) -> usize {
        match self {
            Exploration::Uniform(set) => set.dim(),
            Exploration::Degenerate(theta) => theta.len(),
        }
    }

    fn draw(&self, rng: &mut RngStream) -> Vec<f64> {
        match self {
            Exploration::Uniform(set) => set.sample_uniform(rng),
            Exploration::Degenerate(theta) => theta.clone(),
        }
    }
}

/// Deployment data: (exploration parameter, observation) pairs plus the
/// RNG coordinates that produced them.
///
/// Replaying [`deploy_and_collect`] with a fresh stream at the recorded
/// `(seed, stream)` reproduces the pairs bit for bit.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub seed: u64,
    pub stream: u64,
    pub theta_dim: usize,
    pub obs_dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn thetas(&self) -> impl Iterator<Item = &[f64]> {
        self.pairs.iter().map(|(t, _)| t.as_slice())
    }

    pub fn observations(&self) -> impl Iterator<Item = &[f64]> {
        self.pairs.iter().map(|(_, z)| z.as_slice())
    }
}

/// Deploy `n` exploration parameters and collect one observation each.
///
/// This is the only way data enters the pipeline; everything downstream
/// (fitting, scoring) works off the returned pairs.
pub fn deploy_and_collect(
    map: &dyn TrueMap,
    exploration: &Exploration,
    n: usize,
    rng: &mut RngStream,
) -> Result<Dataset, CollectError> {
    if n == 0 {
        return Err(CollectError::EmptyRequest);
    }
    if exploration.dim() != map.theta_dim() {
        return Err(CollectError::DimensionMismatch {
            exploration: exploration.dim(),
            map: map.theta_dim(),
        });
    }
    let seed = rng.seed();
    let stream = rng.stream();
    let mut pairs = Vec::with_capacity(n);
    for index in 0..n {
        let theta = exploration.draw(rng);
        let z = map
            .sample(&theta, rng)
            .map_err(|source| CollectError::MapFailure { index, source })?;
        pairs.push((theta, z));
    }
    Ok(Dataset {
        pairs,
        seed,
        stream,
        theta_dim: map.theta_dim(),
        obs_dim: map.obs_dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::geom::ParamBox;
    use crate::maps::CoinMap;

    #[test]
    fn collect_replays_bit_exactly() {
        let map = CoinMap::new(0.3, 0.1).unwrap();
        let expl = Exploration::Uniform(ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap()));
        let mut rng_a = RngStream::new(5, 9);
        let mut rng_b = RngStream::new(5, 9);
        let a = deploy_and_collect(&map, &expl, 250, &mut rng_a).unwrap();
        let b = deploy_and_collect(&map, &expl, 250, &mut rng_b).unwrap();
        assert_eq!(a.pairs, b.pairs);
        assert_eq!((a.seed, a.stream), (5, 9));
    }

    #[test]
    fn degenerate_deploy_at_zero_is_a_fair_coin() {
        // At theta = 0 the coin's success probability is exactly 1/2.
        let map = CoinMap::new(0.3, 0.1).unwrap();
        let expl = Exploration::Degenerate(vec![0.0]);
        let mut rng = RngStream::new(12, 0);
        let data = deploy_and_collect(&map, &expl, 10_000, &mut rng).unwrap();
        let frac = data.observations().map(|z| z[0]).sum::<f64>() / data.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "frac = {frac}");
    }

    #[test]
    fn zero_draws_rejected() {
        let map = CoinMap::new(0.3, 0.1).unwrap();
        let expl = Exploration::Degenerate(vec![0.0]);
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            deploy_and_collect(&map, &expl, 0, &mut rng),
            Err(CollectError::EmptyRequest)
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let map = CoinMap::new(0.3, 0.1).unwrap();
        let expl = Exploration::Degenerate(vec![0.0, 0.0]);
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            deploy_and_collect(&map, &expl, 5, &mut rng),
            Err(CollectError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn counting_map_charges_every_draw() {
        let map = CoinMap::new(0.3, 0.1).unwrap();
        let counter = SampleCounter::new();
        let counted = CountingMap::new(&map, &counter);
        let expl = Exploration::Degenerate(vec![0.5]);
        let mut rng = RngStream::new(2, 0);
        deploy_and_collect(&counted, &expl, 123, &mut rng).unwrap();
        assert_eq!(counter.count(), 123);
    }

    #[test]
    fn map_failure_reports_pair_index() {
        let map = CoinMap::new(0.3, 0.1).unwrap();
        // Out-of-domain deployment fails at the first pair.
        let expl = Exploration::Degenerate(vec![2.0]);
        let mut rng = RngStream::new(2, 0);
        match deploy_and_collect(&map, &expl, 5, &mut rng) {
            Err(CollectError::MapFailure { index, .. }) => assert_eq!(index, 0),
            other => panic!("expected map failure, got {other:?}"),
        }
    }
}
