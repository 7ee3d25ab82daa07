//! Shared substrate: seeded RNG streams, parameter-space geometry, loss
//! functions, sample ledgers, and the deploy-and-collect primitive.

mod data;
mod geom;
mod loss;
mod rng;

pub use data::{
    deploy_and_collect, CountingMap, Dataset, Exploration, SampleCounter, TrueMap,
};
pub use geom::{
    project_ball, sample_uniform_ball, unit_sphere_direction, ParamBall, ParamBox, ThetaSet,
};
pub use loss::{LogisticRidge, Loss, LossKind, SquaredDistance};
pub(crate) use loss::{sigmoid, softplus};
pub use rng::{derive_seed, hash_tag, splitmix64, RngStream};
