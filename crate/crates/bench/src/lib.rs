//! Fixtures shared by the benchmarks.

use padic_sojourn::{ModelParams, NormChainGenerator, DEFAULT_MAX_LEVEL};

/// The recurrent reference model `p = 2`, `alpha = 2`.
pub fn recurrent() -> ModelParams {
    ModelParams::new(2, 2.0).expect("valid parameters")
}

/// The transient reference model `p = 2`, `alpha = 0.5`.
pub fn transient() -> ModelParams {
    ModelParams::new(2, 0.5).expect("valid parameters")
}

pub fn generator(params: ModelParams) -> NormChainGenerator {
    NormChainGenerator::new(params, DEFAULT_MAX_LEVEL).expect("valid cutoff")
}
